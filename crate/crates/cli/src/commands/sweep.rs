use super::Command;
use crate::config::Config;
use crate::error::CliError;
use rayon::prelude::*;
use serde_json::json;
use std::io::Write;
use std::path::Path;

/// Runs `sweep.command` once per value of `sweep.key`, each into its own
/// `run<i>` directory. Returns the largest exit code of the runs.
pub fn run(config: &Config, dir: &Path) -> Result<(), CliError> {
    let cmd = Command::from_name(config.raw("sweep.command")).expect("schema restricts sweep.command");
    let key = config.raw("sweep.key");
    let values = config.list("sweep.values");
    if values.is_empty() {
        return Err(CliError::Config("sweep.values: no values".into()));
    }
    let runs: Vec<Config> = values
        .iter()
        .map(|v| {
            let mut c = config.clone();
            c.set(key, &v.to_string())?;
            Ok(c)
        })
        .collect::<Result<_, CliError>>()?;
    std::fs::create_dir_all(dir)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.usize("sweep.threads")).build().map_err(|e| CliError::Config(format!("sweep.threads: {e}")))?;
    let outcomes: Vec<(String, Result<(), CliError>)> = pool.install(|| {
        runs.par_iter()
            .enumerate()
            .map(|(i, c)| {
                let name = format!("run{i:03}");
                let res = super::run(cmd, c, &dir.join(&name));
                (name, res)
            })
            .collect()
    });
    let summary: Vec<_> = outcomes
        .iter()
        .zip(&runs)
        .zip(&values)
        .map(|(((name, res), c), v)| {
            json!({
                "dir": name,
                "value": v,
                "config_hash": c.hash(),
                "exit_code": res.as_ref().map_or_else(|e| e.exit_code(), |_| 0),
                "error": res.as_ref().err().map(|e| e.to_string()),
            })
        })
        .collect();
    let manifest = json!({"command": "sweep", "config_hash": config.hash(), "config": config.map(), "key": key, "runs": summary});
    let mut f = std::fs::File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut f, &manifest).map_err(std::io::Error::from)?;
    writeln!(f)?;
    // the worst failure decides the exit code
    match outcomes.into_iter().filter_map(|(_, r)| r.err()).max_by_key(|e| e.exit_code()) {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
