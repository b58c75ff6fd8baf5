//! Output directory whose files all carry the config hash.

use crate::config::Config;
use crate::error::CliError;
use num_complex::Complex64;
use serde_json::{json, Value};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub struct Output {
    dir: PathBuf,
    hash: String,
    files: Vec<String>,
}

impl Output {
    pub fn new(dir: &Path, config: &Config) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        let mut out = Output { dir: dir.to_path_buf(), hash: config.hash(), files: Vec::new() };
        out.text("config.txt", |w| w.write_all(config.canonical().as_bytes()))?;
        Ok(out)
    }

    /// A text file whose first line is `# config_hash=<hash>`.
    pub fn text(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "# config_hash={}", self.hash)?;
        body(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// `manifest.json`: the command, the hash, the resolved config, the files
    /// written and the command's results.
    pub fn finish(self, command: &str, config: &Config, results: Value) -> Result<(), CliError> {
        let manifest = json!({
            "command": command,
            "config_hash": self.hash,
            "config": config.map(),
            "files": self.files,
            "results": results,
        });
        let mut w = BufWriter::new(File::create(self.dir.join("manifest.json"))?);
        serde_json::to_writer_pretty(&mut w, &manifest).map_err(std::io::Error::from)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

pub fn complex(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn complex_table(rows: &[Vec<Complex64>]) -> Value {
    Value::Array(rows.iter().map(|r| Value::Array(r.iter().map(|&z| complex(z)).collect())).collect())
}
