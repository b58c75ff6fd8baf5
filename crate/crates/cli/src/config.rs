//! Flat `key = value` run configuration.

use crate::error::CliError;
use sha2::{Digest, Sha256};
use smap::BlowupParams;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Float,
    /// A float or `auto`.
    OptFloat,
    Int,
    Bool,
    Choice(&'static [&'static str]),
    FloatList,
    Key,
}

pub struct Entry {
    pub key: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub doc: &'static str,
}

const fn e(key: &'static str, kind: Kind, default: &'static str, doc: &'static str) -> Entry {
    Entry { key, kind, default, doc }
}

pub const COMMANDS: &[&str] = &["profiles", "residual", "evolve", "match"];

pub const SCHEMA: &[Entry] = &[
    e("nu", Kind::Float, "1.5", "rate exponent, lambda(t) = t^(-1/2-nu); must exceed 1"),
    e("alpha0", Kind::Float, "0.3", "rotation rate, alpha(t) = alpha0 ln t"),
    e("delta", Kind::Float, "0.2", "remote profile size, 0 < delta <= 0.5"),
    e("order_n", Kind::Int, "1", "expansion order N >= 1"),
    e("eps1", Kind::OptFloat, "auto", "inner/self-similar overlap exponent; auto = nu/2"),
    e("eps2", Kind::Float, "0.25", "self-similar/remote overlap exponent, 0 < eps2 < 1/2"),
    e("seed", Kind::Int, "0", "seed for randomized inputs; recorded, no command draws random numbers yet"),
    e("inner.r_max", Kind::Float, "30000", "outer radius of the inner grid (rho)"),
    e("inner.nodes", Kind::Int, "7000", "inner grid nodes"),
    e("inner.first_step", Kind::Float, "0.001", "first inner grid spacing"),
    e("selfsim.y_max", Kind::Float, "100", "outer end of the self-similar march"),
    e("remote.tail_cutoff", Kind::Bool, "true", "cut the remote corrections off beyond 3 delta"),
    e("remote.table_nodes", Kind::Int, "400", "nodes of the remote g-tables"),
    e("profiles.t0", Kind::Float, "0.01", "largest t of the mismatch ladder"),
    e("profiles.points", Kind::Int, "4", "dyadic points of the mismatch ladder"),
    e("profiles.samples", Kind::Int, "400", "y samples per self-similar profile"),
    e("residual.t0", Kind::Float, "0.00016", "largest t of the residual ladder"),
    e("residual.points", Kind::Int, "6", "dyadic points of the residual ladder"),
    e("residual.r_max", Kind::Float, "1", "outer radius of the residual grid"),
    e("residual.compare", Kind::Bool, "true", "also fit the ladder slope for N = 1 and N = 2"),
    e("residual.dump_un", Kind::Bool, "false", "write u^(N)(t0) on the residual grid"),
    e("evolve.initial", Kind::Choice(&["approximate", "harmonic", "constant"]), "approximate", "initial field"),
    e("evolve.t1", Kind::Float, "0.1", "start time"),
    e("evolve.direction", Kind::Choice(&["forward", "backward"]), "forward", "sign of the run"),
    e("evolve.duration", Kind::Float, "0.1", "length of the run"),
    e("evolve.r_max", Kind::Float, "1", "outer radius of the run grid"),
    e("evolve.nodes", Kind::Int, "2000", "run grid nodes (harmonic and constant)"),
    e("evolve.first_step", Kind::Float, "0.001", "first run grid spacing (harmonic and constant)"),
    e("evolve.stability", Kind::Float, "64", "step size as a multiple of h_min^2"),
    e("evolve.dt", Kind::OptFloat, "auto", "fixed step size; auto = stability h_min^2"),
    e("match.t0", Kind::Float, "0.1", "largest t of the modulation ladder"),
    e("match.points", Kind::Int, "5", "dyadic points of the modulation ladder"),
    e("match.r_max", Kind::Float, "1", "outer radius of the fitting grid"),
    e("sweep.command", Kind::Choice(COMMANDS), "residual", "command run for every sweep value"),
    e("sweep.key", Kind::Key, "nu", "config key varied by the sweep"),
    e("sweep.values", Kind::FloatList, "1.5,2,2.5", "comma-separated values of sweep.key"),
    e("sweep.threads", Kind::Int, "0", "worker threads; 0 = one per core"),
];

/// The schema as help text.
pub fn schema_help() -> String {
    let mut s = String::from("Config keys (default in brackets):\n");
    for e in SCHEMA {
        s.push_str(&format!("  {:<20} {} [{}]\n", e.key, e.doc, e.default));
    }
    s
}

fn entry(key: &str) -> Option<&'static Entry> {
    SCHEMA.iter().find(|e| e.key == key)
}

fn float(key: &str, raw: &str) -> Result<f64, CliError> {
    match raw.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(CliError::Config(format!("{key}: expected a finite number, got {raw:?}"))),
    }
}

/// Canonical spelling of `raw`, so equal settings hash equally.
fn normalize(e: &Entry, raw: &str) -> Result<String, CliError> {
    let key = e.key;
    let bad = |what: &str| CliError::Config(format!("{key}: expected {what}, got {raw:?}"));
    Ok(match e.kind {
        Kind::Float => float(key, raw)?.to_string(),
        Kind::OptFloat if raw == "auto" => raw.to_string(),
        Kind::OptFloat => float(key, raw)?.to_string(),
        Kind::Int => raw.parse::<usize>().map_err(|_| bad("a non-negative integer"))?.to_string(),
        Kind::Bool => raw.parse::<bool>().map_err(|_| bad("true or false"))?.to_string(),
        Kind::Choice(opts) if opts.contains(&raw) => raw.to_string(),
        Kind::Choice(opts) => return Err(bad(&format!("one of {}", opts.join(", ")))),
        Kind::FloatList if raw.trim().is_empty() => String::new(),
        Kind::FloatList => {
            let xs: Vec<String> = raw.split(',').map(|s| float(key, s.trim()).map(|x| x.to_string())).collect::<Result<_, _>>()?;
            xs.join(",")
        }
        Kind::Key => match entry(raw) {
            Some(t) if !t.key.starts_with("sweep.") => raw.to_string(),
            _ => return Err(bad("a config key outside sweep.*")),
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<&'static str, String>,
}

impl Default for Config {
    fn default() -> Self {
        Config { values: SCHEMA.iter().map(|e| (e.key, e.default.to_string())).collect() }
    }
}

impl Config {
    /// Defaults, then the file, then the overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut c = Config::default();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display()))))?;
            c.apply_text(&text)?;
        }
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| CliError::Config(format!("override {o:?} is not key=value")))?;
            c.set(k.trim(), v.trim())?;
        }
        Ok(c)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        let mut seen = std::collections::HashSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(CliError::Config(format!("line {}: {k} set twice", n + 1)));
            }
            self.set(k, v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), CliError> {
        let e = entry(key).ok_or_else(|| CliError::Config(format!("unknown key {key:?}")))?;
        let v = normalize(e, raw)?;
        self.values.insert(e.key, v);
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("{key} is not in the schema"))
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.raw(key).parse().expect("normalized float")
    }

    pub fn opt_f64(&self, key: &str) -> Option<f64> {
        self.raw(key).parse().ok()
    }

    pub fn usize(&self, key: &str) -> usize {
        self.raw(key).parse().expect("normalized integer")
    }

    pub fn bool(&self, key: &str) -> bool {
        self.raw(key) == "true"
    }

    pub fn list(&self, key: &str) -> Vec<f64> {
        let raw = self.raw(key);
        if raw.is_empty() {
            return Vec::new();
        }
        raw.split(',').map(|s| s.parse().expect("normalized list")).collect()
    }

    /// Validated physical parameters.
    pub fn params(&self) -> Result<BlowupParams, CliError> {
        let nu = self.f64("nu");
        let p = BlowupParams {
            nu,
            alpha0: self.f64("alpha0"),
            delta: self.f64("delta"),
            order_n: self.usize("order_n"),
            eps1: self.opt_f64("eps1").unwrap_or(nu / 2.0),
            eps2: self.f64("eps2"),
        };
        p.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(p)
    }

    pub fn map(&self) -> &BTreeMap<&'static str, String> {
        &self.values
    }

    /// One sorted `key = value` line per schema entry.
    pub fn canonical(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// SHA-256 of the canonical text framed as a git blob.
    pub fn hash(&self) -> String {
        let text = self.canonical();
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", text.len()));
        h.update(text.as_bytes());
        format!("{:x}", h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = Config::default();
        for e in SCHEMA {
            assert_eq!(normalize(e, e.default).unwrap(), e.default, "{}", e.key);
        }
        c.params().unwrap();
    }

    #[test]
    fn spelling_does_not_change_the_hash() {
        let mut a = Config::default();
        let mut b = Config::default();
        a.set("nu", "2").unwrap();
        b.set("nu", "2.000").unwrap();
        b.set("sweep.values", " 1.5 , 2, 2.5").unwrap();
        assert_eq!(a.hash(), b.hash());
        a.set("delta", "0.1").unwrap();
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn file_syntax() {
        let mut c = Config::default();
        c.apply_text("# comment\n\nnu = 2.5  # trailing\norder_n=2\n").unwrap();
        assert_eq!(c.f64("nu"), 2.5);
        assert_eq!(c.usize("order_n"), 2);
        assert!(c.apply_text("nu = 2\nnu = 3\n").is_err());
        assert!(c.apply_text("bogus = 1\n").is_err());
        assert!(c.apply_text("nu 2\n").is_err());
    }

    #[test]
    fn rejected_values() {
        let mut c = Config::default();
        assert!(c.set("nu", "nan").is_err());
        assert!(c.set("order_n", "-1").is_err());
        assert!(c.set("evolve.direction", "sideways").is_err());
        assert!(c.set("sweep.key", "sweep.values").is_err());
        c.set("eps2", "0.6").unwrap();
        assert!(matches!(c.params(), Err(CliError::Config(m)) if m.contains("eps2")));
    }

    #[test]
    fn eps1_follows_nu_by_default() {
        let mut c = Config::default();
        c.set("nu", "3").unwrap();
        assert_eq!(c.params().unwrap().eps1, 1.5);
        c.set("eps1", "0.5").unwrap();
        assert_eq!(c.params().unwrap().eps1, 0.5);
    }
}
