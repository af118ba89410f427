use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    /// Floats carry 12 significant digits.
    pub fn render(&self) -> String {
        match self {
            Cell::Float(v) => format!("{v:.11e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Numerical(format!("csv encoding failed: {e}"));
        w.write_record(&self.header).map_err(fail)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).map_err(fail)?;
        }
        w.into_inner().map_err(|e| CliError::Numerical(format!("csv encoding failed: {e}")))
    }
}

/// Everything a subcommand produces.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub table: Table,
    /// `(name, value, uncertainty)`
    pub observables: Vec<(String, f64, f64)>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    command: &'a str,
    seed: u64,
    wall_time_s: f64,
    rows: usize,
    observables: toml::Table,
    config: &'a RunConfig,
}

pub fn manifest_text(command: &str, cfg: &RunConfig, out: &RunOutput, wall_time: f64) -> CliResult<String> {
    let mut observables = toml::Table::new();
    for (name, v, e) in &out.observables {
        let finite = |x: f64| if x.is_finite() { toml::Value::Float(x) } else { toml::Value::String(x.to_string()) };
        observables.insert(name.clone(), toml::Value::Array(vec![finite(*v), finite(*e)]));
    }
    let m = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed: cfg.seed,
        wall_time_s: wall_time,
        rows: out.table.rows.len(),
        observables,
        config: cfg,
    };
    toml::to_string(&m).map_err(|e| CliError::Numerical(format!("manifest encoding failed: {e}")))
}

/// Writes `results.csv` and `manifest.txt` into `dir`.
pub fn write(dir: &Path, command: &str, cfg: &RunConfig, out: &RunOutput, wall_time: f64) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
    let csv = out.table.to_csv()?;
    let manifest = manifest_text(command, cfg, out, wall_time)?;
    let path = dir.join("results.csv");
    fs::write(&path, csv).map_err(|e| CliError::io(path.display(), e))?;
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| CliError::io(path.display(), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(Cell::from(1.0 / 3.0).render(), "3.33333333333e-1");
        assert_eq!(Cell::from(90e-6).render(), "9.00000000000e-5");
        assert_eq!(Cell::from(3usize).render(), "3");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![1.0.into(), "x, y".into()]);
        let s = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(s, "a,b\n1.00000000000e0,\"x, y\"\n");
    }

    #[test]
    fn manifest_parses_back() {
        let cfg = RunConfig::default();
        let out = RunOutput { table: Table::new(&["a"]), observables: vec![("rate".into(), 1.5, f64::NAN)] };
        let text = manifest_text("swap", &cfg, &out, 0.25).unwrap();
        let t: toml::Table = text.parse().unwrap();
        assert_eq!(t["command"].as_str(), Some("swap"));
        assert!(t["config"]["trap"]["mass_amu"].as_float().is_some());
    }

    proptest::proptest! {
        #[test]
        fn rendered_floats_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let text = Cell::from(v).render();
            let back: f64 = text.parse().unwrap();
            proptest::prop_assert_eq!(Cell::from(back).render(), text);
        }
    }
}
