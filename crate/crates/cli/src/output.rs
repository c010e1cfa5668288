use std::fs;
use std::io::Write;
use std::path::Path;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::run::{Outcome, Table};

fn fmt(v: f64) -> String {
    if v == 0.0 || (1e-3..1e6).contains(&v.abs()) {
        format!("{v:.6}")
    } else {
        format!("{v:.3e}")
    }
}

/// Human-readable table of the checks.
pub fn render(out: &Outcome) -> String {
    let mut s = format!("== {} ({:?}, {}) ==\n", out.name, out.command, out.model);
    let w = out.checks.iter().map(|c| c.quantity.len()).max().unwrap_or(8).max(8);
    s += &format!(
        "{:<w$}  {:>12}  {:>12}  {:>8}  {:>12}  result\n",
        "quantity", "value", "target", "relation", "band"
    );
    for c in &out.checks {
        s += &format!(
            "{:<w$}  {:>12}  {:>12}  {:>8}  {:>12}  {}\n",
            c.quantity,
            fmt(c.value),
            if c.relation == "within" {
                fmt(c.target)
            } else {
                "-".into()
            },
            c.relation,
            fmt(c.band),
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    s += &format!("RESULT {}\n", if out.pass() { "PASS" } else { "FAIL" });
    s
}

fn write_table(dir: &Path, t: &Table) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(dir.join(&t.file))?;
    w.write_record(&t.header)?;
    for r in &t.rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `report.json`, `checks.csv`, the tables and the config itself.
pub fn write_all(dir: &Path, cfg: &ExperimentConfig, source: &str, out: &Outcome) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), source)?;
    let mut f = fs::File::create(dir.join("report.json"))?;
    serde_json::to_writer_pretty(&mut f, &out.report(cfg))?;
    writeln!(f)?;
    let mut w = csv::Writer::from_path(dir.join("checks.csv"))?;
    w.write_record(["quantity", "value", "target", "relation", "band", "pass"])?;
    for c in &out.checks {
        w.write_record([
            c.quantity.clone(),
            format!("{:e}", c.value),
            format!("{:e}", c.target),
            c.relation.to_string(),
            format!("{:e}", c.band),
            c.pass.to_string(),
        ])?;
    }
    w.flush()?;
    for t in &out.tables {
        write_table(dir, t)?;
    }
    Ok(())
}
