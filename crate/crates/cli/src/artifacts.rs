//! Writing run artifacts. Every path is joined onto the run directory; an
//! `INCOMPLETE` marker stays there until the run finishes.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gppopf::popf::{SampleErrors, UncertaintySpec};
use serde::Serialize;

pub const INCOMPLETE: &str = "INCOMPLETE";

pub struct Artifacts {
    root: PathBuf,
}

impl Artifacts {
    pub fn open(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        let a = Artifacts {
            root: root.to_path_buf(),
        };
        a.text(INCOMPLETE, "run started\n")?;
        Ok(a)
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn stage(&self, name: &str) -> Result<()> {
        log::info!("stage: {name}");
        self.text(INCOMPLETE, &format!("stage: {name}\n"))
    }

    pub fn complete(&self) -> Result<()> {
        std::fs::remove_file(self.path(INCOMPLETE)).context("removing the INCOMPLETE marker")
    }

    /// Leave the marker in place with the failure recorded in it.
    pub fn fail(&self, message: &str) {
        let _ = std::fs::write(self.path(INCOMPLETE), format!("failed: {message}\n"));
    }

    pub fn text(&self, rel: &str, contents: &str) -> Result<()> {
        let p = self.path(rel);
        std::fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))
    }

    pub fn json<T: Serialize>(&self, rel: &str, value: &T) -> Result<()> {
        self.text(rel, &(serde_json::to_string_pretty(value)? + "\n"))
    }

    pub fn rows(&self, rel: &str, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
        let p = self.path(rel);
        let mut w = csv::Writer::from_path(&p).with_context(|| format!("writing {}", p.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn l1_errors(&self, rel: &str, e: &SampleErrors) -> Result<()> {
        let p = self.path(rel);
        let mut w = csv::Writer::from_path(&p).with_context(|| format!("writing {}", p.display()))?;
        w.write_record(["sample", "l1_pg_pct", "l1_vm_pct"])?;
        for ((s, a), b) in e.used.iter().zip(&e.l1_pg).zip(&e.l1_vm) {
            w.write_record([s.to_string(), a.to_string(), b.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// CSV column names of the input vector.
pub fn input_names(spec: &UncertaintySpec) -> Vec<String> {
    let mut v: Vec<String> = spec.renewable_buses().iter().map(|b| format!("p_r_b{b}")).collect();
    v.extend(spec.load_buses().iter().map(|b| format!("p_d_b{b}")));
    v.extend(spec.load_buses().iter().map(|b| format!("q_d_b{b}")));
    v
}
