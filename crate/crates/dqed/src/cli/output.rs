//! Table writers. Every value goes through Rust's shortest round-trip float
//! formatting, so reruns produce identical bytes.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::quantum::FieldSample;
use crate::{Error, Result};

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects written files relative to the output directory.
pub(crate) struct Writer {
    pub root: PathBuf,
    pub files: Vec<String>,
}

impl Writer {
    pub fn new(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Writer { root: root.to_path_buf(), files: vec![] })
    }

    fn path(&mut self, rel: &str) -> Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        self.files.push(rel.to_string());
        Ok(p)
    }

    pub fn csv(&mut self, rel: &str, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let p = self.path(rel)?;
        let csv_err = |e: csv::Error| Error::Io { path: p.display().to_string(), source: std::io::Error::other(e) };
        let mut w = csv::Writer::from_path(&p).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(&r).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(&p, e))
    }

    pub fn json(&mut self, rel: &str, value: &impl Serialize) -> Result<()> {
        let p = self.path(rel)?;
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Invalid(e.to_string()))?;
        text.push('\n');
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }

    /// One file per matrix entry: grid column plus real and imaginary parts.
    pub fn complex_entry(&mut self, rel: &str, grid_name: &str, grid: &[f64], values: &[C64]) -> Result<()> {
        let header = [grid_name.to_string(), "re".into(), "im".into()];
        self.csv(rel, &header, grid.iter().zip(values).map(|(g, v)| vec![num(*g), num(v.re), num(v.im)]))
    }

    pub fn real_entry(&mut self, rel: &str, grid_name: &str, grid: &[f64], values: &[f64]) -> Result<()> {
        let header = [grid_name.to_string(), "value".into()];
        self.csv(rel, &header, grid.iter().zip(values).map(|(g, v)| vec![num(*g), num(*v)]))
    }

    /// Rows of `(ω, point, x, y, z, E_x, E_y, E_z)` with complex components split.
    pub fn field(&mut self, rel: &str, sample: &FieldSample) -> Result<()> {
        let mut header: Vec<String> = ["omega_rad_s", "point", "x_m", "y_m", "z_m"].map(String::from).to_vec();
        for c in ["x", "y", "z"] {
            header.push(format!("{c}_re"));
            header.push(format!("{c}_im"));
        }
        let rows = sample.omega.iter().zip(&sample.values).flat_map(|(w, vals)| {
            sample.points.iter().zip(vals).enumerate().map(move |(k, (p, v))| {
                let mut r = vec![num(*w), k.to_string(), num(p[0]), num(p[1]), num(p[2])];
                for c in v {
                    r.push(num(c.re));
                    r.push(num(c.im));
                }
                r
            })
        });
        self.csv(rel, &header, rows)
    }
}

pub(crate) fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Labels are `par1`, `perp2`, `m+3`; file names keep them verbatim.
pub(crate) fn entry_name(prefix: &str, a: &str, b: &str) -> String {
    format!("{prefix}_{a}_{b}.csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, -1.5, 1e-300, std::f64::consts::PI, 6.02214076e23] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn entry_files_have_one_row_per_grid_point() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = Writer::new(dir.path()).unwrap();
        let grid = [1.0, 2.0, 3.0];
        let vals = [C64::new(1.0, -1.0); 3];
        w.complex_entry("H_par1_par1.csv", "omega_rad_s", &grid, &vals).unwrap();
        let text = std::fs::read_to_string(dir.path().join("H_par1_par1.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "omega_rad_s,re,im");
        assert_eq!(lines[1], "1e0,1e0,-1e0");
        assert_eq!(w.files, ["H_par1_par1.csv"]);
    }
}
