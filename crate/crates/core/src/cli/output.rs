//! Output directory with content hashes and the run manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::montecarlo::{Histogram, QualitySplit};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub files: Vec<FileEntry>,
}

pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

/// `./out/<unix seconds>-<seed>`.
pub fn default_dir(seed: u64) -> PathBuf {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    PathBuf::from("out").join(format!("{secs}-{seed}"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl OutputDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        fs::write(self.root.join(name), bytes)?;
        self.files.push(FileEntry { path: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut text = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
        text.push(b'\n');
        self.write(name, &text)
    }

    /// Write `manifest.json` listing every file written so far.
    pub fn finish(self, command: &str, config: &RunConfig) -> io::Result<PathBuf> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed: config.seed,
            config: config.clone(),
            files: self.files,
        };
        let mut text = serde_json::to_vec_pretty(&manifest).map_err(io::Error::other)?;
        text.push(b'\n');
        fs::write(self.root.join("manifest.json"), text)?;
        Ok(self.root)
    }
}

/// Build a CSV document from a header and rows of already formatted fields.
pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| io::Error::other(e.to_string()))
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn histogram_csv(h: &Histogram) -> io::Result<Vec<u8>> {
    let density = h.density();
    csv_bytes(
        &["bin_lo", "bin_hi", "centre", "count", "density"],
        (0..h.n_bins()).map(|i| {
            vec![
                num(h.edge(i)),
                num(h.edge(i + 1)),
                num(h.lo + (i as f64 + 0.5) * h.bin_width),
                h.counts[i].to_string(),
                num(density[i]),
            ]
        }),
    )
}

pub fn quality_split_csv(s: &QualitySplit) -> io::Result<Vec<u8>> {
    let full = s.full.density();
    let (a, b) = s.scaled_densities();
    csv_bytes(
        &["bin_lo", "bin_hi", "centre", "count", "count_at_least", "count_below", "density", "density_at_least", "density_below"],
        (0..s.full.n_bins()).map(|i| {
            vec![
                num(s.full.edge(i)),
                num(s.full.edge(i + 1)),
                num(s.full.lo + (i as f64 + 0.5) * s.full.bin_width),
                s.full.counts[i].to_string(),
                s.at_least.counts[i].to_string(),
                s.below.counts[i].to_string(),
                num(full[i]),
                num(a[i]),
                num(b[i]),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_and_numbers() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        for v in [0.1, 1.0 / 3.0, 1e-300, 6.02e23, -0.0, 2.0] {
            assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(num(2.0), "2.0");
    }

    #[test]
    fn histogram_csv_has_header() {
        let h = Histogram { lo: -0.5, bin_width: 1.0, counts: vec![1, 3], total: 4 };
        let text = String::from_utf8(histogram_csv(&h).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "bin_lo,bin_hi,centre,count,density");
        assert_eq!(lines[2], "0.5,1.5,1.0,3,0.75");
    }
}
