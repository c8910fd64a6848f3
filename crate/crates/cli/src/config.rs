use anyhow::{bail, Context, Result};
use lpproj::windows::Windows;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ThetaMode {
    /// Haar-random directions, `directions` per cell.
    Haar,
    /// `(1, ..., 1)/√n`.
    Diag,
    /// The last coordinate vector `e_n`.
    Axis,
    /// Directions read from `theta_file`, one per line.
    File,
}

impl ThetaMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ThetaMode::Haar => "haar",
            ThetaMode::Diag => "diag",
            ThetaMode::Axis => "axis",
            ThetaMode::File => "file",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub p: Vec<f64>,
    pub n: Vec<usize>,
    pub theta: ThetaMode,
    pub theta_file: Option<PathBuf>,
    /// Haar directions per `(p, n)` cell.
    pub directions: usize,
    pub samples: usize,
    pub seed: u64,
    pub threads: usize,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    /// Exponent of the permutation average.
    pub q: f64,
    /// Random matrices per size in `permavg`.
    pub cases: usize,
    pub windows: Windows,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            p: vec![1.0, 2.0, 4.0, 16.0, 64.0],
            n: vec![8, 16, 32, 64],
            theta: ThetaMode::Haar,
            theta_file: None,
            directions: 3,
            samples: 100_000,
            seed: 20_140_519,
            threads: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            out: None,
            format: OutputFormat::Csv,
            q: 2.0,
            cases: 20,
            windows: Windows::default(),
        }
    }
}

pub const MIN_SAMPLES: usize = 30_000;

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).context("invalid config JSON")?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.is_empty() || self.n.is_empty() {
            bail!("p and n lists must be non-empty");
        }
        if let Some(p) = self.p.iter().find(|p| !p.is_finite() || **p < 1.0) {
            bail!("every p must be finite and >= 1, got {p}");
        }
        if self.n.contains(&0) {
            bail!("every n must be >= 1");
        }
        if self.samples < MIN_SAMPLES {
            bail!("samples must be >= {MIN_SAMPLES}, got {}", self.samples);
        }
        if self.threads == 0 {
            bail!("threads must be >= 1");
        }
        if self.directions == 0 {
            bail!("directions must be >= 1");
        }
        if self.theta == ThetaMode::File && self.theta_file.is_none() {
            bail!("theta mode 'file' needs theta_file");
        }
        if !(self.q >= 1.0) {
            bail!("q must be >= 1");
        }
        Ok(())
    }
}

/// Parses `1,2.5,4` style lists.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| anyhow::anyhow!("bad list entry '{t}': {e}")))
        .collect()
}

/// Reads directions, one per line, entries separated by commas or whitespace.
/// Blank lines and lines starting with `#` are ignored.
pub fn read_directions(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading directions {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("{}:{}: not a list of numbers", path.display(), i + 1))?;
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        for cfg in [
            RunConfig { p: vec![0.5], ..Default::default() },
            RunConfig { p: vec![f64::INFINITY], ..Default::default() },
            RunConfig { samples: 1000, ..Default::default() },
            RunConfig { threads: 0, ..Default::default() },
            RunConfig { theta: ThetaMode::File, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = RunConfig::from_json(r#"{"p": [3.0], "windows": {"ratio_max": 12.0}}"#).unwrap();
        assert_eq!(cfg.p, vec![3.0]);
        assert_eq!(cfg.n, RunConfig::default().n);
        assert_eq!(cfg.windows.ratio_max, 12.0);
        assert_eq!(cfg.windows.sigma_k, Windows::default().sigma_k);
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list::<f64>("1, 2.5,4").unwrap(), vec![1.0, 2.5, 4.0]);
        assert!(parse_list::<usize>("3,x").is_err());
    }
}
