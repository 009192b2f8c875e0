use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::Backend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Marginal,
    Broadcast,
    Unbiasing,
    Couple,
    Bias,
    Concentration,
    Dynamics,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        Self::Marginal,
        Self::Broadcast,
        Self::Unbiasing,
        Self::Couple,
        Self::Bias,
        Self::Concentration,
        Self::Dynamics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Marginal => "marginal",
            Self::Broadcast => "broadcast",
            Self::Unbiasing => "unbiasing",
            Self::Couple => "couple",
            Self::Bias => "bias",
            Self::Concentration => "concentration",
            Self::Dynamics => "dynamics",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("kind: unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoupleMode {
    #[default]
    Down,
    Downup,
    Branching,
}

impl FromStr for CoupleMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "down" => Ok(Self::Down),
            "downup" => Ok(Self::Downup),
            "branching" => Ok(Self::Branching),
            _ => Err(Error::Config(format!("mode: expected down|downup|branching, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    #[default]
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::Config(format!("format: expected csv|json, got '{s}'"))),
        }
    }
}

/// Everything needed to reproduce a run. Unset optional fields fall back to
/// the documented defaults of each experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub delta: usize,
    pub k: usize,
    pub depth: usize,
    /// Inclusive `(first, last)` depths for `bias` and sweeps.
    pub depth_range: Option<(usize, usize)>,
    pub seed: u64,
    pub samples: u64,
    pub replicas: u64,
    pub backend: Backend,
    pub format: Option<OutputFormat>,
    pub out: Option<PathBuf>,
    /// marginal: the leaf coloring, comma separated with 0 for ⋆.
    pub leaves: Option<String>,
    pub forbidden_root: Option<usize>,
    /// broadcast: optional root conditioning and histogram mode.
    pub root_color: Option<usize>,
    pub summary: bool,
    /// unbiasing
    pub epsilon: Option<f64>,
    pub highly: bool,
    /// couple / bias / concentration
    pub color: usize,
    pub c1: usize,
    pub c2: usize,
    pub mode: CoupleMode,
    pub threshold: Option<f64>,
    /// concentration: run the coupling-to-concentration comparison at δ.
    pub reduction_delta: Option<f64>,
    /// dynamics
    pub n: usize,
    pub block_depth: usize,
    pub steps: u64,
    pub exact: bool,
    pub matrix_out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            delta: 2,
            k: 3,
            depth: 2,
            depth_range: None,
            seed: 0,
            samples: 1000,
            replicas: 1,
            backend: Backend::Float,
            format: None,
            out: None,
            leaves: None,
            forbidden_root: None,
            root_color: None,
            summary: false,
            epsilon: None,
            highly: false,
            color: 1,
            c1: 1,
            c2: 2,
            mode: CoupleMode::Down,
            threshold: None,
            reduction_delta: None,
            n: 1,
            block_depth: 0,
            steps: 10_000,
            exact: false,
            matrix_out: None,
        }
    }

    /// Sets one field from its text form. Keys use `_` or `-`
    /// interchangeably.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
        }
        fn flag(key: &str, v: &str) -> Result<bool> {
            match v {
                "true" | "1" | "yes" | "" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(Error::Config(format!("{key}: expected a boolean, got '{v}'"))),
            }
        }
        match key.as_str() {
            "kind" => self.kind = value.parse()?,
            "delta" => self.delta = num(&key, value)?,
            "k" => self.k = num(&key, value)?,
            "depth" => self.depth = num(&key, value)?,
            "depth_range" => self.depth_range = Some(parse_range(value)?),
            "seed" => self.seed = num(&key, value)?,
            "samples" => self.samples = num(&key, value)?,
            "replicas" => self.replicas = num(&key, value)?,
            "backend" => {
                self.backend = match value {
                    "rational" => Backend::Rational,
                    "float" => Backend::Float,
                    _ => return Err(Error::Config(format!("backend: expected rational|float, got '{value}'"))),
                }
            }
            "format" => self.format = Some(value.parse()?),
            "out" => self.out = Some(PathBuf::from(value)),
            "leaves" => self.leaves = Some(value.to_string()),
            "forbidden_root" => self.forbidden_root = Some(num(&key, value)?),
            "root_color" => self.root_color = Some(num(&key, value)?),
            "summary" => self.summary = flag(&key, value)?,
            "epsilon" => self.epsilon = Some(num(&key, value)?),
            "highly" => self.highly = flag(&key, value)?,
            "color" => self.color = num(&key, value)?,
            "c1" => self.c1 = num(&key, value)?,
            "c2" => self.c2 = num(&key, value)?,
            "mode" => self.mode = value.parse()?,
            "threshold" => self.threshold = Some(num(&key, value)?),
            "reduction_delta" => self.reduction_delta = Some(num(&key, value)?),
            "n" => self.n = num(&key, value)?,
            "block_depth" => self.block_depth = num(&key, value)?,
            "steps" => self.steps = num(&key, value)?,
            "exact" => self.exact = flag(&key, value)?,
            "matrix_out" => self.matrix_out = Some(PathBuf::from(value)),
            _ => return Err(Error::Config(format!("{key}: unknown setting"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("config: cannot read {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// The depths a run covers: the range if given, else the single depth.
    pub fn depths(&self) -> Vec<usize> {
        match self.depth_range {
            Some((a, b)) => (a..=b).collect(),
            None => vec![self.depth],
        }
    }

    pub fn output_format(&self) -> OutputFormat {
        self.format.unwrap_or(match self.kind {
            ExperimentKind::Bias => OutputFormat::Csv,
            ExperimentKind::Broadcast if !self.summary => OutputFormat::Csv,
            _ => OutputFormat::Json,
        })
    }

    /// Field-level checks that do not depend on the experiment's math.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("{field}: {msg}")));
        if self.delta < 2 {
            return bad("delta", format!("branching factor must be at least 2, got {}", self.delta));
        }
        if !(2..=crate::tree::MAX_COLORS).contains(&self.k) {
            return bad("k", format!("must be in 2..={}, got {}", crate::tree::MAX_COLORS, self.k));
        }
        for (name, c) in [("color", self.color), ("c1", self.c1), ("c2", self.c2)] {
            if c == 0 || c > self.k {
                return bad(name, format!("color {c} is outside 1..={}", self.k));
            }
        }
        if self.samples == 0 {
            return bad("samples", "must be at least 1".into());
        }
        if self.replicas == 0 || self.replicas > self.samples {
            return bad("replicas", format!("must be in 1..={} (the sample count)", self.samples));
        }
        if let Some((a, b)) = self.depth_range {
            if a > b {
                return bad("depth_range", format!("{a}..{b} is empty"));
            }
        }
        if self.kind == ExperimentKind::Unbiasing && self.depths().contains(&0) {
            return bad("depth", "unbiasing needs depth ≥ 1".into());
        }
        if self.kind == ExperimentKind::Marginal && self.leaves.is_none() {
            return bad("leaves", "marginal needs a leaf coloring".into());
        }
        if let Some(t) = self.threshold {
            if !t.is_finite() {
                return bad("threshold", format!("{t} is not finite"));
            }
        }
        Ok(())
    }
}

fn parse_range(value: &str) -> Result<(usize, usize)> {
    let err = || Error::Config(format!("depth_range: expected A..B, got '{value}'"));
    let (a, b) = value.split_once("..").ok_or_else(err)?;
    let b = b.trim_start_matches('=');
    Ok((a.trim().parse().map_err(|_| err())?, b.trim().parse().map_err(|_| err())?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_text_config() {
        let mut c = ExperimentConfig::new(ExperimentKind::Bias);
        c.apply_text("# sweep\ndelta = 4\nk=5\n\ndepth-range = 1..6  # inclusive\nseed = 9\nformat = csv\n")
            .unwrap();
        assert_eq!((c.delta, c.k, c.seed), (4, 5, 9));
        assert_eq!(c.depths(), vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(c.output_format(), OutputFormat::Csv);
        c.validate().unwrap();
    }

    #[test]
    fn errors_name_the_field() {
        let mut c = ExperimentConfig::new(ExperimentKind::Couple);
        let e = c.set("k", "three").unwrap_err();
        assert!(e.to_string().contains("k:"));
        assert!(matches!(c.set("bogus", "1"), Err(Error::Config(_))));
        assert!(c.apply_text("delta 3").is_err());
        c.k = 3;
        c.c2 = 4;
        let e = c.validate().unwrap_err();
        assert!(e.to_string().contains("c2"));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn later_settings_win() {
        let mut c = ExperimentConfig::new(ExperimentKind::Unbiasing);
        c.apply_text("seed = 1\nsamples = 50").unwrap();
        c.set("seed", "2").unwrap();
        assert_eq!((c.seed, c.samples), (2, 50));
    }
}
