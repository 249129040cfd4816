//! Plain-text run configuration: `key = value` lines under bracketed
//! sections, `#` comments, unknown keys rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::bev::DEFAULT_RESOLUTION;
use crate::deployment::DeploymentConfig;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::grounding::GroundingConfig;
use crate::traversability::{CompatibilityTable, ThresholdConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grounding: GroundingConfig,
    /// Grid cell size in meters.
    pub resolution: f64,
    /// Margin added around the cloud extent when no reference grid is given.
    pub padding: f64,
    pub features: FeatureConfig,
    pub thresholds: ThresholdConfig,
    pub compatibility: CompatibilityTable,
    pub deployment: DeploymentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grounding: GroundingConfig::default(),
            resolution: DEFAULT_RESOLUTION,
            padding: 0.5,
            features: FeatureConfig::default(),
            thresholds: ThresholdConfig::default(),
            compatibility: CompatibilityTable::default_table(),
            deployment: DeploymentConfig::default(),
        }
    }
}

fn invalid(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::ConfigInvalid(format!("line {line}: {msg}"))
}

fn real(line: usize, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| invalid(line, format!("expected a number, got '{v}'")))
}

fn count(line: usize, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| invalid(line, format!("expected a non-negative integer, got '{v}'")))
}

/// Shortest decimal that parses back to the same `f64`.
fn exact(v: f64) -> String {
    format!("{v:?}")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section: Option<String> = None;
        let mut class_scores = BTreeMap::new();
        let mut saw_compat_default = false;
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                match name {
                    "grounding" | "mapping" | "traversability" | "compatibility" | "deployment" => {
                        section = Some(name.to_string())
                    }
                    _ => return Err(invalid(n, format!("unknown section [{name}]"))),
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(invalid(n, format!("expected 'key = value', got '{line}'")));
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(sec) = section.as_deref() else {
                return Err(invalid(n, "key outside of any section"));
            };
            let t = &mut cfg.thresholds;
            let d = &mut cfg.deployment;
            match (sec, key) {
                ("grounding", "strides") => {
                    cfg.grounding.strides = value.split(',').map(|s| count(n, s.trim())).collect::<Result<_>>()?
                }
                ("grounding", "min_pairs") => cfg.grounding.min_pairs = count(n, value)?,
                ("grounding", "degenerate_ratio_tol") => cfg.grounding.degenerate_ratio_tol = real(n, value)?,
                ("mapping", "resolution") => cfg.resolution = real(n, value)?,
                ("mapping", "padding") => cfg.padding = real(n, value)?,
                ("mapping", "k_slope") => cfg.features.k_slope = count(n, value)?,
                ("mapping", "k_rough") => cfg.features.k_rough = count(n, value)?,
                ("mapping", "min_neighbors") => cfg.features.min_neighbors = count(n, value)?,
                ("traversability", "s_soft") => t.s_soft = real(n, value)?,
                ("traversability", "s_hard") => t.s_hard = real(n, value)?,
                ("traversability", "s_soft_deg") => t.s_soft = real(n, value)?.to_radians(),
                ("traversability", "s_hard_deg") => t.s_hard = real(n, value)?.to_radians(),
                ("traversability", "sigma_soft") => t.sigma_soft = real(n, value)?,
                ("traversability", "sigma_hard") => t.sigma_hard = real(n, value)?,
                ("traversability", "d_hard") => t.d_hard = real(n, value)?,
                ("traversability", "d_soft") => t.d_soft = real(n, value)?,
                ("traversability", "w_s") => t.w_s = real(n, value)?,
                ("traversability", "w_r") => t.w_r = real(n, value)?,
                ("traversability", "w_c") => t.w_c = real(n, value)?,
                ("traversability", "alpha") => t.alpha = real(n, value)?,
                ("compatibility", "default") => {
                    cfg.compatibility.default = real(n, value)?;
                    saw_compat_default = true;
                }
                ("compatibility", k) if k.starts_with("class.") => {
                    let id: u32 = k["class.".len()..]
                        .parse()
                        .map_err(|_| invalid(n, format!("bad class id in '{k}'")))?;
                    class_scores.insert(id, real(n, value)?);
                }
                ("deployment", "t_th") => d.t_th = real(n, value)?,
                ("deployment", "r_max") => d.r_max = real(n, value)?,
                ("deployment", "lambda") => d.lambda = real(n, value)?,
                ("deployment", "k") => d.k = count(n, value)?,
                ("deployment", "min_separation") => d.min_separation = real(n, value)?,
                _ => return Err(invalid(n, format!("unknown key '{key}' in [{sec}]"))),
            }
        }
        // A [compatibility] table, when present, replaces the default table.
        if !class_scores.is_empty() || saw_compat_default {
            cfg.compatibility.scores = class_scores;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grounding.validate()?;
        if !(self.resolution > 0.0) {
            return Err(Error::ConfigInvalid("resolution must be positive".into()));
        }
        if !(self.padding >= 0.0) {
            return Err(Error::ConfigInvalid("padding must be non-negative".into()));
        }
        self.features.validate()?;
        self.thresholds.validate()?;
        self.compatibility.validate()?;
        self.deployment.validate()
    }

    pub fn to_text(&self) -> String {
        let mut o = String::new();
        let g = &self.grounding;
        let strides: Vec<String> = g.strides.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(o, "[grounding]");
        let _ = writeln!(o, "strides = {}", strides.join(", "));
        let _ = writeln!(o, "min_pairs = {}", g.min_pairs);
        let _ = writeln!(o, "degenerate_ratio_tol = {}", exact(g.degenerate_ratio_tol));
        let f = &self.features;
        let _ = writeln!(o, "\n[mapping]");
        let _ = writeln!(o, "resolution = {}", exact(self.resolution));
        let _ = writeln!(o, "padding = {}", exact(self.padding));
        let _ = writeln!(o, "k_slope = {}", f.k_slope);
        let _ = writeln!(o, "k_rough = {}", f.k_rough);
        let _ = writeln!(o, "min_neighbors = {}", f.min_neighbors);
        let t = &self.thresholds;
        let _ = writeln!(o, "\n[traversability]");
        let _ = writeln!(o, "# slopes in radians");
        for (k, v) in [
            ("s_soft", t.s_soft),
            ("s_hard", t.s_hard),
            ("sigma_soft", t.sigma_soft),
            ("sigma_hard", t.sigma_hard),
            ("d_hard", t.d_hard),
            ("d_soft", t.d_soft),
            ("w_s", t.w_s),
            ("w_r", t.w_r),
            ("w_c", t.w_c),
            ("alpha", t.alpha),
        ] {
            let _ = writeln!(o, "{k} = {}", exact(v));
        }
        let _ = writeln!(o, "\n[compatibility]");
        let _ = writeln!(o, "default = {}", exact(self.compatibility.default));
        for (id, tau) in &self.compatibility.scores {
            let _ = writeln!(o, "class.{id} = {}", exact(*tau));
        }
        let d = &self.deployment;
        let _ = writeln!(o, "\n[deployment]");
        let _ = writeln!(o, "t_th = {}", exact(d.t_th));
        let _ = writeln!(o, "r_max = {}", exact(d.r_max));
        let _ = writeln!(o, "lambda = {}", exact(d.lambda));
        let _ = writeln!(o, "k = {}", d.k);
        let _ = writeln!(o, "min_separation = {}", exact(d.min_separation));
        o
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}
