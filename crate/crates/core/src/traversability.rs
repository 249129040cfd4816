//! Geometric–semantic traversability fusion and its evaluation against
//! ground-truth rasters.

use std::collections::BTreeMap;

use crate::bev::{BevGrid, GridSpec};
use crate::error::{Error, Result};
use crate::features::FeatureMaps;
use crate::raster::Raster;

/// Default class ids used by the synthetic scenes and the default
/// compatibility table.
pub mod classes {
    pub const UNLABELED: u32 = 0;
    pub const GRASS: u32 = 1;
    pub const SOIL: u32 = 2;
    pub const PAVEMENT: u32 = 3;
    pub const GRAVEL: u32 = 4;
    pub const ROCK: u32 = 5;
    pub const WATER: u32 = 6;
    pub const STRUCTURE: u32 = 7;
}

/// Per-class compatibility `τ(c) ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityTable {
    pub scores: BTreeMap<u32, f64>,
    pub default: f64,
}

impl CompatibilityTable {
    pub fn new(scores: BTreeMap<u32, f64>, default: f64) -> Result<Self> {
        let t = Self { scores, default };
        t.validate()?;
        Ok(t)
    }

    pub fn default_table() -> Self {
        use classes::*;
        let scores = [
            (GRASS, 1.0),
            (SOIL, 1.0),
            (PAVEMENT, 1.0),
            (GRAVEL, 0.3),
            (ROCK, 0.0),
            (WATER, 0.0),
            (STRUCTURE, 0.0),
        ]
        .into_iter()
        .collect();
        Self { scores, default: 0.5 }
    }

    /// Every class fully compatible; removes semantics from the pipeline.
    pub fn permissive() -> Self {
        Self {
            scores: BTreeMap::new(),
            default: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| (0.0..=1.0).contains(&v);
        if !ok(self.default) || !self.scores.values().all(|&v| ok(v)) {
            return Err(Error::ConfigInvalid("compatibility scores must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn score(&self, class_id: u32) -> f64 {
        self.scores.get(&class_id).copied().unwrap_or(self.default)
    }
}

impl Default for CompatibilityTable {
    fn default() -> Self {
        Self::default_table()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdConfig {
    /// Radians.
    pub s_soft: f64,
    pub s_hard: f64,
    /// Meters.
    pub sigma_soft: f64,
    pub sigma_hard: f64,
    /// Meters.
    pub d_hard: f64,
    pub d_soft: f64,
    pub w_s: f64,
    pub w_r: f64,
    pub w_c: f64,
    pub alpha: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            s_soft: 10f64.to_radians(),
            s_hard: 30f64.to_radians(),
            sigma_soft: 0.02,
            sigma_hard: 0.10,
            d_hard: 0.2,
            d_soft: 1.0,
            w_s: 0.4,
            w_r: 0.3,
            w_c: 0.3,
            alpha: 0.6,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(m.to_string()));
        let all = [
            self.s_soft,
            self.s_hard,
            self.sigma_soft,
            self.sigma_hard,
            self.d_hard,
            self.d_soft,
            self.w_s,
            self.w_r,
            self.w_c,
            self.alpha,
        ];
        if !all.iter().all(|v| v.is_finite()) {
            return bad("non-finite threshold");
        }
        if self.s_soft >= self.s_hard {
            return bad("s_soft must be below s_hard");
        }
        if self.sigma_soft >= self.sigma_hard {
            return bad("sigma_soft must be below sigma_hard");
        }
        if self.d_hard >= self.d_soft {
            return bad("d_hard must be below d_soft");
        }
        if self.w_s < 0.0 || self.w_r < 0.0 || self.w_c < 0.0 {
            return bad("weights must be non-negative");
        }
        if (self.w_s + self.w_r + self.w_c - 1.0).abs() > 1e-9 {
            return bad("weights must sum to 1");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        Ok(())
    }

    /// Serialized stand-in for unbounded clearance.
    pub fn clearance_sentinel(&self) -> f64 {
        self.d_soft * 10.0
    }
}

fn clip01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyScores {
    pub slope: Raster<f64>,
    pub rough: Raster<f64>,
    pub clear: Raster<f64>,
}

/// Normalized linear penalties, clipped to `[0, 1]`.
pub fn penalty_scores(features: &FeatureMaps, cfg: &ThresholdConfig) -> Result<PenaltyScores> {
    cfg.validate()?;
    Ok(PenaltyScores {
        slope: features
            .slope
            .map(|s| clip01((cfg.s_hard - s) / (cfg.s_hard - cfg.s_soft))),
        rough: features
            .roughness
            .map(|r| clip01((cfg.sigma_hard - r) / (cfg.sigma_hard - cfg.sigma_soft))),
        clear: features
            .clearance
            .map(|d| clip01((d - cfg.d_hard) / (cfg.d_soft - cfg.d_hard))),
    })
}

pub fn geo_score(p: &PenaltyScores, cfg: &ThresholdConfig) -> Result<Raster<f64>> {
    cfg.validate()?;
    p.slope.ensure_same_grid(&p.rough)?;
    p.slope.ensure_same_grid(&p.clear)?;
    let cells = (0..p.slope.cells.len())
        .map(|i| {
            let (s, r, c) = (p.slope.cells[i]?, p.rough.cells[i]?, p.clear.cells[i]?);
            Some(cfg.w_s * s + cfg.w_r * r + cfg.w_c * c)
        })
        .collect();
    Ok(Raster::from_cells(p.slope.spec, cells))
}

pub fn sem_score(grid: &BevGrid, tau: &CompatibilityTable) -> Raster<f64> {
    grid.classes().map(|c| tau.score(c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraversabilityMap {
    pub spec: GridSpec,
    pub t: Raster<f64>,
    pub t_geo: Raster<f64>,
    pub t_sem: Raster<f64>,
}

/// `T = (α·T_geo + (1−α)·T_sem)·p_conf`, clipped to `[0, 1]`.
pub fn fuse(
    t_geo: &Raster<f64>,
    t_sem: &Raster<f64>,
    p_conf: &Raster<f64>,
    cfg: &ThresholdConfig,
) -> Result<TraversabilityMap> {
    cfg.validate()?;
    t_geo.ensure_same_grid(t_sem)?;
    t_geo.ensure_same_grid(p_conf)?;
    let cells = (0..t_geo.cells.len())
        .map(|i| {
            let (g, s, p) = (t_geo.cells[i]?, t_sem.cells[i]?, p_conf.cells[i]?);
            Some(clip01((cfg.alpha * g + (1.0 - cfg.alpha) * s) * p))
        })
        .collect();
    Ok(TraversabilityMap {
        spec: t_geo.spec,
        t: Raster::from_cells(t_geo.spec, cells),
        t_geo: t_geo.clone(),
        t_sem: t_sem.clone(),
    })
}

/// Penalties, geometric score, semantic score and fusion in one call.
pub fn compute_traversability(
    grid: &BevGrid,
    features: &FeatureMaps,
    cfg: &ThresholdConfig,
    tau: &CompatibilityTable,
) -> Result<TraversabilityMap> {
    let penalties = penalty_scores(features, cfg)?;
    let t_geo = geo_score(&penalties, cfg)?;
    let t_sem = sem_score(grid, tau);
    fuse(&t_geo, &t_sem, &grid.confidence(), cfg)
}

pub const EVAL_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TravEvalReport {
    pub macc: f64,
    pub aacc: f64,
    /// `None` when the ground truth holds a single class.
    pub roc_auc: Option<f64>,
    pub mse: f64,
    pub n_cells: usize,
}

impl TravEvalReport {
    pub fn to_text(&self) -> String {
        let auc = match self.roc_auc {
            Some(a) => format!("{a:.6}"),
            None => "nodata".to_string(),
        };
        format!(
            "# binary threshold: T >= {EVAL_THRESHOLD}; no-data cells excluded\n\
             macc: {:.6}\naacc: {:.6}\nroc_auc: {auc}\nmse: {:.6}\nn_cells: {}\n",
            self.macc, self.aacc, self.mse, self.n_cells
        )
    }
}

/// Area under the ROC curve as the Mann–Whitney statistic with mid-ranks for
/// ties: `(concordant pairs + ½ tied pairs) / (P·N)`.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share their mean.
        let mid_rank = (i + j + 2) as f64 / 2.0;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k]).count();
        rank_sum_pos += mid_rank * pos_in_group as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Scores a traversability raster against binary ground truth (`1` =
/// traversable). Cells with no data on either side are skipped.
pub fn evaluate(pred: &Raster<f64>, gt: &Raster<f64>) -> Result<TravEvalReport> {
    pred.ensure_same_grid(gt)?;
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (p, g) in pred.cells.iter().zip(&gt.cells) {
        let (Some(p), Some(g)) = (p, g) else { continue };
        let label = match *g {
            1.0 => true,
            0.0 => false,
            v => return Err(Error::Malformed(format!("ground truth value {v} is not 0 or 1"))),
        };
        scores.push(*p);
        labels.push(label);
    }
    let n = scores.len();
    if n == 0 {
        return Err(Error::Malformed("no co-defined cells to evaluate".into()));
    }
    let mut correct = [0usize; 2];
    let mut total = [0usize; 2];
    let mut sq = 0.0;
    for (&s, &l) in scores.iter().zip(&labels) {
        let class = l as usize;
        total[class] += 1;
        if (s >= EVAL_THRESHOLD) == l {
            correct[class] += 1;
        }
        sq += (s - if l { 1.0 } else { 0.0 }).powi(2);
    }
    let recalls: Vec<f64> = (0..2)
        .filter(|&c| total[c] > 0)
        .map(|c| correct[c] as f64 / total[c] as f64)
        .collect();
    let roc = match roc_auc(&scores, &labels) {
        Ok(a) => Some(a),
        Err(Error::DegenerateLabels) => None,
        Err(e) => return Err(e),
    };
    Ok(TravEvalReport {
        macc: recalls.iter().sum::<f64>() / recalls.len() as f64,
        aacc: (correct[0] + correct[1]) as f64 / n as f64,
        roc_auc: roc,
        mse: sq / n as f64,
        n_cells: n,
    })
}
