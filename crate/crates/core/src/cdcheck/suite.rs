//! Batches of `verify_cd` over sampled marginal pairs, and the two-grid consistency check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampler::{sample_pairs, Region, SamplerConfig, ShapeKind};
use super::{geometric_nprime_grid, uniform_t_grid, verify_cd, CdOptions, CdReport};
use crate::error::{Error, Result};
use crate::measure::MeasureSpec;
use crate::mmspace::PointedSpace1D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub k: f64,
    pub n: f64,
    pub samples: usize,
    pub seed: u64,
    pub t_points: usize,
    pub nprime_points: usize,
    pub tolerance: f64,
    pub refine: usize,
    pub region: Region,
    pub kinds: Vec<ShapeKind>,
    /// Stop at the first pair with a violated row.
    pub stop_on_violation: bool,
}

impl SuiteConfig {
    pub fn new(k: f64, n: f64, samples: usize, seed: u64) -> SuiteConfig {
        SuiteConfig {
            k,
            n,
            samples,
            seed,
            t_points: 21,
            nprime_points: 9,
            tolerance: 5e-2,
            refine: 4,
            region: Region::All,
            kinds: vec![ShapeKind::Block, ShapeKind::Bump, ShapeKind::Mixture],
            stop_on_violation: false,
        }
    }

    pub fn options(&self) -> Result<CdOptions> {
        Ok(CdOptions {
            t_grid: uniform_t_grid(self.t_points),
            nprime_grid: geometric_nprime_grid(self.n, self.nprime_points)?,
            restrict_to_regular_k: match self.region {
                Region::Regular(k) => Some(k),
                Region::All => None,
            },
            refine: self.refine,
            tolerance: self.tolerance,
        })
    }

    fn sampler(&self) -> SamplerConfig {
        SamplerConfig { kinds: self.kinds.clone(), region: self.region, entropy_cap: None, max_tries: 1000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub pairs: usize,
    pub rows: usize,
    pub n_ok: usize,
    pub n_violated: usize,
    pub n_vacuous: usize,
    pub n_skipped: usize,
    pub min_margin: f64,
    pub worst_sample: usize,
    pub worst_t: f64,
    pub worst_nprime: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub grid_n: usize,
    pub pairs: Vec<(MeasureSpec, MeasureSpec)>,
    pub reports: Vec<CdReport>,
    pub summary: SuiteSummary,
}

impl SuiteSummary {
    pub fn from_reports(reports: &[CdReport]) -> SuiteSummary {
        summarize(reports)
    }
}

fn summarize(reports: &[CdReport]) -> SuiteSummary {
    let mut s = SuiteSummary { pairs: reports.len(), min_margin: f64::INFINITY, ..Default::default() };
    for (i, r) in reports.iter().enumerate() {
        s.rows += r.rows.len();
        s.n_ok += r.summary.n_ok;
        s.n_violated += r.summary.n_violated;
        s.n_vacuous += r.summary.n_vacuous;
        s.n_skipped += r.summary.n_skipped;
        if r.summary.min_margin < s.min_margin {
            s.min_margin = r.summary.min_margin;
            s.worst_sample = i;
            s.worst_t = r.summary.worst_t;
            s.worst_nprime = r.summary.worst_nprime;
        }
    }
    s.passes = s.n_violated == 0;
    s
}

/// Runs `verify_cd` on the given descriptor pairs; rows stay in pair order.
pub fn run_pairs(
    space: &PointedSpace1D,
    pairs: &[(MeasureSpec, MeasureSpec)],
    config: &SuiteConfig,
) -> Result<Vec<CdReport>> {
    let opts = config.options()?;
    let one = |(a, b): &(MeasureSpec, MeasureSpec)| -> Result<CdReport> {
        verify_cd(space, &a.discretize(space)?, &b.discretize(space)?, config.k, config.n, &opts)
    };
    if !config.stop_on_violation {
        return pairs.par_iter().map(one).collect();
    }
    let mut out = Vec::new();
    for chunk in pairs.chunks(rayon::current_num_threads().max(1) * 4) {
        let part: Vec<CdReport> = chunk.par_iter().map(one).collect::<Result<_>>()?;
        for r in part {
            let bad = !r.passes();
            out.push(r);
            if bad {
                return Ok(out);
            }
        }
    }
    Ok(out)
}

/// Samples `config.samples` pairs and verifies each one.
pub fn run_suite(space: &PointedSpace1D, config: &SuiteConfig) -> Result<SuiteReport> {
    if !(config.tolerance > 0.0) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    let pairs = sample_pairs(space, &config.sampler(), config.samples, config.seed)?;
    let reports = run_pairs(space, &pairs, config)?;
    let summary = summarize(&reports);
    let used = reports.len();
    Ok(SuiteReport { config: config.clone(), grid_n: space.len(), pairs: pairs[..used].to_vec(), reports, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RichardsonReport {
    pub coarse_grid: usize,
    pub fine_grid: usize,
    /// `max(0, −min normalized margin)` on each grid.
    pub defect_coarse: f64,
    pub defect_fine: f64,
    pub min_margin_coarse: f64,
    pub min_margin_fine: f64,
    pub tolerance: f64,
    pub passes: bool,
}

/// Defects below this are read as exact equality.
pub const DEFECT_FLOOR: f64 = 1e-9;

/// Same sampled pairs on a coarse and a fine version of one space: passes when
/// the coarse defect is within tolerance and shrinks at least 1.5× on the fine grid.
pub fn richardson(coarse: &PointedSpace1D, fine: &PointedSpace1D, config: &SuiteConfig) -> Result<RichardsonReport> {
    if coarse.grid().lo() != fine.grid().lo() || coarse.grid().hi() != fine.grid().hi() {
        return Err(Error::MismatchedInputs("coarse and fine spaces cover different domains".into()));
    }
    let pairs = sample_pairs(coarse, &config.sampler(), config.samples, config.seed)?;
    let cfg = SuiteConfig { stop_on_violation: false, ..config.clone() };
    let a = summarize(&run_pairs(coarse, &pairs, &cfg)?);
    let b = summarize(&run_pairs(fine, &pairs, &cfg)?);
    let defect = |m: f64| {
        let d = (-m).max(0.0);
        if d < DEFECT_FLOOR { 0.0 } else { d }
    };
    let (dc, df) = (defect(a.min_margin), defect(b.min_margin));
    Ok(RichardsonReport {
        coarse_grid: coarse.len(),
        fine_grid: fine.len(),
        defect_coarse: dc,
        defect_fine: df,
        min_margin_coarse: a.min_margin,
        min_margin_fine: b.min_margin,
        tolerance: config.tolerance,
        passes: dc <= config.tolerance && (dc == 0.0 || df <= dc / 1.5),
    })
}
