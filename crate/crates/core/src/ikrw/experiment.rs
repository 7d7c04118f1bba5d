//! Convergence tables for sequences of pointed spaces and the CD check on their limit.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cut_terms, FmTerms};
use crate::cdcheck::{run_suite, SuiteConfig};
use crate::error::{Error, Result};
use crate::extended::{ExtendedReal, Finite};
use crate::mmspace::{build_model_space, ModelKind, ModelParams, ModelSpec, PointedSpace1D};
use crate::transport::CostSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `([2^{−n}, R], x^N)` converging to `([0, R], x^N)`.
    TruncatedPower,
    /// Two glued `cos^N` pieces whose gluing point drifts by `shift·2^{−n}`.
    GluedDrift,
    /// Explicit model descriptors.
    CustomList,
}

fn default_cost() -> String {
    "w2".into()
}

fn default_samples() -> usize {
    50
}

fn default_gap_tolerance() -> f64 {
    1e-2
}

/// Descriptor read by `cdknlab converge`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    pub family: Family,
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    pub n_range: [i32; 2],
    pub k_range: [i32; 2],
    pub grid_n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_point: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_radius: Option<f64>,
    /// Initial drift of the gluing point for `glued_drift`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(default = "default_cost")]
    pub cost: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Marginal pairs of the limit CD check; 0 skips it.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Largest admissible extrinsic gap at the last `n`.
    #[serde(default = "default_gap_tolerance")]
    pub gap_tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spaces: Option<Vec<ModelSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<ModelSpec>,
}

impl SequenceSpec {
    pub fn from_json(s: &str) -> Result<SequenceSpec> {
        let spec: SequenceSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let [a, b] = self.n_range;
        let [kb, km] = self.k_range;
        if a > b || kb > km {
            return Err(Error::InvalidParams("n_range and k_range must be ordered".into()));
        }
        if !(self.gap_tolerance > 0.0) {
            return Err(Error::InvalidParams("gap_tolerance must be positive".into()));
        }
        if self.grid_n < 2 {
            return Err(Error::InvalidGrid("grid_n must be >= 2".into()));
        }
        CostSpec::parse(&self.cost)?;
        Ok(())
    }

    pub fn cost(&self) -> Result<CostSpec> {
        CostSpec::parse(&self.cost)
    }

    fn model(&self, kind: ModelKind, params: ModelParams, domain: [f64; 2], base: f64) -> ModelSpec {
        ModelSpec {
            kind,
            params,
            domain,
            grid_n: self.grid_n,
            base_point: base,
            regularity_k: self.k_range[0],
            truncation_radius: None,
            psi_samples: None,
            singular_points: None,
        }
    }

    /// Descriptors `(n, X_n)` and the limit.
    pub fn members(&self) -> Result<(Vec<(i32, ModelSpec)>, ModelSpec)> {
        self.validate()?;
        let ns = self.n_range[0]..=self.n_range[1];
        match self.family {
            Family::TruncatedPower => {
                let p = self.base_point.unwrap_or(1.0);
                let r = self.truncation_radius.unwrap_or(p + 2f64.powi(self.k_range[1] + 1));
                let params = ModelParams { n: self.n, ..Default::default() };
                let seq = ns.map(|n| (n, self.model(ModelKind::PowerN, params.clone(), [2f64.powi(-n), r], p))).collect();
                Ok((seq, self.model(ModelKind::PowerN, params, [0.0, r], p)))
            }
            Family::GluedDrift => {
                let k = self.k.unwrap_or(-2.0);
                if !(k < 0.0) {
                    return Err(Error::InvalidParams("glued_drift needs K < 0".into()));
                }
                let s = (k / self.n).sqrt();
                let shift = self.shift.unwrap_or(0.5 / s);
                let p = self.base_point.unwrap_or(PI / s);
                let domain = [PI / (2.0 * s), 5.0 * PI / (2.0 * s)];
                let params =
                    |d: f64| ModelParams { k, n: self.n, j: Some(2), shift: Some(d), ..Default::default() };
                let seq = ns
                    .map(|n| (n, self.model(ModelKind::GluedCosN, params(shift * 2f64.powi(-n)), domain, p)))
                    .collect();
                Ok((seq, self.model(ModelKind::GluedCosN, params(0.0), domain, p)))
            }
            Family::CustomList => {
                let spaces = self.spaces.as_ref().ok_or_else(|| Error::InvalidParams("custom_list needs spaces".into()))?;
                let limit = self.limit.clone().ok_or_else(|| Error::InvalidParams("custom_list needs limit".into()))?;
                if spaces.len() != (self.n_range[1] - self.n_range[0] + 1) as usize {
                    return Err(Error::InvalidParams(format!(
                        "{} spaces for n_range {:?}",
                        spaces.len(),
                        self.n_range
                    )));
                }
                Ok((ns.zip(spaces.iter().cloned()).collect(), limit))
            }
        }
    }

    /// `(K, N)` checked on the limit: the model's claim when it has one.
    pub fn limit_claim(&self, limit: &ModelSpec) -> (f64, f64) {
        limit.claimed_cd().unwrap_or((self.k.unwrap_or(0.0), self.n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: i32,
    pub k: i32,
    pub log_mass_gap: f64,
    pub base_point_gap: f64,
    pub hausdorff_gap: ExtendedReal,
    pub wc_gap: f64,
    /// Sum without the Hausdorff term.
    pub extrinsic: f64,
    pub total: ExtendedReal,
}

impl ConvergenceRow {
    fn new(n: i32, k: i32, t: FmTerms) -> ConvergenceRow {
        ConvergenceRow {
            n,
            k,
            log_mass_gap: t.log_mass,
            base_point_gap: t.base_point,
            hausdorff_gap: t.hausdorff,
            wc_gap: t.wc,
            extrinsic: t.extrinsic(),
            total: t.total(),
        }
    }
}

/// Truncated series per `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub n: i32,
    pub ikrw: f64,
    pub extrinsic: f64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCheck {
    pub k: f64,
    pub n: f64,
    pub samples: usize,
    pub seed: u64,
    pub grid_n: usize,
    pub min_margin: f64,
    pub violated_rows: usize,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub series: Vec<SeriesRow>,
    /// Per `k`: extrinsic gap strictly decreasing in `n` (or identically zero).
    pub extrinsic_monotone: Vec<(i32, bool)>,
    /// Per `k`: Hausdorff gap nonincreasing in `n`.
    pub hausdorff_monotone: Vec<(i32, bool)>,
    /// Per `k`: extrinsic gap at the last `n`.
    pub final_extrinsic: Vec<(i32, f64)>,
    pub gap_tolerance: f64,
    pub limit: Option<LimitCheck>,
}

impl ConvergenceTable {
    pub fn column(&self, k: i32) -> Vec<&ConvergenceRow> {
        self.rows.iter().filter(|r| r.k == k).collect()
    }

    /// Monotone gaps, final gaps within tolerance, and a passing limit check.
    pub fn converges(&self) -> bool {
        self.extrinsic_monotone.iter().all(|m| m.1)
            && self.hausdorff_monotone.iter().all(|m| m.1)
            && self.final_extrinsic.iter().all(|f| f.1 < self.gap_tolerance)
            && self.limit.as_ref().is_none_or(|l| l.passes)
    }
}

fn strictly_decreasing_or_zero(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0))
}

fn build_all(specs: &[(i32, ModelSpec)]) -> Result<Vec<(i32, PointedSpace1D)>> {
    specs.par_iter().map(|(n, s)| Ok((*n, build_model_space(s)?))).collect()
}

/// Gaps of every `(n, k)`, per-`n` series and, when `samples > 0`, the CD check of the limit.
pub fn convergence_experiment(spec: &SequenceSpec) -> Result<ConvergenceTable> {
    let (members, limit_spec) = spec.members()?;
    let k_bar = spec.k_range[0];
    for (_, m) in &members {
        if m.regularity_k != limit_spec.regularity_k {
            return Err(Error::RegularityMismatch(format!(
                "k̄ = {} differs from the limit's {}",
                m.regularity_k, limit_spec.regularity_k
            )));
        }
    }
    if k_bar < limit_spec.regularity_k {
        return Err(Error::RegularityMismatch(format!(
            "series starts at {k_bar} below the common k̄ = {}",
            limit_spec.regularity_k
        )));
    }
    let cost = spec.cost()?;
    let limit = build_model_space(&limit_spec)?;
    let spaces = build_all(&members)?;
    let ks: Vec<i32> = (spec.k_range[0]..=spec.k_range[1]).collect();
    let jobs: Vec<(usize, i32)> = (0..spaces.len()).flat_map(|i| ks.iter().map(move |&k| (i, k))).collect();
    let rows: Vec<ConvergenceRow> = jobs
        .par_iter()
        .map(|&(i, k)| Ok(ConvergenceRow::new(spaces[i].0, k, cut_terms(&spaces[i].1, &limit, k, cost)?)))
        .collect::<Result<_>>()?;

    let k_max = spec.k_range[1];
    let series = spaces
        .iter()
        .map(|(n, _)| {
            let mut s = SeriesRow { n: *n, ikrw: 0.0, extrinsic: 0.0, tail_bound: 2f64.powi(-k_max) };
            for r in rows.iter().filter(|r| r.n == *n) {
                let w = 2f64.powi(-r.k);
                s.ikrw += w * r.total.min(Finite(1.0)).to_f64();
                s.extrinsic += w * r.extrinsic.min(1.0);
            }
            s
        })
        .collect();
    let mut extrinsic_monotone = Vec::new();
    let mut hausdorff_monotone = Vec::new();
    let mut final_extrinsic = Vec::new();
    for &k in &ks {
        let col: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.k == k).collect();
        let e: Vec<f64> = col.iter().map(|r| r.extrinsic).collect();
        extrinsic_monotone.push((k, strictly_decreasing_or_zero(&e)));
        hausdorff_monotone.push((k, col.windows(2).all(|w| w[1].hausdorff_gap <= w[0].hausdorff_gap)));
        final_extrinsic.push((k, e.last().copied().unwrap_or(0.0)));
    }

    let limit_check = if spec.samples > 0 {
        let seed = spec
            .seed
            .ok_or_else(|| Error::InvalidParams("a seed is required for the limit CD check".into()))?;
        let (k, n) = spec.limit_claim(&limit_spec);
        let report = run_suite(&limit, &SuiteConfig::new(k, n, spec.samples, seed))?;
        Some(LimitCheck {
            k,
            n,
            samples: spec.samples,
            seed,
            grid_n: limit.len(),
            min_margin: report.summary.min_margin,
            violated_rows: report.summary.n_violated,
            passes: report.summary.passes,
        })
    } else {
        None
    };
    Ok(ConvergenceTable {
        rows,
        series,
        extrinsic_monotone,
        hausdorff_monotone,
        final_extrinsic,
        gap_tolerance: spec.gap_tolerance,
        limit: limit_check,
    })
}
