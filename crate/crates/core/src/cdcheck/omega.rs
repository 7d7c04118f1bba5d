//! Sampled `ω(k, h, M)`: the largest geodesic mass leaving `ℛ^h` between
//! marginals in `ℛ^k` of entropy at most `M`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampler::{MarginalSampler, Region, SamplerConfig, ShapeKind};
use crate::error::{Error, Result};
use crate::geodesics::MonotoneMap;
use crate::mmspace::{regular_set, PointedSpace1D};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaConfig {
    /// Exponent of the entropy cap `S_{N,𝔪} ≤ M`.
    pub n: f64,
    pub t_grid: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Refinement of the grid the slices are binned on.
    pub refine: usize,
    pub kinds: Vec<ShapeKind>,
}

impl OmegaConfig {
    pub fn new(n: f64, samples: usize, seed: u64) -> OmegaConfig {
        OmegaConfig {
            n,
            t_grid: super::uniform_t_grid(21),
            samples,
            seed,
            refine: 4,
            kinds: vec![ShapeKind::Block, ShapeKind::Bump, ShapeKind::Mixture],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaEntry {
    pub k: i32,
    pub h: i32,
    pub m: f64,
    pub value: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaTable {
    pub n: f64,
    pub seed: u64,
    pub entries: Vec<OmegaEntry>,
}

impl OmegaTable {
    pub fn get(&self, k: i32, h: i32, m: f64) -> Option<&OmegaEntry> {
        self.entries
            .iter()
            .find(|e| e.k == k && e.h == h && (e.m - m).abs() <= 1e-9 * m.abs().max(1.0))
    }

    /// True when every `(k, M)` column is nonincreasing in `h` up to `slack`.
    pub fn monotone_in_h(&self, slack: f64) -> bool {
        self.entries.iter().all(|a| {
            self.entries
                .iter()
                .filter(|b| b.k == a.k && b.m == a.m && b.h > a.h)
                .all(|b| b.value <= a.value + slack)
        })
    }
}

/// `Ω(k, h, M, δ) = ω(k, h, 2^{1−1/N}M) + 2δ`, and `1` once `δ ≥ 1/4`.
pub fn omega_to_big_omega(table: &OmegaTable, k: i32, h: i32, m: f64, delta: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParams(format!("δ = {delta} must be nonnegative")));
    }
    if delta >= 0.25 {
        return Ok(1.0);
    }
    let mm = 2f64.powf(1.0 - 1.0 / table.n) * m;
    let e = table
        .get(k, h, mm)
        .ok_or_else(|| Error::MissingEntry(format!("ω({k}, {h}, {mm}) not in the table")))?;
    Ok(e.value + 2.0 * delta)
}

fn escape_mass(
    map: &MonotoneMap,
    out: &PointedSpace1D,
    t_grid: &[f64],
    inside_by_h: &[Vec<bool>],
) -> Result<Vec<f64>> {
    let mut worst = vec![0.0f64; inside_by_h.len()];
    for &t in t_grid {
        let masses = map.push_forward(t, out.grid())?;
        let total: f64 = masses.iter().sum();
        for (w, inside) in worst.iter_mut().zip(inside_by_h) {
            let kept: f64 = masses.iter().zip(inside).filter(|(_, &b)| b).map(|(m, _)| m).sum();
            *w = w.max((1.0 - kept / total).clamp(0.0, 1.0));
        }
    }
    Ok(worst)
}

/// One entry per `(k, h, M)`; for each `(k, M)` the same marginal pairs serve every `h`.
pub fn estimate_omega_table(
    space: &PointedSpace1D,
    ks: &[i32],
    hs: &[i32],
    ms: &[f64],
    config: &OmegaConfig,
) -> Result<OmegaTable> {
    if config.samples == 0 {
        return Err(Error::InvalidParams("need at least one sample".into()));
    }
    let factor = config.refine.max(1);
    let out = space.refined(factor);
    let mut entries = Vec::new();
    for (ki, &k) in ks.iter().enumerate() {
        for (mi, &m) in ms.iter().enumerate() {
            let sampler = MarginalSampler::new(
                space,
                SamplerConfig {
                    kinds: config.kinds.clone(),
                    region: Region::Regular(k),
                    entropy_cap: Some((config.n, m)),
                    max_tries: 1000,
                },
            )?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ ((ki as u64) << 32) ^ mi as u64);
            let pairs: Vec<_> = (0..config.samples)
                .map(|_| Ok((sampler.sample(&mut rng)?, sampler.sample(&mut rng)?)))
                .collect::<Result<_>>()?;
            let inside_by_h: Vec<Vec<bool>> = hs
                .iter()
                .map(|&h| {
                    let mut coarse = vec![false; space.len()];
                    for i in regular_set(space, h) {
                        coarse[i] = true;
                    }
                    (0..out.len()).map(|j| coarse[j / factor]).collect()
                })
                .collect();
            let per_sample: Vec<Vec<f64>> = pairs
                .par_iter()
                .map(|(a, b)| {
                    let map = MonotoneMap::new(&a.discretize(space)?, &b.discretize(space)?)?;
                    escape_mass(&map, &out, &config.t_grid, &inside_by_h)
                })
                .collect::<Result<_>>()?;
            for (hi, &h) in hs.iter().enumerate() {
                let value = per_sample.iter().map(|v| v[hi]).fold(0.0, f64::max);
                entries.push(OmegaEntry { k, h, m, value, samples: config.samples });
            }
        }
    }
    Ok(OmegaTable { n: config.n, seed: config.seed, entries })
}

/// Single `(k, h, M)` entry.
pub fn estimate_omega(space: &PointedSpace1D, k: i32, h: i32, m: f64, config: &OmegaConfig) -> Result<OmegaEntry> {
    Ok(estimate_omega_table(space, &[k], &[h], &[m], config)?.entries[0])
}
