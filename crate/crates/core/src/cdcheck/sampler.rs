//! Seeded random marginals: uniform blocks, tent bumps and two-component mixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{renyi_entropy, BlockBase, MeasureSpec};
use crate::mmspace::{regular_set, PointedSpace1D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Block,
    Bump,
    Mixture,
}

/// Cells a sampled marginal may charge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Every cell of finite positive mass away from the singular set.
    All,
    /// Cells of `ℛ^k`.
    Regular(i32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub kinds: Vec<ShapeKind>,
    pub region: Region,
    /// `(N, M)`: reject marginals with `S_{N,𝔪} > M`.
    pub entropy_cap: Option<(f64, f64)>,
    pub max_tries: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            kinds: vec![ShapeKind::Block, ShapeKind::Bump, ShapeKind::Mixture],
            region: Region::All,
            entropy_cap: None,
            max_tries: 1000,
        }
    }
}

/// Draws marginal descriptors whose breakpoints are edges of the space's grid,
/// so the same descriptor discretizes consistently on refinements.
#[derive(Debug, Clone)]
pub struct MarginalSampler<'a> {
    space: &'a PointedSpace1D,
    config: SamplerConfig,
    /// Maximal runs `[start, end)` of allowed cells and their lengths.
    runs: Vec<(usize, usize, f64)>,
}

impl<'a> MarginalSampler<'a> {
    pub fn new(space: &'a PointedSpace1D, config: SamplerConfig) -> Result<MarginalSampler<'a>> {
        if config.kinds.is_empty() {
            return Err(Error::InvalidParams("sampler needs at least one shape kind".into()));
        }
        let m = space.cell_masses();
        let mut allowed: Vec<bool> =
            (0..space.len()).map(|i| !space.is_singular_cell(i) && m[i] > 0.0 && m[i].is_finite()).collect();
        if let Region::Regular(k) = config.region {
            let mut inside = vec![false; space.len()];
            for i in regular_set(space, k) {
                inside[i] = true;
            }
            for (a, b) in allowed.iter_mut().zip(inside) {
                *a &= b;
            }
        }
        let g = space.grid();
        let mut runs = Vec::new();
        let mut i = 0;
        while i < allowed.len() {
            if !allowed[i] {
                i += 1;
                continue;
            }
            let start = i;
            while i < allowed.len() && allowed[i] {
                i += 1;
            }
            if i - start >= 2 {
                runs.push((start, i, g.right(i - 1) - g.left(start)));
            }
        }
        if runs.is_empty() {
            return Err(Error::InvalidParams("no run of two allowed cells to sample from".into()));
        }
        Ok(MarginalSampler { space, config, runs })
    }

    pub fn space(&self) -> &PointedSpace1D {
        self.space
    }

    fn pick_run<R: Rng>(&self, rng: &mut R) -> (usize, usize) {
        let total: f64 = self.runs.iter().map(|r| r.2).sum();
        let mut u = rng.gen::<f64>() * total;
        for &(a, b, l) in &self.runs {
            if u < l {
                return (a, b);
            }
            u -= l;
        }
        let last = self.runs[self.runs.len() - 1];
        (last.0, last.1)
    }

    /// Edges `[lo, hi]` of at least `max(2, run/8)` consecutive allowed cells.
    fn pick_interval<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let (a, b) = self.pick_run(rng);
        let len = b - a;
        let min = 2.max(len.div_ceil(8)).min(len);
        let w = rng.gen_range(min..=len);
        let start = rng.gen_range(a..=b - w);
        let g = self.space.grid();
        (g.left(start), g.right(start + w - 1))
    }

    fn simple<R: Rng>(&self, rng: &mut R, bump: bool) -> MeasureSpec {
        let (lo, hi) = self.pick_interval(rng);
        if bump {
            let u = rng.gen_range(0.2..0.8);
            MeasureSpec::Bump { lo, peak: lo + u * (hi - lo), hi }
        } else {
            MeasureSpec::UniformBlock { lo, hi, base: BlockBase::Reference }
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> MeasureSpec {
        let kind = self.config.kinds[rng.gen_range(0..self.config.kinds.len())];
        match kind {
            ShapeKind::Block => self.simple(rng, false),
            ShapeKind::Bump => self.simple(rng, true),
            ShapeKind::Mixture => {
                let weight = rng.gen_range(0.2..0.8);
                let b = rng.gen::<bool>();
                let first = self.simple(rng, b);
                let b = rng.gen::<bool>();
                let second = self.simple(rng, b);
                MeasureSpec::Mixture { weight, first: Box::new(first), second: Box::new(second) }
            }
        }
    }

    /// One descriptor passing the entropy cap.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<MeasureSpec> {
        for _ in 0..self.config.max_tries.max(1) {
            let spec = self.draw(rng);
            let mu = spec.discretize(self.space)?;
            match self.config.entropy_cap {
                None => return Ok(spec),
                Some((n, cap)) => {
                    if renyi_entropy(&mu, self.space, n)? <= crate::extended::Finite(cap) {
                        return Ok(spec);
                    }
                }
            }
        }
        Err(Error::SamplerEntropyViolation(format!(
            "no marginal within the entropy cap after {} draws",
            self.config.max_tries
        )))
    }
}

/// `count` marginal pairs from a `ChaCha8` stream seeded with `seed`.
pub fn sample_pairs(
    space: &PointedSpace1D,
    config: &SamplerConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<(MeasureSpec, MeasureSpec)>> {
    let sampler = MarginalSampler::new(space, config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| Ok((sampler.sample(&mut rng)?, sampler.sample(&mut rng)?))).collect()
}
