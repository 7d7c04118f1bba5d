//! Discrete optimal transport: exact LP, the 1-D quantile path, and weighted
//! marginalization between spaces.

mod simplex;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics::MonotoneMap;
use crate::measure::DiscreteMeasure;
use crate::mmspace::Grid1D;

/// Bounded concave ground costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcaveCost {
    /// `tanh(d)`
    Tanh,
    /// `min(d, 1)`
    CappedLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostSpec {
    SquaredDistance,
    Concave(ConcaveCost),
}

impl CostSpec {
    pub const TANH: CostSpec = CostSpec::Concave(ConcaveCost::Tanh);
    pub const CAP1: CostSpec = CostSpec::Concave(ConcaveCost::CappedLinear);

    #[inline]
    pub fn eval(self, d: f64) -> f64 {
        match self {
            CostSpec::SquaredDistance => d * d,
            CostSpec::Concave(ConcaveCost::Tanh) => d.tanh(),
            CostSpec::Concave(ConcaveCost::CappedLinear) => d.min(1.0),
        }
    }

    pub fn sup(self) -> f64 {
        match self {
            CostSpec::SquaredDistance => f64::INFINITY,
            CostSpec::Concave(_) => 1.0,
        }
    }

    /// Parses the CLI names `w2`, `tanh`, `cap1`.
    pub fn parse(s: &str) -> Result<CostSpec> {
        match s {
            "w2" => Ok(CostSpec::SquaredDistance),
            "tanh" => Ok(CostSpec::TANH),
            "cap1" => Ok(CostSpec::CAP1),
            _ => Err(Error::InvalidParams(format!("unknown cost '{s}' (w2, tanh, cap1)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CostSpec::SquaredDistance => "w2",
            CostSpec::Concave(ConcaveCost::Tanh) => "tanh",
            CostSpec::Concave(ConcaveCost::CappedLinear) => "cap1",
        }
    }
}

/// Sparse transport plan between two finite index sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    n_source: usize,
    n_target: usize,
    entries: Vec<(usize, usize, f64)>,
    source_marginal: Vec<f64>,
    target_marginal: Vec<f64>,
}

impl Coupling {
    pub fn new(n_source: usize, n_target: usize, entries: Vec<(usize, usize, f64)>) -> Result<Coupling> {
        let mut source_marginal = vec![0.0; n_source];
        let mut target_marginal = vec![0.0; n_target];
        for &(i, j, m) in &entries {
            if i >= n_source || j >= n_target {
                return Err(Error::InvalidParams(format!("coupling entry ({i}, {j}) out of range")));
            }
            if !(m >= 0.0) || !m.is_finite() {
                return Err(Error::InvalidParams("coupling masses must be finite and nonnegative".into()));
            }
            source_marginal[i] += m;
            target_marginal[j] += m;
        }
        Ok(Coupling { n_source, n_target, entries, source_marginal, target_marginal })
    }

    /// The diagonal plan of `masses`.
    pub fn identity(masses: &[f64]) -> Coupling {
        let entries = masses.iter().enumerate().filter(|(_, &m)| m > 0.0).map(|(i, &m)| (i, i, m)).collect();
        Coupling::new(masses.len(), masses.len(), entries).expect("valid diagonal")
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn n_source(&self) -> usize {
        self.n_source
    }

    pub fn n_target(&self) -> usize {
        self.n_target
    }

    pub fn source_marginal(&self) -> &[f64] {
        &self.source_marginal
    }

    pub fn target_marginal(&self) -> &[f64] {
        &self.target_marginal
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.2).sum()
    }

    /// Largest cell-wise deviation of the marginals from `mu` and `nu`.
    pub fn marginal_error(&self, mu: &[f64], nu: &[f64]) -> f64 {
        let a = self.source_marginal.iter().zip(mu).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let b = self.target_marginal.iter().zip(nu).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        a.max(b)
    }

    pub fn cost<F: Fn(usize, usize) -> f64>(&self, c: F) -> f64 {
        self.entries.iter().map(|&(i, j, m)| m * c(i, j)).sum()
    }

    /// No two charged pairs `(x, y)`, `(x′, y′)` with `x < x′` and `y > y′`.
    pub fn is_monotone(&self, xs: &[f64], ys: &[f64]) -> bool {
        let mut e: Vec<(f64, f64)> = self.entries.iter().filter(|e| e.2 > 0.0).map(|&(i, j, _)| (xs[i], ys[j])).collect();
        e.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut max_prev = f64::NEG_INFINITY;
        let mut k = 0;
        while k < e.len() {
            let x = e[k].0;
            let mut end = k;
            while end < e.len() && e[end].0 == x {
                end += 1;
            }
            if e[k].1 < max_prev {
                return false;
            }
            max_prev = max_prev.max(e[end - 1].1);
            k = end;
        }
        true
    }
}

/// Pairwise distances between two finite point families.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<DistanceMatrix> {
        if data.len() != rows * cols || data.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
            return Err(Error::InvalidParams("distance matrix must be rows*cols finite nonnegative values".into()));
        }
        Ok(DistanceMatrix { rows, cols, data })
    }

    /// `|x_i − y_j|`.
    pub fn from_points(xs: &[f64], ys: &[f64]) -> DistanceMatrix {
        let data = xs.iter().flat_map(|x| ys.iter().map(move |y| (x - y).abs())).collect();
        DistanceMatrix { rows: xs.len(), cols: ys.len(), data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    /// Integer units per unit of total mass.
    pub mass_scale: f64,
    /// Largest admissible support size on either side.
    pub size_cap: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { mass_scale: 1e12, size_cap: 2000 }
    }
}

/// Integer units summing exactly to `scale`, by largest remainder.
fn integerize(masses: &[f64], scale: f64) -> Vec<i64> {
    let total: f64 = masses.iter().sum();
    let raw: Vec<f64> = masses.iter().map(|m| m / total * scale).collect();
    let mut out: Vec<i64> = raw.iter().map(|r| r.floor() as i64).collect();
    let target = scale.round() as i64;
    let mut rest = target - out.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let mut k = 0;
    while rest > 0 {
        out[order[k % order.len()]] += 1;
        rest -= 1;
        k += 1;
    }
    out
}

fn check_balance(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
        return Err(Error::UnbalancedMasses(a, b));
    }
    Ok(())
}

/// Exact transport LP between `mu` and `nu` with ground cost `cost(d_ij)`.
pub fn optimal_coupling_lp(
    mu: &[f64],
    nu: &[f64],
    cost: CostSpec,
    distances: &DistanceMatrix,
    opts: &LpOptions,
) -> Result<(Coupling, f64)> {
    if distances.rows != mu.len() || distances.cols != nu.len() {
        return Err(Error::InvalidParams("distance matrix does not match the measures".into()));
    }
    let ta: f64 = mu.iter().sum();
    let tb: f64 = nu.iter().sum();
    check_balance(ta, tb)?;
    if mu.iter().chain(nu).any(|m| !(*m >= 0.0) || !m.is_finite()) || !(ta > 0.0) {
        return Err(Error::InvalidParams("masses must be finite, nonnegative, with positive total".into()));
    }
    let su: Vec<usize> = (0..mu.len()).filter(|&i| mu[i] > 0.0).collect();
    let sv: Vec<usize> = (0..nu.len()).filter(|&j| nu[j] > 0.0).collect();
    if su.len() > opts.size_cap || sv.len() > opts.size_cap {
        return Err(Error::SizeCap { rows: su.len(), cols: sv.len(), cap: opts.size_cap });
    }
    let supply = integerize(&su.iter().map(|&i| mu[i]).collect::<Vec<_>>(), opts.mass_scale);
    let demand = integerize(&sv.iter().map(|&j| nu[j]).collect::<Vec<_>>(), opts.mass_scale);
    let (ra, rb): (Vec<usize>, Vec<usize>) = (
        (0..su.len()).filter(|&k| supply[k] > 0).collect(),
        (0..sv.len()).filter(|&k| demand[k] > 0).collect(),
    );
    let mut c = Vec::with_capacity(ra.len() * rb.len());
    for &a in &ra {
        for &b in &rb {
            c.push(cost.eval(distances.get(su[a], sv[b])));
        }
    }
    let sol = simplex::solve(
        &ra.iter().map(|&a| supply[a]).collect::<Vec<_>>(),
        &rb.iter().map(|&b| demand[b]).collect::<Vec<_>>(),
        &c,
    );
    let unit = ta / opts.mass_scale;
    let entries: Vec<(usize, usize, f64)> =
        sol.flows.iter().map(|&(a, b, f)| (su[ra[a]], sv[rb[b]], f as f64 * unit)).collect();
    let value = entries.iter().map(|&(i, j, m)| m * cost.eval(distances.get(i, j))).sum();
    Ok((Coupling::new(mu.len(), nu.len(), entries)?, value))
}

/// LP between two grid measures with atoms at cell centers.
pub fn optimal_coupling_grid(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: CostSpec,
    opts: &LpOptions,
) -> Result<(Coupling, f64)> {
    let d = support_distances(mu, nu);
    optimal_coupling_lp(mu.masses(), nu.masses(), cost, &d, opts)
}

// Distances are only read on supports; other rows and columns stay zero.
fn support_distances(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> DistanceMatrix {
    let (ga, gb) = (mu.grid(), nu.grid());
    let sb = nu.support();
    let mut data = vec![0.0; mu.len() * nu.len()];
    for i in mu.support() {
        let x = ga.center(i);
        for &j in &sb {
            data[i * nu.len() + j] = (x - gb.center(j)).abs();
        }
    }
    DistanceMatrix { rows: mu.len(), cols: nu.len(), data }
}

/// Squared-distance cost of the monotone rearrangement (atoms at cell centers)
/// and the map itself.
pub fn w2_quantile_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(f64, MonotoneMap)> {
    let map = MonotoneMap::new(mu, nu)?;
    Ok((map.atomic_cost() * mu.total(), map))
}

/// `W₂` between the cell-wise uniform spreads of two grid measures.
pub fn w2_spread(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    Ok(MonotoneMap::new(mu, nu)?.spread_cost().sqrt())
}

/// `W_c(μ, ν) = min_π ∫ c(|x − y|) dπ`.
pub fn wc_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure, c_kind: CostSpec) -> Result<f64> {
    wc_distance_with(mu, nu, c_kind, &LpOptions::default())
}

pub fn wc_distance_with(mu: &DiscreteMeasure, nu: &DiscreteMeasure, c_kind: CostSpec, opts: &LpOptions) -> Result<f64> {
    if c_kind == CostSpec::SquaredDistance {
        return Ok(w2_quantile_1d(mu, nu)?.0);
    }
    Ok(optimal_coupling_grid(mu, nu, c_kind, opts)?.1)
}

/// `P′(μ) = (p₂)_♯(ρ̃ p)` with `ρ̃ = dμ/d𝔪̄_A`.
pub fn weighted_marginalization(
    p: &Coupling,
    mu: &DiscreteMeasure,
    reference_a: &DiscreteMeasure,
    target_grid: Arc<Grid1D>,
) -> Result<DiscreteMeasure> {
    if mu.len() != p.n_source() || reference_a.len() != p.n_source() || target_grid.len() != p.n_target() {
        return Err(Error::MismatchedInputs("coupling dimensions do not match the measures".into()));
    }
    let r = reference_a.masses();
    let bad: Vec<usize> = (0..mu.len()).filter(|&i| mu.masses()[i] > 0.0 && !(r[i] > 0.0)).collect();
    if !bad.is_empty() {
        return Err(Error::NotAbsolutelyContinuous { cells: bad });
    }
    let mut out = vec![0.0; p.n_target()];
    for &(i, j, m) in p.entries() {
        if r[i] > 0.0 {
            out[j] += mu.masses()[i] / r[i] * m;
        }
    }
    DiscreteMeasure::new(target_grid, out)
}
