//! Discrete measures, densities with respect to `𝔪`, and Rényi entropies.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended::{ExtendedReal, Finite, PositiveInfinity};
use crate::mmspace::{Grid1D, PointedSpace1D};

/// Nonnegative masses on the cells of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    grid: Arc<Grid1D>,
    masses: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(grid: Arc<Grid1D>, masses: Vec<f64>) -> Result<DiscreteMeasure> {
        if masses.len() != grid.len() {
            return Err(Error::InvalidParams(format!("{} masses for {} cells", masses.len(), grid.len())));
        }
        if masses.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidParams("masses must be finite and nonnegative".into()));
        }
        if !(masses.iter().sum::<f64>() > 0.0) {
            return Err(Error::InvalidParams("measure has zero total mass".into()));
        }
        Ok(DiscreteMeasure { grid, masses })
    }

    pub fn grid(&self) -> &Arc<Grid1D> {
        &self.grid
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn is_probability(&self) -> bool {
        (self.total() - 1.0).abs() <= 1e-12
    }

    pub fn normalized(&self) -> DiscreteMeasure {
        let t = self.total();
        DiscreteMeasure { grid: self.grid.clone(), masses: self.masses.iter().map(|m| m / t).collect() }
    }

    /// Indices of cells carrying mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.masses[i] > 0.0).collect()
    }

    pub fn mean(&self) -> f64 {
        let t = self.total();
        (0..self.len()).map(|i| self.masses[i] * self.grid.center(i)).sum::<f64>() / t
    }

    /// `∫ |x − x0|² dμ` with atoms at cell centers.
    pub fn second_moment(&self, x0: f64) -> f64 {
        (0..self.len()).map(|i| self.masses[i] * (self.grid.center(i) - x0).powi(2)).sum()
    }
}

/// `ρ = dμ/d𝔪` per cell, with the `𝔪` cell masses it refers to.
#[derive(Debug, Clone)]
pub struct DensityWrtM {
    grid: Arc<Grid1D>,
    rho: Vec<f64>,
    reference: Vec<ExtendedReal>,
}

impl DensityWrtM {
    pub fn new(grid: Arc<Grid1D>, rho: Vec<f64>, reference: Vec<ExtendedReal>) -> Result<DensityWrtM> {
        if rho.len() != grid.len() || reference.len() != grid.len() {
            return Err(Error::InvalidParams("density length does not match grid".into()));
        }
        Ok(DensityWrtM { grid, rho, reference })
    }

    pub fn grid(&self) -> &Arc<Grid1D> {
        &self.grid
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn reference(&self) -> &[ExtendedReal] {
        &self.reference
    }

    /// Cells where `ρ` is defined (`0 < 𝔪(cell) < ∞`).
    pub fn in_support(&self, i: usize) -> bool {
        matches!(self.reference[i], Finite(m) if m > 0.0)
    }

    /// `ρ·𝔪` on cell `i`.
    pub fn mass(&self, i: usize) -> f64 {
        match self.reference[i] {
            Finite(m) => self.rho[i] * m,
            PositiveInfinity => 0.0,
        }
    }

    /// `Σ_B ρ·𝔪`.
    pub fn reconstruct(&self, cells: &[usize]) -> f64 {
        cells.iter().map(|&i| self.mass(i)).sum()
    }
}

fn check_grid(mu: &DiscreteMeasure, space: &PointedSpace1D) -> Result<()> {
    if mu.grid.same_as(space.grid()) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

fn check_n(n: f64) -> Result<()> {
    if n < 0.0 {
        Ok(())
    } else {
        Err(Error::DomainError(format!("N = {n} must be negative")))
    }
}

/// Cells charged by `μ` where `𝔪` vanishes or is infinite.
pub fn non_ac_cells(mu: &[f64], m: &[f64]) -> Vec<usize> {
    (0..mu.len()).filter(|&i| mu[i] > 0.0 && !(m[i] > 0.0 && m[i].is_finite())).collect()
}

pub fn radon_nikodym(mu: &DiscreteMeasure, space: &PointedSpace1D) -> Result<DensityWrtM> {
    check_grid(mu, space)?;
    let m = space.cell_masses();
    let bad = non_ac_cells(&mu.masses, &m);
    if !bad.is_empty() {
        return Err(Error::NotAbsolutelyContinuous { cells: bad });
    }
    let rho = (0..mu.len()).map(|i| if m[i] > 0.0 && m[i].is_finite() { mu.masses[i] / m[i] } else { 0.0 }).collect();
    let reference = (0..mu.len()).map(|i| space.cell_mass(i)).collect();
    DensityWrtM::new(mu.grid.clone(), rho, reference)
}

/// `ln S_N` from cell masses of `μ` and `𝔪` (`f64::INFINITY` marks infinite
/// `𝔪`); returns `+∞` when `μ` is not absolutely continuous.
pub fn ln_renyi_from_masses(mu: &[f64], m: &[f64], n: f64) -> f64 {
    let p = 1.0 - 1.0 / n;
    let mut terms = Vec::with_capacity(mu.len());
    for i in 0..mu.len() {
        if mu[i] > 0.0 {
            if !(m[i] > 0.0 && m[i].is_finite()) {
                return f64::INFINITY;
            }
            // ρ^p 𝔪 = μ^p 𝔪^{1-p}
            terms.push(p * mu[i].ln() + (1.0 - p) * m[i].ln());
        }
    }
    log_sum_exp(&terms)
}

pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let mx = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
}

/// `S_N` on a finite space given by cell masses; values beyond `f64` range
/// are reported as infinite.
pub fn renyi_from_masses(mu: &[f64], m: &[f64], n: f64) -> ExtendedReal {
    let l = ln_renyi_from_masses(mu, m, n);
    if l == f64::NEG_INFINITY {
        Finite(0.0)
    } else {
        ExtendedReal::from_f64(l.exp())
    }
}

/// `S_{N,𝔪}(μ) = ∫ ρ^{1−1/N} d𝔪`, `+∞` when `μ` is not absolutely continuous.
pub fn renyi_entropy(mu: &DiscreteMeasure, space: &PointedSpace1D, n: f64) -> Result<ExtendedReal> {
    check_n(n)?;
    check_grid(mu, space)?;
    Ok(renyi_from_masses(&mu.masses, &space.cell_masses(), n))
}

/// Convex conjugate of `f(x) = |x|^{1−1/N}`:
/// `f*(y) = (−1/N)·(N/(N−1))^{1−N}·|y|^{1−N}`.
pub fn f_star(y: f64, n: f64) -> f64 {
    (-1.0 / n) * (n / (n - 1.0)).powf(1.0 - n) * y.abs().powf(1.0 - n)
}

/// The maximizer `F* = f′(ρ) = (1 − 1/N)·ρ^{−1/N}`.
pub fn optimal_test_function(mu: &DiscreteMeasure, space: &PointedSpace1D, n: f64) -> Result<Vec<f64>> {
    check_n(n)?;
    let d = radon_nikodym(mu, space)?;
    let p = 1.0 - 1.0 / n;
    Ok((0..mu.len()).map(|i| if d.in_support(i) { p * d.rho[i].powf(-1.0 / n) } else { 0.0 }).collect())
}

/// `max_F Σ F·μ − Σ f*(F)·𝔪` over the supplied family.
pub fn legendre_entropy(mu: &DiscreteMeasure, space: &PointedSpace1D, n: f64, test_functions: &[Vec<f64>]) -> Result<f64> {
    check_n(n)?;
    check_grid(mu, space)?;
    if test_functions.is_empty() {
        return Err(Error::InvalidTestFunction("empty family".into()));
    }
    let m = space.cell_masses();
    let mut best = f64::NEG_INFINITY;
    for (j, f) in test_functions.iter().enumerate() {
        if f.len() != mu.len() {
            return Err(Error::InvalidTestFunction(format!("function {j} has {} values", f.len())));
        }
        let mut v = 0.0;
        for i in 0..mu.len() {
            if f[i] == 0.0 {
                continue;
            }
            if !f[i].is_finite() {
                return Err(Error::InvalidTestFunction(format!("function {j} is unbounded")));
            }
            if space.is_singular_cell(i) || !m[i].is_finite() {
                return Err(Error::InvalidTestFunction(format!("function {j} charges singular cell {i}")));
            }
            v += f[i] * mu.masses[i] - f_star(f[i], n) * m[i];
        }
        best = best.max(v);
    }
    Ok(best)
}

fn default_base() -> BlockBase {
    BlockBase::Reference
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockBase {
    /// Constant density with respect to `𝔪`.
    Reference,
    /// Constant Lebesgue density.
    Lebesgue,
}

/// Measure descriptor; the JSON schema of `--mu0/--mu1` and of the samplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    UniformBlock {
        lo: f64,
        hi: f64,
        #[serde(default = "default_base")]
        base: BlockBase,
    },
    /// Piecewise-linear tent density with respect to `𝔪`.
    Bump { lo: f64, peak: f64, hi: f64 },
    Mixture { weight: f64, first: Box<MeasureSpec>, second: Box<MeasureSpec> },
    Explicit { masses: Vec<f64> },
}

impl MeasureSpec {
    pub fn from_json(s: &str) -> Result<MeasureSpec> {
        Ok(serde_json::from_str(s)?)
    }

    /// Probability measure on the grid of `space` (explicit masses are kept as given).
    pub fn discretize(&self, space: &PointedSpace1D) -> Result<DiscreteMeasure> {
        let g = space.grid();
        let finite = |i: usize| match space.density()[i] {
            Finite(d) if !space.is_singular_cell(i) => Some(d),
            _ => None,
        };
        let masses: Vec<f64> = match self {
            MeasureSpec::UniformBlock { lo, hi, base } => {
                if !(hi > lo) {
                    return Err(Error::InvalidParams("block needs lo < hi".into()));
                }
                (0..g.len())
                    .map(|i| {
                        let ov = (g.right(i).min(*hi) - g.left(i).max(*lo)).max(0.0);
                        if ov == 0.0 {
                            return 0.0;
                        }
                        match base {
                            BlockBase::Reference => finite(i).map_or(0.0, |d| d * ov),
                            BlockBase::Lebesgue => ov,
                        }
                    })
                    .collect()
            }
            MeasureSpec::Bump { lo, peak, hi } => {
                if !(lo < peak && peak < hi) {
                    return Err(Error::InvalidParams("bump needs lo < peak < hi".into()));
                }
                (0..g.len())
                    .map(|i| {
                        let c = g.center(i);
                        let tent = if c <= *lo || c >= *hi {
                            0.0
                        } else if c <= *peak {
                            (c - lo) / (peak - lo)
                        } else {
                            (hi - c) / (hi - peak)
                        };
                        if tent == 0.0 { 0.0 } else { finite(i).map_or(0.0, |d| tent * d * g.width(i)) }
                    })
                    .collect()
            }
            MeasureSpec::Mixture { weight, first, second } => {
                if !(0.0..=1.0).contains(weight) {
                    return Err(Error::InvalidParams("mixture weight outside [0, 1]".into()));
                }
                let a = first.discretize(space)?;
                let b = second.discretize(space)?;
                let (ta, tb) = (a.total(), b.total());
                (0..g.len()).map(|i| weight * a.masses[i] / ta + (1.0 - weight) * b.masses[i] / tb).collect()
            }
            MeasureSpec::Explicit { masses } => return DiscreteMeasure::new(g.clone(), masses.clone()),
        };
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParams("descriptor charges no cell of positive mass".into()));
        }
        DiscreteMeasure::new(g.clone(), masses.into_iter().map(|m| m / total).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mmspace::{build_model_space, normalize_cut, ModelKind, ModelParams, ModelSpec};

    fn lebesgue(n: usize) -> PointedSpace1D {
        let g = Arc::new(Grid1D::uniform(0.0, 1.0, n).unwrap());
        PointedSpace1D::new(g, vec![Finite(1.0); n], vec![], 0.5, 0).unwrap()
    }

    fn power() -> PointedSpace1D {
        build_model_space(&ModelSpec {
            kind: ModelKind::PowerN,
            params: ModelParams { n: -2.0, ..Default::default() },
            domain: [0.0, 4.0],
            grid_n: 64,
            base_point: 1.0,
            regularity_k: 0,
            truncation_radius: None,
            psi_samples: None,
            singular_points: None,
        })
        .unwrap()
    }

    #[test]
    fn uniform_on_lebesgue_has_unit_entropy() {
        let s = lebesgue(16);
        let mu = DiscreteMeasure::new(s.grid().clone(), vec![1.0 / 16.0; 16]).unwrap();
        let v = renyi_entropy(&mu, &s, -2.0).unwrap().finite().unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn normalized_reference_entropy() {
        let s = lebesgue(10).scaled(3.0).unwrap();
        let mu = DiscreteMeasure::new(s.grid().clone(), vec![0.1; 10]).unwrap();
        let n = -1.5;
        let v = renyi_entropy(&mu, &s, n).unwrap().finite().unwrap();
        assert!((v - 3f64.powf(1.0 / n)).abs() < 1e-14);
    }

    #[test]
    fn null_cell_gives_infinity() {
        let g = Arc::new(Grid1D::uniform(0.0, 1.0, 4).unwrap());
        let s = PointedSpace1D::new(g.clone(), vec![Finite(1.0), Finite(1.0), Finite(0.0), Finite(1.0)], vec![], 0.1, 0)
            .unwrap();
        let mu = DiscreteMeasure::new(g, vec![0.25; 4]).unwrap();
        assert_eq!(renyi_entropy(&mu, &s, -2.0).unwrap(), PositiveInfinity);
        assert!(matches!(radon_nikodym(&mu, &s), Err(Error::NotAbsolutelyContinuous { cells }) if cells == vec![2]));
        assert!(renyi_entropy(&mu, &s, 0.5).is_err());
    }

    #[test]
    fn density_of_normalized_cut_is_constant() {
        let s = power();
        let mu = normalize_cut(&s, 0).unwrap();
        let cut = crate::mmspace::k_cut(&s, 0).unwrap();
        let d = radon_nikodym(&mu, &cut).unwrap();
        let total: f64 = cut.cell_masses().iter().sum();
        for i in 0..s.len() {
            if d.in_support(i) && mu.masses()[i] > 0.0 {
                assert!((d.rho()[i] * total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn f_star_matches_brute_force() {
        for &n in &[-0.5, -2.0, -5.0] {
            let p = 1.0 - 1.0 / n;
            for &y in &[0.3, 1.0, 2.5] {
                // geometric scan of x over [1e-6, 1e6], then a local linear refinement
                let g = |x: f64| y * x - x.powf(p);
                let xs: Vec<f64> = (0..=120_000).map(|i| 10f64.powf(-6.0 + i as f64 * 1e-4)).collect();
                let k = (0..xs.len()).max_by(|&a, &b| g(xs[a]).total_cmp(&g(xs[b]))).unwrap();
                let (lo, hi) = (xs[k.saturating_sub(1)], xs[(k + 1).min(xs.len() - 1)]);
                let best = (0..=100_000).map(|i| g(lo + (hi - lo) * i as f64 / 1e5)).fold(f64::NEG_INFINITY, f64::max);
                assert!((best - f_star(y, n)).abs() < 1e-9 * best.abs().max(1.0), "{n} {y}");
            }
        }
        assert!((f_star(1.0, -2.0) - 4.0 / 27.0).abs() < 1e-15);
    }

    #[test]
    fn legendre_at_optimum_equals_entropy() {
        let s = power();
        let mu = MeasureSpec::Bump { lo: 0.5, peak: 1.2, hi: 2.0 }.discretize(&s).unwrap();
        let n = -2.0;
        let fstar = optimal_test_function(&mu, &s, n).unwrap();
        let l = legendre_entropy(&mu, &s, n, &[vec![0.0; s.len()], fstar]).unwrap();
        let e = renyi_entropy(&mu, &s, n).unwrap().finite().unwrap();
        assert!((l - e).abs() <= 1e-12 * e);
        let z = legendre_entropy(&mu, &s, n, &[vec![0.0; s.len()]]).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn test_function_on_singular_cell_is_rejected() {
        let s = power();
        let mu = normalize_cut(&s, 0).unwrap();
        let mut f = vec![0.0; s.len()];
        f[0] = 1.0;
        assert!(matches!(legendre_entropy(&mu, &s, -2.0, &[f]), Err(Error::InvalidTestFunction(_))));
    }

    #[test]
    fn descriptors() {
        let s = lebesgue(8);
        let b = MeasureSpec::UniformBlock { lo: 0.25, hi: 0.75, base: BlockBase::Reference }.discretize(&s).unwrap();
        assert_eq!(b.masses(), &[0.0, 0.0, 0.25, 0.25, 0.25, 0.25, 0.0, 0.0]);
        let j = r#"{"type":"mixture","weight":0.5,"first":{"type":"uniform_block","lo":0,"hi":0.5},"second":{"type":"bump","lo":0.5,"peak":0.75,"hi":1}}"#;
        let m = MeasureSpec::from_json(j).unwrap().discretize(&s).unwrap();
        assert!((m.total() - 1.0).abs() < 1e-15);
        assert!((m.masses()[..4].iter().sum::<f64>() - 0.5).abs() < 1e-15);
        assert!(MeasureSpec::from_json(r#"{"type":"blob"}"#).is_err());
    }

    #[test]
    fn moments() {
        let s = lebesgue(4);
        let mu = DiscreteMeasure::new(s.grid().clone(), vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!((mu.mean() - 0.5).abs() < 1e-15);
        assert!((mu.second_moment(0.5) - 0.375f64.powi(2)).abs() < 1e-15);
        assert!(DiscreteMeasure::new(s.grid().clone(), vec![0.0; 4]).is_err());
    }
}
