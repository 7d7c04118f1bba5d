//! The `T`-functional and the `CD(K, N)` verifier.

mod convexity;
mod omega;
mod sampler;
mod suite;

pub use convexity::{kn_convexity_check, sample_triples, ConvexityReport};
pub use omega::{estimate_omega, estimate_omega_table, omega_to_big_omega, OmegaConfig, OmegaEntry, OmegaTable};
pub use sampler::{sample_pairs, MarginalSampler, Region, SamplerConfig, ShapeKind};
pub use suite::{richardson, run_pairs, run_suite, RichardsonReport, SuiteConfig, SuiteReport, SuiteSummary, DEFECT_FLOOR};

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::distortion::LnTau;
use crate::error::{Error, Result};
use crate::extended::{ExtendedReal, Finite, PositiveInfinity};
use crate::geodesics::MonotoneMap;
use crate::measure::{log_sum_exp, DensityWrtM, DiscreteMeasure};
use crate::mmspace::{regular_set, PointedSpace1D};
use crate::quad::GL2;
use crate::transport::Coupling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Violated,
    VacuousInf,
    SkippedEntropyInf,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Violated => "violated",
            RowStatus::VacuousInf => "vacuous_inf",
            RowStatus::SkippedEntropyInf => "skipped_entropy_inf",
        }
    }
}

/// One `(t, N′)` evaluation of `S_{N′}(μ_t) ≤ T^{(t)}_{K,N′}(π|𝔪)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdRow {
    pub t: f64,
    pub nprime: f64,
    /// `S` and `T`, saturated at `f64::MAX` when finite but out of range.
    pub s_value: ExtendedReal,
    pub t_value: ExtendedReal,
    pub ln_s: f64,
    pub ln_t: f64,
    /// `T − S`, saturated to `±f64::MAX` when out of range; `+∞` for vacuous rows, NaN when skipped.
    pub margin: f64,
    /// `1 − (S/T)^{1/(1−1/N′)}`: the margin on the scale of `ρ`, used for pass/fail.
    pub normalized_margin: f64,
    pub status: RowStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CdSummary {
    /// Smallest normalized margin over rows with both sides finite.
    pub min_margin: f64,
    pub worst_t: f64,
    pub worst_nprime: f64,
    pub n_ok: usize,
    pub n_violated: usize,
    pub n_vacuous: usize,
    pub n_skipped: usize,
    /// Largest slice mass on cells where `𝔪` is infinite.
    pub singular_zone_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdReport {
    pub k: f64,
    pub n: f64,
    pub tolerance: f64,
    pub grid_n: usize,
    pub rows: Vec<CdRow>,
    pub summary: CdSummary,
    /// Hash of the space grid and both marginals.
    pub fingerprint: u64,
}

impl CdReport {
    pub fn passes(&self) -> bool {
        self.summary.n_violated == 0
    }

    pub fn row(&self, t: f64, nprime: f64) -> Option<&CdRow> {
        self.rows.iter().find(|r| same_key(r.t, t) && same_key(r.nprime, nprime))
    }
}

fn same_key(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdOptions {
    pub t_grid: Vec<f64>,
    pub nprime_grid: Vec<f64>,
    pub restrict_to_regular_k: Option<i32>,
    /// Output refinement factor of the geodesic slices.
    pub refine: usize,
    pub tolerance: f64,
}

impl CdOptions {
    /// 21 times, 9 geometric `N′` between `N` and `−1e-3`, refinement 4, tolerance 5e-2.
    pub fn standard(n: f64) -> Result<CdOptions> {
        Ok(CdOptions {
            t_grid: uniform_t_grid(21),
            nprime_grid: geometric_nprime_grid(n, 9)?,
            restrict_to_regular_k: None,
            refine: 4,
            tolerance: 5e-2,
        })
    }
}

pub fn uniform_t_grid(points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points).map(|i| i as f64 / (points - 1) as f64).collect()
}

/// Geometric spacing from `N` to `−1e-3` (a single point `N` when `count = 1`).
pub fn geometric_nprime_grid(n: f64, count: usize) -> Result<Vec<f64>> {
    if !(n < 0.0) {
        return Err(Error::DomainError(format!("N = {n} must be negative")));
    }
    if count <= 1 || n >= -1e-3 {
        return Ok(vec![n]);
    }
    let (a, b) = ((-n).ln(), 1e-3f64.ln());
    Ok((0..count)
        .map(|i| {
            if i == 0 {
                n
            } else {
                -(a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect())
}

fn fingerprint(space: &PointedSpace1D, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> u64 {
    let mut h = DefaultHasher::new();
    for x in space.grid().edges().iter().chain(mu0.masses()).chain(mu1.masses()) {
        x.to_bits().hash(&mut h);
    }
    h.finish()
}

fn from_ln(l: f64) -> ExtendedReal {
    if l == f64::INFINITY {
        PositiveInfinity
    } else {
        Finite(l.exp().min(f64::MAX))
    }
}

/// `T^{(t)}_{K,N}(π|𝔪) = ∫ [τ^{(1−t)}(d)ρ₀^{−1/N} + τ^{(t)}(d)ρ₁^{−1/N}] dπ` with atoms at cell centers.
pub fn t_functional(
    coupling: &Coupling,
    rho0: &DensityWrtM,
    rho1: &DensityWrtM,
    k: f64,
    n: f64,
    t: f64,
) -> Result<ExtendedReal> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::DomainError(format!("t = {t} outside [0, 1]")));
    }
    let tau = LnTau::new(k, n)?;
    if coupling.n_source() != rho0.rho().len() || coupling.n_target() != rho1.rho().len() {
        return Err(Error::MismatchedInputs("coupling and densities index different grids".into()));
    }
    for (side, marg, d) in [(0, coupling.source_marginal(), rho0), (1, coupling.target_marginal(), rho1)] {
        for (i, &m) in marg.iter().enumerate() {
            let expect = d.mass(i);
            if (m - expect).abs() > 1e-9 * expect.max(1e-3) || (m > 0.0 && !d.in_support(i)) {
                let _ = side;
                return Err(Error::MarginalMismatch { cell: i, got: m, expected: expect });
            }
        }
    }
    let (g0, g1) = (rho0.grid(), rho1.grid());
    let e = -1.0 / n;
    let mut terms = Vec::with_capacity(2 * coupling.entries().len());
    for &(i, j, m) in coupling.entries() {
        if m <= 0.0 {
            continue;
        }
        let d = (g0.center(i) - g1.center(j)).abs();
        let lm = m.ln();
        for (lt, r) in [(tau.eval(1.0 - t, d), rho0.rho()[i]), (tau.eval(t, d), rho1.rho()[j])] {
            if lt == f64::INFINITY {
                return Ok(PositiveInfinity);
            }
            terms.push(lm + lt + e * r.ln());
        }
    }
    Ok(from_ln(log_sum_exp(&terms)))
}

/// Precomputed geodesic data shared by all `(t, N′)` rows of one marginal pair.
struct PairData {
    map: MonotoneMap,
    /// Per segment and Gauss node: `ln(weight·mass)`, `ln ρ₀`, `ln ρ₁`, distance.
    nodes: Vec<(f64, f64, f64, f64)>,
}

fn pair_data(space: &PointedSpace1D, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> Result<PairData> {
    let map = MonotoneMap::new(mu0, mu1)?;
    let m = space.cell_masses();
    let (t0, t1) = (mu0.total(), mu1.total());
    let mut nodes = Vec::with_capacity(map.segments().len() * GL2.len());
    for s in map.segments() {
        let l0 = (mu0.masses()[s.src] / t0 / m[s.src]).ln();
        let l1 = (mu1.masses()[s.tgt] / t1 / m[s.tgt]).ln();
        let (d0, d1) = (s.y0 - s.x0, s.y1 - s.x1);
        for &(xi, w) in &GL2 {
            let u = 0.5 * (xi + 1.0);
            let d = (d0 + (d1 - d0) * u).abs();
            nodes.push(((0.5 * w * s.mass).ln(), l0, l1, d));
        }
    }
    Ok(PairData { map, nodes })
}

/// Checks `S_{N′,𝔪}(μ_t) ≤ T^{(t)}_{K,N′}` along the monotone geodesic for every
/// `(t, N′)` of the grids.
pub fn verify_cd(
    space: &PointedSpace1D,
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    k: f64,
    n: f64,
    opts: &CdOptions,
) -> Result<CdReport> {
    if !(n < 0.0) {
        return Err(Error::DomainError(format!("N = {n} must be negative")));
    }
    if !(opts.tolerance > 0.0) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    if opts.nprime_grid.iter().any(|&np| !(np >= n - 1e-12 * n.abs() && np < 0.0)) {
        return Err(Error::DomainError(format!("N′ grid must lie in [{n}, 0)")));
    }
    if opts.t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::DomainError("t grid must lie in [0, 1]".into()));
    }
    for mu in [mu0, mu1] {
        if !mu.grid().same_as(space.grid()) {
            return Err(Error::GridMismatch);
        }
    }
    if let Some(kr) = opts.restrict_to_regular_k {
        let mut allowed = vec![false; space.len()];
        for i in regular_set(space, kr) {
            allowed[i] = true;
        }
        let bad: Vec<usize> = mu0
            .support()
            .into_iter()
            .chain(mu1.support())
            .filter(|&i| !allowed[i])
            .collect();
        if !bad.is_empty() {
            return Err(Error::SupportViolation { cells: bad });
        }
    }

    let m = space.cell_masses();
    let skipped = [mu0, mu1].iter().any(|mu| !crate::measure::non_ac_cells(mu.masses(), &m).is_empty());
    let mut rows = Vec::with_capacity(opts.t_grid.len() * opts.nprime_grid.len());
    let mut zone: f64 = 0.0;
    if skipped {
        for &t in &opts.t_grid {
            for &np in &opts.nprime_grid {
                rows.push(CdRow {
                    t,
                    nprime: np,
                    s_value: PositiveInfinity,
                    t_value: PositiveInfinity,
                    ln_s: f64::INFINITY,
                    ln_t: f64::INFINITY,
                    margin: f64::NAN,
                    normalized_margin: f64::NAN,
                    status: RowStatus::SkippedEntropyInf,
                });
            }
        }
    } else {
        let data = pair_data(space, mu0, mu1)?;
        let out = space.refined(opts.refine.max(1));
        let om = out.cell_masses();
        let taus: Vec<LnTau> = opts.nprime_grid.iter().map(|&np| LnTau::new(k, np)).collect::<Result<_>>()?;
        let mut terms = Vec::with_capacity(2 * data.nodes.len());
        for &t in &opts.t_grid {
            let masses = data.map.push_forward(t, out.grid())?;
            // cells of μ_t: (ln μ, ln 𝔪); mass on infinite-𝔪 cells is left out of S
            let mut cells = Vec::new();
            let mut null_hit = false;
            let mut zt = 0.0;
            for (i, &w) in masses.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                if om[i] == f64::INFINITY {
                    zt += w;
                } else if om[i] > 0.0 {
                    cells.push((w.ln(), om[i].ln()));
                } else {
                    null_hit = true;
                }
            }
            zone = zone.max(zt);
            for (q, &np) in opts.nprime_grid.iter().enumerate() {
                let p = 1.0 - 1.0 / np;
                let ls = if null_hit {
                    f64::INFINITY
                } else {
                    let st: Vec<f64> = cells.iter().map(|&(lw, lm)| p * lw + (1.0 - p) * lm).collect();
                    log_sum_exp(&st)
                };
                let e = -1.0 / np;
                terms.clear();
                let mut infinite = false;
                for &(lw, l0, l1, d) in &data.nodes {
                    let a = taus[q].eval(1.0 - t, d);
                    let b = taus[q].eval(t, d);
                    if a == f64::INFINITY || b == f64::INFINITY {
                        infinite = true;
                        break;
                    }
                    terms.push(lw + a + e * l0);
                    terms.push(lw + b + e * l1);
                }
                rows.push(make_row(t, np, ls, if infinite { f64::INFINITY } else { log_sum_exp(&terms) }, opts.tolerance));
            }
        }
    }
    let summary = summarize(&rows, zone);
    Ok(CdReport {
        k,
        n,
        tolerance: opts.tolerance,
        grid_n: space.len(),
        rows,
        summary,
        fingerprint: fingerprint(space, mu0, mu1),
    })
}

fn make_row(t: f64, np: f64, ls: f64, lt: f64, tol: f64) -> CdRow {
    let p = 1.0 - 1.0 / np;
    let (s_value, t_value) = (from_ln(ls), from_ln(lt));
    if lt == f64::INFINITY {
        return CdRow {
            t,
            nprime: np,
            s_value,
            t_value,
            ln_s: ls,
            ln_t: lt,
            margin: f64::INFINITY,
            normalized_margin: 1.0,
            status: RowStatus::VacuousInf,
        };
    }
    let margin = if lt == ls {
        0.0
    } else if ls == f64::INFINITY {
        f64::NEG_INFINITY
    } else {
        let (hi, lo, sign) = if lt > ls { (lt, ls, 1.0) } else { (ls, lt, -1.0) };
        sign * (hi + (-(lo - hi).exp_m1()).ln()).exp().min(f64::MAX)
    };
    let normalized_margin = if ls == f64::NEG_INFINITY {
        1.0
    } else if ls == f64::INFINITY || lt == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        -((ls - lt) / p).exp_m1()
    };
    let status = if normalized_margin < -tol { RowStatus::Violated } else { RowStatus::Ok };
    CdRow { t, nprime: np, s_value, t_value, ln_s: ls, ln_t: lt, margin, normalized_margin, status }
}

fn summarize(rows: &[CdRow], zone: f64) -> CdSummary {
    let mut s = CdSummary { min_margin: f64::INFINITY, singular_zone_mass: zone, ..Default::default() };
    for r in rows {
        match r.status {
            RowStatus::Ok => s.n_ok += 1,
            RowStatus::Violated => s.n_violated += 1,
            RowStatus::VacuousInf => s.n_vacuous += 1,
            RowStatus::SkippedEntropyInf => s.n_skipped += 1,
        }
        if matches!(r.status, RowStatus::Ok | RowStatus::Violated) && r.normalized_margin < s.min_margin {
            s.min_margin = r.normalized_margin;
            s.worst_t = r.t;
            s.worst_nprime = r.nprime;
        }
    }
    s
}

/// True when every `(t, N″)` row that passes in `strong` also passes in `weak`.
pub fn hierarchy_check(strong: &CdReport, weak: &CdReport) -> Result<bool> {
    if strong.fingerprint != weak.fingerprint {
        return Err(Error::MismatchedInputs("reports refer to different spaces or marginals".into()));
    }
    if weak.k > strong.k + 1e-12 || weak.n < strong.n - 1e-12 {
        return Err(Error::MismatchedInputs("weak report must have K′ ≤ K and N′ ∈ [N, 0)".into()));
    }
    let tol = strong.tolerance.min(weak.tolerance);
    let mut shared = 0;
    for w in &weak.rows {
        if let Some(s) = strong.row(w.t, w.nprime) {
            shared += 1;
            let s_ok = s.status != RowStatus::Violated;
            if s_ok && w.status == RowStatus::Violated && w.normalized_margin < -tol {
                return Ok(false);
            }
        }
    }
    if shared == 0 {
        return Err(Error::MismatchedInputs("no shared (t, N′) rows".into()));
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{radon_nikodym, BlockBase, MeasureSpec};
    use crate::mmspace::Grid1D;
    use std::sync::Arc;

    fn lebesgue(n: usize) -> PointedSpace1D {
        let g = Arc::new(Grid1D::uniform(0.0, 1.0, n).unwrap());
        PointedSpace1D::new(g, vec![Finite(1.0); n], vec![], 0.5, 0).unwrap()
    }

    #[test]
    fn nprime_grid_shape() {
        let g = geometric_nprime_grid(-1.0, 9).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], -1.0);
        assert!((g[8] + 1e-3).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn trivial_equality_on_lebesgue() {
        let s = lebesgue(64);
        let mu = DiscreteMeasure::new(s.grid().clone(), vec![1.0 / 64.0; 64]).unwrap();
        let r = verify_cd(&s, &mu, &mu, 0.0, -2.0, &CdOptions::standard(-2.0).unwrap()).unwrap();
        assert_eq!(r.rows.len(), 21 * 9);
        for row in &r.rows {
            assert!(row.margin.abs() <= 1e-10, "{row:?}");
        }
        assert!(r.passes());
    }

    #[test]
    fn t_functional_diagonal() {
        let s = lebesgue(16);
        let mu = DiscreteMeasure::new(s.grid().clone(), vec![1.0 / 16.0; 16]).unwrap();
        let rho = radon_nikodym(&mu, &s).unwrap();
        let c = Coupling::identity(mu.masses());
        for t in [0.0, 0.3, 1.0] {
            let v = t_functional(&c, &rho, &rho, 0.0, -2.0, t).unwrap().finite().unwrap();
            assert!((v - 1.0).abs() < 1e-14);
        }
        let wrong = Coupling::new(16, 16, vec![(0, 0, 1.0)]).unwrap();
        assert!(matches!(t_functional(&wrong, &rho, &rho, 0.0, -2.0, 0.5), Err(Error::MarginalMismatch { .. })));
    }

    #[test]
    fn far_mass_with_negative_k_is_vacuous() {
        let g = Arc::new(Grid1D::uniform(0.0, 10.0, 100).unwrap());
        let s = PointedSpace1D::new(g, vec![Finite(1.0); 100], vec![], 5.0, 0).unwrap();
        let m0 = MeasureSpec::UniformBlock { lo: 0.0, hi: 1.0, base: BlockBase::Reference }.discretize(&s).unwrap();
        let m1 = MeasureSpec::UniformBlock { lo: 9.0, hi: 10.0, base: BlockBase::Reference }.discretize(&s).unwrap();
        // π√((N−1)/K) = π·√(3/2) ≈ 3.85 < 8
        let mut o = CdOptions::standard(-2.0).unwrap();
        o.nprime_grid = vec![-2.0];
        let r = verify_cd(&s, &m0, &m1, -2.0, -2.0, &o).unwrap();
        assert!(r.rows.iter().filter(|r| r.t > 0.0 && r.t < 1.0).all(|r| r.status == RowStatus::VacuousInf));
    }

    #[test]
    fn hierarchy_identity() {
        let s = lebesgue(32);
        let m0 = MeasureSpec::Bump { lo: 0.0, peak: 0.2, hi: 0.5 }.discretize(&s).unwrap();
        let m1 = MeasureSpec::Bump { lo: 0.4, peak: 0.9, hi: 1.0 }.discretize(&s).unwrap();
        let o = CdOptions::standard(-1.0).unwrap();
        let a = verify_cd(&s, &m0, &m1, 0.0, -1.0, &o).unwrap();
        let b = verify_cd(&s, &m0, &m1, 0.0, -1.0, &o).unwrap();
        assert_eq!(a, b);
        assert!(hierarchy_check(&a, &b).unwrap());
        let other = verify_cd(&s, &m1, &m0, 0.0, -1.0, &o).unwrap();
        assert!(matches!(hierarchy_check(&a, &other), Err(Error::MismatchedInputs(_))));
    }

    #[test]
    fn restricted_mode_rejects_outside_support() {
        let s = lebesgue(32);
        let m = DiscreteMeasure::new(s.grid().clone(), vec![1.0 / 32.0; 32]).unwrap();
        let mut o = CdOptions::standard(-1.0).unwrap();
        o.restrict_to_regular_k = Some(-3);
        assert!(matches!(verify_cd(&s, &m, &m, 0.0, -1.0, &o), Err(Error::SupportViolation { .. })));
    }
}
