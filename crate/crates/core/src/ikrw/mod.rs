//! Distances between pointed spaces: Hausdorff, the finite-mass iKRW value at
//! the identity embedding into ℝ, its series over k-cuts, the extrinsic gap and
//! weak-convergence gaps.
//!
//! All values are realized at the identity embedding of both spaces into ℝ, so
//! they bound the intrinsic infimum over embeddings from above.

mod experiment;

pub use experiment::{
    convergence_experiment, ConvergenceRow, ConvergenceTable, Family, LimitCheck, SequenceSpec, SeriesRow,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended::{ExtendedReal, Finite, PositiveInfinity};
use crate::measure::DiscreteMeasure;
use crate::mmspace::{k_cut, total_mass, PointedSpace1D};
use crate::transport::{wc_distance, CostSpec};

/// Default last index of the iKRW series.
pub const DEFAULT_K_MAX: i32 = 12;

/// Two-sided Hausdorff distance with `d_H(∅, ∅) = 0` and `d_H(∅, A) = ∞` for `A ≠ ∅`.
pub fn hausdorff_distance(a: &[f64], b: &[f64]) -> ExtendedReal {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Finite(0.0),
        (true, false) | (false, true) => return PositiveInfinity,
        _ => {}
    }
    let one_sided = |x: &[f64], y: &[f64]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Finite(one_sided(a, b).max(one_sided(b, a)))
}

/// The four summands of `d^fm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FmTerms {
    pub log_mass: f64,
    pub base_point: f64,
    pub hausdorff: ExtendedReal,
    pub wc: f64,
}

impl FmTerms {
    pub fn total(&self) -> ExtendedReal {
        self.hausdorff + (self.log_mass + self.base_point + self.wc)
    }

    /// The same sum without the singular-set term.
    pub fn extrinsic(&self) -> f64 {
        self.log_mass + self.base_point + self.wc
    }
}

fn finite_mass(space: &PointedSpace1D) -> Result<f64> {
    match total_mass(space) {
        Finite(m) if m > 0.0 && m.is_finite() => Ok(m),
        Finite(_) => Err(Error::InvalidParams("space has no mass".into())),
        PositiveInfinity => Err(Error::InfiniteMass),
    }
}

fn normalized(space: &PointedSpace1D, total: f64) -> Result<DiscreteMeasure> {
    DiscreteMeasure::new(space.grid().clone(), space.cell_masses().into_iter().map(|m| m / total).collect())
}

/// `|log(𝔪_A(X_A)/𝔪_B(X_B))|`, `|p_A − p_B|`, `d_H(𝒮_A, 𝒮_B)` and `W_c(𝔪̄_A, 𝔪̄_B)`.
pub fn ikrw_fm_terms(a: &PointedSpace1D, b: &PointedSpace1D, c_kind: CostSpec) -> Result<FmTerms> {
    let (ma, mb) = (finite_mass(a)?, finite_mass(b)?);
    let wc = wc_distance(&normalized(a, ma)?, &normalized(b, mb)?, c_kind)?;
    Ok(FmTerms {
        log_mass: (ma.ln() - mb.ln()).abs(),
        base_point: (a.base_point() - b.base_point()).abs(),
        hausdorff: hausdorff_distance(a.singular_points(), b.singular_points()),
        wc,
    })
}

/// `d^fm` between two finite-mass spaces (use on k-cuts).
pub fn ikrw_fm(a: &PointedSpace1D, b: &PointedSpace1D, c_kind: CostSpec) -> Result<ExtendedReal> {
    Ok(ikrw_fm_terms(a, b, c_kind)?.total())
}

/// Terms of `d^fm` between the k-th cuts.
pub fn cut_terms(a: &PointedSpace1D, b: &PointedSpace1D, k: i32, c_kind: CostSpec) -> Result<FmTerms> {
    ikrw_fm_terms(&k_cut(a, k)?, &k_cut(b, k)?, c_kind)
}

/// `Σ_{k=k̄}^{k_max} 2^{−k} min{1, d^fm(X_A^k, X_B^k)}` and the tail bound `2^{−k_max}`.
pub fn ikrw(a: &PointedSpace1D, b: &PointedSpace1D, k_bar: i32, k_max: i32, c_kind: CostSpec) -> Result<(f64, f64)> {
    if k_bar > k_max {
        return Err(Error::InvalidParams(format!("k̄ = {k_bar} exceeds k_max = {k_max}")));
    }
    let mut value = 0.0;
    for k in k_bar..=k_max {
        let d = cut_terms(a, b, k, c_kind)?.total();
        value += 2f64.powi(-k) * d.min(Finite(1.0)).to_f64();
    }
    Ok((value, 2f64.powi(-k_max)))
}

/// `|log mass ratio| + |p_A − p_B| + W_c` of the k-th cuts, without the singular-set term.
pub fn extrinsic_gap(a: &PointedSpace1D, b: &PointedSpace1D, k: i32, c_kind: CostSpec) -> Result<f64> {
    Ok(cut_terms(a, b, k, c_kind)?.extrinsic())
}

/// Tent `max(0, 1 − |x − center|/radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub center: f64,
    pub radius: f64,
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        (1.0 - (x - self.center).abs() / self.radius).max(0.0)
    }

    fn check(&self, space: &PointedSpace1D) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite() && self.center.is_finite()) {
            return Err(Error::InvalidTestFunction(format!("bad bump {self:?}")));
        }
        if space.dist_to_singular(self.center) <= self.radius {
            return Err(Error::InvalidTestFunction(format!(
                "bump at {} with radius {} reaches the singular set",
                self.center, self.radius
            )));
        }
        Ok(())
    }

    /// `∫ f d𝔪` with `f` sampled at cell centers.
    pub fn integrate(&self, space: &PointedSpace1D) -> Result<f64> {
        self.check(space)?;
        let g = space.grid();
        let mut sum = 0.0;
        for i in 0..space.len() {
            let f = self.eval(g.center(i));
            if f == 0.0 {
                continue;
            }
            match space.cell_mass(i) {
                Finite(m) => sum += f * m,
                PositiveInfinity => {
                    return Err(Error::InvalidTestFunction(format!("bump at {} charges an infinite cell", self.center)))
                }
            }
        }
        Ok(sum)
    }
}

/// `count` equal-radius bumps with centers evenly spaced in `[lo, hi]`.
pub fn bump_family(lo: f64, hi: f64, count: usize, radius: f64) -> Vec<TestFunction> {
    if count == 1 {
        return vec![TestFunction { center: 0.5 * (lo + hi), radius }];
    }
    (0..count)
        .map(|i| TestFunction { center: lo + (hi - lo) * i as f64 / (count - 1) as f64, radius })
        .collect()
}

/// `max_f |∫f d𝔪_n − ∫f d𝔪_∞|` over the family.
pub fn weak_convergence_gap(m_n: &PointedSpace1D, m_inf: &PointedSpace1D, family: &[TestFunction]) -> Result<f64> {
    let mut gap: f64 = 0.0;
    for f in family {
        gap = gap.max((f.integrate(m_n)? - f.integrate(m_inf)?).abs());
    }
    Ok(gap)
}
