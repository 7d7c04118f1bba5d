//! `(K, N)`-convexity of sampled weights `ψ` through `f_N = e^{−ψ/N}`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distortion::sigma_kappa;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub k: f64,
    pub n: f64,
    pub triples: usize,
    /// Smallest `(rhs − lhs) / max(1, lhs, rhs)`.
    pub min_margin: f64,
    /// `(x₀, x₁, t)` attaining the minimum.
    pub worst: (f64, f64, f64),
}

/// `x` strictly increasing; `psi[i] = None` stands for `ψ = −∞`.
fn check_samples(xs: &[f64], psi: &[Option<f64>]) -> Result<()> {
    if xs.len() != psi.len() || xs.len() < 3 {
        return Err(Error::InvalidParams("need at least three (x, ψ) samples of equal length".into()));
    }
    if xs.windows(2).any(|w| !(w[0] < w[1])) || xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParams("sample points must be finite and strictly increasing".into()));
    }
    if psi.iter().flatten().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::InvalidParams("ψ samples must be finite or −∞".into()));
    }
    Ok(())
}

/// Largest distance admissible for `κ = K/N` (`∞` when `κ ≤ 0`).
fn max_distance(k: f64, n: f64) -> f64 {
    let kappa = k / n;
    if kappa > 0.0 {
        std::f64::consts::PI / kappa.sqrt()
    } else {
        f64::INFINITY
    }
}

/// Index triples `(i, m, j)` with `i < m < j` and `|x_j − x_i|` below the
/// distance bound, so `x_m` is the interpolant at `t = (x_m − x_i)/(x_j − x_i)`.
pub fn sample_triples<R: Rng>(xs: &[f64], k: f64, n: f64, count: usize, rng: &mut R) -> Result<Vec<(usize, usize, usize)>> {
    if xs.len() < 3 {
        return Err(Error::InvalidParams("need at least three sample points".into()));
    }
    let dmax = max_distance(k, n) * (1.0 - 1e-9);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count {
        tries += 1;
        if tries > 1000 * count.max(1) {
            return Err(Error::DomainError("no admissible triple within the distance bound".into()));
        }
        let i = rng.gen_range(0..xs.len() - 2);
        let j = rng.gen_range(i + 2..xs.len());
        if xs[j] - xs[i] >= dmax {
            continue;
        }
        let m = rng.gen_range(i + 1..j);
        out.push((i, m, j));
    }
    Ok(out)
}

/// Checks `f_N(x_t) ≤ σ^{(1−t)}_{K/N}(d)f_N(x₀) + σ^{(t)}_{K/N}(d)f_N(x₁)` on every triple.
pub fn kn_convexity_check(
    xs: &[f64],
    psi: &[Option<f64>],
    k: f64,
    n: f64,
    triples: &[(usize, usize, usize)],
) -> Result<ConvexityReport> {
    if !(n < 0.0) {
        return Err(Error::DomainError(format!("N = {n} must be negative")));
    }
    check_samples(xs, psi)?;
    let dmax = max_distance(k, n);
    let f = |i: usize| psi[i].map_or(0.0, |v| (-v / n).exp());
    let mut report = ConvexityReport { k, n, triples: triples.len(), min_margin: f64::INFINITY, worst: (0.0, 0.0, 0.0) };
    for &(i, m, j) in triples {
        if !(i < m && m < j && j < xs.len()) {
            return Err(Error::InvalidParams(format!("triple ({i}, {m}, {j}) is not ordered")));
        }
        let d = xs[j] - xs[i];
        if d >= dmax {
            return Err(Error::DomainError(format!("distance {d} ≥ π√(N/K) = {dmax}")));
        }
        let t = (xs[m] - xs[i]) / d;
        let kappa = k / n;
        let a = sigma_kappa(kappa, 1.0 - t, d)?.to_f64();
        let b = sigma_kappa(kappa, t, d)?.to_f64();
        let (fi, fj) = (f(i), f(j));
        let rhs = if fi == 0.0 { 0.0 } else { a * fi } + if fj == 0.0 { 0.0 } else { b * fj };
        let lhs = f(m);
        let margin = (rhs - lhs) / lhs.max(rhs).max(1.0);
        if margin < report.min_margin {
            report.min_margin = margin;
            report.worst = (xs[i], xs[j], t);
        }
    }
    Ok(report)
}
