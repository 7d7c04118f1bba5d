//! Distortion coefficients `σ` and `τ` for negative dimension.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::extended::{ExtendedReal, Finite, PositiveInfinity};

/// Band around `κθ² = π²` that is treated as the closed `∞` branch.
pub const THRESHOLD_BAND: f64 = 1e-12;

fn check_t_theta(t: f64, theta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::DomainError(format!("t = {t} outside [0, 1]")));
    }
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::DomainError(format!("theta = {theta} must be finite and >= 0")));
    }
    Ok(())
}

fn check_n(n: f64) -> Result<()> {
    if !(n < 0.0) {
        return Err(Error::DomainError(format!("N = {n} must be negative")));
    }
    Ok(())
}

/// `ln σ_κ^{(t)}(θ)` without argument checks; `+∞` encodes the infinite branch.
#[inline]
pub(crate) fn ln_sigma_unchecked(kappa: f64, t: f64, theta: f64) -> f64 {
    let x = kappa * theta * theta;
    if x >= PI * PI - THRESHOLD_BAND {
        return f64::INFINITY;
    }
    if x == 0.0 {
        return t.ln();
    }
    if t == 0.0 {
        return f64::NEG_INFINITY;
    }
    if x > 0.0 {
        let s = theta * kappa.sqrt();
        ((t * s).sin() / s.sin()).ln()
    } else {
        // sinh(ts)/sinh(s) = e^{(t-1)s} (1 - e^{-2ts}) / (1 - e^{-2s})
        let s = theta * (-kappa).sqrt();
        (t - 1.0) * s + ((-2.0 * t * s).exp_m1() / (-2.0 * s).exp_m1()).ln()
    }
}

#[inline]
fn sigma_unchecked(kappa: f64, t: f64, theta: f64) -> ExtendedReal {
    let x = kappa * theta * theta;
    if x >= PI * PI - THRESHOLD_BAND {
        return PositiveInfinity;
    }
    if x == 0.0 || t == 1.0 {
        return Finite(t);
    }
    if x > 0.0 {
        let s = theta * kappa.sqrt();
        Finite((t * s).sin() / s.sin())
    } else {
        let s = theta * (-kappa).sqrt();
        Finite(((t - 1.0) * s).exp() * ((-2.0 * t * s).exp_m1() / (-2.0 * s).exp_m1()))
    }
}

/// `σ_κ^{(t)}(θ)`.
pub fn sigma_kappa(kappa: f64, t: f64, theta: f64) -> Result<ExtendedReal> {
    check_t_theta(t, theta)?;
    if !kappa.is_finite() {
        return Err(Error::DomainError(format!("kappa = {kappa} must be finite")));
    }
    Ok(sigma_unchecked(kappa, t, theta))
}

/// `σ_{K,N}^{(t)}(θ) = σ_{K/N}^{(t)}(θ)`, with the infinite branch tested as `Kθ² ≤ Nπ²`.
pub fn sigma_kn(k: f64, n: f64, t: f64, theta: f64) -> Result<ExtendedReal> {
    check_n(n)?;
    check_t_theta(t, theta)?;
    if k * theta * theta <= n * PI * PI + THRESHOLD_BAND * n.abs() {
        return Ok(PositiveInfinity);
    }
    sigma_kappa(k / n, t, theta)
}

/// `τ_{K,N}^{(t)}(θ) = t^{1/N} σ_{K/(N-1)}^{(t)}(θ)^{(N-1)/N}`.
///
/// At `t = 0` with a finite `σ` the `t → 0⁺` limit `0` is returned.
pub fn tau_kn(k: f64, n: f64, t: f64, theta: f64) -> Result<ExtendedReal> {
    check_n(n)?;
    check_t_theta(t, theta)?;
    let kappa = k / (n - 1.0);
    match sigma_unchecked(kappa, t, theta) {
        PositiveInfinity => Ok(PositiveInfinity),
        Finite(_) if t == 0.0 => Ok(Finite(0.0)),
        Finite(s) => {
            let e = (n - 1.0) / n;
            Ok(ExtendedReal::from_f64(t * (s / t).powf(e)))
        }
    }
}

/// Precomputed log-domain evaluator of `τ_{K,N}` for hot loops.
#[derive(Debug, Clone, Copy)]
pub struct LnTau {
    kappa: f64,
    exponent: f64,
    flat: bool,
}

impl LnTau {
    pub fn new(k: f64, n: f64) -> Result<LnTau> {
        check_n(n)?;
        Ok(LnTau { kappa: k / (n - 1.0), exponent: (n - 1.0) / n, flat: k == 0.0 })
    }

    /// `ln τ^{(t)}(θ)`; `+∞` for the infinite branch, `-∞` at `t = 0`.
    #[inline]
    pub fn eval(&self, t: f64, theta: f64) -> f64 {
        if t == 0.0 {
            let x = self.kappa * theta * theta;
            return if x >= PI * PI - THRESHOLD_BAND { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        let lt = t.ln();
        if self.flat || theta == 0.0 {
            return lt;
        }
        let ls = ln_sigma_unchecked(self.kappa, t, theta);
        if ls == f64::INFINITY {
            return f64::INFINITY;
        }
        lt + self.exponent * (ls - lt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_theta_gives_t() {
        for &kappa in &[-3.0, 0.0, 2.0] {
            for &t in &[0.0, 0.3, 1.0] {
                assert_eq!(sigma_kappa(kappa, t, 0.0).unwrap(), Finite(t));
            }
        }
    }

    #[test]
    fn threshold_is_infinite() {
        let theta = 1.7;
        let kappa = PI * PI / (theta * theta);
        assert_eq!(sigma_kappa(kappa, 0.4, theta).unwrap(), PositiveInfinity);
        assert!(sigma_kappa(kappa * (1.0 - 1e-9), 0.4, theta).unwrap().is_finite());
    }

    #[test]
    fn t_one_is_one() {
        for &kappa in &[-5.0, -0.1, 0.5, 2.0] {
            let v = sigma_kappa(kappa, 1.0, 1.0).unwrap().finite().unwrap();
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sigma_kn_branches() {
        assert_eq!(sigma_kn(0.0, -2.0, 0.3, 5.0).unwrap(), Finite(0.3));
        let v = sigma_kn(1.0, -2.0, 0.3, 2.0).unwrap().finite().unwrap();
        assert!(v > 0.0 && v < 1.0);
        let (k, n): (f64, f64) = (-2.0, -3.0);
        let theta_star = PI * (n / k).sqrt();
        assert_eq!(sigma_kn(k, n, 0.5, theta_star * 1.01).unwrap(), PositiveInfinity);
        assert!(sigma_kn(k, n, 0.5, theta_star * 0.99).unwrap().is_finite());
    }

    #[test]
    fn domain_errors() {
        assert!(sigma_kappa(1.0, 1.5, 1.0).is_err());
        assert!(sigma_kappa(1.0, 0.5, -1.0).is_err());
        assert!(sigma_kn(1.0, 0.0, 0.5, 1.0).is_err());
        assert!(tau_kn(1.0, 2.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn tau_identities() {
        assert_eq!(tau_kn(1.3, -2.0, 1.0, 0.7).unwrap(), Finite(1.0));
        let v = tau_kn(0.0, -2.0, 0.37, 3.0).unwrap().finite().unwrap();
        assert!((v - 0.37).abs() < 1e-15);
        let v = tau_kn(-1.0, -2.0, 0.37, 0.0).unwrap().finite().unwrap();
        assert!((v - 0.37).abs() < 1e-15);
        assert_eq!(tau_kn(1.0, -2.0, 0.0, 1.0).unwrap(), Finite(0.0));
    }

    #[test]
    fn tau_decreases_with_k() {
        // kappa = K/(N-1) falls as K grows because N - 1 < 0.
        let a = tau_kn(0.0, -1.0, 0.5, 1.0).unwrap().finite().unwrap();
        let b = tau_kn(1.0, -1.0, 0.5, 1.0).unwrap().finite().unwrap();
        assert!(b < a);
        assert!((b - 0.442_362_032_740_426).abs() < 1e-14, "{b}");
    }

    #[test]
    fn ln_tau_matches_direct() {
        for &(k, n) in &[(1.0, -2.0), (-2.0, -1.5), (0.0, -0.5), (3.0, -0.01)] {
            let lt = LnTau::new(k, n).unwrap();
            for &t in &[0.1, 0.5, 0.9] {
                for &th in &[0.0, 0.3, 1.2] {
                    let direct = tau_kn(k, n, t, th).unwrap();
                    let l = lt.eval(t, th);
                    match direct {
                        Finite(v) => assert!((l.exp() - v).abs() <= 1e-12 * v, "{k} {n} {t} {th}"),
                        PositiveInfinity => assert_eq!(l, f64::INFINITY),
                    }
                }
            }
        }
    }

    #[test]
    fn sinh_branch_survives_large_arguments() {
        let v = sigma_kappa(-1.0, 0.5, 2000.0).unwrap().finite().unwrap();
        assert!(v > 0.0 && v < 1e-300 || v == 0.0);
        let l = ln_sigma_unchecked(-1.0, 0.5, 2000.0);
        assert!((l + 1000.0).abs() < 1e-9);
    }
}
