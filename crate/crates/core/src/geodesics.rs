//! Displacement interpolation on ℝ through the monotone rearrangement.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::extended::Finite;
use crate::measure::{DensityWrtM, DiscreteMeasure};
use crate::mmspace::{Grid1D, PointedSpace1D};
use crate::transport::Coupling;

/// One piece of the quantile matching: `mass` of source cell `src` sent to
/// target cell `tgt`, spreading `[x0, x1]` affinely onto `[y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub src: usize,
    pub tgt: usize,
    pub mass: f64,
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Segment {
    /// Secant slope `T′`.
    pub fn slope(&self) -> f64 {
        (self.y1 - self.y0) / (self.x1 - self.x0)
    }

    /// Image interval of `T_t = (1 − t)id + tT`.
    #[inline]
    pub fn at(&self, t: f64) -> (f64, f64) {
        ((1.0 - t) * self.x0 + t * self.y0, (1.0 - t) * self.x1 + t * self.y1)
    }
}

/// Nondecreasing transport map between two normalized grid measures, with
/// each cell's mass spread uniformly over the cell.
#[derive(Debug, Clone)]
pub struct MonotoneMap {
    src_grid: Arc<Grid1D>,
    tgt_grid: Arc<Grid1D>,
    segments: Vec<Segment>,
}

impl MonotoneMap {
    pub fn new(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<MonotoneMap> {
        let (ta, tb) = (mu.total(), nu.total());
        if (ta - tb).abs() > 1e-12 * ta.max(tb).max(1.0) {
            return Err(Error::UnbalancedMasses(ta, tb));
        }
        let (ga, gb) = (mu.grid().clone(), nu.grid().clone());
        let a: Vec<f64> = mu.masses().iter().map(|m| m / ta).collect();
        let b: Vec<f64> = nu.masses().iter().map(|m| m / tb).collect();
        let sa: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0.0).collect();
        let sb: Vec<usize> = (0..b.len()).filter(|&j| b[j] > 0.0).collect();
        let mut segments = Vec::with_capacity(sa.len() + sb.len());
        let (mut p, mut q) = (0, 0);
        let (mut used_a, mut used_b) = (0.0, 0.0);
        while p < sa.len() && q < sb.len() {
            let (i, j) = (sa[p], sb[q]);
            let (rem_a, rem_b) = (a[i] - used_a, b[j] - used_b);
            let step = rem_a.min(rem_b);
            let pos = |g: &Grid1D, cell: usize, used: f64, total: f64| {
                g.left(cell) + (used / total).clamp(0.0, 1.0) * g.width(cell)
            };
            segments.push(Segment {
                src: i,
                tgt: j,
                mass: step,
                x0: pos(&ga, i, used_a, a[i]),
                x1: if rem_a <= rem_b { ga.right(i) } else { pos(&ga, i, used_a + step, a[i]) },
                y0: pos(&gb, j, used_b, b[j]),
                y1: if rem_b <= rem_a { gb.right(j) } else { pos(&gb, j, used_b + step, b[j]) },
            });
            if rem_a <= rem_b {
                p += 1;
                used_a = 0.0;
                used_b += step;
                if rem_a == rem_b {
                    q += 1;
                    used_b = 0.0;
                }
            } else {
                q += 1;
                used_b = 0.0;
                used_a += step;
            }
        }
        segments.retain(|s| s.mass > 0.0);
        Ok(MonotoneMap { src_grid: ga, tgt_grid: gb, segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn source_grid(&self) -> &Arc<Grid1D> {
        &self.src_grid
    }

    pub fn target_grid(&self) -> &Arc<Grid1D> {
        &self.tgt_grid
    }

    /// `Σ mass·(c_src − c_tgt)²` with atoms at cell centers (equals the LP optimum).
    pub fn atomic_cost(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.mass * (self.src_grid.center(s.src) - self.tgt_grid.center(s.tgt)).powi(2))
            .sum()
    }

    /// Exact `W₂²` between the cell-wise uniform spreads.
    pub fn spread_cost(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| {
                let (d0, d1) = (s.y0 - s.x0, s.y1 - s.x1);
                s.mass * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0
            })
            .sum()
    }

    /// The plan `(id, T)_♯μ` at cell resolution.
    pub fn coupling(&self) -> Coupling {
        let e = self.segments.iter().map(|s| (s.src, s.tgt, s.mass)).collect();
        Coupling::new(self.src_grid.len(), self.tgt_grid.len(), e).expect("segments index their grids")
    }

    /// `(T_t)_♯μ` binned on `out` by exact overlap.
    pub fn push_forward(&self, t: f64, out: &Grid1D) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::DomainError(format!("t = {t} outside [0, 1]")));
        }
        let mut masses = vec![0.0; out.len()];
        let tol = 1e-12 * (out.hi() - out.lo());
        let mut lost = 0.0;
        for s in &self.segments {
            let (z0, z1) = s.at(t);
            if z0 < out.lo() - tol || z1 > out.hi() + tol {
                lost += s.mass;
                continue;
            }
            let (z0, z1) = (z0.max(out.lo()), z1.min(out.hi()));
            let mut k = out.locate(z0).expect("inside");
            if z1 - z0 <= 0.0 {
                masses[k] += s.mass;
                continue;
            }
            let inv = s.mass / (z1 - z0);
            loop {
                let ov = out.right(k).min(z1) - out.left(k).max(z0);
                if ov > 0.0 {
                    masses[k] += ov * inv;
                }
                if out.right(k) >= z1 || k + 1 == out.len() {
                    break;
                }
                k += 1;
            }
        }
        if lost > 1e-12 {
            return Err(Error::GridTooCoarse(format!("mass {lost:e} lands outside [{}, {}]", out.lo(), out.hi())));
        }
        Ok(masses)
    }
}

/// `μ_t` with its density relative to the output space.
#[derive(Debug, Clone)]
pub struct GeodesicSlice {
    pub t: f64,
    pub measure: DiscreteMeasure,
    pub density_wrt_m: DensityWrtM,
    /// Mass landing on cells where `𝔪` is infinite or zero (left out of `ρ`).
    pub singular_zone_mass: f64,
}

pub fn slice_from_masses(t: f64, masses: Vec<f64>, out: &PointedSpace1D) -> Result<GeodesicSlice> {
    let mut rho = vec![0.0; masses.len()];
    let mut singular_zone_mass = 0.0;
    for (i, &m) in masses.iter().enumerate() {
        match out.cell_mass(i) {
            Finite(w) if w > 0.0 => rho[i] = m / w,
            _ => singular_zone_mass += m,
        }
    }
    let reference = (0..masses.len()).map(|i| out.cell_mass(i)).collect();
    let density_wrt_m = DensityWrtM::new(out.grid().clone(), rho, reference)?;
    let measure = DiscreteMeasure::new(out.grid().clone(), masses)?;
    Ok(GeodesicSlice { t, measure, density_wrt_m, singular_zone_mass })
}

/// `μ_t = (T_t)_♯μ₀` on the grid of `out` (usually a refinement of the input space).
pub fn displacement_interpolate(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    t: f64,
    out: &PointedSpace1D,
) -> Result<GeodesicSlice> {
    let map = MonotoneMap::new(mu0, mu1)?;
    interpolate_with_map(&map, t, out)
}

pub fn interpolate_with_map(map: &MonotoneMap, t: f64, out: &PointedSpace1D) -> Result<GeodesicSlice> {
    let masses = map.push_forward(t, out.grid())?;
    slice_from_masses(t, masses, out)
}

/// `ρ_t(T_t x) = V(x)ρ₀(x) / (V(T_t x)·(1 + t(T′(x) − 1)))` at the centers of `out`.
pub fn jacobi_density(
    mu0: &DiscreteMeasure,
    space: &PointedSpace1D,
    map: &MonotoneMap,
    t: f64,
    out: &PointedSpace1D,
) -> Result<DensityWrtM> {
    if !mu0.grid().same_as(space.grid()) || !map.source_grid().same_as(space.grid()) {
        return Err(Error::GridMismatch);
    }
    let total = mu0.total();
    let segs = map.segments();
    let og = out.grid();
    let mut rho = vec![0.0; og.len()];
    for (k, r) in rho.iter_mut().enumerate() {
        let v = match out.density()[k] {
            Finite(v) if v > 0.0 => v,
            _ => continue,
        };
        let z = og.center(k);
        let idx = segs.partition_point(|s| s.at(t).1 < z);
        let Some(s) = segs.get(idx) else { continue };
        let (z0, z1) = s.at(t);
        if z < z0 || z > z1 {
            continue;
        }
        let jac = 1.0 + t * (s.slope() - 1.0);
        if !(jac > 0.0) {
            return Err(Error::DegenerateJacobian(idx));
        }
        // V(x)ρ₀(x) is the Lebesgue density of μ₀ on the source cell.
        let leb = mu0.masses()[s.src] / total / space.grid().width(s.src);
        *r = leb / (jac * v);
    }
    DensityWrtM::new(og.clone(), rho, (0..og.len()).map(|i| out.cell_mass(i)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{BlockBase, MeasureSpec};

    fn lebesgue(a: f64, b: f64, n: usize) -> PointedSpace1D {
        let g = Arc::new(Grid1D::uniform(a, b, n).unwrap());
        PointedSpace1D::new(g, vec![Finite(1.0); n], vec![], 0.5 * (a + b), 0).unwrap()
    }

    fn block(s: &PointedSpace1D, lo: f64, hi: f64) -> DiscreteMeasure {
        MeasureSpec::UniformBlock { lo, hi, base: BlockBase::Lebesgue }.discretize(s).unwrap()
    }

    #[test]
    fn endpoints_reproduce_marginals() {
        let s = lebesgue(0.0, 4.0, 64);
        let (m0, m1) = (block(&s, 0.5, 1.5), block(&s, 2.0, 3.75));
        let out = s.refined(4);
        let map = MonotoneMap::new(&m0, &m1).unwrap();
        for (t, m) in [(0.0, &m0), (1.0, &m1)] {
            let b = map.push_forward(t, out.grid()).unwrap();
            for i in 0..s.len() {
                let coarse: f64 = b[4 * i..4 * i + 4].iter().sum();
                assert!((coarse - m.masses()[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn translation_midpoint() {
        let s = lebesgue(0.0, 3.0, 48);
        let (m0, m1) = (block(&s, 0.0, 1.0), block(&s, 2.0, 3.0));
        let sl = displacement_interpolate(&m0, &m1, 0.5, &s).unwrap();
        for i in 0..48 {
            let c = s.grid().center(i);
            let want = if (1.0..2.0).contains(&c) { 1.0 / 16.0 } else { 0.0 };
            assert!((sl.measure.masses()[i] - want).abs() < 1e-12, "{i}");
        }
        let (cost, _) = crate::transport::w2_quantile_1d(&m0, &m1).unwrap();
        assert!((cost - 4.0).abs() < 1e-12);
    }

    #[test]
    fn identity_map_keeps_density() {
        let s = lebesgue(0.0, 1.0, 32);
        let m = MeasureSpec::Bump { lo: 0.1, peak: 0.3, hi: 0.9 }.discretize(&s).unwrap();
        let map = MonotoneMap::new(&m, &m).unwrap();
        assert_eq!(map.atomic_cost(), 0.0);
        let out = s.refined(2);
        let j = jacobi_density(&m, &s, &map, 0.6, &out).unwrap();
        for k in 0..out.len() {
            let parent = k / 2;
            assert!((j.rho()[k] - m.masses()[parent] / s.grid().width(parent)).abs() < 1e-9);
        }
    }

    #[test]
    fn translated_density_on_lebesgue() {
        let s = lebesgue(0.0, 4.0, 64);
        let m0 = MeasureSpec::Bump { lo: 0.25, peak: 0.75, hi: 1.5 }.discretize(&s).unwrap();
        let h = 2.0;
        let shifted: Vec<f64> = (0..64).map(|i| if i >= 32 { m0.masses()[i - 32] } else { 0.0 }).collect();
        let m1 = DiscreteMeasure::new(s.grid().clone(), shifted).unwrap();
        let map = MonotoneMap::new(&m0, &m1).unwrap();
        let t = 0.25;
        let j = jacobi_density(&m0, &s, &map, t, &s).unwrap();
        for k in 0..64 {
            let src = k as isize - 8; // t·h = 0.5 = 8 cells
            let want = if src >= 0 { m0.masses()[src as usize] / s.grid().width(0) } else { 0.0 };
            assert!((j.rho()[k] - want).abs() < 1e-9 * want.max(1.0), "{k}");
        }
        let _ = h;
    }

    #[test]
    fn out_of_range_is_too_coarse() {
        let s = lebesgue(0.0, 4.0, 16);
        let narrow = lebesgue(0.0, 2.0, 16);
        let (m0, m1) = (block(&s, 0.0, 1.0), block(&s, 3.0, 4.0));
        assert!(matches!(displacement_interpolate(&m0, &m1, 0.9, &narrow), Err(Error::GridMismatch) | Err(Error::GridTooCoarse(_))));
    }
}
