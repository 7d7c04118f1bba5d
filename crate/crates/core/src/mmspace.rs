//! Discretized pointed metric measure spaces on intervals of ℝ.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended::{ExtendedReal, Finite, PositiveInfinity};
use crate::measure::DiscreteMeasure;
use crate::quad;

/// Cell partition of a compact interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    edges: Vec<f64>,
}

impl Grid1D {
    pub fn new(edges: Vec<f64>) -> Result<Grid1D> {
        if edges.len() < 3 {
            return Err(Error::InvalidGrid(format!("need at least 2 cells, got {}", edges.len().saturating_sub(1))));
        }
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidGrid("non-finite edge".into()));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("edges must be strictly increasing".into()));
        }
        Ok(Grid1D { edges })
    }

    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Grid1D> {
        Grid1D::piecewise_uniform(&[a, b], n)
    }

    /// Uniform on each piece between consecutive `breaks`; cells are shared out
    /// in proportion to piece length and every break is an edge.
    pub fn piecewise_uniform(breaks: &[f64], n: usize) -> Result<Grid1D> {
        if breaks.len() < 2 || breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("breakpoints must be strictly increasing".into()));
        }
        let lens: Vec<f64> = breaks.windows(2).map(|w| w[1] - w[0]).collect();
        if n < lens.len().max(2) {
            return Err(Error::InvalidGrid(format!("{n} cells cannot cover {} pieces", lens.len())));
        }
        let counts = allocate(n, &lens);
        let mut edges = Vec::with_capacity(n + 1);
        edges.push(breaks[0]);
        for (p, &c) in counts.iter().enumerate() {
            let (lo, hi) = (breaks[p], breaks[p + 1]);
            for i in 1..c {
                edges.push(lo + (hi - lo) * i as f64 / c as f64);
            }
            edges.push(hi);
        }
        Grid1D::new(edges)
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn lo(&self) -> f64 {
        self.edges[0]
    }

    pub fn hi(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    pub fn left(&self, i: usize) -> f64 {
        self.edges[i]
    }

    pub fn right(&self, i: usize) -> f64 {
        self.edges[i + 1]
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.edges[i] + self.edges[i + 1])
    }

    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.center(i)).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.width(i)).collect()
    }

    pub fn min_width(&self) -> f64 {
        self.edges.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Cell containing `x`; interior edges belong to the cell on their right.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo() && x <= self.hi()) {
            return None;
        }
        let k = self.edges.partition_point(|&e| e <= x);
        Some(k.saturating_sub(1).min(self.len() - 1))
    }

    /// Index of an edge within `tol` of `x`.
    pub fn edge_index(&self, x: f64, tol: f64) -> Option<usize> {
        let k = self.edges.partition_point(|&e| e < x);
        [k.wrapping_sub(1), k]
            .into_iter()
            .filter(|&j| j < self.edges.len())
            .find(|&j| (self.edges[j] - x).abs() <= tol)
    }

    /// Splits every cell into `factor` equal subcells.
    pub fn refine(&self, factor: usize) -> Grid1D {
        let factor = factor.max(1);
        let mut edges = Vec::with_capacity(self.len() * factor + 1);
        for i in 0..self.len() {
            let (a, w) = (self.edges[i], self.width(i));
            for s in 0..factor {
                edges.push(a + w * s as f64 / factor as f64);
            }
        }
        edges.push(self.hi());
        Grid1D { edges }
    }

    /// True when both grids have the same edges (pointer equality short-circuits).
    pub fn same_as(&self, other: &Grid1D) -> bool {
        std::ptr::eq(self, other) || self.edges == other.edges
    }
}

// Halving-consistent allocation keeps grids of size n and 2n nested.
fn allocate(n: usize, lens: &[f64]) -> Vec<usize> {
    if lens.len() == 1 {
        return vec![n];
    }
    if n.is_multiple_of(2) && n / 2 >= 4 * lens.len() {
        return allocate(n / 2, lens).into_iter().map(|c| 2 * c).collect();
    }
    let total: f64 = lens.iter().sum();
    let spare = n - lens.len();
    let raw: Vec<f64> = lens.iter().map(|l| spare as f64 * l / total).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| 1 + r.floor() as usize).collect();
    let mut rest = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..lens.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    for &p in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        counts[p] += 1;
        rest -= 1;
    }
    counts
}

/// `f_cut(x) = min(1, max(0, 2 − x))`.
#[inline]
pub fn f_cut(x: f64) -> f64 {
    (2.0 - x).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    CoshN,
    SinhN,
    PowerN,
    CosN,
    GluedCosN,
    GluedPowerN,
    GluedSinhN,
    Cauchy,
    CustomPsi,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(rename = "K", default)]
    pub k: f64,
    #[serde(rename = "N", default)]
    pub n: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub j: Option<u32>,
    /// Displacement of the interior gluing points of `glued_cos_n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
}

/// Descriptor of a model space; also the JSON schema read by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub params: ModelParams,
    pub domain: [f64; 2],
    pub grid_n: usize,
    pub base_point: f64,
    #[serde(default)]
    pub regularity_k: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_radius: Option<f64>,
    /// Per-cell `ψ` for `custom_psi`; `null` stands for `ψ = −∞`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_samples: Option<Vec<Option<f64>>>,
    /// Declared singular set for `custom_psi`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singular_points: Option<Vec<f64>>,
}

impl ModelSpec {
    pub fn from_json(s: &str) -> Result<ModelSpec> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn with_grid_n(&self, n: usize) -> ModelSpec {
        ModelSpec { grid_n: n, ..self.clone() }
    }

    /// The `(K, N)` pair the model is expected to satisfy, if any.
    pub fn claimed_cd(&self) -> Option<(f64, f64)> {
        let p = &self.params;
        match self.kind {
            ModelKind::CoshN | ModelKind::SinhN | ModelKind::CosN | ModelKind::GluedCosN | ModelKind::GluedSinhN => {
                Some((p.k, p.n + 1.0))
            }
            ModelKind::PowerN | ModelKind::GluedPowerN => Some((0.0, p.n + 1.0)),
            ModelKind::Cauchy => p.alpha.map(|a| (0.0, -a)),
            ModelKind::CustomPsi => None,
        }
    }
}

/// Closed-form reference density of a model.
#[derive(Debug, Clone)]
pub struct AnalyticDensity {
    kind: ModelKind,
    n: f64,
    scale: f64,
    cauchy: (f64, f64),
    glue: Vec<f64>,
}

impl AnalyticDensity {
    fn new(spec: &ModelSpec) -> Result<AnalyticDensity> {
        let p = &spec.params;
        let bad = |m: &str| Err(Error::InvalidParams(format!("{:?}: {m}", spec.kind)));
        let need_n = |n: f64| n < -1.0 && n.is_finite();
        let mut out = AnalyticDensity { kind: spec.kind, n: p.n, scale: 1.0, cauchy: (0.0, 0.0), glue: vec![] };
        match spec.kind {
            ModelKind::CoshN | ModelKind::SinhN | ModelKind::GluedSinhN => {
                if !(p.k > 0.0) || !need_n(p.n) {
                    return bad("requires K > 0 and N < -1");
                }
                out.scale = (-p.k / p.n).sqrt();
            }
            ModelKind::PowerN | ModelKind::GluedPowerN => {
                if !need_n(p.n) {
                    return bad("requires N < -1");
                }
            }
            ModelKind::CosN | ModelKind::GluedCosN => {
                if !(p.k < 0.0) || !need_n(p.n) {
                    return bad("requires K < 0 and N < -1");
                }
                out.scale = (p.k / p.n).sqrt();
                if spec.kind == ModelKind::GluedCosN {
                    let j = match p.j {
                        Some(j) if j >= 1 => j,
                        _ => return bad("requires J >= 1"),
                    };
                    let s = out.scale;
                    let shift = p.shift.unwrap_or(0.0);
                    if !(shift.abs() < PI / (2.0 * s)) {
                        return bad("|shift| must stay below half a piece");
                    }
                    out.glue = (1..=j + 1)
                        .map(|i| {
                            let g = (2 * i - 1) as f64 * PI / (2.0 * s);
                            if i == 1 || i == j + 1 { g } else { g + shift }
                        })
                        .collect();
                }
            }
            ModelKind::Cauchy => {
                let a = match p.alpha {
                    Some(a) if a > 0.0 && a.is_finite() => a,
                    _ => return bad("requires alpha > 0"),
                };
                let e = -(1.0 + a) / 2.0;
                let f = |x: f64| (1.0 + x * x).powf(e);
                let z = quad::integrate_from_neg_inf(f, 0.0, 1e-14) + quad::integrate_to_inf(f, 0.0, 1e-14);
                out.cauchy = (1.0 / z, e);
            }
            ModelKind::CustomPsi => return Err(Error::NotRefinable),
        }
        Ok(out)
    }

    /// Maximal domain of the closed form.
    pub fn natural_domain(&self) -> (f64, f64) {
        match self.kind {
            ModelKind::SinhN | ModelKind::PowerN => (0.0, f64::INFINITY),
            ModelKind::CosN => (-PI / (2.0 * self.scale), PI / (2.0 * self.scale)),
            ModelKind::GluedCosN => (self.glue[0], self.glue[self.glue.len() - 1]),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Points of the natural domain where the density is not locally integrable.
    pub fn singular_points(&self) -> Vec<f64> {
        match self.kind {
            ModelKind::SinhN | ModelKind::PowerN | ModelKind::GluedPowerN | ModelKind::GluedSinhN => vec![0.0],
            ModelKind::CosN => {
                let (a, b) = self.natural_domain();
                vec![a, b]
            }
            ModelKind::GluedCosN => self.glue.clone(),
            _ => vec![],
        }
    }

    /// Lebesgue density `e^{−ψ(x)}`.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.n;
        match self.kind {
            ModelKind::CoshN => (x * self.scale).cosh().powf(n),
            ModelKind::SinhN | ModelKind::GluedSinhN => (x * self.scale).sinh().abs().powf(n),
            ModelKind::PowerN | ModelKind::GluedPowerN => x.abs().powf(n),
            ModelKind::CosN => (x * self.scale).cos().max(0.0).powf(n),
            ModelKind::GluedCosN => {
                let p = self.glue.partition_point(|&g| g <= x).clamp(1, self.glue.len() - 1);
                let (lo, hi) = (self.glue[p - 1], self.glue[p]);
                let u = PI * (x - 0.5 * (lo + hi)) / (hi - lo);
                u.cos().max(0.0).powf(n)
            }
            ModelKind::Cauchy => self.cauchy.0 * (1.0 + x * x).powf(self.cauchy.1),
            ModelKind::CustomPsi => f64::NAN,
        }
    }
}

/// A discretized pointed generalized metric measure space.
#[derive(Debug, Clone)]
pub struct PointedSpace1D {
    grid: Arc<Grid1D>,
    density: Vec<ExtendedReal>,
    singular_points: Vec<f64>,
    singular_cell: Vec<bool>,
    base_point: f64,
    regularity_k: i32,
    domain_truncation: bool,
    truncated_tail_mass: Option<f64>,
    analytic: Option<Arc<AnalyticDensity>>,
    spec: Option<ModelSpec>,
}

impl PointedSpace1D {
    /// Assembles a space from a per-cell Lebesgue density; infinite values are
    /// allowed only on cells touching a singular point.
    pub fn new(
        grid: Arc<Grid1D>,
        density: Vec<ExtendedReal>,
        mut singular_points: Vec<f64>,
        base_point: f64,
        regularity_k: i32,
    ) -> Result<PointedSpace1D> {
        if density.len() != grid.len() {
            return Err(Error::InvalidParams(format!("{} density values for {} cells", density.len(), grid.len())));
        }
        if density.iter().any(|d| matches!(d, Finite(v) if !(*v >= 0.0) || !v.is_finite())) {
            return Err(Error::InvalidParams("density must be nonnegative".into()));
        }
        singular_points.sort_by(f64::total_cmp);
        singular_points.dedup();
        let tol = 1e-12 * (grid.hi() - grid.lo());
        let mut singular_cell = vec![false; grid.len()];
        for x in singular_points.iter_mut() {
            let e = grid.edge_index(*x, tol).ok_or(Error::SingularPointOffGrid(*x))?;
            *x = grid.edges()[e];
            if e > 0 {
                singular_cell[e - 1] = true;
            }
            if e < grid.len() {
                singular_cell[e] = true;
            }
        }
        if let Some(i) = (0..grid.len()).find(|&i| density[i].is_infinite() && !singular_cell[i]) {
            return Err(Error::InvalidParams(format!("infinite density on cell {i} away from the singular set")));
        }
        let space = PointedSpace1D {
            grid,
            density,
            singular_points,
            singular_cell,
            base_point,
            regularity_k,
            domain_truncation: false,
            truncated_tail_mass: None,
            analytic: None,
            spec: None,
        };
        space.validate_base()?;
        Ok(space)
    }

    fn validate_base(&self) -> Result<()> {
        let p = self.base_point;
        let cell = self
            .grid
            .locate(p)
            .ok_or_else(|| Error::InvalidParams(format!("base point {p} outside the domain")))?;
        if self.singular_points.contains(&p) {
            return Err(Error::InvalidParams(format!("base point {p} is singular")));
        }
        if !(self.density[cell] > Finite(0.0)) {
            return Err(Error::InvalidParams(format!("base point {p} outside the support")));
        }
        if self.regularity_k < 0 {
            return Err(Error::InvalidParams("regularity_k must be >= 0".into()));
        }
        match k_cut(self, self.regularity_k) {
            Ok(_) => Ok(()),
            Err(e) => Err(e),
        }
    }

    pub fn grid(&self) -> &Arc<Grid1D> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn density(&self) -> &[ExtendedReal] {
        &self.density
    }

    pub fn singular_points(&self) -> &[f64] {
        &self.singular_points
    }

    /// Cells having a singular point as an edge.
    pub fn is_singular_cell(&self, i: usize) -> bool {
        self.singular_cell[i]
    }

    pub fn base_point(&self) -> f64 {
        self.base_point
    }

    pub fn regularity_k(&self) -> i32 {
        self.regularity_k
    }

    pub fn domain_truncation(&self) -> bool {
        self.domain_truncation
    }

    /// Mass of the analytic measure beyond a truncated unbounded end.
    pub fn truncated_tail_mass(&self) -> Option<f64> {
        self.truncated_tail_mass
    }

    pub fn spec(&self) -> Option<&ModelSpec> {
        self.spec.as_ref()
    }

    pub fn analytic(&self) -> Option<&AnalyticDensity> {
        self.analytic.as_deref()
    }

    /// `𝔪(cell i)`.
    pub fn cell_mass(&self, i: usize) -> ExtendedReal {
        self.density[i] * self.grid.width(i)
    }

    /// Cell masses with `f64::INFINITY` standing for `+∞`.
    pub fn cell_masses(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.cell_mass(i).to_f64()).collect()
    }

    /// Distance from `x` to the singular set (`+∞` when it is empty).
    pub fn dist_to_singular(&self, x: f64) -> f64 {
        let s = &self.singular_points;
        let k = s.partition_point(|&v| v < x);
        let mut d = f64::INFINITY;
        if k < s.len() {
            d = d.min(s[k] - x);
        }
        if k > 0 {
            d = d.min(x - s[k - 1]);
        }
        d
    }

    /// Same space with `𝔪` replaced by `c·𝔪`.
    pub fn scaled(&self, c: f64) -> Result<PointedSpace1D> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParams(format!("scale {c} must be positive")));
        }
        let mut out = self.clone();
        out.density = self.density.iter().map(|&d| d * c).collect();
        out.truncated_tail_mass = self.truncated_tail_mass.map(|t| t * c);
        Ok(out)
    }

    /// Same space with another base point.
    pub fn with_base_point(&self, p: f64) -> Result<PointedSpace1D> {
        let mut out = self.clone();
        out.base_point = p;
        out.validate_base()?;
        Ok(out)
    }

    /// Each cell split in `factor` subcells that inherit the parent density.
    pub fn refined(&self, factor: usize) -> PointedSpace1D {
        let factor = factor.max(1);
        let grid = Arc::new(self.grid.refine(factor));
        let density = self.density.iter().flat_map(|&d| std::iter::repeat_n(d, factor)).collect();
        let singular_cell = self.singular_cell.iter().flat_map(|&s| std::iter::repeat_n(s, factor)).collect();
        PointedSpace1D { grid, density, singular_cell, ..self.clone() }
    }
}

/// Builds a model space with midpoint-sampled density.
pub fn build_model_space(spec: &ModelSpec) -> Result<PointedSpace1D> {
    let [mut a, mut b] = spec.domain;
    if let Some(r) = spec.truncation_radius {
        if !(r > 0.0) {
            return Err(Error::InvalidParams("truncation_radius must be positive".into()));
        }
        a = a.max(-r);
        b = b.min(r);
    }
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidParams(format!("domain [{a}, {b}] must be a finite interval")));
    }
    if spec.grid_n < 2 {
        return Err(Error::InvalidGrid("grid_n must be >= 2".into()));
    }
    if spec.kind == ModelKind::CustomPsi {
        return build_custom(spec, a, b);
    }
    let model = AnalyticDensity::new(spec)?;
    let (na, nb) = model.natural_domain();
    let tol = 1e-9 * (b - a);
    if a < na - tol || b > nb + tol {
        return Err(Error::InvalidParams(format!("domain [{a}, {b}] leaves the model domain [{na}, {nb}]")));
    }
    a = a.max(na);
    b = b.min(nb);
    let singular: Vec<f64> = model
        .singular_points()
        .into_iter()
        .map(|s| if (s - a).abs() <= tol { a } else if (s - b).abs() <= tol { b } else { s })
        .filter(|&s| s >= a && s <= b)
        .collect();
    let mut breaks = vec![a];
    breaks.extend(singular.iter().copied().filter(|&s| s > a && s < b));
    breaks.push(b);
    let grid = Arc::new(Grid1D::piecewise_uniform(&breaks, spec.grid_n)?);
    let touches: Vec<bool> = (0..grid.len())
        .map(|i| singular.iter().any(|&s| s == grid.left(i) || s == grid.right(i)))
        .collect();
    let density = (0..grid.len())
        .map(|i| if touches[i] { PositiveInfinity } else { ExtendedReal::from_f64(model.eval(grid.center(i))) })
        .collect();
    let mut space = PointedSpace1D::new(grid, density, singular, spec.base_point, spec.regularity_k)?;
    space.domain_truncation = na == f64::NEG_INFINITY || nb == f64::INFINITY;
    if space.domain_truncation {
        let f = |x: f64| model.eval(x);
        let mut tail = 0.0;
        if nb == f64::INFINITY {
            tail += quad::integrate_to_inf(f, b, 1e-10);
        }
        if na == f64::NEG_INFINITY {
            tail += quad::integrate_from_neg_inf(f, a, 1e-10);
        }
        space.truncated_tail_mass = Some(tail);
    }
    space.analytic = Some(Arc::new(model));
    space.spec = Some(spec.clone());
    Ok(space)
}

fn build_custom(spec: &ModelSpec, a: f64, b: f64) -> Result<PointedSpace1D> {
    let psi = spec
        .psi_samples
        .as_ref()
        .ok_or_else(|| Error::InvalidParams("custom_psi requires psi_samples".into()))?;
    if psi.len() != spec.grid_n {
        return Err(Error::InvalidParams(format!("{} psi samples for grid_n = {}", psi.len(), spec.grid_n)));
    }
    let singular = spec.singular_points.clone().unwrap_or_default();
    if singular.iter().any(|&s| s < a || s > b) {
        return Err(Error::InvalidParams("declared singular point outside the domain".into()));
    }
    let mut breaks = vec![a];
    breaks.extend(singular.iter().copied().filter(|&s| s > a && s < b));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks.push(b);
    let grid = Arc::new(Grid1D::piecewise_uniform(&breaks, spec.grid_n)?);
    let density = psi
        .iter()
        .map(|p| match p {
            None => PositiveInfinity,
            Some(v) => ExtendedReal::from_f64((-v).exp()),
        })
        .collect::<Vec<_>>();
    let mut space = PointedSpace1D::new(grid, density, singular, spec.base_point, spec.regularity_k)?;
    for i in 0..space.len() {
        if space.singular_cell[i] {
            space.density[i] = PositiveInfinity;
        }
    }
    space.spec = Some(spec.clone());
    Ok(space)
}

/// Default growth threshold of [`detect_singular_set`]: halfway between the
/// halving of a bounded density and the constant mass of `1/|x|`.
pub const DEFAULT_GROWTH: f64 = 0.99;

/// Grid edges whose neighborhood mass does not shrink, at least by
/// `growth_factor`, each time the radius halves, over `refinement_levels`.
pub fn detect_singular_set(space: &PointedSpace1D, refinement_levels: u32, growth_factor: f64) -> Result<Vec<f64>> {
    let model = space.analytic.as_ref().ok_or(Error::NotRefinable)?;
    let g = &space.grid;
    let n = g.len();
    const SUB: usize = 4;
    let side = |x: f64, r: f64, dir: f64| -> f64 {
        let w = r / SUB as f64;
        (0..SUB).map(|i| model.eval(x + dir * (i as f64 + 0.5) * w)).sum::<f64>() * w
    };
    let mut out = Vec::new();
    for e in 0..=n {
        let x = g.edges()[e];
        let left = e > 0;
        let right = e < n;
        let mut r = f64::INFINITY;
        if left {
            r = r.min(g.width(e - 1));
        }
        if right {
            r = r.min(g.width(e));
        }
        r *= 0.5;
        let mass = |r: f64| {
            let mut m = 0.0;
            if left {
                m += side(x, r, -1.0);
            }
            if right {
                m += side(x, r, 1.0);
            }
            m
        };
        let mut prev = mass(r);
        let mut singular = true;
        for _ in 0..refinement_levels.max(1) {
            r *= 0.5;
            let cur = mass(r);
            if !(cur >= growth_factor * prev) {
                singular = false;
                break;
            }
            prev = cur;
        }
        if singular {
            out.push(x);
        }
    }
    Ok(out)
}

/// Cells whose centers lie in `B_{2^{k+1}}(p)` minus the `2^{-(k+1)}`-neighborhood of `𝒮`.
pub fn regular_set(space: &PointedSpace1D, k: i32) -> Vec<usize> {
    let outer = 2f64.powi(k + 1);
    let inner = 2f64.powi(-(k + 1));
    (0..space.len())
        .filter(|&i| {
            let c = space.grid.center(i);
            (c - space.base_point).abs() < outer && space.dist_to_singular(c) >= inner
        })
        .collect()
}

/// `f^k` at every cell center; zero on singular cells.
pub fn cut_factor(space: &PointedSpace1D, k: i32) -> Vec<f64> {
    let up = 2f64.powi(k);
    (0..space.len())
        .map(|i| {
            if space.singular_cell[i] {
                return 0.0;
            }
            let c = space.grid.center(i);
            let mut f = f_cut((c - space.base_point).abs() / up);
            if !space.singular_points.is_empty() {
                f *= 1.0 - f_cut(space.dist_to_singular(c) * up);
            }
            f
        })
        .collect()
}

/// The k-th cut `f^k·𝔪`.
pub fn k_cut(space: &PointedSpace1D, k: i32) -> Result<PointedSpace1D> {
    let f = cut_factor(space, k);
    let density: Vec<ExtendedReal> =
        space.density.iter().zip(&f).map(|(&d, &fk)| if fk == 0.0 { Finite(0.0) } else { d * fk }).collect();
    let total: f64 = density.iter().enumerate().map(|(i, d)| d.to_f64() * space.grid.width(i)).sum();
    if !(total > 0.0) {
        return Err(Error::EmptyCut { k });
    }
    Ok(PointedSpace1D {
        density,
        truncated_tail_mass: None,
        ..space.clone()
    })
}

/// `𝔪(X)`; infinite when a singular cell carries mass.
pub fn total_mass(space: &PointedSpace1D) -> ExtendedReal {
    (0..space.len()).map(|i| space.cell_mass(i)).sum()
}

/// The probability measure `𝔪^k / 𝔪^k(X)`.
pub fn normalize_cut(space: &PointedSpace1D, k: i32) -> Result<DiscreteMeasure> {
    let cut = k_cut(space, k)?;
    let masses = cut.cell_masses();
    let total: f64 = masses.iter().sum();
    DiscreteMeasure::new(space.grid.clone(), masses.into_iter().map(|m| m / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn spec(kind: ModelKind, k: f64, n: f64, domain: [f64; 2], grid_n: usize, p: f64) -> ModelSpec {
        ModelSpec {
            kind,
            params: ModelParams { k, n, ..Default::default() },
            domain,
            grid_n,
            base_point: p,
            regularity_k: 0,
            truncation_radius: None,
            psi_samples: None,
            singular_points: None,
        }
    }

    #[test]
    fn grid_basics() {
        let g = Grid1D::uniform(0.0, 1.0, 4).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g.center(1), 0.375);
        assert_eq!(g.locate(0.25), Some(1));
        assert_eq!(g.locate(1.0), Some(3));
        assert_eq!(g.locate(1.5), None);
        assert!(Grid1D::new(vec![0.0, 1.0]).is_err());
        assert!(Grid1D::new(vec![0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn piecewise_grids_nest() {
        let b = [0.0, 1.0, 3.5];
        let g1 = Grid1D::piecewise_uniform(&b, 512).unwrap();
        let g2 = Grid1D::piecewise_uniform(&b, 1024).unwrap();
        assert!(g1.edge_index(1.0, 0.0).is_some());
        for e in g1.edges() {
            assert!(g2.edge_index(*e, 1e-15).is_some());
        }
    }

    #[test]
    fn cos_singular_endpoints() {
        let s = build_model_space(&spec(ModelKind::CosN, -2.0, -2.0, [-PI / 2.0, PI / 2.0], 64, 0.0)).unwrap();
        assert_eq!(s.singular_points(), &[-PI / 2.0, PI / 2.0]);
        assert!(s.density()[0].is_infinite() && s.density()[63].is_infinite());
        assert!(s.density()[1].is_finite());
    }

    #[test]
    fn cosh_has_no_singular_set() {
        let s = build_model_space(&spec(ModelKind::CoshN, 1.0, -2.0, [-3.0, 3.0], 64, 0.0)).unwrap();
        assert!(s.singular_points().is_empty());
        assert!(s.domain_truncation());
        assert!(s.truncated_tail_mass().unwrap() > 0.0);
        assert_eq!(detect_singular_set(&s, 8, DEFAULT_GROWTH).unwrap(), Vec::<f64>::new());
    }

    #[test]
    fn invalid_params() {
        let e = build_model_space(&spec(ModelKind::PowerN, 0.0, -0.5, [0.0, 1.0], 16, 0.5));
        assert!(matches!(e, Err(Error::InvalidParams(_))));
        let e = build_model_space(&spec(ModelKind::CosN, 2.0, -2.0, [-1.0, 1.0], 16, 0.0));
        assert!(matches!(e, Err(Error::InvalidParams(_))));
    }

    #[test]
    fn off_grid_singular_point() {
        let g = Arc::new(Grid1D::uniform(0.0, 1.0, 4).unwrap());
        let d = vec![Finite(1.0); 4];
        let e = PointedSpace1D::new(g, d, vec![0.3], 0.6, 0);
        assert!(matches!(e, Err(Error::SingularPointOffGrid(_))));
    }

    #[test]
    fn power_mass_near_zero_diverges() {
        let mut prev = 0.0;
        let mut sp = spec(ModelKind::PowerN, 0.0, -2.0, [0.0, 1.0], 64, 0.5);
        sp.regularity_k = 1;
        for n in [64, 128, 256, 512] {
            let s = build_model_space(&sp.with_grid_n(n)).unwrap();
            // finite part of [0, 1/8] excluding the singular cell, refined
            let m: f64 = (1..n / 8).map(|i| s.cell_mass(i).to_f64()).sum();
            assert!(m > prev);
            prev = m;
        }
        let s = build_model_space(&sp).unwrap();
        assert_eq!(detect_singular_set(&s, 8, DEFAULT_GROWTH).unwrap(), vec![0.0]);
        assert_eq!(total_mass(&s), PositiveInfinity);
    }

    #[test]
    fn glued_cos_three_points() {
        let mut sp = spec(ModelKind::GluedCosN, -2.0, -2.0, [PI / 2.0, 5.0 * PI / 2.0], 128, PI);
        sp.params.j = Some(2);
        let s = build_model_space(&sp).unwrap();
        let d = detect_singular_set(&s, 8, DEFAULT_GROWTH).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d, s.singular_points());
    }

    #[test]
    fn regular_set_extremes() {
        let s = build_model_space(&spec(ModelKind::CoshN, 1.0, -2.0, [-1.0, 1.0], 32, 0.0)).unwrap();
        assert_eq!(regular_set(&s, 0).len(), 32);
        let mut sp = spec(ModelKind::CosN, -8.0, -2.0, [-PI / 4.0, PI / 4.0], 32, 0.0);
        sp.regularity_k = 2;
        let s = build_model_space(&sp).unwrap();
        // 2^{-(k+1)} = 1 covers the whole interval of half-width π/4
        assert!(regular_set(&s, -1).is_empty());
    }

    #[test]
    fn cut_plateaus_and_zeros() {
        let s = build_model_space(&spec(ModelKind::PowerN, 0.0, -2.0, [0.0, 8.0], 256, 1.0)).unwrap();
        let f = cut_factor(&s, 1);
        for (i, &fi) in f.iter().enumerate() {
            let c = s.grid().center(i);
            let dp = (c - 1.0).abs();
            if dp <= 2.0 && c >= 1.0 && !s.is_singular_cell(i) {
                assert_eq!(fi, 1.0);
            }
            if dp >= 4.0 {
                assert_eq!(fi, 0.0);
            }
        }
    }

    #[test]
    fn cut_is_identity_without_singularities() {
        let s = build_model_space(&spec(ModelKind::CoshN, 1.0, -2.0, [-1.0, 1.0], 32, 0.0)).unwrap();
        let c = k_cut(&s, 1).unwrap();
        assert_eq!(c.density(), s.density());
    }

    #[test]
    fn empty_cut() {
        let g = Arc::new(Grid1D::uniform(0.0, 1.0, 8).unwrap());
        let mut d = vec![Finite(0.0); 8];
        d[7] = Finite(1.0);
        let s = PointedSpace1D::new(g.clone(), d.clone(), vec![], 0.95, 0).unwrap();
        // f_cut(|x - p| 2^{-k}) vanishes beyond 2^{k+1}: k = -5 leaves only [0.8875, 1]
        assert!(k_cut(&s, -5).is_ok());
        let s2 = PointedSpace1D { base_point: 0.05, ..s };
        assert!(matches!(k_cut(&s2, -5), Err(Error::EmptyCut { k: -5 })));
    }

    #[test]
    fn normalized_cut_is_probability() {
        let s = build_model_space(&spec(ModelKind::PowerN, 0.0, -2.0, [0.0, 4.0], 128, 1.0)).unwrap();
        let m = normalize_cut(&s, 0).unwrap();
        assert!((m.total() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn json_descriptor_round_trip() {
        let j = r#"{"kind":"cos_n","params":{"K":-2,"N":-2},"domain":[-1.5707963267948966,1.5707963267948966],"grid_n":64,"base_point":0,"regularity_k":0}"#;
        let s = ModelSpec::from_json(j).unwrap();
        assert_eq!(s.kind, ModelKind::CosN);
        assert_eq!(ModelSpec::from_json(&s.to_json()).unwrap(), s);
        assert!(ModelSpec::from_json(r#"{"kind":"cos_n"}"#).is_err());
        assert!(ModelSpec::from_json(r#"{"kind":"nope","domain":[0,1],"grid_n":4,"base_point":0}"#).is_err());
    }

    #[test]
    fn custom_psi_is_not_refinable() {
        let mut sp = spec(ModelKind::CustomPsi, 0.0, -2.0, [0.0, 1.0], 4, 0.6);
        sp.psi_samples = Some(vec![None, Some(0.0), Some(0.0), Some(0.0)]);
        sp.singular_points = Some(vec![0.0]);
        sp.regularity_k = 2;
        let s = build_model_space(&sp).unwrap();
        assert!(matches!(detect_singular_set(&s, 4, DEFAULT_GROWTH), Err(Error::NotRefinable)));
        assert_eq!(s.singular_points(), &[0.0]);
    }

    #[test]
    fn cauchy_constant() {
        let mut sp = spec(ModelKind::Cauchy, 0.0, 0.0, [-4.0, 4.0], 64, 0.0);
        sp.params.alpha = Some(1.0);
        let s = build_model_space(&sp).unwrap();
        let v = s.analytic().unwrap().eval(0.0);
        assert!((v - 1.0 / PI).abs() < 1e-12);
        assert_eq!(sp.claimed_cd(), Some((0.0, -1.0)));
    }
}
