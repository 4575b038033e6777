//! Radial discretization of integrals over all of space.
//!
//! Nodes are images `r_i = R(i)` of the integers under a smooth odd map
//! `R`: the identity scaled to `[0, r_max]` for uniform grids, or a `sinh`
//! profile whose spacing grows geometrically away from the origin. Because
//! `R` is odd, radial profiles (which are even in `r`) stay even in the
//! computational coordinate, which keeps the trapezoid sums spectrally
//! accurate at the origin.
//!
//! Functions are truncated to the ball of radius `r_max` with a homogeneous
//! Dirichlet condition there and extended by zero beyond it.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, SpsError};
use crate::interp::MonotoneCubic;

pub const MIN_NODES: usize = 16;
pub const MAX_STRETCH: f64 = 1.1;

/// Construction parameters of a [`Grid`]; enough to rebuild it bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub r_max: f64,
    #[serde(default = "default_stretch")]
    pub stretch: f64,
}

fn default_stretch() -> f64 {
    1.0
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<Grid>> {
        make_grid(self.n, self.r_max, self.stretch).map(Arc::new)
    }
}

/// Odd map from the computational coordinate to the radius.
#[derive(Debug, Clone, Copy)]
struct RadialMap {
    r_max: f64,
    last: f64,
    // 0 for the uniform map
    rate: f64,
}

impl RadialMap {
    fn radius(&self, xi: f64) -> f64 {
        if self.rate == 0.0 {
            return self.r_max * xi / self.last;
        }
        // sinh(b xi) / sinh(b N) written to avoid overflow for large b N.
        let b = self.rate;
        let num = (-(b * (self.last - xi))).exp() * (1.0 - (-2.0 * b * xi).exp());
        self.r_max * num / (1.0 - (-2.0 * b * self.last).exp())
    }

    fn jacobian(&self, xi: f64) -> f64 {
        if self.rate == 0.0 {
            return self.r_max / self.last;
        }
        let b = self.rate;
        let num = (-(b * (self.last - xi))).exp() * (1.0 + (-2.0 * b * xi).exp());
        self.r_max * b * num / (1.0 - (-2.0 * b * self.last).exp())
    }
}

/// Radial grid on `[0, r_max]` with volume quadrature weights.
///
/// `weights` satisfy `Σ w_i g(r_i) ≈ 4π ∫_0^{r_max} g(r) r² dr`; they are the
/// trapezoid rule in the computational coordinate with a Gregory correction
/// at `r_max`, normalized so that constants integrate exactly.
#[derive(Debug, Clone)]
pub struct Grid {
    n: usize,
    r_max: f64,
    stretch: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    jacobian: Vec<f64>,
    // 4π R(ξ)²/R'(ξ) at the half-integer points; one per cell.
    stiffness: Vec<f64>,
    // 1/max(r_i, r_j) kernel diagonal with the kink correction.
    kernel_diag: Vec<f64>,
    stencil: Vec<[(usize, f64); 5]>,
}

/// Builds a grid with `n` nodes on `[0, r_max]`. `stretch = 1` gives uniform
/// spacing; `stretch > 1` makes successive spacings grow towards that ratio.
pub fn make_grid(n: usize, r_max: f64, stretch: f64) -> Result<Grid> {
    if n < MIN_NODES {
        return Err(SpsError::Config(format!(
            "grid.n = {n} is below the minimum of {MIN_NODES} nodes"
        )));
    }
    if !(r_max.is_finite() && r_max > 0.0) {
        return Err(SpsError::Config(format!(
            "grid.r_max = {r_max} must be a positive finite radius"
        )));
    }
    if !(stretch.is_finite() && (1.0..=MAX_STRETCH).contains(&stretch)) {
        return Err(SpsError::Config(format!(
            "grid.stretch = {stretch} must lie in [1, {MAX_STRETCH}]"
        )));
    }

    let last = (n - 1) as f64;
    let map = RadialMap {
        r_max,
        last,
        rate: stretch.ln(),
    };

    let mut nodes: Vec<f64> = (0..n).map(|i| map.radius(i as f64)).collect();
    nodes[0] = 0.0;
    nodes[n - 1] = r_max;
    if nodes.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(SpsError::Config(format!(
            "grid with n = {n}, stretch = {stretch} has coincident nodes near the origin"
        )));
    }
    let jacobian: Vec<f64> = (0..n).map(|i| map.jacobian(i as f64)).collect();

    let mut coef = vec![1.0; n];
    coef[0] = 0.5;
    coef[n - 1] = 3.0 / 8.0;
    coef[n - 2] = 7.0 / 6.0;
    coef[n - 3] = 23.0 / 24.0;
    let mut weights: Vec<f64> = (0..n)
        .map(|i| 4.0 * PI * nodes[i] * nodes[i] * jacobian[i] * coef[i])
        .collect();
    weights[0] = 0.0;
    let volume = 4.0 * PI * r_max.powi(3) / 3.0;
    let total: f64 = weights.iter().sum();
    let fix = volume / total;
    for w in &mut weights {
        *w *= fix;
    }

    let stiffness = (0..n - 1)
        .map(|m| {
            let xi = m as f64 + 0.5;
            let r = map.radius(xi);
            4.0 * PI * r * r / map.jacobian(xi)
        })
        .collect();

    let mut kernel_diag = vec![0.0; n];
    for i in 1..n {
        let r = nodes[i];
        kernel_diag[i] = 1.0 / r - jacobian[i] / (12.0 * r * r);
    }

    let stencil = derivative_stencil(n);

    Ok(Grid {
        n,
        r_max,
        stretch,
        nodes,
        weights,
        jacobian,
        stiffness,
        kernel_diag,
        stencil,
    })
}

/// Fourth-order staggered difference `du/dξ` at the half-integer points,
/// with an even ghost at the origin and a linear (odd about `u_N`) ghost
/// past `r_max`.
fn derivative_stencil(n: usize) -> Vec<[(usize, f64); 5]> {
    let last = n - 1;
    let c_near = 27.0 / 24.0;
    let c_far = 1.0 / 24.0;
    (0..last)
        .map(|m| {
            let mut row = [(0usize, 0.0f64); 5];
            let mut k = 0;
            let mut push = |idx: isize, c: f64| {
                if idx < 0 {
                    row[k] = ((-idx) as usize, c);
                    k += 1;
                } else if idx as usize > last {
                    // u_{N+1} = 2 u_N - u_{N-1}
                    row[k] = (last, 2.0 * c);
                    k += 1;
                    row[k] = (last - 1, -c);
                    k += 1;
                } else {
                    row[k] = (idx as usize, c);
                    k += 1;
                }
            };
            let m = m as isize;
            push(m - 1, c_far);
            push(m, -c_near);
            push(m + 1, c_near);
            push(m + 2, -c_far);
            row
        })
        .collect()
}

impl Grid {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn stretch(&self) -> f64 {
        self.stretch
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            n: self.n,
            r_max: self.r_max,
            stretch: self.stretch,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `dr/dξ` at the nodes.
    pub fn jacobian(&self) -> &[f64] {
        &self.jacobian
    }

    pub fn is_uniform(&self) -> bool {
        self.stretch == 1.0
    }

    pub(crate) fn stiffness(&self) -> &[f64] {
        &self.stiffness
    }

    /// Staggered derivative `(D u)_m`, one entry per cell.
    pub(crate) fn cell_derivative(&self, u: &[f64]) -> Vec<f64> {
        self.stencil
            .iter()
            .map(|row| row.iter().map(|&(j, c)| c * u[j]).sum())
            .collect()
    }

    /// Transpose of [`Grid::cell_derivative`].
    pub(crate) fn cell_derivative_transpose(&self, cells: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (row, &c_m) in self.stencil.iter().zip(cells) {
            for &(j, c) in row {
                out[j] += c * c_m;
            }
        }
        out
    }

    /// `x ↦ K x` for the kernel `K_ij = 1/max(r_i, r_j)` (corrected diagonal)
    /// in O(n) via cumulative sums. `x[0]` must vanish (it always carries a
    /// factor `w_0 = 0`).
    pub(crate) fn kernel_apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        // tail[i] = Σ_{j>i} x_j / r_j
        let mut tail = 0.0;
        let mut tails = vec![0.0; n];
        for j in (0..n).rev() {
            tails[j] = tail;
            if j > 0 {
                tail += x[j] / self.nodes[j];
            }
        }
        // Strictly-lower cumulative part plus the corrected diagonal.
        let mut head = 0.0;
        for i in 0..n {
            if i == 0 {
                out[0] = tails[0];
                continue;
            }
            out[i] = head / self.nodes[i] + self.kernel_diag[i] * x[i] + tails[i];
            head += x[i];
        }
        out
    }

    /// Sum of `weights * samples`.
    pub fn integrate(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.n {
            return Err(SpsError::Shape {
                expected: self.n,
                got: samples.len(),
            });
        }
        Ok(self.weights.iter().zip(samples).map(|(w, s)| w * s).sum())
    }

    pub(crate) fn integrate_unchecked(&self, samples: impl Iterator<Item = f64>) -> f64 {
        self.weights.iter().zip(samples).map(|(w, s)| w * s).sum()
    }
}

/// Free-function form of [`Grid::integrate`].
pub fn integrate(grid: &Grid, samples: &[f64]) -> Result<f64> {
    grid.integrate(samples)
}

/// Radial function sampled at the nodes of a grid.
#[derive(Debug, Clone)]
pub struct RadialFn {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl PartialEq for RadialFn {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.grid, &other.grid) || self.grid.spec() == other.grid.spec())
            && self.values == other.values
    }
}

impl RadialFn {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(SpsError::Shape {
                expected: grid.n(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SpsError::Domain(format!(
                "non-finite sample {} at node {i}",
                values[i]
            )));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_parts(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.n();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(∫ u² dx)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.grid
            .integrate_unchecked(self.values.iter().map(|v| v * v))
            .sqrt()
    }

    pub fn l2_distance(&self, other: &RadialFn) -> f64 {
        self.grid
            .integrate_unchecked(
                self.values
                    .iter()
                    .zip(&other.values)
                    .map(|(a, b)| (a - b) * (a - b)),
            )
            .sqrt()
    }

    pub fn scaled_by(&self, tau: f64) -> RadialFn {
        RadialFn::from_parts(
            self.grid.clone(),
            self.values.iter().map(|v| tau * v).collect(),
        )
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RadialFn {
        RadialFn::from_parts(
            self.grid.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// `self + alpha * dir`.
    pub fn axpy(&self, alpha: f64, dir: &[f64]) -> RadialFn {
        RadialFn::from_parts(
            self.grid.clone(),
            self.values
                .iter()
                .zip(dir)
                .map(|(v, d)| v + alpha * d)
                .collect(),
        )
    }

    /// Writes the `r,u` CSV profile, full round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 40);
        out.push_str("r,u\n");
        for (r, u) in self.grid.nodes().iter().zip(&self.values) {
            let _ = writeln!(out, "{r:?},{u:?}");
        }
        out
    }

    /// Reads an `r,u` CSV profile; the radii must coincide with `grid`.
    pub fn from_csv(grid: Arc<Grid>, text: &str) -> Result<RadialFn> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("r,u") => {}
            other => {
                return Err(SpsError::Parse(format!(
                    "expected header \"r,u\", found {other:?}"
                )))
            }
        }
        let mut values = Vec::with_capacity(grid.n());
        for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let (r, u) = line
                .split_once(',')
                .ok_or_else(|| SpsError::Parse(format!("row {i}: expected two columns")))?;
            let r: f64 = r
                .trim()
                .parse()
                .map_err(|e| SpsError::Parse(format!("row {i}: radius: {e}")))?;
            let u: f64 = u
                .trim()
                .parse()
                .map_err(|e| SpsError::Parse(format!("row {i}: value: {e}")))?;
            let expected = grid.nodes().get(i).copied().unwrap_or(f64::NAN);
            if (r - expected).abs() > 1e-12 * grid.r_max() {
                return Err(SpsError::Parse(format!(
                    "row {i}: radius {r} does not match grid node {expected}"
                )));
            }
            values.push(u);
        }
        RadialFn::new(grid, values)
    }
}

#[derive(Serialize, Deserialize)]
struct RadialFnRepr {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Serialize for RadialFn {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RadialFnRepr {
            grid: self.grid.spec(),
            values: self.values.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RadialFn {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = RadialFnRepr::deserialize(d)?;
        let grid = repr.grid.build().map_err(serde::de::Error::custom)?;
        RadialFn::new(grid, repr.values).map_err(serde::de::Error::custom)
    }
}

/// Second-order finite-difference `u'(r_i)` with one-sided three-point
/// stencils at both ends.
pub fn differentiate(u: &RadialFn) -> RadialFn {
    let r = u.grid.nodes();
    let v = &u.values;
    let n = r.len();
    let mut out = vec![0.0; n];
    out[0] = three_point(r[0], [r[0], r[1], r[2]], [v[0], v[1], v[2]]);
    for i in 1..n - 1 {
        out[i] = three_point(r[i], [r[i - 1], r[i], r[i + 1]], [v[i - 1], v[i], v[i + 1]]);
    }
    out[n - 1] = three_point(
        r[n - 1],
        [r[n - 3], r[n - 2], r[n - 1]],
        [v[n - 3], v[n - 2], v[n - 1]],
    );
    RadialFn::from_parts(u.grid.clone(), out)
}

/// Derivative at `x` of the quadratic through three points.
fn three_point(x: f64, xs: [f64; 3], ys: [f64; 3]) -> f64 {
    let [x0, x1, x2] = xs;
    let [y0, y1, y2] = ys;
    let l0 = ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2));
    let l1 = ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2));
    let l2 = ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1));
    y0 * l0 + y1 * l1 + y2 * l2
}

/// Samples `u(t r_i)` by monotone cubic interpolation; zero past `r_max`.
pub fn resample(u: &RadialFn, t: f64) -> Result<RadialFn> {
    if !(t.is_finite() && t > 0.0) {
        return Err(SpsError::Domain(format!(
            "resample factor t = {t} must be positive"
        )));
    }
    if t == 1.0 {
        return Ok(u.clone());
    }
    let interp = MonotoneCubic::new(u.grid.nodes(), &u.values);
    let r_max = u.grid.r_max();
    let values = u
        .grid
        .nodes()
        .iter()
        .map(|&r| {
            let x = t * r;
            if x > r_max {
                0.0
            } else {
                interp.eval(x)
            }
        })
        .collect();
    Ok(RadialFn::from_parts(u.grid.clone(), values))
}
