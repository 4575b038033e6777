//! Shape-preserving cubic Hermite interpolation on radial nodes.
//!
//! Node slopes come from five-point Lagrange differentiation (one-sided
//! near the ends, so no parity is assumed at the origin) and are then limited
//! with the Fritsch–Carlson conditions, so the interpolant never overshoots
//! the data between nodes. The limiter is positively homogeneous and odd in
//! the data, so interpolation commutes with scalar multiplication.

pub(crate) struct MonotoneCubic<'a> {
    x: &'a [f64],
    y: &'a [f64],
    slopes: Vec<f64>,
}

impl<'a> MonotoneCubic<'a> {
    pub(crate) fn new(x: &'a [f64], y: &'a [f64]) -> Self {
        let n = x.len();
        debug_assert!(n >= 5 && y.len() == n);
        let mut slopes = vec![0.0; n];
        for (i, s) in slopes.iter_mut().enumerate() {
            let lo = i.saturating_sub(2).min(n - 5);
            let xs: [f64; 5] = std::array::from_fn(|k| x[lo + k]);
            let ys: [f64; 5] = std::array::from_fn(|k| y[lo + k]);
            *s = lagrange_slope(&xs, &ys, x[i]);
        }

        for k in 0..n - 1 {
            let h = x[k + 1] - x[k];
            let secant = (y[k + 1] - y[k]) / h;
            if secant == 0.0 {
                slopes[k] = 0.0;
                slopes[k + 1] = 0.0;
                continue;
            }
            if slopes[k] * secant < 0.0 {
                slopes[k] = 0.0;
            }
            if slopes[k + 1] * secant < 0.0 {
                slopes[k + 1] = 0.0;
            }
            let a = slopes[k] / secant;
            let b = slopes[k + 1] / secant;
            let norm2 = a * a + b * b;
            if norm2 > 9.0 {
                let tau = 3.0 / norm2.sqrt();
                slopes[k] = tau * a * secant;
                slopes[k + 1] = tau * b * secant;
            }
        }
        Self { x, y, slopes }
    }

    /// Evaluates at `t ∈ [x_0, x_{n-1}]`; node abscissae return the stored
    /// samples exactly.
    pub(crate) fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let k = match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        if s == 0.0 {
            return self.y[k];
        }
        if s == 1.0 {
            return self.y[k + 1];
        }
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k]
            + h10 * h * self.slopes[k]
            + h01 * self.y[k + 1]
            + h11 * h * self.slopes[k + 1]
    }
}

/// Derivative at `x0` of the polynomial interpolating `(xs, ys)`.
fn lagrange_slope(xs: &[f64; 5], ys: &[f64; 5], x0: f64) -> f64 {
    let mut total = 0.0;
    for j in 0..5 {
        let mut dj = 0.0;
        for k in 0..5 {
            if k == j {
                continue;
            }
            let mut term = 1.0 / (xs[j] - xs[k]);
            for m in 0..5 {
                if m != j && m != k {
                    term *= (x0 - xs[m]) / (xs[j] - xs[m]);
                }
            }
            dj += term;
        }
        total += ys[j] * dj;
    }
    total
}
