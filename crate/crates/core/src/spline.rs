//! Natural cubic spline interpolation, used to recover second derivatives
//! of trajectories that only expose values.

use crate::error::{Error, Result};

/// Interpolant through (x_i, y_i) with zero second derivative at both end
/// knots. Evaluation outside the knot range clamps to the end segments.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 3 {
            return Err(Error::Usage(format!(
                "spline needs at least 3 knots, got {n}"
            )));
        }
        if ys.len() != n {
            return Err(Error::Usage(format!(
                "{} knot positions but {} values",
                n,
                ys.len()
            )));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Usage(
                "spline knots must be finite and strictly increasing".into(),
            ));
        }
        if ys.iter().any(|v| !v.is_finite()) {
            return Err(Error::Usage("spline values must be finite".into()));
        }

        // Tridiagonal system for the interior second derivatives (Thomas
        // algorithm); the natural condition zeroes both end values.
        let mut m = vec![0.0; n];
        if n > 2 {
            let rows = n - 2;
            let mut diag = vec![0.0; rows];
            let mut upper = vec![0.0; rows];
            let mut rhs = vec![0.0; rows];
            for i in 0..rows {
                let h0 = xs[i + 1] - xs[i];
                let h1 = xs[i + 2] - xs[i + 1];
                diag[i] = (h0 + h1) / 3.0;
                upper[i] = h1 / 6.0;
                rhs[i] = (ys[i + 2] - ys[i + 1]) / h1 - (ys[i + 1] - ys[i]) / h0;
            }
            for i in 1..rows {
                // Lower entry of row i equals the upper entry of row i-1.
                let l = upper[i - 1];
                let w = l / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[rows] = rhs[rows - 1] / diag[rows - 1];
            for i in (0..rows - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self { xs, ys, m })
    }

    /// Index of the segment containing x (clamped to the end segments).
    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let lo = self.xs[i + 1] - x;
        let hi = x - self.xs[i];
        self.m[i] * lo * lo * lo / (6.0 * h)
            + self.m[i + 1] * hi * hi * hi / (6.0 * h)
            + (self.ys[i] / h - self.m[i] * h / 6.0) * lo
            + (self.ys[i + 1] / h - self.m[i + 1] * h / 6.0) * hi
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let lo = self.xs[i + 1] - x;
        let hi = x - self.xs[i];
        -self.m[i] * lo * lo / (2.0 * h) + self.m[i + 1] * hi * hi / (2.0 * h)
            - (self.ys[i] / h - self.m[i] * h / 6.0)
            + (self.ys[i + 1] / h - self.m[i + 1] * h / 6.0)
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        (self.m[i] * (self.xs[i + 1] - x) + self.m[i + 1] * (x - self.xs[i])) / h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::linspace;

    #[test]
    fn reproduces_linear_data_exactly() {
        let xs = linspace(0.0, 2.0, 9);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let s = CubicSpline::natural(xs, ys).unwrap();
        for x in linspace(0.0, 2.0, 33) {
            assert!((s.value(x) - (3.0 * x - 1.0)).abs() <= 1e-12);
            assert!((s.deriv(x) - 3.0).abs() <= 1e-12);
            assert!(s.second_deriv(x).abs() <= 1e-12);
        }
    }

    #[test]
    fn differentiates_a_smooth_function() {
        let xs = linspace(0.0, 1.0, 129);
        let ys: Vec<f64> = xs.iter().map(|x| (2.0 * x).sin()).collect();
        let s = CubicSpline::natural(xs, ys).unwrap();
        // Natural end conditions pollute the outermost segments; the
        // interior is second-order accurate.
        for x in linspace(0.2, 0.8, 25) {
            assert!((s.value(x) - (2.0 * x).sin()).abs() <= 1e-8, "value at {x}");
            assert!(
                (s.deriv(x) - 2.0 * (2.0 * x).cos()).abs() <= 1e-5,
                "slope at {x}"
            );
            assert!(
                (s.second_deriv(x) + 4.0 * (2.0 * x).sin()).abs() <= 1e-3,
                "curvature at {x}"
            );
        }
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(CubicSpline::natural(vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(CubicSpline::natural(vec![0.0, 1.0, 0.5], vec![0.0; 3]).is_err());
        assert!(CubicSpline::natural(vec![0.0, 1.0, 2.0], vec![0.0; 2]).is_err());
    }
}
