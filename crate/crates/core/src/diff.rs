//! Finite-difference stencils shared by the operator and residual layers.

/// Richardson-extrapolated central difference over steps {h, h/2}:
/// (4 D_{h/2} - D_h) / 3 where D_h is the second-order central quotient.
/// Fourth-order accurate and tolerant of mildly noisy f (quadrature noise
/// ~1e-10 with the default h keeps rounding and truncation balanced).
pub fn richardson_derivative(f: &mut dyn FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    let d_h = (f(x + h) - f(x - h)) / (2.0 * h);
    let d_h2 = (f(x + 0.5 * h) - f(x - 0.5 * h)) / h;
    (4.0 * d_h2 - d_h) / 3.0
}

/// Fourth-order first derivative on [lo, hi], switching to one-sided
/// stencils of the same order within 2h of either end.
pub fn deriv4_bounded(f: &dyn Fn(f64) -> f64, x: f64, h: f64, lo: f64, hi: f64) -> f64 {
    if x - 2.0 * h >= lo && x + 2.0 * h <= hi {
        (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
    } else if x + 4.0 * h <= hi {
        (-25.0 * f(x) + 48.0 * f(x + h) - 36.0 * f(x + 2.0 * h) + 16.0 * f(x + 3.0 * h)
            - 3.0 * f(x + 4.0 * h))
            / (12.0 * h)
    } else {
        (25.0 * f(x) - 48.0 * f(x - h) + 36.0 * f(x - 2.0 * h) - 16.0 * f(x - 3.0 * h)
            + 3.0 * f(x - 4.0 * h))
            / (12.0 * h)
    }
}

/// Fourth-order second derivative with the same interior/one-sided split.
/// The one-sided variants drop to second order, which is still well below
/// the tolerances of the residual checks that use them.
pub fn second_deriv_bounded(f: &dyn Fn(f64) -> f64, x: f64, h: f64, lo: f64, hi: f64) -> f64 {
    if x - 2.0 * h >= lo && x + 2.0 * h <= hi {
        (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x) + 16.0 * f(x + h) - f(x + 2.0 * h))
            / (12.0 * h * h)
    } else if x + 3.0 * h <= hi {
        (2.0 * f(x) - 5.0 * f(x + h) + 4.0 * f(x + 2.0 * h) - f(x + 3.0 * h)) / (h * h)
    } else {
        (2.0 * f(x) - 5.0 * f(x - h) + 4.0 * f(x - 2.0 * h) - f(x - 3.0 * h)) / (h * h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn richardson_on_exp() {
        let mut f = |x: f64| x.exp();
        let d = richardson_derivative(&mut f, 0.7, 1e-3);
        assert_relative_eq!(d, 0.7_f64.exp(), max_relative = 1e-11);
    }

    #[test]
    fn bounded_deriv_interior_and_edges() {
        let f = |x: f64| (2.0 * x).sin();
        let h = 1e-3;
        for x in [0.0, 0.001, 0.5, 0.999, 1.0] {
            let d = deriv4_bounded(&f, x, h, 0.0, 1.0);
            assert_relative_eq!(d, 2.0 * (2.0 * x).cos(), max_relative = 1e-8);
        }
    }

    #[test]
    fn bounded_second_deriv() {
        let f = |x: f64| x.powi(4);
        let h = 1e-3;
        for x in [0.0, 0.4, 1.0] {
            let d2 = second_deriv_bounded(&f, x, h, 0.0, 1.0);
            assert!((d2 - 12.0 * x * x).abs() < 1e-4, "x={x}: {d2}");
        }
    }
}
