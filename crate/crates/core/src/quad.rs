//! Quadrature for the kernel-weighted branch integrals.
//!
//! The substitution u = s^(1+sigma) turns ∫ s^sigma rho(s) f ds into
//! ∫ rho f / (1+sigma) du, so the singular factor is integrated exactly and
//! only the smooth remainder is sampled. Panels are graded toward u = 0 on
//! top of that, which also serves the variable-order kernel where the
//! exponent cannot be split off exactly.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::special::recip_gamma;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    /// Gauss-Legendre points per panel.
    pub nodes_per_panel: usize,
    /// Panel count per branch.
    pub panels: usize,
    /// Mesh grading exponent; panel j covers [U(j/P)^g, U((j+1)/P)^g].
    pub grading_exponent: f64,
    /// Accuracy floor used by convergence checks; refinement below this
    /// level is not expected to keep improving (roundoff dominates).
    pub target_rel_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nodes_per_panel: 12,
            panels: 8,
            grading_exponent: 2.0,
            target_rel_tol: 1e-10,
        }
    }
}

impl QuadratureSpec {
    pub fn validated(self) -> Result<Self> {
        if !(2..=64).contains(&self.nodes_per_panel) {
            return Err(Error::InvalidQuadrature(format!(
                "nodes_per_panel must be in 2..=64, got {}",
                self.nodes_per_panel
            )));
        }
        if !(1..=1024).contains(&self.panels) {
            return Err(Error::InvalidQuadrature(format!(
                "panels must be in 1..=1024, got {}",
                self.panels
            )));
        }
        if !(self.grading_exponent.is_finite() && (1.0..=10.0).contains(&self.grading_exponent)) {
            return Err(Error::InvalidQuadrature(format!(
                "grading exponent must lie in [1, 10], got {}",
                self.grading_exponent
            )));
        }
        if !(self.target_rel_tol.is_finite() && self.target_rel_tol > 0.0) {
            return Err(Error::InvalidQuadrature(format!(
                "target_rel_tol must be positive, got {}",
                self.target_rel_tol
            )));
        }
        Ok(self)
    }

    /// Cheaper settings for quadratures nested inside an outer quadrature.
    pub(crate) fn inner(&self) -> Self {
        Self {
            panels: (self.panels / 2).max(2),
            ..*self
        }
    }
}

static GL_CACHE: LazyLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

/// Gauss-Legendre nodes and weights on [-1, 1], computed once per order by
/// Newton iteration on the Legendre recurrence and cached.
pub(crate) fn gauss_legendre(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    let mut cache = GL_CACHE.lock().expect("GL cache poisoned");
    cache
        .entry(n)
        .or_insert_with(|| Arc::new(compute_gauss_legendre(n)))
        .clone()
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(z) by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
            let step = p0 / dp;
            z -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        xs[i] = -z;
        xs[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

/// Discretization of one branch integral as nodes and weights with the
/// kernel factor folded into the weights:
///
/// ```text
/// integral over [min(x,other), max(x,other)] of k(...) f(t) dt ~ sum of w_i f(t_i)
/// ```
///
/// `swap = false` integrates k(x, t) (singular end at t = x from below),
/// `swap = true` integrates k(t, x) (singular end at t = x from above).
pub(crate) fn weighted_kernel_nodes(
    kernel: &Kernel,
    x: f64,
    other: f64,
    swap: bool,
    spec: &QuadratureSpec,
) -> Result<Vec<(f64, f64)>> {
    let len = (other - x).abs();
    let mut out = Vec::with_capacity(spec.panels * spec.nodes_per_panel);
    if len == 0.0 {
        return Ok(out);
    }
    let sigma = kernel.singularity_exponent();
    let ex = 1.0 + sigma;
    let cap = len.powf(ex);
    let sign = if other >= x { 1.0 } else { -1.0 };
    let gl = gauss_legendre(spec.nodes_per_panel);
    let (zs, ws) = (&gl.0, &gl.1);
    for j in 0..spec.panels {
        let u0 = cap * (j as f64 / spec.panels as f64).powf(spec.grading_exponent);
        let u1 = cap * ((j + 1) as f64 / spec.panels as f64).powf(spec.grading_exponent);
        let mid = 0.5 * (u0 + u1);
        let half = 0.5 * (u1 - u0);
        for (z, w) in zs.iter().zip(ws.iter()) {
            let u = mid + half * z;
            let s = u.powf(1.0 / ex);
            let t = x + sign * s;
            let rho = match kernel.regular_part() {
                Some(reg) => {
                    if swap {
                        reg(t, x, s)
                    } else {
                        reg(x, t, s)
                    }
                }
                None => {
                    let om = kernel
                        .order_map()
                        .expect("kernel without regular part must carry an order map");
                    let al = if swap { om(t, x) } else { om(x, t) };
                    // Combined exponent al - 1 - sigma >= 0 by construction,
                    // so this stays bounded all the way into the corner.
                    s.powf(al - 1.0 - sigma) * recip_gamma(al)
                }
            };
            if !rho.is_finite() {
                return Err(Error::NonFiniteSample { t });
            }
            out.push((t, w * half * rho / ex));
        }
    }
    Ok(out)
}

/// One branch integral of kernel times f. See `weighted_kernel_nodes` for
/// the orientation conventions; the result is always over [lo, hi].
pub fn kernel_branch_integral(
    kernel: &Kernel,
    x: f64,
    other: f64,
    swap: bool,
    f: &mut dyn FnMut(f64) -> f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let nodes = weighted_kernel_nodes(kernel, x, other, swap, spec)?;
    let mut acc = 0.0;
    for (t, w) in nodes {
        let v = f(t);
        if !v.is_finite() {
            return Err(Error::NonFiniteSample { t });
        }
        acc += w * v;
    }
    Ok(acc)
}

/// ∫_lo^hi f(t) dt for f with an endpoint weight |t - singular_end|^sigma
/// that cannot be factored out of f (f itself is only evaluable strictly
/// inside). Same u-substitution, but the mesh is floored a relative 1e-12
/// away from the singular end and the remaining sliver is closed with one
/// midpoint cell, which is second-order accurate there.
pub fn endpoint_graded_integral(
    f: &mut dyn FnMut(f64) -> f64,
    singular_end: f64,
    other_end: f64,
    sigma: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !(sigma > -1.0 && sigma <= 0.0) {
        return Err(Error::InvalidQuadrature(format!(
            "endpoint exponent must lie in (-1, 0], got {sigma}"
        )));
    }
    let len = (other_end - singular_end).abs();
    if len == 0.0 {
        return Ok(0.0);
    }
    let ex = 1.0 + sigma;
    let cap = len.powf(ex);
    let floor = (1e-12 * len).powf(ex);
    let sign = if other_end >= singular_end { 1.0 } else { -1.0 };
    let gl = gauss_legendre(spec.nodes_per_panel);
    let (zs, ws) = (&gl.0, &gl.1);
    let mut acc = 0.0;
    let span = cap - floor;
    for j in 0..spec.panels {
        let u0 = floor + span * (j as f64 / spec.panels as f64).powf(spec.grading_exponent);
        let u1 = floor + span * ((j + 1) as f64 / spec.panels as f64).powf(spec.grading_exponent);
        let mid = 0.5 * (u0 + u1);
        let half = 0.5 * (u1 - u0);
        for (z, w) in zs.iter().zip(ws.iter()) {
            let u = mid + half * z;
            let s = u.powf(1.0 / ex);
            let t = singular_end + sign * s;
            let v = f(t) * s.powf(-sigma);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample { t });
            }
            acc += w * half * v / ex;
        }
    }
    // Sliver [0, floor] in u, one midpoint cell.
    let s_mid = (0.5 * floor).powf(1.0 / ex);
    let t_mid = singular_end + sign * s_mid;
    let v = f(t_mid) * s_mid.powf(-sigma);
    if !v.is_finite() {
        return Err(Error::NonFiniteSample { t: t_mid });
    }
    acc += floor * v / ex;
    Ok(acc)
}

/// Composite Gauss-Legendre on uniform panels for integrands smooth on all
/// of [a, b].
pub fn integrate_plain(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let gl = gauss_legendre(spec.nodes_per_panel);
    let (zs, ws) = (&gl.0, &gl.1);
    let mut acc = 0.0;
    let step = (b - a) / spec.panels as f64;
    for j in 0..spec.panels {
        let lo = a + step * j as f64;
        let mid = lo + 0.5 * step;
        let half = 0.5 * step;
        for (z, w) in zs.iter().zip(ws.iter()) {
            let t = mid + half * z;
            let v = f(t);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample { t });
            }
            acc += w * half * v;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gl_nodes_integrate_polynomials_exactly() {
        // n-point GL is exact through degree 2n - 1.
        let gl = gauss_legendre(5);
        let int: f64 =
            gl.0.iter()
                .zip(gl.1.iter())
                .map(|(x, w)| w * x.powi(8))
                .sum();
        assert_relative_eq!(int, 2.0 / 9.0, max_relative = 1e-13);
        let ws_sum: f64 = gl.1.iter().sum();
        assert_relative_eq!(ws_sum, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::default().validated().is_ok());
        assert!(QuadratureSpec {
            nodes_per_panel: 1,
            ..Default::default()
        }
        .validated()
        .is_err());
        assert!(QuadratureSpec {
            panels: 0,
            ..Default::default()
        }
        .validated()
        .is_err());
        assert!(QuadratureSpec {
            grading_exponent: 0.5,
            ..Default::default()
        }
        .validated()
        .is_err());
    }

    #[test]
    fn branch_integral_handles_pure_power() {
        // ∫_0^1 (1 - t)^(-1/2) / Gamma(1/2) dt = 2 / sqrt(pi); the
        // substitution makes the integrand constant so even one panel nails it.
        let k = Kernel::riemann_liouville(0.5).unwrap();
        let spec = QuadratureSpec {
            panels: 1,
            ..Default::default()
        };
        let v = kernel_branch_integral(&k, 1.0, 0.0, false, &mut |_| 1.0, &spec).unwrap();
        assert_relative_eq!(v, 2.0 / std::f64::consts::PI.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn branch_integral_cosine_reference() {
        // ∫_0^1 (1 - t)^(-1/2) cos(t) dt / Gamma(1/2) = 0.84605678672415291.
        let k = Kernel::riemann_liouville(0.5).unwrap();
        let v = kernel_branch_integral(
            &k,
            1.0,
            0.0,
            false,
            &mut |t: f64| t.cos(),
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert_relative_eq!(v, 0.846_056_786_724_152_9, max_relative = 1e-12);
    }

    #[test]
    fn panel_refinement_converges_monotonically() {
        let k = Kernel::riemann_liouville(0.25).unwrap();
        let reference = {
            let spec = QuadratureSpec {
                nodes_per_panel: 32,
                panels: 64,
                ..Default::default()
            };
            kernel_branch_integral(&k, 1.0, 0.0, false, &mut |t: f64| (3.0 * t).sin(), &spec)
                .unwrap()
        };
        let mut errs = Vec::new();
        for panels in [1, 2, 4, 8] {
            let spec = QuadratureSpec {
                nodes_per_panel: 6,
                panels,
                ..Default::default()
            };
            let v =
                kernel_branch_integral(&k, 1.0, 0.0, false, &mut |t: f64| (3.0 * t).sin(), &spec)
                    .unwrap();
            errs.push((v - reference).abs());
        }
        for w in errs.windows(2) {
            assert!(w[1] <= w[0] * 1.5, "errors did not trend down: {errs:?}");
        }
        assert!(errs.last().unwrap() < &1e-9, "errors: {errs:?}");
    }

    #[test]
    fn swapped_branch_matches_mirror() {
        // ∫_x^b k(t, x) f(t) dt with a difference kernel equals the mirrored
        // left-branch integral of f reflected about x.
        let k = Kernel::riemann_liouville(0.6).unwrap();
        let spec = QuadratureSpec::default();
        let x = 0.3;
        let b = 1.0;
        let right =
            kernel_branch_integral(&k, x, b, true, &mut |t: f64| (t * t).exp(), &spec).unwrap();
        let left = kernel_branch_integral(
            &k,
            x,
            x - (b - x),
            false,
            &mut |t: f64| {
                let m = 2.0 * x - t;
                (m * m).exp()
            },
            &spec,
        )
        .unwrap();
        assert_relative_eq!(right, left, max_relative = 1e-12);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let k = Kernel::constant_one();
        let r = kernel_branch_integral(
            &k,
            1.0,
            0.0,
            false,
            &mut |t: f64| 1.0 / (t - 0.5),
            &QuadratureSpec::default(),
        );
        // 1/(t - 0.5) is finite at every node; force a NaN instead.
        assert!(r.is_ok());
        let r2 = kernel_branch_integral(
            &k,
            1.0,
            0.0,
            false,
            &mut |t: f64| if t > 0.4 { f64::NAN } else { 1.0 },
            &QuadratureSpec::default(),
        );
        assert!(matches!(r2, Err(Error::NonFiniteSample { .. })));
    }

    #[test]
    fn endpoint_graded_handles_non_factorable_weight() {
        // ∫_0^1 (1 - t)^(-1/2) cos t dt = 1.4995966097139717, evaluated
        // through the path that cannot factor the weight out.
        let v = endpoint_graded_integral(
            &mut |t: f64| (1.0 - t).powf(-0.5) * t.cos(),
            1.0,
            0.0,
            -0.5,
            &QuadratureSpec {
                panels: 16,
                ..Default::default()
            },
        )
        .unwrap();
        assert_relative_eq!(v, 1.499_596_609_713_971_7, max_relative = 1e-9);
    }

    #[test]
    fn plain_integral_reference() {
        let v = integrate_plain(
            &mut |t: f64| (-t * t).exp(),
            0.0,
            2.0,
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert_relative_eq!(v, 0.882_081_390_762_421_7, max_relative = 1e-13);
    }

    #[test]
    fn variable_order_branch_matches_fixed_order() {
        let vo = Kernel::variable_order(|_, _| 0.5, (0.0, 1.0)).unwrap();
        let rl = Kernel::riemann_liouville(0.5).unwrap();
        let spec = QuadratureSpec::default();
        let mut f = |t: f64| (1.0 + t).sqrt();
        let a = kernel_branch_integral(&vo, 0.9, 0.1, false, &mut f, &spec).unwrap();
        let b = kernel_branch_integral(&rl, 0.9, 0.1, false, &mut f, &spec).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }
}
