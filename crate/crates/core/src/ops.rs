//! The side-weighted kernel integral and the two derivative flavors built
//! from it: derivative-inside (applied to f' before integrating) and
//! derivative-outside (differentiating the integral). Also the pairing
//! checks that move an operator from one factor of a product integral to
//! the other, which the validation and variational layers lean on.

use crate::error::{Error, Result};
use crate::func::{DerivSource, FunctionHandle};
use crate::kernel::{Kernel, ParamSet};
use crate::quad::{
    endpoint_graded_integral, kernel_branch_integral, weighted_kernel_nodes, QuadratureSpec,
};

/// Stencil width for the derivative-outside operator. The integral values
/// carry quadrature noise around 1e-10, so a step much below 1e-3 of the
/// interval trades truncation error for noise amplification.
pub fn default_diff_step(ps: &ParamSet) -> f64 {
    1e-3 * (ps.b - ps.a)
}

fn eval_point_checks(kernel: &Kernel, ps: &ParamSet, x: f64) -> Result<()> {
    if kernel.requires_positive_domain() && ps.a <= 0.0 {
        return Err(Error::Domain(format!(
            "{} kernel needs a strictly positive interval, got a = {}",
            kernel.family_name(),
            ps.a
        )));
    }
    if !(x.is_finite() && x >= ps.a && x <= ps.b) {
        return Err(Error::Domain(format!(
            "evaluation point {x} lies outside [{}, {}]",
            ps.a, ps.b
        )));
    }
    Ok(())
}

fn require_cover(f: &FunctionHandle, ps: &ParamSet) -> Result<()> {
    if !f.covers((ps.a, ps.b)) {
        let (lo, hi) = f.domain();
        return Err(Error::Domain(format!(
            "function domain [{lo}, {hi}] does not cover the operator interval [{}, {}]",
            ps.a, ps.b
        )));
    }
    Ok(())
}

fn require_scalar(f: &FunctionHandle, role: &str) -> Result<()> {
    if f.dim() != 1 {
        return Err(Error::Usage(format!(
            "{role} must be scalar for the pairing checks, got dimension {}",
            f.dim()
        )));
    }
    Ok(())
}

fn accumulate_branch(
    out: &mut [f64],
    kernel: &Kernel,
    weight: f64,
    x: f64,
    other: f64,
    swap: bool,
    spec: &QuadratureSpec,
    f: &dyn Fn(f64) -> Vec<f64>,
) -> Result<()> {
    if weight == 0.0 {
        return Ok(());
    }
    for (t, w) in weighted_kernel_nodes(kernel, x, other, swap, spec)? {
        let v = f(t);
        for (acc, vi) in out.iter_mut().zip(v.iter()) {
            if !vi.is_finite() {
                return Err(Error::NonFiniteSample { t });
            }
            *acc += weight * w * vi;
        }
    }
    Ok(())
}

/// p-weighted integral of k(x, t) f(t) over [a, x] plus q-weighted integral
/// of k(t, x) f(t) over [x, b], componentwise on vector-valued f. At x = a
/// the left branch is empty, at x = b the right one.
pub fn k_op(
    kernel: &Kernel,
    ps: &ParamSet,
    f: &FunctionHandle,
    x: f64,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    eval_point_checks(kernel, ps, x)?;
    require_cover(f, ps)?;
    let mut out = vec![0.0; f.dim()];
    accumulate_branch(&mut out, kernel, ps.p, x, ps.a, false, spec, &|t| f.eval(t))?;
    accumulate_branch(&mut out, kernel, ps.q, x, ps.b, true, spec, &|t| f.eval(t))?;
    Ok(out)
}

/// Derivative-inside operator: the kernel integral applied to f'. The
/// caller passes the complementary-order kernel; for order beta that means
/// a kernel realizing order 1 - beta. Falls back to finite-difference
/// derivatives when f carries none (see `FunctionHandle::deriv_source`;
/// tolerance-critical call sites surface that flag in their reports).
pub fn b_op(
    kernel_comp: &Kernel,
    ps: &ParamSet,
    f: &FunctionHandle,
    x: f64,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    eval_point_checks(kernel_comp, ps, x)?;
    require_cover(f, ps)?;
    let mut out = vec![0.0; f.dim()];
    accumulate_branch(&mut out, kernel_comp, ps.p, x, ps.a, false, spec, &|t| {
        f.deriv(t)
    })?;
    accumulate_branch(&mut out, kernel_comp, ps.q, x, ps.b, true, spec, &|t| {
        f.deriv(t)
    })?;
    Ok(out)
}

fn diff_margin_checks(ps: &ParamSet, x: f64, diff_step: f64) -> Result<()> {
    if !(diff_step.is_finite() && diff_step > 0.0) {
        return Err(Error::Usage(format!(
            "diff_step must be a positive real, got {diff_step}"
        )));
    }
    if !(x.is_finite() && x - ps.a >= diff_step && ps.b - x >= diff_step) {
        return Err(Error::Domain(format!(
            "x = {x} is closer than diff_step = {diff_step} to an endpoint of [{}, {}]; \
             pass a smaller diff_step or a more interior point",
            ps.a, ps.b
        )));
    }
    Ok(())
}

/// Derivative-outside operator: Richardson-extrapolated central difference
/// of the kernel integral, componentwise. As with `b_op` the caller passes
/// the complementary-order kernel. Requires x at least diff_step away from
/// both endpoints so the stencil stays inside [a, b].
pub fn a_op(
    kernel_comp: &Kernel,
    ps: &ParamSet,
    f: &FunctionHandle,
    x: f64,
    spec: &QuadratureSpec,
    diff_step: f64,
) -> Result<Vec<f64>> {
    diff_margin_checks(ps, x, diff_step)?;
    let h = diff_step;
    let gp = k_op(kernel_comp, ps, f, x + h, spec)?;
    let gm = k_op(kernel_comp, ps, f, x - h, spec)?;
    let gph = k_op(kernel_comp, ps, f, x + 0.5 * h, spec)?;
    let gmh = k_op(kernel_comp, ps, f, x - 0.5 * h, spec)?;
    Ok((0..gp.len())
        .map(|j| {
            let d1 = (gp[j] - gm[j]) / (2.0 * h);
            let d2 = (gph[j] - gmh[j]) / h;
            (4.0 * d2 - d1) / 3.0
        })
        .collect())
}

/// Scalar-closure core of `k_op` shared by the variational layer, which
/// works on basis coefficients rather than trajectory handles.
pub(crate) fn k_op_fn(
    kernel: &Kernel,
    ps: &ParamSet,
    f: &mut dyn FnMut(f64) -> f64,
    x: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    eval_point_checks(kernel, ps, x)?;
    let mut acc = 0.0;
    if ps.p != 0.0 {
        acc += ps.p * kernel_branch_integral(kernel, x, ps.a, false, f, spec)?;
    }
    if ps.q != 0.0 {
        acc += ps.q * kernel_branch_integral(kernel, x, ps.b, true, f, spec)?;
    }
    Ok(acc)
}

/// Scalar-closure core of `a_op`.
pub(crate) fn a_op_fn(
    kernel_comp: &Kernel,
    ps: &ParamSet,
    f: &mut dyn FnMut(f64) -> f64,
    x: f64,
    spec: &QuadratureSpec,
    diff_step: f64,
) -> Result<f64> {
    diff_margin_checks(ps, x, diff_step)?;
    let h = diff_step;
    let mut g = |y: f64| k_op_fn(kernel_comp, ps, f, y, spec);
    let gp = g(x + h)?;
    let gm = g(x - h)?;
    let gph = g(x + 0.5 * h)?;
    let gmh = g(x - 0.5 * h)?;
    let d1 = (gp - gm) / (2.0 * h);
    let d2 = (gph - gmh) / h;
    Ok((4.0 * d2 - d1) / 3.0)
}

/// Result of one pairing check. `route` records which integrability fact
/// backs the identity for the kernel at hand: "square_integrable" when the
/// kernel is square-integrable near its singularity, "difference_l1" when
/// it is merely integrable but depends only on x - t, and "unsupported"
/// when neither holds (the check still runs; the validation layer treats
/// that route as a finding). A "+fd_derivative" suffix marks that a
/// finite-difference fallback supplied a required derivative.
#[derive(Clone, Debug)]
pub struct IbpReport {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_residual: f64,
    pub route: String,
}

/// Integrability route backing the pairing identity for this kernel.
pub fn ibp_route(kernel: &Kernel) -> &'static str {
    let adm = kernel.admissibility();
    if adm.square_integrable {
        "square_integrable"
    } else if adm.difference_kernel {
        "difference_l1"
    } else {
        "unsupported"
    }
}

/// Integrate f over [singular_end, other_end] where f may behave like
/// |t - singular_end|^sigma, propagating errors from a fallible integrand.
fn graded_fallible(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    singular_end: f64,
    other_end: f64,
    sigma: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let mut pending: Option<Error> = None;
    let mut wrapped = |x: f64| match f(x) {
        Ok(v) => v,
        Err(e) => {
            pending = Some(e);
            f64::NAN
        }
    };
    let out = endpoint_graded_integral(&mut wrapped, singular_end, other_end, sigma, spec);
    match pending {
        Some(e) => Err(e),
        None => out,
    }
}

/// Integral over [a, b] graded toward both endpoints, for integrands with
/// fractional-power behavior (exponent sigma, possibly 0) at either end.
pub(crate) fn two_sided_graded(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    sigma: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let left = graded_fallible(f, a, m, sigma, spec)?;
    let right = graded_fallible(f, b, m, sigma, spec)?;
    Ok(left + right)
}

/// Checks that the kernel integral can be moved across a product integral
/// by swapping the side weights: the integral of g times the operator at f
/// against the integral of f times the dual-weighted operator at g. The two
/// sides use independent outer quadratures over [a, b].
pub fn check_ibp_k(
    kernel: &Kernel,
    ps: &ParamSet,
    f: &FunctionHandle,
    g: &FunctionHandle,
    spec: &QuadratureSpec,
) -> Result<IbpReport> {
    require_scalar(f, "f")?;
    require_scalar(g, "g")?;
    require_cover(f, ps)?;
    require_cover(g, ps)?;
    let inner = spec.inner();
    let dual = ps.dual();
    let lhs = two_sided_graded(
        &mut |x| Ok(g.eval_scalar(x) * k_op_fn(kernel, ps, &mut |t| f.eval_scalar(t), x, &inner)?),
        ps.a,
        ps.b,
        0.0,
        spec,
    )?;
    let rhs = two_sided_graded(
        &mut |x| {
            Ok(f.eval_scalar(x) * k_op_fn(kernel, &dual, &mut |t| g.eval_scalar(t), x, &inner)?)
        },
        ps.a,
        ps.b,
        0.0,
        spec,
    )?;
    Ok(IbpReport {
        lhs,
        rhs,
        abs_residual: (lhs - rhs).abs(),
        route: ibp_route(kernel).to_string(),
    })
}

/// Pairing check for the derivative-inside operator: the integral of g
/// times the derivative-inside operator at f equals a boundary bracket of
/// f times the dual kernel integral of g, minus the integral of f times
/// the dual derivative-outside operator at g. The derivative-outside
/// factor blows up like |x - endpoint|^sigma at the ends, so that term is
/// integrated on a mesh graded for exactly that exponent, with the stencil
/// width shrunk near the endpoints to keep it inside [a, b].
pub fn check_ibp_b(
    kernel_comp: &Kernel,
    ps: &ParamSet,
    f: &FunctionHandle,
    g: &FunctionHandle,
    spec: &QuadratureSpec,
) -> Result<IbpReport> {
    require_scalar(f, "f")?;
    require_scalar(g, "g")?;
    require_cover(f, ps)?;
    require_cover(g, ps)?;
    let inner = spec.inner();
    let dual = ps.dual();
    let h0 = default_diff_step(ps);

    let lhs = two_sided_graded(
        &mut |x| {
            Ok(g.eval_scalar(x) * k_op_fn(kernel_comp, ps, &mut |t| f.deriv_scalar(t), x, &inner)?)
        },
        ps.a,
        ps.b,
        0.0,
        spec,
    )?;

    let k_dual_g = |x: f64| k_op_fn(kernel_comp, &dual, &mut |t| g.eval_scalar(t), x, spec);
    let boundary = f.eval_scalar(ps.b) * k_dual_g(ps.b)? - f.eval_scalar(ps.a) * k_dual_g(ps.a)?;

    let sigma = kernel_comp.singularity_exponent();
    let a_term = two_sided_graded(
        &mut |x| {
            let h = h0.min(0.1 * (x - ps.a)).min(0.1 * (ps.b - x));
            let a = a_op_fn(kernel_comp, &dual, &mut |t| g.eval_scalar(t), x, &inner, h)?;
            Ok(f.eval_scalar(x) * a)
        },
        ps.a,
        ps.b,
        sigma,
        spec,
    )?;

    let rhs = boundary - a_term;
    let mut route = ibp_route(kernel_comp).to_string();
    if f.deriv_source() == DerivSource::FiniteDifference {
        route.push_str("+fd_derivative");
    }
    Ok(IbpReport {
        lhs,
        rhs,
        abs_residual: (lhs - rhs).abs(),
        route,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma;
    use approx::assert_relative_eq;

    fn unit() -> ParamSet {
        ParamSet::left(0.0, 1.0).unwrap()
    }

    fn handle(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> FunctionHandle {
        FunctionHandle::scalar((0.0, 1.0), f).unwrap()
    }

    #[test]
    fn left_integral_of_one_has_closed_form() {
        // Order 1/2 integral of 1 at x: x^(1/2) / Gamma(3/2).
        let k = Kernel::riemann_liouville(0.5).unwrap();
        let v = k_op(
            &k,
            &unit(),
            &handle(|_| 1.0),
            0.25,
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert_relative_eq!(v[0], 0.564_189_583_547_756_3, max_relative = 1e-10);
    }

    #[test]
    fn zero_function_maps_to_zero() {
        let k = Kernel::riemann_liouville(0.3).unwrap();
        let ps = ParamSet::new(0.0, 1.0, 0.4, 0.6).unwrap();
        let v = k_op(&k, &ps, &handle(|_| 0.0), 0.37, &QuadratureSpec::default()).unwrap();
        assert_eq!(v[0], 0.0);
    }

    #[test]
    fn constant_kernel_reduces_to_plain_integral() {
        let k = Kernel::constant_one();
        let v = k_op(&k, &unit(), &handle(|t| t), 1.0, &QuadratureSpec::default()).unwrap();
        assert_relative_eq!(v[0], 0.5, max_relative = 1e-12);
    }

    #[test]
    fn derivative_inside_of_identity() {
        // Order-1/2 derivative-inside of t at 1: 1 / Gamma(3/2) = 2/sqrt(pi).
        let k = Kernel::riemann_liouville(0.5).unwrap();
        let f = FunctionHandle::scalar_with_deriv((0.0, 1.0), |t| t, |_| 1.0).unwrap();
        let v = b_op(&k, &unit(), &f, 1.0, &QuadratureSpec::default()).unwrap();
        assert_relative_eq!(v[0], std::f64::consts::FRAC_2_SQRT_PI, max_relative = 1e-10);
    }

    #[test]
    fn derivative_inside_of_square() {
        // Gamma(3) / Gamma(5/2) at t = 1.
        let k = Kernel::riemann_liouville(0.5).unwrap();
        let f = FunctionHandle::scalar_with_deriv((0.0, 1.0), |t| t * t, |t| 2.0 * t).unwrap();
        let v = b_op(&k, &unit(), &f, 1.0, &QuadratureSpec::default()).unwrap();
        assert_relative_eq!(v[0], 1.504_505_556_127_350_2, max_relative = 1e-10);
    }

    #[test]
    fn derivative_inside_kills_constants() {
        let k = Kernel::riemann_liouville(0.5).unwrap();
        let f = FunctionHandle::scalar_with_deriv((0.0, 1.0), |_| 3.25, |_| 0.0).unwrap();
        let v = b_op(&k, &unit(), &f, 0.7, &QuadratureSpec::default()).unwrap();
        assert_eq!(v[0], 0.0);

        // Without the analytic derivative the fallback differences still
        // see a constant, so the result stays at roundoff level.
        let v_fd = b_op(
            &k,
            &unit(),
            &handle(|_| 3.25),
            0.7,
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!(v_fd[0].abs() < 1e-9);
    }

    #[test]
    fn derivative_outside_of_identity() {
        // Order-1/2 derivative of t: t^(1/2) / Gamma(3/2).
        let k = Kernel::riemann_liouville(0.5).unwrap();
        let f = handle(|t| t);
        let v = a_op(&k, &unit(), &f, 0.64, &QuadratureSpec::default(), 1e-3).unwrap();
        assert_relative_eq!(v[0], 0.8 / gamma(1.5), max_relative = 1e-7);
    }

    #[test]
    fn derivative_outside_of_one_near_right_end() {
        // Order-1/2 derivative of 1: t^(-1/2) / Gamma(1/2), sampled at the
        // most interior point the stencil allows.
        let k = Kernel::riemann_liouville(0.5).unwrap();
        let x = 1.0 - 1e-3;
        let v = a_op(
            &k,
            &unit(),
            &handle(|_| 1.0),
            x,
            &QuadratureSpec::default(),
            1e-3,
        )
        .unwrap();
        assert_relative_eq!(v[0], x.powf(-0.5) / gamma(0.5), max_relative = 1e-6);
        assert!((v[0] - 0.564_189_6).abs() < 1e-3);
    }

    #[test]
    fn derivative_outside_of_zero() {
        let k = Kernel::riemann_liouville(0.5).unwrap();
        let v = a_op(
            &k,
            &unit(),
            &handle(|_| 0.0),
            0.5,
            &QuadratureSpec::default(),
            1e-3,
        )
        .unwrap();
        assert_eq!(v[0], 0.0);
    }

    #[test]
    fn derivative_outside_enforces_stencil_margin() {
        let k = Kernel::riemann_liouville(0.5).unwrap();
        let f = handle(|t| t);
        let spec = QuadratureSpec::default();
        assert!(matches!(
            a_op(&k, &unit(), &f, 0.9995, &spec, 1e-3),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            a_op(&k, &unit(), &f, 0.0, &spec, 1e-3),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            a_op(&k, &unit(), &f, 0.5, &spec, -1.0),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn evaluation_point_must_lie_in_interval() {
        let k = Kernel::riemann_liouville(0.5).unwrap();
        let r = k_op(
            &k,
            &unit(),
            &handle(|_| 1.0),
            1.5,
            &QuadratureSpec::default(),
        );
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn log_kernel_rejects_nonpositive_interval() {
        let k = Kernel::hadamard(0.5).unwrap();
        let r = k_op(
            &k,
            &unit(),
            &handle(|_| 1.0),
            0.5,
            &QuadratureSpec::default(),
        );
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    fn ibp_spec() -> QuadratureSpec {
        QuadratureSpec {
            panels: 16,
            ..Default::default()
        }
    }

    #[test]
    fn pairing_check_on_power_kernel() {
        let k = Kernel::riemann_liouville(0.5).unwrap();
        let f = handle(|t| t);
        let g = handle(|t| t * t);
        let r = check_ibp_k(&k, &unit(), &f, &g, &ibp_spec()).unwrap();
        assert!(r.abs_residual <= 1e-6, "residual {}", r.abs_residual);
        // At order exactly 1/2 the squared kernel is ~1/s, so the pairing
        // rests on the difference-kernel route.
        assert_eq!(r.route, "difference_l1");
    }

    #[test]
    fn pairing_check_zero_function() {
        let k = Kernel::riemann_liouville(0.5).unwrap();
        let r = check_ibp_k(
            &k,
            &unit(),
            &handle(|_| 0.0),
            &handle(|t| t.cos()),
            &ibp_spec(),
        )
        .unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs, 0.0);
    }

    #[test]
    fn pairing_check_smooth_kernel_mixed_sides() {
        let k = Kernel::exponential(0.5).unwrap();
        let ps = ParamSet::new(0.0, 1.0, 0.3, 0.7).unwrap();
        let f = handle(|t| t.sin());
        let g = handle(|t| t.cos());
        let r = check_ibp_k(&k, &ps, &f, &g, &ibp_spec()).unwrap();
        assert!(r.abs_residual <= 1e-8, "residual {}", r.abs_residual);
    }

    #[test]
    fn derivative_pairing_on_power_kernel() {
        let k = Kernel::riemann_liouville(0.5).unwrap();
        let f = FunctionHandle::scalar_with_deriv((0.0, 1.0), |t| t, |_| 1.0).unwrap();
        let g = handle(|t| t * t);
        let r = check_ibp_b(&k, &unit(), &f, &g, &ibp_spec()).unwrap();
        assert!(r.abs_residual <= 1e-5, "residual {}", r.abs_residual);
        assert_eq!(r.route, "difference_l1");
    }

    #[test]
    fn derivative_pairing_with_constant_f_telescopes() {
        let k = Kernel::riemann_liouville(0.5).unwrap();
        let f = FunctionHandle::scalar_with_deriv((0.0, 1.0), |_| 3.0, |_| 0.0).unwrap();
        let g = handle(|t| t.cos());
        let r = check_ibp_b(&k, &unit(), &f, &g, &ibp_spec()).unwrap();
        assert!(r.lhs.abs() <= 1e-5, "lhs {}", r.lhs);
        assert!(r.rhs.abs() <= 1e-5, "rhs {}", r.rhs);
    }

    #[test]
    fn derivative_pairing_zero_g() {
        let k = Kernel::riemann_liouville(0.5).unwrap();
        let f = FunctionHandle::scalar_with_deriv((0.0, 1.0), |t| t, |_| 1.0).unwrap();
        let r = check_ibp_b(&k, &unit(), &f, &handle(|_| 0.0), &ibp_spec()).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs, 0.0);
    }

    #[test]
    fn routes_reflect_kernel_integrability() {
        assert_eq!(
            ibp_route(&Kernel::riemann_liouville(0.7).unwrap()),
            "square_integrable"
        );
        assert_eq!(
            ibp_route(&Kernel::riemann_liouville(0.3).unwrap()),
            "difference_l1"
        );
        assert_eq!(ibp_route(&Kernel::hadamard(0.3).unwrap()), "unsupported");
        assert_eq!(ibp_route(&Kernel::constant_one()), "square_integrable");

        // Missing analytic derivative on f is surfaced in the route.
        let k = Kernel::riemann_liouville(0.5).unwrap();
        let f = handle(|t| t);
        let g = handle(|t| t * t);
        let r = check_ibp_b(&k, &unit(), &f, &g, &ibp_spec()).unwrap();
        assert_eq!(r.route, "difference_l1+fd_derivative");
    }
}
