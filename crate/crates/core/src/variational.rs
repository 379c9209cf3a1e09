//! Functional evaluation and stationarity residuals.
//!
//! The functional is the weighted integral J(y) = ∫_a^b w(t) F(bundle(t)) dt
//! with w(t) = k(b, t). Stationarity of J under the problem's boundary mode
//! produces, per component j:
//!
//! ```text
//! w ∂_y_j F
//!   - sum_i  A*_i [ w ∂F/∂(i-th derivative argument, comp j) ]
//!   + sum_k  K*_k [ w ∂F/∂(k-th integral argument, comp j) ]
//!   - d/dt ( w ∂F/∂y'_j )                                        = 0
//! ```
//!
//! where A*/K* run over the dual parameter sets. `el_residual` evaluates
//! that left-hand side; a trajectory is an extremal exactly when it
//! vanishes. For free-left problems the missing boundary value is replaced
//! by the natural condition evaluated by `natural_bc_residual`.

use crate::diff::richardson_derivative;
use crate::error::{Error, Result};
use crate::func::FunctionHandle;
use crate::lagrangian::{BoundaryMode, BundleArgs, LagrangianSpec, ProblemSpec, Slot};
use crate::ops::{a_op_fn, b_op, ibp_route, k_op, k_op_fn, two_sided_graded};
use crate::quad::{weighted_kernel_nodes, QuadratureSpec};
use crate::util::{interior_grid, SplitMix64};

/// Runs `body` with an infallible view of the fallible integrand `f`;
/// errors raised inside the integrand win over the body's own result.
pub(crate) fn with_pending<T>(
    body: impl FnOnce(&mut dyn FnMut(f64) -> f64) -> Result<T>,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<T> {
    let mut pending: Option<Error> = None;
    let mut wrapped = |x: f64| match f(x) {
        Ok(v) => v,
        Err(e) => {
            pending = Some(e);
            f64::NAN
        }
    };
    let out = body(&mut wrapped);
    match pending {
        Some(e) => Err(e),
        None => out,
    }
}

/// Fractional-derivative and fractional-integral argument values of y at t,
/// flattened arg-major as `BundleArgs` expects.
pub(crate) fn bundle_values(
    lag: &LagrangianSpec,
    y: &FunctionHandle,
    t: f64,
    inner: &QuadratureSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut v = Vec::with_capacity(lag.n_frac_derivs() * lag.dim());
    for op in lag.frac_derivs() {
        v.extend(b_op(&op.kernel, &op.pset, y, t, inner)?);
    }
    let mut w = Vec::with_capacity(lag.n_frac_ints() * lag.dim());
    for op in lag.frac_ints() {
        w.extend(k_op(&op.kernel, &op.pset, y, t, inner)?);
    }
    Ok((v, w))
}

fn require_trajectory(
    lag: &LagrangianSpec,
    interval: (f64, f64),
    y: &FunctionHandle,
) -> Result<()> {
    if y.dim() != lag.dim() {
        return Err(Error::Usage(format!(
            "trajectory has {} components, integrand expects {}",
            y.dim(),
            lag.dim()
        )));
    }
    if !y.covers(interval) {
        return Err(Error::Domain(format!(
            "trajectory domain {:?} does not cover [{}, {}]",
            y.domain(),
            interval.0,
            interval.1
        )));
    }
    Ok(())
}

/// The weighted integral of an integrand along y, shared by the objective
/// and the isoperimetric constraint.
pub(crate) fn weighted_integrand_value(
    lag: &LagrangianSpec,
    interval: (f64, f64),
    y: &FunctionHandle,
    quad: &QuadratureSpec,
) -> Result<f64> {
    require_trajectory(lag, interval, y)?;
    let (a, b) = interval;
    let inner = quad.inner();
    let nodes = weighted_kernel_nodes(lag.weight(), b, a, false, quad)?;
    let mut acc = 0.0;
    for (t, wq) in nodes {
        let (v, w) = bundle_values(lag, y, t, &inner)?;
        let yv = y.eval(t);
        let ypv = y.deriv(t);
        let fv = lag.eval(&BundleArgs {
            t,
            y: &yv,
            yp: &ypv,
            v: &v,
            w: &w,
        });
        if !fv.is_finite() {
            return Err(Error::NonFiniteSample { t });
        }
        acc += wq * fv;
    }
    Ok(acc)
}

/// J(y) = ∫_a^b w(t) F(bundle(t)) dt with the problem's weight kernel.
pub fn evaluate_functional(
    problem: &ProblemSpec,
    y: &FunctionHandle,
    quad: &QuadratureSpec,
) -> Result<f64> {
    weighted_integrand_value(problem.lagrangian(), problem.interval(), y, quad)
}

/// Value of the constraint functional I(y). Errors when the problem has no
/// isoperimetric constraint attached.
pub fn evaluate_constraint(
    problem: &ProblemSpec,
    y: &FunctionHandle,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let iso = problem
        .isoperimetric()
        .ok_or_else(|| Error::Usage("problem has no isoperimetric constraint attached".into()))?;
    weighted_integrand_value(&iso.integrand, problem.interval(), y, quad)
}

/// Partial derivative of the integrand at the given slot, with the bundle
/// arguments rebuilt at tau.
pub(crate) fn partial_along(
    lag: &LagrangianSpec,
    y: &FunctionHandle,
    slot: Slot,
    tau: f64,
    inner: &QuadratureSpec,
) -> Result<f64> {
    let (v, w) = bundle_values(lag, y, tau, inner)?;
    let yv = y.eval(tau);
    let ypv = y.deriv(tau);
    let p = lag.partial(
        slot,
        &BundleArgs {
            t: tau,
            y: &yv,
            yp: &ypv,
            v: &v,
            w: &w,
        },
    );
    if !p.is_finite() {
        return Err(Error::NonFiniteSample { t: tau });
    }
    Ok(p)
}

/// Stationarity residual of every component at one interior point, with an
/// explicit differentiation step (callers near the endpoints shrink it).
pub(crate) fn el_residual_at(
    problem: &ProblemSpec,
    y: &FunctionHandle,
    t: f64,
    h: f64,
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let lag = problem.lagrangian();
    let inner = quad.inner();
    let dim = lag.dim();
    let mut out = vec![0.0; dim];
    for c in 0..dim {
        let mut res = problem.weight_at(t) * partial_along(lag, y, Slot::Y(c), t, &inner)?;
        for (i, op) in lag.frac_derivs().iter().enumerate() {
            let dual = op.pset.dual();
            let slot = Slot::FracDeriv { arg: i, comp: c };
            res -= with_pending(
                |g| a_op_fn(&op.kernel, &dual, g, t, &inner, h),
                |tau| Ok(problem.weight_at(tau) * partial_along(lag, y, slot, tau, &inner)?),
            )?;
        }
        for (k, op) in lag.frac_ints().iter().enumerate() {
            let dual = op.pset.dual();
            let slot = Slot::FracInt { arg: k, comp: c };
            res += with_pending(
                |g| k_op_fn(&op.kernel, &dual, g, t, &inner),
                |tau| Ok(problem.weight_at(tau) * partial_along(lag, y, slot, tau, &inner)?),
            )?;
        }
        // Differentiated as a product: the weight need not be smooth enough
        // to pull its derivative out, and the integrand only grants first
        // partials.
        res -= with_pending(
            |g| Ok(richardson_derivative(g, t, h)),
            |tau| Ok(problem.weight_at(tau) * partial_along(lag, y, Slot::YPrime(c), tau, &inner)?),
        )?;
        out[c] = res;
    }
    for (c, r) in out.iter().enumerate() {
        if !r.is_finite() {
            return Err(Error::Domain(format!(
                "stationarity residual of component {c} is non-finite at t = {t}"
            )));
        }
    }
    Ok(out)
}

fn stencil_check(interval: (f64, f64), t: f64, h: f64) -> Result<()> {
    let (a, b) = interval;
    if t - a < h || b - t < h {
        return Err(Error::Domain(format!(
            "grid point {t} is within the differentiation stencil width {h} of an endpoint; \
             use interior points or a smaller diff_step"
        )));
    }
    Ok(())
}

/// Stationarity residual on a grid of interior points. Component-major:
/// `result[c][i]` is component c at `t_grid[i]`. Grid points must keep at
/// least the problem's diff_step away from both endpoints.
pub fn el_residual(
    problem: &ProblemSpec,
    y: &FunctionHandle,
    t_grid: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<Vec<f64>>> {
    require_trajectory(problem.lagrangian(), problem.interval(), y)?;
    let h = problem.diff_step();
    for &t in t_grid {
        stencil_check(problem.interval(), t, h)?;
    }
    let dim = problem.lagrangian().dim();
    let mut out = vec![Vec::with_capacity(t_grid.len()); dim];
    for &t in t_grid {
        let r = el_residual_at(problem, y, t, h, quad)?;
        for (c, v) in r.into_iter().enumerate() {
            out[c].push(v);
        }
    }
    Ok(out)
}

/// Default diagnostic grid: 32 points clustered toward (but clear of) the
/// endpoints, inset by twice the differentiation step.
pub fn default_residual_grid(problem: &ProblemSpec) -> Vec<f64> {
    let (a, b) = problem.interval();
    let h = problem.diff_step();
    interior_grid(a + 2.0 * h, b - 2.0 * h, 32)
}

/// Root-mean-square of the stationarity residual over the default grid,
/// across all components.
pub fn el_residual_l2(
    problem: &ProblemSpec,
    y: &FunctionHandle,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let grid = default_residual_grid(problem);
    let rows = el_residual(problem, y, &grid, quad)?;
    let count = rows.len() * grid.len();
    let sum: f64 = rows.iter().flatten().map(|r| r * r).sum();
    Ok((sum / count as f64).sqrt())
}

/// The endpoint condition that replaces the missing left boundary value:
///
/// ```text
/// w(a) ∂F/∂y'_j (a) + sum_i K*_i [ w ∂F/∂(i-th derivative argument, j) ](a)
/// ```
///
/// per component j; zero along extremals of a free-left problem.
pub fn natural_bc_residual(
    problem: &ProblemSpec,
    y: &FunctionHandle,
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    if problem.boundary_mode() != BoundaryMode::FreeLeft {
        return Err(Error::Usage(
            "natural boundary residual only applies to free-left problems".into(),
        ));
    }
    require_trajectory(problem.lagrangian(), problem.interval(), y)?;
    let lag = problem.lagrangian();
    let inner = quad.inner();
    let a = problem.interval().0;
    let mut out = vec![0.0; lag.dim()];
    for c in 0..lag.dim() {
        let mut r = problem.weight_at(a) * partial_along(lag, y, Slot::YPrime(c), a, &inner)?;
        for (i, op) in lag.frac_derivs().iter().enumerate() {
            let dual = op.pset.dual();
            let slot = Slot::FracDeriv { arg: i, comp: c };
            r += with_pending(
                |g| k_op_fn(&op.kernel, &dual, g, a, &inner),
                |tau| Ok(problem.weight_at(tau) * partial_along(lag, y, slot, tau, &inner)?),
            )?;
        }
        out[c] = r;
    }
    Ok(out)
}

/// What `validate_problem` found. `findings` are actual problems; `notes`
/// record which evaluation routes and layout the checks exercised.
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub findings: Vec<String>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Central finite difference of the integrand with one bundle slot
/// displaced, against which the supplied partials are checked.
fn probe_partial(
    lag: &LagrangianSpec,
    slot: Slot,
    t: f64,
    y: &[f64],
    yp: &[f64],
    v: &[f64],
    w: &[f64],
) -> (f64, f64) {
    let eval_displaced = |delta: f64| {
        let mut yv = y.to_vec();
        let mut ypv = yp.to_vec();
        let mut vv = v.to_vec();
        let mut wv = w.to_vec();
        let dim = lag.dim();
        match slot {
            Slot::Time => unreachable!("time slot carries no partial"),
            Slot::Y(c) => yv[c] += delta,
            Slot::YPrime(c) => ypv[c] += delta,
            Slot::FracDeriv { arg, comp } => vv[arg * dim + comp] += delta,
            Slot::FracInt { arg, comp } => wv[arg * dim + comp] += delta,
        }
        lag.eval(&BundleArgs {
            t,
            y: &yv,
            yp: &ypv,
            v: &vv,
            w: &wv,
        })
    };
    let base = match slot {
        Slot::Y(c) => y[c],
        Slot::YPrime(c) => yp[c],
        Slot::FracDeriv { arg, comp } => v[arg * lag.dim() + comp],
        Slot::FracInt { arg, comp } => w[arg * lag.dim() + comp],
        Slot::Time => 0.0,
    };
    let h = 1e-6 * (1.0 + base.abs());
    let fd = (eval_displaced(h) - eval_displaced(-h)) / (2.0 * h);
    let analytic = lag.partial(slot, &BundleArgs { t, y, yp, v, w });
    (analytic, fd)
}

fn gradient_findings(
    lag: &LagrangianSpec,
    interval: (f64, f64),
    label: &str,
    findings: &mut Vec<String>,
    notes: &mut Vec<String>,
) {
    let (a, b) = interval;
    let dim = lag.dim();
    let (n, m) = (lag.n_frac_derivs(), lag.n_frac_ints());
    let mut rng = SplitMix64::new(0xc0ff_ee11);
    let mut bad: Vec<usize> = Vec::new();
    let probes = 4;
    for _ in 0..probes {
        let t = rng.uniform(a + 0.1 * (b - a), b - 0.1 * (b - a));
        let y: Vec<f64> = (0..dim).map(|_| rng.uniform(-0.9, 0.9)).collect();
        let yp: Vec<f64> = (0..dim).map(|_| rng.uniform(-0.9, 0.9)).collect();
        let v: Vec<f64> = (0..n * dim).map(|_| rng.uniform(-0.9, 0.9)).collect();
        let w: Vec<f64> = (0..m * dim).map(|_| rng.uniform(-0.9, 0.9)).collect();
        for j in 2..=lag.max_flat_index() {
            if bad.contains(&j) {
                continue;
            }
            let slot = crate::lagrangian::slot_of(j, dim, n, m).expect("index inside layout");
            let (analytic, fd) = probe_partial(lag, slot, t, &y, &yp, &v, &w);
            if !analytic.is_finite() || !fd.is_finite() {
                bad.push(j);
                findings.push(format!(
                    "{label}partial j={j} or the integrand is non-finite at a probe point"
                ));
                continue;
            }
            let scale = 1.0 + analytic.abs().max(fd.abs());
            if (analytic - fd).abs() > 1e-5 * scale {
                bad.push(j);
                findings.push(format!(
                    "{label}partial j={j} disagrees with finite difference \
                     ({analytic:.6e} vs {fd:.6e})"
                ));
            }
        }
    }
    if bad.is_empty() {
        notes.push(format!(
            "{label}partials match central differences at {probes} random bundle probes"
        ));
    }
}

/// Reports what is checkable about a problem before solving it: whether
/// each fractional argument's kernel admits an integration-by-parts route
/// (which the stationarity system relies on), whether the supplied partial
/// derivatives match finite differences of the integrand, and whether the
/// flat index layout is self-consistent. Findings list problems; a clean
/// report has empty findings.
pub fn validate_problem(problem: &ProblemSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let lag = problem.lagrangian();

    for (role, ops) in [
        ("derivative argument", lag.frac_derivs()),
        ("integral argument", lag.frac_ints()),
    ] {
        for (i, op) in ops.iter().enumerate() {
            let route = ibp_route(&op.kernel);
            if route == "unsupported" {
                report.findings.push(format!(
                    "no integration-by-parts route available for {role} {i} \
                     ({} kernel)",
                    op.kernel.family_name()
                ));
            } else {
                report.notes.push(format!(
                    "{role} {i} ({} kernel): {route} route",
                    op.kernel.family_name()
                ));
            }
        }
    }
    report.notes.push(format!(
        "weight kernel {} (singularity exponent {})",
        lag.weight().family_name(),
        lag.weight().singularity_exponent()
    ));

    gradient_findings(
        lag,
        problem.interval(),
        "",
        &mut report.findings,
        &mut report.notes,
    );
    if let Some(iso) = problem.isoperimetric() {
        gradient_findings(
            &iso.integrand,
            problem.interval(),
            "constraint ",
            &mut report.findings,
            &mut report.notes,
        );
    }

    let (dim, n, m) = (lag.dim(), lag.n_frac_derivs(), lag.n_frac_ints());
    let top = lag.max_flat_index();
    let round_trips = (1..=top).all(|j| {
        crate::lagrangian::slot_of(j, dim, n, m)
            .map(|s| crate::lagrangian::flat_index(s, dim, n) == j)
            .unwrap_or(false)
    });
    if round_trips {
        report.notes.push(format!(
            "index layout covers 1..={top} for {dim} components, \
             {n} derivative and {m} integral arguments"
        ));
    } else {
        report
            .findings
            .push("index layout does not round trip over its own range".into());
    }
    report
}

/// Two independent estimates of the first variation of J at y along a
/// direction, and their gap. `difference_quotient` perturbs the trajectory
/// and re-evaluates the functional; `pairing` integrates the direction
/// against the stationarity residual. Agreement cross-checks the residual's
/// construction end to end.
#[derive(Clone, Copy, Debug)]
pub struct FirstVariationReport {
    pub difference_quotient: f64,
    pub pairing: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
}

fn shifted(y: &FunctionHandle, eta: &FunctionHandle, scale: f64) -> Result<FunctionHandle> {
    let (ya, yb) = (y.clone(), y.clone());
    let (ea, eb) = (eta.clone(), eta.clone());
    FunctionHandle::vector_with_deriv(
        y.domain(),
        y.dim(),
        move |t| {
            ya.eval(t)
                .iter()
                .zip(ea.eval(t).iter())
                .map(|(a, b)| a + scale * b)
                .collect()
        },
        move |t| {
            yb.deriv(t)
                .iter()
                .zip(eb.deriv(t).iter())
                .map(|(a, b)| a + scale * b)
                .collect()
        },
    )
}

/// Compares (J(y + εη) − J(y − εη)) / 2ε against ∫ Σ_j η_j·residual_j dt.
/// The direction η must vanish at both endpoints so no boundary terms are
/// left behind.
pub fn first_variation_check(
    problem: &ProblemSpec,
    y: &FunctionHandle,
    eta: &FunctionHandle,
    epsilon: f64,
    quad: &QuadratureSpec,
) -> Result<FirstVariationReport> {
    require_trajectory(problem.lagrangian(), problem.interval(), y)?;
    require_trajectory(problem.lagrangian(), problem.interval(), eta)?;
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Usage(format!(
            "perturbation size must be positive and finite, got {epsilon}"
        )));
    }
    let (a, b) = problem.interval();
    for endpoint in [a, b] {
        let worst = eta
            .eval(endpoint)
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if worst > 1e-9 {
            return Err(Error::Usage(format!(
                "direction must vanish at the endpoints; |eta({endpoint})| = {worst:.3e}"
            )));
        }
    }

    let jp = evaluate_functional(problem, &shifted(y, eta, epsilon)?, quad)?;
    let jm = evaluate_functional(problem, &shifted(y, eta, -epsilon)?, quad)?;
    let difference_quotient = (jp - jm) / (2.0 * epsilon);

    let h0 = problem.diff_step();
    let pairing = two_sided_graded(
        &mut |t: f64| {
            // Shrink the stencil near the endpoints so every sample stays
            // inside the interval; the vanishing direction suppresses the
            // extra differentiation noise there.
            let h = h0.min(0.1 * (t - a)).min(0.1 * (b - t));
            let r = el_residual_at(problem, y, t, h, quad)?;
            let e = eta.eval(t);
            Ok(r.iter().zip(e.iter()).map(|(ri, ei)| ri * ei).sum())
        },
        a,
        b,
        0.0,
        quad,
    )?;

    let abs_gap = (difference_quotient - pairing).abs();
    let scale = difference_quotient.abs().max(pairing.abs()).max(1e-12);
    Ok(FirstVariationReport {
        difference_quotient,
        pairing,
        abs_gap,
        rel_gap: abs_gap / scale,
    })
}
