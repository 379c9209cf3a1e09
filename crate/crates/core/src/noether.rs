//! Invariance checks and conservation-law residuals.
//!
//! A transformation family perturbs trajectories as y + eps xi(t, y). When
//! the functional does not see the perturbation (to first order, on every
//! subinterval), its extremals carry a conserved combination of the
//! integrand's partials. This module quantifies all three stages: the
//! invariance defect itself, the pointwise identity that invariance forces
//! on the integrand, and the conservation-law residual along trajectories.

use std::sync::Arc;

use crate::diff::richardson_derivative;
use crate::error::{Error, Result};
use crate::func::FunctionHandle;
use crate::kernel::{Kernel, ParamSet};
use crate::lagrangian::{ProblemSpec, Slot};
use crate::ops::{a_op, b_op, k_op, k_op_fn};
use crate::quad::{weighted_kernel_nodes, QuadratureSpec};
use crate::util::{relative_spread, SplitMix64};
use crate::variational::{bundle_values, partial_along, with_pending};

type XiFn = dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync;
type XiDotFn = dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync;

/// A one-parameter family of trajectory perturbations y + eps xi(t, y).
/// The total time derivative of xi along a trajectory can be supplied
/// analytically; otherwise it falls back to finite differences of
/// t -> xi(t, y(t)).
#[derive(Clone)]
pub struct TransformationSpec {
    dim: usize,
    xi: Arc<XiFn>,
    dxi: Option<Arc<XiDotFn>>,
}

impl std::fmt::Debug for TransformationSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformationSpec")
            .field("dim", &self.dim)
            .field("analytic_rate", &self.dxi.is_some())
            .finish()
    }
}

impl TransformationSpec {
    pub fn new<F>(dim: usize, xi: F) -> Result<Self>
    where
        F: Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::Usage(
                "transformation needs at least one component".into(),
            ));
        }
        Ok(Self {
            dim,
            xi: Arc::new(xi),
            dxi: None,
        })
    }

    pub fn with_total_derivative<G>(mut self, dxi: G) -> Self
    where
        G: Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.dxi = Some(Arc::new(dxi));
        self
    }

    /// Constant shift along a fixed direction; its rate along any
    /// trajectory is identically zero.
    pub fn translation(direction: Vec<f64>) -> Result<Self> {
        let dim = direction.len();
        let zeros = vec![0.0; dim];
        Self::new(dim, move |_, _| direction.clone())
            .map(|s| s.with_total_derivative(move |_, _, _| zeros.clone()))
    }

    /// Infinitesimal rotation in the first two components.
    pub fn rotation_xy(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Usage(
                "a planar rotation needs at least two components".into(),
            ));
        }
        Self::new(dim, move |_, y: &[f64]| {
            let mut out = vec![0.0; dim];
            out[0] = y[1];
            out[1] = -y[0];
            out
        })
        .map(|s| {
            s.with_total_derivative(move |_, _, yp: &[f64]| {
                let mut out = vec![0.0; dim];
                out[0] = yp[1];
                out[1] = -yp[0];
                out
            })
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The generator as a function of time along a fixed trajectory.
    pub fn along_trajectory(&self, y: &FunctionHandle) -> Result<FunctionHandle> {
        let xi = self.xi.clone();
        let y1 = y.clone();
        match &self.dxi {
            Some(d) => {
                let d = d.clone();
                let y2 = y.clone();
                FunctionHandle::vector_with_deriv(
                    y.domain(),
                    self.dim,
                    move |t| xi(t, &y1.eval(t)),
                    move |t| d(t, &y2.eval(t), &y2.deriv(t)),
                )
            }
            None => FunctionHandle::vector(y.domain(), self.dim, move |t| xi(t, &y1.eval(t))),
        }
    }
}

/// Deterministic sample of closed subintervals of the given interval, each
/// at least 5% of its length.
pub fn random_subintervals(interval: (f64, f64), count: usize, seed: u64) -> Vec<(f64, f64)> {
    let (a, b) = interval;
    let min_len = 0.05 * (b - a);
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = rng.uniform(a, b);
        let v = rng.uniform(a, b);
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        if hi - lo >= min_len {
            out.push((lo, hi));
        }
    }
    out
}

fn check_family(problem: &ProblemSpec, xf: &TransformationSpec, y: &FunctionHandle) -> Result<()> {
    let dim = problem.lagrangian().dim();
    if xf.dim() != dim || y.dim() != dim {
        return Err(Error::Usage(format!(
            "problem has {dim} components, transformation {} and trajectory {}",
            xf.dim(),
            y.dim()
        )));
    }
    if !y.covers(problem.interval()) {
        return Err(Error::Domain(format!(
            "trajectory domain {:?} does not cover the problem interval",
            y.domain()
        )));
    }
    Ok(())
}

/// Weighted integrand total over one subinterval, with the weight anchored
/// at the subinterval's right endpoint.
fn functional_over(
    problem: &ProblemSpec,
    z: &FunctionHandle,
    span: (f64, f64),
    inner: &QuadratureSpec,
) -> Result<f64> {
    let lag = problem.lagrangian();
    let nodes = weighted_kernel_nodes(lag.weight(), span.1, span.0, false, problem.quad())?;
    let mut acc = 0.0;
    for (t, wq) in nodes {
        let (v, w) = bundle_values(lag, z, t, inner)?;
        let yv = z.eval(t);
        let ypv = z.deriv(t);
        let fv = lag.eval(&crate::lagrangian::BundleArgs {
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

fn shifted_by(y: &FunctionHandle, xi: &FunctionHandle, eps: f64) -> Result<FunctionHandle> {
    let (y1, y2) = (y.clone(), y.clone());
    let (x1, x2) = (xi.clone(), xi.clone());
    FunctionHandle::vector_with_deriv(
        y.domain(),
        y.dim(),
        move |t| {
            y1.eval(t)
                .iter()
                .zip(x1.eval(t).iter())
                .map(|(a, b)| a + eps * b)
                .collect()
        },
        move |t| {
            y2.deriv(t)
                .iter()
                .zip(x2.deriv(t).iter())
                .map(|(a, b)| a + eps * b)
                .collect()
        },
    )
}

/// First-order invariance defect: the largest |J(y + eps xi) - J(y)| / |eps|
/// over the given perturbation sizes and subintervals, where each
/// restricted functional anchors its weight at the subinterval's right
/// endpoint while the trajectory's fractional arguments keep integrating
/// over the full problem interval. Families the functional is invariant
/// under give defects that vanish linearly in eps; others stall at the
/// first-order term.
pub fn check_invariance(
    problem: &ProblemSpec,
    xf: &TransformationSpec,
    y: &FunctionHandle,
    eps_list: &[f64],
    subintervals: &[(f64, f64)],
) -> Result<f64> {
    check_family(problem, xf, y)?;
    let (a, b) = problem.interval();
    for &eps in eps_list {
        if !(eps.is_finite() && eps.abs() <= 1e-2) {
            return Err(Error::Usage(format!(
                "perturbation sizes must satisfy |eps| <= 1e-2, got {eps}"
            )));
        }
    }
    for &(lo, hi) in subintervals {
        if !(lo >= a - 1e-12 && hi <= b + 1e-12 && lo < hi) {
            return Err(Error::Usage(format!(
                "subinterval [{lo}, {hi}] does not sit inside [{a}, {b}]"
            )));
        }
    }
    let inner = problem.quad().inner();
    let xi = xf.along_trajectory(y)?;
    let mut worst = 0.0_f64;
    for &span in subintervals {
        let base = functional_over(problem, y, span, &inner)?;
        for &eps in eps_list {
            let moved = functional_over(problem, &shifted_by(y, &xi, eps)?, span, &inner)?;
            let defect = if eps == 0.0 {
                (moved - base).abs()
            } else {
                (moved - base).abs() / eps.abs()
            };
            worst = worst.max(defect);
        }
    }
    Ok(worst)
}

/// Pointwise identity that invariance forces on the integrand:
///
/// ```text
/// sum_j ( dF/dy_j xi_j + dF/dy'_j xi_j' + sum_i dF/dv_ij B_i[xi_j]
///       + sum_k dF/dw_kj K_k[xi_j] )
/// ```
///
/// evaluated along y on the grid, with the primal parameter sets and no
/// weight factor. Near zero everywhere for invariant families.
pub fn nci_residual(
    problem: &ProblemSpec,
    xf: &TransformationSpec,
    y: &FunctionHandle,
    t_grid: &[f64],
) -> Result<Vec<f64>> {
    check_family(problem, xf, y)?;
    let lag = problem.lagrangian();
    let inner = problem.quad().inner();
    let xi = xf.along_trajectory(y)?;
    let dim = lag.dim();
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let xi_v = xi.eval(t);
        let xi_d = xi.deriv(t);
        let mut acc = 0.0;
        let mut b_of_xi = Vec::with_capacity(lag.frac_derivs().len());
        for op in lag.frac_derivs() {
            b_of_xi.push(b_op(&op.kernel, &op.pset, &xi, t, &inner)?);
        }
        let mut k_of_xi = Vec::with_capacity(lag.frac_ints().len());
        for op in lag.frac_ints() {
            k_of_xi.push(k_op(&op.kernel, &op.pset, &xi, t, &inner)?);
        }
        for c in 0..dim {
            acc += partial_along(lag, y, Slot::Y(c), t, &inner)? * xi_v[c];
            acc += partial_along(lag, y, Slot::YPrime(c), t, &inner)? * xi_d[c];
            for (i, bx) in b_of_xi.iter().enumerate() {
                acc +=
                    partial_along(lag, y, Slot::FracDeriv { arg: i, comp: c }, t, &inner)? * bx[c];
            }
            for (k, kx) in k_of_xi.iter().enumerate() {
                acc += partial_along(lag, y, Slot::FracInt { arg: k, comp: c }, t, &inner)? * kx[c];
            }
        }
        out.push(acc);
    }
    Ok(out)
}

fn weight_value(weight: &Kernel, anchor: f64, t: f64) -> Result<f64> {
    let w = weight.eval(anchor, t);
    if !w.is_finite() || w == 0.0 {
        return Err(Error::Domain(format!(
            "weight kernel is {w} at t = {t}; the bracket operators divide by it"
        )));
    }
    Ok(w)
}

/// Derivative-side bracket of two functions:
///
/// ```text
/// f(t) A*[g](t) / w(t) + g(t) B[f](t)
/// ```
///
/// where A*/B integrate against the complementary-order kernel, A* over the
/// dual parameter set, and w(t) = weight(P.b, t).
#[allow(clippy::too_many_arguments)]
pub fn d_operator(
    pset: &ParamSet,
    kernel_comp: &Kernel,
    f: &FunctionHandle,
    g: &FunctionHandle,
    t: f64,
    weight: &Kernel,
    quad: &QuadratureSpec,
    diff_step: f64,
) -> Result<f64> {
    if f.dim() != 1 || g.dim() != 1 {
        return Err(Error::Usage(
            "bracket operators combine scalar functions".into(),
        ));
    }
    let w = weight_value(weight, pset.b, t)?;
    let a_term = a_op(kernel_comp, &pset.dual(), g, t, quad, diff_step)?[0];
    let b_term = b_op(kernel_comp, pset, f, t, quad)?[0];
    Ok(f.eval_scalar(t) * a_term / w + g.eval_scalar(t) * b_term)
}

/// Integral-side bracket of two functions:
///
/// ```text
/// -f(t) K*[g](t) / w(t) + g(t) K[f](t)
/// ```
pub fn i_operator(
    pset: &ParamSet,
    kernel: &Kernel,
    f: &FunctionHandle,
    g: &FunctionHandle,
    t: f64,
    weight: &Kernel,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if f.dim() != 1 || g.dim() != 1 {
        return Err(Error::Usage(
            "bracket operators combine scalar functions".into(),
        ));
    }
    let w = weight_value(weight, pset.b, t)?;
    let k_dual = k_op(kernel, &pset.dual(), g, t, quad)?[0];
    let k_primal = k_op(kernel, pset, f, t, quad)?[0];
    Ok(-f.eval_scalar(t) * k_dual / w + g.eval_scalar(t) * k_primal)
}

fn component_handle(xi: &FunctionHandle, c: usize) -> Result<FunctionHandle> {
    let (x1, x2) = (xi.clone(), xi.clone());
    FunctionHandle::scalar_with_deriv(xi.domain(), move |t| x1.eval(t)[c], move |t| x2.deriv(t)[c])
}

/// w * dF/d(slot) along y, wrapped as a scalar handle for the brackets.
/// Evaluation failures inside surface as non-finite samples downstream.
fn weighted_partial(
    problem: &ProblemSpec,
    y: &FunctionHandle,
    slot: Slot,
    inner: QuadratureSpec,
) -> Result<FunctionHandle> {
    let lag = problem.lagrangian().clone();
    let y = y.clone();
    let p = problem.clone();
    FunctionHandle::scalar(problem.interval(), move |tau| {
        partial_along(&lag, &y, slot, tau, &inner)
            .map(|v| p.weight_at(tau) * v)
            .unwrap_or(f64::NAN)
    })
}

/// Conservation-law residual along y for the given family:
///
/// ```text
/// sum_j ( sum_i D_i[xi_j, w dF/dv_ij] + sum_k I_k[xi_j, w dF/dw_kj]
///       + d/dt (xi_j dF/dy'_j) + xi_j dF/dy'_j (w'/w) )
/// ```
///
/// Vanishes along extremals of invariant functionals; with a constant
/// weight the last term drops and the classical conserved momentum
/// emerges.
pub fn noether_residual(
    problem: &ProblemSpec,
    xf: &TransformationSpec,
    y: &FunctionHandle,
    t_grid: &[f64],
) -> Result<Vec<f64>> {
    check_family(problem, xf, y)?;
    let lag = problem.lagrangian();
    let (a, b) = problem.interval();
    let h = problem.diff_step();
    for &t in t_grid {
        if t - a < h || b - t < h {
            return Err(Error::Domain(format!(
                "grid point {t} is within the differentiation stencil width {h} of an endpoint"
            )));
        }
    }
    let inner = problem.quad().inner();
    let xi = xf.along_trajectory(y)?;
    let dim = lag.dim();
    let xi_comps = (0..dim)
        .map(|c| component_handle(&xi, c))
        .collect::<Result<Vec<_>>>()?;
    let mut g_derivs = Vec::with_capacity(lag.n_frac_derivs() * dim);
    for i in 0..lag.n_frac_derivs() {
        for c in 0..dim {
            g_derivs.push(weighted_partial(
                problem,
                y,
                Slot::FracDeriv { arg: i, comp: c },
                inner,
            )?);
        }
    }
    let mut g_ints = Vec::with_capacity(lag.n_frac_ints() * dim);
    for k in 0..lag.n_frac_ints() {
        for c in 0..dim {
            g_ints.push(weighted_partial(
                problem,
                y,
                Slot::FracInt { arg: k, comp: c },
                inner,
            )?);
        }
    }

    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let mut acc = 0.0;
        // Log-derivative of the weight, shared by every component.
        let wt = problem.weight_at(t);
        let mut wfun = |tau: f64| problem.weight_at(tau);
        let dlogw = richardson_derivative(&mut wfun, t, h) / wt;
        for (c, xi_c) in xi_comps.iter().enumerate() {
            for (i, op) in lag.frac_derivs().iter().enumerate() {
                let g = &g_derivs[i * dim + c];
                acc += d_operator(&op.pset, &op.kernel, xi_c, g, t, lag.weight(), &inner, h)?;
            }
            for (k, op) in lag.frac_ints().iter().enumerate() {
                let g = &g_ints[k * dim + c];
                acc += i_operator(&op.pset, &op.kernel, xi_c, g, t, lag.weight(), &inner)?;
            }
            let slope_partial = partial_along(lag, y, Slot::YPrime(c), t, &inner)?;
            let ddt =
                with_pending(
                    |f| Ok(richardson_derivative(f, t, h)),
                    |tau| {
                        Ok(xi_c.eval_scalar(tau)
                            * partial_along(lag, y, Slot::YPrime(c), tau, &inner)?)
                    },
                )?;
            acc += ddt + xi_c.eval_scalar(t) * slope_partial * dlogw;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Which order the conserved integral transform runs at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderMode {
    /// The order of the derivative argument itself.
    AsPrintedAlpha,
    /// The complementary order, matching the derivative's inner transform.
    DerivedOneMinusAlpha,
}

#[derive(Clone, Debug)]
pub struct ConservedQuantity {
    pub values: Vec<f64>,
    /// Population spread normalized by the mean magnitude (floored at 1).
    pub flatness: f64,
}

/// The candidate constant of motion for problems whose integrand depends
/// only on time and a single fractional derivative of a scalar trajectory:
/// the dual-set integral transform of w dF/dv along y, evaluated on the
/// grid. Flat along extremals.
pub fn constant_of_motion(
    problem: &ProblemSpec,
    y: &FunctionHandle,
    t_grid: &[f64],
    mode: OrderMode,
) -> Result<ConservedQuantity> {
    let lag = problem.lagrangian();
    if lag.dim() != 1 || lag.n_frac_derivs() != 1 || lag.n_frac_ints() != 0 {
        return Err(Error::Usage(
            "the conserved-quantity shape needs a scalar trajectory with exactly one \
             fractional-derivative argument and no integral arguments"
                .into(),
        ));
    }
    if !y.covers(problem.interval()) || y.dim() != 1 {
        return Err(Error::Usage(
            "trajectory must be scalar and cover the problem interval".into(),
        ));
    }
    let op = &lag.frac_derivs()[0];
    let kernel = match mode {
        OrderMode::DerivedOneMinusAlpha => op.kernel.clone(),
        OrderMode::AsPrintedAlpha => op.kernel.complementary()?,
    };
    let dual = op.pset.dual();
    let inner = problem.quad().inner();
    let slot = Slot::FracDeriv { arg: 0, comp: 0 };
    let mut values = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let v = with_pending(
            |g| k_op_fn(&kernel, &dual, g, t, &inner),
            |tau| Ok(problem.weight_at(tau) * partial_along(lag, y, slot, tau, &inner)?),
        )?;
        values.push(v);
    }
    let flatness = relative_spread(&values);
    Ok(ConservedQuantity { values, flatness })
}
