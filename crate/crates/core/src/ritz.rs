//! Direct minimization of the weighted functional over a trigonometric
//! trajectory basis.
//!
//! Each component is written as an offset satisfying the boundary data plus
//! a combination of basis functions that vanish wherever data is pinned.
//! Because every operator appearing in the bundle is linear in the
//! trajectory, the fractional-argument values at the outer quadrature nodes
//! are precomputed once per basis function; evaluating the discretized
//! functional for a coefficient vector is then pure arithmetic, cheap
//! enough for finite-difference gradients.

use crate::error::{Error, Result};
use crate::func::FunctionHandle;
use crate::lagrangian::{BoundaryMode, BundleArgs, LagrangianSpec, ProblemSpec};
use crate::ops::{b_op, k_op};
use crate::quad::weighted_kernel_nodes;
use crate::util::linf;
use crate::variational::{el_residual_l2, natural_bc_residual, weighted_integrand_value};

use std::f64::consts::PI;

/// Optimizer knobs. `grad_step` of None scales the default per coefficient.
#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub grad_step: Option<f64>,
    /// Stop when the gradient max-norm falls below this.
    pub tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 300,
            grad_step: None,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Diagnostics {
    pub functional_value: f64,
    pub el_residual_l2: f64,
    pub natural_bc_residual: Option<Vec<f64>>,
    pub multiplier: Option<f64>,
    pub constraint_gap: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Basis coefficients, one row per trajectory component.
    pub coefficients: Vec<Vec<f64>>,
    /// The reconstructed trajectory with analytic derivatives.
    pub evaluator: FunctionHandle,
    pub converged: bool,
    pub diagnostics: Diagnostics,
}

/// Basis functions over the unit coordinate s = (t - a)/(b - a).
///
/// Fixed-both problems use sines, which vanish at both ends, topped up with
/// two cubic bubbles: the sines alone flatten every reconstructed second
/// derivative at the endpoints, which a solution with curvature there can
/// only fight with slowly decaying coefficients. Free-left problems use
/// half-period cosines, which vanish at b and leave both the value and the
/// slope at a free.
#[derive(Clone, Copy, Debug)]
enum BasisFn {
    /// sin(l pi s)
    Sine(usize),
    /// s (1 - s)^2
    BubbleLeft,
    /// s^2 (1 - s)
    BubbleRight,
    /// cos((l - 1/2) pi s)
    HalfCos(usize),
}

impl BasisFn {
    fn value(self, s: f64) -> f64 {
        match self {
            BasisFn::Sine(l) => (l as f64 * PI * s).sin(),
            BasisFn::BubbleLeft => s * (1.0 - s) * (1.0 - s),
            BasisFn::BubbleRight => s * s * (1.0 - s),
            BasisFn::HalfCos(l) => ((l as f64 - 0.5) * PI * s).cos(),
        }
    }

    /// d/ds
    fn deriv(self, s: f64) -> f64 {
        match self {
            BasisFn::Sine(l) => {
                let w = l as f64 * PI;
                w * (w * s).cos()
            }
            BasisFn::BubbleLeft => (1.0 - s) * (1.0 - 3.0 * s),
            BasisFn::BubbleRight => s * (2.0 - 3.0 * s),
            BasisFn::HalfCos(l) => {
                let w = (l as f64 - 0.5) * PI;
                -w * (w * s).sin()
            }
        }
    }

    /// d^2/ds^2
    fn second(self, s: f64) -> f64 {
        match self {
            BasisFn::Sine(l) => {
                let w = l as f64 * PI;
                -w * w * (w * s).sin()
            }
            BasisFn::BubbleLeft => 6.0 * s - 4.0,
            BasisFn::BubbleRight => 2.0 - 6.0 * s,
            BasisFn::HalfCos(l) => {
                let w = (l as f64 - 0.5) * PI;
                -w * w * (w * s).cos()
            }
        }
    }
}

fn basis_for(mode: BoundaryMode, m: usize) -> Vec<BasisFn> {
    match mode {
        BoundaryMode::FixedBoth => {
            if m <= 2 {
                (1..=m).map(BasisFn::Sine).collect()
            } else {
                let mut out: Vec<BasisFn> = (1..=m - 2).map(BasisFn::Sine).collect();
                out.push(BasisFn::BubbleLeft);
                out.push(BasisFn::BubbleRight);
                out
            }
        }
        BoundaryMode::FreeLeft => (1..=m).map(BasisFn::HalfCos).collect(),
    }
}

/// Per-component offset c0 + c1 s carrying the boundary data.
fn offsets(problem: &ProblemSpec) -> Vec<(f64, f64)> {
    match problem.boundary_mode() {
        BoundaryMode::FixedBoth => {
            let ya = problem.y_a().expect("fixed-both carries left data");
            ya.iter()
                .zip(problem.y_b().iter())
                .map(|(&a, &b)| (a, b - a))
                .collect()
        }
        BoundaryMode::FreeLeft => problem.y_b().iter().map(|&b| (b, 0.0)).collect(),
    }
}

/// Everything the discretized objective needs at the outer nodes.
struct Tables {
    a: f64,
    len: f64,
    dim: usize,
    basis: Vec<BasisFn>,
    offsets: Vec<(f64, f64)>,
    /// (t, quadrature weight incl. kernel) per outer node.
    nodes: Vec<(f64, f64)>,
    /// [l][q] basis values and d/dt slopes.
    phi: Vec<Vec<f64>>,
    dphi: Vec<Vec<f64>>,
    /// [i][l][q]: i-th fractional-derivative argument of basis function l.
    bv_phi: Vec<Vec<Vec<f64>>>,
    /// [i][q]: same operator applied to the ramp s (offset response).
    bv_ramp: Vec<Vec<f64>>,
    /// [k][l][q] and [k][q], [k][q]: fractional-integral responses of the
    /// basis, the ramp, and the constant one.
    kv_phi: Vec<Vec<Vec<f64>>>,
    kv_ramp: Vec<Vec<f64>>,
    kv_one: Vec<Vec<f64>>,
}

impl Tables {
    fn build(problem: &ProblemSpec, m: usize) -> Result<Self> {
        let lag = problem.lagrangian();
        let (a, b) = problem.interval();
        let len = b - a;
        let basis = basis_for(problem.boundary_mode(), m);
        let quad = problem.quad();
        let inner = quad.inner();
        let nodes = weighted_kernel_nodes(lag.weight(), b, a, false, quad)?;

        let phi: Vec<Vec<f64>> = basis
            .iter()
            .map(|bf| {
                nodes
                    .iter()
                    .map(|&(t, _)| bf.value((t - a) / len))
                    .collect()
            })
            .collect();
        let dphi: Vec<Vec<f64>> = basis
            .iter()
            .map(|bf| {
                nodes
                    .iter()
                    .map(|&(t, _)| bf.deriv((t - a) / len) / len)
                    .collect()
            })
            .collect();

        let handle_of = |bf: BasisFn| {
            FunctionHandle::scalar_with_deriv(
                (a, b),
                move |t| bf.value((t - a) / len),
                move |t| bf.deriv((t - a) / len) / len,
            )
        };
        let ramp =
            FunctionHandle::scalar_with_deriv((a, b), move |t| (t - a) / len, move |_| 1.0 / len)?;
        let one = FunctionHandle::scalar_with_deriv((a, b), |_| 1.0, |_| 0.0)?;

        let mut bv_phi = Vec::new();
        let mut bv_ramp = Vec::new();
        for op in lag.frac_derivs() {
            let mut per_basis = Vec::with_capacity(basis.len());
            for bf in &basis {
                let h = handle_of(*bf)?;
                let mut col = Vec::with_capacity(nodes.len());
                for &(t, _) in &nodes {
                    col.push(b_op(&op.kernel, &op.pset, &h, t, &inner)?[0]);
                }
                per_basis.push(col);
            }
            bv_phi.push(per_basis);
            let mut col = Vec::with_capacity(nodes.len());
            for &(t, _) in &nodes {
                col.push(b_op(&op.kernel, &op.pset, &ramp, t, &inner)?[0]);
            }
            bv_ramp.push(col);
        }

        let mut kv_phi = Vec::new();
        let mut kv_ramp = Vec::new();
        let mut kv_one = Vec::new();
        for op in lag.frac_ints() {
            let mut per_basis = Vec::with_capacity(basis.len());
            for bf in &basis {
                let h = handle_of(*bf)?;
                let mut col = Vec::with_capacity(nodes.len());
                for &(t, _) in &nodes {
                    col.push(k_op(&op.kernel, &op.pset, &h, t, &inner)?[0]);
                }
                per_basis.push(col);
            }
            kv_phi.push(per_basis);
            let mut ramp_col = Vec::with_capacity(nodes.len());
            let mut one_col = Vec::with_capacity(nodes.len());
            for &(t, _) in &nodes {
                ramp_col.push(k_op(&op.kernel, &op.pset, &ramp, t, &inner)?[0]);
                one_col.push(k_op(&op.kernel, &op.pset, &one, t, &inner)?[0]);
            }
            kv_ramp.push(ramp_col);
            kv_one.push(one_col);
        }

        Ok(Self {
            a,
            len,
            dim: lag.dim(),
            basis,
            offsets: offsets(problem),
            nodes,
            phi,
            dphi,
            bv_phi,
            bv_ramp,
            kv_phi,
            kv_ramp,
            kv_one,
        })
    }

    fn coeff_count(&self) -> usize {
        self.dim * self.basis.len()
    }

    /// Bundle arguments at outer node q for flattened coefficients x
    /// (component-major), written into the scratch slices.
    fn assemble(
        &self,
        x: &[f64],
        q: usize,
        y: &mut [f64],
        yp: &mut [f64],
        v: &mut [f64],
        w: &mut [f64],
    ) {
        let (t, _) = self.nodes[q];
        let s = (t - self.a) / self.len;
        let m = self.basis.len();
        for (j, &(c0, c1)) in self.offsets.iter().enumerate() {
            let row = &x[j * m..(j + 1) * m];
            let mut val = c0 + c1 * s;
            let mut slope = c1 / self.len;
            for (l, &c) in row.iter().enumerate() {
                val += c * self.phi[l][q];
                slope += c * self.dphi[l][q];
            }
            y[j] = val;
            yp[j] = slope;
            for i in 0..self.bv_phi.len() {
                let mut bi = c1 * self.bv_ramp[i][q];
                for (l, &c) in row.iter().enumerate() {
                    bi += c * self.bv_phi[i][l][q];
                }
                v[i * self.dim + j] = bi;
            }
            for k in 0..self.kv_phi.len() {
                let mut ki = c0 * self.kv_one[k][q] + c1 * self.kv_ramp[k][q];
                for (l, &c) in row.iter().enumerate() {
                    ki += c * self.kv_phi[k][l][q];
                }
                w[k * self.dim + j] = ki;
            }
        }
    }

    /// The discretized functional for one integrand over the shared nodes.
    fn objective(&self, lag: &LagrangianSpec, x: &[f64]) -> f64 {
        let dim = self.dim;
        let mut y = vec![0.0; dim];
        let mut yp = vec![0.0; dim];
        let mut v = vec![0.0; self.bv_phi.len() * dim];
        let mut w = vec![0.0; self.kv_phi.len() * dim];
        let mut acc = 0.0;
        for q in 0..self.nodes.len() {
            self.assemble(x, q, &mut y, &mut yp, &mut v, &mut w);
            acc += self.nodes[q].1
                * lag.eval(&BundleArgs {
                    t: self.nodes[q].0,
                    y: &y,
                    yp: &yp,
                    v: &v,
                    w: &w,
                });
        }
        acc
    }

    fn evaluator(&self, x: &[f64], domain: (f64, f64)) -> Result<FunctionHandle> {
        let dim = self.dim;
        let m = self.basis.len();
        let a = self.a;
        let len = self.len;
        let basis = self.basis.clone();
        let offs = self.offsets.clone();
        let coeff: Vec<f64> = x.to_vec();
        let (b2, o2, c2) = (basis.clone(), offs.clone(), coeff.clone());
        let (b3, c3) = (basis.clone(), coeff.clone());
        FunctionHandle::vector_c2(
            domain,
            dim,
            move |t| {
                let s = (t - a) / len;
                (0..dim)
                    .map(|j| {
                        let mut val = offs[j].0 + offs[j].1 * s;
                        for (l, bf) in basis.iter().enumerate() {
                            val += coeff[j * m + l] * bf.value(s);
                        }
                        val
                    })
                    .collect()
            },
            move |t| {
                let s = (t - a) / len;
                (0..dim)
                    .map(|j| {
                        let mut val = o2[j].1 / len;
                        for (l, bf) in b2.iter().enumerate() {
                            val += c2[j * m + l] * bf.deriv(s) / len;
                        }
                        val
                    })
                    .collect()
            },
            move |t| {
                let s = (t - a) / len;
                (0..dim)
                    .map(|j| {
                        let mut val = 0.0;
                        for (l, bf) in b3.iter().enumerate() {
                            val += c3[j * m + l] * bf.second(s) / (len * len);
                        }
                        val
                    })
                    .collect()
            },
        )
    }
}

fn fd_gradient(
    tables: &Tables,
    lag: &LagrangianSpec,
    x: &[f64],
    opts: &SolveOptions,
    scratch: &mut Vec<f64>,
) -> Vec<f64> {
    scratch.clear();
    scratch.extend_from_slice(x);
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let h = opts.grad_step.unwrap_or(1e-6 * (1.0 + x[i].abs()));
        let xi = x[i];
        scratch[i] = xi + h;
        let fp = tables.objective(lag, scratch);
        scratch[i] = xi - h;
        let fm = tables.objective(lag, scratch);
        scratch[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Inverse-Hessian BFGS with Armijo backtracking. Returns the final
/// iterate and whether the gradient tolerance was met.
fn minimize(
    tables: &Tables,
    lag: &LagrangianSpec,
    x0: Vec<f64>,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, bool)> {
    let d = x0.len();
    if d == 0 {
        return Ok((x0, true));
    }
    let mut x = x0;
    let mut f = tables.objective(lag, &x);
    if !f.is_finite() {
        return Err(Error::Domain(
            "objective is non-finite at the initial iterate".into(),
        ));
    }
    let mut scratch = Vec::with_capacity(d);
    let mut g = fd_gradient(tables, lag, &x, opts, &mut scratch);
    // Dense inverse-Hessian estimate; coefficient counts stay two-digit.
    let mut hinv: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| f64::from(i == j)).collect())
        .collect();
    let (mut best_x, mut best_f) = (x.clone(), f);
    let armijo = 1e-4;

    for iter in 0..opts.max_iters {
        if linf(&g) <= opts.tol {
            return Ok((x, true));
        }
        let mut dir: Vec<f64> = (0..d)
            .map(|i| -(0..d).map(|j| hinv[i][j] * g[j]).sum::<f64>())
            .collect();
        let mut slope: f64 = dir.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            // Stale curvature; fall back to steepest descent.
            for i in 0..d {
                for j in 0..d {
                    hinv[i][j] = f64::from(i == j);
                }
                dir[i] = -g[i];
            }
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = x
                .iter()
                .zip(dir.iter())
                .map(|(a, b)| a + step * b)
                .collect();
            let fc = tables.objective(lag, &cand);
            if fc.is_finite() && fc <= f + armijo * step * slope {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            return Err(Error::LineSearchFailed {
                iterations: iter,
                grad_norm: linf(&g),
                coefficients: x,
            });
        };

        let g_new = fd_gradient(tables, lag, &x_new, opts, &mut scratch);
        let s: Vec<f64> = x_new.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(g.iter()).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(yv.iter()).map(|(a, b)| a * b).sum();
        let s_norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y_norm = yv.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy > 1e-12 * s_norm * y_norm {
            // hinv <- (I - s y^T / sy) hinv (I - y s^T / sy) + s s^T / sy
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..d)
                .map(|i| (0..d).map(|j| hinv[i][j] * yv[j]).sum())
                .collect();
            let yhy: f64 = yv.iter().zip(hy.iter()).map(|(a, b)| a * b).sum();
            for i in 0..d {
                for j in 0..d {
                    hinv[i][j] +=
                        rho * rho * (sy + yhy) * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }

        x = x_new;
        f = f_new;
        g = g_new;
        if f < best_f {
            best_f = f;
            best_x = x.clone();
        }
    }
    if linf(&g) <= opts.tol {
        return Ok((x, true));
    }
    Ok((best_x, false))
}

fn check_inputs(problem: &ProblemSpec, basis_size: usize, opts: &SolveOptions) -> Result<()> {
    if basis_size == 0 {
        return Err(Error::Usage("basis size must be at least 1".into()));
    }
    if opts.max_iters == 0 {
        return Err(Error::Usage("max_iters must be at least 1".into()));
    }
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(Error::Usage(format!(
            "gradient tolerance must be positive, got {}",
            opts.tol
        )));
    }
    if let Some(h) = opts.grad_step {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Usage(format!(
                "grad_step must be positive when given, got {h}"
            )));
        }
    }
    let _ = problem;
    Ok(())
}

fn finish(
    problem: &ProblemSpec,
    tables: &Tables,
    x: Vec<f64>,
    converged: bool,
    multiplier: Option<f64>,
    constraint_gap: Option<f64>,
    residual_problem: &ProblemSpec,
) -> Result<Solution> {
    let m = tables.basis.len();
    let evaluator = tables.evaluator(&x, problem.interval())?;
    let functional_value = weighted_integrand_value(
        problem.lagrangian(),
        problem.interval(),
        &evaluator,
        problem.quad(),
    )?;
    let el = el_residual_l2(residual_problem, &evaluator, problem.quad())?;
    let nbc = match problem.boundary_mode() {
        BoundaryMode::FreeLeft => Some(natural_bc_residual(
            residual_problem,
            &evaluator,
            problem.quad(),
        )?),
        BoundaryMode::FixedBoth => None,
    };
    let coefficients = (0..tables.dim)
        .map(|j| x[j * m..(j + 1) * m].to_vec())
        .collect();
    Ok(Solution {
        coefficients,
        evaluator,
        converged,
        diagnostics: Diagnostics {
            functional_value,
            el_residual_l2: el,
            natural_bc_residual: nbc,
            multiplier,
            constraint_gap,
        },
    })
}

/// Minimizes the problem's functional over `basis_size` functions per
/// component. Non-convergence within `max_iters` returns the best iterate
/// with `converged` unset rather than failing.
pub fn solve_ritz(
    problem: &ProblemSpec,
    basis_size: usize,
    opts: &SolveOptions,
) -> Result<Solution> {
    check_inputs(problem, basis_size, opts)?;
    let tables = Tables::build(problem, basis_size)?;
    let x0 = vec![0.0; tables.coeff_count()];
    let (x, converged) = minimize(&tables, problem.lagrangian(), x0, opts)?;
    finish(problem, &tables, x, converged, None, None, problem)
}

/// Rebuilds the problem around a combined integrand while keeping the
/// interval, boundary data, quadrature, and stencil settings.
fn with_integrand(problem: &ProblemSpec, lag: LagrangianSpec) -> Result<ProblemSpec> {
    let built = match problem.boundary_mode() {
        BoundaryMode::FixedBoth => ProblemSpec::fixed_both(
            lag,
            problem.interval(),
            problem
                .y_a()
                .expect("fixed-both carries left data")
                .to_vec(),
            problem.y_b().to_vec(),
        )?,
        BoundaryMode::FreeLeft => {
            ProblemSpec::free_left(lag, problem.interval(), problem.y_b().to_vec())?
        }
    };
    built
        .with_quad(problem.quad().clone())?
        .with_diff_step(problem.diff_step())
}

/// Solves the constrained problem by an outer scalar root-find on the
/// multiplier: for each candidate the combined integrand F - lambda G is
/// minimized, and lambda is steered until the constraint functional hits
/// its target. An inactive constraint short-circuits at lambda = 0.
pub fn solve_isoperimetric(
    problem: &ProblemSpec,
    basis_size: usize,
    opts: &SolveOptions,
) -> Result<Solution> {
    check_inputs(problem, basis_size, opts)?;
    let iso = problem.isoperimetric().ok_or_else(|| {
        Error::Usage("solve_isoperimetric needs an isoperimetric constraint attached".into())
    })?;
    let xi = iso.target;
    let gap_tol = 1e-6 * (1.0 + xi.abs());
    let tables = Tables::build(problem, basis_size)?;
    let f_lag = problem.lagrangian();
    let g_lag = &iso.integrand;

    // One inner minimization at a fixed multiplier, warm-started.
    let inner = |lambda: f64, x0: Vec<f64>| -> Result<(Vec<f64>, bool, f64)> {
        let combined = LagrangianSpec::linear_combination(f_lag, g_lag, lambda)?;
        let (x, conv) = minimize(&tables, &combined, x0, opts)?;
        let i_val = tables.objective(g_lag, &x);
        Ok((x, conv, i_val))
    };

    let finish_at = |lambda: f64, x: Vec<f64>, conv: bool, gap: f64| -> Result<Solution> {
        let combined = LagrangianSpec::linear_combination(f_lag, g_lag, lambda)?;
        let residual_problem = with_integrand(problem, combined)?;
        finish(
            problem,
            &tables,
            x,
            conv,
            Some(lambda),
            Some(gap),
            &residual_problem,
        )
    };

    let (x0, conv0, i0) = inner(0.0, vec![0.0; tables.coeff_count()])?;
    let phi0 = i0 - xi;
    if phi0.abs() <= gap_tol {
        return finish_at(0.0, x0, conv0, phi0.abs());
    }

    // Bracket the multiplier by expanding geometrically in both directions
    // from 0 until the constraint gap changes sign.
    let mut lo = (0.0, phi0, x0.clone());
    let mut hi = None;
    let mut step = 1.0;
    for _ in 0..50 {
        for signed in [step, -step] {
            let (x, conv, i_val) = inner(signed, x0.clone())?;
            let phi = i_val - xi;
            if phi.abs() <= gap_tol {
                return finish_at(signed, x, conv, phi.abs());
            }
            if phi.signum() != phi0.signum() {
                hi = Some((signed, phi, x));
                break;
            }
            // Remember the closest same-sign point as the new near edge.
            if phi.abs() < lo.1.abs() {
                lo = (signed, phi, x);
            }
        }
        if hi.is_some() {
            break;
        }
        step *= 2.0;
    }
    let Some(mut hi) = hi else {
        return Err(Error::BracketFailed(format!(
            "constraint value stayed on one side of the target {xi} for multipliers out to \
             +/-{step}; the constraint may be unattainable for this problem"
        )));
    };

    // Regula falsi on the bracket; the inner solves are warm-started from
    // the nearer edge.
    let mut last = None;
    for _ in 0..80 {
        let (l0, p0, _) = &lo;
        let (l1, p1, _) = &hi;
        let lambda = (l0 * p1 - l1 * p0) / (p1 - p0);
        let warm = if (lambda - l0).abs() < (lambda - l1).abs() {
            lo.2.clone()
        } else {
            hi.2.clone()
        };
        let (x, conv, i_val) = inner(lambda, warm)?;
        let phi = i_val - xi;
        if phi.abs() <= gap_tol {
            return finish_at(lambda, x, conv, phi.abs());
        }
        if phi.signum() == lo.1.signum() {
            lo = (lambda, phi, x.clone());
        } else {
            hi = (lambda, phi, x.clone());
        }
        last = Some((lambda, x, conv, phi.abs()));
        if (hi.0 - lo.0).abs() <= 1e-12 * (1.0 + lo.0.abs().max(hi.0.abs())) {
            break;
        }
    }
    // The bracket collapsed without meeting the gap tolerance; report the
    // last iterate honestly (gap recorded in the diagnostics).
    let (lambda, x, conv, gap) = last.expect("at least one regula falsi step runs");
    finish_at(lambda, x, conv, gap)
}
