//! Builtin functions and Lagrangians addressable by name from configs.
//! Closed-form partials cannot be parsed from text without an expression
//! language, so the problem surface is a fixed registry.

use gfvc::{
    slot_of, BundleArgs, Error, FracOp, FunctionHandle, Kernel, LagrangianSpec, ProblemSpec,
    Result, Slot,
};

use crate::config::RunConfig;

pub fn function(name: &str, domain: (f64, f64)) -> Result<FunctionHandle> {
    match name {
        "zero" => FunctionHandle::scalar_with_deriv(domain, |_| 0.0, |_| 0.0),
        "one" => FunctionHandle::scalar_with_deriv(domain, |_| 1.0, |_| 0.0),
        "identity" => FunctionHandle::scalar_with_deriv(domain, |t| t, |_| 1.0),
        "square" => FunctionHandle::scalar_with_deriv(domain, |t| t * t, |t| 2.0 * t),
        "cube" => FunctionHandle::scalar_with_deriv(domain, |t| t * t * t, |t| 3.0 * t * t),
        "sine" => FunctionHandle::scalar_with_deriv(domain, f64::sin, f64::cos),
        "cosine" => FunctionHandle::scalar_with_deriv(domain, f64::cos, |t| -t.sin()),
        other => Err(Error::Usage(format!(
            "unknown function {other:?}; expected zero, one, identity, square, cube, sine \
             or cosine"
        ))),
    }
}

/// Interval, weight and any operator arguments all come from the kernel and
/// pset sections; classical builtins read the kernel as the problem weight,
/// while example2_quadratic reads it as the fractional-derivative order.
pub fn build_problem(cfg: &RunConfig) -> Result<ProblemSpec> {
    let pcfg = cfg
        .problem
        .as_ref()
        .ok_or_else(|| Error::Usage("this command needs a problem section".into()))?;
    let ps = cfg.pset_or_default()?;
    let interval = (ps.a, ps.b);
    let dim = pcfg.y_b.len();
    if dim == 0 {
        return Err(Error::Usage("y_b must have at least one component".into()));
    }

    let weight = match (&cfg.kernel, pcfg.lagrangian.as_str()) {
        (_, "example2_quadratic") => Kernel::constant_one(),
        (Some(k), _) => k.build()?,
        (None, _) => Kernel::constant_one(),
    };

    let lag = match pcfg.lagrangian.as_str() {
        "free_particle" => {
            let mass = pcfg.mass.unwrap_or(1.0);
            kinetic_minus_potential(dim, weight, mass, move |_, _| 0.0)?
        }
        "harmonic" => {
            let mass = pcfg.mass.unwrap_or(1.0);
            let omega = pcfg
                .omega
                .ok_or_else(|| Error::Usage("harmonic needs problem.omega".into()))?;
            let k = mass * omega * omega;
            kinetic_minus_potential(dim, weight, mass, move |c, y| k * y[c])?
        }
        "dirichlet" => kinetic_minus_potential(dim, weight, 1.0, move |c, y| -y[c])?,
        "example2_quadratic" => {
            if dim != 1 {
                return Err(Error::Usage(
                    "example2_quadratic is a scalar problem; y_b must have one entry".into(),
                ));
            }
            let kcfg = cfg.kernel_section()?;
            if kcfg.kind != "riemann_liouville" {
                return Err(Error::Usage(
                    "example2_quadratic needs kernel.kind = riemann_liouville with an order".into(),
                ));
            }
            let op = FracOp::new(kcfg.build_for_derivative()?, ps);
            LagrangianSpec::new(
                1,
                Kernel::constant_one(),
                vec![op],
                vec![],
                |args: &BundleArgs| 0.5 * args.frac_deriv(0, 0).powi(2),
                |j: usize, args: &BundleArgs| match slot_of(j, 1, 1, 0) {
                    Some(Slot::FracDeriv { arg: 0, comp: 0 }) => args.frac_deriv(0, 0),
                    _ => 0.0,
                },
            )?
        }
        other => {
            return Err(Error::Usage(format!(
                "unknown lagrangian {other:?}; expected free_particle, harmonic, dirichlet \
                 or example2_quadratic"
            )))
        }
    };

    let built = match pcfg.boundary.as_str() {
        "fixed_both" => {
            let y_a = pcfg
                .y_a
                .clone()
                .ok_or_else(|| Error::Usage("fixed_both boundary needs a y_a vector".into()))?;
            ProblemSpec::fixed_both(lag, interval, y_a, pcfg.y_b.clone())?
        }
        "free_left" => ProblemSpec::free_left(lag, interval, pcfg.y_b.clone())?,
        other => {
            return Err(Error::Usage(format!(
                "unknown boundary mode {other:?}; expected fixed_both or free_left"
            )))
        }
    };
    let built = built.with_quad(cfg.quad_or_default()?)?;

    match &pcfg.isoperimetric {
        None => Ok(built),
        Some(iso) => {
            // The constraint is the unweighted integral of the first
            // trajectory component, the shape of the worked area example.
            let area = LagrangianSpec::new(
                dim,
                Kernel::constant_one(),
                vec![],
                vec![],
                |args: &BundleArgs| args.y[0],
                move |j: usize, _args: &BundleArgs| match slot_of(j, dim, 0, 0) {
                    Some(Slot::Y(0)) => 1.0,
                    _ => 0.0,
                },
            )?;
            built.with_isoperimetric(area, iso.xi)
        }
    }
}

/// L = m/2 Σ y_c'^2 - V with grad_potential(c, y) = ∂V/∂y_c.
fn kinetic_minus_potential(
    dim: usize,
    weight: Kernel,
    mass: f64,
    grad_potential: impl Fn(usize, &[f64]) -> f64 + Send + Sync + Copy + 'static,
) -> Result<LagrangianSpec> {
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::Usage(format!("mass must be positive, got {mass}")));
    }
    let value = move |args: &BundleArgs| {
        let kinetic: f64 = args.yp.iter().map(|v| v * v).sum();
        let mut potential = 0.0;
        for c in 0..dim {
            // grad is linear in y for every builtin, so V = y.grad/2.
            potential += 0.5 * args.y[c] * grad_potential(c, args.y);
        }
        0.5 * mass * kinetic - potential
    };
    let partial = move |j: usize, args: &BundleArgs| match slot_of(j, dim, 0, 0) {
        Some(Slot::Y(c)) => -grad_potential(c, args.y),
        Some(Slot::YPrime(c)) => mass * args.yp[c],
        _ => 0.0,
    };
    LagrangianSpec::new(dim, weight, vec![], vec![], value, partial)
}
