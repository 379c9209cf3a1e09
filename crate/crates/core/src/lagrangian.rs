//! Problem descriptions. An integrand sees, at each time, a bundle of
//! trajectory data: the time itself, the component values, their slopes,
//! any number of fractional-derivative values and fractional-integral
//! values of the components. Partial derivatives of the integrand are
//! addressed through a single flat 1-based index layout:
//!
//! ```text
//! 1            t
//! 2 ..= N+1    y_1 .. y_N
//! N+2 ..= 2N+1 y'_1 .. y'_N
//! then n blocks of N for the derivative arguments,
//! then m blocks of N for the integral arguments,
//! ```
//!
//! ending at (n+m+2)N+1. The `Slot` enum names positions in that layout so
//! call sites never hand-roll the arithmetic.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelFamily, ParamSet};
use crate::quad::QuadratureSpec;

/// Everything the integrand may depend on at one time point. `v` holds the
/// fractional-derivative values and `w` the fractional-integral values,
/// flattened row-major: entry `arg * dim + comp`.
#[derive(Clone, Copy, Debug)]
pub struct BundleArgs<'a> {
    pub t: f64,
    pub y: &'a [f64],
    pub yp: &'a [f64],
    pub v: &'a [f64],
    pub w: &'a [f64],
}

impl BundleArgs<'_> {
    pub fn frac_deriv(&self, arg: usize, comp: usize) -> f64 {
        self.v[arg * self.y.len() + comp]
    }

    pub fn frac_int(&self, arg: usize, comp: usize) -> f64 {
        self.w[arg * self.y.len() + comp]
    }
}

/// One fractional-operator argument of the integrand. For derivative
/// arguments the kernel realizes the complementary order (an argument of
/// order beta carries the kernel of order 1 - beta, which is what the
/// derivative operators integrate against); integral arguments carry the
/// kernel at their own order.
#[derive(Clone, Debug)]
pub struct FracOp {
    pub kernel: Kernel,
    pub pset: ParamSet,
}

impl FracOp {
    pub fn new(kernel: Kernel, pset: ParamSet) -> Self {
        Self { kernel, pset }
    }

    fn signature_matches(&self, other: &Self) -> bool {
        self.kernel.family() == other.kernel.family() && self.pset == other.pset
    }
}

/// Named position in the flat partial-derivative layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Time,
    /// Component index, 0-based.
    Y(usize),
    YPrime(usize),
    /// `arg` selects which derivative argument, `comp` the component.
    FracDeriv {
        arg: usize,
        comp: usize,
    },
    FracInt {
        arg: usize,
        comp: usize,
    },
}

/// Flat 1-based index of a slot, given the component count and the number
/// of derivative arguments (the integral blocks come after all derivative
/// blocks, so their offset needs it).
pub fn flat_index(slot: Slot, dim: usize, n_derivs: usize) -> usize {
    match slot {
        Slot::Time => 1,
        Slot::Y(c) => 2 + c,
        Slot::YPrime(c) => dim + 2 + c,
        Slot::FracDeriv { arg, comp } => (arg + 2) * dim + 2 + comp,
        Slot::FracInt { arg, comp } => (n_derivs + 2 + arg) * dim + 2 + comp,
    }
}

/// Inverse of `flat_index`. None when the index falls outside the layout
/// for the given shape.
pub fn slot_of(index: usize, dim: usize, n_derivs: usize, n_ints: usize) -> Option<Slot> {
    if index == 0 || index > (n_derivs + n_ints + 2) * dim + 1 {
        return None;
    }
    if index == 1 {
        return Some(Slot::Time);
    }
    let off = index - 2;
    let block = off / dim;
    let comp = off % dim;
    Some(match block {
        0 => Slot::Y(comp),
        1 => Slot::YPrime(comp),
        b if b - 2 < n_derivs => Slot::FracDeriv { arg: b - 2, comp },
        b => Slot::FracInt {
            arg: b - 2 - n_derivs,
            comp,
        },
    })
}

type IntegrandFn = dyn Fn(&BundleArgs) -> f64 + Send + Sync;
type PartialFn = dyn Fn(usize, &BundleArgs) -> f64 + Send + Sync;

/// The integrand of a variational problem plus the machinery it depends
/// on: partial derivatives in the flat layout, the outer weight kernel,
/// and the fractional-operator arguments.
#[derive(Clone)]
pub struct LagrangianSpec {
    dim: usize,
    integrand: Arc<IntegrandFn>,
    partial: Arc<PartialFn>,
    weight: Kernel,
    frac_derivs: Vec<FracOp>,
    frac_ints: Vec<FracOp>,
}

impl std::fmt::Debug for LagrangianSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LagrangianSpec")
            .field("dim", &self.dim)
            .field("weight", &self.weight)
            .field("frac_derivs", &self.frac_derivs.len())
            .field("frac_ints", &self.frac_ints.len())
            .finish()
    }
}

impl LagrangianSpec {
    pub fn new<F, P>(
        dim: usize,
        weight: Kernel,
        frac_derivs: Vec<FracOp>,
        frac_ints: Vec<FracOp>,
        integrand: F,
        partial: P,
    ) -> Result<Self>
    where
        F: Fn(&BundleArgs) -> f64 + Send + Sync + 'static,
        P: Fn(usize, &BundleArgs) -> f64 + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::Usage(
                "integrand needs at least one trajectory component".into(),
            ));
        }
        Ok(Self {
            dim,
            integrand: Arc::new(integrand),
            partial: Arc::new(partial),
            weight,
            frac_derivs,
            frac_ints,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weight(&self) -> &Kernel {
        &self.weight
    }

    pub fn frac_derivs(&self) -> &[FracOp] {
        &self.frac_derivs
    }

    pub fn frac_ints(&self) -> &[FracOp] {
        &self.frac_ints
    }

    pub fn n_frac_derivs(&self) -> usize {
        self.frac_derivs.len()
    }

    pub fn n_frac_ints(&self) -> usize {
        self.frac_ints.len()
    }

    /// Largest valid flat index: (n + m + 2) dim + 1.
    pub fn max_flat_index(&self) -> usize {
        (self.frac_derivs.len() + self.frac_ints.len() + 2) * self.dim + 1
    }

    pub fn eval(&self, args: &BundleArgs) -> f64 {
        (self.integrand)(args)
    }

    pub fn partial_flat(&self, index: usize, args: &BundleArgs) -> f64 {
        debug_assert!(
            index >= 2 && index <= self.max_flat_index(),
            "partial index {index} outside layout"
        );
        (self.partial)(index, args)
    }

    pub fn partial(&self, slot: Slot, args: &BundleArgs) -> f64 {
        self.partial_flat(flat_index(slot, self.dim, self.frac_derivs.len()), args)
    }

    /// Same component count, weight family, and fractional-argument shape
    /// (kernel families, orders, parameter sets). Required before two
    /// integrands can be combined or share precomputed operator tables.
    pub fn signature_matches(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.weight.family() == other.weight.family()
            && self.frac_derivs.len() == other.frac_derivs.len()
            && self.frac_ints.len() == other.frac_ints.len()
            && self
                .frac_derivs
                .iter()
                .zip(other.frac_derivs.iter())
                .all(|(a, b)| a.signature_matches(b))
            && self
                .frac_ints
                .iter()
                .zip(other.frac_ints.iter())
                .all(|(a, b)| a.signature_matches(b))
    }

    /// The integrand f - lambda g with partials combined the same way.
    /// Both inputs must share their fractional-argument signature; the
    /// result reuses f's kernels.
    pub fn linear_combination(f: &Self, g: &Self, lambda: f64) -> Result<Self> {
        if !f.signature_matches(g) {
            return Err(Error::Usage(
                "cannot combine integrands with different fractional-argument shapes".into(),
            ));
        }
        let (fi, gi) = (f.integrand.clone(), g.integrand.clone());
        let (fp, gp) = (f.partial.clone(), g.partial.clone());
        Ok(Self {
            dim: f.dim,
            integrand: Arc::new(move |args: &BundleArgs| fi(args) - lambda * gi(args)),
            partial: Arc::new(move |j: usize, args: &BundleArgs| {
                fp(j, args) - lambda * gp(j, args)
            }),
            weight: f.weight.clone(),
            frac_derivs: f.frac_derivs.clone(),
            frac_ints: f.frac_ints.clone(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Both trajectory endpoints pinned to given values.
    FixedBoth,
    /// Left endpoint free (the solver imposes nothing there; stationarity
    /// supplies a natural boundary condition), right endpoint pinned.
    FreeLeft,
}

/// An integral constraint: the same kind of weighted functional as the
/// objective, required to hit a target value.
#[derive(Clone, Debug)]
pub struct IsoperimetricSpec {
    pub integrand: LagrangianSpec,
    pub target: f64,
}

/// A complete variational problem: minimize the weighted integral of the
/// integrand over trajectories satisfying the boundary data. The outer
/// integral is always the left-branch kernel integral evaluated at b, so
/// the weight is k(b, t).
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    lagrangian: LagrangianSpec,
    interval: (f64, f64),
    boundary_mode: BoundaryMode,
    y_a: Option<Vec<f64>>,
    y_b: Vec<f64>,
    quad: QuadratureSpec,
    diff_step: f64,
    isoperimetric: Option<IsoperimetricSpec>,
}

fn reject_variable_order(kernel: &Kernel, role: &str) -> Result<()> {
    if matches!(kernel.family(), KernelFamily::VariableOrder) {
        return Err(Error::Usage(format!(
            "variable-order kernels are supported at the operator level only, \
             not as the {role} of a variational problem"
        )));
    }
    Ok(())
}

impl ProblemSpec {
    fn build(
        lagrangian: LagrangianSpec,
        interval: (f64, f64),
        boundary_mode: BoundaryMode,
        y_a: Option<Vec<f64>>,
        y_b: Vec<f64>,
    ) -> Result<Self> {
        let (a, b) = interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Domain(format!(
                "problem interval must be finite with a < b, got [{a}, {b}]"
            )));
        }
        if y_b.len() != lagrangian.dim() {
            return Err(Error::Usage(format!(
                "right boundary data has {} entries for {} components",
                y_b.len(),
                lagrangian.dim()
            )));
        }
        if let Some(ya) = &y_a {
            if ya.len() != lagrangian.dim() {
                return Err(Error::Usage(format!(
                    "left boundary data has {} entries for {} components",
                    ya.len(),
                    lagrangian.dim()
                )));
            }
            if !ya.iter().all(|v| v.is_finite()) {
                return Err(Error::Usage("left boundary data must be finite".into()));
            }
        }
        if !y_b.iter().all(|v| v.is_finite()) {
            return Err(Error::Usage("right boundary data must be finite".into()));
        }
        reject_variable_order(lagrangian.weight(), "weight kernel")?;
        if lagrangian.weight().requires_positive_domain() && a <= 0.0 {
            return Err(Error::Domain(format!(
                "{} weight kernel needs a strictly positive interval, got a = {a}",
                lagrangian.weight().family_name()
            )));
        }
        for (role, ops) in [
            ("derivative argument", lagrangian.frac_derivs()),
            ("integral argument", lagrangian.frac_ints()),
        ] {
            for (i, op) in ops.iter().enumerate() {
                reject_variable_order(&op.kernel, role)?;
                if op.pset.a != a || op.pset.b != b {
                    return Err(Error::Usage(format!(
                        "{role} {i} integrates over [{}, {}] but the problem lives on [{a}, {b}]",
                        op.pset.a, op.pset.b
                    )));
                }
                if op.kernel.requires_positive_domain() && a <= 0.0 {
                    return Err(Error::Domain(format!(
                        "{} kernel of {role} {i} needs a strictly positive interval",
                        op.kernel.family_name()
                    )));
                }
            }
        }
        Ok(Self {
            lagrangian,
            interval,
            boundary_mode,
            y_a,
            y_b,
            quad: QuadratureSpec::default(),
            diff_step: 1e-3 * (b - a),
            isoperimetric: None,
        })
    }

    pub fn fixed_both(
        lagrangian: LagrangianSpec,
        interval: (f64, f64),
        y_a: Vec<f64>,
        y_b: Vec<f64>,
    ) -> Result<Self> {
        Self::build(
            lagrangian,
            interval,
            BoundaryMode::FixedBoth,
            Some(y_a),
            y_b,
        )
    }

    pub fn free_left(
        lagrangian: LagrangianSpec,
        interval: (f64, f64),
        y_b: Vec<f64>,
    ) -> Result<Self> {
        Self::build(lagrangian, interval, BoundaryMode::FreeLeft, None, y_b)
    }

    pub fn with_quad(mut self, quad: QuadratureSpec) -> Result<Self> {
        self.quad = quad.validated()?;
        Ok(self)
    }

    pub fn with_diff_step(mut self, diff_step: f64) -> Result<Self> {
        let width = self.interval.1 - self.interval.0;
        if !(diff_step.is_finite() && diff_step > 0.0 && diff_step < 0.25 * width) {
            return Err(Error::Usage(format!(
                "diff_step must lie in (0, {}), got {diff_step}",
                0.25 * width
            )));
        }
        self.diff_step = diff_step;
        Ok(self)
    }

    /// Attach an integral constraint. The constraint integrand must share
    /// the objective's component count, weight family, and fractional
    /// arguments, so both can be discretized on the same operator tables.
    pub fn with_isoperimetric(mut self, integrand: LagrangianSpec, target: f64) -> Result<Self> {
        if !self.lagrangian.signature_matches(&integrand) {
            return Err(Error::Usage(
                "constraint integrand must share the objective's component count, \
                 weight kernel family, and fractional-argument shape"
                    .into(),
            ));
        }
        if !target.is_finite() {
            return Err(Error::Usage(format!(
                "constraint target must be finite, got {target}"
            )));
        }
        self.isoperimetric = Some(IsoperimetricSpec { integrand, target });
        Ok(self)
    }

    pub fn lagrangian(&self) -> &LagrangianSpec {
        &self.lagrangian
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn boundary_mode(&self) -> BoundaryMode {
        self.boundary_mode
    }

    pub fn y_a(&self) -> Option<&[f64]> {
        self.y_a.as_deref()
    }

    pub fn y_b(&self) -> &[f64] {
        &self.y_b
    }

    pub fn quad(&self) -> &QuadratureSpec {
        &self.quad
    }

    pub fn diff_step(&self) -> f64 {
        self.diff_step
    }

    pub fn isoperimetric(&self) -> Option<&IsoperimetricSpec> {
        self.isoperimetric.as_ref()
    }

    /// The parameter set the functional itself integrates over: the pure
    /// left branch of [a, b], evaluated at b.
    pub fn functional_pset(&self) -> ParamSet {
        ParamSet {
            a: self.interval.0,
            b: self.interval.1,
            p: 1.0,
            q: 0.0,
        }
    }

    /// The outer weight w(t) = k(b, t).
    pub fn weight_at(&self, t: f64) -> f64 {
        self.lagrangian.weight().eval(self.interval.1, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dummy_kernel() -> Kernel {
        Kernel::constant_one()
    }

    fn quadratic_lagrangian(dim: usize) -> LagrangianSpec {
        LagrangianSpec::new(
            dim,
            dummy_kernel(),
            vec![],
            vec![],
            |args: &BundleArgs| 0.5 * args.yp.iter().map(|v| v * v).sum::<f64>(),
            |j: usize, args: &BundleArgs| {
                // d/d(yp_c) = yp_c for the y' block, 0 elsewhere.
                let dim = args.y.len();
                match slot_of(j, dim, 0, 0) {
                    Some(Slot::YPrime(c)) => args.yp[c],
                    _ => 0.0,
                }
            },
        )
        .unwrap()
    }

    #[test]
    fn flat_layout_round_trips() {
        let (dim, n, m) = (3, 2, 1);
        let top = (n + m + 2) * dim + 1;
        assert_eq!(top, 16);
        for j in 1..=top {
            let slot = slot_of(j, dim, n, m).unwrap();
            assert_eq!(flat_index(slot, dim, n), j, "index {j} did not round trip");
        }
        assert!(slot_of(0, dim, n, m).is_none());
        assert!(slot_of(top + 1, dim, n, m).is_none());
    }

    #[test]
    fn block_boundaries_match_layout() {
        let (dim, n) = (3, 2);
        assert_eq!(flat_index(Slot::Y(0), dim, n), 2);
        assert_eq!(flat_index(Slot::Y(2), dim, n), 4);
        assert_eq!(flat_index(Slot::YPrime(0), dim, n), 5);
        assert_eq!(flat_index(Slot::YPrime(2), dim, n), 7);
        assert_eq!(flat_index(Slot::FracDeriv { arg: 0, comp: 0 }, dim, n), 8);
        assert_eq!(flat_index(Slot::FracDeriv { arg: 1, comp: 2 }, dim, n), 13);
        assert_eq!(flat_index(Slot::FracInt { arg: 0, comp: 0 }, dim, n), 14);
        assert_eq!(flat_index(Slot::FracInt { arg: 0, comp: 2 }, dim, n), 16);
    }

    #[test]
    fn partial_dispatches_through_slots() {
        let spec = LagrangianSpec::new(
            2,
            dummy_kernel(),
            vec![],
            vec![],
            |_: &BundleArgs| 0.0,
            |j: usize, _: &BundleArgs| j as f64,
        )
        .unwrap();
        let args = BundleArgs {
            t: 0.0,
            y: &[0.0, 0.0],
            yp: &[0.0, 0.0],
            v: &[],
            w: &[],
        };
        assert_eq!(spec.partial(Slot::Y(1), &args), 3.0);
        assert_eq!(spec.partial(Slot::YPrime(0), &args), 4.0);
        assert_eq!(spec.max_flat_index(), 5);
    }

    #[test]
    fn problem_construction_checks_shapes() {
        let lag = quadratic_lagrangian(2);
        assert!(
            ProblemSpec::fixed_both(lag.clone(), (0.0, 1.0), vec![0.0, 0.0], vec![1.0, 1.0])
                .is_ok()
        );
        assert!(
            ProblemSpec::fixed_both(lag.clone(), (0.0, 1.0), vec![0.0], vec![1.0, 1.0]).is_err()
        );
        assert!(
            ProblemSpec::fixed_both(lag.clone(), (1.0, 0.0), vec![0.0, 0.0], vec![1.0, 1.0])
                .is_err()
        );
        assert!(ProblemSpec::free_left(lag, (0.0, 1.0), vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn variable_order_is_rejected_in_problems() {
        let vo = Kernel::variable_order(|_, _| 0.5, (0.0, 1.0)).unwrap();
        let lag = LagrangianSpec::new(
            1,
            vo,
            vec![],
            vec![],
            |_: &BundleArgs| 0.0,
            |_: usize, _: &BundleArgs| 0.0,
        )
        .unwrap();
        let r = ProblemSpec::fixed_both(lag, (0.0, 1.0), vec![0.0], vec![1.0]);
        assert!(matches!(r, Err(Error::Usage(_))));
    }

    #[test]
    fn frac_arg_interval_must_match_problem() {
        let k = Kernel::riemann_liouville(0.5).unwrap();
        let lag = LagrangianSpec::new(
            1,
            Kernel::constant_one(),
            vec![FracOp::new(k, ParamSet::left(0.0, 2.0).unwrap())],
            vec![],
            |_: &BundleArgs| 0.0,
            |_: usize, _: &BundleArgs| 0.0,
        )
        .unwrap();
        let r = ProblemSpec::fixed_both(lag, (0.0, 1.0), vec![0.0], vec![1.0]);
        assert!(matches!(r, Err(Error::Usage(_))));
    }

    #[test]
    fn isoperimetric_requires_matching_shape() {
        let f = quadratic_lagrangian(1);
        let g_same = LagrangianSpec::new(
            1,
            dummy_kernel(),
            vec![],
            vec![],
            |args: &BundleArgs| args.y[0],
            |j: usize, args: &BundleArgs| {
                matches!(slot_of(j, args.y.len(), 0, 0), Some(Slot::Y(0))) as u8 as f64
            },
        )
        .unwrap();
        let g_other_kernel = LagrangianSpec::new(
            1,
            Kernel::exponential(0.5).unwrap(),
            vec![],
            vec![],
            |args: &BundleArgs| args.y[0],
            |_: usize, _: &BundleArgs| 0.0,
        )
        .unwrap();
        let p = ProblemSpec::fixed_both(f, (0.0, 1.0), vec![0.0], vec![0.0]).unwrap();
        assert!(p.clone().with_isoperimetric(g_same, 0.25).is_ok());
        assert!(p.with_isoperimetric(g_other_kernel, 0.25).is_err());
    }

    #[test]
    fn combination_mixes_values_and_partials() {
        let f = quadratic_lagrangian(1);
        let g = LagrangianSpec::new(
            1,
            dummy_kernel(),
            vec![],
            vec![],
            |args: &BundleArgs| args.y[0],
            |j: usize, args: &BundleArgs| {
                matches!(slot_of(j, args.y.len(), 0, 0), Some(Slot::Y(0))) as u8 as f64
            },
        )
        .unwrap();
        let h = LagrangianSpec::linear_combination(&f, &g, 2.0).unwrap();
        let args = BundleArgs {
            t: 0.3,
            y: &[5.0],
            yp: &[3.0],
            v: &[],
            w: &[],
        };
        assert_eq!(h.eval(&args), 0.5 * 9.0 - 2.0 * 5.0);
        assert_eq!(h.partial(Slot::Y(0), &args), -2.0);
        assert_eq!(h.partial(Slot::YPrime(0), &args), 3.0);
    }

    #[test]
    fn weight_is_anchored_at_right_endpoint() {
        let lag = LagrangianSpec::new(
            1,
            Kernel::exponential(0.3).unwrap(),
            vec![],
            vec![],
            |_: &BundleArgs| 0.0,
            |_: usize, _: &BundleArgs| 0.0,
        )
        .unwrap();
        let p = ProblemSpec::fixed_both(lag, (0.0, 1.0), vec![0.0], vec![1.0]).unwrap();
        let ps = p.functional_pset();
        assert_eq!((ps.a, ps.b, ps.p, ps.q), (0.0, 1.0, 1.0, 0.0));
        // w(t) = exp(0.3 (1 - t)).
        assert!((p.weight_at(0.0) - (0.3_f64).exp()).abs() < 1e-14);
        assert!((p.weight_at(1.0) - 1.0).abs() < 1e-14);
    }
}
