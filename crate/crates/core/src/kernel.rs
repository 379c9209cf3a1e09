//! Kernel catalog and the four-tuple parameter sets that select which side
//! (or mix of sides) of the interval an operator integrates over.
//!
//! Every kernel k(x, t) here is defined for t < x and factors as
//!
//! ```text
//! k(x, t) = s^sigma * rho(x, t, s),   s = x - t,
//! ```
//!
//! where sigma in (-1, 0] is a fixed singularity exponent and rho is smooth
//! and stably evaluable down to s = 0. The quadrature layer integrates the
//! s^sigma factor analytically through a power substitution, so rho is the
//! only part ever sampled. The one catalog member without a fixed exponent
//! (pointwise-variable order) opts out of the factorization and is handled
//! by a graded mesh instead.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::special::{gamma, recip_gamma};

/// Interval plus side weights: `p` scales the left branch (integration over
/// [a, x]) and `q` the right branch (over [x, b]).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamSet {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
}

impl ParamSet {
    pub fn new(a: f64, b: f64, p: f64, q: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && p.is_finite() && q.is_finite()) {
            return Err(Error::InvalidParamSet(format!(
                "all four entries must be finite, got ({a}, {b}, {p}, {q})"
            )));
        }
        if a >= b {
            return Err(Error::InvalidParamSet(format!(
                "interval must satisfy a < b, got a = {a}, b = {b}"
            )));
        }
        Ok(Self { a, b, p, q })
    }

    /// Pure left-sided operator on [a, b].
    pub fn left(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, 1.0, 0.0)
    }

    /// Pure right-sided operator on [a, b].
    pub fn right(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, 0.0, 1.0)
    }

    /// Swap the side weights. An involution: `ps.dual().dual() == ps`.
    pub fn dual(self) -> Self {
        Self {
            a: self.a,
            b: self.b,
            p: self.q,
            q: self.p,
        }
    }
}

/// Coarse integrability facts the validation layer reports on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Admissibility {
    /// k is square-integrable near its diagonal singularity (2 sigma > -1).
    /// For the power-type kernels this is the order > 1/2 condition that
    /// quadratic functionals need to attain their minimum.
    pub square_integrable: bool,
    /// k depends on x and t only through the difference x - t.
    pub difference_kernel: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelFamily {
    RiemannLiouville { alpha: f64 },
    Hadamard { alpha: f64 },
    VariableOrder,
    Exponential { rate: f64 },
    ConstantOne,
}

type RawFn = dyn Fn(f64, f64) -> f64 + Send + Sync;
type RegularFn = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct Kernel {
    family: KernelFamily,
    sigma: f64,
    raw: Arc<RawFn>,
    /// rho(x, t, s) with k = s^sigma * rho. None means the kernel has no
    /// fixed-exponent factorization; the quadrature layer then needs the
    /// pointwise order map below to keep exponents combined.
    regular: Option<Arc<RegularFn>>,
    order_map: Option<Arc<RawFn>>,
    requires_positive_domain: bool,
    difference_kernel: bool,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("family", &self.family)
            .field("sigma", &self.sigma)
            .finish()
    }
}

fn check_order(alpha: f64, what: &str) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidKernel(format!(
            "{what} requires order in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

impl Kernel {
    /// k(x, t) = (x - t)^(alpha - 1) / Gamma(alpha), alpha in (0, 1).
    pub fn riemann_liouville(alpha: f64) -> Result<Self> {
        check_order(alpha, "riemann_liouville")?;
        let norm = recip_gamma(alpha);
        Ok(Self {
            family: KernelFamily::RiemannLiouville { alpha },
            sigma: alpha - 1.0,
            raw: Arc::new(move |_x, _t| f64::NAN), // replaced below
            regular: Some(Arc::new(move |_x, _t, _s| norm)),
            order_map: None,
            requires_positive_domain: false,
            difference_kernel: true,
        }
        .with_raw_from_parts())
    }

    /// k(x, t) = (log(x/t))^(alpha - 1) / (t Gamma(alpha)), needs t > 0.
    pub fn hadamard(alpha: f64) -> Result<Self> {
        check_order(alpha, "hadamard")?;
        let norm = recip_gamma(alpha);
        let expo = alpha - 1.0;
        Ok(Self {
            family: KernelFamily::Hadamard { alpha },
            sigma: expo,
            raw: Arc::new(move |_x, _t| f64::NAN),
            // log(x/t) = log1p(s/t) ~ s/t as s -> 0, so the ratio
            // log1p(s/t)/s is smooth and positive down to the diagonal.
            regular: Some(Arc::new(move |_x, t, s| {
                ((s / t).ln_1p() / s).powf(expo) * norm / t
            })),
            order_map: None,
            requires_positive_domain: true,
            difference_kernel: false,
        }
        .with_raw_from_parts())
    }

    /// k(x, t) = exp(rate * (x - t)). Bounded; no singularity.
    pub fn exponential(rate: f64) -> Result<Self> {
        if !rate.is_finite() {
            return Err(Error::InvalidKernel(format!(
                "exponential rate must be finite, got {rate}"
            )));
        }
        Ok(Self {
            family: KernelFamily::Exponential { rate },
            sigma: 0.0,
            raw: Arc::new(move |_x, _t| f64::NAN),
            regular: Some(Arc::new(move |_x, _t, s| (rate * s).exp())),
            order_map: None,
            requires_positive_domain: false,
            difference_kernel: true,
        }
        .with_raw_from_parts())
    }

    /// k(x, t) = 1. Reduces the operators to their classical counterparts.
    pub fn constant_one() -> Self {
        Self {
            family: KernelFamily::ConstantOne,
            sigma: 0.0,
            raw: Arc::new(move |_x, _t| f64::NAN),
            regular: Some(Arc::new(move |_x, _t, _s| 1.0)),
            order_map: None,
            requires_positive_domain: false,
            difference_kernel: true,
        }
        .with_raw_from_parts()
    }

    /// k(x, t) = (x - t)^(order(x, t) - 1) / Gamma(order(x, t)) with a
    /// pointwise order map. The order is probed on a grid over
    /// `probe_domain` to confirm it stays in (0, 1) and to bound the worst
    /// singularity exponent, which the quadrature grading uses.
    pub fn variable_order<F>(order: F, probe_domain: (f64, f64)) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        let (a, b) = probe_domain;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidKernel(format!(
                "variable_order probe domain must be a finite interval, got ({a}, {b})"
            )));
        }
        let mut min_alpha = f64::INFINITY;
        let n = 33;
        for i in 0..n {
            let x = a + (b - a) * i as f64 / (n - 1) as f64;
            for j in 0..n {
                let t = a + (x - a) * j as f64 / (n - 1) as f64;
                let al = order(x, t.min(x));
                if !(al.is_finite() && al > 0.0 && al < 1.0) {
                    return Err(Error::InvalidKernel(format!(
                        "variable order map must stay in (0, 1); got {al} at (x, t) = ({x}, {t})"
                    )));
                }
                min_alpha = min_alpha.min(al);
            }
        }
        let order: Arc<RawFn> = Arc::new(order);
        let order_for_raw = order.clone();
        Ok(Self {
            family: KernelFamily::VariableOrder,
            sigma: min_alpha - 1.0,
            raw: Arc::new(move |x, t| {
                let al = order_for_raw(x, t);
                (x - t).powf(al - 1.0) * recip_gamma(al)
            }),
            regular: None,
            order_map: Some(order),
            requires_positive_domain: false,
            difference_kernel: false,
        })
    }

    fn with_raw_from_parts(mut self) -> Self {
        let sigma = self.sigma;
        let regular = self
            .regular
            .clone()
            .expect("with_raw_from_parts needs a regular part");
        self.raw = Arc::new(move |x, t| {
            let s = x - t;
            s.powf(sigma) * regular(x, t, s)
        });
        self
    }

    /// Pointwise value k(x, t). Only meaningful for t < x; the singular
    /// members return inf/NaN on or past the diagonal.
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        (self.raw)(x, t)
    }

    /// Fractional order alpha for the members that carry one.
    pub fn order(&self) -> Option<f64> {
        match self.family {
            KernelFamily::RiemannLiouville { alpha } | KernelFamily::Hadamard { alpha } => {
                Some(alpha)
            }
            _ => None,
        }
    }

    /// Same family, complementary order 1 - alpha. This is the kernel that
    /// the differential operators integrate against.
    pub fn complementary(&self) -> Result<Self> {
        match self.family {
            KernelFamily::RiemannLiouville { alpha } => Self::riemann_liouville(1.0 - alpha),
            KernelFamily::Hadamard { alpha } => Self::hadamard(1.0 - alpha),
            _ => Err(Error::InvalidKernel(format!(
                "{} carries no order to complement",
                self.family_name()
            ))),
        }
    }

    /// Rebuild the same family at a different order, where that makes sense.
    pub fn same_family_with_order(&self, order: f64) -> Result<Self> {
        match self.family {
            KernelFamily::RiemannLiouville { .. } => Self::riemann_liouville(order),
            KernelFamily::Hadamard { .. } => Self::hadamard(order),
            _ => Err(Error::InvalidKernel(format!(
                "{} has no order parameter to change",
                self.family_name()
            ))),
        }
    }

    /// Worst-case exponent sigma with k ~ s^sigma near the diagonal.
    pub fn singularity_exponent(&self) -> f64 {
        self.sigma
    }

    pub fn is_singular(&self) -> bool {
        self.sigma < 0.0
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            KernelFamily::RiemannLiouville { .. } => "riemann_liouville",
            KernelFamily::Hadamard { .. } => "hadamard",
            KernelFamily::VariableOrder => "variable_order",
            KernelFamily::Exponential { .. } => "exponential",
            KernelFamily::ConstantOne => "constant_one",
        }
    }

    /// True for kernels whose formula needs t > 0 (log-type).
    pub fn requires_positive_domain(&self) -> bool {
        self.requires_positive_domain
    }

    pub fn admissibility(&self) -> Admissibility {
        Admissibility {
            square_integrable: 2.0 * self.sigma > -1.0,
            difference_kernel: self.difference_kernel,
        }
    }

    pub(crate) fn regular_part(&self) -> Option<&Arc<RegularFn>> {
        self.regular.as_ref()
    }

    pub(crate) fn order_map(&self) -> Option<&Arc<RawFn>> {
        self.order_map.as_ref()
    }
}

/// Gamma is re-exported at the crate root; keep a crate-local alias so the
/// operator modules can spell normalisations without the extra import.
#[allow(dead_code)]
pub(crate) fn gamma_fn(x: f64) -> f64 {
    gamma(x)
}
