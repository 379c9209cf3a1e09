//! Function handles: scalar or vector trajectories on an interval, with
//! optional analytic derivatives. When a derivative is missing the handle
//! falls back to fourth-order finite differences, so sampled trajectories
//! remain usable by the differential operators (at reduced accuracy, which
//! callers can detect through `deriv_source`).

use std::sync::Arc;

use crate::diff::{deriv4_bounded, second_deriv_bounded};
use crate::error::{Error, Result};

type VecFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// Where first-derivative values come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivSource {
    Analytic,
    FiniteDifference,
}

#[derive(Clone)]
pub struct FunctionHandle {
    dim: usize,
    domain: (f64, f64),
    f: Arc<VecFn>,
    df: Option<Arc<VecFn>>,
    d2f: Option<Arc<VecFn>>,
}

/// Step scale for the finite-difference fallback, relative to the domain
/// width. Balanced for fourth-order stencils in double precision.
const FD_STEP_SCALE: f64 = 1e-4;

impl FunctionHandle {
    fn validate_domain(domain: (f64, f64)) -> Result<()> {
        if !(domain.0.is_finite() && domain.1.is_finite() && domain.0 < domain.1) {
            return Err(Error::Domain(format!(
                "function domain must be a finite interval, got [{}, {}]",
                domain.0, domain.1
            )));
        }
        Ok(())
    }

    pub fn scalar<F>(domain: (f64, f64), f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::validate_domain(domain)?;
        Ok(Self {
            dim: 1,
            domain,
            f: Arc::new(move |t| vec![f(t)]),
            df: None,
            d2f: None,
        })
    }

    pub fn scalar_with_deriv<F, G>(domain: (f64, f64), f: F, df: G) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::validate_domain(domain)?;
        Ok(Self {
            dim: 1,
            domain,
            f: Arc::new(move |t| vec![f(t)]),
            df: Some(Arc::new(move |t| vec![df(t)])),
            d2f: None,
        })
    }

    pub fn scalar_c2<F, G, H>(domain: (f64, f64), f: F, df: G, d2f: H) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        H: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::validate_domain(domain)?;
        Ok(Self {
            dim: 1,
            domain,
            f: Arc::new(move |t| vec![f(t)]),
            df: Some(Arc::new(move |t| vec![df(t)])),
            d2f: Some(Arc::new(move |t| vec![d2f(t)])),
        })
    }

    pub fn vector<F>(domain: (f64, f64), dim: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::validate_domain(domain)?;
        if dim == 0 {
            return Err(Error::Usage("function dimension must be at least 1".into()));
        }
        Ok(Self {
            dim,
            domain,
            f: Arc::new(f),
            df: None,
            d2f: None,
        })
    }

    pub fn vector_with_deriv<F, G>(domain: (f64, f64), dim: usize, f: F, df: G) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
        G: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        let mut h = Self::vector(domain, dim, f)?;
        h.df = Some(Arc::new(df));
        Ok(h)
    }

    pub fn vector_c2<F, G, H>(domain: (f64, f64), dim: usize, f: F, df: G, d2f: H) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
        G: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
        H: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        let mut h = Self::vector_with_deriv(domain, dim, f, df)?;
        h.d2f = Some(Arc::new(d2f));
        Ok(h)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn covers(&self, interval: (f64, f64)) -> bool {
        // Tiny slack: difference stencils may poke a rounding error outside.
        let slack = 1e-12 * (self.domain.1 - self.domain.0);
        self.domain.0 - slack <= interval.0 && interval.1 <= self.domain.1 + slack
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let v = (self.f)(t);
        debug_assert_eq!(v.len(), self.dim, "component count mismatch at t = {t}");
        v
    }

    pub fn eval_scalar(&self, t: f64) -> f64 {
        debug_assert_eq!(self.dim, 1);
        self.eval(t)[0]
    }

    pub fn deriv_source(&self) -> DerivSource {
        if self.df.is_some() {
            DerivSource::Analytic
        } else {
            DerivSource::FiniteDifference
        }
    }

    fn fd_step(&self) -> f64 {
        FD_STEP_SCALE * (self.domain.1 - self.domain.0)
    }

    pub fn deriv(&self, t: f64) -> Vec<f64> {
        if let Some(df) = &self.df {
            let v = df(t);
            debug_assert_eq!(v.len(), self.dim);
            return v;
        }
        let h = self.fd_step();
        let (lo, hi) = self.domain;
        (0..self.dim)
            .map(|j| {
                let f = &self.f;
                deriv4_bounded(&move |x| f(x)[j], t, h, lo, hi)
            })
            .collect()
    }

    pub fn deriv_scalar(&self, t: f64) -> f64 {
        debug_assert_eq!(self.dim, 1);
        self.deriv(t)[0]
    }

    /// Second derivative when the handle can provide one without resorting
    /// to value-level differences: analytic if present, else differentiated
    /// from an analytic first derivative. Returns None when only values are
    /// available; callers that need a second derivative then build a spline.
    pub fn second_deriv(&self, t: f64) -> Option<Vec<f64>> {
        if let Some(d2f) = &self.d2f {
            let v = d2f(t);
            debug_assert_eq!(v.len(), self.dim);
            return Some(v);
        }
        if let Some(df) = &self.df {
            let h = self.fd_step();
            let (lo, hi) = self.domain;
            return Some(
                (0..self.dim)
                    .map(|j| {
                        let df = df.clone();
                        deriv4_bounded(&move |x| df(x)[j], t, h, lo, hi)
                    })
                    .collect(),
            );
        }
        None
    }

    /// Value-level second difference, for diagnostics that can tolerate the
    /// extra noise when neither analytic derivative exists.
    pub fn second_deriv_fd(&self, t: f64) -> Vec<f64> {
        let h = self.fd_step().max(1e-5 * (self.domain.1 - self.domain.0));
        let (lo, hi) = self.domain;
        (0..self.dim)
            .map(|j| {
                let f = &self.f;
                second_deriv_bounded(&move |x| f(x)[j], t, h, lo, hi)
            })
            .collect()
    }
}

impl std::fmt::Debug for FunctionHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FunctionHandle")
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("deriv", &self.deriv_source())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn analytic_deriv_is_used_verbatim() {
        let h = FunctionHandle::scalar_with_deriv((0.0, 1.0), |t| t * t, |_| 42.0).unwrap();
        assert_eq!(h.deriv_scalar(0.3), 42.0);
        assert_eq!(h.deriv_source(), DerivSource::Analytic);
    }

    #[test]
    fn fd_fallback_matches_analytic() {
        let h = FunctionHandle::scalar((0.0, 1.0), |t| (3.0 * t).exp()).unwrap();
        assert_eq!(h.deriv_source(), DerivSource::FiniteDifference);
        for t in [0.0, 0.01, 0.5, 0.99, 1.0] {
            assert_relative_eq!(
                h.deriv_scalar(t),
                3.0 * (3.0 * t).exp(),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn second_deriv_resolution_order() {
        let c2 =
            FunctionHandle::scalar_c2((0.0, 1.0), |t| t.sin(), |t| t.cos(), |t| -t.sin()).unwrap();
        assert_relative_eq!(c2.second_deriv(0.4).unwrap()[0], -0.4_f64.sin());

        let c1 = FunctionHandle::scalar_with_deriv((0.0, 1.0), |t| t.sin(), |t| t.cos()).unwrap();
        assert_relative_eq!(
            c1.second_deriv(0.4).unwrap()[0],
            -0.4_f64.sin(),
            max_relative = 1e-8
        );

        let c0 = FunctionHandle::scalar((0.0, 1.0), |t| t.sin()).unwrap();
        assert!(c0.second_deriv(0.4).is_none());
        assert_relative_eq!(
            c0.second_deriv_fd(0.4)[0],
            -0.4_f64.sin(),
            max_relative = 1e-4
        );
    }

    #[test]
    fn vector_components() {
        let h = FunctionHandle::vector_with_deriv(
            (0.0, 2.0),
            2,
            |t| vec![t, t * t],
            |t| vec![1.0, 2.0 * t],
        )
        .unwrap();
        assert_eq!(h.eval(1.5), vec![1.5, 2.25]);
        assert_eq!(h.deriv(1.5), vec![1.0, 3.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(FunctionHandle::scalar((1.0, 1.0), |_| 0.0).is_err());
        assert!(FunctionHandle::vector((0.0, 1.0), 0, |_| vec![]).is_err());
    }
}
