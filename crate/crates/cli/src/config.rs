//! Config document schema. Parsing is strict: unknown keys are errors, so a
//! typo cannot silently fall back to a default and change what a run means.

use std::fs;
use std::path::{Path, PathBuf};

use gfvc::{Error, Kernel, ParamSet, QuadratureSpec, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pset: Option<PsetCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputCfg>,
    /// Section for `op eval`: which operator, applied to which function.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<OpCfg>,
    /// Section for `ibp-check`: pairing route and the two functions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ibp: Option<IbpCfg>,
    /// Named builtin trajectory; commands solve for one when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transformation: Option<TransformCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_mode: Option<String>,
    /// When set, a residual (or flatness) above this value exits with code 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Usage(format!("config error: {e}")))
    }

    pub fn kernel_section(&self) -> Result<&KernelCfg> {
        self.kernel
            .as_ref()
            .ok_or_else(|| Error::Usage("this command needs a kernel section".into()))
    }

    pub fn pset_or_default(&self) -> Result<ParamSet> {
        match &self.pset {
            Some(c) => c.build(),
            None => ParamSet::left(0.0, 1.0),
        }
    }

    pub fn quad_or_default(&self) -> Result<QuadratureSpec> {
        match &self.quadrature {
            Some(c) => c.build(),
            None => Ok(QuadratureSpec::default()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCfg {
    /// riemann_liouville | hadamard | exponential | constant_one
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<f64>,
}

impl KernelCfg {
    pub fn build(&self) -> Result<Kernel> {
        match self.kind.as_str() {
            "riemann_liouville" => Kernel::riemann_liouville(self.require_order()?),
            "hadamard" => Kernel::hadamard(self.require_order()?),
            "exponential" => {
                let c = self
                    .coefficient
                    .ok_or_else(|| Error::Usage("exponential kernel needs a coefficient".into()))?;
                Kernel::exponential(c)
            }
            "constant_one" => Ok(Kernel::constant_one()),
            other => Err(Error::Usage(format!(
                "unknown kernel kind {other:?}; expected riemann_liouville, hadamard, \
                 exponential or constant_one"
            ))),
        }
    }

    /// Kernel actually stored by derivative-type operators: the configured
    /// order names the operator, so ordered kernels are complemented while
    /// order-free kinds pass through unchanged.
    pub fn build_for_derivative(&self) -> Result<Kernel> {
        match self.kind.as_str() {
            "riemann_liouville" | "hadamard" => self.build()?.complementary(),
            _ => self.build(),
        }
    }

    fn require_order(&self) -> Result<f64> {
        self.order
            .ok_or_else(|| Error::Usage(format!("{} kernel needs an order", self.kind)))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsetCfg {
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
}

impl PsetCfg {
    pub fn build(&self) -> Result<ParamSet> {
        ParamSet::new(self.a, self.b, self.p, self.q)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadCfg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes_per_panel: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading_exponent: Option<f64>,
}

impl QuadCfg {
    pub fn build(&self) -> Result<QuadratureSpec> {
        let d = QuadratureSpec::default();
        QuadratureSpec {
            nodes_per_panel: self.nodes_per_panel.unwrap_or(d.nodes_per_panel),
            panels: self.panels.unwrap_or(d.panels),
            grading_exponent: self.grading_exponent.unwrap_or(d.grading_exponent),
            ..d
        }
        .validated()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemCfg {
    /// free_particle | harmonic | dirichlet | example2_quadratic
    pub lagrangian: String,
    /// fixed_both | free_left
    pub boundary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_a: Option<Vec<f64>>,
    pub y_b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isoperimetric: Option<IsoCfg>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsoCfg {
    /// Prescribed value of the first component's integral.
    pub xi: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputCfg {
    pub path: PathBuf,
    /// csv | json
    pub format: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpCfg {
    /// integral | caputo | derivative
    pub operator: String,
    pub function: String,
    pub points: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IbpCfg {
    /// integral (plain pairing) | derivative (pairing with boundary bracket)
    pub route: String,
    pub f: String,
    pub g: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformCfg {
    /// translation | rotation_xy
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCfg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

impl GridCfg {
    pub fn resolve(&self, span: (f64, f64)) -> Result<Vec<f64>> {
        match (&self.points, self.count) {
            (Some(p), None) if !p.is_empty() => Ok(p.clone()),
            (None, Some(c)) if c >= 2 => Ok(gfvc::util::linspace(span.0, span.1, c)),
            _ => Err(Error::Usage(
                "grid section needs exactly one of points (non-empty) or count (>= 2)".into(),
            )),
        }
    }
}
