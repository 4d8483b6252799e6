//! TOML scenario files.

use std::f64::consts::PI;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::kernel::{mollify_delay, AcDensity, Atom, MeasureKernel};
use crate::mesh_fem::{assemble, build_mesh, CoefficientField};
use crate::quadrature::integrate_with_breaks;
use crate::stepper::{Forcing, History, ProblemSpec};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub domain: DomainConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub coefficients: CoefficientConfig,
    #[serde(default)]
    pub forcing: ForcingConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub history: HistoryConfig,
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(rename = "L", alias = "length", default = "one")]
    pub length: f64,
    pub n_elements: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T", alias = "horizon")]
    pub horizon: f64,
    pub dt: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    #[serde(default = "one")]
    pub a0: f64,
    #[serde(default = "one")]
    pub a1: f64,
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        Self { a0: 1.0, a1: 1.0 }
    }
}

/// Kernel block: `type` is one of none, fractional, exponential, atom,
/// mollified, mixed.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(rename = "type", default = "none_str")]
    pub kind: String,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub mass: Option<f64>,
    pub tau: Option<f64>,
    pub eps: Option<f64>,
    pub tau_max: Option<f64>,
    #[serde(default)]
    pub components: Vec<KernelConfig>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            kind: none_str(),
            alpha: None,
            beta: None,
            mass: None,
            tau: None,
            eps: None,
            tau_max: None,
            components: Vec::new(),
        }
    }
}

fn none_str() -> String {
    "none".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingConfig {
    #[serde(rename = "type", default = "zero_str")]
    pub kind: String,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one_usize")]
    pub mode: usize,
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default)]
    pub values: Vec<f64>,
}

impl Default for ForcingConfig {
    fn default() -> Self {
        Self {
            kind: zero_str(),
            amplitude: 1.0,
            mode: 1,
            times: Vec::new(),
            values: Vec::new(),
        }
    }
}

fn zero_str() -> String {
    "zero".into()
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(rename = "type", default = "eigenmode_str")]
    pub kind: String,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one_usize")]
    pub mode: usize,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            kind: eigenmode_str(),
            amplitude: 1.0,
            mode: 1,
        }
    }
}

fn eigenmode_str() -> String {
    "eigenmode".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryConfig {
    #[serde(rename = "type", default = "constant_str")]
    pub kind: String,
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default)]
    pub values: Vec<f64>,
}

impl Default for HistoryConfig {
    fn default() -> Self {
        Self {
            kind: constant_str(),
            times: Vec::new(),
            values: Vec::new(),
        }
    }
}

fn constant_str() -> String {
    "constant".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Sweep length for vanishing memory and longtime checkpoints.
    pub levels: Option<usize>,
    /// Mollification widths as fractions of the delay.
    pub eps_factors: Option<Vec<f64>>,
    /// Scales `c` for the kernel pairs `(c μ, μ)`.
    pub scales: Option<Vec<f64>>,
    pub safety: Option<f64>,
    pub picard_tol: Option<f64>,
    pub ensemble: Option<usize>,
    pub seed: Option<u64>,
    pub nodes: Option<usize>,
    /// Scalar delay equation parameters.
    pub alpha: Option<f64>,
    pub mass: Option<f64>,
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: Option<String>,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn need(v: Option<f64>, field: &str, block: &str) -> Result<f64> {
    v.ok_or_else(|| cfg_err(format!("kernel block `{block}` needs field `{field}`")))
}

impl KernelConfig {
    fn ac_and_atoms(&self, horizon: f64) -> Result<(AcDensity, Vec<Atom>, f64)> {
        let tau_max = self.tau_max.unwrap_or(horizon);
        match self.kind.as_str() {
            "none" => Ok((AcDensity::None, Vec::new(), 0.0)),
            "fractional" => {
                let alpha = need(self.alpha, "alpha", "fractional")?;
                let weight = self.mass.unwrap_or(1.0);
                Ok((AcDensity::Fractional { alpha, weight }, Vec::new(), tau_max))
            }
            "exponential" => {
                let beta = need(self.beta, "beta", "exponential")?;
                let mass = self.mass.unwrap_or(1.0);
                Ok((AcDensity::Exponential { beta, mass }, Vec::new(), tau_max))
            }
            "atom" => {
                let tau = need(self.tau, "tau", "atom")?;
                let mass = need(self.mass, "mass", "atom")?;
                Ok((AcDensity::None, vec![Atom { tau, mass }], tau))
            }
            "mollified" => {
                let mass = need(self.mass, "mass", "mollified")?;
                let tau = need(self.tau, "tau", "mollified")?;
                let eps = need(self.eps, "eps", "mollified")?;
                let k = mollify_delay(mass, tau, eps)?;
                Ok((k.ac().clone(), Vec::new(), k.tau_max()))
            }
            "mixed" => Err(cfg_err("mixed kernels cannot be nested")),
            other => Err(cfg_err(format!(
                "unknown kernel type `{other}` (expected none, fractional, exponential, atom, mollified or mixed)"
            ))),
        }
    }

    pub fn build(&self, horizon: f64) -> Result<MeasureKernel> {
        if self.kind == "mixed" {
            if self.components.is_empty() {
                return Err(cfg_err("mixed kernel needs at least one component"));
            }
            let mut ac = AcDensity::None;
            let mut atoms = Vec::new();
            let mut tau_max: f64 = 0.0;
            for c in &self.components {
                let (a, at, tm) = c.ac_and_atoms(horizon)?;
                if a != AcDensity::None {
                    if ac != AcDensity::None {
                        return Err(cfg_err("mixed kernel allows at most one absolutely continuous component"));
                    }
                    ac = a;
                }
                atoms.extend(at);
                tau_max = tau_max.max(tm);
            }
            return MeasureKernel::new(ac, atoms, tau_max);
        }
        if !self.components.is_empty() {
            return Err(cfg_err("only mixed kernels take components"));
        }
        let (ac, atoms, tau_max) = self.ac_and_atoms(horizon)?;
        MeasureKernel::new(ac, atoms, tau_max)
    }
}

/// `∫_(0,t] e^{s} dμ(s)`, used by the manufactured forcing for `e^{-t} sin(πx)`.
fn exp_moment(k: &MeasureKernel, t: f64) -> f64 {
    let alpha = match k.ac() {
        AcDensity::Fractional { alpha, .. } => *alpha,
        _ => 0.0,
    };
    let p = 1.0 / (1.0 - alpha);
    let f = |r: f64| {
        let r = r.max(1e-30);
        let s = r.powf(p);
        p * r.powf(p - 1.0) * s.exp() * k.eval_density(s)
    };
    let upper = t.min(k.tau_max());
    let breaks: Vec<f64> = k.ac_breakpoints().iter().map(|b| b.powf(1.0 / p)).collect();
    let ac = if upper > 0.0 {
        integrate_with_breaks(&f, 0.0, upper.powf(1.0 / p), &breaks, 1e-13)
    } else {
        0.0
    };
    ac + k
        .atoms()
        .iter()
        .filter(|a| a.tau <= t)
        .map(|a| a.mass * a.tau.exp())
        .sum::<f64>()
}

/// Forcing for which `u(t,x) = e^{-t} sin(πx/L)` solves the problem with
/// constant coefficients, under the `(0,t]` convolution convention.
pub fn manufactured_forcing(kernel: &MeasureKernel, a0: f64, a1: f64, length: f64, amplitude: f64) -> Forcing {
    let k = kernel.clone();
    let w2 = (PI / length).powi(2);
    Forcing::field(move |t, x| {
        let s = (PI * x / length).sin();
        let decay = (-t).exp();
        amplitude * s * ((a0 * w2 - 1.0) * decay + a1 * w2 * decay * exp_moment(&k, t))
    })
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn kernel(&self) -> Result<MeasureKernel> {
        self.kernel.build(self.time.horizon)
    }

    /// Assembles the problem. Errors are reported as configuration errors.
    pub fn problem(&self) -> Result<ProblemSpec> {
        self.problem_inner().map_err(|e| match e {
            Error::Config(_) => e,
            other => cfg_err(other.to_string()),
        })
    }

    fn problem_inner(&self) -> Result<ProblemSpec> {
        let mesh = build_mesh(self.domain.length, self.domain.n_elements)?;
        let c = &self.coefficients;
        let fem = assemble(&mesh, &CoefficientField::constant(c.a0), &CoefficientField::constant(c.a1))?;
        let kernel = self.kernel()?;
        let length = self.domain.length;
        let init = &self.initial;
        let u0 = match init.kind.as_str() {
            "zero" => vec![0.0; mesh.n_dofs()],
            "eigenmode" => {
                let (a, m) = (init.amplitude, init.mode as f64);
                mesh.interpolate(|x| a * (m * PI * x / length).sin())
            }
            other => return Err(cfg_err(format!("unknown initial type `{other}` (expected zero or eigenmode)"))),
        };
        let f = &self.forcing;
        let forcing = match f.kind.as_str() {
            "zero" => Forcing::Zero,
            "eigenmode" => {
                let (a, m) = (f.amplitude, f.mode as f64);
                Forcing::field(move |_, x| a * (m * PI * x / length).sin())
            }
            "manufactured" => manufactured_forcing(&kernel, c.a0, c.a1, length, f.amplitude),
            "tabulated" => {
                if f.times.is_empty() || f.times.len() != f.values.len() {
                    return Err(cfg_err("tabulated forcing needs matching, nonempty `times` and `values`"));
                }
                Forcing::Tabulated {
                    times: f.times.clone(),
                    values: f.values.clone(),
                }
            }
            other => {
                return Err(cfg_err(format!(
                    "unknown forcing type `{other}` (expected zero, eigenmode, manufactured or tabulated)"
                )))
            }
        };
        let h = &self.history;
        let history = match h.kind.as_str() {
            "zero" => History::Zero,
            "constant" => History::Constant,
            "tabulated" => {
                if h.times.is_empty() || h.times.len() != h.values.len() {
                    return Err(cfg_err("tabulated history needs matching, nonempty `times` and `values`"));
                }
                History::Profile {
                    times: h.times.clone(),
                    amplitude: h.values.clone(),
                }
            }
            other => return Err(cfg_err(format!("unknown history type `{other}` (expected zero, constant or tabulated)"))),
        };
        let p = ProblemSpec {
            fem,
            kernel,
            forcing,
            u0,
            history,
            horizon: self.time.horizon,
            dt: self.time.dt,
        };
        // grid, atom alignment and history consistency are checked up front
        let grid = p.grid()?;
        p.weights()?;
        p.initial_trajectory(grid)?;
        Ok(p)
    }
}
