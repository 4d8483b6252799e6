//! Memory measures `μ = k(s) ds + Σ m_j δ_{τ_j}` on `(0, τ_max]`.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, integrate_with_breaks};

/// Absolutely continuous part of a memory measure.
#[derive(Debug, Clone, PartialEq)]
pub enum AcDensity {
    None,
    /// `weight · s^{-α} / Γ(1-α)`.
    Fractional { alpha: f64, weight: f64 },
    /// `mass · β · e^{-βs}`.
    Exponential { beta: f64, mass: f64 },
    /// `(mass/ε) η((s-τ)/ε)` with the unit hat `η(r) = max(0, 1-|r|)`.
    Mollified { mass: f64, tau: f64, eps: f64 },
    /// Piecewise-linear interpolation of samples, zero outside the grid.
    Tabulated { grid: Vec<f64>, values: Vec<f64> },
}

impl AcDensity {
    pub fn name(&self) -> &'static str {
        match self {
            AcDensity::None => "none",
            AcDensity::Fractional { .. } => "fractional",
            AcDensity::Exponential { .. } => "exponential",
            AcDensity::Mollified { .. } => "mollified",
            AcDensity::Tabulated { .. } => "tabulated",
        }
    }
}

/// Point mass `mass · δ_tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub tau: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureKernel {
    ac: AcDensity,
    atoms: Vec<Atom>,
    tau_max: f64,
}

fn hat_cdf(r: f64) -> f64 {
    if r <= -1.0 {
        0.0
    } else if r <= 0.0 {
        0.5 * (1.0 + r) * (1.0 + r)
    } else if r < 1.0 {
        1.0 - 0.5 * (1.0 - r) * (1.0 - r)
    } else {
        1.0
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidArgument(msg)
}

impl MeasureKernel {
    pub fn new(ac: AcDensity, mut atoms: Vec<Atom>, tau_max: f64) -> Result<Self> {
        if !(tau_max >= 0.0) || !tau_max.is_finite() {
            return Err(invalid(format!("tau_max must be finite and nonnegative, got {tau_max}")));
        }
        match &ac {
            AcDensity::None => {}
            AcDensity::Fractional { alpha, weight } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(invalid(format!("fractional order must lie in (0,1), got {alpha}")));
                }
                if !(*weight >= 0.0) || !weight.is_finite() {
                    return Err(invalid(format!("fractional weight must be nonnegative, got {weight}")));
                }
            }
            AcDensity::Exponential { beta, mass } => {
                if !(*beta > 0.0) || !beta.is_finite() {
                    return Err(invalid(format!("exponential rate must be positive, got {beta}")));
                }
                if !(*mass >= 0.0) || !mass.is_finite() {
                    return Err(invalid(format!("exponential mass must be nonnegative, got {mass}")));
                }
            }
            AcDensity::Mollified { mass, tau, eps } => {
                if !(*mass >= 0.0 && *tau > 0.0 && *eps > 0.0) {
                    return Err(invalid(format!(
                        "mollified delay needs mass >= 0, tau > 0, eps > 0 (got {mass}, {tau}, {eps})"
                    )));
                }
                if eps >= tau {
                    return Err(invalid(format!("mollification width {eps} must be below the delay {tau}")));
                }
            }
            AcDensity::Tabulated { grid, values } => {
                if grid.len() < 2 || grid.len() != values.len() {
                    return Err(invalid("tabulated density needs >= 2 samples and matching lengths".into()));
                }
                if grid[0] < 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(invalid("tabulated grid must be nonnegative and strictly increasing".into()));
                }
                if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(invalid("tabulated density values must be finite and nonnegative".into()));
                }
            }
        }
        if tau_max == 0.0 && ac != AcDensity::None {
            return Err(invalid("an absolutely continuous part needs tau_max > 0".into()));
        }
        for a in &atoms {
            if !(a.tau > 0.0) || !(a.mass > 0.0) || !a.mass.is_finite() {
                return Err(invalid(format!("atom needs tau > 0 and mass > 0, got {a:?}")));
            }
            if a.tau > tau_max * (1.0 + 1e-12) {
                return Err(invalid(format!("atom delay {} exceeds tau_max {tau_max}", a.tau)));
            }
        }
        atoms.sort_by(|a, b| a.tau.partial_cmp(&b.tau).unwrap());
        Ok(Self { ac, atoms, tau_max })
    }

    pub fn zero() -> Self {
        Self {
            ac: AcDensity::None,
            atoms: Vec::new(),
            tau_max: 0.0,
        }
    }

    pub fn fractional(alpha: f64, tau_max: f64) -> Result<Self> {
        Self::new(AcDensity::Fractional { alpha, weight: 1.0 }, Vec::new(), tau_max)
    }

    pub fn exponential(beta: f64, mass: f64, tau_max: f64) -> Result<Self> {
        Self::new(AcDensity::Exponential { beta, mass }, Vec::new(), tau_max)
    }

    pub fn atom(tau: f64, mass: f64) -> Result<Self> {
        Self::new(AcDensity::None, vec![Atom { tau, mass }], tau)
    }

    pub fn ac(&self) -> &AcDensity {
        &self.ac
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.total_mass(self.tau_max.max(1.0)) == 0.0
    }

    /// Absolutely continuous part alone, same horizon.
    pub fn ac_part(&self) -> MeasureKernel {
        MeasureKernel {
            ac: self.ac.clone(),
            atoms: Vec::new(),
            tau_max: self.tau_max,
        }
    }

    /// Atomic part alone, same horizon.
    pub fn atomic_part(&self) -> MeasureKernel {
        MeasureKernel {
            ac: AcDensity::None,
            atoms: self.atoms.clone(),
            tau_max: self.tau_max,
        }
    }

    /// `c · μ` for `c ≥ 0`; atoms vanish when `c = 0`.
    pub fn scaled(&self, c: f64) -> Result<MeasureKernel> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(invalid(format!("kernel scale must be nonnegative, got {c}")));
        }
        let ac = match &self.ac {
            AcDensity::None => AcDensity::None,
            AcDensity::Fractional { alpha, weight } => AcDensity::Fractional {
                alpha: *alpha,
                weight: c * weight,
            },
            AcDensity::Exponential { beta, mass } => AcDensity::Exponential {
                beta: *beta,
                mass: c * mass,
            },
            AcDensity::Mollified { mass, tau, eps } => AcDensity::Mollified {
                mass: c * mass,
                tau: *tau,
                eps: *eps,
            },
            AcDensity::Tabulated { grid, values } => AcDensity::Tabulated {
                grid: grid.clone(),
                values: values.iter().map(|v| c * v).collect(),
            },
        };
        let atoms = if c == 0.0 {
            Vec::new()
        } else {
            self.atoms
                .iter()
                .map(|a| Atom {
                    tau: a.tau,
                    mass: c * a.mass,
                })
                .collect()
        };
        Ok(MeasureKernel {
            ac,
            atoms,
            tau_max: self.tau_max,
        })
    }

    /// Points where the density or its derivative may jump.
    pub fn ac_breakpoints(&self) -> Vec<f64> {
        let mut b = match &self.ac {
            AcDensity::Mollified { tau, eps, .. } => vec![tau - eps, *tau, tau + eps],
            AcDensity::Tabulated { grid, .. } => grid.clone(),
            _ => Vec::new(),
        };
        b.push(self.tau_max);
        b
    }

    /// Pointwise density; atoms are excluded. `s = 0` is allowed and gives
    /// the right limit (infinite for fractional kernels).
    pub fn eval_density(&self, s: f64) -> f64 {
        if s < 0.0 || s > self.tau_max {
            return 0.0;
        }
        match &self.ac {
            AcDensity::None => 0.0,
            AcDensity::Fractional { alpha, weight } => {
                if *weight == 0.0 {
                    0.0
                } else {
                    weight * s.powf(-alpha) / gamma(1.0 - alpha)
                }
            }
            AcDensity::Exponential { beta, mass } => mass * beta * (-beta * s).exp(),
            AcDensity::Mollified { mass, tau, eps } => {
                mass / eps * (1.0 - ((s - tau) / eps).abs()).max(0.0)
            }
            AcDensity::Tabulated { grid, values } => tab_eval(grid, values, s),
        }
    }

    /// `∫_0^x k(s) ds` with the density cut at `tau_max`.
    pub fn ac_cdf(&self, x: f64) -> f64 {
        let x = x.min(self.tau_max);
        if x <= 0.0 {
            return 0.0;
        }
        match &self.ac {
            AcDensity::None => 0.0,
            AcDensity::Fractional { alpha, weight } => {
                weight * x.powf(1.0 - alpha) / gamma(2.0 - alpha)
            }
            AcDensity::Exponential { beta, mass } => -mass * (-beta * x).exp_m1(),
            AcDensity::Mollified { mass, tau, eps } => mass * hat_cdf((x - tau) / eps),
            AcDensity::Tabulated { grid, values } => tab_cdf(grid, values, x),
        }
    }

    /// `μ((0, T])`.
    pub fn total_mass(&self, t: f64) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| a.tau <= t)
            .map(|a| a.mass)
            .sum();
        self.ac_cdf(t) + atoms
    }

    /// Restriction to `(0, T]`.
    pub fn restrict(&self, t: f64) -> MeasureKernel {
        MeasureKernel {
            ac: self.ac.clone(),
            atoms: self.atoms.iter().copied().filter(|a| a.tau <= t).collect(),
            tau_max: self.tau_max.min(t),
        }
    }

    /// `∫ s dμ(s)` over `(0, τ_max]`.
    pub fn first_moment(&self) -> f64 {
        let f = |s: f64| s * self.eval_density(s);
        let ac = integrate_with_breaks(&f, 0.0, self.tau_max, &self.ac_breakpoints(), 1e-14);
        ac + self.atoms.iter().map(|a| a.tau * a.mass).sum::<f64>()
    }
}

fn tab_eval(grid: &[f64], values: &[f64], s: f64) -> f64 {
    let n = grid.len();
    if s < grid[0] || s > grid[n - 1] {
        return 0.0;
    }
    let i = match grid.partition_point(|&g| g <= s) {
        0 => 0,
        k if k >= n => n - 2,
        k => k - 1,
    };
    let t = (s - grid[i]) / (grid[i + 1] - grid[i]);
    values[i] + t * (values[i + 1] - values[i])
}

fn tab_cdf(grid: &[f64], values: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..grid.len() - 1 {
        let (a, b) = (grid[i], grid[i + 1]);
        if x <= a {
            break;
        }
        let r = x.min(b);
        let vr = tab_eval(grid, values, r);
        acc += 0.5 * (values[i] + vr) * (r - a);
    }
    acc
}

/// Normalized hat mollification of the delay `m δ_τ` with half-width `ε`.
pub fn mollify_delay(mass: f64, tau: f64, eps: f64) -> Result<MeasureKernel> {
    if !(eps > 0.0) || eps >= tau {
        return Err(invalid(format!(
            "mollification width must satisfy 0 < eps < tau (eps = {eps}, tau = {tau})"
        )));
    }
    if !(mass > 0.0) {
        return Err(invalid(format!("mollified mass must be positive, got {mass}")));
    }
    MeasureKernel::new(AcDensity::Mollified { mass, tau, eps }, Vec::new(), tau + eps)
}

pub fn total_mass(k: &MeasureKernel, t: f64) -> f64 {
    k.total_mass(t)
}

pub fn restrict(k: &MeasureKernel, t: f64) -> MeasureKernel {
    k.restrict(t)
}

pub fn eval_density(k: &MeasureKernel, s: f64) -> f64 {
    k.eval_density(s)
}

fn singular_order(k: &MeasureKernel) -> f64 {
    match k.ac {
        AcDensity::Fractional { alpha, weight } if weight > 0.0 => alpha,
        _ => 0.0,
    }
}

/// Total-variation distance of the two measures restricted to `(0, T]`.
pub fn tv_distance(k1: &MeasureKernel, k2: &MeasureKernel, t: f64) -> f64 {
    // substitution s = r^p removes integrable singularities s^{-α} at 0
    let alpha = singular_order(k1).max(singular_order(k2));
    let p = 1.0 / (1.0 - alpha);
    let f = |r: f64| {
        let r = r.max(1e-30);
        let s = r.powf(p);
        p * r.powf(p - 1.0) * (k1.eval_density(s) - k2.eval_density(s)).abs()
    };
    let mut breaks: Vec<f64> = k1.ac_breakpoints();
    breaks.extend(k2.ac_breakpoints());
    let breaks: Vec<f64> = breaks.into_iter().filter(|&b| b > 0.0).map(|b| b.powf(1.0 / p)).collect();
    let ac = integrate_with_breaks(&f, 0.0, t.powf(1.0 / p), &breaks, 1e-13);

    let mut locs: Vec<f64> = k1
        .atoms
        .iter()
        .chain(&k2.atoms)
        .map(|a| a.tau)
        .filter(|&tau| tau <= t)
        .collect();
    locs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    locs.dedup();
    let mass_at = |k: &MeasureKernel, tau: f64| -> f64 {
        k.atoms.iter().filter(|a| a.tau == tau).map(|a| a.mass).sum()
    };
    let at: f64 = locs
        .iter()
        .map(|&tau| (mass_at(k1, tau) - mass_at(k2, tau)).abs())
        .sum();
    ac + at
}

/// Sum-of-exponentials representation `k(t) ≈ Σ ω_i e^{-λ_i t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Max relative reconstruction error on `[t_lo, t_hi]`.
    pub error_bound: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl BernsteinQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| w * (-l * t).exp())
            .sum()
    }

    /// Max relative error against `k` on a log grid of `[t_lo, t_hi]`.
    pub fn max_relative_error(&self, k: &MeasureKernel, samples: usize) -> f64 {
        let (a, b) = (self.t_lo.ln(), self.t_hi.ln());
        (0..samples)
            .map(|i| {
                let t = (a + (b - a) * i as f64 / (samples - 1) as f64).exp();
                let exact = k.eval_density(t);
                if exact == 0.0 {
                    self.eval(t).abs()
                } else {
                    ((self.eval(t) - exact) / exact).abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

const GL_PER_PANEL: usize = 8;
const LAMBDA_LO_FACTOR: f64 = 1e-4;
const LAMBDA_HI_FACTOR: f64 = 40.0;
const ERROR_SAMPLES: usize = 400;

/// Bernstein (diffusive) quadrature of the absolutely continuous part.
///
/// Fractional densities use `λ = e^u` with composite Gauss–Legendre panels on
/// `[ln(1e-4/τ_max), ln(40/t_lo)]`; the mass of `ν` below the window is lumped
/// into one extra node at its mean rate. Exponential densities are exact with
/// one node. Atoms are ignored.
pub fn bernstein_quadrature(k: &MeasureKernel, n_nodes: usize, t_lo: f64) -> Result<BernsteinQuadrature> {
    if !(t_lo > 0.0) {
        return Err(invalid(format!("t_lo must be positive, got {t_lo}")));
    }
    let t_hi = k.tau_max.max(t_lo);
    match &k.ac {
        AcDensity::Exponential { beta, mass } => Ok(BernsteinQuadrature {
            nodes: vec![*beta],
            weights: vec![mass * beta],
            error_bound: 0.0,
            t_lo,
            t_hi,
        }),
        AcDensity::Fractional { alpha, weight } => {
            if n_nodes < GL_PER_PANEL + 1 {
                return Err(invalid(format!(
                    "fractional Bernstein quadrature needs at least {} nodes",
                    GL_PER_PANEL + 1
                )));
            }
            let alpha = *alpha;
            let c = weight * (std::f64::consts::PI * alpha).sin() / std::f64::consts::PI;
            let lmin = LAMBDA_LO_FACTOR / t_hi;
            let lmax = LAMBDA_HI_FACTOR / t_lo;
            let (a, b) = (lmin.ln(), lmax.ln());
            let panels = (n_nodes - 1) / GL_PER_PANEL;
            let (x, w) = gauss_legendre(GL_PER_PANEL);
            let mut nodes = Vec::with_capacity(panels * GL_PER_PANEL + 1);
            let mut weights = Vec::with_capacity(panels * GL_PER_PANEL + 1);
            let width = (b - a) / panels as f64;
            for p in 0..panels {
                let l = a + p as f64 * width;
                let mid = l + 0.5 * width;
                for (xi, wi) in x.iter().zip(&w) {
                    let u = mid + 0.5 * width * xi;
                    nodes.push(u.exp());
                    weights.push(0.5 * width * wi * c * (alpha * u).exp());
                }
            }
            // ∫_0^{λmin} ν_α = c λmin^α / α, placed at the ν-mean λmin α/(α+1)
            nodes.push(lmin * alpha / (alpha + 1.0));
            weights.push(c * lmin.powf(alpha) / alpha);
            let mut q = BernsteinQuadrature {
                nodes,
                weights,
                error_bound: 0.0,
                t_lo,
                t_hi,
            };
            q.error_bound = if *weight == 0.0 {
                0.0
            } else {
                q.max_relative_error(k, ERROR_SAMPLES)
            };
            Ok(q)
        }
        other => Err(Error::UnsupportedVariant {
            operation: "bernstein_quadrature",
            variant: other.name().to_string(),
        }),
    }
}
