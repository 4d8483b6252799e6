use rayon::prelude::*;

use super::sweep::{SweepResult, SweepRow};
use crate::convolution::{apply_memory, build_weights, ALIGNMENT_TOL};
use crate::diagnostics::is_completely_monotone;
use crate::error::{Error, Result};
use crate::kernel::{mollify_delay, AcDensity, MeasureKernel};
use crate::mesh_fem::{dual_norm, form_constants, FemMatrices};
use crate::stepper::{l2v_distance, solve, ProblemSpec};
use crate::trajectory::Trajectory;

/// `max_n ‖uⁿ - vⁿ‖_H` over `n = 0..=N`.
pub fn linf_h_distance(a: &Trajectory, b: &Trajectory, fem: &FemMatrices) -> f64 {
    let n = a.last_index().min(b.last_index());
    let mut d = vec![0.0; a.n_dofs()];
    let mut worst: f64 = 0.0;
    for k in 0..=n {
        for ((di, x), y) in d.iter_mut().zip(a.state(k)).zip(b.state(k)) {
            *di = x - y;
        }
        worst = worst.max(fem.m.quad_form(&d));
    }
    worst.sqrt()
}

/// Solves with `μ/2ⁿ`, `n = 0..levels`, and compares with the memoryless run.
/// Rows: kernel mass, `L∞(H)` error, auxiliary `L²(V)` error.
pub fn run_vanishing_memory(p: &ProblemSpec, levels: usize) -> Result<SweepResult> {
    let kernel = p.active_kernel();
    if !is_completely_monotone(&kernel) {
        return Err(Error::UnsupportedKernel(format!(
            "vanishing memory needs a completely monotone density, got {}",
            kernel.ac().name()
        )));
    }
    let (reference, _) = solve(&p.with_kernel(MeasureKernel::zero()))?;
    let rows: Vec<Result<SweepRow>> = (0..levels)
        .into_par_iter()
        .map(|n| {
            let k = kernel.scaled(0.5f64.powi(n as i32))?;
            let mass = k.total_mass(p.horizon);
            let (u, _) = solve(&p.with_kernel(k))?;
            Ok(SweepRow {
                parameter: mass,
                error: linf_h_distance(&u, &reference, &p.fem),
                aux: vec![l2v_distance(&u, &reference, &p.fem)],
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SweepResult::new("mass", "err_linf_h", &["err_l2_v"], rows))
}

/// Mollified-delay runs against the exact delay for `ε = factor·τ`.
/// Rows: `ε`, `C(H)` error, auxiliary `L²(V)` error and the observed order
/// against the previous row.
pub fn run_memory_to_delay(p: &ProblemSpec, eps_factors: &[f64]) -> Result<SweepResult> {
    let kernel = p.active_kernel();
    let atom = match (kernel.ac(), kernel.atoms()) {
        (AcDensity::None, [a]) => *a,
        _ => {
            return Err(Error::UnsupportedKernel(
                "memory-to-delay needs a single atom as the limit kernel".into(),
            ))
        }
    };
    let dt = p.dt;
    for &f in eps_factors {
        let eps = f * atom.tau;
        let cells = 2.0 * eps / dt;
        if !(cells >= 8.0) {
            return Err(Error::Resolution(format!(
                "2ε = {} spans {cells:.2} cells of width {dt}; at least 8 are needed",
                2.0 * eps
            )));
        }
        if atom.tau - eps <= 0.0 {
            return Err(Error::InvalidArgument(format!("ε = {eps} must be smaller than τ = {}", atom.tau)));
        }
    }
    let (reference, _) = solve(p)?;
    let runs: Vec<Result<(f64, f64, f64)>> = eps_factors
        .par_iter()
        .map(|&f| {
            let eps = f * atom.tau;
            let k = mollify_delay(atom.mass, atom.tau, eps)?;
            let (u, _) = solve(&p.with_kernel(k))?;
            Ok((eps, linf_h_distance(&u, &reference, &p.fem), l2v_distance(&u, &reference, &p.fem)))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(runs.len());
    for (i, &(eps, e, l2)) in runs.iter().enumerate() {
        let order = if i == 0 {
            f64::NAN
        } else {
            let (eps0, e0, _) = runs[i - 1];
            (e0 / e).ln() / (eps0 / eps).ln()
        };
        rows.push(SweepRow {
            parameter: eps,
            error: e,
            aux: vec![l2, order],
        });
    }
    Ok(SweepResult::new("eps", "err_c_h", &["err_l2_v", "observed_order"], rows))
}

/// True when each error is strictly below its predecessor or already at the
/// floor. Also returns the largest successive ratio.
pub fn monotone_to_floor(errors: &[f64], floor: f64) -> (bool, f64) {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for w in errors.windows(2) {
        let r = if w[0] > 0.0 { w[1] / w[0] } else { f64::INFINITY };
        worst = worst.max(r);
        if !(w[1] < w[0] || w[1] <= floor) {
            ok = false;
        }
    }
    (ok, worst)
}

/// Absorption threshold on `Λ1 μ⁽¹⁾((0,T]) / α0`.
pub const SMALLNESS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub enum PairStatus {
    Asserted { pass: bool },
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityPair {
    pub label: String,
    /// `Λ1 μ⁽¹⁾((0,T]) / α0`.
    pub smallness: f64,
    /// `max ‖e‖²_H + (α0/2) ‖e‖²_{L²V}`.
    pub lhs: f64,
    /// `(2/α0) ‖(K_{μ⁽¹⁾} - K_{μ⁽²⁾}) u⁽²⁾‖²_{L²V*}`.
    pub rhs: f64,
    pub status: PairStatus,
}

impl StabilityPair {
    pub fn ratio(&self) -> f64 {
        if self.rhs > 0.0 {
            self.lhs / self.rhs
        } else if self.lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

/// Compares solutions for `μ⁽¹⁾ = k1` and `μ⁽²⁾ = k2` with otherwise equal data.
/// The inequality is checked with a relative slack of `Δt`.
pub fn kernel_stability_pair(p: &ProblemSpec, k1: &MeasureKernel, k2: &MeasureKernel, label: &str) -> Result<StabilityPair> {
    let fem = &p.fem;
    let c = form_constants(fem);
    let horizon = p.horizon;
    let smallness = c.lambda1 * k1.total_mass(horizon) / c.alpha0;
    if smallness > SMALLNESS {
        return Ok(StabilityPair {
            label: label.into(),
            smallness,
            lhs: f64::NAN,
            rhs: f64::NAN,
            status: PairStatus::Skipped(format!(
                "smallness {smallness:.4} exceeds {SMALLNESS}"
            )),
        });
    }
    let (u1, _) = solve(&p.with_kernel(k1.clone()))?;
    let (u2, _) = solve(&p.with_kernel(k2.clone()))?;
    let dt = p.dt;
    let grid = *u2.grid();
    let w1 = build_weights(&k1.restrict(horizon), &grid)?;
    let w2 = build_weights(&k2.restrict(horizon), &grid)?;
    let mut rhs = 0.0;
    for n in 1..=grid.n_steps() {
        let a = apply_memory(&w1, fem, &u2, n)?;
        let b = apply_memory(&w2, fem, &u2, n)?;
        let g: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        rhs += dt * dual_norm(&g, fem)?.powi(2);
    }
    rhs *= 2.0 / c.alpha0;
    let lhs = linf_h_distance(&u1, &u2, fem).powi(2) + 0.5 * c.alpha0 * l2v_distance(&u1, &u2, fem).powi(2);
    Ok(StabilityPair {
        label: label.into(),
        smallness,
        lhs,
        rhs,
        status: PairStatus::Asserted {
            pass: lhs <= rhs * (1.0 + dt),
        },
    })
}

/// Pairs `(c μ, μ)` for every scale `c`, with `μ` the problem kernel.
pub fn run_kernel_stability(p: &ProblemSpec, scales: &[f64]) -> Result<Vec<StabilityPair>> {
    let k2 = p.active_kernel();
    let pairs: Vec<Result<StabilityPair>> = scales
        .par_iter()
        .map(|&c| {
            let k1 = k2.scaled(c)?;
            kernel_stability_pair(p, &k1, &k2, &format!("scale={c}"))
        })
        .collect();
    pairs.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub t: f64,
    pub index: usize,
    /// `Σ_{n≤k} Δt a₀(uⁿ, uⁿ)`.
    pub cum_a0: f64,
    /// `(1/t) Σ_{n≤k} Δt |uⁿ|²_V`.
    pub time_average_v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongtimeReport {
    pub checkpoints: Vec<Checkpoint>,
    /// `½‖u₀‖²_H`.
    pub half_u0_sq: f64,
    pub dissipation_bounded: bool,
    pub average_decreasing: bool,
}

/// Unforced run on a long horizon with checkpoints at `T/2ᵏ`, `k < levels`,
/// snapped down to the grid.
pub fn run_longtime(p: &ProblemSpec, levels: usize) -> Result<(Trajectory, LongtimeReport)> {
    if !p.forcing.is_zero() {
        return Err(Error::InvalidArgument("the finite-dissipation study needs f = 0".into()));
    }
    let kernel = p.active_kernel();
    if !is_completely_monotone(&kernel) {
        return Err(Error::UnsupportedKernel(format!(
            "finite dissipation needs a completely monotone kernel, got {}",
            kernel.ac().name()
        )));
    }
    let (u, _) = solve(p)?;
    let grid = *u.grid();
    let dt = grid.dt();
    let fem = &p.fem;
    let mut idx: Vec<usize> = (0..levels)
        .map(|k| ((p.horizon / 2f64.powi(k as i32)) / dt + 1e-9).floor() as usize)
        .map(|i| i.min(grid.n_steps()))
        .filter(|&i| i > 0)
        .collect();
    idx.sort_unstable();
    idx.dedup();
    let mut checkpoints = Vec::with_capacity(idx.len());
    let (mut a0, mut v) = (0.0, 0.0);
    let mut next = idx.iter().peekable();
    for n in 1..=grid.n_steps() {
        let un = u.state(n as isize);
        a0 += dt * fem.k0.quad_form(un);
        v += dt * fem.s.quad_form(un);
        if next.peek() == Some(&&n) {
            next.next();
            let t = grid.time(n as isize);
            checkpoints.push(Checkpoint {
                t,
                index: n,
                cum_a0: a0,
                time_average_v: v / t,
            });
        }
    }
    let half_u0_sq = 0.5 * fem.m.quad_form(u.state(0));
    let dissipation_bounded = checkpoints.iter().all(|c| c.cum_a0 <= half_u0_sq);
    let average_decreasing = checkpoints
        .windows(2)
        .all(|w| w[1].time_average_v < w[0].time_average_v);
    Ok((
        u,
        LongtimeReport {
            checkpoints,
            half_u0_sq,
            dissipation_bounded,
            average_decreasing,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayOdeReport {
    /// Times from `-τ` (history) to `T`.
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    /// `m x(t) x(t-τ)`.
    pub s: Vec<f64>,
    pub lag: usize,
    /// Sign changes of `s` on `(0,T]`.
    pub sign_changes: usize,
    pub min_s: f64,
    pub max_s: f64,
    /// Least-squares slope of `ln|x|` on `[T/2, T]`.
    pub fitted_rate: Option<f64>,
    /// Real root of `λ + α = m e^{-λτ}` when `m > 0`.
    pub root: Option<f64>,
}

impl DelayOdeReport {
    pub fn rate_relative_error(&self) -> Option<f64> {
        match (self.fitted_rate, self.root) {
            (Some(r), Some(l)) if l != 0.0 => Some((r - l).abs() / l.abs()),
            _ => None,
        }
    }
}

/// Real root of `λ + α - m e^{-λτ}` for `m > 0`, bracketed in `(-α, m]`.
pub fn characteristic_root(alpha: f64, m: f64, tau: f64) -> Option<f64> {
    if !(m > 0.0) {
        return None;
    }
    let f = |l: f64| l + alpha - m * (-l * tau).exp();
    let (mut lo, mut hi) = (-alpha, m);
    if f(lo) > 0.0 || f(hi) < 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Implicit Euler for `x' + αx = m x(t-τ)`, history `x ≡ 1`.
pub fn run_prototype_delay_ode(alpha: f64, m: f64, tau: f64, horizon: f64, dt: f64) -> Result<DelayOdeReport> {
    if !(alpha > 0.0) || !(tau >= 0.0) || !(dt > 0.0) || !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need α > 0, τ ≥ 0, Δt > 0, T > 0 (got α={alpha}, τ={tau}, Δt={dt}, T={horizon})"
        )));
    }
    let lag = (tau / dt).round() as usize;
    if (lag as f64 * dt - tau).abs() > ALIGNMENT_TOL * dt {
        return Err(Error::MisalignedAtom {
            tau,
            nearest: lag as f64 * dt,
        });
    }
    let n_steps = (horizon / dt).round() as usize;
    if ((n_steps as f64) * dt - horizon).abs() > ALIGNMENT_TOL * dt {
        return Err(Error::InvalidArgument(format!("Δt = {dt} does not divide T = {horizon}")));
    }
    let total = lag + n_steps + 1;
    let mut x = vec![1.0; total];
    let at = |n: isize| (n + lag as isize) as usize;
    for n in 1..=n_steps as isize {
        let prev = x[at(n - 1)];
        x[at(n)] = if lag == 0 {
            prev / (1.0 + alpha * dt - m * dt)
        } else {
            (prev + dt * m * x[at(n - lag as isize)]) / (1.0 + alpha * dt)
        };
        if !x[at(n)].is_finite() {
            return Err(Error::NonFiniteState { step: n as usize });
        }
    }
    let times: Vec<f64> = (-(lag as isize)..=n_steps as isize).map(|n| n as f64 * dt).collect();
    let s: Vec<f64> = (-(lag as isize)..=n_steps as isize)
        .map(|n| {
            let back = if n - (lag as isize) < -(lag as isize) { 1.0 } else { x[at(n - lag as isize)] };
            m * x[at(n)] * back
        })
        .collect();
    let mut sign_changes = 0;
    let mut last = 0.0f64;
    let (mut min_s, mut max_s) = (f64::INFINITY, f64::NEG_INFINITY);
    for n in 1..=n_steps as isize {
        let v = s[at(n)];
        min_s = min_s.min(v);
        max_s = max_s.max(v);
        if v != 0.0 {
            if last != 0.0 && v.signum() != last.signum() {
                sign_changes += 1;
            }
            last = v;
        }
    }
    let first = ((horizon / 2.0) / dt).ceil() as isize;
    let (mut st, mut sy, mut stt, mut sty, mut cnt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut usable = true;
    for n in first..=n_steps as isize {
        let v = x[at(n)].abs();
        if v == 0.0 {
            usable = false;
            break;
        }
        let t = n as f64 * dt;
        let y = v.ln();
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
        cnt += 1.0;
    }
    let den = cnt * stt - st * st;
    let fitted_rate = if usable && cnt >= 2.0 && den != 0.0 {
        Some((cnt * sty - st * sy) / den)
    } else {
        None
    };
    Ok(DelayOdeReport {
        times,
        x,
        s,
        lag,
        sign_changes,
        min_s,
        max_s,
        fitted_rate,
        root: characteristic_root(alpha, m, tau),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_fem::{assemble, build_mesh, CoefficientField};
    use crate::stepper::{Forcing, History};
    use std::f64::consts::PI;

    fn spec(kernel: MeasureKernel, horizon: f64, dt: f64, n: usize) -> ProblemSpec {
        let mesh = build_mesh(1.0, n).unwrap();
        let fem = assemble(&mesh, &CoefficientField::constant(1.0), &CoefficientField::constant(1.0)).unwrap();
        let u0 = mesh.interpolate(|x| (PI * x).sin());
        ProblemSpec {
            fem,
            kernel,
            forcing: Forcing::Zero,
            u0,
            history: History::Constant,
            horizon,
            dt,
        }
    }

    #[test]
    fn characteristic_root_oracle() {
        let l = characteristic_root(1.0, 2.0, 1.0).unwrap();
        assert!((l + 1.0 - 2.0 * (-l).exp()).abs() < 1e-12);
        assert!((l - 0.3748).abs() < 1e-3, "{l}");
        assert!(characteristic_root(1.0, -1.0, 1.0).is_none());
        // m < α: the real root is negative
        assert!(characteristic_root(2.0, 1.0, 1.0).unwrap() < 0.0);
    }

    #[test]
    fn delay_ode_without_feedback_decays_exactly() {
        let r = run_prototype_delay_ode(2.0, 0.0, 0.5, 2.0, 1e-3).unwrap();
        assert!(r.s.iter().all(|&v| v == 0.0));
        assert_eq!(r.sign_changes, 0);
        let xt = *r.x.last().unwrap();
        let discrete = (1.0f64 + 2.0 * 1e-3).powi(-2000);
        assert!((xt - discrete).abs() < 1e-14);
        assert!((xt - (-4.0f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn delay_ode_growth_and_sign_flip() {
        let g = run_prototype_delay_ode(1.0, 2.0, 1.0, 20.0, 1e-3).unwrap();
        assert!(g.rate_relative_error().unwrap() < 0.05, "{:?} {:?}", g.fitted_rate, g.root);
        assert_eq!(g.sign_changes, 0);
        let f = run_prototype_delay_ode(1.0, -1.0, 1.0, 20.0, 1e-3).unwrap();
        assert!(f.sign_changes > 0 && f.min_s < 0.0 && f.max_s > 0.0);
        assert!(matches!(
            run_prototype_delay_ode(1.0, 1.0, 0.3333, 1.0, 0.01),
            Err(Error::MisalignedAtom { .. })
        ));
    }

    #[test]
    fn vanishing_memory_zero_kernel_gives_zero_errors() {
        let s = run_vanishing_memory(&spec(MeasureKernel::zero(), 0.5, 0.01, 16), 3).unwrap();
        assert!(s.errors().iter().all(|&e| e == 0.0));
        assert!(s.fit.is_none());
        let atom = spec(MeasureKernel::atom(0.1, 1.0).unwrap(), 0.5, 0.01, 16);
        assert!(matches!(run_vanishing_memory(&atom, 3), Err(Error::UnsupportedKernel(_))));
    }

    #[test]
    fn memory_to_delay_needs_resolution() {
        let p = spec(MeasureKernel::atom(0.5, 1.0).unwrap(), 1.0, 1.0 / 64.0, 16);
        assert!(matches!(run_memory_to_delay(&p, &[0.05]), Err(Error::Resolution(_))));
        let ac = spec(MeasureKernel::exponential(1.0, 1.0, 1.0).unwrap(), 1.0, 0.01, 16);
        assert!(run_memory_to_delay(&ac, &[0.2]).is_err());
    }

    #[test]
    fn stability_of_identical_kernels_is_trivial() {
        let k = MeasureKernel::exponential(1.0, 0.1, 1.0).unwrap();
        let p = spec(k.clone(), 1.0, 0.01, 16);
        let r = kernel_stability_pair(&p, &k, &k, "same").unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert_eq!(r.status, PairStatus::Asserted { pass: true });
    }

    #[test]
    fn stability_exponential_masses() {
        let k1 = MeasureKernel::exponential(1.0, 0.1, 1.0).unwrap();
        let k2 = MeasureKernel::exponential(1.0, 0.12, 1.0).unwrap();
        let p = spec(k2.clone(), 1.0, 0.01, 32);
        let r = kernel_stability_pair(&p, &k1, &k2, "exp").unwrap();
        assert!(r.lhs > 0.0 && r.ratio() <= 1.0, "{r:?}");
        let big = MeasureKernel::atom(0.5, 2.0).unwrap();
        let r = kernel_stability_pair(&p, &big, &k2, "big").unwrap();
        assert!(matches!(r.status, PairStatus::Skipped(_)));
    }

    #[test]
    fn longtime_zero_data() {
        let mut p = spec(MeasureKernel::fractional(0.5, 2.0).unwrap(), 2.0, 0.05, 8);
        p.u0 = vec![0.0; 7];
        let (_, r) = run_longtime(&p, 3).unwrap();
        assert_eq!(r.checkpoints.len(), 3);
        assert!(r.checkpoints.iter().all(|c| c.cum_a0 == 0.0 && c.time_average_v == 0.0));
        assert!(r.dissipation_bounded);
        assert!(!r.average_decreasing);
    }

    #[test]
    fn monotone_floor() {
        assert_eq!(monotone_to_floor(&[4.0, 2.0, 1.0], 0.0), (true, 0.5));
        assert!(!monotone_to_floor(&[4.0, 2.0, 2.0], 0.0).0);
        assert!(monotone_to_floor(&[4.0, 1e-9, 1e-9], 1e-8).0);
    }
}
