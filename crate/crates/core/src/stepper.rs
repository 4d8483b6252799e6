//! Implicit Euler for `∂ₜu + A₀u + K_μu = f` with a measure memory term.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use crate::convolution::{accumulate_convolution, build_weights, QuadratureWeights, TimeGrid};
use crate::error::{Error, Result};
use crate::kernel::MeasureKernel;
use crate::linalg::{axpy, SymTridiag, TridiagFactor};
use crate::mesh_fem::{dual_norm, form_constants, seminorm_v, FemMatrices};
use crate::trajectory::Trajectory;

/// Mismatch allowed between `ψ(0)` and `u₀`.
pub const HISTORY_MATCH_TOL: f64 = 1e-12;
pub const DEFAULT_PICARD_TOL: f64 = 1e-12;
pub const DEFAULT_SAFETY: f64 = 0.5;
const PICARD_MAX_ITER: usize = 500;

type ScalarField = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type NodalRule = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Right-hand side `f(t, x)`.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    Field(ScalarField),
    /// Spatially uniform, piecewise linear in time; constant beyond the table.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => write!(f, "Zero"),
            Forcing::Field(_) => write!(f, "Field(..)"),
            Forcing::Tabulated { times, .. } => write!(f, "Tabulated({} samples)", times.len()),
        }
    }
}

pub(crate) fn interp_table(times: &[f64], values: &[f64], t: f64) -> f64 {
    if times.is_empty() {
        return 0.0;
    }
    if t <= times[0] {
        return values[0];
    }
    let n = times.len();
    if t >= times[n - 1] {
        return values[n - 1];
    }
    let i = times.partition_point(|&s| s <= t) - 1;
    let r = (t - times[i]) / (times[i + 1] - times[i]);
    values[i] + r * (values[i + 1] - values[i])
}

impl Forcing {
    pub fn field<F: Fn(f64, f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Forcing::Field(Arc::new(f))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }

    /// Nodal interpolant of `f(t, ·)`.
    pub fn nodal(&self, t: f64, fem: &FemMatrices) -> Vec<f64> {
        match self {
            Forcing::Zero => vec![0.0; fem.n_dofs()],
            Forcing::Field(f) => fem.mesh().interpolate(|x| f(t, x)),
            Forcing::Tabulated { times, values } => {
                vec![interp_table(times, values, t); fem.n_dofs()]
            }
        }
    }

    /// Load vector `M · I_h f(t, ·)`.
    pub fn load(&self, t: f64, fem: &FemMatrices) -> Vec<f64> {
        match self {
            Forcing::Zero => vec![0.0; fem.n_dofs()],
            _ => fem.m.mul(&self.nodal(t, fem)),
        }
    }
}

/// Prescribed past `ψ` on `(-τ_max, 0]`.
#[derive(Clone)]
pub enum History {
    /// `ψ ≡ 0`; requires `u₀ = 0`.
    Zero,
    /// `ψ ≡ u₀`.
    Constant,
    /// `ψ(t) = a(t) u₀` with `a` piecewise linear in time.
    Profile { times: Vec<f64>, amplitude: Vec<f64> },
    Rule(NodalRule),
}

impl fmt::Debug for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            History::Zero => write!(f, "Zero"),
            History::Constant => write!(f, "Constant"),
            History::Profile { times, .. } => write!(f, "Profile({} samples)", times.len()),
            History::Rule(_) => write!(f, "Rule(..)"),
        }
    }
}

impl History {
    pub fn sample(&self, t: f64, u0: &[f64]) -> Vec<f64> {
        match self {
            History::Zero => vec![0.0; u0.len()],
            History::Constant => u0.to_vec(),
            History::Profile { times, amplitude } => {
                let a = interp_table(times, amplitude, t);
                u0.iter().map(|v| a * v).collect()
            }
            History::Rule(r) => r(t),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub fem: FemMatrices,
    pub kernel: MeasureKernel,
    pub forcing: Forcing,
    pub u0: Vec<f64>,
    pub history: History,
    pub horizon: f64,
    pub dt: f64,
}

impl ProblemSpec {
    /// Memory measure restricted to the horizon.
    pub fn active_kernel(&self) -> MeasureKernel {
        self.kernel.restrict(self.horizon)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::for_horizon(self.horizon, self.dt, self.active_kernel().tau_max())
    }

    pub fn weights(&self) -> Result<QuadratureWeights> {
        build_weights(&self.active_kernel(), &self.grid()?)
    }

    pub fn with_horizon(&self, horizon: f64) -> ProblemSpec {
        ProblemSpec {
            horizon,
            kernel: self.kernel.restrict(horizon),
            ..self.clone()
        }
    }

    pub fn with_kernel(&self, kernel: MeasureKernel) -> ProblemSpec {
        ProblemSpec {
            kernel,
            ..self.clone()
        }
    }

    pub fn with_dt(&self, dt: f64) -> ProblemSpec {
        ProblemSpec { dt, ..self.clone() }
    }

    pub fn load(&self, n: isize) -> Vec<f64> {
        self.forcing.load(n as f64 * self.dt, &self.fem)
    }

    fn validate(&self) -> Result<()> {
        if self.u0.len() != self.fem.n_dofs() {
            return Err(Error::DimensionMismatch {
                expected: self.fem.n_dofs(),
                found: self.u0.len(),
            });
        }
        if self.u0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("initial value is not finite".into()));
        }
        Ok(())
    }

    /// Trajectory holding the sampled history, with node 0 set to `u₀`.
    pub fn initial_trajectory(&self, grid: TimeGrid) -> Result<Trajectory> {
        self.validate()?;
        let mut traj = Trajectory::zeros(grid, self.fem.n_dofs());
        let psi0 = self.history.sample(0.0, &self.u0);
        if psi0.len() != self.u0.len() {
            return Err(Error::DimensionMismatch {
                expected: self.u0.len(),
                found: psi0.len(),
            });
        }
        let mismatch = psi0
            .iter()
            .zip(&self.u0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if mismatch > HISTORY_MATCH_TOL {
            return Err(Error::HistoryMismatch { mismatch });
        }
        for n in traj.first_index()..0 {
            let v = self.history.sample(grid.time(n), &self.u0);
            if v.len() != self.u0.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.u0.len(),
                    found: v.len(),
                });
            }
            traj.state_mut(n).copy_from_slice(&v);
        }
        traj.state_mut(0).copy_from_slice(&self.u0);
        Ok(traj)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveReport {
    /// Contraction factor of the chosen subinterval width (fixed-point path).
    pub q: Option<f64>,
    /// Cells per subinterval (fixed-point path).
    pub subinterval_cells: Option<usize>,
    pub picard_iterations: Vec<usize>,
    /// Largest relative residual of the linear solves.
    pub max_linear_residual: f64,
    pub wall_time: f64,
}

fn relative_residual(a: &SymTridiag, x: &[f64], rhs: &[f64]) -> f64 {
    let ax = a.mul(x);
    let num = ax.iter().zip(rhs).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let den = rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

fn check_finite(v: &[f64], step: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteState { step })
    }
}

fn factor_system(a: &SymTridiag) -> Result<TridiagFactor> {
    a.factor()
}

/// Production path: the current-cell weight is implicit, older memory lagged.
pub fn solve(p: &ProblemSpec) -> Result<(Trajectory, SolveReport)> {
    let start = Instant::now();
    let grid = p.grid()?;
    let w = build_weights(&p.active_kernel(), &grid)?;
    let mut traj = p.initial_trajectory(grid)?;
    let fem = &p.fem;
    let dt = grid.dt();
    let a = fem.m.add_scaled(dt, &fem.k0).add_scaled(dt * w.w0(), &fem.k1);
    let factor = factor_system(&a)?;
    let memory_active = !w.is_zero() && !fem.k1.is_zero();
    let nd = fem.n_dofs();
    let mut rhs = vec![0.0; nd];
    let mut lag = vec![0.0; nd];
    let mut worst = 0.0f64;
    for n in 1..=grid.n_steps() {
        fem.m.mul_into(traj.state(n as isize - 1), &mut rhs);
        if !p.forcing.is_zero() {
            axpy(dt, &p.load(n as isize), &mut rhs);
        }
        if memory_active {
            lag.iter_mut().for_each(|v| *v = 0.0);
            accumulate_convolution(&w, &traj, n, 1, &mut lag)?;
            fem.k1.mul_add_into(-dt, &lag, &mut rhs);
        }
        let mut x = rhs.clone();
        factor.solve_in_place(&mut x);
        check_finite(&x, n)?;
        worst = worst.max(relative_residual(&a, &x, &rhs));
        traj.state_mut(n as isize).copy_from_slice(&x);
    }
    Ok((
        traj,
        SolveReport {
            max_linear_residual: worst,
            wall_time: start.elapsed().as_secs_f64(),
            ..Default::default()
        },
    ))
}

/// `Λ1 μ((0, p Δt]) / α0` on the weight table.
pub fn cell_contraction_factor(w: &QuadratureWeights, lambda1: f64, alpha0: f64, cells: usize) -> f64 {
    lambda1 * w.mass_within(cells) / alpha0
}

fn l2v_sq(fem: &FemMatrices, dt: f64, states: &[Vec<f64>]) -> f64 {
    states.iter().map(|s| dt * fem.s.quad_form(s)).sum()
}

/// Fixed-point path: partition into subintervals on which the frozen-memory
/// map contracts, and iterate it to convergence on each.
pub fn solve_picard(p: &ProblemSpec, safety: f64, picard_tol: f64) -> Result<(Trajectory, SolveReport)> {
    if !(safety > 0.0 && safety < 1.0) {
        return Err(Error::InvalidArgument(format!("safety must lie in (0,1), got {safety}")));
    }
    let start = Instant::now();
    let grid = p.grid()?;
    let w = build_weights(&p.active_kernel(), &grid)?;
    let fem = &p.fem;
    let consts = form_constants(fem);
    let n_steps = grid.n_steps();
    let q1 = cell_contraction_factor(&w, consts.lambda1, consts.alpha0, 1);
    if q1 >= 1.0 {
        return Err(Error::NoAdmissibleDelta { q: q1 });
    }
    let mut cells = 1;
    while cells < n_steps
        && cell_contraction_factor(&w, consts.lambda1, consts.alpha0, cells + 1) <= safety
    {
        cells += 1;
    }
    let q = cell_contraction_factor(&w, consts.lambda1, consts.alpha0, cells);

    let mut cur = p.initial_trajectory(grid)?;
    let dt = grid.dt();
    let a = fem.m.add_scaled(dt, &fem.k0);
    let factor = factor_system(&a)?;
    let nd = fem.n_dofs();
    let loads: Vec<Vec<f64>> = (0..=n_steps).map(|n| p.load(n as isize)).collect();
    let mut iterations = Vec::new();
    let mut worst = 0.0f64;
    let mut mem = vec![0.0; nd];
    let mut begin = 0usize;
    let mut sub = 0usize;
    while begin < n_steps {
        let end = (begin + cells).min(n_steps);
        let known = cur.state(begin as isize).to_vec();
        for n in begin + 1..=end {
            cur.state_mut(n as isize).copy_from_slice(&known);
        }
        let mut next: Vec<Vec<f64>> = vec![vec![0.0; nd]; end - begin];
        let mut iters = 0;
        let mut first_diff = None;
        loop {
            iters += 1;
            for n in begin + 1..=end {
                let prev: &[f64] = if n - 1 > begin { &next[n - 2 - begin] } else { cur.state(begin as isize) };
                let mut rhs = fem.m.mul(prev);
                axpy(dt, &loads[n], &mut rhs);
                mem.iter_mut().for_each(|v| *v = 0.0);
                // every lag read from `cur`: final values up to `begin`, old iterate after
                accumulate_convolution(&w, &cur, n, 0, &mut mem)?;
                fem.k1.mul_add_into(-dt, &mem, &mut rhs);
                let mut x = rhs.clone();
                factor.solve_in_place(&mut x);
                check_finite(&x, n)?;
                worst = worst.max(relative_residual(&a, &x, &rhs));
                next[n - 1 - begin] = x;
            }
            let old: Vec<Vec<f64>> = (begin + 1..=end).map(|n| cur.state(n as isize).to_vec()).collect();
            let diff: Vec<Vec<f64>> = next
                .iter()
                .zip(&old)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect();
            let d = l2v_sq(fem, dt, &diff).sqrt();
            let norm = l2v_sq(fem, dt, &next).sqrt();
            for n in begin + 1..=end {
                cur.state_mut(n as isize).copy_from_slice(&next[n - 1 - begin]);
            }
            if d <= picard_tol * norm || d == 0.0 {
                break;
            }
            let d0 = *first_diff.get_or_insert(d);
            if iters >= PICARD_MAX_ITER || !d.is_finite() || d > 1e8 * d0.max(f64::MIN_POSITIVE) {
                return Err(Error::IterationDivergence {
                    subinterval: sub,
                    iterations: iters,
                });
            }
        }
        iterations.push(iters);
        begin = end;
        sub += 1;
    }
    Ok((
        cur,
        SolveReport {
            q: Some(q),
            subinterval_cells: Some(cells),
            picard_iterations: iterations,
            max_linear_residual: worst,
            wall_time: start.elapsed().as_secs_f64(),
        },
    ))
}

/// `sqrt(Σ Δt |uⁿ - vⁿ|²_V)` over `n = 1..=N`.
pub fn l2v_distance(a: &Trajectory, b: &Trajectory, fem: &FemMatrices) -> f64 {
    let dt = a.grid().dt();
    let n = a.last_index().min(b.last_index());
    let mut acc = 0.0;
    let mut d = vec![0.0; a.n_dofs()];
    for k in 1..=n {
        for ((di, x), y) in d.iter_mut().zip(a.state(k)).zip(b.state(k)) {
            *di = x - y;
        }
        acc += dt * fem.s.quad_form(&d);
    }
    acc.sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionReport {
    pub horizons: Vec<f64>,
    /// Max abs difference for every pair of horizons on their common range.
    pub max_abs_diff: f64,
    pub bitwise_equal: bool,
}

/// Solves on each horizon with the kernel restricted to it, and compares the
/// trajectories pairwise on their shared range.
pub fn restriction_consistency(p: &ProblemSpec, horizons: &[f64]) -> Result<RestrictionReport> {
    let mut runs = Vec::with_capacity(horizons.len() + 1);
    let mut hs = horizons.to_vec();
    hs.push(p.horizon);
    for &h in &hs {
        if h > p.horizon * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("horizon {h} exceeds {}", p.horizon)));
        }
        runs.push(solve(&p.with_horizon(h))?.0);
    }
    let mut worst = 0.0f64;
    let mut bitwise = true;
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            worst = worst.max(runs[i].max_abs_diff(&runs[j]));
            bitwise &= runs[i].bitwise_eq_on_common(&runs[j]);
        }
    }
    Ok(RestrictionReport {
        horizons: hs,
        max_abs_diff: worst,
        bitwise_equal: bitwise,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeRegularityReport {
    /// `‖(uⁿ - uⁿ⁻¹)/Δt‖_{V*}` for `n = 1..=N`.
    pub series: Vec<f64>,
    pub lhs: f64,
    /// `‖f‖_{L²V*} + Λ0‖u‖_{L²V} + ‖K_μu‖_{L²V*}`.
    pub rhs: f64,
    pub pass: bool,
}

/// Dual norm of the discrete time derivative, which equals the residual
/// `Fⁿ - K0uⁿ - K1(μ*u)ₙ` of the scheme.
pub fn dt_dual_norm_series(t: &Trajectory, p: &ProblemSpec) -> Result<TimeRegularityReport> {
    let fem = &p.fem;
    let grid = *t.grid();
    let dt = grid.dt();
    let w = build_weights(&p.active_kernel(), &grid)?;
    let consts = form_constants(fem);
    let mut series = Vec::with_capacity(grid.n_steps());
    let (mut lhs, mut ff, mut uu, mut kk) = (0.0, 0.0, 0.0, 0.0);
    let mut mem = vec![0.0; fem.n_dofs()];
    for n in 1..=grid.n_steps() {
        let un = t.state(n as isize);
        let f = p.load(n as isize);
        mem.iter_mut().for_each(|v| *v = 0.0);
        accumulate_convolution(&w, t, n, 0, &mut mem)?;
        let km = fem.k1.mul(&mem);
        let mut r = f.clone();
        fem.k0.mul_add_into(-1.0, un, &mut r);
        axpy(-1.0, &km, &mut r);
        let s = dual_norm(&r, fem)?;
        series.push(s);
        lhs += dt * s * s;
        ff += dt * dual_norm(&f, fem)?.powi(2);
        uu += dt * seminorm_v(un, fem)?.powi(2);
        kk += dt * dual_norm(&km, fem)?.powi(2);
    }
    let lhs = lhs.sqrt();
    let rhs = ff.sqrt() + consts.lambda0 * uu.sqrt() + kk.sqrt();
    Ok(TimeRegularityReport {
        series,
        lhs,
        rhs,
        pass: lhs <= rhs * (1.0 + 1e-10),
    })
}
