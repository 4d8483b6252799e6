//! Discrete measure convolution on a uniform time grid.
//!
//! Cell `j` is `(jΔt, (j+1)Δt]` and carries the exact kernel mass `w_j`; it is
//! paired with the left-endpoint sample `g_{n-j}`. Atoms at lag `ℓ` contribute
//! `m g_{n-ℓ}`. Only delays in `(0, t_n]` act at step `n`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel::{AcDensity, MeasureKernel};
use crate::linalg::axpy;
use crate::mesh_fem::{dual_norm, form_constants, norm_h, seminorm_v, FemMatrices};
use crate::quadrature::integrate_with_breaks;
use crate::trajectory::Trajectory;

/// Default tolerance for atom alignment, in units of `Δt`.
pub const ALIGNMENT_TOL: f64 = 1e-9;

/// Uniform grid with `n_history` nodes in `(-τ_max, 0]` below index 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    n_history: usize,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_history: usize, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        Ok(Self {
            dt,
            n_history,
            n_steps,
        })
    }

    /// Grid of `(0, T]` with enough history for `tau_max`. `dt` must divide `T`.
    pub fn for_horizon(horizon: f64, dt: f64, tau_max: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let ratio = horizon / dt;
        let n_steps = ratio.round();
        if (ratio - n_steps).abs() > ALIGNMENT_TOL * ratio.max(1.0) || n_steps < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "time step {dt} does not divide the horizon {horizon}"
            )));
        }
        let n_history = (tau_max / dt - ALIGNMENT_TOL).ceil().max(0.0) as usize;
        Self::new(dt, n_history, n_steps as usize)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_history(&self) -> usize {
        self.n_history
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn time(&self, n: isize) -> f64 {
        n as f64 * self.dt
    }
}

/// Cell masses `w_j = μ_ac((jΔt, (j+1)Δt])` plus atom placements.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureWeights {
    pub dt: f64,
    pub ac: Vec<f64>,
    /// `(lag index, mass)`.
    pub atoms: Vec<(usize, f64)>,
}

impl QuadratureWeights {
    pub fn total(&self) -> f64 {
        self.ac.iter().sum::<f64>() + self.atoms.iter().map(|a| a.1).sum::<f64>()
    }

    /// Mass acting within the first `cells` cells, i.e. `μ((0, cells·Δt])`.
    pub fn mass_within(&self, cells: usize) -> f64 {
        let ac: f64 = self.ac.iter().take(cells).sum();
        let at: f64 = self.atoms.iter().filter(|a| a.0 <= cells).map(|a| a.1).sum();
        ac + at
    }

    pub fn is_zero(&self) -> bool {
        self.ac.iter().all(|&w| w == 0.0) && self.atoms.is_empty()
    }

    /// Weight attached to the current value `g_n` (cell 0).
    pub fn w0(&self) -> f64 {
        self.ac.first().copied().unwrap_or(0.0)
    }

    /// Weights of the measure scaled by `c`.
    pub fn scaled(&self, c: f64) -> QuadratureWeights {
        QuadratureWeights {
            dt: self.dt,
            ac: self.ac.iter().map(|w| c * w).collect(),
            atoms: self.atoms.iter().map(|&(l, m)| (l, c * m)).collect(),
        }
    }
}

fn atom_lag(tau: f64, dt: f64, tol: f64) -> Result<usize> {
    let r = tau / dt;
    let l = r.round();
    if (r - l).abs() > tol || l < 1.0 {
        return Err(Error::MisalignedAtom {
            tau,
            nearest: l * dt,
        });
    }
    Ok(l as usize)
}

/// Product-integration weights of `k` on `grid` over `(0, T]`.
pub fn build_weights(k: &MeasureKernel, grid: &TimeGrid) -> Result<QuadratureWeights> {
    build_weights_with_tol(k, grid, ALIGNMENT_TOL)
}

pub fn build_weights_with_tol(k: &MeasureKernel, grid: &TimeGrid, tol: f64) -> Result<QuadratureWeights> {
    let dt = grid.dt();
    let n = grid.n_steps();
    let mut atoms = Vec::new();
    for a in k.atoms() {
        let l = atom_lag(a.tau, dt, tol)?;
        if l <= n {
            atoms.push((l, a.mass));
        }
    }
    let t = |j: usize| j as f64 * dt;
    let ac: Vec<f64> = match k.ac() {
        AcDensity::None => vec![0.0; n],
        AcDensity::Fractional { .. } | AcDensity::Exponential { .. } => {
            // closed-form cell integrals, differenced on the antiderivative
            (0..n).map(|j| (k.ac_cdf(t(j + 1)) - k.ac_cdf(t(j))).max(0.0)).collect()
        }
        AcDensity::Mollified { .. } | AcDensity::Tabulated { .. } => {
            let breaks = k.ac_breakpoints();
            let f = |s: f64| k.eval_density(s);
            // horizon-independent tolerance keeps restricted runs bit-identical
            let peak = match k.ac() {
                AcDensity::Mollified { mass, eps, .. } => mass / eps,
                AcDensity::Tabulated { values, .. } => values.iter().copied().fold(0.0, f64::max),
                _ => 1.0,
            };
            let scale = (peak * dt).max(1e-300);
            (0..n)
                .map(|j| {
                    let (a, b) = (t(j), t(j + 1).min(k.tau_max()));
                    if a >= b {
                        0.0
                    } else {
                        integrate_with_breaks(&f, a, b, &breaks, 1e-15 * scale)
                    }
                })
                .collect()
        }
    };
    Ok(QuadratureWeights { dt, ac, atoms })
}

fn check_cover(w: &QuadratureWeights, g: &Trajectory, n: usize) -> Result<()> {
    if n as isize > g.last_index() || n > w.ac.len() {
        return Err(Error::InsufficientHistory {
            needed: n as isize,
            first: g.first_index(),
            last: g.last_index().min(w.ac.len() as isize),
        });
    }
    Ok(())
}

/// Adds `Σ_{j=first..n-1} w_j g_{n-j} + Σ_{ℓ ≤ n, ℓ ≥ first} m g_{n-ℓ}` into `out`.
pub fn accumulate_convolution(
    w: &QuadratureWeights,
    g: &Trajectory,
    n: usize,
    first_lag: usize,
    out: &mut [f64],
) -> Result<()> {
    check_cover(w, g, n)?;
    for j in first_lag..n {
        let wj = w.ac[j];
        if wj != 0.0 {
            axpy(wj, g.state((n - j) as isize), out);
        }
    }
    for &(l, m) in &w.atoms {
        if l >= first_lag && l <= n {
            axpy(m, g.state((n - l) as isize), out);
        }
    }
    Ok(())
}

/// `(μ*g)_n`.
pub fn convolve_at(w: &QuadratureWeights, g: &Trajectory, n: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; g.n_dofs()];
    accumulate_convolution(w, g, n, 0, &mut out)?;
    Ok(out)
}

/// `(μ*g)_n` for `n = 0..=N`; entry 0 is the empty convolution.
pub fn convolve_direct(w: &QuadratureWeights, g: &Trajectory) -> Result<Vec<Vec<f64>>> {
    let n_out = w.ac.len();
    (0..=n_out).map(|n| convolve_at(w, g, n)).collect()
}

/// `K1 (μ*u)_n`, the discrete memory load at step `n`.
pub fn apply_memory(w: &QuadratureWeights, fem: &FemMatrices, u: &Trajectory, n: usize) -> Result<Vec<f64>> {
    let c = convolve_at(w, u, n)?;
    Ok(fem.k1.mul(&c))
}

/// Both sides of the Young-type estimate in the H norm and the V seminorm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoungReport {
    pub lhs_h: f64,
    pub rhs_h: f64,
    pub lhs_v: f64,
    pub rhs_v: f64,
    pub pass: bool,
}

impl YoungReport {
    pub fn worst_ratio(&self) -> f64 {
        let r = |l: f64, r: f64| if r > 0.0 { l / r } else if l > 0.0 { f64::INFINITY } else { 0.0 };
        r(self.lhs_h, self.rhs_h).max(r(self.lhs_v, self.rhs_v))
    }
}

/// `‖μ*g‖_{L²(0,T;X)} ≤ μ((0,T]) ‖g‖_{L²(-τ_max,T;X)}` for `X ∈ {H, V}`.
pub fn young_check(w: &QuadratureWeights, g: &Trajectory, fem: &FemMatrices) -> Result<YoungReport> {
    let dt = w.dt;
    let conv = convolve_direct(w, g)?;
    let mut lhs_h = 0.0;
    let mut lhs_v = 0.0;
    for c in conv.iter().skip(1) {
        lhs_h += dt * norm_h(c, fem)?.powi(2);
        lhs_v += dt * seminorm_v(c, fem)?.powi(2);
    }
    let mut gh = 0.0;
    let mut gv = 0.0;
    for n in g.first_index()..=g.last_index() {
        gh += dt * norm_h(g.state(n), fem)?.powi(2);
        gv += dt * seminorm_v(g.state(n), fem)?.powi(2);
    }
    let mass = w.total();
    let rep = YoungReport {
        lhs_h: lhs_h.sqrt(),
        rhs_h: mass * gh.sqrt(),
        lhs_v: lhs_v.sqrt(),
        rhs_v: mass * gv.sqrt(),
        pass: false,
    };
    let tol = 1.0 + 1e-10;
    Ok(YoungReport {
        pass: rep.lhs_h <= rep.rhs_h * tol && rep.lhs_v <= rep.rhs_v * tol,
        ..rep
    })
}

/// Outcome of the memory-operator boundedness check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorNormReport {
    pub worst_ratio: f64,
    pub trials: usize,
    pub violations: usize,
}

/// `‖K_μ u‖_{L²(V*)} / (Λ1 μ((0,T]) ‖u‖_{L²(-τ_max,T;V)})`.
pub fn operator_norm_ratio(w: &QuadratureWeights, fem: &FemMatrices, u: &Trajectory, lambda1: f64) -> Result<f64> {
    let dt = w.dt;
    let mut lhs = 0.0;
    for n in 1..=w.ac.len() {
        let load = apply_memory(w, fem, u, n)?;
        lhs += dt * dual_norm(&load, fem)?.powi(2);
    }
    let mut un = 0.0;
    for n in u.first_index()..=u.last_index() {
        un += dt * seminorm_v(u.state(n), fem)?.powi(2);
    }
    let rhs = lambda1 * w.total() * un.sqrt();
    let lhs = lhs.sqrt();
    Ok(if rhs > 0.0 {
        lhs / rhs
    } else if lhs > 0.0 {
        f64::INFINITY
    } else {
        0.0
    })
}

/// Gaussian random trajectory with history, from a seeded stream.
pub fn random_trajectory(grid: TimeGrid, n_dofs: usize, seed: u64) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Trajectory::zeros(grid, n_dofs);
    for n in t.first_index()..=t.last_index() {
        for v in t.state_mut(n) {
            *v = StandardNormal.sample(&mut rng);
        }
    }
    t
}

pub fn operator_norm_check(
    k: &MeasureKernel,
    fem: &FemMatrices,
    grid: &TimeGrid,
    trials: usize,
    seed: u64,
) -> Result<OperatorNormReport> {
    let w = build_weights(k, grid)?;
    let lambda1 = form_constants(fem).lambda1;
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for i in 0..trials {
        let u = random_trajectory(*grid, fem.n_dofs(), seed.wrapping_add(i as u64));
        let r = operator_norm_ratio(&w, fem, &u, lambda1)?;
        if r > 1.0 + 1e-10 {
            violations += 1;
        }
        worst = worst.max(r);
    }
    Ok(OperatorNormReport {
        worst_ratio: worst,
        trials,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{mollify_delay, Atom};
    use crate::mesh_fem::{assemble, build_mesh, CoefficientField};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fem(n: usize, a1: f64) -> FemMatrices {
        let mesh = build_mesh(1.0, n).unwrap();
        assemble(&mesh, &CoefficientField::constant(1.0), &CoefficientField::constant(a1)).unwrap()
    }

    fn constant_traj(grid: TimeGrid, v: &[f64]) -> Trajectory {
        let mut t = Trajectory::zeros(grid, v.len());
        for n in t.first_index()..=t.last_index() {
            t.state_mut(n).copy_from_slice(v);
        }
        t
    }

    fn mixed() -> MeasureKernel {
        MeasureKernel::new(
            AcDensity::Fractional { alpha: 0.5, weight: 1.0 },
            vec![Atom { tau: 0.25, mass: 1.0 }],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn fractional_first_weight() {
        let k = MeasureKernel::fractional(0.5, 1.0).unwrap();
        let grid = TimeGrid::for_horizon(1.0, 0.25, 1.0).unwrap();
        let w = build_weights(&k, &grid).unwrap();
        assert_relative_eq!(w.ac[0], 0.5641895835477563, max_relative = 1e-12);
        assert_eq!(w.ac.len(), 4);
    }

    #[test]
    fn atom_placement_and_misalignment() {
        let k = MeasureKernel::atom(0.5, 2.0).unwrap();
        let grid = TimeGrid::for_horizon(1.0, 0.25, 0.5).unwrap();
        let w = build_weights(&k, &grid).unwrap();
        assert_eq!(w.atoms, vec![(2, 2.0)]);
        let k = MeasureKernel::atom(0.5, 1.0).unwrap();
        let grid = TimeGrid::new(0.3, 2, 4).unwrap();
        match build_weights(&k, &grid) {
            Err(Error::MisalignedAtom { tau, nearest }) => {
                assert_eq!(tau, 0.5);
                assert_relative_eq!(nearest, 0.6, max_relative = 1e-12);
            }
            other => panic!("expected misaligned atom, got {other:?}"),
        }
    }

    #[test]
    fn mass_consistency_all_variants() {
        let kernels = vec![
            MeasureKernel::fractional(0.5, 2.0).unwrap(),
            MeasureKernel::fractional(0.9, 0.7).unwrap(),
            MeasureKernel::exponential(3.0, 2.0, 2.0).unwrap(),
            mollify_delay(1.0, 0.5, 0.1).unwrap(),
            mollify_delay(2.0, 0.3, 0.07).unwrap(),
            MeasureKernel::new(
                AcDensity::Tabulated { grid: vec![0.0, 0.13, 0.4, 1.1], values: vec![1.0, 3.0, 0.5, 0.0] },
                vec![Atom { tau: 0.5, mass: 0.3 }],
                1.1,
            )
            .unwrap(),
            mixed(),
            MeasureKernel::zero(),
        ];
        for k in &kernels {
            for dt in [0.05, 0.01, 1.0 / 64.0] {
                let grid = TimeGrid::for_horizon(1.0, dt, k.tau_max()).unwrap();
                let w = build_weights(k, &grid).unwrap();
                let exact = k.total_mass(grid.horizon());
                assert!(
                    (w.total() - exact).abs() <= 1e-12 * exact.max(1.0),
                    "{k:?} dt={dt}: {} vs {exact}",
                    w.total()
                );
            }
        }
    }

    #[test]
    fn constant_signal_gives_mass() {
        let grid = TimeGrid::for_horizon(1.0, 0.05, 1.0).unwrap();
        let v = [1.5, -2.0, 0.25];
        let g = constant_traj(grid, &v);
        for k in [
            MeasureKernel::exponential(2.0, 1.0, 1.0).unwrap(),
            MeasureKernel::atom(0.25, 2.0).unwrap(),
            mixed(),
            mollify_delay(1.0, 0.5, 0.1).unwrap(),
        ] {
            let w = build_weights(&k, &grid).unwrap();
            let c = convolve_direct(&w, &g).unwrap();
            for n in 0..=grid.n_steps() {
                let m = k.total_mass(grid.time(n as isize));
                for (ci, vi) in c[n].iter().zip(&v) {
                    assert!((ci - m * vi).abs() <= 1e-13 * (1.0 + m.abs()), "{k:?} n={n}");
                }
            }
        }
    }

    #[test]
    fn pure_delay_is_a_shift() {
        let grid = TimeGrid::for_horizon(1.0, 0.125, 0.25).unwrap();
        let g = random_trajectory(grid, 3, 7);
        let w = build_weights(&MeasureKernel::atom(0.25, 3.0).unwrap(), &grid).unwrap();
        let c = convolve_direct(&w, &g).unwrap();
        for n in 2..=grid.n_steps() {
            let shifted = g.state(n as isize - 2);
            for (a, b) in c[n].iter().zip(shifted) {
                assert_eq!(*a, 3.0 * b);
            }
        }
        // delay not yet active
        assert!(c[1].iter().all(|&x| x == 0.0));
        let f = fem(4, 2.0);
        let load = apply_memory(&w, &f, &g, 5).unwrap();
        let expect = f.k1.mul(&g.state(3).iter().map(|x| 3.0 * x).collect::<Vec<_>>());
        for (a, b) in load.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_kernel_and_zero_a1() {
        let grid = TimeGrid::for_horizon(1.0, 0.1, 0.0).unwrap();
        let g = random_trajectory(grid, 3, 1);
        let w = build_weights(&MeasureKernel::zero(), &grid).unwrap();
        assert!(convolve_direct(&w, &g).unwrap().iter().all(|c| c.iter().all(|&x| x == 0.0)));
        let w = build_weights(&MeasureKernel::fractional(0.5, 1.0).unwrap(), &grid).unwrap();
        let f = fem(4, 0.0);
        assert!(apply_memory(&w, &f, &g, 7).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn insufficient_samples_error() {
        let grid = TimeGrid::for_horizon(1.0, 0.1, 0.0).unwrap();
        let short = TimeGrid::for_horizon(0.5, 0.1, 0.0).unwrap();
        let w = build_weights(&MeasureKernel::exponential(1.0, 1.0, 1.0).unwrap(), &grid).unwrap();
        let g = Trajectory::zeros(short, 2);
        assert!(matches!(convolve_direct(&w, &g), Err(Error::InsufficientHistory { .. })));
    }

    #[test]
    fn exponential_convolution_is_first_order() {
        // g(t) = sin(t) on t >= 0: ∫_0^t e^{-s} sin(t-s) ds = (sin t - cos t + e^{-t}) / 2
        let k = MeasureKernel::exponential(1.0, 1.0, 1.0).unwrap();
        let mut errs = Vec::new();
        for dt in [0.01, 0.005, 0.0025] {
            let grid = TimeGrid::for_horizon(1.0, dt, 1.0).unwrap();
            let mut g = Trajectory::zeros(grid, 1);
            for n in 0..=grid.n_steps() as isize {
                g.state_mut(n)[0] = grid.time(n).sin();
            }
            let w = build_weights(&k, &grid).unwrap();
            let c = convolve_direct(&w, &g).unwrap();
            let n = grid.n_steps();
            let t = grid.time(n as isize);
            let exact = 0.5 * (t.sin() - t.cos() + (-t).exp());
            errs.push((c[n][0] - exact).abs());
        }
        for p in errs.windows(2) {
            assert!((p[0] / p[1]).log2() >= 0.95, "{errs:?}");
        }
    }

    #[test]
    fn young_zero_and_delay_witness() {
        let grid = TimeGrid::for_horizon(1.0, 0.125, 0.25).unwrap();
        let f = fem(8, 1.0);
        let w = build_weights(&MeasureKernel::atom(0.25, 2.0).unwrap(), &grid).unwrap();
        let z = Trajectory::zeros(grid, 7);
        let r = young_check(&w, &z, &f).unwrap();
        assert!(r.pass && r.lhs_h == 0.0 && r.rhs_h == 0.0);
        // signal supported well inside the window: all shifts fit
        let mut g = Trajectory::zeros(grid, 7);
        for n in 1..=4 {
            g.state_mut(n).iter_mut().enumerate().for_each(|(i, x)| *x = (i + n as usize) as f64);
        }
        let r = young_check(&w, &g, &f).unwrap();
        assert!(r.pass);
        let ratio = r.worst_ratio();
        assert!(ratio > 0.0 && ratio <= 1.0 + 1e-12, "{ratio}");
    }

    #[test]
    fn operator_norm_examples() {
        let grid = TimeGrid::for_horizon(1.0, 0.05, 1.0).unwrap();
        let f0 = fem(8, 0.0);
        let k = MeasureKernel::fractional(0.5, 1.0).unwrap();
        let r = operator_norm_check(&k, &f0, &grid, 3, 1).unwrap();
        assert_eq!(r.worst_ratio, 0.0);
        let f1 = fem(8, 1.5);
        let r = operator_norm_check(&k, &f1, &grid, 20, 1).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.worst_ratio <= 1.0 && r.worst_ratio > 0.0);
        let w = build_weights(&k, &grid).unwrap();
        let u = random_trajectory(grid, 7, 3);
        let mut u2 = u.clone();
        for n in u2.first_index()..=u2.last_index() {
            u2.state_mut(n).iter_mut().for_each(|x| *x *= 2.0);
        }
        let l1 = form_constants(&f1).lambda1;
        let a = operator_norm_ratio(&w, &f1, &u, l1).unwrap();
        let b = operator_norm_ratio(&w, &f1, &u2, l1).unwrap();
        assert!((a - b).abs() <= 1e-13 * a);
    }

    proptest! {
        #[test]
        fn linear_in_signal_and_additive_in_measure(seed in 0u64..1000, c in -3.0f64..3.0) {
            let grid = TimeGrid::for_horizon(1.0, 0.05, 1.0).unwrap();
            let k = mixed();
            let w = build_weights(&k, &grid).unwrap();
            let wa = build_weights(&k.ac_part(), &grid).unwrap();
            let wt = build_weights(&k.atomic_part(), &grid).unwrap();
            let g = random_trajectory(grid, 5, seed);
            let h = random_trajectory(grid, 5, seed + 1);
            let mut comb = g.clone();
            for n in comb.first_index()..=comb.last_index() {
                let hn = h.state(n).to_vec();
                axpy(c, &hn, comb.state_mut(n));
            }
            let f = fem(6, 1.0);
            for n in [1usize, 5, 11, 20] {
                let lg = apply_memory(&w, &f, &g, n).unwrap();
                let lh = apply_memory(&w, &f, &h, n).unwrap();
                let lc = apply_memory(&w, &f, &comb, n).unwrap();
                let la = apply_memory(&wa, &f, &g, n).unwrap();
                let lt = apply_memory(&wt, &f, &g, n).unwrap();
                let scale = lg.iter().chain(&lh).map(|x| x.abs()).fold(1.0, f64::max);
                for i in 0..5 {
                    prop_assert!((lc[i] - lg[i] - c * lh[i]).abs() <= 1e-13 * scale * (1.0 + c.abs()));
                    prop_assert!((lg[i] - la[i] - lt[i]).abs() <= 1e-14 * scale);
                }
            }
        }

        #[test]
        fn young_holds_for_random_signals(seed in 0u64..10_000) {
            let grid = TimeGrid::for_horizon(0.5, 0.025, 0.25).unwrap();
            let f = fem(6, 1.0);
            let w = build_weights(&mixed().restrict(0.25), &grid).unwrap();
            let g = random_trajectory(grid, 5, seed);
            prop_assert!(young_check(&w, &g, &f).unwrap().pass);
        }
    }
}
