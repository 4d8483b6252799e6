//! Diffusive representation of completely monotone kernels.
//!
//! With `k(t) ≈ Σ ωᵢ e^{-λᵢt}` the memory `(k*u)(t)` equals `Σ ωᵢ zᵢ(t)` where
//! `∂ₜzᵢ + λᵢzᵢ = u`, `zᵢ(0) = 0`. Each `zᵢ` is advanced by backward Euler.
//! The current value `uⁿ` enters `zᵢⁿ` through the coefficient
//! `c = Σ ωᵢΔt/(1+λᵢΔt)`, which is kept implicit so the system matrix
//! `M + Δt K0 + Δt c K1` stays constant and SPD.

use crate::error::{Error, Result};
use crate::kernel::{AcDensity, BernsteinQuadrature};
use crate::linalg::{axpy, dot};
use crate::mesh_fem::FemMatrices;
use crate::stepper::ProblemSpec;
use crate::trajectory::Trajectory;

/// Internal variables `zᵢ` at the current step.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusiveState {
    pub quadrature: BernsteinQuadrature,
    pub z: Vec<Vec<f64>>,
    pub step: usize,
}

/// Memory energy and dissipation, indexed by time step `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySplit {
    /// `½ Σ ωᵢ zᵢᵀK1zᵢ`.
    pub e_mem: Vec<f64>,
    /// `Σ ωᵢλᵢ zᵢᵀK1zᵢ`.
    pub d_mem: Vec<f64>,
    /// `⟨K1 Σ ωᵢzᵢⁿ, uⁿ⟩`, the memory term tested with the solution.
    pub memory_work: Vec<f64>,
}

/// One backward-Euler step of `∂ₜz + λz = u`.
pub fn advance_internal(z: &[f64], u_new: &[f64], lambda: f64, dt: f64) -> Vec<f64> {
    let d = 1.0 + lambda * dt;
    z.iter().zip(u_new).map(|(zi, ui)| (zi + dt * ui) / d).collect()
}

fn energies(q: &BernsteinQuadrature, z: &[Vec<f64>], fem: &FemMatrices) -> (f64, f64) {
    let mut e = 0.0;
    let mut d = 0.0;
    for ((zi, w), l) in z.iter().zip(&q.weights).zip(&q.nodes) {
        let a = fem.k1.quad_form(zi);
        e += 0.5 * w * a;
        d += w * l * a;
    }
    (e, d)
}

pub fn solve_diffusive(
    p: &ProblemSpec,
    q: &BernsteinQuadrature,
) -> Result<(Trajectory, DiffusiveState, EnergySplit)> {
    let kernel = p.active_kernel();
    if !kernel.atoms().is_empty() {
        return Err(Error::UnsupportedKernel(
            "delays have no diffusive representation".into(),
        ));
    }
    match kernel.ac() {
        AcDensity::Exponential { .. } | AcDensity::Fractional { .. } => {}
        other => {
            return Err(Error::UnsupportedKernel(format!(
                "{} density is not handled by the diffusive path",
                other.name()
            )))
        }
    }
    let grid = p.grid()?;
    let fem = &p.fem;
    let dt = grid.dt();
    let nd = fem.n_dofs();
    let mut traj = p.initial_trajectory(grid)?;
    let decay: Vec<f64> = q.nodes.iter().map(|l| 1.0 / (1.0 + l * dt)).collect();
    let c: f64 = q.weights.iter().zip(&decay).map(|(w, d)| w * dt * d).sum();
    let a = fem.m.add_scaled(dt, &fem.k0).add_scaled(dt * c, &fem.k1);
    let factor = a.factor()?;

    let mut z = vec![vec![0.0; nd]; q.len()];
    let n_steps = grid.n_steps();
    let mut split = EnergySplit {
        e_mem: vec![0.0; n_steps + 1],
        d_mem: vec![0.0; n_steps + 1],
        memory_work: vec![0.0; n_steps + 1],
    };
    let mut hist = vec![0.0; nd];
    let mut rhs = vec![0.0; nd];
    let mut mem = vec![0.0; nd];
    for n in 1..=n_steps {
        hist.iter_mut().for_each(|v| *v = 0.0);
        for ((zi, w), d) in z.iter().zip(&q.weights).zip(&decay) {
            axpy(w * d, zi, &mut hist);
        }
        fem.m.mul_into(traj.state(n as isize - 1), &mut rhs);
        if !p.forcing.is_zero() {
            axpy(dt, &p.load(n as isize), &mut rhs);
        }
        fem.k1.mul_add_into(-dt, &hist, &mut rhs);
        factor.solve_in_place(&mut rhs);
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: n });
        }
        traj.state_mut(n as isize).copy_from_slice(&rhs);
        let un = traj.state(n as isize);
        for (zi, l) in z.iter_mut().zip(&q.nodes) {
            *zi = advance_internal(zi, un, *l, dt);
        }
        mem.iter_mut().for_each(|v| *v = 0.0);
        for (zi, w) in z.iter().zip(&q.weights) {
            axpy(*w, zi, &mut mem);
        }
        let (e, d) = energies(q, &z, fem);
        split.e_mem[n] = e;
        split.d_mem[n] = d;
        split.memory_work[n] = dot(&fem.k1.mul(&mem), un);
    }
    Ok((
        traj,
        DiffusiveState {
            quadrature: q.clone(),
            z,
            step: n_steps,
        },
        split,
    ))
}

/// `rₙ = ⟨memoryⁿ, uⁿ⟩ - (E_mem(tₙ) - E_mem(tₙ₋₁))/Δt - D_mem(tₙ)` for `n = 1..=N`.
///
/// For the backward-Euler update this equals `Σ ωᵢ ½ ΔzᵢᵀK1Δzᵢ / Δt ≥ 0`.
pub fn structural_identity_residual(
    t: &Trajectory,
    _d: &DiffusiveState,
    e: &EnergySplit,
    _fem: &FemMatrices,
) -> Vec<f64> {
    let dt = t.grid().dt();
    (1..e.e_mem.len())
        .map(|n| e.memory_work[n] - (e.e_mem[n] - e.e_mem[n - 1]) / dt - e.d_mem[n])
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinedEnergyReport {
    /// `½‖uⁿ‖²_H + ΣΔt a₀ + E_mem + ΣΔt D_mem`, `n = 0..=N`.
    pub lhs: Vec<f64>,
    /// `½‖u₀‖²_H + ΣΔt⟨fᵐ,uᵐ⟩`.
    pub rhs: Vec<f64>,
    /// `max (lhs - rhs)`.
    pub worst_slack: f64,
}

pub fn refined_energy_report(
    t: &Trajectory,
    _d: &DiffusiveState,
    e: &EnergySplit,
    p: &ProblemSpec,
) -> RefinedEnergyReport {
    let fem = &p.fem;
    let dt = t.grid().dt();
    let n_steps = t.last_index() as usize;
    let u0 = t.state(0);
    let base = 0.5 * fem.m.quad_form(u0);
    let mut lhs = vec![base];
    let mut rhs = vec![base];
    let (mut a0, mut dm, mut fu) = (0.0, 0.0, 0.0);
    for n in 1..=n_steps {
        let un = t.state(n as isize);
        a0 += dt * fem.k0.quad_form(un);
        dm += dt * e.d_mem[n];
        if !p.forcing.is_zero() {
            fu += dt * dot(&p.load(n as isize), un);
        }
        lhs.push(0.5 * fem.m.quad_form(un) + a0 + e.e_mem[n] + dm);
        rhs.push(base + fu);
    }
    let worst_slack = lhs
        .iter()
        .zip(&rhs)
        .map(|(l, r)| l - r)
        .fold(f64::NEG_INFINITY, f64::max);
    RefinedEnergyReport {
        lhs,
        rhs,
        worst_slack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{bernstein_quadrature, MeasureKernel};
    use crate::mesh_fem::{assemble, build_mesh, CoefficientField};
    use crate::stepper::{l2v_distance, solve, Forcing, History};
    use std::f64::consts::PI;

    fn spec(a1: f64, kernel: MeasureKernel, dt: f64) -> ProblemSpec {
        let mesh = build_mesh(1.0, 32).unwrap();
        let fem = assemble(&mesh, &CoefficientField::constant(1.0), &CoefficientField::constant(a1)).unwrap();
        let u0 = mesh.interpolate(|x| (PI * x).sin());
        ProblemSpec {
            fem,
            kernel,
            forcing: Forcing::Zero,
            u0,
            history: History::Constant,
            horizon: 1.0,
            dt,
        }
    }

    #[test]
    fn advance_examples() {
        assert_eq!(advance_internal(&[0.0, 0.0], &[0.0, 0.0], 3.0, 0.1), vec![0.0, 0.0]);
        assert_eq!(advance_internal(&[1.0], &[2.0], 0.0, 0.5), vec![2.0]);
        let mut z = vec![0.0];
        for _ in 0..2000 {
            z = advance_internal(&z, &[3.0], 2.0, 0.05);
        }
        assert!((z[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn exponential_gap_shrinks_first_order() {
        let k = MeasureKernel::exponential(1.0, 1.0, 1.0).unwrap();
        let q = bernstein_quadrature(&k, 1, 1e-6).unwrap();
        let mut gaps = Vec::new();
        for dt in [4e-3, 2e-3, 1e-3] {
            let p = spec(1.0, k.clone(), dt);
            let (a, _) = solve(&p).unwrap();
            let (b, _, _) = solve_diffusive(&p, &q).unwrap();
            gaps.push(l2v_distance(&a, &b, &p.fem));
        }
        for g in gaps.windows(2) {
            assert!(g[0] / g[1] > 1.8, "{gaps:?}");
        }
    }

    #[test]
    fn zero_a1_matches_memoryless_run() {
        let k = MeasureKernel::exponential(1.0, 1.0, 1.0).unwrap();
        let q = bernstein_quadrature(&k, 1, 1e-6).unwrap();
        let p = spec(0.0, k, 0.01);
        let (b, d, e) = solve_diffusive(&p, &q).unwrap();
        assert!(e.e_mem.iter().chain(&e.d_mem).all(|&v| v == 0.0));
        let (a, _) = solve(&p.with_kernel(MeasureKernel::zero())).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-15);
        assert!(structural_identity_residual(&b, &d, &e, &p.fem).iter().all(|&r| r == 0.0));
    }

    #[test]
    fn structural_residual_is_nonnegative_and_first_order() {
        let k = MeasureKernel::exponential(2.0, 1.0, 1.0).unwrap();
        let q = bernstein_quadrature(&k, 1, 1e-6).unwrap();
        let mut worst = Vec::new();
        for dt in [1e-2, 5e-3, 2.5e-3] {
            let mut p = spec(1.0, k.clone(), dt);
            p.forcing = Forcing::field(|t, x| (PI * x).sin() * (1.0 + t));
            let (t, d, e) = solve_diffusive(&p, &q).unwrap();
            assert!(e.e_mem.iter().chain(&e.d_mem).all(|&v| v >= 0.0));
            assert_eq!(e.e_mem[0], 0.0);
            let r = structural_identity_residual(&t, &d, &e, &p.fem);
            assert!(r.iter().all(|&x| x >= -1e-12));
            worst.push(r.iter().copied().fold(0.0, f64::max));
        }
        for w in worst.windows(2) {
            assert!(w[0] / w[1] > 1.8, "{worst:?}");
        }
    }

    #[test]
    fn zero_rate_node_has_no_dissipation() {
        let q = BernsteinQuadrature {
            nodes: vec![0.0],
            weights: vec![0.7],
            error_bound: 0.0,
            t_lo: 1e-3,
            t_hi: 1.0,
        };
        let k = MeasureKernel::exponential(1.0, 1.0, 1.0).unwrap();
        let p = spec(1.0, k, 0.01);
        let (t, d, e) = solve_diffusive(&p, &q).unwrap();
        assert!(e.d_mem.iter().all(|&v| v == 0.0));
        let r = structural_identity_residual(&t, &d, &e, &p.fem);
        assert!(r.iter().all(|&x| x >= -1e-12));
    }

    #[test]
    fn refined_energy_decays_without_forcing() {
        let k = MeasureKernel::fractional(0.5, 1.0).unwrap();
        let q = bernstein_quadrature(&k, 64, 1e-6).unwrap();
        let p = spec(1.0, k, 0.01);
        let (t, d, e) = solve_diffusive(&p, &q).unwrap();
        let r = refined_energy_report(&t, &d, &e, &p);
        assert!(r.worst_slack <= 1e-14);
        assert!(r.lhs.windows(2).all(|w| w[1] <= w[0] + 1e-15));

        let mut p0 = p.clone();
        p0.u0 = vec![0.0; p.u0.len()];
        p0.history = History::Zero;
        let (t, d, e) = solve_diffusive(&p0, &q).unwrap();
        let r = refined_energy_report(&t, &d, &e, &p0);
        assert!(r.lhs.iter().chain(&r.rhs).all(|&v| v == 0.0));
    }

    #[test]
    fn atoms_and_other_densities_rejected() {
        let q = BernsteinQuadrature {
            nodes: vec![1.0],
            weights: vec![1.0],
            error_bound: 0.0,
            t_lo: 1e-3,
            t_hi: 1.0,
        };
        let p = spec(1.0, MeasureKernel::atom(0.25, 1.0).unwrap(), 0.05);
        assert!(matches!(solve_diffusive(&p, &q), Err(Error::UnsupportedKernel(_))));
        let p = spec(1.0, crate::kernel::mollify_delay(1.0, 0.5, 0.1).unwrap(), 0.05);
        assert!(matches!(solve_diffusive(&p, &q), Err(Error::UnsupportedKernel(_))));
    }
}
