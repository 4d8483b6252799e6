//! Problem fixtures shared by the benchmarks.

use std::f64::consts::PI;

use memodiff_core::{assemble, build_mesh, CoefficientField, Forcing, History, MeasureKernel, ProblemSpec};

/// Unit interval, unit coefficients, eigenmode start, eigenmode forcing.
pub fn problem(n_elements: usize, kernel: MeasureKernel, horizon: f64, dt: f64) -> ProblemSpec {
    let mesh = build_mesh(1.0, n_elements).expect("mesh");
    let one = CoefficientField::constant(1.0);
    let fem = assemble(&mesh, &one, &one).expect("assembly");
    let u0 = mesh.interpolate(|x| (PI * x).sin());
    ProblemSpec {
        fem,
        kernel,
        forcing: Forcing::field(|_, x| (PI * x).sin()),
        u0,
        history: History::Constant,
        horizon,
        dt,
    }
}

pub fn fractional(tau_max: f64) -> MeasureKernel {
    MeasureKernel::fractional(0.5, tau_max).expect("kernel")
}
