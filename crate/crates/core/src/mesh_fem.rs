//! P1 finite elements on (0, L) with homogeneous Dirichlet conditions.
//!
//! All vectors live on the interior nodes `x_1, …, x_{n-1}`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{SymTridiag, TridiagFactor};

/// Uniform mesh of the interval `[0, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    length: f64,
    n_elements: usize,
    nodes: Vec<f64>,
}

impl Mesh1D {
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    /// Number of interior nodes, i.e. degrees of freedom.
    pub fn n_dofs(&self) -> usize {
        self.n_elements - 1
    }

    pub fn h(&self) -> f64 {
        self.length / self.n_elements as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn interior_nodes(&self) -> &[f64] {
        &self.nodes[1..self.n_elements]
    }

    /// Nodal interpolant of `f` on the interior nodes.
    pub fn interpolate<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.interior_nodes().iter().map(|&x| f(x)).collect()
    }
}

pub fn build_mesh(length: f64, n_elements: usize) -> Result<Mesh1D> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "domain length must be positive, got {length}"
        )));
    }
    if n_elements < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 elements, got {n_elements}"
        )));
    }
    let h = length / n_elements as f64;
    let mut nodes: Vec<f64> = (0..=n_elements).map(|i| i as f64 * h).collect();
    nodes[n_elements] = length;
    Ok(Mesh1D {
        length,
        n_elements,
        nodes,
    })
}

/// Scalar coefficient field `x ↦ a(x)` with declared bounds.
#[derive(Clone)]
pub struct CoefficientField {
    rule: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    a_min: f64,
    a_max: f64,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("a_min", &self.a_min)
            .field("a_max", &self.a_max)
            .finish()
    }
}

impl CoefficientField {
    pub fn constant(c: f64) -> Self {
        Self {
            rule: Arc::new(move |_| c),
            a_min: c,
            a_max: c,
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Arbitrary field. Values are checked against `[a_min, a_max]` at
    /// assembly time.
    pub fn from_fn<F>(rule: F, a_min: f64, a_max: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            rule: Arc::new(rule),
            a_min,
            a_max,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.rule)(x)
    }

    pub fn a_min(&self) -> f64 {
        self.a_min
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    /// Same field multiplied by `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let rule = Arc::clone(&self.rule);
        Self {
            rule: Arc::new(move |x| c * rule(x)),
            a_min: c * self.a_min,
            a_max: c * self.a_max,
        }
    }
}

/// Matrices of the P1 discretization on interior nodes.
#[derive(Debug, Clone)]
pub struct FemMatrices {
    mesh: Mesh1D,
    /// Mass matrix.
    pub m: SymTridiag,
    /// Stiffness matrix of a₀.
    pub k0: SymTridiag,
    /// Stiffness matrix of a₁.
    pub k1: SymTridiag,
    /// Unit-coefficient stiffness, the V inner product.
    pub s: SymTridiag,
    s_factor: TridiagFactor,
    // range of element-midpoint coefficient values, used to bracket the pencils
    a0_range: (f64, f64),
    a1_range: (f64, f64),
}

fn stiffness(mesh: &Mesh1D, values: &[f64]) -> SymTridiag {
    let n = mesh.n_dofs();
    let h = mesh.h();
    // element e joins nodes e and e+1; interior dof i is node i+1
    let diag = (0..n).map(|i| (values[i] + values[i + 1]) / h).collect();
    let off = (0..n.saturating_sub(1)).map(|i| -values[i + 1] / h).collect();
    SymTridiag::new(diag, off).expect("consistent stiffness dimensions")
}

fn sample_midpoints(mesh: &Mesh1D, a: &CoefficientField) -> Result<Vec<f64>> {
    let h = mesh.h();
    let tol = 1e-12 * a.a_max.abs().max(1.0);
    (0..mesh.n_elements)
        .map(|e| {
            let x = (e as f64 + 0.5) * h;
            let v = a.eval(x);
            if !v.is_finite() || v < a.a_min - tol || v > a.a_max + tol {
                Err(Error::CoefficientOutOfBounds {
                    x,
                    value: v,
                    a_min: a.a_min,
                    a_max: a.a_max,
                })
            } else {
                Ok(v)
            }
        })
        .collect()
}

fn range(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

pub fn assemble(mesh: &Mesh1D, a0: &CoefficientField, a1: &CoefficientField) -> Result<FemMatrices> {
    if !(a0.a_min > 0.0) {
        return Err(Error::CoercivityViolation { a_min: a0.a_min });
    }
    if !(a1.a_min >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "a1 lower bound must be nonnegative, got {}",
            a1.a_min
        )));
    }
    let v0 = sample_midpoints(mesh, a0)?;
    let v1 = sample_midpoints(mesh, a1)?;
    let n = mesh.n_dofs();
    let h = mesh.h();
    let m = SymTridiag::new(vec![4.0 * h / 6.0; n], vec![h / 6.0; n - 1])?;
    let s = stiffness(mesh, &vec![1.0; mesh.n_elements]);
    let k0 = stiffness(mesh, &v0);
    let k1 = stiffness(mesh, &v1);
    let s_factor = s.factor()?;
    Ok(FemMatrices {
        mesh: mesh.clone(),
        m,
        k0,
        k1,
        s,
        s_factor,
        a0_range: range(&v0),
        a1_range: range(&v1),
    })
}

impl FemMatrices {
    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_dofs()
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_dofs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_dofs(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// `S⁻¹ g`, the Riesz representative in the V inner product.
    pub fn riesz(&self, g: &[f64]) -> Vec<f64> {
        self.s_factor.solve(g)
    }

    /// Same assembly with a different a₁ matrix; a₀, M and S are shared.
    pub fn with_k1(&self, k1: SymTridiag, a1_range: (f64, f64)) -> FemMatrices {
        FemMatrices {
            k1,
            a1_range,
            ..self.clone()
        }
    }

    /// Copy with a₁ scaled by `c ≥ 0`.
    pub fn scale_k1(&self, c: f64) -> FemMatrices {
        let k1 = SymTridiag::zeros(self.n_dofs()).add_scaled(c, &self.k1);
        self.with_k1(k1, (c * self.a1_range.0, c * self.a1_range.1))
    }
}

pub fn norm_h(v: &[f64], fem: &FemMatrices) -> Result<f64> {
    fem.check_dim(v)?;
    Ok(fem.m.quad_form(v).max(0.0).sqrt())
}

pub fn seminorm_v(v: &[f64], fem: &FemMatrices) -> Result<f64> {
    fem.check_dim(v)?;
    Ok(fem.s.quad_form(v).max(0.0).sqrt())
}

pub fn dual_norm(g: &[f64], fem: &FemMatrices) -> Result<f64> {
    fem.check_dim(g)?;
    let y = fem.riesz(g);
    Ok(crate::linalg::dot(g, &y).max(0.0).sqrt())
}

/// Generalized-eigenvalue form constants of the discrete forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormConstants {
    /// Coercivity constant of a₀ relative to |·|_V.
    pub alpha0: f64,
    /// Continuity constant of a₀.
    pub lambda0: f64,
    /// Smallest Rayleigh quotient of a₁.
    pub alpha1: f64,
    /// Continuity constant of a₁.
    pub lambda1: f64,
}

fn pencil_extremes(k: &SymTridiag, s: &SymTridiag, range: (f64, f64)) -> (f64, f64) {
    let n = k.dim();
    // Rayleigh quotients of Σ a_e K_e against Σ K_e lie in [min a_e, max a_e]
    let pad = |x: f64| 1e-12 * x.abs() + 1e-300;
    let lo0 = range.0 - pad(range.0);
    let hi0 = range.1 + pad(range.1);
    if range.1 == 0.0 {
        return (0.0, 0.0);
    }
    let (min_lo, _) = k.pencil_eigen_bracket(s, 0, lo0, hi0);
    let (_, max_hi) = k.pencil_eigen_bracket(s, n - 1, lo0, hi0);
    (min_lo, max_hi)
}

/// α₀, Λ₀, Λ₁ from the pencils (K0, S) and (K1, S), by Sturm bisection.
/// The returned values are the conservative ends of the final brackets.
pub fn form_constants(fem: &FemMatrices) -> FormConstants {
    let (alpha0, lambda0) = pencil_extremes(&fem.k0, &fem.s, fem.a0_range);
    let (alpha1, lambda1) = pencil_extremes(&fem.k1, &fem.s, fem.a1_range);
    FormConstants {
        alpha0,
        lambda0,
        alpha1,
        lambda1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(n: usize) -> FemMatrices {
        let mesh = build_mesh(1.0, n).unwrap();
        assemble(&mesh, &CoefficientField::constant(1.0), &CoefficientField::zero()).unwrap()
    }

    #[test]
    fn mesh_nodes() {
        assert_eq!(build_mesh(1.0, 4).unwrap().nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(build_mesh(2.0, 2).unwrap().nodes(), &[0.0, 1.0, 2.0]);
        assert!(matches!(build_mesh(1.0, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_mesh(0.0, 4), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_mesh(-1.0, 4), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn stencils_on_quarter_mesh() {
        let fem = unit(4);
        for &d in fem.k0.diag() {
            assert!((d - 8.0).abs() < 1e-14);
        }
        for &o in fem.k0.off() {
            assert!((o + 4.0).abs() < 1e-14);
        }
        for &d in fem.m.diag() {
            assert!((d - 1.0 / 6.0).abs() < 1e-15);
        }
        for &o in fem.m.off() {
            assert!((o - 1.0 / 24.0).abs() < 1e-15);
        }
        assert!(fem.k1.is_zero());
    }

    #[test]
    fn coercivity_is_required() {
        let mesh = build_mesh(1.0, 4).unwrap();
        let r = assemble(&mesh, &CoefficientField::constant(0.0), &CoefficientField::zero());
        assert!(matches!(r, Err(Error::CoercivityViolation { .. })));
    }

    #[test]
    fn out_of_bounds_field_rejected() {
        let mesh = build_mesh(1.0, 4).unwrap();
        let bad = CoefficientField::from_fn(|x| 1.0 + x, 1.0, 1.5);
        let r = assemble(&mesh, &bad, &CoefficientField::zero());
        assert!(matches!(r, Err(Error::CoefficientOutOfBounds { .. })));
    }

    #[test]
    fn norms_of_zero_and_dimension_errors() {
        let fem = unit(8);
        let z = vec![0.0; 7];
        assert_eq!(norm_h(&z, &fem).unwrap(), 0.0);
        assert_eq!(seminorm_v(&z, &fem).unwrap(), 0.0);
        assert_eq!(dual_norm(&z, &fem).unwrap(), 0.0);
        assert!(matches!(
            norm_h(&[1.0; 3], &fem),
            Err(Error::DimensionMismatch { expected: 7, found: 3 })
        ));
        assert!(seminorm_v(&[1.0; 3], &fem).is_err());
        assert!(dual_norm(&[1.0; 3], &fem).is_err());
    }

    #[test]
    fn sine_norms_converge_at_second_order() {
        let pi = std::f64::consts::PI;
        let mut prev: Option<(f64, f64)> = None;
        for n in [16usize, 32, 64, 128] {
            let fem = unit(n);
            let v = fem.mesh().interpolate(|x| (pi * x).sin());
            let eh = (norm_h(&v, &fem).unwrap() - 0.5f64.sqrt()).abs();
            let ev = (seminorm_v(&v, &fem).unwrap() - pi / 2f64.sqrt()).abs();
            if let Some((ph, pv)) = prev {
                assert!((ph / eh).log2() > 1.9, "H rate {}", (ph / eh).log2());
                assert!((pv / ev).log2() > 1.9, "V rate {}", (pv / ev).log2());
            }
            prev = Some((eh, ev));
        }
        let (eh, ev) = prev.unwrap();
        assert!(eh < 1e-4 && ev < 1e-3);
    }

    #[test]
    fn form_constants_of_constant_fields() {
        let fem = unit(16);
        let c = form_constants(&fem);
        assert!((c.alpha0 - 1.0).abs() < 1e-11 && (c.lambda0 - 1.0).abs() < 1e-11);
        assert_eq!(c.lambda1, 0.0);
        let mesh = build_mesh(1.0, 16).unwrap();
        let fem =
            assemble(&mesh, &CoefficientField::constant(3.5), &CoefficientField::zero()).unwrap();
        let c = form_constants(&fem);
        assert!((c.alpha0 - 3.5).abs() < 1e-10 && (c.lambda0 - 3.5).abs() < 1e-10);
        assert!(c.alpha0 <= 3.5 && c.lambda0 >= 3.5);
    }

    #[test]
    fn form_constants_of_linear_field() {
        let mesh = build_mesh(1.0, 32).unwrap();
        let a1 = CoefficientField::from_fn(|x| 1.0 + x, 1.0, 2.0);
        let fem = assemble(&mesh, &CoefficientField::constant(1.0), &a1).unwrap();
        let c = form_constants(&fem);
        assert!(1.0 <= c.alpha1 && c.alpha1 <= c.lambda1 && c.lambda1 <= 2.0);
        assert!(c.lambda1 - c.alpha1 > 0.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn poincare_coercivity_and_riesz(v in prop::collection::vec(-10.0f64..10.0, 15),
                                         w in prop::collection::vec(-10.0f64..10.0, 15)) {
            let mesh = build_mesh(2.0, 16).unwrap();
            let a0 = CoefficientField::from_fn(|x| 1.0 + 0.5 * (3.0 * x).sin(), 0.5, 1.5);
            let fem = assemble(&mesh, &a0, &CoefficientField::constant(0.7)).unwrap();
            let c = form_constants(&fem);
            let nh = norm_h(&v, &fem).unwrap();
            let nv = seminorm_v(&v, &fem).unwrap();
            prop_assert!(nh <= 2.0 / std::f64::consts::PI * nv * (1.0 + 1e-12) + 1e-300);
            prop_assert!(fem.k0.quad_form(&v) >= c.alpha0 * nv * nv * (1.0 - 1e-12) - 1e-12);
            prop_assert!(fem.k0.quad_form(&v) <= c.lambda0 * nv * nv * (1.0 + 1e-12) + 1e-12);
            let sv = fem.s.mul(&v);
            let dn = dual_norm(&sv, &fem).unwrap();
            prop_assert!((dn - nv).abs() <= 1e-12 * nv.max(1e-300) + 1e-13);
            let pairing = crate::linalg::dot(&w, &v).abs();
            prop_assert!(pairing <= dual_norm(&w, &fem).unwrap() * nv * (1.0 + 1e-12) + 1e-12);
            let scaled: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
            prop_assert!((norm_h(&scaled, &fem).unwrap() - 2.0 * nh).abs() <= 1e-12 * nh.max(1.0));
            prop_assert!((fem.m.bilinear(&v, &w) - fem.m.bilinear(&w, &v)).abs() < 1e-12);
        }
    }
}
