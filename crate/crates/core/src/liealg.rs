//! Lie algebras given by structure constants, semidirect products `g ⋉ V`
//! with a user-supplied representation, and the SO(3)/SE(3) group layer
//! used for reconstruction.
//!
//! Conventions: `hat(v) w = v × w`; duals are identified with primals through
//! the coordinate dot product. With these, on `so(3) ⋉ R³`:
//! `ad*_Ω Π = Π × Ω`, `v ⋄ a = v × a` and `ξ a = ξ × a`.

use thiserror::Error;

use crate::linalg::{Matrix, Vector};
use crate::scalar::Real;

/// Coordinates of an element of a Lie algebra.
pub type AlgebraVector<T> = Vector<T>;
/// Coordinates of an element of the dual, in the dual basis.
pub type DualVector<T> = Vector<T>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LieError {
    #[error("structure constants have length {found}, expected {expected}")]
    BadStructureConstants { expected: usize, found: usize },
    #[error("bracket is not antisymmetric (residual {0:e})")]
    NotAntisymmetric(f64),
    #[error("Jacobi identity fails (residual {0:e})")]
    JacobiViolated(f64),
    #[error("representation has {found} generators, expected {expected}")]
    RepresentationArity { expected: usize, found: usize },
    #[error("representation matrices must be {0}×{0}")]
    RepresentationShape(usize),
    #[error("representation is not a Lie algebra homomorphism (residual {0:e})")]
    NotHomomorphism(f64),
}

const STRUCTURE_TOL: f64 = 1e-10;

/// `a × b` for 3-vectors.
pub fn cross<T: Real>(a: &Vector<T>, b: &Vector<T>) -> Vector<T> {
    debug_assert!(a.len() == 3 && b.len() == 3);
    Vector::new(vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])
}

/// Skew matrix with `hat(v) w = v × w`.
pub fn hat<T: Real>(v: &Vector<T>) -> Matrix<T> {
    assert_eq!(v.len(), 3, "hat expects a 3-vector");
    let z = T::zero();
    Matrix::new(3, 3, vec![z, -v[2], v[1], v[2], z, -v[0], -v[1], v[0], z]).expect("3x3")
}

/// Inverse of [`hat`] on skew matrices.
pub fn vee<T: Real>(m: &Matrix<T>) -> Vector<T> {
    Vector::new(vec![m[(2, 1)], m[(0, 2)], m[(1, 0)]])
}

/// Finite-dimensional Lie algebra in a fixed basis `e_0 … e_{n-1}`, with
/// `[e_i, e_j] = Σ_k C^k_ij e_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebra<T> {
    dim: usize,
    // c[(k * dim + i) * dim + j] = C^k_ij
    c: Vec<T>,
}

impl<T: Real> LieAlgebra<T> {
    /// Validates antisymmetry and the Jacobi identity on basis triples.
    pub fn from_structure_constants(dim: usize, c: Vec<T>) -> Result<Self, LieError> {
        if c.len() != dim * dim * dim {
            return Err(LieError::BadStructureConstants { expected: dim * dim * dim, found: c.len() });
        }
        let alg = Self { dim, c };
        let anti = alg.antisymmetry_residual();
        if anti > T::lit(STRUCTURE_TOL) {
            return Err(LieError::NotAntisymmetric(anti.to_f64_lossy()));
        }
        let jac = alg.jacobi_residual();
        if jac > T::lit(STRUCTURE_TOL) {
            return Err(LieError::JacobiViolated(jac.to_f64_lossy()));
        }
        Ok(alg)
    }

    /// `so(3)` with `[e_i, e_j] = ε_ijk e_k`.
    pub fn so3() -> Self {
        let mut c = vec![T::zero(); 27];
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            c[(k * 3 + i) * 3 + j] = T::one();
            c[(k * 3 + j) * 3 + i] = -T::one();
        }
        Self { dim: 3, c }
    }

    /// Abelian algebra `R^n`.
    pub fn abelian(n: usize) -> Self {
        Self { dim: n, c: vec![T::zero(); n * n * n] }
    }

    /// `se(3) = so(3) ⋉ R³`, coordinates `(Ω, X)`.
    pub fn se3() -> Self {
        SemidirectAlgebra::so3_r3().to_lie_algebra()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn sc(&self, k: usize, i: usize, j: usize) -> T {
        self.c[(k * self.dim + i) * self.dim + j]
    }

    pub fn bracket(&self, x: &AlgebraVector<T>, y: &AlgebraVector<T>) -> AlgebraVector<T> {
        let n = self.dim;
        assert!(x.len() == n && y.len() == n, "bracket dimension mismatch");
        let mut out = Vector::zeros(n);
        for i in 0..n {
            if x[i] == T::zero() {
                continue;
            }
            for j in 0..n {
                let xy = x[i] * y[j];
                if xy == T::zero() {
                    continue;
                }
                for k in 0..n {
                    out[k] += self.sc(k, i, j) * xy;
                }
            }
        }
        out
    }

    /// Matrix of `ad_ξ = [ξ, ·]`.
    pub fn ad_matrix(&self, xi: &AlgebraVector<T>) -> Matrix<T> {
        let n = self.dim;
        Matrix::from_fn(n, n, |k, j| (0..n).map(|i| self.sc(k, i, j) * xi[i]).sum())
    }

    /// `ad*_ξ μ`, defined by `⟨ad*_ξ μ, ζ⟩ = ⟨μ, [ξ, ζ]⟩`.
    pub fn ad_star(&self, xi: &AlgebraVector<T>, mu: &DualVector<T>) -> DualVector<T> {
        assert!(xi.len() == self.dim && mu.len() == self.dim, "ad* dimension mismatch");
        self.ad_matrix(xi).tr_mul_vec(mu)
    }

    fn antisymmetry_residual(&self) -> T {
        let n = self.dim;
        let mut r = T::zero();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    r = r.max((self.sc(k, i, j) + self.sc(k, j, i)).abs());
                }
            }
        }
        r
    }

    /// Largest Jacobi-identity defect over basis triples.
    pub fn jacobi_residual(&self) -> T {
        let n = self.dim;
        let e = |i| Vector::unit(n, i);
        let mut r = T::zero();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (a, b, c) = (e(i), e(j), e(k));
                    let s = &(&self.bracket(&a, &self.bracket(&b, &c)) + &self.bracket(&b, &self.bracket(&c, &a)))
                        + &self.bracket(&c, &self.bracket(&a, &b));
                    r = r.max(s.norm_inf());
                }
            }
        }
        r
    }
}

/// Semidirect product `g ⋉ V` determined by a representation
/// `ρ′ : g → gl(V)`, stored as the images `ρ′(e_i)` of the basis.
///
/// Bracket: `[(ξ1,v1),(ξ2,v2)] = ([ξ1,ξ2], ρ′(ξ1)v2 − ρ′(ξ2)v1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemidirectAlgebra<T> {
    base: LieAlgebra<T>,
    fiber_dim: usize,
    rep: Vec<Matrix<T>>,
}

impl<T: Real> SemidirectAlgebra<T> {
    /// Validates shapes and `ρ′([e_i,e_j]) = [ρ′(e_i), ρ′(e_j)]`.
    pub fn new(base: LieAlgebra<T>, fiber_dim: usize, rep: Vec<Matrix<T>>) -> Result<Self, LieError> {
        if rep.len() != base.dim() {
            return Err(LieError::RepresentationArity { expected: base.dim(), found: rep.len() });
        }
        if rep.iter().any(|m| m.rows() != fiber_dim || m.cols() != fiber_dim) {
            return Err(LieError::RepresentationShape(fiber_dim));
        }
        let alg = Self { base, fiber_dim, rep };
        let h = alg.homomorphism_residual();
        if h > T::lit(STRUCTURE_TOL) {
            return Err(LieError::NotHomomorphism(h.to_f64_lossy()));
        }
        Ok(alg)
    }

    /// A Lie algebra with no advected fiber (`V = 0`).
    pub fn trivial(base: LieAlgebra<T>) -> Self {
        let n = base.dim();
        Self { base, fiber_dim: 0, rep: vec![Matrix::zeros(0, 0); n] }
    }

    /// `so(3) ⋉ R³` with the defining representation `ρ′(ξ) = hat(ξ)`.
    pub fn so3_r3() -> Self {
        let rep = (0..3).map(|i| hat(&Vector::unit(3, i))).collect();
        Self { base: LieAlgebra::so3(), fiber_dim: 3, rep }
    }

    /// `se(3) ⋉ R³` where only the rotational part of `se(3)` acts on the
    /// fiber; the algebra of a rolling rigid body with advected vertical.
    pub fn se3_r3() -> Self {
        let rep = (0..6)
            .map(|i| if i < 3 { hat(&Vector::unit(3, i)) } else { Matrix::zeros(3, 3) })
            .collect();
        Self { base: LieAlgebra::se3(), fiber_dim: 3, rep }
    }

    pub fn base(&self) -> &LieAlgebra<T> {
        &self.base
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn dim(&self) -> usize {
        self.base.dim() + self.fiber_dim
    }

    /// `ρ′(ξ) = Σ ξ_i ρ′(e_i)`.
    pub fn rep_of(&self, xi: &AlgebraVector<T>) -> Matrix<T> {
        let m = self.fiber_dim;
        let mut out = Matrix::zeros(m, m);
        for (i, r) in self.rep.iter().enumerate() {
            if xi[i] != T::zero() {
                out = out.add(&r.scale(xi[i]));
            }
        }
        out
    }

    /// `ξ v := ρ′(ξ) v`.
    pub fn act(&self, xi: &AlgebraVector<T>, v: &Vector<T>) -> Vector<T> {
        self.rep_of(xi).mul_vec(v)
    }

    pub fn bracket(
        &self,
        (xi1, v1): (&AlgebraVector<T>, &Vector<T>),
        (xi2, v2): (&AlgebraVector<T>, &Vector<T>),
    ) -> (AlgebraVector<T>, Vector<T>) {
        (self.base.bracket(xi1, xi2), &self.act(xi1, v2) - &self.act(xi2, v1))
    }

    /// `v ⋄ a ∈ g*`, defined by `⟨v ⋄ a, ξ⟩ = ⟨a, ξ v⟩`.
    pub fn diamond(&self, v: &Vector<T>, a: &DualVector<T>) -> DualVector<T> {
        assert!(v.len() == self.fiber_dim && a.len() == self.fiber_dim, "diamond dimension mismatch");
        Vector::from_fn(self.base.dim(), |i| a.dot(&self.rep[i].mul_vec(v)))
    }

    /// Infinitesimal dual action `ξ a = −ρ′(ξ)ᵀ a`; advection reads `ȧ + ξ a = 0`.
    pub fn dual_action(&self, xi: &AlgebraVector<T>, a: &DualVector<T>) -> DualVector<T> {
        -self.rep_of(xi).tr_mul_vec(a)
    }

    /// `ad*_{(ξ,v)}(μ,a) = (ad*_ξ μ − v ⋄ a, −ξ a)`.
    pub fn sdp_ad_star(
        &self,
        (xi, v): (&AlgebraVector<T>, &Vector<T>),
        (mu, a): (&DualVector<T>, &DualVector<T>),
    ) -> (DualVector<T>, DualVector<T>) {
        (&self.base.ad_star(xi, mu) - &self.diamond(v, a), -self.dual_action(xi, a))
    }

    /// True when every `ρ′(e_i)` is skew, so the dual action preserves `|a|`.
    pub fn is_orthogonal(&self) -> bool {
        self.rep.iter().all(|r| r.add(&r.transpose()).norm_max() <= T::lit(STRUCTURE_TOL))
    }

    /// Flattens `g ⋉ V` into structure constants on `g × V`.
    pub fn to_lie_algebra(&self) -> LieAlgebra<T> {
        let n = self.base.dim();
        let m = self.fiber_dim;
        let d = n + m;
        let mut c = vec![T::zero(); d * d * d];
        let idx = |k: usize, i: usize, j: usize| (k * d + i) * d + j;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    c[idx(k, i, j)] = self.base.sc(k, i, j);
                }
            }
            for a in 0..m {
                for b in 0..m {
                    let r = self.rep[i][(b, a)];
                    c[idx(n + b, i, n + a)] = r;
                    c[idx(n + b, n + a, i)] = -r;
                }
            }
        }
        LieAlgebra { dim: d, c }
    }

    fn homomorphism_residual(&self) -> T {
        let n = self.base.dim();
        let mut r = T::zero();
        for i in 0..n {
            for j in 0..n {
                let lhs = self.rep_of(&self.base.bracket(&Vector::unit(n, i), &Vector::unit(n, j)));
                let rhs = self.rep[i].matmul(&self.rep[j]).sub(&self.rep[j].matmul(&self.rep[i]));
                r = r.max(lhs.sub(&rhs).norm_max());
            }
        }
        r
    }
}

/// Rodrigues formula for `exp(hat(ω))`.
pub fn exp_so3<T: Real>(omega: &Vector<T>) -> Matrix<T> {
    let theta2 = omega.dot(omega);
    let theta = theta2.sqrt();
    let k = hat(omega);
    let k2 = k.matmul(&k);
    let (a, b) = if theta < T::lit(1e-4) {
        // Taylor coefficients of sinθ/θ and (1−cosθ)/θ²
        (
            T::one() - theta2 / T::lit(6.0) + theta2 * theta2 / T::lit(120.0),
            T::lit(0.5) - theta2 / T::lit(24.0) + theta2 * theta2 / T::lit(720.0),
        )
    } else {
        (theta.sin() / theta, (T::one() - theta.cos()) / theta2)
    };
    Matrix::identity(3).add(&k.scale(a)).add(&k2.scale(b))
}

/// Left Jacobian of SO(3); maps translational velocity into `exp` of `se(3)`.
fn so3_left_jacobian<T: Real>(omega: &Vector<T>) -> Matrix<T> {
    let theta2 = omega.dot(omega);
    let theta = theta2.sqrt();
    let k = hat(omega);
    let k2 = k.matmul(&k);
    let (b, c) = if theta < T::lit(1e-4) {
        (
            T::lit(0.5) - theta2 / T::lit(24.0) + theta2 * theta2 / T::lit(720.0),
            T::one() / T::lit(6.0) - theta2 / T::lit(120.0) + theta2 * theta2 / T::lit(5040.0),
        )
    } else {
        ((T::one() - theta.cos()) / theta2, (theta - theta.sin()) / (theta2 * theta))
    };
    Matrix::identity(3).add(&k.scale(b)).add(&k2.scale(c))
}

/// Group element for reconstruction: a rotation, or a rigid motion `(Λ, x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupState<T> {
    So3(Matrix<T>),
    Se3 { rotation: Matrix<T>, translation: Vector<T> },
}

impl<T: Real> GroupState<T> {
    pub fn identity_so3() -> Self {
        GroupState::So3(Matrix::identity(3))
    }

    pub fn identity_se3() -> Self {
        GroupState::Se3 { rotation: Matrix::identity(3), translation: Vector::zeros(3) }
    }

    /// Dimension of the Lie algebra this element belongs to.
    pub fn algebra_dim(&self) -> usize {
        match self {
            GroupState::So3(_) => 3,
            GroupState::Se3 { .. } => 6,
        }
    }

    pub fn rotation(&self) -> &Matrix<T> {
        match self {
            GroupState::So3(r) => r,
            GroupState::Se3 { rotation, .. } => rotation,
        }
    }

    /// Group exponential of an algebra element of the matching kind.
    pub fn exp_like(&self, xi: &AlgebraVector<T>) -> Self {
        match self {
            GroupState::So3(_) => GroupState::So3(exp_so3(xi)),
            GroupState::Se3 { .. } => {
                let (w, x) = xi.split(3);
                GroupState::Se3 { rotation: exp_so3(&w), translation: so3_left_jacobian(&w).mul_vec(&x) }
            }
        }
    }

    /// Group product `self · other`.
    pub fn compose(&self, other: &Self) -> Self {
        match (self, other) {
            (GroupState::So3(a), GroupState::So3(b)) => GroupState::So3(a.matmul(b)),
            (
                GroupState::Se3 { rotation: ra, translation: xa },
                GroupState::Se3 { rotation: rb, translation: xb },
            ) => GroupState::Se3 { rotation: ra.matmul(rb), translation: xa + &ra.mul_vec(xb) },
            _ => panic!("cannot compose SO(3) with SE(3) elements"),
        }
    }

    /// Left action on `R³ ≅ (R³)*`: `a ↦ Λ a`.
    pub fn group_dual_action(&self, a: &Vector<T>) -> Vector<T> {
        self.rotation().mul_vec(a)
    }

    /// `g⁻¹ a = Λᵀ a`; the advected parameter `a(t) = g(t)⁻¹ a₀`.
    pub fn inverse_dual_action(&self, a: &Vector<T>) -> Vector<T> {
        self.rotation().tr_mul_vec(a)
    }

    /// Projects the rotation back onto SO(3) by Gram–Schmidt on its columns.
    pub fn reorthonormalize(&mut self) {
        let r = match self {
            GroupState::So3(r) => r,
            GroupState::Se3 { rotation, .. } => rotation,
        };
        let c0 = r.column(0);
        let c0 = c0.scale(T::one() / c0.norm());
        let c1 = r.column(1);
        let c1 = &c1 - &c0.scale(c0.dot(&c1));
        let c1 = c1.scale(T::one() / c1.norm());
        let c2 = cross(&c0, &c1);
        *r = Matrix::from_columns(3, &[c0, c1, c2]);
    }

    /// `max(|ΛᵀΛ − I|, |det Λ − 1|)`.
    pub fn orthogonality_defect(&self) -> T {
        let r = self.rotation();
        let d = r.transpose().matmul(r).sub(&Matrix::identity(3)).norm_max();
        d.max((r.determinant() - T::one()).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector<f64> {
        Vector::from_f64(xs)
    }

    fn e(i: usize) -> Vector<f64> {
        Vector::unit(3, i)
    }

    #[test]
    fn hat_examples() {
        assert_eq!(hat(&e(0)), Matrix::from_rows_f64(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, -1.0], &[0.0, 1.0, 0.0]]));
        assert_eq!(hat(&v(&[0.0, 0.0, 0.0])), Matrix::zeros(3, 3));
        assert_eq!(
            hat(&v(&[1.0, 2.0, 3.0])),
            Matrix::from_rows_f64(&[&[0.0, -3.0, 2.0], &[3.0, 0.0, -1.0], &[-2.0, 1.0, 0.0]])
        );
        let w = v(&[0.3, -1.1, 2.0]);
        let x = v(&[1.0, 2.0, 3.0]);
        assert_eq!(hat(&x).mul_vec(&w), cross(&x, &w));
        assert_eq!(vee(&hat(&x)), x);
    }

    #[test]
    fn semidirect_bracket_examples() {
        let s = SemidirectAlgebra::<f64>::so3_r3();
        let z = Vector::zeros(3);
        assert_eq!(s.bracket((&e(0), &z), (&e(1), &z)), (e(2), z.clone()));
        assert_eq!(s.bracket((&e(0), &z), (&z, &e(1))), (z.clone(), e(2)));
        let (xi, w) = (v(&[0.2, -1.0, 3.0]), v(&[1.0, 0.5, -0.7]));
        let (b0, b1) = s.bracket((&xi, &w), (&xi, &w));
        assert_eq!(b0.norm_inf() + b1.norm_inf(), 0.0);
    }

    #[test]
    fn ad_star_examples() {
        let g = LieAlgebra::<f64>::so3();
        assert_eq!(g.ad_star(&e(2), &e(2)).norm_inf(), 0.0);
        // Pairing oracle: ⟨ad*_{e1} e2, e_j⟩ = ⟨e2, e1 × e_j⟩ gives (0, 0, -1).
        let oracle = Vector::from_fn(3, |j| e(1).dot(&cross(&e(0), &e(j))));
        assert_eq!(oracle, v(&[0.0, 0.0, -1.0]));
        assert_eq!(g.ad_star(&e(0), &e(1)), oracle);
        assert_eq!(g.ad_star(&Vector::zeros(3), &v(&[1.0, 2.0, 3.0])).norm_inf(), 0.0);
    }

    #[test]
    fn diamond_and_dual_action_examples() {
        let s = SemidirectAlgebra::<f64>::so3_r3();
        assert_eq!(s.diamond(&e(0), &e(1)), e(2));
        assert_eq!(s.diamond(&v(&[1.0, 2.0, 3.0]), &Vector::zeros(3)).norm_inf(), 0.0);
        assert_eq!(s.diamond(&e(0), &e(0)).norm_inf(), 0.0);
        assert_eq!(s.dual_action(&e(0), &e(1)), e(2));
        assert_eq!(s.dual_action(&Vector::zeros(3), &e(1)).norm_inf(), 0.0);
        assert_eq!(s.dual_action(&e(2), &e(2)).norm_inf(), 0.0);
    }

    #[test]
    fn sdp_ad_star_examples() {
        let s = SemidirectAlgebra::<f64>::so3_r3();
        let z = Vector::zeros(3);
        let (m, a) = s.sdp_ad_star((&z, &e(0)), (&z, &e(1)));
        assert_eq!((m, a), (v(&[0.0, 0.0, -1.0]), z.clone()));
        let xi = v(&[0.4, -0.2, 1.3]);
        let mu = v(&[1.0, 2.0, -0.5]);
        let (m, a) = s.sdp_ad_star((&xi, &z), (&mu, &z));
        assert_eq!((m, a), (s.base().ad_star(&xi, &mu), z.clone()));
    }

    #[test]
    fn structure_constants_validate() {
        assert!(LieAlgebra::<f64>::so3().jacobi_residual() < 1e-15);
        assert!(LieAlgebra::<f64>::se3().jacobi_residual() < 1e-15);
        assert!(SemidirectAlgebra::<f64>::se3_r3().to_lie_algebra().jacobi_residual() < 1e-15);
        let mut c = vec![0.0f64; 8];
        c[1] = 1.0; // [e0, e1] = e0 without the antisymmetric partner
        assert!(matches!(LieAlgebra::from_structure_constants(2, c), Err(LieError::NotAntisymmetric(_))));
        // rep that is not a homomorphism: constant nonzero images for so(3)
        let bad = vec![Matrix::<f64>::identity(2); 3];
        assert!(matches!(SemidirectAlgebra::new(LieAlgebra::so3(), 2, bad), Err(LieError::NotHomomorphism(_))));
    }

    #[test]
    fn so3_r3_flattening_is_se3() {
        let se3 = LieAlgebra::<f64>::se3();
        let x = v(&[0.1, 0.2, 0.3, 1.0, -1.0, 0.5]);
        let y = v(&[-0.3, 0.7, 0.2, 0.0, 2.0, 1.0]);
        let s = SemidirectAlgebra::so3_r3();
        let (xa, xv) = x.split(3);
        let (ya, yv) = y.split(3);
        let (ba, bv) = s.bracket((&xa, &xv), (&ya, &yv));
        assert!((&se3.bracket(&x, &y) - &ba.concat(&bv)).norm() < 1e-15);
    }

    #[test]
    fn exp_so3_examples() {
        let r = exp_so3(&v(&[0.0, 0.0, std::f64::consts::PI]));
        assert!(r.sub(&Matrix::from_diagonal(&[-1.0, -1.0, 1.0])).norm_max() < 1e-15);
        assert_eq!(exp_so3(&Vector::<f64>::zeros(3)), Matrix::identity(3));
        let w = v(&[1e-3, -2e-3, 5e-4]);
        let approx = Matrix::identity(3).add(&hat(&w));
        assert!(exp_so3(&w).sub(&approx).norm_max() < 10.0 * w.dot(&w));
        let g = GroupState::So3(exp_so3(&v(&[0.3, 1.2, -2.0])));
        assert!(g.orthogonality_defect() < 1e-14);
        assert_eq!(g.group_dual_action(&e(2)), g.rotation().column(2));
    }

    #[test]
    fn se3_exp_matches_matrix_exponential() {
        let xi = v(&[0.3, -0.4, 0.9, 1.0, 2.0, -0.5]);
        let g = GroupState::identity_se3().exp_like(&xi);
        let (w, x) = xi.split(3);
        let mut m = Matrix::zeros(4, 4);
        let h = hat(&w);
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = h[(i, j)];
            }
            m[(i, 3)] = x[i];
        }
        let big = crate::linalg::expm(&m);
        if let GroupState::Se3 { rotation, translation } = g {
            for i in 0..3 {
                assert!((big[(i, 3)] - translation[i]).abs() < 1e-13);
                for j in 0..3 {
                    assert!((big[(i, j)] - rotation[(i, j)]).abs() < 1e-13);
                }
            }
        } else {
            unreachable!()
        }
    }

    #[test]
    fn reconstruction_agrees_with_advection() {
        // Λ̇ = Λ hat(Ω) with a = Λᵀ a₀, against ȧ = −ξa integrated by RK4.
        let s = SemidirectAlgebra::<f64>::so3_r3();
        let omega = |t: f64| v(&[t.sin(), (2.0 * t).cos(), 0.5]);
        let dt = 1e-3;
        let a0 = v(&[0.0, 0.6, 0.8]);
        let mut g = GroupState::identity_so3();
        let mut a = a0.clone();
        let f = |t: f64, a: &Vector<f64>| -s.dual_action(&omega(t), a);
        let mut worst: f64 = 0.0;
        for n in 0..1000 {
            let t = n as f64 * dt;
            g = g.compose(&GroupState::So3(exp_so3(&omega(t + 0.5 * dt).scale(dt))));
            if (n + 1) % 100 == 0 {
                g.reorthonormalize();
            }
            let k1 = f(t, &a);
            let k2 = f(t + 0.5 * dt, &(&a + &k1.scale(0.5 * dt)));
            let k3 = f(t + 0.5 * dt, &(&a + &k2.scale(0.5 * dt)));
            let k4 = f(t + dt, &(&a + &k3.scale(dt)));
            a = &a + &(&(&k1 + &k2.scale(2.0)) + &(&k3.scale(2.0) + &k4)).scale(dt / 6.0);
            worst = worst.max((&g.inverse_dual_action(&a0) - &a).norm());
        }
        assert!(worst <= 1e-4, "discrepancy {worst}");
    }

    fn vec3() -> impl Strategy<Value = Vector<f64>> {
        prop::array::uniform3(-2.0..2.0f64).prop_map(|a| Vector::new(a.to_vec()))
    }

    fn vec6() -> impl Strategy<Value = Vector<f64>> {
        prop::array::uniform6(-2.0..2.0f64).prop_map(|a| Vector::new(a.to_vec()))
    }

    proptest! {
        #[test]
        fn so3_ad_star_matches_pairing(xi in vec3(), mu in vec3(), zeta in vec3()) {
            let g = LieAlgebra::so3();
            let lhs = g.ad_star(&xi, &mu).dot(&zeta);
            let rhs = mu.dot(&g.bracket(&xi, &zeta));
            prop_assert!((lhs - rhs).abs() <= 1e-12);
            prop_assert!((&g.ad_star(&xi, &mu) - &cross(&mu, &xi)).norm_inf() <= 1e-15);
        }

        #[test]
        fn se3_r3_identities(xi in vec6(), mu in vec6(), zeta in vec6(), w in vec3(), a in vec3(), u in vec3()) {
            let s = SemidirectAlgebra::se3_r3();
            let g = s.base();
            prop_assert!((g.ad_star(&xi, &mu).dot(&zeta) - mu.dot(&g.bracket(&xi, &zeta))).abs() <= 1e-12);
            prop_assert!((s.diamond(&w, &a).dot(&xi) - a.dot(&s.act(&xi, &w))).abs() <= 1e-12);
            let (m1, a1) = s.sdp_ad_star((&xi, &w), (&mu, &a));
            let (b0, b1) = s.bracket((&xi, &w), (&zeta, &u));
            prop_assert!((m1.dot(&zeta) + a1.dot(&u) - (mu.dot(&b0) + a.dot(&b1))).abs() <= 1e-12);
        }
    }
}
