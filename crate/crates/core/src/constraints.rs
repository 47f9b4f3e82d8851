//! Parameter-dependent constraint subspaces `g^Δ(a) ⊂ g`.
//!
//! A family hands out a smooth spanning matrix (the *generator*) used by the
//! integrators to parametrize `ξ = G(a) c`, plus orthonormal bases of the
//! subspace and of its annihilator used for residuals.
//!
//! Rolling-type families live on `g = k ⋉ V` and are given by
//! * Type I: `X = ξ a♯` (♯ is the identity under the dot pairing),
//! * Type II: `X = ξ φ(a)` for a map `φ : V* → V`,
//! * Type III: `X = α(a) · ξ` for a linear-map valued `α`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::liealg::{cross, exp_so3, AlgebraVector, DualVector, SemidirectAlgebra};
use crate::linalg::{annihilator_basis, LinalgError, Matrix, SubspaceBasis, Vector};
use crate::scalar::Real;

/// Below this norm the Euler-disk contact direction is undefined.
pub const SINGULAR_CONTACT_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstraintError {
    #[error("contact point undefined (|E3 × (Γ × E3)| = {0:e})")]
    SingularContact(f64),
    #[error("constraint subspace lost rank: expected {expected}, found {found}")]
    RankDrop { expected: usize, found: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid constraint family: {0}")]
    Invalid(String),
}

pub type PhiFn<T> = Arc<dyn Fn(&DualVector<T>) -> Result<Vector<T>, ConstraintError> + Send + Sync>;
pub type AlphaFn<T> = Arc<dyn Fn(&DualVector<T>) -> Result<Matrix<T>, ConstraintError> + Send + Sync>;

#[derive(Clone)]
pub enum ConstraintKind<T> {
    Unconstrained,
    SuslovLinear { normals: Vec<AlgebraVector<T>> },
    TypeI,
    TypeII { phi: PhiFn<T> },
    TypeIII { alpha: AlphaFn<T> },
}

impl<T> ConstraintKind<T> {
    pub fn name(&self) -> &'static str {
        match self {
            ConstraintKind::Unconstrained => "unconstrained",
            ConstraintKind::SuslovLinear { .. } => "suslov-linear",
            ConstraintKind::TypeI => "type-I",
            ConstraintKind::TypeII { .. } => "type-II",
            ConstraintKind::TypeIII { .. } => "type-III",
        }
    }
}

impl<T> fmt::Debug for ConstraintKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Family `a ↦ g^Δ(a)` of constant dimension.
#[derive(Clone, Debug)]
pub struct ConstraintFamily<T> {
    dim: usize,
    rank: usize,
    kind: ConstraintKind<T>,
    /// `k ⋉ V` structure of `g` for rolling-type families.
    group: Option<SemidirectAlgebra<T>>,
    /// Constant spanning set for the parameter-independent kinds.
    fixed: Option<SubspaceBasis<T>>,
}

impl<T: Real> ConstraintFamily<T> {
    pub fn unconstrained(dim: usize) -> Self {
        Self {
            dim,
            rank: dim,
            kind: ConstraintKind::Unconstrained,
            group: None,
            fixed: Some(SubspaceBasis::full(dim)),
        }
    }

    /// `g^Δ = {ξ : ξ·e = 0 for every normal e}`.
    pub fn suslov(dim: usize, normals: Vec<AlgebraVector<T>>) -> Result<Self, ConstraintError> {
        if let Some(bad) = normals.iter().find(|n| n.len() != dim) {
            return Err(ConstraintError::DimensionMismatch { expected: dim, found: bad.len() });
        }
        SubspaceBasis::orthonormalize(dim, &normals, T::rank_tol())
            .map_err(|_| ConstraintError::Invalid("normals are linearly dependent".into()))?;
        let nmat = Matrix::from_columns(dim, &normals).transpose();
        let basis = crate::linalg::nullspace_basis(&nmat, T::rank_tol());
        Ok(Self {
            dim,
            rank: basis.dim(),
            kind: ConstraintKind::SuslovLinear { normals },
            group: None,
            fixed: Some(basis),
        })
    }

    /// Type I on `g = k ⋉ V`; requires `dim V* = dim V`.
    pub fn type_i(group: SemidirectAlgebra<T>) -> Self {
        Self::rolling(group, ConstraintKind::TypeI)
    }

    /// Type II on `g = k ⋉ V` with `φ : V* → V`.
    pub fn type_ii(group: SemidirectAlgebra<T>, phi: PhiFn<T>) -> Self {
        Self::rolling(group, ConstraintKind::TypeII { phi })
    }

    /// Type III on `g = k ⋉ V` with `α(a) : k → V` given as a `dim V × dim k` matrix.
    ///
    /// The equivariance `α(h a)(h ξ) = h (α(a) ξ)` is the caller's obligation;
    /// see [`ConstraintFamily::invariance_defect_so3`] for a spot check.
    pub fn type_iii(group: SemidirectAlgebra<T>, alpha: AlphaFn<T>) -> Self {
        Self::rolling(group, ConstraintKind::TypeIII { alpha })
    }

    fn rolling(group: SemidirectAlgebra<T>, kind: ConstraintKind<T>) -> Self {
        Self { dim: group.dim(), rank: group.base_dim(), kind, group: Some(group), fixed: None }
    }

    /// Dimension of the ambient algebra `g`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of `g^Δ(a)`, constant over the family.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn kind(&self) -> &ConstraintKind<T> {
        &self.kind
    }

    pub fn group(&self) -> Option<&SemidirectAlgebra<T>> {
        self.group.as_ref()
    }

    /// The vector `φ(a)` (Types I/II) carried by the fiber part of each column.
    pub fn rolling_vector(&self, a: &DualVector<T>) -> Result<Option<Vector<T>>, ConstraintError> {
        match &self.kind {
            ConstraintKind::TypeI => Ok(Some(a.clone())),
            ConstraintKind::TypeII { phi } => phi(a).map(Some),
            _ => Ok(None),
        }
    }

    /// Spanning matrix `G(a)` (`dim × rank`), smooth in `a`.
    pub fn generator(&self, a: &DualVector<T>) -> Result<Matrix<T>, ConstraintError> {
        if let Some(fixed) = &self.fixed {
            return Ok(fixed.to_matrix());
        }
        let group = self.group.as_ref().expect("rolling family has a group");
        let p = group.base_dim();
        let q = group.fiber_dim();
        let fiber_of = |j: usize| -> Result<Vector<T>, ConstraintError> {
            let ej = Vector::unit(p, j);
            match &self.kind {
                ConstraintKind::TypeI => {
                    if a.len() != q {
                        return Err(ConstraintError::DimensionMismatch { expected: q, found: a.len() });
                    }
                    Ok(group.act(&ej, a))
                }
                ConstraintKind::TypeII { phi } => {
                    let v = phi(a)?;
                    if v.len() != q {
                        return Err(ConstraintError::DimensionMismatch { expected: q, found: v.len() });
                    }
                    Ok(group.act(&ej, &v))
                }
                ConstraintKind::TypeIII { alpha } => {
                    let m = alpha(a)?;
                    if m.rows() != q || m.cols() != p {
                        return Err(ConstraintError::DimensionMismatch { expected: q * p, found: m.rows() * m.cols() });
                    }
                    Ok(m.column(j))
                }
                _ => unreachable!(),
            }
        };
        let mut g = Matrix::zeros(p + q, p);
        for j in 0..p {
            g[(j, j)] = T::one();
            let x = fiber_of(j)?;
            if !x.is_finite() {
                return Err(ConstraintError::Invalid("non-finite constraint map value".into()));
            }
            for i in 0..q {
                g[(p + i, j)] = x[i];
            }
        }
        Ok(g)
    }

    /// Orthonormal basis of `g^Δ(a)`; fails with `RankDrop` if the generator degenerates.
    pub fn basis(&self, a: &DualVector<T>) -> Result<SubspaceBasis<T>, ConstraintError> {
        if let Some(fixed) = &self.fixed {
            return Ok(fixed.clone());
        }
        let g = self.generator(a)?;
        SubspaceBasis::orthonormalize(self.dim, &g.columns(), T::rank_tol()).map_err(|e| match e {
            LinalgError::RankDeficient { rank, .. } => ConstraintError::RankDrop { expected: self.rank, found: rank },
            other => ConstraintError::Invalid(other.to_string()),
        })
    }

    /// Orthonormal basis of `(g^Δ(a))°` under the dot pairing.
    pub fn annihilator(&self, a: &DualVector<T>) -> Result<SubspaceBasis<T>, ConstraintError> {
        Ok(annihilator_basis(&self.basis(a)?))
    }

    /// Spanning matrix of `(g^Δ(a))°`, smooth in `a` but not orthonormal.
    ///
    /// For rolling types `G = [I; X(a)]` and the columns are `(−X(a)ᵀ e_i, e_i)`.
    pub fn annihilator_generator(&self, a: &DualVector<T>) -> Result<Matrix<T>, ConstraintError> {
        match &self.kind {
            ConstraintKind::Unconstrained => Ok(Matrix::zeros(self.dim, 0)),
            ConstraintKind::SuslovLinear { normals } => Ok(Matrix::from_columns(self.dim, normals)),
            _ => {
                let g = self.generator(a)?;
                let p = self.rank;
                let q = self.dim - p;
                Ok(Matrix::from_fn(self.dim, q, |r, i| if r < p { -g[(p + i, r)] } else if r - p == i { T::one() } else { T::zero() }))
            }
        }
    }

    /// Largest equivariance defect `|α(Λa)(Λξ) − Λ(α(a)ξ)|` over random rotations,
    /// for Type III families on `so(3) ⋉ R³` where SO(3) acts on all factors by rotation.
    pub fn invariance_defect_so3(&self, samples: usize, seed: u64) -> Result<T, ConstraintError> {
        let group = self.group.as_ref().ok_or_else(|| ConstraintError::Invalid("no group structure".into()))?;
        if group.base_dim() != 3 || group.fiber_dim() != 3 {
            return Err(ConstraintError::Invalid("invariance check needs so(3) ⋉ R³".into()));
        }
        let ConstraintKind::TypeIII { alpha } = &self.kind else {
            return Err(ConstraintError::Invalid("invariance check applies to Type III".into()));
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || Vector::from_fn(3, |_| T::lit(rng.sample::<f64, _>(StandardNormal)));
        let mut worst = T::zero();
        for _ in 0..samples {
            let (w, a, xi) = (draw(), draw(), draw());
            let rot = exp_so3(&w);
            let lhs = alpha(&rot.mul_vec(&a))?.mul_vec(&rot.mul_vec(&xi));
            let rhs = rot.mul_vec(&alpha(&a)?.mul_vec(&xi));
            worst = worst.max((&lhs - &rhs).norm());
        }
        Ok(worst)
    }
}

/// Body-frame vector from the contact point to the center of an Euler disk,
/// `s(Γ) = r E3×(Γ×E3) / |E3×(Γ×E3)|`.
pub fn euler_disk_contact<T: Real>(gamma: &Vector<T>, r: T, e3: &Vector<T>) -> Result<Vector<T>, ConstraintError> {
    let u = cross(e3, &cross(gamma, e3));
    let n = u.norm();
    if !(n > T::lit(SINGULAR_CONTACT_EPS)) {
        return Err(ConstraintError::SingularContact(n.to_f64_lossy()));
    }
    Ok(u.scale(r / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::nullspace_basis;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector<f64> {
        Vector::from_f64(xs)
    }

    fn chaplygin(r: f64, l: f64, chi: Vector<f64>) -> ConstraintFamily<f64> {
        ConstraintFamily::type_ii(
            SemidirectAlgebra::so3_r3(),
            Arc::new(move |g: &Vector<f64>| Ok(&g.scale(r) + &chi.scale(l))),
        )
    }

    #[test]
    fn chaplygin_basis_and_annihilator_columns() {
        let fam = chaplygin(1.0, 0.5, v(&[0.0, 0.0, 1.0]));
        let gamma = v(&[0.0, 0.0, 1.0]);
        let g = fam.generator(&gamma).unwrap();
        // e1 × (0,0,1.5) = (0·1.5 − 0·0, 0·0 − 1·1.5, 0) = (0, −1.5, 0)
        assert_eq!(g.column(0), v(&[1.0, 0.0, 0.0, 0.0, -1.5, 0.0]));
        let basis = fam.basis(&gamma).unwrap();
        assert_eq!(basis.dim(), 3);
        assert!(basis.distance(&g.column(0)) < 1e-14);
        // Nullspace of [I | hat(φ)ᵀ]: (−φ×e1, e1) = ((0, −1.5, 0), e1)
        let ann = fam.annihilator(&gamma).unwrap();
        assert_eq!(ann.dim(), 3);
        assert!(ann.distance(&v(&[0.0, -1.5, 0.0, 1.0, 0.0, 0.0])) < 1e-14);
    }

    #[test]
    fn suslov_and_unconstrained() {
        let fam = ConstraintFamily::suslov(3, vec![v(&[0.0, 0.0, 1.0])]).unwrap();
        let b = fam.basis(&Vector::zeros(0)).unwrap();
        assert_eq!(b.dim(), 2);
        assert!(b.distance(&v(&[1.0, 0.0, 0.0])) == 0.0 && b.distance(&v(&[0.0, 1.0, 0.0])) == 0.0);
        let ann = fam.annihilator(&Vector::zeros(0)).unwrap();
        assert_eq!(ann.dim(), 1);
        assert!(ann.distance(&v(&[0.0, 0.0, 1.0])) < 1e-15);

        let fam = ConstraintFamily::<f64>::unconstrained(3);
        assert_eq!(fam.generator(&Vector::zeros(0)).unwrap(), Matrix::identity(3));
        assert_eq!(fam.annihilator(&Vector::zeros(0)).unwrap().dim(), 0);

        assert!(ConstraintFamily::suslov(3, vec![v(&[1.0, 0.0, 0.0]), v(&[2.0, 0.0, 0.0])]).is_err());
    }

    #[test]
    fn euler_disk_contact_examples() {
        let e3 = v(&[0.0, 0.0, 1.0]);
        // E3×(Γ×E3) = Γ(E3·E3) − E3(E3·Γ) = e1
        let s = euler_disk_contact(&v(&[1.0, 0.0, 0.0]), 1.0, &e3).unwrap();
        assert!((&s - &v(&[1.0, 0.0, 0.0])).norm() < 1e-15);
        assert!(matches!(euler_disk_contact(&e3, 1.0, &e3), Err(ConstraintError::SingularContact(_))));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = euler_disk_contact(&v(&[h, 0.0, h]), 2.0, &e3).unwrap();
        assert!((&s - &v(&[2.0, 0.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn singular_phi_propagates() {
        let e3 = v(&[0.0, 0.0, 1.0]);
        let fam = ConstraintFamily::type_ii(
            SemidirectAlgebra::so3_r3(),
            Arc::new(move |g: &Vector<f64>| euler_disk_contact(g, 1.0, &e3)),
        );
        assert!(matches!(fam.basis(&v(&[0.0, 0.0, 1.0])), Err(ConstraintError::SingularContact(_))));
        assert!(matches!(fam.annihilator(&v(&[0.0, 0.0, 1.0])), Err(ConstraintError::SingularContact(_))));
    }

    #[test]
    fn type_iii_invariance_spot_check() {
        let equivariant = ConstraintFamily::type_iii(
            SemidirectAlgebra::so3_r3(),
            Arc::new(|a: &Vector<f64>| Ok(crate::liealg::hat(&a.scale(2.0)).scale(-1.0))),
        );
        assert!(equivariant.invariance_defect_so3(50, 1).unwrap() < 1e-12);
        let fixed = ConstraintFamily::type_iii(
            SemidirectAlgebra::so3_r3(),
            Arc::new(|_: &Vector<f64>| Ok(Matrix::from_diagonal(&[1.0, 2.0, 3.0]))),
        );
        assert!(fixed.invariance_defect_so3(50, 1).unwrap() > 1e-3);
    }

    fn vec3() -> impl Strategy<Value = Vector<f64>> {
        prop::array::uniform3(-2.0..2.0f64).prop_map(|a| Vector::new(a.to_vec()))
    }

    proptest! {
        #[test]
        fn basis_is_orthogonal_to_annihilator(gamma in vec3(), chi in vec3(), l in 0.0..1.0f64) {
            let fam = chaplygin(0.7, l, chi);
            let b = fam.basis(&gamma).unwrap();
            let ann = fam.annihilator(&gamma).unwrap();
            prop_assert_eq!(b.dim() + ann.dim(), 6);
            let raw = fam.annihilator_generator(&gamma).unwrap();
            prop_assert_eq!(raw.cols(), 3);
            for c in raw.columns() {
                prop_assert!(ann.distance(&c) <= 1e-12 * c.norm());
            }
            for x in b.columns() {
                for w in ann.columns() {
                    prop_assert!(x.dot(w).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn type_ii_and_iii_with_sharp_collapse_to_type_i(a in vec3()) {
            let t1 = ConstraintFamily::type_i(SemidirectAlgebra::so3_r3());
            let t2 = ConstraintFamily::type_ii(SemidirectAlgebra::so3_r3(), Arc::new(|a: &Vector<f64>| Ok(a.clone())));
            let t3 = ConstraintFamily::type_iii(
                SemidirectAlgebra::so3_r3(),
                Arc::new(|a: &Vector<f64>| Ok(crate::liealg::hat(a).scale(-1.0))),
            );
            let b1 = t1.basis(&a).unwrap();
            for other in [t2.basis(&a).unwrap(), t3.basis(&a).unwrap()] {
                for c in other.columns() {
                    prop_assert!(b1.distance(c) <= 1e-12);
                }
            }
        }

        #[test]
        fn chaplygin_sphere_depends_on_r_gamma_only(gamma in vec3(), r in 0.2..3.0f64) {
            let chi = v(&[0.3, 0.1, 0.9]);
            let a = chaplygin(r, 0.0, chi.clone()).generator(&gamma).unwrap();
            let b = chaplygin(1.0, 0.0, chi).generator(&gamma.scale(r)).unwrap();
            prop_assert!(a.sub(&b).norm_max() <= 1e-14);
        }

        #[test]
        fn suslov_basis_is_nullspace(n in vec3()) {
            prop_assume!(n.norm() > 1e-3);
            let fam = ConstraintFamily::suslov(3, vec![n.clone()]).unwrap();
            let b = fam.basis(&Vector::zeros(0)).unwrap();
            let direct = nullspace_basis(&Matrix::from_columns(3, std::slice::from_ref(&n)).transpose(), 1e-12);
            prop_assert_eq!(b.dim(), 2);
            for c in b.columns() {
                prop_assert!(c.dot(&n).abs() <= 1e-12 * n.norm());
                prop_assert!(direct.distance(c) <= 1e-12);
            }
        }
    }
}
