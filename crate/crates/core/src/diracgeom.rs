//! Membership oracles for linear Dirac structures and for the reduced Dirac
//! structures that certify integrator output.
//!
//! Elements of `V ⊕ V*` are stored as one vector `[v; α]` of length `2n`, and
//! the symmetric pairing is `⟨⟨(v,α),(v̄,ᾱ)⟩⟩ = α·v̄ + ᾱ·v`. All membership
//! tests return residual magnitudes; the boolean verdict is derived from them.

use thiserror::Error;

use crate::constraints::{ConstraintError, ConstraintFamily};
use crate::dynamics::LagrangianSpec;
use crate::liealg::{AlgebraVector, DualVector, LieAlgebra, SemidirectAlgebra};
use crate::linalg::{annihilator_basis, Matrix, SubspaceBasis, Vector};
use crate::scalar::Real;

/// Default membership tolerance, scaled by `1 + |inputs|∞` where noted.
pub const DEFAULT_DIRAC_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiracError {
    #[error("ambient dimension {0} of V ⊕ V* is odd")]
    OddAmbient(usize),
    #[error("subspace is not Dirac: dim {dim} (want {want}), max pairing {pairing:e}")]
    NotDirac { dim: usize, want: usize, pairing: f64 },
    #[error("2-form matrix must be square and skew, size {0}")]
    BadForm(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// `α·v̄ + ᾱ·v` for `x = [v; α]`, `y = [v̄; ᾱ]`.
pub fn pairing<T: Real>(x: &Vector<T>, y: &Vector<T>) -> T {
    let n = x.len() / 2;
    let (v, a) = x.split(n);
    let (vb, ab) = y.split(n);
    a.dot(&vb) + ab.dot(&v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiracCheck<T> {
    pub is_dirac: bool,
    /// Largest `|⟨⟨d_i, d_j⟩⟩|` over basis columns (infinite for odd ambient).
    pub max_pairing: T,
}

/// `D = D^⊥`: `dim D = n` and `D` isotropic for the symmetric pairing.
pub fn is_dirac<T: Real>(basis: &SubspaceBasis<T>, tol: T) -> DiracCheck<T> {
    let amb = basis.ambient_dim();
    if amb % 2 == 1 {
        return DiracCheck { is_dirac: false, max_pairing: T::infinity() };
    }
    let cols = basis.columns();
    let mut worst = T::zero();
    for i in 0..cols.len() {
        for j in i..cols.len() {
            worst = worst.max(pairing(&cols[i], &cols[j]).abs());
        }
    }
    DiracCheck { is_dirac: basis.dim() == amb / 2 && worst <= tol, max_pairing: worst }
}

/// A Dirac structure on a vector space `V = R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDirac<T> {
    n: usize,
    basis: SubspaceBasis<T>,
}

impl<T: Real> LinearDirac<T> {
    /// Wraps `basis` after checking the Dirac conditions at tolerance `tol`.
    pub fn new(basis: SubspaceBasis<T>, tol: T) -> Result<Self, DiracError> {
        let amb = basis.ambient_dim();
        if amb % 2 == 1 {
            return Err(DiracError::OddAmbient(amb));
        }
        let check = is_dirac(&basis, tol);
        if !check.is_dirac {
            return Err(DiracError::NotDirac {
                dim: basis.dim(),
                want: amb / 2,
                pairing: check.max_pairing.to_f64_lossy(),
            });
        }
        Ok(Self { n: amb / 2, basis })
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> &SubspaceBasis<T> {
        &self.basis
    }

    /// Distance from `(v, α)` to `D`.
    pub fn residual(&self, v: &Vector<T>, alpha: &Vector<T>) -> T {
        self.basis.distance(&v.concat(alpha))
    }
}

fn check_form<T: Real>(omega: &Matrix<T>) -> Result<(), DiracError> {
    let n = omega.rows();
    if !omega.is_square() || omega.add(&omega.transpose()).norm_max() > T::rank_tol() * (T::one() + omega.norm_max())
    {
        return Err(DiracError::BadForm(n));
    }
    Ok(())
}

/// Spanning columns of `D_Δ = {(v, Ω♭v + n) : v ∈ Δ, n ∈ Δ°}`.
///
/// `omega` is the matrix of `v ↦ Ω(v, ·)`, i.e. `Ω(v, w) = (Ω v)·w`.
pub fn induced_dirac<T: Real>(omega: &Matrix<T>, delta: &SubspaceBasis<T>) -> Result<LinearDirac<T>, DiracError> {
    check_form(omega)?;
    let n = omega.rows();
    if delta.ambient_dim() != n {
        return Err(DiracError::DimensionMismatch { expected: n, found: delta.ambient_dim() });
    }
    let mut cols: Vec<Vector<T>> = delta.columns().iter().map(|b| b.concat(&omega.mul_vec(b))).collect();
    cols.extend(annihilator_basis(delta).columns().iter().map(|m| Vector::zeros(n).concat(m)));
    let basis = SubspaceBasis::orthonormalize(2 * n, &cols, T::rank_tol())
        .expect("graph columns over Δ and Δ° are independent");
    LinearDirac::new(basis, T::lit(1e-10).max(T::epsilon() * T::lit(1e3)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership<T> {
    pub member: bool,
    pub residual: T,
}

/// `(v, α) ∈ D_Δ` iff `v ∈ Δ` and `(α − Ω♭v)·w = 0` for all `w ∈ Δ`.
///
/// The residual is the larger of `dist(v, Δ)` and the worst violation over an
/// orthonormal basis of `Δ`.
pub fn induced_dirac_membership<T: Real>(
    omega: &Matrix<T>,
    delta: &SubspaceBasis<T>,
    v: &Vector<T>,
    alpha: &Vector<T>,
    tol: T,
) -> Membership<T> {
    let r = alpha - &omega.mul_vec(v);
    let mut residual = delta.distance(v);
    for w in delta.columns() {
        residual = residual.max(r.dot(w).abs());
    }
    Membership { member: residual <= tol, residual }
}

/// `((ξ, ρ), (β, η))` with `ξ, η ∈ g` and `ρ, β ∈ g*`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracTestPoint<T> {
    pub xi: AlgebraVector<T>,
    pub rho: DualVector<T>,
    pub beta: DualVector<T>,
    pub eta: AlgebraVector<T>,
}

impl<T: Real> DiracTestPoint<T> {
    /// Reduced Dirac differential of `ℓ` at `(ξ, a)` paired with the tangent `(ξ, μ̇)`.
    ///
    /// Returns `μ = δℓ/δξ` together with the point
    /// `((ξ, μ̇), (−δℓ/δa ⋄ a, ξ))`.
    pub fn reduced_differential(
        alg: &SemidirectAlgebra<T>,
        lag: &LagrangianSpec<T>,
        xi: &AlgebraVector<T>,
        a: &DualVector<T>,
        mu_dot: &DualVector<T>,
    ) -> (DualVector<T>, Self) {
        let mu = lag.dl_dxi(xi, a);
        let beta = if alg.fiber_dim() == 0 {
            Vector::zeros(alg.base_dim())
        } else {
            -alg.diamond(&lag.dl_da(xi, a), a)
        };
        (mu, Self { xi: xi.clone(), rho: mu_dot.clone(), beta, eta: xi.clone() })
    }
}

/// Residuals `(|η − ξ|, dist(ξ, g^Δ(a)), dist(β + ρ − ad*_ξ μ, (g^Δ(a))°))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedResidual<T> {
    pub member: bool,
    pub residuals: [T; 3],
}

impl<T: Real> ReducedResidual<T> {
    pub fn max(&self) -> T {
        self.residuals.iter().copied().fold(T::zero(), T::max)
    }
}

fn scaled_tol<T: Real>(tol: T, parts: &[&Vector<T>]) -> T {
    tol * (T::one() + parts.iter().map(|p| p.norm_inf()).fold(T::zero(), T::max))
}

/// Membership in the reduced induced Dirac structure at `(μ, a)`.
pub fn reduced_membership<T: Real>(
    alg: &LieAlgebra<T>,
    mu: &DualVector<T>,
    fam: &ConstraintFamily<T>,
    a: &DualVector<T>,
    pt: &DiracTestPoint<T>,
    tol: T,
) -> Result<ReducedResidual<T>, ConstraintError> {
    let basis = fam.basis(a)?;
    Ok(reduced_membership_in(alg, mu, &basis, pt, tol))
}

/// [`reduced_membership`] against a precomputed orthonormal basis of `g^Δ(a)`.
pub fn reduced_membership_in<T: Real>(
    alg: &LieAlgebra<T>,
    mu: &DualVector<T>,
    basis: &SubspaceBasis<T>,
    pt: &DiracTestPoint<T>,
    tol: T,
) -> ReducedResidual<T> {
    let force = &(&pt.beta + &pt.rho) - &alg.ad_star(&pt.xi, mu);
    // distance to the annihilator = norm of the component along g^Δ(a)
    let residuals = [(&pt.eta - &pt.xi).norm(), basis.distance(&pt.xi), basis.project(&force).norm()];
    let tol = scaled_tol(tol, &[mu, &pt.xi, &pt.rho, &pt.beta, &pt.eta]);
    ReducedResidual { member: residuals.iter().all(|r| *r <= tol), residuals }
}

/// Tangent `(ξ, w, ρ, b)` and cotangent `(β, c, η, v)` data on `g ⋉ V`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpDiracTestPoint<T> {
    pub xi: AlgebraVector<T>,
    pub w: Vector<T>,
    pub rho: DualVector<T>,
    pub b: DualVector<T>,
    pub beta: DualVector<T>,
    pub c: DualVector<T>,
    pub eta: AlgebraVector<T>,
    pub v: Vector<T>,
}

/// Residuals of the five clauses
/// `−ρ + ad*_ξ μ − w⋄a − β ∈ (g^Δ(a))°`, `b + ξa + c = 0`, `ξ = η`, `w = v`, `ξ ∈ g^Δ(a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpResidual<T> {
    pub member: bool,
    pub residuals: [T; 5],
}

impl<T: Real> SdpResidual<T> {
    pub fn max(&self) -> T {
        self.residuals.iter().copied().fold(T::zero(), T::max)
    }
}

pub fn sdp_reduced_membership<T: Real>(
    alg: &SemidirectAlgebra<T>,
    mu: &DualVector<T>,
    a: &DualVector<T>,
    pt: &SdpDiracTestPoint<T>,
    fam: &ConstraintFamily<T>,
    tol: T,
) -> Result<SdpResidual<T>, ConstraintError> {
    let basis = fam.basis(a)?;
    Ok(sdp_reduced_membership_in(alg, mu, a, pt, &basis, tol))
}

/// [`sdp_reduced_membership`] against a precomputed orthonormal basis of `g^Δ(a)`.
pub fn sdp_reduced_membership_in<T: Real>(
    alg: &SemidirectAlgebra<T>,
    mu: &DualVector<T>,
    a: &DualVector<T>,
    pt: &SdpDiracTestPoint<T>,
    basis: &SubspaceBasis<T>,
    tol: T,
) -> SdpResidual<T> {
    let force = &(&(&alg.base().ad_star(&pt.xi, mu) - &pt.rho) - &alg.diamond(&pt.w, a)) - &pt.beta;
    let advect = &(&pt.b + &alg.dual_action(&pt.xi, a)) + &pt.c;
    let residuals = [
        basis.project(&force).norm(),
        advect.norm(),
        (&pt.xi - &pt.eta).norm(),
        (&pt.w - &pt.v).norm(),
        basis.distance(&pt.xi),
    ];
    let tol = scaled_tol(tol, &[mu, a, &pt.xi, &pt.w, &pt.rho, &pt.b, &pt.beta, &pt.c, &pt.eta, &pt.v]);
    SdpResidual { member: residuals.iter().all(|r| *r <= tol), residuals }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn v(xs: &[f64]) -> Vector<f64> {
        Vector::from_f64(xs)
    }

    fn span(amb: usize, cols: &[Vector<f64>]) -> SubspaceBasis<f64> {
        SubspaceBasis::orthonormalize(amb, cols, 1e-12).unwrap()
    }

    #[test]
    fn is_dirac_examples() {
        let graph = span(4, &[v(&[1.0, 0.0, 0.0, 1.0]), v(&[0.0, 1.0, -1.0, 0.0])]);
        assert!(is_dirac(&graph, 1e-12).is_dirac);
        let split = span(4, &[v(&[1.0, 0.0, 0.0, 0.0]), v(&[0.0, 0.0, 0.0, 1.0])]);
        assert!(is_dirac(&split, 1e-12).is_dirac);
        assert!(!is_dirac(&SubspaceBasis::<f64>::full(4), 1e-12).is_dirac);
        assert!(!is_dirac(&SubspaceBasis::<f64>::full(3), 1e-12).is_dirac);
    }

    #[test]
    fn induced_membership_examples() {
        // Ω(v, w) = v_q w_p − v_p w_q, so Ω♭(1, 0) = (0, 1)
        let omega = Matrix::<f64>::from_rows_f64(&[&[0.0, -1.0], &[1.0, 0.0]]);
        let full = SubspaceBasis::full(2);
        let x = v(&[0.3, -0.7]);
        assert!(induced_dirac_membership(&omega, &full, &x, &omega.mul_vec(&x), 1e-12).member);

        let dq = span(2, &[v(&[1.0, 0.0])]);
        for alpha in [v(&[0.0, 0.0]), v(&[5.0, 1.0])] {
            assert!(!induced_dirac_membership(&omega, &dq, &v(&[0.0, 1.0]), &alpha, 1e-12).member);
        }
        // α = (0,1) + (c,0): only c = 0 pairs to zero with ∂q
        assert!(induced_dirac_membership(&omega, &dq, &v(&[1.0, 0.0]), &v(&[0.0, 1.0]), 1e-12).member);
        let m = induced_dirac_membership(&omega, &dq, &v(&[1.0, 0.0]), &v(&[0.25, 1.0]), 1e-12);
        assert!(!m.member && (m.residual - 0.25).abs() < 1e-15);
        // the p-component of α is free: Δ° = span{dp}
        assert!(induced_dirac_membership(&omega, &dq, &v(&[1.0, 0.0]), &v(&[0.0, 7.0]), 1e-12).member);

        let d = induced_dirac(&omega, &dq).unwrap();
        assert!(d.residual(&v(&[1.0, 0.0]), &v(&[0.0, 7.0])) < 1e-15);
        assert!(d.residual(&v(&[1.0, 0.0]), &v(&[0.25, 1.0])) > 0.2);
    }

    fn random_skew(rng: &mut ChaCha8Rng, n: usize) -> Matrix<f64> {
        let a = Matrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        a.sub(&a.transpose())
    }

    fn random_span(rng: &mut ChaCha8Rng, amb: usize, k: usize) -> SubspaceBasis<f64> {
        let cols: Vec<_> = (0..k).map(|_| Vector::from_fn(amb, |_| rng.sample(StandardNormal))).collect();
        span(amb, &cols)
    }

    #[test]
    fn induced_structures_are_dirac_and_random_subspaces_are_not() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2usize, 3, 4] {
            for _ in 0..30 {
                let omega = random_skew(&mut rng, n);
                let k = rng.random_range(0..=n);
                let delta = random_span(&mut rng, n, k);
                let d = induced_dirac(&omega, &delta).unwrap();
                assert!(is_dirac(d.basis(), 1e-10).is_dirac);
                let x = delta.project(&Vector::from_fn(n, |_| rng.sample(StandardNormal)));
                let alpha = &omega.mul_vec(&x) + &annihilator_basis(&delta).project(&Vector::from_fn(n, |_| rng.sample(StandardNormal)));
                assert!(d.residual(&x, &alpha) < 1e-12);
                assert!(induced_dirac_membership(&omega, &delta, &x, &alpha, 1e-12).member);

                let rnd = random_span(&mut rng, 2 * n, n);
                let c = is_dirac(&rnd, 1e-10);
                assert!(!c.is_dirac && c.max_pairing > 1e-6);
            }
        }
    }

    #[test]
    fn reduced_membership_examples() {
        let so3 = LieAlgebra::<f64>::so3();
        let all = ConstraintFamily::unconstrained(3);
        let none = Vector::zeros(0);
        let e = |i| Vector::<f64>::unit(3, i);
        let pt = DiracTestPoint { xi: e(0), rho: Vector::zeros(3), beta: e(1), eta: e(0) };
        let r = reduced_membership(&so3, &e(2), &all, &none, &pt, 1e-8).unwrap();
        assert!(r.member && r.max() == 0.0);

        let bad = DiracTestPoint { eta: e(1), ..pt.clone() };
        let r = reduced_membership(&so3, &e(2), &all, &none, &bad, 1e-8).unwrap();
        assert!(!r.member && r.residuals[0] > 0.0);

        let suslov = ConstraintFamily::suslov(3, vec![e(2)]).unwrap();
        let pt = DiracTestPoint { xi: e(2), rho: Vector::zeros(3), beta: Vector::zeros(3), eta: e(2) };
        let r = reduced_membership(&so3, &Vector::zeros(3), &suslov, &none, &pt, 1e-8).unwrap();
        assert!(!r.member && (r.residuals[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sdp_membership_examples() {
        let alg = SemidirectAlgebra::<f64>::so3_r3();
        let fam = ConstraintFamily::unconstrained(3);
        let e = |i| Vector::<f64>::unit(3, i);
        let z = Vector::<f64>::zeros(3);
        let a = e(2);
        let pt = SdpDiracTestPoint {
            xi: z.clone(),
            w: e(0),
            rho: z.clone(),
            b: z.clone(),
            beta: e(1),
            c: z.clone(),
            eta: z.clone(),
            v: e(0),
        };
        let r = sdp_reduced_membership(&alg, &z, &a, &pt, &fam, 1e-8).unwrap();
        assert!(r.member && r.max() < 1e-15);

        // advection clause with nonzero ξ: b = −ξa, μ chosen so the force clause holds
        let xi = v(&[0.3, -0.2, 0.5]);
        let mu = v(&[1.0, 2.0, -1.0]);
        let pt2 = SdpDiracTestPoint {
            xi: xi.clone(),
            w: e(0),
            rho: &alg.base().ad_star(&xi, &mu) - &alg.diamond(&e(0), &a),
            b: -alg.dual_action(&xi, &a),
            beta: z.clone(),
            c: z.clone(),
            eta: xi.clone(),
            v: e(0),
        };
        let r = sdp_reduced_membership(&alg, &mu, &a, &pt2, &fam, 1e-8).unwrap();
        assert!(r.member, "{:?}", r);

        let bad = SdpDiracTestPoint { v: e(1), ..pt };
        let r = sdp_reduced_membership(&alg, &z, &a, &bad, &fam, 1e-8).unwrap();
        assert!(!r.member && r.residuals[3] > 1.0);
    }
}
