//! Implicit Euler–Poincaré–Suslov (Lagrangian) and Lie–Poisson–Suslov
//! (Hamiltonian) dynamics with advected parameters.
//!
//! Velocities are parametrized as `ξ = G(a) c` by the constraint generator,
//! so the annihilator clause disappears from the unknowns and every Newton
//! system is square. The production stepper is an implicit midpoint rule
//! whose momentum equation is tested against a basis containing the midpoint
//! velocity and whose potential force is a discrete gradient; for constant
//! inertia and separable Lagrangians this conserves energy exactly.
//! Classical RK4 on the explicit projected equations serves as the oracle.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::constraints::{ConstraintError, ConstraintFamily};
use crate::diracgeom::{
    reduced_membership_in, sdp_reduced_membership_in, DiracTestPoint, SdpDiracTestPoint, DEFAULT_DIRAC_TOL,
};
use crate::liealg::{AlgebraVector, DualVector, GroupState, SemidirectAlgebra};
use crate::linalg::{cholesky, expm, least_squares, solve_linear, LinalgError, Matrix, SubspaceBasis, Vector};
use crate::scalar::Real;

pub type ScalarFn<T> = Arc<dyn Fn(&Vector<T>, &Vector<T>) -> T + Send + Sync>;
pub type VectorFn<T> = Arc<dyn Fn(&Vector<T>, &Vector<T>) -> Vector<T> + Send + Sync>;
pub type MatrixFn<T> = Arc<dyn Fn(&Vector<T>) -> Matrix<T> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("Lagrangian is not hyperregular: {0}")]
    NotHyperregular(String),
    #[error("Newton iteration failed at t = {t}: residual {residual:e} after {iterations} iterations")]
    NewtonDiverged { t: f64, iterations: usize, residual: f64 },
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] LinalgError),
    #[error("{which} disagrees with central differences (relative error {error:e})")]
    DerivativeMismatch { which: &'static str, error: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Step for derivative checks: `1e-6`, or `ε^{1/3}` if that is larger.
fn check_step<T: Real>() -> T {
    T::lit(1e-6).max(T::epsilon().cbrt())
}

/// Step for Jacobians and chain-rule terms inside the solvers.
fn solver_step<T: Real>() -> T {
    T::epsilon().cbrt()
}

fn fd_gradient<T: Real>(f: impl Fn(&Vector<T>) -> T, x: &Vector<T>, h0: T) -> Vector<T> {
    let mut xp = x.clone();
    Vector::from_fn(x.len(), |i| {
        let h = h0 * T::one().max(x[i].abs());
        let xi = x[i];
        xp[i] = xi + h;
        let fp = f(&xp);
        xp[i] = xi - h;
        let fm = f(&xp);
        xp[i] = xi;
        (fp - fm) / (h + h)
    })
}

fn fd_jacobian<T: Real>(
    f: impl Fn(&Vector<T>) -> Result<Vector<T>, DynamicsError>,
    x: &Vector<T>,
    rows: usize,
    h0: T,
) -> Result<Matrix<T>, DynamicsError> {
    let mut jac = Matrix::zeros(rows, x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        let h = h0 * T::one().max(x[j].abs());
        let xj = x[j];
        xp[j] = xj + h;
        let fp = f(&xp)?;
        xp[j] = xj - h;
        let fm = f(&xp)?;
        xp[j] = xj;
        jac.set_column(j, &(&fp - &fm).scale(T::one() / (h + h)));
    }
    Ok(jac)
}

/// Fourth-order central difference of `f(a + s d)` at `s = 0`.
fn fd_directional<T: Real, R>(
    f: impl Fn(&Vector<T>) -> Result<R, DynamicsError>,
    a: &Vector<T>,
    d: &Vector<T>,
    sub: impl Fn(&R, &R, T) -> R,
    add: impl Fn(&R, &R) -> R,
    zero: R,
) -> Result<R, DynamicsError> {
    let dn = d.norm();
    if dn == T::zero() {
        return Ok(zero);
    }
    let s = T::epsilon().powf(T::lit(0.2)) * T::one().max(a.norm()) / dn;
    let at = |k: T| f(&(a + &d.scale(s * k)));
    let (p1, m1, p2, m2) = (at(T::one())?, at(-T::one())?, at(T::lit(2.0))?, at(T::lit(-2.0))?);
    let h12 = T::lit(12.0) * s;
    Ok(add(&sub(&p1, &m1, T::lit(8.0) / h12), &sub(&m2, &p2, T::one() / h12)))
}

fn rel_err<T: Real>(fd: &Vector<T>, an: &Vector<T>) -> T {
    (fd - an).norm_inf() / T::one().max(an.norm_inf())
}

fn gaussian<T: Real>(rng: &mut ChaCha8Rng, n: usize) -> Vector<T> {
    Vector::from_fn(n, |_| T::lit(rng.sample::<f64, _>(StandardNormal)))
}

/// Worst relative errors of analytic derivatives against central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeReport<T> {
    pub points: usize,
    /// Derivative with respect to the velocity (or momentum) argument.
    pub first: T,
    /// Derivative with respect to the advected parameter.
    pub second: T,
}

impl<T: Real> DerivativeReport<T> {
    pub fn max(&self) -> T {
        self.first.max(self.second)
    }
}

fn derivative_check_pair<T: Real>(
    f: &ScalarFn<T>,
    d1: &VectorFn<T>,
    d2: &VectorFn<T>,
    (n, m): (usize, usize),
    points: usize,
    seed: u64,
) -> DerivativeReport<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = check_step::<T>();
    let mut rep = DerivativeReport { points: 0, first: T::zero(), second: T::zero() };
    let mut attempts = 0;
    while rep.points < points && attempts < 10 * points.max(1) {
        attempts += 1;
        let x: Vector<T> = gaussian(&mut rng, n);
        let a: Vector<T> = gaussian(&mut rng, m);
        let (g1, g2) = (d1(&x, &a), d2(&x, &a));
        if !f(&x, &a).is_finite() || !g1.is_finite() || !g2.is_finite() {
            continue;
        }
        let fd1 = fd_gradient(|y| f(y, &a), &x, h);
        let fd2 = fd_gradient(|b| f(&x, b), &a, h);
        if !fd1.is_finite() || !fd2.is_finite() {
            continue;
        }
        rep.first = rep.first.max(rel_err(&fd1, &g1));
        rep.second = rep.second.max(rel_err(&fd2, &g2));
        rep.points += 1;
    }
    rep
}

fn construction_tol<T: Real>() -> T {
    T::lit(1e-6).max(T::epsilon().sqrt() * T::lit(10.0))
}

/// Reduced Lagrangian `ℓ(ξ, a)` with its partial derivatives.
#[derive(Clone)]
pub struct LagrangianSpec<T> {
    xi_dim: usize,
    a_dim: usize,
    l: ScalarFn<T>,
    dl_dxi: VectorFn<T>,
    dl_da: VectorFn<T>,
    inertia: Option<MatrixFn<T>>,
}

impl<T> std::fmt::Debug for LagrangianSpec<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LagrangianSpec")
            .field("xi_dim", &self.xi_dim)
            .field("a_dim", &self.a_dim)
            .field("inertia", &self.inertia.is_some())
            .finish()
    }
}

impl<T: Real> LagrangianSpec<T> {
    /// Builds the spec and checks the derivatives against central differences
    /// on a few random points.
    pub fn new(
        xi_dim: usize,
        a_dim: usize,
        l: ScalarFn<T>,
        dl_dxi: VectorFn<T>,
        dl_da: VectorFn<T>,
        inertia: Option<MatrixFn<T>>,
    ) -> Result<Self, DynamicsError> {
        let spec = Self { xi_dim, a_dim, l, dl_dxi, dl_da, inertia };
        let rep = spec.derivative_check(8, 0x1a6);
        let tol = construction_tol::<T>();
        if rep.first > tol {
            return Err(DynamicsError::DerivativeMismatch { which: "dl_dxi", error: rep.first.to_f64_lossy() });
        }
        if rep.second > tol {
            return Err(DynamicsError::DerivativeMismatch { which: "dl_da", error: rep.second.to_f64_lossy() });
        }
        Ok(spec)
    }

    pub fn xi_dim(&self) -> usize {
        self.xi_dim
    }

    pub fn a_dim(&self) -> usize {
        self.a_dim
    }

    pub fn value(&self, xi: &AlgebraVector<T>, a: &DualVector<T>) -> T {
        (self.l)(xi, a)
    }

    /// `δℓ/δξ`, the reduced Legendre map `Fℓ`.
    pub fn dl_dxi(&self, xi: &AlgebraVector<T>, a: &DualVector<T>) -> DualVector<T> {
        (self.dl_dxi)(xi, a)
    }

    pub fn dl_da(&self, xi: &AlgebraVector<T>, a: &DualVector<T>) -> Vector<T> {
        (self.dl_da)(xi, a)
    }

    pub fn inertia(&self, a: &DualVector<T>) -> Option<Matrix<T>> {
        self.inertia.as_ref().map(|m| m(a))
    }

    pub fn has_inertia(&self) -> bool {
        self.inertia.is_some()
    }

    /// `∂²ℓ/∂ξ²`: the inertia when provided, otherwise a difference quotient of `δℓ/δξ`.
    pub fn hessian_xi(&self, xi: &AlgebraVector<T>, a: &DualVector<T>) -> Result<Matrix<T>, DynamicsError> {
        match &self.inertia {
            Some(m) => Ok(m(a)),
            None => fd_jacobian(|y| Ok(self.dl_dxi(y, a)), xi, self.xi_dim, solver_step()),
        }
    }

    /// Energy `⟨δℓ/δξ, ξ⟩ − ℓ(ξ, a)`.
    pub fn energy(&self, xi: &AlgebraVector<T>, a: &DualVector<T>) -> T {
        self.dl_dxi(xi, a).dot(xi) - self.value(xi, a)
    }

    pub fn derivative_check(&self, points: usize, seed: u64) -> DerivativeReport<T> {
        derivative_check_pair(&self.l, &self.dl_dxi, &self.dl_da, (self.xi_dim, self.a_dim), points, seed)
    }
}

/// Reduced Hamiltonian `h(μ, a)` with its partial derivatives.
#[derive(Clone)]
pub struct HamiltonianSpec<T> {
    mu_dim: usize,
    a_dim: usize,
    h: ScalarFn<T>,
    dh_dmu: VectorFn<T>,
    dh_da: VectorFn<T>,
    inverse_inertia: Option<MatrixFn<T>>,
}

impl<T> std::fmt::Debug for HamiltonianSpec<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HamiltonianSpec").field("mu_dim", &self.mu_dim).field("a_dim", &self.a_dim).finish()
    }
}

impl<T: Real> HamiltonianSpec<T> {
    pub fn new(
        mu_dim: usize,
        a_dim: usize,
        h: ScalarFn<T>,
        dh_dmu: VectorFn<T>,
        dh_da: VectorFn<T>,
        inverse_inertia: Option<MatrixFn<T>>,
    ) -> Result<Self, DynamicsError> {
        let spec = Self { mu_dim, a_dim, h, dh_dmu, dh_da, inverse_inertia };
        let rep = spec.derivative_check(8, 0x1a7);
        let tol = construction_tol::<T>();
        if rep.first > tol {
            return Err(DynamicsError::DerivativeMismatch { which: "dh_dmu", error: rep.first.to_f64_lossy() });
        }
        if rep.second > tol {
            return Err(DynamicsError::DerivativeMismatch { which: "dh_da", error: rep.second.to_f64_lossy() });
        }
        Ok(spec)
    }

    pub fn mu_dim(&self) -> usize {
        self.mu_dim
    }

    pub fn a_dim(&self) -> usize {
        self.a_dim
    }

    pub fn value(&self, mu: &DualVector<T>, a: &DualVector<T>) -> T {
        (self.h)(mu, a)
    }

    pub fn dh_dmu(&self, mu: &DualVector<T>, a: &DualVector<T>) -> AlgebraVector<T> {
        (self.dh_dmu)(mu, a)
    }

    pub fn dh_da(&self, mu: &DualVector<T>, a: &DualVector<T>) -> Vector<T> {
        (self.dh_da)(mu, a)
    }

    /// `∂ξ/∂μ`: the inverse inertia when known, otherwise a difference quotient.
    pub fn dxi_dmu(&self, mu: &DualVector<T>, a: &DualVector<T>) -> Result<Matrix<T>, DynamicsError> {
        match &self.inverse_inertia {
            Some(k) => Ok(k(a)),
            None => fd_jacobian(|y| Ok(self.dh_dmu(y, a)), mu, self.mu_dim, solver_step()),
        }
    }

    pub fn derivative_check(&self, points: usize, seed: u64) -> DerivativeReport<T> {
        derivative_check_pair(&self.h, &self.dh_dmu, &self.dh_da, (self.mu_dim, self.a_dim), points, seed)
    }
}

/// Hyperregular reduced Legendre transform `h(μ, a) = ⟨μ, ξ⟩ − ℓ(ξ, a)`, `μ = δℓ/δξ`.
///
/// `ξ(μ, a)` starts from `M(a)⁻¹(μ − δℓ/δξ(0, a))`, exact for Lagrangians
/// quadratic in `ξ`, and is refined by Newton steps with the inertia.
pub fn legendre<T: Real>(lag: &LagrangianSpec<T>) -> Result<HamiltonianSpec<T>, DynamicsError> {
    let inertia = lag
        .inertia
        .clone()
        .ok_or_else(|| DynamicsError::NotHyperregular("no inertia supplied".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x1e6);
    let mut probes = vec![Vector::zeros(lag.a_dim)];
    probes.extend((0..4).map(|_| gaussian(&mut rng, lag.a_dim)));
    for a in &probes {
        let m = inertia(a);
        if m.rows() != lag.xi_dim || m.cols() != lag.xi_dim {
            return Err(DynamicsError::NotHyperregular(format!("inertia is {}×{}", m.rows(), m.cols())));
        }
        cholesky(&m).map_err(|e| DynamicsError::NotHyperregular(e.to_string()))?;
    }

    let lag = Arc::new(lag.clone());
    let xi_of: Arc<dyn Fn(&Vector<T>, &Vector<T>) -> Vector<T> + Send + Sync> = {
        let lag = lag.clone();
        let inertia = inertia.clone();
        Arc::new(move |mu: &Vector<T>, a: &Vector<T>| {
            let m = inertia(a);
            let n = lag.xi_dim;
            let nan = || Vector::from_fn(n, |_| T::nan());
            let Ok(mut xi) = solve_linear(&m, &(mu - &lag.dl_dxi(&Vector::zeros(n), a))) else {
                return nan();
            };
            let tol = T::epsilon() * T::lit(8.0) * (T::one() + mu.norm_inf());
            for _ in 0..8 {
                let r = &lag.dl_dxi(&xi, a) - mu;
                if r.norm_inf() <= tol {
                    break;
                }
                match solve_linear(&m, &r) {
                    Ok(dx) => xi -= &dx,
                    Err(_) => return nan(),
                }
            }
            xi
        })
    };
    let h: ScalarFn<T> = {
        let (lag, xi_of) = (lag.clone(), xi_of.clone());
        Arc::new(move |mu, a| {
            let xi = xi_of(mu, a);
            mu.dot(&xi) - lag.value(&xi, a)
        })
    };
    let dh_dmu: VectorFn<T> = {
        let xi_of = xi_of.clone();
        Arc::new(move |mu, a| xi_of(mu, a))
    };
    let dh_da: VectorFn<T> = {
        let (lag, xi_of) = (lag.clone(), xi_of.clone());
        Arc::new(move |mu, a| -lag.dl_da(&xi_of(mu, a), a))
    };
    let inverse_inertia: MatrixFn<T> = Arc::new(move |a| {
        let m = inertia(a);
        let n = m.rows();
        let cols: Vec<_> = (0..n)
            .map(|j| solve_linear(&m, &Vector::unit(n, j)).unwrap_or_else(|_| Vector::from_fn(n, |_| T::nan())))
            .collect();
        Matrix::from_columns(n, &cols)
    });
    HamiltonianSpec::new(lag.xi_dim, lag.a_dim, h, dh_dmu, dh_da, Some(inverse_inertia))
}

/// Group on which a reduced trajectory can be reconstructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    So3,
    Se3,
}

impl GroupKind {
    pub fn identity<T: Real>(self) -> GroupState<T> {
        match self {
            GroupKind::So3 => GroupState::identity_so3(),
            GroupKind::Se3 => GroupState::identity_se3(),
        }
    }
}

/// Point `(ξ, μ, a)` of a reduced trajectory at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState<T> {
    pub t: T,
    pub xi: AlgebraVector<T>,
    pub mu: DualVector<T>,
    pub a: DualVector<T>,
}

impl<T: Real> ReducedState<T> {
    /// `max(|Δξ|∞, |Δμ|∞, |Δa|∞)`.
    pub fn distance(&self, other: &Self) -> T {
        (&self.xi - &other.xi)
            .norm_inf()
            .max((&self.mu - &other.mu).norm_inf())
            .max((&self.a - &other.a).norm_inf())
    }
}

/// Per-sample diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics<T> {
    pub energy: T,
    pub res_constraint: T,
    /// Largest of the reduced and (for semidirect models) stage-two Dirac residuals.
    pub res_dirac: T,
    /// `||a| − |a₀||` for orthogonal actions, zero otherwise.
    pub res_advection: T,
    pub reduced: [T; 3],
    pub sdp: Option<[T; 5]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub dt: T,
    pub states: Vec<ReducedState<T>>,
    pub diagnostics: Vec<Diagnostics<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn empty(dt: T) -> Self {
        Self { dt, states: Vec::new(), diagnostics: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> Option<&ReducedState<T>> {
        self.states.last()
    }

    /// `max |e(t) − e(0)| / |e(0)|`, absolute when `|e(0)| ≤ 1e-12`.
    pub fn max_energy_drift(&self) -> T {
        let Some(e0) = self.diagnostics.first().map(|d| d.energy) else {
            return T::zero();
        };
        let denom = if e0.abs() > T::lit(1e-12) { e0.abs() } else { T::one() };
        self.diagnostics.iter().map(|d| (d.energy - e0).abs() / denom).fold(T::zero(), T::max)
    }

    pub fn max_constraint_residual(&self) -> T {
        self.diagnostics.iter().map(|d| d.res_constraint).fold(T::zero(), T::max)
    }

    pub fn max_dirac_residual(&self) -> T {
        self.diagnostics.iter().map(|d| d.res_dirac).fold(T::zero(), T::max)
    }

    pub fn max_advection_residual(&self) -> T {
        self.diagnostics.iter().map(|d| d.res_advection).fold(T::zero(), T::max)
    }
}

/// Integration failure carrying every sample accepted before it.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{cause}")]
pub struct IntegrationError<T: Real> {
    #[source]
    pub cause: DynamicsError,
    pub partial: Trajectory<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdvectionMode {
    /// Midpoint rule on `ȧ = −ξ a`.
    #[default]
    Ode,
    /// `a₁ = exp(dt ρ′(ξ_m)ᵀ) a₀`.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<T> {
    pub dt: T,
    pub newton_tol: T,
    pub max_iter: usize,
    pub advection: AdvectionMode,
    /// Tolerance used for the Dirac verdicts attached to diagnostics.
    pub dirac_tol: T,
}

impl<T: Real> IntegratorConfig<T> {
    pub fn new(dt: T) -> Self {
        Self {
            dt,
            newton_tol: T::newton_tol(),
            max_iter: 50,
            advection: AdvectionMode::Ode,
            dirac_tol: T::lit(DEFAULT_DIRAC_TOL),
        }
    }
}

/// Number of uniform steps `⌈T/dt⌉`, treating ratios within `1e-9` of an integer as exact.
pub fn step_count<T: Real>(t_final: T, dt: T) -> Result<usize, DynamicsError> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(DynamicsError::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(t_final >= T::zero()) || !t_final.is_finite() {
        return Err(DynamicsError::InvalidArgument(format!("t_final must be non-negative, got {t_final}")));
    }
    let q = (t_final / dt).to_f64_lossy();
    let r = q.round();
    let n = if (q - r).abs() <= 1e-9 * r.max(1.0) { r } else { q.ceil() };
    Ok(n as usize)
}

/// Explicit form of the projected equations at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitRhs<T> {
    pub xi: AlgebraVector<T>,
    pub mu: DualVector<T>,
    pub c: Vector<T>,
    pub c_dot: Vector<T>,
    pub xi_dot: AlgebraVector<T>,
    pub mu_dot: DualVector<T>,
    pub a_dot: DualVector<T>,
    /// Reaction force `μ̇ − ad*_ξ μ ∓ δ(ℓ,h)/δa ⋄ a ∈ (g^Δ(a))°`.
    pub reaction: DualVector<T>,
}

fn advection_rate<T: Real>(alg: &SemidirectAlgebra<T>, xi: &Vector<T>, a: &Vector<T>) -> Vector<T> {
    if alg.fiber_dim() == 0 {
        Vector::zeros(0)
    } else {
        -alg.dual_action(xi, a)
    }
}

fn diamond_or_zero<T: Real>(alg: &SemidirectAlgebra<T>, w: &Vector<T>, a: &Vector<T>) -> Vector<T> {
    if alg.fiber_dim() == 0 {
        Vector::zeros(alg.base_dim())
    } else {
        alg.diamond(w, a)
    }
}

fn generator_rate<T: Real>(
    fam: &ConstraintFamily<T>,
    a: &Vector<T>,
    a_dot: &Vector<T>,
    g: &Matrix<T>,
) -> Result<Matrix<T>, DynamicsError> {
    let zero = Matrix::zeros(g.rows(), g.cols());
    fd_directional(|b| Ok(fam.generator(b)?), a, a_dot, |p, m, s| p.sub(m).scale(s), |x, y| x.add(y), zero)
}

/// Test basis for the momentum equation: `G_m` with the midpoint velocity folded in.
///
/// `T = G_m + (ξ_m − G_m c̄) c̄ᵀ/|c̄|²` with `c̄` the least-squares coordinates
/// of `ξ_m`, so that `T c̄ = ξ_m`; the correction is `O(dt²)`.
fn test_basis<T: Real>(gm: &Matrix<T>, xim: &Vector<T>) -> Result<Matrix<T>, DynamicsError> {
    let cbar = least_squares(gm, xim)?;
    let cn2 = cbar.dot(&cbar);
    if cn2.sqrt() <= T::rank_tol() {
        return Ok(gm.clone());
    }
    let r = xim - &gm.mul_vec(&cbar);
    Ok(Matrix::from_fn(gm.rows(), gm.cols(), |i, j| gm[(i, j)] + r[i] * cbar[j] / cn2))
}

/// Gonzalez discrete gradient of `f` between `a0` and `a1`, anchored at `grad`.
fn discrete_gradient<T: Real>(grad: Vector<T>, f0: T, f1: T, a0: &Vector<T>, a1: &Vector<T>) -> Vector<T> {
    let da = a1 - a0;
    let d2 = da.dot(&da);
    if d2.sqrt() <= T::lit(1e-6) * (T::one() + a0.norm()) {
        return grad;
    }
    let k = (f1 - f0 - grad.dot(&da)) / d2;
    &grad + &da.scale(k)
}

fn advection_residual<T: Real>(
    alg: &SemidirectAlgebra<T>,
    mode: AdvectionMode,
    dt: T,
    xim: &Vector<T>,
    a0: &Vector<T>,
    a1: &Vector<T>,
) -> Vector<T> {
    if alg.fiber_dim() == 0 {
        return Vector::zeros(0);
    }
    match mode {
        AdvectionMode::Ode => {
            let am = (a0 + a1).scale(T::lit(0.5));
            &(a1 - a0) + &alg.dual_action(xim, &am).scale(dt)
        }
        AdvectionMode::Exact => a1 - &expm(&alg.rep_of(xim).transpose().scale(dt)).mul_vec(a0),
    }
}

struct NewtonOutcome<T> {
    x: Vector<T>,
}

/// Newton iteration with a central-difference Jacobian that is rebuilt only
/// when convergence slows, followed by one polishing step.
fn newton<T: Real>(
    f: impl Fn(&Vector<T>) -> Result<Vector<T>, DynamicsError>,
    x0: Vector<T>,
    tol: T,
    max_iter: usize,
    t: T,
) -> Result<NewtonOutcome<T>, DynamicsError> {
    let diverged = |iterations: usize, residual: T| DynamicsError::NewtonDiverged {
        t: t.to_f64_lossy(),
        iterations,
        residual: residual.to_f64_lossy(),
    };
    let n = x0.len();
    let mut x = x0;
    let mut r = f(&x)?;
    if r.len() != n {
        return Err(DynamicsError::InvalidArgument(format!("Newton system is {}×{n}", r.len())));
    }
    let mut jac: Option<Matrix<T>> = None;
    let mut fresh = false;
    let mut prev = T::infinity();
    let mut iter = 0;
    loop {
        let rn = r.norm_inf();
        if !rn.is_finite() || !x.is_finite() {
            return Err(diverged(iter, rn));
        }
        if rn <= tol {
            if rn > T::zero() {
                if let Some(j) = &jac {
                    if let Ok(dx) = solve_linear(j, &r) {
                        let xp = &x - &dx;
                        if let Ok(rp) = f(&xp) {
                            if rp.norm_inf() <= rn {
                                x = xp;
                            }
                        }
                    }
                }
            }
            return Ok(NewtonOutcome { x });
        }
        if iter >= max_iter {
            return Err(diverged(iter, rn));
        }
        if jac.is_none() || rn > T::lit(0.1) * prev {
            jac = Some(fd_jacobian(&f, &x, n, solver_step())?);
            fresh = true;
        }
        let dx = match solve_linear(jac.as_ref().unwrap(), &r) {
            Ok(dx) => dx,
            Err(e) if fresh => return Err(e.into()),
            Err(_) => {
                jac = Some(fd_jacobian(&f, &x, n, solver_step())?);
                solve_linear(jac.as_ref().unwrap(), &r)?
            }
        };
        fresh = false;
        x -= &dx;
        prev = rn;
        r = f(&x)?;
        iter += 1;
    }
}

fn certify_point<T: Real>(
    alg: &SemidirectAlgebra<T>,
    basis: &SubspaceBasis<T>,
    state: &ReducedState<T>,
    rhs: &ExplicitRhs<T>,
    beta: DualVector<T>,
    w: Option<Vector<T>>,
    tol: T,
) -> ([T; 3], Option<[T; 5]>) {
    let pt = DiracTestPoint { xi: state.xi.clone(), rho: rhs.mu_dot.clone(), beta, eta: state.xi.clone() };
    let red = reduced_membership_in(alg.base(), &state.mu, basis, &pt, tol);
    let sdp = w.map(|w| {
        let m = alg.fiber_dim();
        let pt = SdpDiracTestPoint {
            xi: state.xi.clone(),
            w: w.clone(),
            rho: rhs.mu_dot.clone(),
            b: rhs.a_dot.clone(),
            beta: Vector::zeros(alg.base_dim()),
            c: Vector::zeros(m),
            eta: state.xi.clone(),
            v: w,
        };
        sdp_reduced_membership_in(alg, &state.mu, &state.a, &pt, basis, tol).residuals
    });
    (red.residuals, sdp)
}

fn finish_diagnostics<T: Real>(
    energy: T,
    res_constraint: T,
    reduced: [T; 3],
    sdp: Option<[T; 5]>,
    res_advection: T,
) -> Diagnostics<T> {
    let mut res_dirac = reduced.iter().copied().fold(T::zero(), T::max);
    if let Some(s) = &sdp {
        res_dirac = s.iter().copied().fold(res_dirac, T::max);
    }
    Diagnostics { energy, res_constraint, res_dirac, res_advection, reduced, sdp }
}

fn advection_defect<T: Real>(alg: &SemidirectAlgebra<T>, orthogonal: bool, a: &Vector<T>, a0_norm: T) -> T {
    if orthogonal && alg.fiber_dim() > 0 {
        (a.norm() - a0_norm).abs()
    } else {
        T::zero()
    }
}

/// Lagrangian-side reduced system on `g ⋉ V*`.
#[derive(Clone, Debug)]
pub struct ReducedSystem<T> {
    pub name: String,
    /// `g ⋉ V`; the fiber is empty when nothing is advected.
    pub algebra: SemidirectAlgebra<T>,
    pub lagrangian: LagrangianSpec<T>,
    /// Constraint family on `g`.
    pub constraints: ConstraintFamily<T>,
    pub group: Option<GroupKind>,
}

impl<T: Real> ReducedSystem<T> {
    pub fn new(
        name: impl Into<String>,
        algebra: SemidirectAlgebra<T>,
        lagrangian: LagrangianSpec<T>,
        constraints: ConstraintFamily<T>,
        group: Option<GroupKind>,
    ) -> Result<Self, DynamicsError> {
        let n = algebra.base_dim();
        if lagrangian.xi_dim() != n || constraints.dim() != n || lagrangian.a_dim() != algebra.fiber_dim() {
            return Err(DynamicsError::InvalidArgument("algebra, Lagrangian and constraints disagree on dimensions".into()));
        }
        if let Some(g) = group {
            let want = match g {
                GroupKind::So3 => 3,
                GroupKind::Se3 => 6,
            };
            if want != n {
                return Err(DynamicsError::InvalidArgument(format!("{g:?} needs a {want}-dimensional algebra")));
            }
        }
        Ok(Self { name: name.into(), algebra, lagrangian, constraints, group })
    }

    pub fn xi_dim(&self) -> usize {
        self.algebra.base_dim()
    }

    pub fn a_dim(&self) -> usize {
        self.algebra.fiber_dim()
    }

    pub fn energy(&self, xi: &AlgebraVector<T>, a: &DualVector<T>) -> T {
        self.lagrangian.energy(xi, a)
    }

    /// State with `ξ = G(a) c` and `μ = Fℓ(ξ, a)`.
    pub fn state_from_coordinates(&self, c: &Vector<T>, a: &DualVector<T>, t: T) -> Result<ReducedState<T>, DynamicsError> {
        let g = self.constraints.generator(a)?;
        if c.len() != g.cols() {
            return Err(DynamicsError::InvalidArgument(format!("expected {} constrained coordinates", g.cols())));
        }
        self.constraints.basis(a)?;
        let xi = g.mul_vec(c);
        let mu = self.lagrangian.dl_dxi(&xi, a);
        Ok(ReducedState { t, xi, mu, a: a.clone() })
    }

    /// State whose velocity is the orthogonal projection of `xi` onto `g^Δ(a)`.
    pub fn state_from_velocity(&self, xi: &AlgebraVector<T>, a: &DualVector<T>, t: T) -> Result<ReducedState<T>, DynamicsError> {
        if xi.len() != self.xi_dim() || a.len() != self.a_dim() {
            return Err(DynamicsError::InvalidArgument("state dimensions do not match the system".into()));
        }
        let xi = self.constraints.basis(a)?.project(xi);
        let mu = self.lagrangian.dl_dxi(&xi, a);
        Ok(ReducedState { t, xi, mu, a: a.clone() })
    }

    /// Constrained coordinates of `ξ` in the generator at `a`.
    pub fn coordinates(&self, xi: &AlgebraVector<T>, a: &DualVector<T>) -> Result<Vector<T>, DynamicsError> {
        Ok(least_squares(&self.constraints.generator(a)?, xi)?)
    }

    /// Projected equations solved for `ċ` and the reaction:
    /// `M G ċ − N λ = ad*_ξ μ + δℓ/δa ⋄ a − M Ġ c − ∂_a(δℓ/δξ)[ȧ]`, `μ̇ = … + N λ`.
    pub fn eps_rhs(&self, c: &Vector<T>, a: &DualVector<T>) -> Result<ExplicitRhs<T>, DynamicsError> {
        let alg = &self.algebra;
        let lag = &self.lagrangian;
        let fam = &self.constraints;
        let g = fam.generator(a)?;
        let xi = g.mul_vec(c);
        let mu = lag.dl_dxi(&xi, a);
        let a_dot = advection_rate(alg, &xi, a);
        let force = &alg.base().ad_star(&xi, &mu) + &diamond_or_zero(alg, &lag.dl_da(&xi, a), a);
        let nmat = fam.annihilator_generator(a)?;
        let m = lag.hessian_xi(&xi, a)?;
        let g_dot = generator_rate(fam, a, &a_dot, &g)?;
        let dmu_a = fd_directional(
            |b| Ok(lag.dl_dxi(&xi, b)),
            a,
            &a_dot,
            |p, q, s| (p - q).scale(s),
            |x, y| x + y,
            Vector::zeros(xi.len()),
        )?;
        let n = xi.len();
        let k = g.cols();
        let mg = m.matmul(&g);
        let sys = Matrix::from_fn(n, n, |i, j| if j < k { mg[(i, j)] } else { -nmat[(i, j - k)] });
        let rhs = &(&force - &m.mul_vec(&g_dot.mul_vec(c))) - &dmu_a;
        let sol = solve_linear(&sys, &rhs)?;
        let (c_dot, lambda) = sol.split(k);
        let reaction = nmat.mul_vec(&lambda);
        let mu_dot = &force + &reaction;
        let xi_dot = &g_dot.mul_vec(c) + &g.mul_vec(&c_dot);
        Ok(ExplicitRhs { xi, mu, c: c.clone(), c_dot, xi_dot, mu_dot, a_dot, reaction })
    }

    /// [`ReducedSystem::eps_rhs`] at a state, recovering `c` by least squares.
    pub fn eps_rhs_at(&self, state: &ReducedState<T>) -> Result<ExplicitRhs<T>, DynamicsError> {
        let c = self.coordinates(&state.xi, &state.a)?;
        self.eps_rhs(&c, &state.a)
    }

    /// Energy, constraint, Dirac and advection diagnostics of one sample.
    pub fn diagnostics(&self, state: &ReducedState<T>, a0_norm: T, tol: T) -> Result<Diagnostics<T>, DynamicsError> {
        let orthogonal = self.algebra.is_orthogonal();
        self.diagnostics_with(state, a0_norm, tol, orthogonal)
    }

    fn diagnostics_with(
        &self,
        state: &ReducedState<T>,
        a0_norm: T,
        tol: T,
        orthogonal: bool,
    ) -> Result<Diagnostics<T>, DynamicsError> {
        let alg = &self.algebra;
        let basis = self.constraints.basis(&state.a)?;
        let rhs = self.eps_rhs_at(state)?;
        let (_, pt) = DiracTestPoint::reduced_differential(alg, &self.lagrangian, &state.xi, &state.a, &rhs.mu_dot);
        let w = (alg.fiber_dim() > 0).then(|| -self.lagrangian.dl_da(&state.xi, &state.a));
        let (reduced, sdp) = certify_point(alg, &basis, state, &rhs, pt.beta, w, tol);
        Ok(finish_diagnostics(
            self.energy(&state.xi, &state.a),
            basis.distance(&state.xi),
            reduced,
            sdp,
            advection_defect(alg, orthogonal, &state.a, a0_norm),
        ))
    }

    /// Midpoint residual in the unknowns `x = (c₁, a₁)`.
    fn midpoint_residual(
        &self,
        s0: &ReducedState<T>,
        cfg: &IntegratorConfig<T>,
        x: &Vector<T>,
    ) -> Result<Vector<T>, DynamicsError> {
        let alg = &self.algebra;
        let lag = &self.lagrangian;
        let k = self.constraints.rank();
        let half = T::lit(0.5);
        let (c1, a1) = x.split(k);
        let xi1 = self.constraints.generator(&a1)?.mul_vec(&c1);
        let mu1 = lag.dl_dxi(&xi1, &a1);
        let am = (&s0.a + &a1).scale(half);
        let xim = (&s0.xi + &xi1).scale(half);
        let mum = (&s0.mu + &mu1).scale(half);
        let tb = test_basis(&self.constraints.generator(&am)?, &xim)?;
        let mut force = alg.base().ad_star(&xim, &mum);
        if alg.fiber_dim() > 0 {
            let w = discrete_gradient(lag.dl_da(&xim, &am), lag.value(&xim, &s0.a), lag.value(&xim, &a1), &s0.a, &a1);
            force += &alg.diamond(&w, &am);
        }
        let momentum = tb.tr_mul_vec(&(&(&mu1 - &s0.mu) - &force.scale(cfg.dt)));
        Ok(momentum.concat(&advection_residual(alg, cfg.advection, cfg.dt, &xim, &s0.a, &a1)))
    }

    /// One implicit-midpoint step.
    pub fn step(&self, state: &ReducedState<T>, cfg: &IntegratorConfig<T>) -> Result<ReducedState<T>, DynamicsError> {
        let c0 = self.coordinates(&state.xi, &state.a)?;
        let k = c0.len();
        let scale = T::one() + state.mu.norm_inf() + state.a.norm_inf();
        let out = newton(
            |x| self.midpoint_residual(state, cfg, x),
            c0.concat(&state.a),
            cfg.newton_tol * scale,
            cfg.max_iter,
            state.t,
        )?;
        let (c1, a1) = out.x.split(k);
        self.state_from_coordinates(&c1, &a1, state.t + cfg.dt)
    }

    /// Integrates over `⌈T/dt⌉` midpoint steps, filling diagnostics per sample.
    pub fn integrate(
        &self,
        state0: &ReducedState<T>,
        t_final: T,
        cfg: &IntegratorConfig<T>,
    ) -> Result<Trajectory<T>, IntegrationError<T>> {
        let orthogonal = self.algebra.is_orthogonal();
        let a0n = state0.a.norm();
        run_loop(
            cfg.dt,
            t_final,
            state0,
            |s| self.step(s, cfg),
            |s| self.diagnostics_with(s, a0n, cfg.dirac_tol, orthogonal),
        )
    }

    /// Classical RK4 on `(c, a)` with the explicit projected equations; the
    /// reference oracle. Only every `record_every`-th state is stored.
    pub fn oracle_rk4(
        &self,
        state0: &ReducedState<T>,
        t_final: T,
        dt: T,
        record_every: usize,
    ) -> Result<Trajectory<T>, IntegrationError<T>> {
        let record_every = record_every.max(1);
        let orthogonal = self.algebra.is_orthogonal();
        let a0n = state0.a.norm();
        let tol = T::lit(DEFAULT_DIRAC_TOL);
        let mut traj = Trajectory::empty(dt * T::lit(record_every as f64));
        let fail = |cause: DynamicsError, traj: Trajectory<T>| IntegrationError { cause, partial: traj };
        let steps = match step_count(t_final, dt) {
            Ok(n) => n,
            Err(e) => return Err(fail(e, traj)),
        };
        let mut c = match self.coordinates(&state0.xi, &state0.a) {
            Ok(c) => c,
            Err(e) => return Err(fail(e, traj)),
        };
        let mut a = state0.a.clone();
        let k = c.len();
        let f = |c: &Vector<T>, a: &Vector<T>| -> Result<Vector<T>, DynamicsError> {
            let r = self.eps_rhs(c, a)?;
            Ok(r.c_dot.concat(&r.a_dot))
        };
        let half = T::lit(0.5);
        let sixth = T::one() / T::lit(6.0);
        for i in 0..=steps {
            if i % record_every == 0 || i == steps {
                let t = state0.t + dt * T::lit(i as f64);
                let rec = self
                    .state_from_coordinates(&c, &a, t)
                    .and_then(|s| self.diagnostics_with(&s, a0n, tol, orthogonal).map(|d| (s, d)));
                match rec {
                    Ok((s, d)) => {
                        traj.states.push(s);
                        traj.diagnostics.push(d);
                    }
                    Err(e) => return Err(fail(e, traj)),
                }
            }
            if i == steps {
                break;
            }
            let x = c.concat(&a);
            let stage = |y: &Vector<T>| {
                let (cc, aa) = y.split(k);
                f(&cc, &aa)
            };
            let res = (|| {
                let k1 = stage(&x)?;
                let k2 = stage(&(&x + &k1.scale(dt * half)))?;
                let k3 = stage(&(&x + &k2.scale(dt * half)))?;
                let k4 = stage(&(&x + &k3.scale(dt)))?;
                let incr = &(&(&k1 + &k2.scale(T::lit(2.0))) + &k3.scale(T::lit(2.0))) + &k4;
                Ok::<_, DynamicsError>(&x + &incr.scale(dt * sixth))
            })();
            match res {
                Ok(y) if y.is_finite() => {
                    let (cc, aa) = y.split(k);
                    c = cc;
                    a = aa;
                }
                Ok(_) => {
                    return Err(fail(
                        DynamicsError::NewtonDiverged { t: (dt * T::lit(i as f64)).to_f64_lossy(), iterations: 0, residual: f64::NAN },
                        traj,
                    ))
                }
                Err(e) => return Err(fail(e, traj)),
            }
        }
        Ok(traj)
    }

    /// Hamiltonian twin obtained by the reduced Legendre transform.
    pub fn hamiltonian(&self) -> Result<HamiltonianSystem<T>, DynamicsError> {
        Ok(HamiltonianSystem {
            name: self.name.clone(),
            algebra: self.algebra.clone(),
            hamiltonian: legendre(&self.lagrangian)?,
            constraints: self.constraints.clone(),
            group: self.group,
        })
    }
}

fn run_loop<T: Real>(
    dt: T,
    t_final: T,
    state0: &ReducedState<T>,
    mut step: impl FnMut(&ReducedState<T>) -> Result<ReducedState<T>, DynamicsError>,
    mut diag: impl FnMut(&ReducedState<T>) -> Result<Diagnostics<T>, DynamicsError>,
) -> Result<Trajectory<T>, IntegrationError<T>> {
    let mut traj = Trajectory::empty(dt);
    let steps = match step_count(t_final, dt) {
        Ok(n) => n,
        Err(cause) => return Err(IntegrationError { cause, partial: traj }),
    };
    traj.states.reserve(steps + 1);
    traj.diagnostics.reserve(steps + 1);
    match diag(state0) {
        Ok(d) => {
            traj.states.push(state0.clone());
            traj.diagnostics.push(d);
        }
        Err(cause) => return Err(IntegrationError { cause, partial: traj }),
    }
    for i in 1..=steps {
        let prev = traj.states.last().expect("at least the initial sample");
        let next = step(prev).and_then(|mut s| {
            s.t = state0.t + dt * T::lit(i as f64);
            diag(&s).map(|d| (s, d))
        });
        match next {
            Ok((s, d)) => {
                traj.states.push(s);
                traj.diagnostics.push(d);
            }
            Err(cause) => return Err(IntegrationError { cause, partial: traj }),
        }
    }
    Ok(traj)
}

/// Hamiltonian-side reduced system.
#[derive(Clone, Debug)]
pub struct HamiltonianSystem<T> {
    pub name: String,
    pub algebra: SemidirectAlgebra<T>,
    pub hamiltonian: HamiltonianSpec<T>,
    pub constraints: ConstraintFamily<T>,
    pub group: Option<GroupKind>,
}

impl<T: Real> HamiltonianSystem<T> {
    /// State with momentum `μ` and `ξ = δh/δμ`.
    pub fn state(&self, mu: &DualVector<T>, a: &DualVector<T>, t: T) -> ReducedState<T> {
        ReducedState { t, xi: self.hamiltonian.dh_dmu(mu, a), mu: mu.clone(), a: a.clone() }
    }

    /// Projected Lie–Poisson–Suslov equations solved for `μ̇`:
    /// `K N λ − G ċ = Ġ c − K F − ∂_a ξ[ȧ]` with `F = ad*_ξ μ − δh/δa ⋄ a`, `K = ∂ξ/∂μ`.
    pub fn lps_rhs(&self, mu: &DualVector<T>, a: &DualVector<T>) -> Result<ExplicitRhs<T>, DynamicsError> {
        let alg = &self.algebra;
        let ham = &self.hamiltonian;
        let fam = &self.constraints;
        let xi = ham.dh_dmu(mu, a);
        let g = fam.generator(a)?;
        let c = least_squares(&g, &xi)?;
        let a_dot = advection_rate(alg, &xi, a);
        let force = &alg.base().ad_star(&xi, mu) - &diamond_or_zero(alg, &ham.dh_da(mu, a), a);
        let nmat = fam.annihilator_generator(a)?;
        let kmat = ham.dxi_dmu(mu, a)?;
        let g_dot = generator_rate(fam, a, &a_dot, &g)?;
        let dxi_a = fd_directional(|b| Ok(ham.dh_dmu(mu, b)), a, &a_dot, |p, q, s| (p - q).scale(s), |x, y| x + y, Vector::zeros(xi.len()))?;
        let n = xi.len();
        let q = nmat.cols();
        let kn = kmat.matmul(&nmat);
        let sys = Matrix::from_fn(n, n, |i, j| if j < q { kn[(i, j)] } else { -g[(i, j - q)] });
        let rhs = &(&g_dot.mul_vec(&c) - &kmat.mul_vec(&force)) - &dxi_a;
        let sol = solve_linear(&sys, &rhs)?;
        let (lambda, c_dot) = sol.split(q);
        let reaction = nmat.mul_vec(&lambda);
        let mu_dot = &force + &reaction;
        let xi_dot = &g_dot.mul_vec(&c) + &g.mul_vec(&c_dot);
        Ok(ExplicitRhs { xi, mu: mu.clone(), c, c_dot, xi_dot, mu_dot, a_dot, reaction })
    }

    pub fn diagnostics(&self, state: &ReducedState<T>, a0_norm: T, tol: T) -> Result<Diagnostics<T>, DynamicsError> {
        self.diagnostics_with(state, a0_norm, tol, self.algebra.is_orthogonal())
    }

    fn diagnostics_with(
        &self,
        state: &ReducedState<T>,
        a0_norm: T,
        tol: T,
        orthogonal: bool,
    ) -> Result<Diagnostics<T>, DynamicsError> {
        let alg = &self.algebra;
        let basis = self.constraints.basis(&state.a)?;
        let rhs = self.lps_rhs(&state.mu, &state.a)?;
        let w = (alg.fiber_dim() > 0).then(|| self.hamiltonian.dh_da(&state.mu, &state.a));
        let beta = match &w {
            Some(w) => alg.diamond(w, &state.a),
            None => Vector::zeros(alg.base_dim()),
        };
        let (reduced, sdp) = certify_point(alg, &basis, state, &rhs, beta, w, tol);
        Ok(finish_diagnostics(
            self.hamiltonian.value(&state.mu, &state.a),
            basis.distance(&state.xi),
            reduced,
            sdp,
            advection_defect(alg, orthogonal, &state.a, a0_norm),
        ))
    }

    /// Midpoint residual in the unknowns `x = (μ₁, d, a₁)`.
    fn midpoint_residual(
        &self,
        s0: &ReducedState<T>,
        cfg: &IntegratorConfig<T>,
        x: &Vector<T>,
    ) -> Result<Vector<T>, DynamicsError> {
        let alg = &self.algebra;
        let ham = &self.hamiltonian;
        let n = alg.base_dim();
        let k = self.constraints.rank();
        let half = T::lit(0.5);
        let (mu1, rest) = x.split(n);
        let (d, a1) = rest.split(k);
        let xi1 = ham.dh_dmu(&mu1, &a1);
        let am = (&s0.a + &a1).scale(half);
        let xim = (&s0.xi + &xi1).scale(half);
        let mum = (&s0.mu + &mu1).scale(half);
        let tb = test_basis(&self.constraints.generator(&am)?, &xim)?;
        let mut force = alg.base().ad_star(&xim, &mum);
        if alg.fiber_dim() > 0 {
            let w = discrete_gradient(ham.dh_da(&mum, &am), ham.value(&mum, &s0.a), ham.value(&mum, &a1), &s0.a, &a1);
            force -= &alg.diamond(&w, &am);
        }
        let momentum = tb.tr_mul_vec(&(&(&mu1 - &s0.mu) - &force.scale(cfg.dt)));
        let velocity = &xi1 - &self.constraints.generator(&a1)?.mul_vec(&d);
        Ok(momentum
            .concat(&velocity)
            .concat(&advection_residual(alg, cfg.advection, cfg.dt, &xim, &s0.a, &a1)))
    }

    pub fn lps_step(&self, state: &ReducedState<T>, cfg: &IntegratorConfig<T>) -> Result<ReducedState<T>, DynamicsError> {
        let n = self.algebra.base_dim();
        let d0 = least_squares(&self.constraints.generator(&state.a)?, &state.xi)?;
        let k = d0.len();
        let scale = T::one() + state.mu.norm_inf() + state.a.norm_inf();
        let out = newton(
            |x| self.midpoint_residual(state, cfg, x),
            state.mu.concat(&d0).concat(&state.a),
            cfg.newton_tol * scale,
            cfg.max_iter,
            state.t,
        )?;
        let (mu1, rest) = out.x.split(n);
        let (_, a1) = rest.split(k);
        Ok(self.state(&mu1, &a1, state.t + cfg.dt))
    }

    pub fn lps_integrate(
        &self,
        state0: &ReducedState<T>,
        t_final: T,
        cfg: &IntegratorConfig<T>,
    ) -> Result<Trajectory<T>, IntegrationError<T>> {
        let orthogonal = self.algebra.is_orthogonal();
        let a0n = state0.a.norm();
        run_loop(
            cfg.dt,
            t_final,
            state0,
            |s| self.lps_step(s, cfg),
            |s| self.diagnostics_with(s, a0n, cfg.dirac_tol, orthogonal),
        )
    }
}

/// `g_{k+1} = g_k · exp(dt (ξ_k + ξ_{k+1})/2)`, re-orthonormalized every 100 steps.
pub fn reconstruct<T: Real>(traj: &Trajectory<T>, g0: &GroupState<T>) -> Result<Vec<GroupState<T>>, DynamicsError> {
    let mut out = Vec::with_capacity(traj.len());
    let Some(first) = traj.states.first() else {
        return Ok(out);
    };
    if first.xi.len() != g0.algebra_dim() {
        return Err(DynamicsError::InvalidArgument("group does not match the algebra".into()));
    }
    out.push(g0.clone());
    let half = T::lit(0.5);
    for (k, w) in traj.states.windows(2).enumerate() {
        let dt = w[1].t - w[0].t;
        let xim = (&w[0].xi + &w[1].xi).scale(half * dt);
        let prev = out.last().expect("non-empty");
        let mut next = prev.compose(&prev.exp_like(&xim));
        if (k + 1) % 100 == 0 {
            next.reorthonormalize();
        }
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liealg::{cross, LieAlgebra};

    fn v(xs: &[f64]) -> Vector<f64> {
        Vector::from_f64(xs)
    }

    fn rigid_body(inertia: [f64; 3], mgl: f64, chi: Vector<f64>) -> ReducedSystem<f64> {
        let im = Matrix::from_diagonal(&inertia);
        let (i1, i2, i3, c1, c2) = (im.clone(), im.clone(), im.clone(), chi.clone(), chi);
        let lag = LagrangianSpec::new(
            3,
            3,
            Arc::new(move |x, a| 0.5 * x.dot(&i1.mul_vec(x)) - mgl * a.dot(&c1)),
            Arc::new(move |x, _| i2.mul_vec(x)),
            Arc::new(move |_, _| c2.scale(-mgl)),
            Some(Arc::new(move |_| i3.clone())),
        )
        .unwrap();
        ReducedSystem::new(
            "top",
            SemidirectAlgebra::so3_r3(),
            lag,
            ConstraintFamily::unconstrained(3),
            Some(GroupKind::So3),
        )
        .unwrap()
    }

    #[test]
    fn step_count_rounding() {
        assert_eq!(step_count(10.0, 1e-3).unwrap(), 10000);
        assert_eq!(step_count(0.0, 1e-3).unwrap(), 0);
        assert_eq!(step_count(1.05, 0.1).unwrap(), 11);
        assert!(step_count(1.0, 0.0).is_err());
        assert!(step_count(-1.0, 0.1).is_err());
    }

    #[test]
    fn bad_derivative_rejected() {
        let r = LagrangianSpec::<f64>::new(
            2,
            0,
            Arc::new(|x, _| 0.5 * x.dot(x)),
            Arc::new(|x, _| x.scale(2.0)),
            Arc::new(|_, _| Vector::zeros(0)),
            None,
        );
        assert!(matches!(r, Err(DynamicsError::DerivativeMismatch { which: "dl_dxi", .. })));
    }

    #[test]
    fn heavy_top_rhs_matches_closed_form() {
        let chi = v(&[0.1, -0.3, 0.9]);
        let sys = rigid_body([1.0, 2.0, 3.0], 0.7, chi.clone());
        let om = v(&[0.4, -0.2, 1.1]);
        let gam = v(&[0.3, 0.5, -0.8]);
        let r = sys.eps_rhs(&om, &gam).unwrap();
        let pi = Matrix::from_diagonal(&[1.0, 2.0, 3.0]).mul_vec(&om);
        let want = &cross(&pi, &om) - &cross(&chi, &gam).scale(0.7);
        assert!((&r.mu_dot - &want).norm() < 1e-13);
        assert!((&r.a_dot - &cross(&gam, &om)).norm() < 1e-15);
        assert!(r.reaction.norm() == 0.0);
    }

    #[test]
    fn zero_velocity_without_force_is_stationary() {
        let sys = rigid_body([1.0, 2.0, 3.0], 0.0, v(&[0.0, 0.0, 1.0]));
        let s0 = sys.state_from_velocity(&Vector::zeros(3), &v(&[0.0, 1.0, 0.0]), 0.0).unwrap();
        let r = sys.eps_rhs_at(&s0).unwrap();
        assert_eq!(r.c_dot.norm(), 0.0);
        let s1 = sys.step(&s0, &IntegratorConfig::new(0.01)).unwrap();
        assert_eq!(s1.distance(&s0), 0.0);
        let h = sys.hamiltonian().unwrap();
        let s1 = h.lps_step(&s0, &IntegratorConfig::new(0.01)).unwrap();
        assert!(s1.distance(&s0) == 0.0);
    }

    #[test]
    fn principal_axis_rotation_is_relative_equilibrium() {
        let sys = rigid_body([1.0, 2.0, 3.0], 0.0, v(&[0.0, 0.0, 1.0]));
        let s0 = sys.state_from_velocity(&v(&[1.0, 0.0, 0.0]), &v(&[0.0, 0.0, 1.0]), 0.0).unwrap();
        let traj = sys.integrate(&s0, 0.5, &IntegratorConfig::new(1e-2)).unwrap();
        assert_eq!(traj.len(), 51);
        for s in &traj.states {
            assert!((&s.xi - &s0.xi).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_horizon_gives_single_sample() {
        let sys = rigid_body([1.0, 2.0, 3.0], 1.0, v(&[0.0, 0.0, 1.0]));
        let s0 = sys.state_from_velocity(&v(&[1.0, 1.0, 0.0]), &v(&[0.0, 0.6, 0.8]), 0.0).unwrap();
        assert_eq!(sys.integrate(&s0, 0.0, &IntegratorConfig::new(1e-2)).unwrap().len(), 1);
    }

    #[test]
    fn midpoint_conserves_energy_and_casimir_and_matches_rk4() {
        let sys = rigid_body([1.0, 2.0, 3.0], 0.5, v(&[0.2, 0.1, 0.97]));
        let g0 = v(&[0.6, 0.0, 0.8]);
        let s0 = sys.state_from_velocity(&v(&[0.3, 1.2, -0.4]), &g0, 0.0).unwrap();
        let cfg = IntegratorConfig::new(1e-3);
        let traj = sys.integrate(&s0, 1.0, &cfg).unwrap();
        assert!(traj.max_energy_drift() < 1e-12, "{}", traj.max_energy_drift());
        assert!(traj.max_advection_residual() < 1e-13);
        assert!(traj.max_dirac_residual() < 1e-12);
        let oracle = sys.oracle_rk4(&s0, 1.0, 1e-4, 10).unwrap();
        assert_eq!(oracle.len(), traj.len());
        let worst = traj.states.iter().zip(&oracle.states).map(|(a, b)| a.distance(b)).fold(0.0, f64::max);
        assert!(worst < 1e-5, "{worst}");
    }

    #[test]
    fn hamiltonian_side_agrees_with_lagrangian_side() {
        let sys = rigid_body([1.0, 2.0, 3.0], 0.5, v(&[0.2, 0.1, 0.97]));
        let s0 = sys.state_from_velocity(&v(&[0.3, 1.2, -0.4]), &v(&[0.6, 0.0, 0.8]), 0.0).unwrap();
        let h = sys.hamiltonian().unwrap();
        let cfg = IntegratorConfig::new(1e-2);
        let lt = sys.integrate(&s0, 1.0, &cfg).unwrap();
        let ht = h.lps_integrate(&s0, 1.0, &cfg).unwrap();
        for (a, b) in lt.states.iter().zip(&ht.states) {
            assert!(a.distance(b) < 1e-10);
        }
        assert!(ht.max_dirac_residual() < 1e-10);
        // free body: coadjoint orbit |Π| preserved
        let free = rigid_body([1.0, 2.0, 3.0], 0.0, v(&[0.0, 0.0, 1.0])).hamiltonian().unwrap();
        let s0 = free.state(&v(&[0.3, 1.2, -0.4]), &v(&[0.0, 0.0, 1.0]), 0.0);
        let tr = free.lps_integrate(&s0, 2.0, &cfg).unwrap();
        for s in &tr.states {
            assert!((s.mu.norm() - s0.mu.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn legendre_examples() {
        let sys = rigid_body([2.0, 2.0, 2.0], 1.5, v(&[0.0, 0.0, 1.0]));
        let h = legendre(&sys.lagrangian).unwrap();
        let mu = v(&[1.0, -2.0, 0.5]);
        let a = v(&[0.0, 0.6, 0.8]);
        assert!((h.value(&mu, &a) - (mu.dot(&mu) / 4.0 + 1.5 * 0.8)).abs() < 1e-14);
        let xi = v(&[0.3, 0.1, -0.2]);
        assert!((&h.dh_dmu(&sys.lagrangian.dl_dxi(&xi, &a), &a) - &xi).norm() < 1e-12);

        let free = LagrangianSpec::<f64>::new(
            3,
            0,
            Arc::new(|x, _| 0.5 * 2.0 * x.dot(x)),
            Arc::new(|x, _| x.scale(2.0)),
            Arc::new(|_, _| Vector::zeros(0)),
            Some(Arc::new(|_| Matrix::from_diagonal(&[2.0, 2.0, 2.0]))),
        )
        .unwrap();
        let h = legendre(&free).unwrap();
        let b = v(&[1.0, 2.0, 3.0]);
        assert!((h.value(&b, &Vector::zeros(0)) - b.dot(&b) / 4.0).abs() < 1e-14);

        let degenerate = LagrangianSpec::<f64>::new(
            2,
            0,
            Arc::new(|x, _| 0.5 * x[0] * x[0]),
            Arc::new(|x, _| v(&[x[0], 0.0])),
            Arc::new(|_, _| Vector::zeros(0)),
            Some(Arc::new(|_| Matrix::from_diagonal(&[1.0, 0.0]))),
        )
        .unwrap();
        assert!(matches!(legendre(&degenerate), Err(DynamicsError::NotHyperregular(_))));
        let no_inertia = LagrangianSpec::<f64>::new(
            1,
            0,
            Arc::new(|x, _| 0.5 * x.dot(x)),
            Arc::new(|x, _| x.clone()),
            Arc::new(|_, _| Vector::zeros(0)),
            None,
        )
        .unwrap();
        assert!(matches!(legendre(&no_inertia), Err(DynamicsError::NotHyperregular(_))));
    }

    #[test]
    fn rk4_self_convergence_is_fourth_order() {
        let sys = rigid_body([1.0, 2.0, 3.0], 0.5, v(&[0.2, 0.1, 0.97]));
        let s0 = sys.state_from_velocity(&v(&[0.3, 1.2, -0.4]), &v(&[0.6, 0.0, 0.8]), 0.0).unwrap();
        let t = 1.0;
        let end = |dt: f64| sys.oracle_rk4(&s0, t, dt, 1_000_000).unwrap().last().unwrap().clone();
        let reference = end(1e-3);
        let e1 = end(0.04).distance(&reference);
        let e2 = end(0.02).distance(&reference);
        let ratio = e1 / e2;
        assert!((ratio / 16.0 - 1.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn reconstruction_examples() {
        let traj = Trajectory {
            dt: 0.1,
            states: (0..11)
                .map(|i| ReducedState { t: 0.1 * i as f64, xi: v(&[0.0, 0.0, 1.0]), mu: Vector::zeros(3), a: Vector::zeros(3) })
                .collect(),
            diagnostics: Vec::new(),
        };
        let gs = reconstruct(&traj, &GroupState::identity_so3()).unwrap();
        let r = gs.last().unwrap().rotation();
        assert!((r[(0, 0)] - 1f64.cos()).abs() < 1e-14 && (r[(1, 0)] - 1f64.sin()).abs() < 1e-14);

        let still = Trajectory { states: traj.states.iter().map(|s| ReducedState { xi: Vector::zeros(3), ..s.clone() }).collect(), ..traj };
        let gs = reconstruct(&still, &GroupState::identity_so3()).unwrap();
        assert!(gs.iter().all(|g| g.rotation() == &Matrix::identity(3)));
    }

    #[test]
    fn suslov_constraint_enforced_and_isotropic_body_keeps_velocity() {
        let lag = |c: f64| {
            LagrangianSpec::<f64>::new(
                3,
                0,
                Arc::new(move |x, _| 0.5 * c * x.dot(x)),
                Arc::new(move |x, _| x.scale(c)),
                Arc::new(|_, _| Vector::zeros(0)),
                Some(Arc::new(move |_| Matrix::from_diagonal(&[c, c, c]))),
            )
            .unwrap()
        };
        let fam = ConstraintFamily::suslov(3, vec![v(&[0.0, 0.0, 1.0])]).unwrap();
        let sys = ReducedSystem::new("s", SemidirectAlgebra::trivial(LieAlgebra::so3()), lag(2.0), fam, None).unwrap();
        let s0 = sys.state_from_velocity(&v(&[0.5, -1.0, 3.0]), &Vector::zeros(0), 0.0).unwrap();
        assert_eq!(s0.xi[2], 0.0);
        let traj = sys.integrate(&s0, 1.0, &IntegratorConfig::new(1e-2)).unwrap();
        for s in &traj.states {
            assert_eq!(s.xi[2], 0.0);
            assert!((&s.xi - &s0.xi).norm() < 1e-13);
        }
    }
}
