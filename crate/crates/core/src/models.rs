//! Built-in reduced systems: heavy top, Suslov top, Chaplygin ball and
//! sphere, Euler disk.

use std::sync::Arc;

use thiserror::Error;

use crate::constraints::{euler_disk_contact, ConstraintError, ConstraintFamily};
use crate::dynamics::{DynamicsError, ExplicitRhs, GroupKind, LagrangianSpec, ReducedState, ReducedSystem};
use crate::liealg::{cross, LieAlgebra, SemidirectAlgebra};
use crate::linalg::{cholesky, Matrix, Vector};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

impl From<ConstraintError> for ModelError {
    fn from(e: ConstraintError) -> Self {
        ModelError::Dynamics(e.into())
    }
}

pub const MODEL_NAMES: [&str; 5] = ["heavy_top", "suslov_top", "chaplygin_ball", "chaplygin_sphere", "euler_disk"];

const UNIT_TOL: f64 = 1e-9;

fn check_inertia<T: Real>(m: &Matrix<T>) -> Result<(), ModelError> {
    if m.rows() != 3 || m.cols() != 3 {
        return Err(ModelError::InvalidParams("inertia must be 3×3".into()));
    }
    cholesky(m).map(|_| ()).map_err(|_| ModelError::InvalidParams("inertia must be symmetric positive definite".into()))
}

fn check_vec3<T: Real>(name: &str, v: &Vector<T>) -> Result<(), ModelError> {
    if v.len() != 3 || !v.is_finite() {
        return Err(ModelError::InvalidParams(format!("{name} must be a finite 3-vector")));
    }
    Ok(())
}

fn check_unit<T: Real>(name: &str, v: &Vector<T>) -> Result<(), ModelError> {
    check_vec3(name, v)?;
    if (v.norm() - T::one()).abs() > T::lit(UNIT_TOL) {
        return Err(ModelError::InvalidParams(format!("{name} must be a unit vector (|{name}| = {})", v.norm())));
    }
    Ok(())
}

fn check_scalar<T: Real>(name: &str, x: T, positive: bool) -> Result<(), ModelError> {
    if !x.is_finite() || x < T::zero() || (positive && x == T::zero()) {
        let want = if positive { "positive" } else { "non-negative" };
        return Err(ModelError::InvalidParams(format!("{name} must be {want}, got {x}")));
    }
    Ok(())
}

fn block_inertia<T: Real>(i: &Matrix<T>, m: T) -> Matrix<T> {
    Matrix::from_fn(6, 6, |r, c| match (r < 3, c < 3) {
        (true, true) => i[(r, c)],
        (false, false) if r == c => m,
        _ => T::zero(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeavyTopParams<T> {
    pub inertia: Matrix<T>,
    pub mass: T,
    pub gravity: T,
    pub length: T,
    /// Body-frame unit vector from the fixed point to the center of mass.
    pub chi: Vector<T>,
    pub gamma0: Vector<T>,
    pub omega0: Vector<T>,
}

impl<T: Real> Default for HeavyTopParams<T> {
    fn default() -> Self {
        let th = 0.3f64;
        Self {
            inertia: Matrix::from_diagonal(&[T::lit(2.0), T::lit(2.5), T::lit(1.0)]),
            mass: T::one(),
            gravity: T::lit(9.81),
            length: T::lit(0.2),
            chi: Vector::unit(3, 2),
            gamma0: Vector::from_f64(&[0.0, th.sin(), th.cos()]),
            omega0: Vector::from_f64(&[0.2, -0.1, 5.0]),
        }
    }
}

impl<T: Real> HeavyTopParams<T> {
    pub fn validate(&self) -> Result<(), ModelError> {
        check_inertia(&self.inertia)?;
        check_scalar("mass", self.mass, true)?;
        check_scalar("gravity", self.gravity, false)?;
        check_scalar("length", self.length, false)?;
        check_unit("chi", &self.chi)?;
        check_unit("gamma0", &self.gamma0)?;
        check_vec3("omega0", &self.omega0)
    }

    /// The single gravity coefficient `m g l`.
    pub fn mgl(&self) -> T {
        self.mass * self.gravity * self.length
    }

    pub fn initial_state(&self, sys: &ReducedSystem<T>) -> Result<ReducedState<T>, ModelError> {
        Ok(sys.state_from_velocity(&self.omega0, &self.gamma0, T::zero())?)
    }
}

/// `ℓ(Ω, Γ) = ½ Ω·IΩ − mgl Γ·χ` on `so(3) ⋉ R³`, unconstrained.
pub fn heavy_top<T: Real>(p: &HeavyTopParams<T>) -> Result<ReducedSystem<T>, ModelError> {
    p.validate()?;
    let mgl = p.mgl();
    let (i1, i2, i3) = (p.inertia.clone(), p.inertia.clone(), p.inertia.clone());
    let (c1, c2) = (p.chi.clone(), p.chi.clone());
    let half = T::lit(0.5);
    let lag = LagrangianSpec::new(
        3,
        3,
        Arc::new(move |x, a| half * x.dot(&i1.mul_vec(x)) - mgl * a.dot(&c1)),
        Arc::new(move |x, _| i2.mul_vec(x)),
        Arc::new(move |_, _| c2.scale(-mgl)),
        Some(Arc::new(move |_| i3.clone())),
    )?;
    Ok(ReducedSystem::new(
        "heavy_top",
        SemidirectAlgebra::so3_r3(),
        lag,
        ConstraintFamily::unconstrained(3),
        Some(GroupKind::So3),
    )?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuslovParams<T> {
    pub inertia: Matrix<T>,
    /// Body-frame unit normal `e` of the constraint `Ω·e = 0`.
    pub normal: Vector<T>,
    pub omega0: Vector<T>,
}

impl<T: Real> Default for SuslovParams<T> {
    fn default() -> Self {
        Self {
            inertia: Matrix::from_diagonal(&[T::one(), T::lit(2.0), T::lit(3.0)]),
            normal: Vector::unit(3, 2),
            omega0: Vector::from_f64(&[1.0, 0.5, 0.0]),
        }
    }
}

impl<T: Real> SuslovParams<T> {
    pub fn validate(&self) -> Result<(), ModelError> {
        check_inertia(&self.inertia)?;
        check_unit("normal", &self.normal)?;
        check_vec3("omega0", &self.omega0)
    }

    /// Projects `omega0` onto the constraint plane.
    pub fn initial_state(&self, sys: &ReducedSystem<T>) -> Result<ReducedState<T>, ModelError> {
        Ok(sys.state_from_velocity(&self.omega0, &Vector::zeros(0), T::zero())?)
    }
}

/// `ℓ(Ω) = ½ Ω·IΩ` on `so(3)` with `g^Δ = {Ω : Ω·e = 0}`.
pub fn suslov_top<T: Real>(p: &SuslovParams<T>) -> Result<ReducedSystem<T>, ModelError> {
    p.validate()?;
    let (i1, i2, i3) = (p.inertia.clone(), p.inertia.clone(), p.inertia.clone());
    let half = T::lit(0.5);
    let lag = LagrangianSpec::new(
        3,
        0,
        Arc::new(move |x, _| half * x.dot(&i1.mul_vec(x))),
        Arc::new(move |x, _| i2.mul_vec(x)),
        Arc::new(|_, _| Vector::zeros(0)),
        Some(Arc::new(move |_| i3.clone())),
    )?;
    let fam = ConstraintFamily::suslov(3, vec![p.normal.clone()])?;
    Ok(ReducedSystem::new("suslov_top", SemidirectAlgebra::trivial(LieAlgebra::so3()), lag, fam, Some(GroupKind::So3))?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChaplyginBallParams<T> {
    pub inertia: Matrix<T>,
    pub mass: T,
    pub gravity: T,
    pub radius: T,
    /// Distance `l` from the geometric center to the center of mass.
    pub offset: T,
    pub chi: Vector<T>,
    pub gamma0: Vector<T>,
    pub omega0: Vector<T>,
}

impl<T: Real> Default for ChaplyginBallParams<T> {
    fn default() -> Self {
        Self {
            inertia: Matrix::from_diagonal(&[T::lit(0.8), T::one(), T::lit(1.2)]),
            mass: T::one(),
            gravity: T::lit(9.81),
            radius: T::one(),
            offset: T::lit(0.2),
            chi: Vector::unit(3, 2),
            gamma0: Vector::from_f64(&[0.0, 0.6, 0.8]),
            omega0: Vector::from_f64(&[1.0, -0.5, 2.0]),
        }
    }
}

impl<T: Real> ChaplyginBallParams<T> {
    pub fn validate(&self) -> Result<(), ModelError> {
        check_inertia(&self.inertia)?;
        check_scalar("mass", self.mass, true)?;
        check_scalar("gravity", self.gravity, false)?;
        check_scalar("radius", self.radius, true)?;
        check_scalar("offset", self.offset, false)?;
        check_unit("chi", &self.chi)?;
        check_unit("gamma0", &self.gamma0)?;
        check_vec3("omega0", &self.omega0)
    }

    /// `φ(Γ) = rΓ + lχ`.
    pub fn phi(&self, gamma: &Vector<T>) -> Vector<T> {
        &gamma.scale(self.radius) + &self.chi.scale(self.offset)
    }

    /// Rolling start with body angular velocity `omega0`, so `X = Ω × φ(Γ₀)`.
    pub fn initial_state(&self, sys: &ReducedSystem<T>) -> Result<ReducedState<T>, ModelError> {
        Ok(sys.state_from_coordinates(&self.omega0, &self.gamma0, T::zero())?)
    }
}

fn rolling_lagrangian<T: Real>(
    inertia: &Matrix<T>,
    mass: T,
    potential: Arc<dyn Fn(&Vector<T>) -> T + Send + Sync>,
    potential_grad: Arc<dyn Fn(&Vector<T>) -> Vector<T> + Send + Sync>,
) -> Result<LagrangianSpec<T>, DynamicsError> {
    let big = block_inertia(inertia, mass);
    let (m1, m2, m3) = (big.clone(), big.clone(), big);
    let half = T::lit(0.5);
    LagrangianSpec::new(
        6,
        3,
        Arc::new(move |x, a| half * x.dot(&m1.mul_vec(x)) - potential(a)),
        Arc::new(move |x, _| m2.mul_vec(x)),
        Arc::new(move |_, a| -potential_grad(a)),
        Some(Arc::new(move |_| m3.clone())),
    )
}

/// `ℓ(Ω, X, Γ) = ½ Ω·IΩ + ½ m|X|² − mgl Γ·χ` on `se(3)` with advected `Γ` and
/// rolling constraint `X = Ω × (rΓ + lχ)`.
pub fn chaplygin_ball<T: Real>(p: &ChaplyginBallParams<T>) -> Result<ReducedSystem<T>, ModelError> {
    build_chaplygin(p, "chaplygin_ball")
}

/// The ball with its center of mass at the geometric center (`l = 0`).
pub fn chaplygin_sphere<T: Real>(p: &ChaplyginBallParams<T>) -> Result<ReducedSystem<T>, ModelError> {
    let p = ChaplyginBallParams { offset: T::zero(), ..p.clone() };
    build_chaplygin(&p, "chaplygin_sphere")
}

fn build_chaplygin<T: Real>(p: &ChaplyginBallParams<T>, name: &str) -> Result<ReducedSystem<T>, ModelError> {
    p.validate()?;
    let mgl = p.mass * p.gravity * p.offset;
    let (c1, c2, c3) = (p.chi.clone(), p.chi.clone(), p.chi.clone());
    let lag = rolling_lagrangian(
        &p.inertia,
        p.mass,
        Arc::new(move |a| mgl * a.dot(&c1)),
        Arc::new(move |_| c2.scale(mgl)),
    )?;
    let (r, l) = (p.radius, p.offset);
    let fam = ConstraintFamily::type_ii(
        SemidirectAlgebra::so3_r3(),
        Arc::new(move |g: &Vector<T>| Ok(&g.scale(r) + &c3.scale(l))),
    );
    Ok(ReducedSystem::new(name, SemidirectAlgebra::se3_r3(), lag, fam, Some(GroupKind::Se3))?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EulerDiskParams<T> {
    /// Defaults to the homogeneous flat disk `diag(mr²/4, mr²/4, mr²/2)`.
    pub inertia: Option<Matrix<T>>,
    pub mass: T,
    pub gravity: T,
    pub radius: T,
    /// Body-frame unit normal `E3` of the disk.
    pub e3: Vector<T>,
    pub gamma0: Vector<T>,
    pub omega0: Vector<T>,
}

impl<T: Real> Default for EulerDiskParams<T> {
    fn default() -> Self {
        let tilt = 0.3f64;
        Self {
            inertia: None,
            mass: T::one(),
            gravity: T::lit(9.81),
            radius: T::lit(0.5),
            e3: Vector::unit(3, 2),
            gamma0: Vector::from_f64(&[tilt.cos(), 0.0, tilt.sin()]),
            omega0: Vector::from_f64(&[0.5, 0.0, 8.0]),
        }
    }
}

impl<T: Real> EulerDiskParams<T> {
    pub fn validate(&self) -> Result<(), ModelError> {
        if let Some(i) = &self.inertia {
            check_inertia(i)?;
        }
        check_scalar("mass", self.mass, true)?;
        check_scalar("gravity", self.gravity, false)?;
        check_scalar("radius", self.radius, true)?;
        check_unit("e3", &self.e3)?;
        check_unit("gamma0", &self.gamma0)?;
        check_vec3("omega0", &self.omega0)
    }

    pub fn inertia(&self) -> Matrix<T> {
        self.inertia.clone().unwrap_or_else(|| {
            let q = self.mass * self.radius * self.radius / T::lit(4.0);
            Matrix::from_diagonal(&[q, q, q + q])
        })
    }

    /// `s(Γ)`, the body vector from the contact point to the center.
    pub fn contact(&self, gamma: &Vector<T>) -> Result<Vector<T>, ConstraintError> {
        euler_disk_contact(gamma, self.radius, &self.e3)
    }

    /// Rolling start; fails with `SingularContact` when the disk lies flat.
    pub fn initial_state(&self, sys: &ReducedSystem<T>) -> Result<ReducedState<T>, ModelError> {
        Ok(sys.state_from_coordinates(&self.omega0, &self.gamma0, T::zero())?)
    }
}

/// `ℓ = ½ Ω·IΩ + ½ m|X|² − mg Γ·s(Γ)` with rolling constraint `X = Ω × s(Γ)`.
pub fn euler_disk<T: Real>(p: &EulerDiskParams<T>) -> Result<ReducedSystem<T>, ModelError> {
    p.validate()?;
    let mg = p.mass * p.gravity;
    let (r, e3) = (p.radius, p.e3.clone());
    let nan3 = || Vector::from_fn(3, |_| T::nan());
    let (e1, e2, e3c) = (e3.clone(), e3.clone(), e3);
    let lag = rolling_lagrangian(
        &p.inertia(),
        p.mass,
        Arc::new(move |a| euler_disk_contact(a, r, &e1).map(|s| mg * a.dot(&s)).unwrap_or_else(|_| T::nan())),
        Arc::new(move |a| euler_disk_contact(a, r, &e2).map(|s| s.scale(mg)).unwrap_or_else(|_| nan3())),
    )?;
    let fam = ConstraintFamily::type_ii(
        SemidirectAlgebra::so3_r3(),
        Arc::new(move |g: &Vector<T>| euler_disk_contact(g, r, &e3c)),
    );
    Ok(ReducedSystem::new("euler_disk", SemidirectAlgebra::se3_r3(), lag, fam, Some(GroupKind::Se3))?)
}

/// Residual of `(∂t + Ω×)(IΩ + φ×mX) = w×Γ + φ̇×mX` along a rolling state, with
/// `X = Ω×φ`. Also folds in `|X − Ω×φ|` for the stored translational velocity.
fn rolling_closed_form<T: Real>(
    inertia: &Matrix<T>,
    mass: T,
    state: &ReducedState<T>,
    rhs: &ExplicitRhs<T>,
    phi: &Vector<T>,
    phi_dot: &Vector<T>,
    w: &Vector<T>,
) -> T {
    let (om, x_state) = state.xi.split(3);
    let (om_dot, _) = rhs.xi_dot.split(3);
    let gamma = &state.a;
    let x = cross(&om, phi);
    let x_dot = &cross(&om_dot, phi) + &cross(&om, phi_dot);
    let mx = x.scale(mass);
    let k = &inertia.mul_vec(&om) + &cross(phi, &mx);
    let k_dot = &(&inertia.mul_vec(&om_dot) + &cross(phi_dot, &mx)) + &cross(phi, &x_dot.scale(mass));
    let lhs = &k_dot + &cross(&om, &k);
    let rhs_v = &cross(w, gamma) + &cross(phi_dot, &mx);
    (&lhs - &rhs_v).norm().max((&x_state - &x).norm())
}

/// Chaplygin ball equation `(∂t + Ω×)(IΩ + φ×mX) = −mgl χ×Γ + ∂tφ×mX` with
/// `∂tφ = −rΩ×Γ`, evaluated with the generic vector field `rhs` at `state`.
pub fn chaplygin_closed_form_residual<T: Real>(p: &ChaplyginBallParams<T>, state: &ReducedState<T>, rhs: &ExplicitRhs<T>) -> T {
    let (om, _) = state.xi.split(3);
    let gamma = &state.a;
    let phi = p.phi(gamma);
    let phi_dot = cross(&om, gamma).scale(-p.radius);
    let w = p.chi.scale(-p.mass * p.gravity * p.offset);
    rolling_closed_form(&p.inertia, p.mass, state, rhs, &phi, &phi_dot, &w)
}

/// Euler disk equation `(∂t + Ω×)(IΩ + s×mX) = −mg s×Γ + ṡ×mX`.
pub fn euler_disk_closed_form_residual<T: Real>(
    p: &EulerDiskParams<T>,
    state: &ReducedState<T>,
    rhs: &ExplicitRhs<T>,
) -> Result<T, ConstraintError> {
    let gamma = &state.a;
    let s = p.contact(gamma)?;
    let e3 = &p.e3;
    let pv = gamma - &e3.scale(e3.dot(gamma));
    let pn = pv.norm();
    let ph = pv.scale(T::one() / pn);
    let g_dot = &rhs.a_dot;
    let p_dot = g_dot - &e3.scale(e3.dot(g_dot));
    let s_dot = (&p_dot - &ph.scale(ph.dot(&p_dot))).scale(p.radius / pn);
    let w = s.scale(-p.mass * p.gravity);
    Ok(rolling_closed_form(&p.inertia(), p.mass, state, rhs, &s, &s_dot, &w))
}

/// Parameters of any built-in model.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams<T> {
    HeavyTop(HeavyTopParams<T>),
    SuslovTop(SuslovParams<T>),
    ChaplyginBall(ChaplyginBallParams<T>),
    ChaplyginSphere(ChaplyginBallParams<T>),
    EulerDisk(EulerDiskParams<T>),
}

impl<T: Real> ModelParams<T> {
    /// Default parameters of the model called `name`.
    pub fn default_for(name: &str) -> Result<Self, ModelError> {
        Ok(match name {
            "heavy_top" => ModelParams::HeavyTop(Default::default()),
            "suslov_top" => ModelParams::SuslovTop(Default::default()),
            "chaplygin_ball" => ModelParams::ChaplyginBall(Default::default()),
            "chaplygin_sphere" => ModelParams::ChaplyginSphere(ChaplyginBallParams { offset: T::zero(), ..Default::default() }),
            "euler_disk" => ModelParams::EulerDisk(Default::default()),
            other => return Err(ModelError::UnknownModel(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelParams::HeavyTop(_) => "heavy_top",
            ModelParams::SuslovTop(_) => "suslov_top",
            ModelParams::ChaplyginBall(_) => "chaplygin_ball",
            ModelParams::ChaplyginSphere(_) => "chaplygin_sphere",
            ModelParams::EulerDisk(_) => "euler_disk",
        }
    }

    pub fn system(&self) -> Result<ReducedSystem<T>, ModelError> {
        match self {
            ModelParams::HeavyTop(p) => heavy_top(p),
            ModelParams::SuslovTop(p) => suslov_top(p),
            ModelParams::ChaplyginBall(p) => chaplygin_ball(p),
            ModelParams::ChaplyginSphere(p) => chaplygin_sphere(p),
            ModelParams::EulerDisk(p) => euler_disk(p),
        }
    }

    pub fn initial_state(&self, sys: &ReducedSystem<T>) -> Result<ReducedState<T>, ModelError> {
        match self {
            ModelParams::HeavyTop(p) => p.initial_state(sys),
            ModelParams::SuslovTop(p) => p.initial_state(sys),
            ModelParams::ChaplyginBall(p) | ModelParams::ChaplyginSphere(p) => p.initial_state(sys),
            ModelParams::EulerDisk(p) => p.initial_state(sys),
        }
    }
}

/// Human-readable summary of a built-in model: algebra, parameters, equations.
pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "heavy_top" => HEAVY_TOP,
        "suslov_top" => SUSLOV_TOP,
        "chaplygin_ball" => CHAPLYGIN_BALL,
        "chaplygin_sphere" => CHAPLYGIN_SPHERE,
        "euler_disk" => EULER_DISK,
        _ => return None,
    })
}

const HEAVY_TOP: &str = "\
heavy_top: rigid body about a fixed point in a gravity field
  algebra      so(3) ⋉ R³, advected Γ (vertical in the body frame), unconstrained
  lagrangian   ℓ(Ω, Γ) = ½ Ω·IΩ − mgl Γ·χ
  equations    Π = IΩ,  Π̇ = Π×Ω − mgl χ×Γ,  Γ̇ = Γ×Ω
  energy       ½ Ω·IΩ + mgl Γ·χ
  params       inertia (3 diagonal entries or 3×3), mass, gravity, length,
               chi (unit), gamma0 (unit), omega0
";

const SUSLOV_TOP: &str = "\
suslov_top: free rigid body with a linear constraint on the body angular velocity
  algebra      so(3), no advected parameter
  constraint   Ω·e = 0
  lagrangian   ℓ(Ω) = ½ Ω·IΩ
  equations    Π = IΩ,  Π̇ − Π×Ω = λ e,  Ω·e = 0
  params       inertia, normal (unit e), omega0 (projected onto Ω·e = 0)
";

const CHAPLYGIN_BALL: &str = "\
chaplygin_ball: unbalanced ball rolling without slipping on a plane
  algebra      se(3) ⋉ R³ with rotation-only action on the advected Γ
  constraint   X = Ω × φ(Γ),  φ(Γ) = rΓ + lχ
  lagrangian   ℓ(Ω, X, Γ) = ½ Ω·IΩ + ½ m|X|² − mgl Γ·χ
  equations    (∂t + Ω×)(IΩ + φ×mX) = −mgl χ×Γ + ∂tφ×mX,  ∂tφ = −rΩ×Γ,  Γ̇ = Γ×Ω
  params       inertia, mass, gravity, radius, offset (l), chi (unit), gamma0 (unit),
               omega0 (the rolling start sets X = Ω×φ)
";

const CHAPLYGIN_SPHERE: &str = "\
chaplygin_sphere: balanced ball (center of mass at the geometric center) rolling on a plane
  algebra      se(3) ⋉ R³ with rotation-only action on the advected Γ
  constraint   X = rΩ × Γ
  lagrangian   ℓ(Ω, X) = ½ Ω·IΩ + ½ m|X|²
  equations    (∂t + Ω×)(IΩ + rΓ×mX) = (−rΩ×Γ)×mX,  Γ̇ = Γ×Ω
  params       as chaplygin_ball; offset is ignored
";

const EULER_DISK: &str = "\
euler_disk: thin disk rolling without slipping on a plane
  algebra      se(3) ⋉ R³ with rotation-only action on the advected Γ
  contact      s(Γ) = r E3×(Γ×E3) / |E3×(Γ×E3)|, undefined when the disk lies flat
  constraint   X = Ω × s(Γ)
  lagrangian   ℓ(Ω, X, Γ) = ½ Ω·IΩ + ½ m|X|² − mg Γ·s(Γ)
  equations    (∂t + Ω×)(IΩ + s×mX) = −mg s×Γ + ṡ×mX,  Γ̇ = Γ×Ω
  params       inertia (default flat disk diag(mr²/4, mr²/4, mr²/2)), mass, gravity,
               radius, e3 (unit), gamma0 (unit, not parallel to e3), omega0
";
