use nhdirac::dynamics::IntegratorConfig;
use nhdirac::models::{heavy_top, suslov_top, HeavyTopParams, SuslovParams};
use nhdirac::ReducedSystem32;

#[test]
fn heavy_top_runs_in_f32() {
    let p = HeavyTopParams::<f32>::default();
    let sys: ReducedSystem32 = heavy_top(&p).unwrap();
    let s0 = p.initial_state(&sys).unwrap();
    let traj = sys.integrate(&s0, 1.0, &IntegratorConfig::new(1e-2)).unwrap();
    assert_eq!(traj.len(), 101);
    assert!(traj.max_energy_drift() < 1e-4, "{}", traj.max_energy_drift());
    assert!(traj.max_advection_residual() < 1e-4);
}

#[test]
fn suslov_constraint_is_exact_in_f32() {
    let p = SuslovParams::<f32>::default();
    let sys = suslov_top(&p).unwrap();
    let traj = sys.integrate(&p.initial_state(&sys).unwrap(), 1.0, &IntegratorConfig::new(1e-2)).unwrap();
    assert!(traj.states.iter().all(|s| s.xi.dot(&p.normal) == 0.0));
}
