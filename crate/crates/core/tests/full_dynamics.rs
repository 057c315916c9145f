use wchain::full_dynamics::{
    compare_system, evolve, run_system, FullState, FullSystem, RunOptions,
};
use wchain::ode::Tolerance;
use wchain::sweep::{default_oracle_velocity, OraclePreset};
use wchain::{ChainSpec, PhysicalParams};

// Deep-regime pair fast enough that the run stays near 2e4 steps; global
// errors grow with the step count, see the oracle acceptance run for 1e6.
fn quick_pair() -> FullSystem {
    let p = PhysicalParams::new(1.0, 1.0, 1.0, 8.0, 15.0).unwrap();
    FullSystem::from_chain(&p, &ChainSpec::uniform(2, 40.0, 0.5).unwrap()).unwrap()
}

#[test]
fn norm_conserved_along_trajectory() {
    let tol = Tolerance::default();
    let run = run_system(&quick_pair(), tol, &RunOptions::default()).unwrap();
    assert!(
        run.max_norm_error <= 10.0 * tol.rtol,
        "{:e}",
        run.max_norm_error
    );
}

#[test]
fn halving_tolerance_converges() {
    let sys = quick_pair();
    let coarse = Tolerance::default();
    let a = run_system(&sys, coarse, &RunOptions::default())
        .unwrap()
        .state;
    let b = run_system(&sys, coarse.scaled(0.5), &RunOptions::default())
        .unwrap()
        .state;
    let diff = a
        .populations_row()
        .iter()
        .zip(b.populations_row())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(diff < coarse.rtol, "{diff:e}");
}

#[test]
fn time_reversal_recovers_initial_state() {
    let sys = quick_pair();
    let tol = Tolerance::default();
    let (t0, t1) = sys.window();
    let start = FullState::initial(2, t0);
    let mid = evolve(&sys, &start, 0.5 * (t0 + t1), tol, &RunOptions::default()).unwrap();
    let back = evolve(&sys, &mid.state, t0, tol, &RunOptions::default()).unwrap();
    let dist = start
        .to_vec()
        .iter()
        .zip(back.state.to_vec())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    assert!(dist <= 100.0 * tol.rtol, "{dist:e}");
}

#[test]
fn shallow_regime_is_worse_than_deep() {
    let v = default_oracle_velocity(2, 0.5).unwrap();
    let gap = |preset: OraclePreset| {
        let sys = preset.system(2, v, 0.5).unwrap();
        compare_system(
            &sys,
            Tolerance::relative(1e-8).unwrap(),
            &RunOptions::default(),
        )
        .unwrap()
        .0
        .population_gap
    };
    let (deep, shallow) = (gap(OraclePreset::Deep), gap(OraclePreset::Shallow));
    assert!(shallow > deep);
}
