use switchsde::model::{Diffusion, DiffusionFamily, Drift, EquationSpec, InitialLaw};
use switchsde::presets;
use switchsde::simulate::{continue_run, run, SimConfig};

/// Two-dimensional spec with a drift and state-linear noise, so every code
/// path of the particle step is exercised.
fn busy_spec() -> EquationSpec {
    let mut spec = presets::non_unique(0.5);
    spec.dim = 2;
    spec.z = vec![0.0, 0.0];
    spec.coefficients.drift = Drift::Constant { value: vec![0.3, -0.2] };
    spec.coefficients.diffusion =
        DiffusionFamily::per_regime(vec![Diffusion::Linear { scale: 0.7 }, Diffusion::scalar(0.4)]);
    spec.initial = InitialLaw::Gaussian { mean: vec![1.0, 0.5], variance: vec![0.2, 0.1] };
    spec
}

fn cfg(threads: Option<usize>) -> SimConfig {
    SimConfig { threads, ..SimConfig::new(5000, 1e-2, 1.0, 99) }
}

#[test]
fn csv_is_identical_across_thread_counts() {
    let spec = busy_spec();
    let (reference, ens) = run(&spec, &cfg(Some(1))).unwrap();
    let csv = reference.to_csv(false);
    for threads in [Some(2), Some(3), Some(8), None] {
        let (curve, e) = run(&spec, &cfg(threads)).unwrap();
        assert_eq!(curve.to_csv(false), csv, "threads = {threads:?}");
        assert_eq!(e.positions, ens.positions);
    }
}

#[test]
fn antithetic_runs_are_thread_independent() {
    let spec = busy_spec();
    let runs: Vec<String> = [1, 4]
        .into_iter()
        .map(|t| run(&spec, &SimConfig { antithetic: true, ..cfg(Some(t)) }).unwrap().0.to_csv(false))
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn seeds_matter() {
    let spec = busy_spec();
    let a = run(&spec, &cfg(Some(1))).unwrap().0;
    let b = run(&spec, &SimConfig { seed: 100, ..cfg(Some(1)) }).unwrap().0;
    assert_ne!(a.g_values, b.g_values);
}

#[test]
fn continuing_matches_a_single_run() {
    let spec = busy_spec();
    let (_, whole) = run(&spec, &SimConfig { horizon: 2.0, ..cfg(Some(2)) }).unwrap();
    let (_, mut ens) = run(&spec, &cfg(Some(3))).unwrap();
    continue_run(&spec, &cfg(Some(1)), &mut ens).unwrap();
    assert_eq!(ens.positions, whole.positions);
    assert_eq!(ens.t, whole.t);
}
