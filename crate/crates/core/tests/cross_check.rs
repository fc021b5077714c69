//! The oscillation solver against the general moment solver on the same
//! equation, restarted at t = s from a law with E X_s^2 = 1.

use switchsde::model::InitialLaw;
use switchsde::moment::{solve_moment_equation, VerdictKind};
use switchsde::oscillation::{band_grid, dyadic, kappa, OscillationSchedule};

#[test]
fn delayed_solver_agrees_with_moment_solver() {
    let schedule = OscillationSchedule::new(0.01).unwrap();
    for s in band_grid(2..=6, 7) {
        let k = kappa(s).unwrap();
        let dt = dyadic::delta(k) / 64.0;
        let mean = (1.0 - s).sqrt();
        let mut spec = schedule.to_spec();
        spec.initial = InitialLaw::Gaussian { mean: vec![mean], variance: vec![1.0 - mean * mean] };

        let delayed = schedule.solve_delayed_equation(s, dt).unwrap();
        let m = delayed.m_numeric.expect("collapse before t = 1");
        let (_, verdict) = solve_moment_equation(&spec, s, 0.98, dt).unwrap();
        let t = match verdict.kind {
            VerdictKind::NoSolutionAt { t, .. } => t,
            other => panic!("s = {s}: {other:?}"),
        };
        assert!((t - m).abs() <= 2.0 * dt, "s = {s}: moment solver {t}, delayed solver {m}");
        assert!((t - schedule.m_of_s_caseformula(s).unwrap()).abs() <= 2.0 * dt);
    }
}
