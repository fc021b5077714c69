use proptest::prelude::*;

use switchsde::lifetime::{
    classify_series, construct_lifetime, crossing_times_example26, Classification, Criterion, Engine, LifetimeVerdict,
    SeriesSpec,
};
use switchsde::metrics::{coupling_inequality_check, wasserstein_1d, EmpiricalSample};
use switchsde::model::{
    Constants, Diffusion, DiffusionFamily, Drift, EquationSpec, InitialLaw, RegimeBound, RegimeCoefficients,
    ThresholdPartition, ThresholdRule,
};
use switchsde::moment::{regime_moment_functions, solve_moment_equation, verify_windows, VerdictKind};
use switchsde::oscillation::{dyadic, kappa, OscillationSchedule};
use switchsde::presets;
use switchsde::rng::{CounterRng, Domain};
use switchsde::simulate::{run, SimConfig};
use switchsde::MomentCurve;

fn two_regime(b: f64, s1: f64, s2: f64, x0: f64) -> EquationSpec {
    EquationSpec {
        name: None,
        p: 2.0,
        dim: 1,
        z: vec![0.0],
        partition: ThresholdPartition::two_regime(1.0),
        coefficients: RegimeCoefficients::new(
            Drift::Constant { value: vec![b] },
            DiffusionFamily::per_regime(vec![Diffusion::scalar(s1), Diffusion::scalar(s2)]),
        ),
        initial: InitialLaw::dirac(vec![x0]),
    }
}

fn sample(v: Vec<f64>) -> EmpiricalSample {
    EmpiricalSample::scalar(v).unwrap()
}

/// The curve with point-cell crossings dropped.
fn without_atoms(mut c: MomentCurve, first_atom_label: usize) -> MomentCurve {
    c.crossings.retain(|x| x.threshold < first_atom_label);
    c
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn cell_of_is_monotone(values in prop::collection::btree_set(1u32..10_000, 1..8), a in 0.0f64..12.0, b in 0.0f64..12.0) {
        let y: Vec<f64> = values.iter().map(|&v| v as f64 / 1000.0).collect();
        let p = ThresholdPartition::new(ThresholdRule::Explicit { values: y.clone() });
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(p.cell_of(lo) <= p.cell_of(hi));
        for (k, &yk) in y.iter().enumerate() {
            prop_assert_eq!(p.cell_of(yk), k + 2);
            prop_assert_eq!(p.clone().with_lower_boundary(k + 1).cell_of(yk), k + 1);
        }
    }

    #[test]
    fn wasserstein_is_a_metric(
        (a, b, c) in (1usize..40).prop_flat_map(|n| (
            prop::collection::vec(-50.0f64..50.0, n),
            prop::collection::vec(-50.0f64..50.0, n),
            prop::collection::vec(-50.0f64..50.0, n),
        )),
        p in 1.0f64..4.0,
    ) {
        let (sa, sb, sc) = (sample(a.clone()), sample(b.clone()), sample(c));
        let ab = wasserstein_1d(&sa, &sb, p).unwrap();
        let ba = wasserstein_1d(&sb, &sa, p).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(wasserstein_1d(&sa, &sa, p).unwrap(), 0.0);
        let mut shuffled = a.clone();
        shuffled.reverse();
        prop_assert_eq!(wasserstein_1d(&sa, &sample(shuffled), p).unwrap(), 0.0);
        if a.iter().zip(&b).any(|(x, y)| x != y) && ab == 0.0 {
            let (mut x, mut y) = (a, b);
            x.sort_by(f64::total_cmp);
            y.sort_by(f64::total_cmp);
            prop_assert_eq!(x, y);
        }
        let ac = wasserstein_1d(&sa, &sc, p).unwrap();
        let cb = wasserstein_1d(&sc, &sb, p).unwrap();
        prop_assert!(ab <= ac + cb + 1e-9 * (1.0 + ab));
    }

    #[test]
    fn closed_form_lifetime_increments(alpha in 0.3f64..2.0, m0 in 0.05f64..0.95) {
        let spec = presets::linear_growth(alpha, m0);
        let report = construct_lifetime(&spec, &Engine::analytic(), 8).unwrap();
        let exact = crossing_times_example26(alpha, &ThresholdRule::linear(), m0, 8).unwrap();
        prop_assert_eq!(report.crossing_times.len(), 8);
        prop_assert!(report.crossing_times.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(report.crossing_times[0] > 0.0);
        for n in 1..8 {
            let got = report.crossing_times[n] - report.crossing_times[n - 1];
            let want = exact[n] - exact[n - 1];
            prop_assert!((got - want).abs() < 1e-9, "n = {}: {} vs {}", n + 1, got, want);
        }
    }

    #[test]
    fn diverging_growth_series_never_suspects_finite_lifetime(rate in 0.1f64..3.0, sigma in 0.1f64..3.0, ratio in 1.5f64..4.0) {
        let spec = EquationSpec {
            name: None,
            p: 2.0,
            dim: 1,
            z: vec![0.0],
            partition: ThresholdPartition::new(ThresholdRule::Geometric { scale: 1.0, ratio }),
            coefficients: RegimeCoefficients::new(
                Drift::Linear { rate },
                DiffusionFamily::PowerLaw { scale: sigma, exponent: 0.0 },
            )
            .with_growth(Constants { drift: rate, diffusion: RegimeBound::PowerLaw { scale: sigma, exponent: 0.0 } }),
            initial: InitialLaw::dirac(vec![0.5]),
        };
        let report = construct_lifetime(&spec, &Engine::Analytic { step: 1e-2, horizon: 20.0 }, 64).unwrap();
        prop_assert_eq!(report.growth_series.as_ref().unwrap().classification, Classification::Diverges);
        prop_assert_eq!(report.verdict, LifetimeVerdict::InfiniteLifetimeProvenBy(Criterion::GrowthSeries));
        prop_assert!(report.crossing_times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn telescoping_partial_sums(kb in 0.1f64..10.0, k in 0.1f64..10.0, n in 2usize..5000) {
        let s = SeriesSpec::growth_bound(kb, RegimeBound::PowerLaw { scale: k, exponent: 0.0 }, ThresholdRule::linear());
        let r = classify_series(&s, n, f64::INFINITY).unwrap();
        let want = (n as f64).ln() / (kb + k * k);
        let got = r.last_partial_sum().unwrap();
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0), "{} vs {}", got, want);
    }

    #[test]
    fn solved_windows_follow_regime_functions(b in -2.0f64..2.0, s1 in 0.0f64..2.0, s2 in 0.0f64..2.0, x0 in -1.5f64..1.5) {
        let spec = two_regime(b, s1, s2, x0);
        let (curve, verdict) = solve_moment_equation(&spec, 0.0, 1.5, 1e-2).unwrap();
        prop_assert!(curve.invariant_violations().is_empty(), "{:?}", curve.invariant_violations());
        if let VerdictKind::SolvedTo(t) = verdict.kind {
            prop_assert_eq!(t, 1.5);
        }
        let gmf = regime_moment_functions(&spec, 0.0).unwrap();
        for (r, s, ok) in verify_windows(&curve, &gmf).unwrap() {
            prop_assert!(ok, "window ({}, {})", r, s);
        }
    }

    #[test]
    fn null_regime_does_not_change_moment_solution(b in -2.0f64..2.0, s1 in 0.1f64..2.0, x0 in -0.9f64..0.9, level in 0.01f64..0.99, s_atom in 0.0f64..5.0) {
        let plain = EquationSpec {
            partition: ThresholdPartition::new(ThresholdRule::Explicit { values: vec![1.0] }),
            ..two_regime(b, s1, 0.0, x0)
        };
        let mut with_atom = plain.clone();
        with_atom.partition = with_atom.partition.with_atom(level);
        with_atom.coefficients.diffusion =
            DiffusionFamily::per_regime(vec![Diffusion::scalar(s1), Diffusion::zero(), Diffusion::scalar(s_atom)]);
        let (c0, v0) = solve_moment_equation(&plain, 0.0, 1.0, 1e-2).unwrap();
        let (c1, v1) = solve_moment_equation(&with_atom, 0.0, 1.0, 1e-2).unwrap();
        prop_assert_eq!(v0.kind, v1.kind);
        prop_assert_eq!(c0, without_atoms(c1, 2));
    }

    #[test]
    fn collapse_bound_holds(s in 1e-4f64..0.4999) {
        let schedule = OscillationSchedule::default();
        let k = kappa(s).unwrap();
        prop_assume!(k > 1);
        let m = schedule.m_of_s_caseformula(s).unwrap();
        prop_assert!(m >= s);
        prop_assert!(m <= dyadic::a(k) + 9.0 * dyadic::delta(k));
        let dt = dyadic::delta(k) / 64.0;
        let numeric = schedule.solve_delayed_equation(s, dt).unwrap().m_numeric.unwrap();
        prop_assert!((numeric - m).abs() <= 2.0 * dt, "{} vs {}", numeric, m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn null_regime_does_not_change_simulation(seed in any::<u64>(), level in 1.2f64..1.8, s_atom in 0.0f64..5.0) {
        let plain = presets::non_unique(1.0);
        let mut with_atom = plain.clone();
        with_atom.partition = with_atom.partition.with_atom(level);
        with_atom.coefficients.diffusion =
            DiffusionFamily::per_regime(vec![Diffusion::scalar(1.0), Diffusion::zero(), Diffusion::scalar(s_atom)]);
        let cfg = SimConfig::new(256, 1e-2, 1.5, seed);
        let (c0, _) = run(&plain, &cfg).unwrap();
        let (c1, _) = run(&with_atom, &cfg).unwrap();
        prop_assert!(c0.invariant_violations().is_empty());
        prop_assert_eq!(c0, without_atoms(c1, 2));
    }
}

#[test]
fn coupling_inequality_on_seeded_datasets() {
    let rng = CounterRng::new(20_251_016, Domain::Auxiliary);
    let mut checked = 0;
    for dataset in 0..1000u64 {
        let mut meta = [0.0; 4];
        rng.uniforms(dataset, u32::MAX, &mut meta);
        let n = 2 + (meta[0] * 200.0) as usize;
        let p = 1.0 + 3.0 * meta[1];
        let mut f = vec![0.0; n];
        let mut noise = vec![0.0; n];
        rng.uniforms(dataset, 0, &mut f);
        rng.normals(dataset, 1, &mut noise);
        // pairing: linear map plus noise, then a seeded rotation of the indices
        let shift = (meta[2] * n as f64) as usize;
        let g: Vec<f64> = (0..n).map(|j| meta[3] * 4.0 - 2.0 + 3.0 * f[(j + shift) % n] + noise[j]).collect();
        let c = coupling_inequality_check(&f, &g, p).unwrap();
        assert!(c.holds, "dataset {dataset}: slack {}", c.slack);
        checked += 1;
    }
    assert_eq!(checked, 1000);
}

#[test]
fn random_pairing_of_uniforms_has_positive_slack() {
    let rng = CounterRng::new(7, Domain::Auxiliary);
    let (mut f, mut g) = (vec![0.0; 1000], vec![0.0; 1000]);
    rng.uniforms(0, 0, &mut f);
    rng.uniforms(0, 1, &mut g);
    let c = coupling_inequality_check(&f, &g, 2.0).unwrap();
    assert!(c.holds && c.slack > 0.0);
}

#[test]
fn simulated_curves_keep_crossings_inside_grid_cells() {
    for seed in 0..4 {
        let (curve, _) = run(&presets::non_unique(1.0), &SimConfig::new(2000, 1e-2, 2.0, seed)).unwrap();
        assert!(curve.invariant_violations().is_empty(), "{:?}", curve.invariant_violations());
        assert!(curve.crossings.iter().any(|c| c.threshold == 1));
    }
}

#[test]
fn dyadic_intervals_are_disjoint_and_ordered() {
    assert!(OscillationSchedule::interval_violations(40).is_empty());
}
