use nalgebra::DMatrix;
use proptest::prelude::*;

use condtest::harness::dynamics::{geodesic_distance, orthonormality_drift};
use condtest::harness::io::{parse_dataset, write_dataset};
use condtest::harness::{
    generate_pair, perturb_dynamics, run_sweep, simulate_system, BoxDomain, LinearSystem, Regime, ScenarioConfig,
    SweepAxis, SweepConfig,
};
use condtest::rng::derive_seed;
use condtest::testing::{positive_rate, Calibration, Pipeline, Regime as Hypothesis};
use condtest::{DataSet, KernelSpec, Points};

fn scenario(regime: Regime) -> ScenarioConfig {
    ScenarioConfig {
        domain: BoxDomain::new(2, -1.0, 1.0).unwrap(),
        input_kernel: KernelSpec::gaussian(0.25).unwrap(),
        mean_dimension: 12,
        norm: 1.0,
        noise_std: 0.1,
        regime,
    }
}

fn pipeline(calibration: Calibration) -> Pipeline {
    Pipeline {
        input_kernel: KernelSpec::gaussian(0.25).unwrap(),
        output_kernel: KernelSpec::linear(1.0).unwrap(),
        lambda: 0.1,
        alpha: 0.05,
        split: 0.5,
        calibration,
    }
}

#[test]
fn orthonormality_survives_many_perturbations() {
    let mut a = LinearSystem::random(4, 0.0, 3).unwrap().a;
    for i in 0..100 {
        a = perturb_dynamics(&a, 2.0, derive_seed(5, &[i])).unwrap().a_prime;
    }
    assert!(orthonormality_drift(&a) <= 1e-8, "{}", orthonormality_drift(&a));
}

#[test]
fn zero_perturbation_is_identity() {
    let a = LinearSystem::random(3, 0.0, 1).unwrap().a;
    let p = perturb_dynamics(&a, 0.0, 2).unwrap();
    assert_eq!(p.a_prime, a);
    assert_eq!(p.geodesic_distance, 0.0);
}

#[test]
fn small_perturbations_move_predicted_distance() {
    for seed in 0..10 {
        let a = LinearSystem::random(3, 0.0, seed).unwrap().a;
        let p = perturb_dynamics(&a, 0.3, seed + 100).unwrap();
        assert!((p.geodesic_distance - p.predicted_distance).abs() < 1e-8, "seed {seed}");
        assert!((geodesic_distance(&a, &p.a_prime).unwrap() - p.geodesic_distance).abs() < 1e-12);
    }
}

#[test]
fn noiseless_rotation_keeps_unit_norm() {
    let sys = LinearSystem::random(3, 0.0, 8).unwrap();
    let d = simulate_system(&sys, 50, 1).unwrap();
    for z in d.measurements().iter() {
        assert!((z.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let id = LinearSystem::new(DMatrix::identity(2, 2), 0.0).unwrap();
    let d = simulate_system(&id, 5, 1).unwrap();
    assert!(d.measurements().iter().all(|z| z == id.initial_state.as_slice()));
}

/// Bands `μᵢ ± βᵢσᵢ` of scalar KRR fits; with a linear output kernel
/// without offset the test rejects exactly where the bands separate.
#[test]
fn one_dimensional_rejections_match_band_separation() {
    let k = KernelSpec::gaussian(0.25).unwrap();
    let kappa = KernelSpec::linear(0.0).unwrap();
    let grid: Vec<f64> = (0..200).map(|i| -3.0 + 6.0 * i as f64 / 199.0).collect();
    let make = |shift: f64, seed: u64| {
        let mut rng = condtest::rng::substream(seed, &[]);
        let xs: Vec<f64> = (0..25).map(|_| rand::Rng::random_range(&mut rng, -3.0..3.0)).collect();
        let zs: Vec<f64> = xs
            .iter()
            .map(|x| x.sin() + shift * (-(x - 1.0) * (x - 1.0)).exp() + 0.05 * rand::Rng::random_range(&mut rng, -1.0..1.0))
            .collect();
        DataSet::new(Points::from_scalars(&xs), Points::from_scalars(&zs)).unwrap()
    };
    let (d1, d2) = (make(0.0, 1), make(1.5, 2));
    let p = Pipeline {
        input_kernel: k,
        output_kernel: kappa,
        lambda: 0.01,
        alpha: 0.05,
        split: 0.5,
        calibration: Calibration::Naive { replicates: 1000 },
    };
    let run = p.run(&d1, &d2, Some(&Points::from_scalars(&grid)), 9).unwrap();
    let (m1, m2) = (p.fit(&d1).unwrap(), p.fit(&d2).unwrap());
    let (b1, b2) = (run.thr1.beta, run.thr2.beta);
    let mut seen = [false, false];
    for (x, rec) in grid.iter().zip(&run.report.records) {
        let (mu1, mu2) = (m1.predict_scalar(&[*x]).unwrap(), m2.predict_scalar(&[*x]).unwrap());
        let (s1, s2) = (m1.posterior_scale(&[*x]).unwrap(), m2.posterior_scale(&[*x]).unwrap());
        let separated = mu1 + b1 * s1 < mu2 - b2 * s2 || mu2 + b2 * s2 < mu1 - b1 * s1;
        let gap = (mu1 - mu2).abs() - (b1 * s1 + b2 * s2);
        if gap.abs() > 1e-9 {
            assert_eq!(rec.reject, separated, "x = {x}");
        }
        seen[usize::from(rec.reject)] = true;
    }
    assert!(seen[0] && seen[1], "expected both outcomes on the grid");
}

#[test]
fn generated_null_pairs_respect_level() {
    let cfg = scenario(Regime::Null);
    let p = pipeline(Calibration::Naive { replicates: 200 });
    let trials = 100;
    let est = positive_rate(|s| generate_pair(&cfg, 60, s), &p, trials, Hypothesis::Null, 17).unwrap();
    let bound = p.alpha + 3.0 * (p.alpha * (1.0 - p.alpha) / trials as f64).sqrt();
    assert!(est.positive_rate <= bound, "{} > {bound}", est.positive_rate);
}

#[test]
fn rare_violations_are_found_more_often_when_less_rare() {
    let mut sc = scenario(Regime::Rare { theta: 0.1 });
    sc.domain = BoxDomain::new(2, -3.0, 3.0).unwrap();
    let cfg = SweepConfig {
        scenario: sc,
        n: 100,
        pipeline: pipeline(Calibration::Wild { replicates: 200 }),
        trials: 25,
        draws: 4,
        alphas: vec![0.05],
        sweep: Some(SweepAxis { parameter: "theta".into(), values: vec![0.02, 0.1, 0.4] }),
    };
    let res = run_sweep(&cfg, 7).unwrap();
    let errors: Vec<f64> = res.summary.iter().map(|s| s.mean_error).collect();
    let inversions = errors.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "{errors:?}");
    assert!(errors[2] < errors[0], "{errors:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn datasets_round_trip_through_csv(
        rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 1..20),
    ) {
        let xs: Vec<Vec<f64>> = rows.iter().map(|r| r[..2].to_vec()).collect();
        let zs: Vec<Vec<f64>> = rows.iter().map(|r| r[2..].to_vec()).collect();
        let d = DataSet::new(Points::from_rows(&xs).unwrap(), Points::from_rows(&zs).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_dataset(&path, &d).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let back = parse_dataset(&path, text.as_bytes()).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn perturbation_stays_orthonormal(seed in 0u64..1000, xi in 0.0f64..10.0, d in 1usize..6) {
        let a = LinearSystem::random(d, 0.0, seed).unwrap().a;
        let p = perturb_dynamics(&a, xi, seed).unwrap();
        prop_assert!(orthonormality_drift(&p.a_prime) <= 1e-10);
    }
}
