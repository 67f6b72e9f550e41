mod common;

use cfnet::charlib::{apply_transform, LinearTransform};
use cfnet::gaussnet::{MixtureView, NetParams1D};
use cfnet::sampler::{default_partition, detect_critical_points, find_eta_prime, Partition};
use cfnet::trainer::*;
use cfnet::Complex64;
use common::*;
use proptest::prelude::*;

fn uniform_partition(half: f64, n: usize) -> Partition {
    default_partition(half, &[0.0], n).unwrap()
}

#[test]
fn adam_zero_gradient_leaves_everything_at_rest() {
    let mut s = OptimState::new(3, 0.9, 0.999, 1e-8);
    let mut p = [0.5, -1.0, 2.0];
    adam_step(&mut s, &mut p, &[0.0; 3], 0.1);
    assert_eq!(p, [0.5, -1.0, 2.0]);
    assert!(s.m.iter().chain(&s.v).all(|v| *v == 0.0));
}

#[test]
fn first_adam_step_moves_against_the_gradient_by_lr() {
    for g in [-4.0, 0.3, 25.0] {
        let mut s = OptimState::new(1, 0.9, 0.999, 1e-8);
        let mut p = [1.0];
        adam_step(&mut s, &mut p, &[g], 0.01);
        let moved = p[0] - 1.0;
        assert!((moved + 0.01 * f64::signum(g)).abs() < 1e-8, "{moved}");
    }
}

#[test]
fn amsgrad_accumulator_on_a_decaying_sequence() {
    let mut s = OptimState::new(1, 0.9, 0.999, 1e-8);
    let mut p = [0.0];
    let mut seen = Vec::new();
    for g in [3.0, 1.0, 1.0, 1.0] {
        amsgrad_step(&mut s, &mut p, &[g], 0.01);
        seen.push(s.v_max[0]);
    }
    assert!(seen.windows(2).all(|w| w[1] >= w[0]), "{seen:?}");
    assert_eq!(seen[0], (1.0 - 0.999) * 9.0);
    assert!(s.v_max[0] >= s.v[0]);
}

proptest! {
    #[test]
    fn amsgrad_max_is_monotone_at_every_step(grads in proptest::collection::vec(-10.0f64..10.0, 1..200)) {
        let mut s = OptimState::new(1, 0.9, 0.999, 1e-8);
        let mut p = [0.0];
        let mut prev = 0.0;
        for g in grads {
            amsgrad_step(&mut s, &mut p, &[g], 1e-3);
            prop_assert!(s.v_max[0] >= prev);
            prop_assert!(s.v_max[0] >= s.v[0]);
            prev = s.v_max[0];
        }
    }
}

#[test]
fn zero_epochs_return_the_initialization() {
    let m = apply_transform(merton(), LinearTransform::new(0.6, 0.08).unwrap()).unwrap();
    let part = uniform_partition(60.0, 2001);
    let cfg = TrainConfig { samples: 2001, epochs1: 0, epochs2: 0, ..TrainConfig::default() };
    let init = init_params(&m, cfg.neurons, part.eta_prime, 1e-7).unwrap();
    let out = train(&m, &part, &cfg, 1e-7).unwrap();
    assert_eq!(out.theta, init);
    assert!(out.history.is_empty());
}

#[test]
fn initialization_has_unit_mass_and_lattice_means() {
    let m = apply_transform(merton(), LinearTransform::new(0.6, 0.08).unwrap()).unwrap();
    let init = init_params(&m, 45, 60.0, 1e-7).unwrap();
    assert!((init.mass() - 1.0).abs() < 1e-12);
    let mix = MixtureView::from(&init);
    let gaps: Vec<f64> = mix.mean.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(gaps.iter().all(|g| (g - gaps[0]).abs() < 1e-12));
    assert!(mix.var.iter().all(|v| *v == mix.var[0]));
}

#[test]
fn invalid_config_is_rejected() {
    let m = merton();
    let part = uniform_partition(10.0, 101);
    for cfg in [
        TrainConfig { neurons: 0, ..TrainConfig::default() },
        TrainConfig { lr1: 0.0, ..TrainConfig::default() },
        TrainConfig { batch_size: 0, ..TrainConfig::default() },
    ] {
        assert!(matches!(train(&m, &part, &cfg, 1e-7), Err(TrainError::Config(_))));
    }
}

#[test]
fn toml_config_uses_table_defaults_and_rejects_unknown_keys() {
    let cfg: TrainConfig = toml::from_str("seed = 7").unwrap();
    assert_eq!(cfg, TrainConfig { seed: 7, ..TrainConfig::default() });
    assert_eq!((cfg.neurons, cfg.samples, cfg.epochs1, cfg.epochs2, cfg.batch_size), (45, 1_000_000, 5, 100, 1024));
    assert_eq!((cfg.lr1, cfg.lr2), (0.0015, 0.0012));
    let two = TrainConfig::two_dim();
    assert_eq!((two.epochs1, two.epochs2, two.lr1, two.lr2), (6, 40, 0.04, 0.00025));
    assert!(toml::from_str::<TrainConfig>("learning_rate = 1.0").is_err());
}

fn three_neuron_target() -> NetParams1D {
    MixtureView { mean: vec![-0.8, 0.1, 0.9], var: vec![0.09, 0.04, 0.16], mass: vec![0.3, 0.5, 0.2] }.to_params()
}

#[test]
fn recovers_a_three_component_target() {
    let truth = three_neuron_target();
    let ep = find_eta_prime(&|e: f64| truth.eval_cf(e), 1e-7).unwrap();
    let part = uniform_partition(ep, 4001);
    let targets: Vec<Complex64> = part.points.iter().map(|&e| truth.eval_cf(e)).collect();
    let init = MixtureView { mean: vec![-1.0, 0.0, 1.0], var: vec![0.1; 3], mass: vec![1.0 / 3.0; 3] }.to_params();
    let cfg = TrainConfig { neurons: 3, samples: part.len(), epochs1: 100, epochs2: 1000, lr1: 0.01, lr2: 5e-8, batch_size: 64, ..TrainConfig::default() };
    let out = train_from(&init, &part, &targets, &cfg).unwrap();
    assert!(out.final_loss.total <= 1e-8, "{:?}", out.final_loss);
    assert!(!out.threshold_warning);
    assert!((out.theta.eval_cf(0.0).re - 1.0).abs() <= 1e-3);
    let mut got = MixtureView::from(&out.theta).mean;
    got.sort_by(f64::total_cmp);
    for (g, w) in got.iter().zip([-0.8, 0.1, 0.9]) {
        assert!((g - w).abs() < 1e-3, "{got:?}");
    }
}

#[test]
fn non_finite_targets_abort_with_last_finite_parameters() {
    let part = uniform_partition(5.0, 257);
    let mut targets: Vec<Complex64> = part.points.iter().map(|&e| Complex64::new((-0.5 * e * e).exp(), 0.0)).collect();
    targets[100] = Complex64::new(f64::NAN, 0.0);
    let init = MixtureView { mean: vec![0.0], var: vec![1.0], mass: vec![1.0] }.to_params();
    let cfg = TrainConfig { neurons: 1, samples: 257, epochs1: 1, epochs2: 1, batch_size: 64, ..TrainConfig::default() };
    match train_from(&init, &part, &targets, &cfg) {
        Err(TrainError::NonFinite { last_finite, .. }) => assert!(last_finite.iter().all(|v| v.is_finite())),
        other => panic!("expected a non-finite abort, got {other:?}"),
    }
}

fn short_merton_run(seed: u64, deterministic: bool) -> TrainOutcome<NetParams1D> {
    let m = apply_transform(merton(), LinearTransform::new(0.6, 0.08).unwrap()).unwrap();
    let ep = find_eta_prime(&m, 1e-7).unwrap();
    let part = default_partition(ep, &detect_critical_points(&m, ep, 4096), 20_000).unwrap();
    let cfg = TrainConfig { samples: 20_000, epochs1: 3, epochs2: 6, seed, deterministic, ..TrainConfig::default() };
    train(&m, &part, &cfg, 1e-7).unwrap()
}

#[test]
fn deterministic_runs_are_bit_identical() {
    let a = short_merton_run(42, true);
    let b = short_merton_run(42, true);
    assert_eq!(a.theta, b.theta);
    assert_eq!(a.history, b.history);
    let c = short_merton_run(43, true);
    assert_ne!(a.theta, c.theta);
}

#[test]
fn refinement_phase_improves_on_exploration() {
    let out = short_merton_run(0, true);
    assert_eq!(out.history.len(), 9);
    assert!(out.history[..3].iter().all(|r| r.phase == Phase::Amsgrad));
    assert!(out.history[3..].iter().all(|r| r.phase == Phase::Adam));
    let report = loss_history_monotonicity_report(&out.history);
    assert_eq!(report.len(), 2);
    assert!(report[1].best <= report[0].best, "{report:?}");
    if !out.threshold_warning {
        assert!((out.theta.eval_cf(0.0).re - 1.0).abs() <= 1e-3);
    }
    assert!(out.threshold_warning == (out.final_loss.total > 1e-6));
}

fn record(epoch: usize, phase: Phase, total: f64) -> EpochRecord {
    EpochRecord { epoch, phase, mse: 0.0, mae: total, total }
}

#[test]
fn monotonicity_report_examples() {
    let falling: Vec<_> = (0..6).map(|k| record(k + 1, if k < 3 { Phase::Amsgrad } else { Phase::Adam }, 1.0 / (k + 1) as f64)).collect();
    let r = loss_history_monotonicity_report(&falling);
    assert!(r.iter().all(|p| p.improved_fraction == 1.0), "{r:?}");
    let flat: Vec<_> = (0..6).map(|k| record(k + 1, if k < 3 { Phase::Amsgrad } else { Phase::Adam }, 0.5)).collect();
    let r = loss_history_monotonicity_report(&flat);
    assert!(r.iter().all(|p| p.improved_fraction == 0.0), "{r:?}");
    assert_eq!(r[0].best, 0.5);
}
