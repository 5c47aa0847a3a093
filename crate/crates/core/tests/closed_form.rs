#![allow(clippy::needless_range_loop)]

mod common;

use common::Setup;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ris_cellfree::channel::{ChannelStatistics, Dims, PhaseConfig};
use ris_cellfree::closed_form::se::{combining_weights, se_report, sinr_closed_form};
use ris_cellfree::closed_form::terms::{term_cross_bs, term_pc_cross_bs};
use ris_cellfree::geometry::{AngleSet, LargeScale, RicianFactors};
use ris_cellfree::montecarlo::{empirical_moments, empirical_moments_all, empirical_sinr};
use ris_cellfree::optimize::baselines::coordinate_ascent;
use ris_cellfree::optimize::env::RisEnvironment;
use ris_cellfree::SystemModel;

#[test]
fn single_user_without_ris_has_analytic_mean() {
    let mut setup = Setup::small();
    setup.num_ris = 0;
    setup.num_users = 1;
    setup.tau_p = 1;
    let model = setup.model(5);
    let p = &model.params;
    let m = &model.moments(&PhaseConfig::zeros(0, setup.elements)).unwrap()[0];
    for j in 0..setup.num_aps {
        let g = model.stats.gamma[j][0];
        let expect = setup.antennas as f64 * g * g / (g + p.sigma2 / (p.rho * p.tau_p as f64));
        assert!((m.mean_wkk[j].re - expect).abs() <= 1e-10 * expect && m.mean_wkk[j].im.abs() <= 1e-10 * expect);
        assert!((m.v[j] - expect).abs() <= 1e-10 * expect);
    }
}

#[test]
fn second_moments_are_hermitian_before_symmetrization() {
    let mut setup = Setup::small();
    setup.num_users = 3;
    let model = setup.model(8);
    for m in model.moments(&common::random_phase(&model, 1)).unwrap() {
        for s in &m.second {
            assert!(s.hermitian_deviation() < 1e-8, "{}", s.hermitian_deviation());
        }
    }
}

#[test]
fn single_ap_second_moment_matches_scalar_sampling() {
    let mut setup = Setup::small();
    setup.num_aps = 1;
    let model = setup.model(13);
    let phase = common::random_phase(&model, 2);
    let cf = model.moments(&phase).unwrap();
    let mc = empirical_moments(&model.stats, &model.operator, &phase, &model.assignment, 0, 200_000, 17);
    for i in 0..setup.num_users {
        let c = cf[0].second[i][(0, 0)];
        let e = mc.second[i][0].mean;
        assert!((c - e).norm() / c.norm() < 0.02, "i = {i}: {c} vs {e}");
    }
}

/// Users 0 and 2 share a pilot and have identical statistics.
fn twin_copilot_model(seed: u64) -> SystemModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = Dims {
        num_aps: 2,
        antennas: 2,
        num_users: 3,
        num_ris: 2,
        elements: 4,
    };
    let mut gain = |lo: f64, hi: f64| 10f64.powf(rng.random_range(lo..hi));
    let beta = (0..2).map(|_| (0..2).map(|_| gain(-6.0, -5.0)).collect()).collect();
    let mut alpha: Vec<Vec<f64>> = (0..2).map(|_| (0..3).map(|_| gain(-5.0, -4.0)).collect()).collect();
    let mut gamma: Vec<Vec<f64>> = (0..2).map(|_| (0..3).map(|_| gain(-9.0, -8.0)).collect()).collect();
    let mut angles = AngleSet::random(&mut rng, 2, 2, 3);
    for r in 0..2 {
        alpha[r][2] = alpha[r][0];
        angles.aoa_ris_azimuth[r][2] = angles.aoa_ris_azimuth[r][0];
        angles.aoa_ris_elevation[r][2] = angles.aoa_ris_elevation[r][0];
    }
    for g in gamma.iter_mut() {
        g[2] = g[0];
    }
    let large = LargeScale { beta, alpha, gamma };
    let rician = RicianFactors::uniform(10.0, 10.0, 2, 2, 3);
    let stats = ChannelStatistics::from_large_scale(dims, (2, 2), 0.5, &large, &rician, &angles).unwrap();
    SystemModel::new(stats, Setup::small().params()).unwrap()
}

#[test]
fn twin_copilots_are_interchangeable() {
    let model = twin_copilot_model(3);
    assert_eq!(model.assignment.copilots[0], vec![0, 2]);
    let phase = common::random_phase(&model, 4);
    let (s, op, asg) = (&model.stats, &model.operator, &model.assignment);
    let close = |a: ris_cellfree::Cx<f64>, b: ris_cellfree::Cx<f64>| (a - b).norm() <= 1e-10 * a.norm().max(b.norm());
    for j in 0..2 {
        for h in 0..2 {
            let own = [
                term_cross_bs(s, op, &phase, asg, 0, 1, j, h).unwrap(),
                term_cross_bs(s, op, &phase, asg, 2, 1, j, h).unwrap(),
            ];
            let pc = [
                term_pc_cross_bs(s, op, &phase, asg, 0, 1, j, h).unwrap(),
                term_pc_cross_bs(s, op, &phase, asg, 2, 1, j, h).unwrap(),
            ];
            assert!(close(own[0], own[1]), "CROSS-BS ({j},{h}): {own:?}");
            assert!(close(pc[0], pc[1]), "PC-CROSS-BS ({j},{h}): {pc:?}");
            assert!(pc[0].norm() > 0.0);
        }
    }
}

#[test]
fn sum_se_from_sampled_moments_agrees_within_three_percent() {
    let setup = Setup::small();
    let model = setup.model(7);
    let phase = common::random_phase(&model, 9);
    let cf = model.sum_se(&phase).unwrap().sum_se;
    let mc: Vec<_> = empirical_moments_all(
        &model.stats,
        &model.operator,
        &phase,
        &model.assignment,
        None,
        200_000,
        31,
    )
    .iter()
    .map(|e| e.to_moment_set())
    .collect();
    let emp = se_report(&mc, &model.params).unwrap().sum_se;
    assert!((cf - emp).abs() / cf < 0.03, "{cf} vs {emp}");
}

#[test]
fn symbol_level_sinr_matches_effective_sinr() {
    let setup = Setup::small();
    let model = setup.model(7);
    let phase = common::random_phase(&model, 9);
    let report = model.sum_se(&phase).unwrap();
    let emp = empirical_sinr(
        &model.stats,
        &model.operator,
        &phase,
        &model.assignment,
        &report.weights,
        model.params.rho_s,
        10_000,
        6,
    );
    for (c, e) in report.sinr.iter().zip(&emp) {
        assert!((c - e).abs() / c < 0.10, "{c} vs {e}");
    }
}

#[test]
fn optimal_weights_beat_alternatives_on_one_config() {
    let setup = Setup::small();
    let model = setup.model(21);
    let phase = common::random_phase(&model, 1);
    let p = &model.params;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for m in model.moments(&phase).unwrap() {
        let best = sinr_closed_form(
            &m,
            &combining_weights(&m, p.rho_s, p.sigma2).unwrap(),
            p.rho_s,
            p.sigma2,
        )
        .unwrap();
        let equal = vec![Complex64::new(1.0, 0.0); setup.num_aps];
        assert!(best >= sinr_closed_form(&m, &equal, p.rho_s, p.sigma2).unwrap() * (1.0 - 1e-10));
        for _ in 0..20 {
            let a: Vec<Complex64> = (0..setup.num_aps)
                .map(|_| Complex64::new(rng.random(), rng.random()))
                .collect();
            assert!(best >= sinr_closed_form(&m, &a, p.rho_s, p.sigma2).unwrap() * (1.0 - 1e-10));
        }
    }
}

#[test]
fn optimized_phases_are_no_worse_than_random() {
    let model = common::toy_model(2);
    let mut env = RisEnvironment::new(model.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let random = model.sum_se(&PhaseConfig::random(&mut rng, 1, 2)).unwrap().sum_se;
    let opt = coordinate_ascent(&mut env, 2, 16, &mut rng).unwrap();
    assert!(opt.reward >= random);
}
