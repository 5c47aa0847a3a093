mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ris_cellfree::channel::PhaseConfig;
use ris_cellfree::experiment::config::parse_config;
use ris_cellfree::experiment::scenario::{build_model, placement_seed, Point};
use ris_cellfree::optimize::baselines::{coordinate_ascent, random_search};
use ris_cellfree::optimize::buffer::Transition;
use ris_cellfree::optimize::env::RisEnvironment;
use ris_cellfree::optimize::sac::{sac_train, squashed_gaussian, standard_normals, SacAgent, SacConfig, LOG_STD_MIN};
use ris_cellfree::Error;

fn toy_env(seed: u64) -> RisEnvironment<f64> {
    RisEnvironment::new(common::toy_model(seed))
}

fn grid_optimum(env: &mut RisEnvironment<f64>, points: usize) -> f64 {
    let step = std::f64::consts::TAU / points as f64;
    let mut best = f64::NEG_INFINITY;
    for a in 0..points {
        for b in 0..points {
            let p = PhaseConfig::new(1, 2, vec![a as f64 * step, b as f64 * step]).unwrap();
            best = best.max(env.evaluate(&p).unwrap());
        }
    }
    best
}

#[test]
fn observation_and_action_lengths() {
    let cfg = parse_config("", Some("paper-table2")).unwrap();
    let model = build_model(&cfg, &Point::base(&cfg), placement_seed(&cfg, 0)).unwrap();
    let mut env = RisEnvironment::new(model);
    assert_eq!(env.observation_dim(), 3 * 30 + 3 * 4 * 4);
    assert_eq!(env.observation_dim(), 138);
    assert_eq!(env.action_dim(), 90);
    assert_eq!(env.reset(&mut ChaCha8Rng::seed_from_u64(1)).len(), 138);

    let mut setup = common::Setup::small();
    setup.num_ris = 0;
    let mut env = RisEnvironment::new(setup.model(1));
    assert_eq!(env.observation_dim(), 2 * 2 * 2);
    assert_eq!(env.reset(&mut ChaCha8Rng::seed_from_u64(1)).len(), 8);
}

#[test]
fn reset_is_deterministic_per_seed() {
    let mut env = toy_env(0);
    let a = env.reset(&mut ChaCha8Rng::seed_from_u64(5));
    let b = env.reset(&mut ChaCha8Rng::seed_from_u64(5));
    assert_eq!(a, b);
    assert!(a[..2].iter().all(|t| (0.0..std::f64::consts::TAU).contains(t)));
}

#[test]
fn action_mapping_and_reward() {
    let mut env = toy_env(1);
    let (_, r) = env.step(&[0.0, 0.0]).unwrap();
    assert!(env
        .phase()
        .theta()
        .iter()
        .all(|t| (t - std::f64::consts::PI).abs() < 1e-15));
    assert_eq!(r, env.model.sum_se(env.phase()).unwrap().sum_se);
    env.step(&[-1.0, -1.0]).unwrap();
    assert_eq!(env.phase().theta(), &[0.0, 0.0]);
    env.step(&[1.0, 1.0]).unwrap();
    assert_eq!(env.phase().theta(), &[0.0, 0.0]);
    assert_eq!(env.clamped_actions, 0);
    env.step(&[1.5, -3.0]).unwrap();
    assert_eq!(env.clamped_actions, 2);
    assert_eq!(env.phase().theta(), &[0.0, 0.0]);
    assert!(env.step(&[0.0]).is_err());
}

#[test]
fn vanishing_std_gives_deterministic_tanh() {
    let mean = [0.3, -1.2];
    let (_, a, _) = squashed_gaussian(&mean, &[LOG_STD_MIN; 2], &[2.0, -1.5]);
    for (ai, m) in a.iter().zip(mean) {
        assert!((ai - f64::tanh(m)).abs() < 1e-8);
    }
}

/// `∫ π(a) da` and `−∫ π log π da` by trapezoidal quadrature in `u`.
fn quadrature(mean: f64, log_std: f64) -> (f64, f64) {
    let sd = log_std.exp();
    let n = 200_000;
    let (lo, hi) = (mean - 12.0 * sd, mean + 12.0 * sd);
    let h = (hi - lo) / n as f64;
    let (mut mass, mut entropy) = (0.0, 0.0);
    for i in 0..=n {
        let u = lo + i as f64 * h;
        let (_, a, lp) = squashed_gaussian(&[mean], &[log_std], &[(u - mean) / sd]);
        let w = if i == 0 || i == n { 0.5 * h } else { h };
        let density_a = lp.exp();
        let jac = 1.0 - a[0] * a[0];
        mass += w * density_a * jac;
        entropy -= w * density_a * jac * lp;
    }
    (mass, entropy)
}

#[test]
fn squashed_density_integrates_to_one() {
    for (m, ls) in [(0.0, 0.0), (0.7, -0.7), (-1.5, 0.5)] {
        let (mass, _) = quadrature(m, ls);
        assert!((mass - 1.0).abs() < 1e-3, "mean {m}, log-std {ls}: mass {mass}");
    }
}

#[test]
fn unit_gaussian_squash_has_positive_entropy() {
    let (_, h) = quadrature(0.0, 0.0);
    assert!(h > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 200_000;
    let draws: Vec<f64> = (0..n)
        .map(|_| -squashed_gaussian(&[0.0], &[0.0], &standard_normals(&mut rng, 1)).2)
        .collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    assert!((mean - h).abs() < 3.0 * (var / n as f64).sqrt(), "{mean} vs {h}");
}

fn tiny_agent(config: SacConfig<f64>, seed: u64) -> (SacAgent<f64>, Vec<Transition<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agent = SacAgent::new(2, 1, config, &mut rng).unwrap();
    let batch: Vec<Transition<f64>> = (0..6)
        .map(|_| Transition {
            state: standard_normals(&mut rng, 2),
            action: standard_normals::<f64, _>(&mut rng, 1)
                .iter()
                .map(|x| x.tanh())
                .collect(),
            reward: standard_normals::<f64, _>(&mut rng, 1)[0],
            next_state: standard_normals(&mut rng, 2),
        })
        .collect();
    let eps = (0..6).map(|_| standard_normals(&mut rng, 1)).collect();
    (agent, batch, eps)
}

fn small_config() -> SacConfig<f64> {
    SacConfig {
        hidden_sizes: [4, 4],
        batch_size: 6,
        buffer_capacity: 16,
        ..Default::default()
    }
}

#[test]
fn zero_discount_targets_the_scaled_reward() {
    let cfg = SacConfig {
        discount: 0.0,
        ..small_config()
    };
    let (agent, batch, eps) = tiny_agent(cfg, 1);
    let refs: Vec<&Transition<f64>> = batch.iter().collect();
    let (l, _) = agent.sac_losses(&refs, &eps).unwrap();
    let expect = batch
        .iter()
        .map(|t| {
            let sa = [t.state.clone(), t.action.clone()].concat();
            0.5 * (agent.q1.forward(&sa)[0] - 2.0 * t.reward).powi(2)
        })
        .sum::<f64>()
        / batch.len() as f64;
    assert!((l.q1 - expect).abs() <= 1e-12 * expect.abs().max(1.0));
}

#[test]
fn identical_twins_make_the_minimum_either_network() {
    let (mut agent, batch, eps) = tiny_agent(small_config(), 2);
    agent.q2 = agent.q1.clone();
    let refs: Vec<&Transition<f64>> = batch.iter().collect();
    let (l, _) = agent.sac_losses(&refs, &eps).unwrap();
    let (mut jv, mut jp) = (0.0, 0.0);
    for (t, e) in batch.iter().zip(&eps) {
        let s = agent.policy_sample_with(&t.state, e);
        let q = agent.q1.forward(&[t.state.clone(), s.action.clone()].concat())[0];
        jv += 0.5 * (agent.value.forward(&t.state)[0] - (q - s.log_prob)).powi(2);
        jp += s.log_prob - q;
    }
    let n = batch.len() as f64;
    assert!((l.value - jv / n).abs() < 1e-12 && (l.policy - jp / n).abs() < 1e-12);
    assert_eq!(l.q1, l.q2);
}

#[test]
fn target_network_follows_the_polyak_rule() {
    let (mut agent, batch, eps) = tiny_agent(small_config(), 3);
    let refs: Vec<&Transition<f64>> = batch.iter().collect();
    let old = agent.target_value.params().to_vec();
    agent.update(&refs, &eps).unwrap();
    let tau = agent.config.target_smoothing;
    for ((t, v), o) in agent.target_value.params().iter().zip(agent.value.params()).zip(&old) {
        assert_eq!(*t, tau * v + (1.0 - tau) * o);
    }
}

#[test]
fn non_finite_rewards_are_rejected_without_updating() {
    let (mut agent, mut batch, eps) = tiny_agent(small_config(), 4);
    batch[0].reward = f64::NAN;
    let before = agent.clone();
    let refs: Vec<&Transition<f64>> = batch.iter().collect();
    assert!(matches!(agent.update(&refs, &eps), Err(Error::NumericalDegeneracy(_))));
    assert_eq!(agent.q1.params(), before.q1.params());
    assert_eq!(agent.policy.params(), before.policy.params());
}

#[test]
fn invalid_configs_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let bad = SacConfig::<f64> {
        batch_size: 64,
        buffer_capacity: 32,
        ..Default::default()
    };
    assert!(SacAgent::new(2, 1, bad, &mut rng).is_err());
    let bad = SacConfig::<f64> {
        target_smoothing: 0.0,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn short_training_run_beats_random_phases() {
    let mut env = toy_env(4);
    let cfg = SacConfig {
        num_episodes: 8,
        steps_per_episode: 10,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (best, trace) = sac_train(&mut env, &cfg, &mut rng).unwrap();
    assert_eq!(trace.episode_rewards.len(), 8);
    assert_eq!(trace.rows.len(), 80);
    assert_eq!(env.evaluate(&best).unwrap(), trace.best_reward);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let random: f64 = (0..100)
        .map(|_| env.evaluate(&PhaseConfig::random(&mut rng, 1, 2)).unwrap())
        .sum::<f64>()
        / 100.0;
    assert!(trace.best_reward >= random);

    let mut csv = Vec::new();
    trace.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("episode,step,reward,J_V,J_Q1,J_Q2,J_pi\n"));
    assert_eq!(text.lines().count(), 81);
}

#[test]
fn single_draw_random_search_is_one_evaluation() {
    let mut env = toy_env(5);
    let r = random_search(&mut env, 1, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let phase = PhaseConfig::random(&mut ChaCha8Rng::seed_from_u64(2), 1, 2);
    assert_eq!(r.phase, phase);
    assert_eq!(r.reward, env.evaluate(&phase).unwrap());
    assert_eq!(env.evaluations, 2);
    assert!(random_search(&mut env, 0, &mut ChaCha8Rng::seed_from_u64(2)).is_err());
}

#[test]
fn coordinate_ascent_is_monotone_and_near_the_grid_optimum() {
    for seed in 0..3 {
        let mut env = toy_env(seed);
        let star = grid_optimum(&mut env, 64);
        let r = coordinate_ascent(&mut env, 3, 64, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert!(r.history.windows(2).all(|w| w[1] >= w[0]));
        assert!(r.reward >= 0.99 * star, "seed {seed}: {} vs {star}", r.reward);
    }
    assert!(coordinate_ascent(&mut toy_env(0), 1, 1, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
}
