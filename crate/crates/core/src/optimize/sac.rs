//! Soft actor-critic with a value network, a Polyak-averaged target value
//! network, twin Q networks and a tanh-squashed Gaussian policy.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::PhaseConfig;
use crate::error::{invalid, Error, Result};
use crate::optimize::buffer::{ReplayBuffer, Transition};
use crate::optimize::env::RisEnvironment;
use crate::optimize::nn::{Adam, Mlp, Trace};
use crate::scalar::Real;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
pub const SQUASH_EPS: f64 = 1e-6;
const BATCH_CHUNK: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SacConfig<T> {
    pub discount: T,
    pub hidden_sizes: [usize; 2],
    pub learning_rate: T,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub steps_per_episode: usize,
    pub num_episodes: usize,
    pub target_smoothing: T,
    pub reward_scale: T,
    pub gradient_steps_per_env_step: usize,
}

impl<T: Real> Default for SacConfig<T> {
    fn default() -> Self {
        Self {
            discount: T::lit(0.995),
            hidden_sizes: [128, 128],
            learning_rate: T::lit(3e-4),
            buffer_capacity: 4000,
            batch_size: 32,
            steps_per_episode: 50,
            num_episodes: 2000,
            target_smoothing: T::lit(0.005),
            reward_scale: T::lit(2.0),
            gradient_steps_per_env_step: 1,
        }
    }
}

impl<T: Real> SacConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let (zero, one) = (T::zero(), T::one());
        if !(self.discount >= zero && self.discount <= one) {
            return invalid("discount must lie in [0, 1]");
        }
        if !(self.target_smoothing > zero && self.target_smoothing <= one) {
            return invalid("target smoothing must lie in (0, 1]");
        }
        if !(self.learning_rate > zero) || !(self.reward_scale > zero) {
            return invalid("learning rate and reward scale must be positive");
        }
        if self.hidden_sizes.contains(&0)
            || self.buffer_capacity == 0
            || self.batch_size == 0
            || self.steps_per_episode == 0
            || self.num_episodes == 0
            || self.gradient_steps_per_env_step == 0
        {
            return invalid("sizes and counts must be positive");
        }
        if self.batch_size > self.buffer_capacity {
            return invalid("batch size exceeds buffer capacity");
        }
        Ok(())
    }
}

/// One reparameterized draw from the squashed Gaussian.
#[derive(Clone, Debug)]
pub struct PolicySample<T> {
    pub mean: Vec<T>,
    /// Log-std after clamping.
    pub log_std: Vec<T>,
    /// `true` where the raw log-std fell outside the clamp range.
    pub clamped: Vec<bool>,
    pub eps: Vec<T>,
    pub u: Vec<T>,
    pub action: Vec<T>,
    pub log_prob: T,
}

/// `a = tanh(u)` and `log π(a) = log N(u; μ, σ²) − Σ log(1 − a² + 10⁻⁶)` for `u = μ + σ ε`.
pub fn squashed_gaussian<T: Real>(mean: &[T], log_std: &[T], eps: &[T]) -> (Vec<T>, Vec<T>, T) {
    let half = T::lit(0.5);
    let log_2pi = T::lit((2.0 * std::f64::consts::PI).ln());
    let mut u = Vec::with_capacity(mean.len());
    let mut a = Vec::with_capacity(mean.len());
    let mut lp = T::zero();
    for ((&m, &l), &e) in mean.iter().zip(log_std).zip(eps) {
        let ui = m + l.exp() * e;
        let ai = ui.tanh();
        lp += -half * e * e - l - half * log_2pi - (T::one() - ai * ai + T::lit(SQUASH_EPS)).ln();
        u.push(ui);
        a.push(ai);
    }
    (u, a, lp)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SacLosses<T> {
    pub value: T,
    pub q1: T,
    pub q2: T,
    pub policy: T,
}

impl<T: Real> SacLosses<T> {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.q1.is_finite() && self.q2.is_finite() && self.policy.is_finite()
    }
}

#[derive(Clone, Debug)]
pub struct SacGradients<T> {
    pub value: Vec<T>,
    pub q1: Vec<T>,
    pub q2: Vec<T>,
    pub policy: Vec<T>,
}

impl<T: Real> SacGradients<T> {
    fn zeros(agent: &SacAgent<T>) -> Self {
        Self {
            value: vec![T::zero(); agent.value.num_params()],
            q1: vec![T::zero(); agent.q1.num_params()],
            q2: vec![T::zero(); agent.q2.num_params()],
            policy: vec![T::zero(); agent.policy.num_params()],
        }
    }

    fn add_scaled(&mut self, other: &Self, s: T) {
        for (dst, src) in [
            (&mut self.value, &other.value),
            (&mut self.q1, &other.q1),
            (&mut self.q2, &other.q2),
            (&mut self.policy, &other.policy),
        ] {
            for (d, x) in dst.iter_mut().zip(src) {
                *d += *x * s;
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SacAgent<T> {
    pub config: SacConfig<T>,
    pub value: Mlp<T>,
    pub target_value: Mlp<T>,
    pub q1: Mlp<T>,
    pub q2: Mlp<T>,
    /// Outputs the means followed by the raw log-stds.
    pub policy: Mlp<T>,
    adam_value: Adam<T>,
    adam_q1: Adam<T>,
    adam_q2: Adam<T>,
    adam_policy: Adam<T>,
}

fn concat<T: Copy>(a: &[T], b: &[T]) -> Vec<T> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

impl<T: Real> SacAgent<T> {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, config: SacConfig<T>, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if obs_dim == 0 || act_dim == 0 {
            return invalid("observation and action dimensions must be positive");
        }
        let [h1, h2] = config.hidden_sizes;
        let value = Mlp::new(&[obs_dim, h1, h2, 1], rng);
        let target_value = value.clone();
        let q1 = Mlp::new(&[obs_dim + act_dim, h1, h2, 1], rng);
        let q2 = Mlp::new(&[obs_dim + act_dim, h1, h2, 1], rng);
        let policy = Mlp::new(&[obs_dim, h1, h2, 2 * act_dim], rng);
        let lr = config.learning_rate;
        Ok(Self {
            adam_value: Adam::new(value.num_params(), lr),
            adam_q1: Adam::new(q1.num_params(), lr),
            adam_q2: Adam::new(q2.num_params(), lr),
            adam_policy: Adam::new(policy.num_params(), lr),
            config,
            value,
            target_value,
            q1,
            q2,
            policy,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.value.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.policy.output_dim() / 2
    }

    pub fn policy_sample_with(&self, obs: &[T], eps: &[T]) -> PolicySample<T> {
        let n = self.act_dim();
        let out = self.policy.forward(obs);
        let (lo, hi) = (T::lit(LOG_STD_MIN), T::lit(LOG_STD_MAX));
        let mean = out[..n].to_vec();
        let clamped = out[n..].iter().map(|&l| l < lo || l > hi).collect();
        let log_std: Vec<T> = out[n..].iter().map(|&l| l.max(lo).min(hi)).collect();
        let (u, action, log_prob) = squashed_gaussian(&mean, &log_std, eps);
        PolicySample {
            mean,
            log_std,
            clamped,
            eps: eps.to_vec(),
            u,
            action,
            log_prob,
        }
    }

    pub fn policy_sample<R: Rng + ?Sized>(&self, obs: &[T], rng: &mut R) -> (Vec<T>, T) {
        let eps = standard_normals(rng, self.act_dim());
        let s = self.policy_sample_with(obs, &eps);
        (s.action, s.log_prob)
    }

    /// `min(Q1, Q2)` with the trace of the smaller network (ties go to `Q1`).
    fn min_q(&self, sa: &[T]) -> (T, &Mlp<T>, Trace<T>) {
        let t1 = self.q1.forward_trace(sa);
        let t2 = self.q2.forward_trace(sa);
        if t1.output()[0] <= t2.output()[0] {
            (t1.output()[0], &self.q1, t1)
        } else {
            (t2.output()[0], &self.q2, t2)
        }
    }

    /// Losses for one transition given the policy noise `eps`; gradients are added to `g`.
    fn sample_terms(&self, t: &Transition<T>, eps: &[T], g: &mut SacGradients<T>) -> [T; 4] {
        let cfg = &self.config;
        let half = T::lit(0.5);
        let one = T::one();
        let n = self.act_dim();
        let obs_len = t.state.len();

        // Value: regress V(s) on min Q(s, ã) − log π(ã|s).
        let ptrace = self.policy.forward_trace(&t.state);
        let out = ptrace.output();
        let (lo, hi) = (T::lit(LOG_STD_MIN), T::lit(LOG_STD_MAX));
        let mean = &out[..n];
        let log_std: Vec<T> = out[n..].iter().map(|&l| l.max(lo).min(hi)).collect();
        let (_, action, log_prob) = squashed_gaussian(mean, &log_std, eps);
        let sa_new = concat(&t.state, &action);
        let (min_q, q_net, q_trace) = self.min_q(&sa_new);
        let v_trace = self.value.forward_trace(&t.state);
        let v_err = v_trace.output()[0] - (min_q - log_prob);
        self.value.backward(&v_trace, &[v_err], &mut g.value);

        // Twin Q: regress on α r + γ V̄(s′).
        let target = cfg.reward_scale * t.reward + cfg.discount * self.target_value.forward(&t.next_state)[0];
        let sa = concat(&t.state, &t.action);
        let q1_trace = self.q1.forward_trace(&sa);
        let q2_trace = self.q2.forward_trace(&sa);
        let e1 = q1_trace.output()[0] - target;
        let e2 = q2_trace.output()[0] - target;
        self.q1.backward(&q1_trace, &[e1], &mut g.q1);
        self.q2.backward(&q2_trace, &[e2], &mut g.q2);

        // Policy: log π(ã|s) − min Q(s, ã) through the reparameterized ã.
        let dq_dx = q_net.backward_input(&q_trace, &[one]);
        let mut grad_out = vec![T::zero(); 2 * n];
        let raw_log_std = &out[n..];
        for i in 0..n {
            let a = action[i];
            let s = one - a * a;
            let dlogp_du = T::lit(2.0) * a * s / (s + T::lit(SQUASH_EPS));
            let dj_du = dlogp_du - dq_dx[obs_len + i] * s;
            grad_out[i] = dj_du;
            let inside = raw_log_std[i] >= lo && raw_log_std[i] <= hi;
            grad_out[n + i] = if inside {
                dj_du * eps[i] * log_std[i].exp() - one
            } else {
                T::zero()
            };
        }
        self.policy.backward(&ptrace, &grad_out, &mut g.policy);

        [half * v_err * v_err, half * e1 * e1, half * e2 * e2, log_prob - min_q]
    }

    /// Batch-averaged losses and their gradients with respect to the value,
    /// twin-Q and policy parameters; targets are held fixed.
    pub fn sac_losses(&self, batch: &[&Transition<T>], eps: &[Vec<T>]) -> Result<(SacLosses<T>, SacGradients<T>)> {
        if batch.is_empty() || batch.len() != eps.len() {
            return invalid("batch and noise must be non-empty and of equal length");
        }
        if eps.iter().any(|e| e.len() != self.act_dim()) {
            return invalid("noise length must equal the action dimension");
        }
        // Fixed chunks summed in order keep the result independent of the thread count.
        let parts: Vec<([T; 4], SacGradients<T>)> = batch
            .par_chunks(BATCH_CHUNK)
            .zip(eps.par_chunks(BATCH_CHUNK))
            .map(|(ts, es)| {
                let mut g = SacGradients::zeros(self);
                let mut l = [T::zero(); 4];
                for (t, e) in ts.iter().zip(es) {
                    for (a, b) in l.iter_mut().zip(self.sample_terms(t, e, &mut g)) {
                        *a += b;
                    }
                }
                (l, g)
            })
            .collect();
        let w = T::one() / T::from_usize(batch.len()).unwrap();
        let mut grads = SacGradients::zeros(self);
        let mut l = [T::zero(); 4];
        for (pl, pg) in &parts {
            for (a, b) in l.iter_mut().zip(pl) {
                *a += *b * w;
            }
            grads.add_scaled(pg, w);
        }
        Ok((
            SacLosses {
                value: l[0],
                q1: l[1],
                q2: l[2],
                policy: l[3],
            },
            grads,
        ))
    }

    /// One gradient step on every network followed by the target update.
    /// Non-finite losses or gradients leave the agent untouched.
    pub fn update(&mut self, batch: &[&Transition<T>], eps: &[Vec<T>]) -> Result<SacLosses<T>> {
        let (losses, g) = self.sac_losses(batch, eps)?;
        if !losses.is_finite()
            || !g
                .policy
                .iter()
                .chain(&g.value)
                .chain(&g.q1)
                .chain(&g.q2)
                .all(|x| x.is_finite())
        {
            return Err(Error::NumericalDegeneracy(format!(
                "non-finite loss or gradient (J_V={:e}, J_Q1={:e}, J_Q2={:e}, J_pi={:e})",
                losses.value, losses.q1, losses.q2, losses.policy
            )));
        }
        self.adam_value.step(self.value.params_mut(), &g.value);
        self.adam_q1.step(self.q1.params_mut(), &g.q1);
        self.adam_q2.step(self.q2.params_mut(), &g.q2);
        self.adam_policy.step(self.policy.params_mut(), &g.policy);
        self.target_value
            .polyak_update(&self.value, self.config.target_smoothing);
        Ok(losses)
    }
}

pub fn standard_normals<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<T> {
    (0..n).map(|_| T::lit(rng.sample::<f64, _>(StandardNormal))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub episode: usize,
    pub step: usize,
    pub reward: f64,
    #[serde(rename = "J_V")]
    pub j_v: Option<f64>,
    #[serde(rename = "J_Q1")]
    pub j_q1: Option<f64>,
    #[serde(rename = "J_Q2")]
    pub j_q2: Option<f64>,
    #[serde(rename = "J_pi")]
    pub j_pi: Option<f64>,
}

/// Per-step rewards and losses; losses are empty until the buffer holds a batch.
#[derive(Clone, Debug, Default)]
pub struct TrainingTrace {
    pub rows: Vec<TraceRow>,
    /// Mean reward of each episode.
    pub episode_rewards: Vec<f64>,
    pub best_reward: f64,
}

impl TrainingTrace {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Runs the agent on the environment and returns the best phases seen.
pub fn sac_train<T: Real, R: Rng + ?Sized>(
    env: &mut RisEnvironment<T>,
    config: &SacConfig<T>,
    rng: &mut R,
) -> Result<(PhaseConfig<T>, TrainingTrace)> {
    let mut agent = SacAgent::new(env.observation_dim(), env.action_dim(), config.clone(), rng)?;
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut trace = TrainingTrace {
        best_reward: f64::NEG_INFINITY,
        ..Default::default()
    };
    let mut best_phase = env.phase().clone();
    for episode in 0..config.num_episodes {
        let mut state = env.reset(rng);
        let mut total = 0.0;
        for step in 0..config.steps_per_episode {
            let (action, _) = agent.policy_sample(&state, rng);
            let (next, reward) = env.step(&action)?;
            let r = reward.to_f64_lossy();
            if !r.is_finite() {
                return Err(Error::Diverged {
                    episode,
                    step,
                    what: "non-finite reward".into(),
                });
            }
            total += r;
            if r > trace.best_reward {
                trace.best_reward = r;
                best_phase = env.phase().clone();
            }
            buffer.push(Transition {
                state,
                action,
                reward,
                next_state: next.clone(),
            });
            state = next;
            let mut last = None;
            if buffer.len() >= config.batch_size {
                for _ in 0..config.gradient_steps_per_env_step {
                    let idx = buffer.sample_indices(rng, config.batch_size);
                    let batch: Vec<&Transition<T>> = idx.iter().map(|&i| buffer.get(i)).collect();
                    let eps: Vec<Vec<T>> = (0..batch.len())
                        .map(|_| standard_normals(rng, env.action_dim()))
                        .collect();
                    let l = agent.update(&batch, &eps).map_err(|e| match e {
                        Error::NumericalDegeneracy(what) => Error::Diverged { episode, step, what },
                        other => other,
                    })?;
                    last = Some(l);
                }
            }
            trace.rows.push(TraceRow {
                episode,
                step,
                reward: r,
                j_v: last.map(|l| l.value.to_f64_lossy()),
                j_q1: last.map(|l| l.q1.to_f64_lossy()),
                j_q2: last.map(|l| l.q2.to_f64_lossy()),
                j_pi: last.map(|l| l.policy.to_f64_lossy()),
            });
        }
        trace.episode_rewards.push(total / config.steps_per_episode as f64);
    }
    Ok((best_phase, trace))
}
