//! Sampling oracle: chunked deterministic Monte-Carlo, empirical moments of the
//! MRC statistics, symbol-level detection and the centralized perfect-CSI baseline.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{
    cascaded_los, complex_normal, sample_realization, sample_realization_masked, ChannelRealization, ChannelStatistics,
    ComponentMask, PhaseConfig,
};
use crate::closed_form::se::spectral_efficiency;
use crate::closed_form::MomentSet;
use crate::estimation::{estimate_channel, pilot_observation, LmmseOperator, PilotAssignment};
use crate::linalg::{dotc, norm_sq, CMatrix};
use crate::scalar::{Cx, Real};

/// Samples drawn from one generator stream.
pub const CHUNK_SIZE: usize = 1024;

/// Runs `n_samples` draws split into fixed-size chunks, each on its own ChaCha
/// stream, and merges the per-chunk accumulators in chunk order. The result is
/// independent of the number of worker threads.
pub fn run_chunked<A, I, F, G>(seed: u64, n_samples: usize, init: I, sample: F, merge: G) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut ChaCha8Rng, &mut A) + Sync,
    G: Fn(&mut A, A),
{
    let chunks = n_samples.div_ceil(CHUNK_SIZE);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut acc = init();
            let todo = CHUNK_SIZE.min(n_samples - c * CHUNK_SIZE);
            for _ in 0..todo {
                sample(&mut rng, &mut acc);
            }
            acc
        })
        .collect();
    let mut out = init();
    for p in parts {
        merge(&mut out, p);
    }
    out
}

/// Sample mean with its standard error `sqrt(mean|x − x̄|² / n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    #[serde(serialize_with = "ser_complex")]
    pub mean: Complex64,
    pub std_error: f64,
    pub n_samples: usize,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

impl McEstimate {
    pub fn exact(mean: Complex64) -> Self {
        Self {
            mean,
            std_error: 0.0,
            n_samples: 0,
        }
    }

    /// `|value − mean| / std_error` (0 when both agree exactly).
    pub fn z_score(&self, value: Complex64) -> f64 {
        let d = (value - self.mean).norm();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }

    pub fn within(&self, value: Complex64, k_sigma: f64) -> bool {
        self.z_score(value) <= k_sigma
    }
}

/// Streaming mean and spread of complex samples (Chan's parallel update).
#[derive(Clone, Copy, Debug, Default)]
pub struct ComplexAccumulator {
    n: usize,
    mean: Complex64,
    m2: f64,
}

impl ComplexAccumulator {
    pub fn push(&mut self, x: Complex64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d.norm_sqr() * (1.0 - 1.0 / self.n as f64);
    }

    pub fn merge(&mut self, o: &Self) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * (o.n as f64 / n as f64);
        self.m2 += o.m2 + d.norm_sqr() * (self.n as f64 * o.n as f64 / n as f64);
        self.n = n;
    }

    pub fn estimate(&self) -> McEstimate {
        let n = self.n.max(1) as f64;
        McEstimate {
            mean: self.mean,
            std_error: (self.m2 / n / n).sqrt(),
            n_samples: self.n,
        }
    }
}

/// Ratio `X̄/Ȳ` averaged over groups, with a delta-method standard error.
#[derive(Clone, Debug)]
pub struct RatioAccumulator {
    groups: usize,
    n: usize,
    sum: Vec<f64>,
    sum_outer: Vec<f64>,
}

impl RatioAccumulator {
    pub fn new(groups: usize) -> Self {
        let d = 2 * groups;
        Self {
            groups,
            n: 0,
            sum: vec![0.0; d],
            sum_outer: vec![0.0; d * d],
        }
    }

    pub fn push(&mut self, num: &[f64], den: &[f64]) {
        let d = 2 * self.groups;
        let z: Vec<f64> = num.iter().chain(den).copied().collect();
        self.n += 1;
        for a in 0..d {
            self.sum[a] += z[a];
            for b in 0..d {
                self.sum_outer[a * d + b] += z[a] * z[b];
            }
        }
    }

    pub fn merge(&mut self, o: &Self) {
        self.n += o.n;
        for (a, b) in self.sum.iter_mut().zip(&o.sum) {
            *a += b;
        }
        for (a, b) in self.sum_outer.iter_mut().zip(&o.sum_outer) {
            *a += b;
        }
    }

    pub fn estimate(&self) -> McEstimate {
        let (g, d) = (self.groups, 2 * self.groups);
        let n = self.n.max(1) as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / n).collect();
        let ratios: Vec<f64> = (0..g).map(|j| mean[j] / mean[g + j]).collect();
        let value = ratios.iter().sum::<f64>() / g as f64;
        let mut grad = vec![0.0; d];
        for j in 0..g {
            grad[j] = 1.0 / (g as f64 * mean[g + j]);
            grad[g + j] = -ratios[j] / (g as f64 * mean[g + j]);
        }
        let mut var = 0.0;
        for a in 0..d {
            for b in 0..d {
                let cov = self.sum_outer[a * d + b] / n - mean[a] * mean[b];
                var += grad[a] * cov * grad[b];
            }
        }
        McEstimate {
            mean: Complex64::new(value, 0.0),
            std_error: (var.max(0.0) / n).sqrt(),
            n_samples: self.n,
        }
    }
}

/// Empirical counterparts of a [`MomentSet`].
#[derive(Clone, Debug)]
pub struct MomentEstimates {
    pub user: usize,
    pub mean_wkk: Vec<McEstimate>,
    /// `second[i]` is row-major J×J.
    pub second: Vec<Vec<McEstimate>>,
    pub estimate_power: Vec<McEstimate>,
}

impl MomentEstimates {
    /// Point estimates as a moment set, for plugging into the SINR formulas.
    pub fn to_moment_set(&self) -> MomentSet<f64> {
        let jn = self.mean_wkk.len();
        MomentSet {
            user: self.user,
            mean_wkk: self.mean_wkk.iter().map(|e| e.mean).collect(),
            second: self
                .second
                .iter()
                .map(|s| CMatrix::from_fn(jn, jn, |r, c| s[r * jn + c].mean))
                .collect(),
            v: self.mean_wkk.iter().map(|e| e.mean.re).collect(),
            estimate_power: self.estimate_power.iter().map(|e| e.mean.re).collect(),
        }
    }
}

#[derive(Clone)]
struct MomentAcc {
    mean: Vec<ComplexAccumulator>,
    second: Vec<ComplexAccumulator>,
    power: Vec<ComplexAccumulator>,
}

fn to_c64<T: Real>(z: Cx<T>) -> Complex64 {
    Complex64::new(z.re.to_f64_lossy(), z.im.to_f64_lossy())
}

/// One pilot phase and estimate on a fresh realization; returns `(q, q̂)` indexed `j·K + k`.
fn draw_estimates<T: Real>(
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
    assignment: &PilotAssignment,
    mask: Option<&ComponentMask>,
    means: &[Vec<Vec<Cx<T>>>],
    rng: &mut ChaCha8Rng,
) -> (ChannelRealization<T>, Vec<Vec<Cx<T>>>) {
    let real = sample_realization_masked(stats, phase, mask, rng);
    let noise = if mask.is_none_or(|m| m.pilot_noise) {
        operator.pilot_noise()
    } else {
        T::zero()
    };
    let y = pilot_observation(&real.q, stats.dims.num_aps, assignment, noise, rng);
    let est = estimate_channel(operator, &y, means, assignment);
    (real, est)
}

/// Empirical `E{w_{k,k}}`, `E{w_{k,i}w_{k,i}ᴴ}` and `E{‖q̂_{j,k}‖²}` for every user,
/// optionally with channel components masked (estimator held fixed).
pub fn empirical_moments_all<T: Real>(
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
    assignment: &PilotAssignment,
    mask: Option<&ComponentMask>,
    n_samples: usize,
    seed: u64,
) -> Vec<MomentEstimates> {
    let d = stats.dims;
    let (jn, kn) = (d.num_aps, d.num_users);
    let means = cascaded_los(stats, phase, mask);
    let init = || {
        (0..kn)
            .map(|_| MomentAcc {
                mean: vec![ComplexAccumulator::default(); jn],
                second: vec![ComplexAccumulator::default(); kn * jn * jn],
                power: vec![ComplexAccumulator::default(); jn],
            })
            .collect::<Vec<_>>()
    };
    let acc = run_chunked(
        seed,
        n_samples,
        init,
        |rng, acc| {
            let (real, est) = draw_estimates(stats, operator, phase, assignment, mask, &means, rng);
            for (k, a) in acc.iter_mut().enumerate() {
                let w: Vec<Vec<Complex64>> = (0..kn)
                    .map(|i| (0..jn).map(|j| to_c64(dotc(&est[j * kn + k], real.q(j, i)))).collect())
                    .collect();
                for j in 0..jn {
                    a.mean[j].push(w[k][j]);
                    a.power[j].push(Complex64::new(norm_sq(&est[j * kn + k]).to_f64_lossy(), 0.0));
                }
                for (i, wi) in w.iter().enumerate() {
                    for j in 0..jn {
                        for h in 0..jn {
                            a.second[(i * jn + j) * jn + h].push(wi[j] * wi[h].conj());
                        }
                    }
                }
            }
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                for (p, q) in x.mean.iter_mut().zip(&y.mean) {
                    p.merge(q);
                }
                for (p, q) in x.second.iter_mut().zip(&y.second) {
                    p.merge(q);
                }
                for (p, q) in x.power.iter_mut().zip(&y.power) {
                    p.merge(q);
                }
            }
        },
    );
    acc.into_iter()
        .enumerate()
        .map(|(k, a)| MomentEstimates {
            user: k,
            mean_wkk: a.mean.iter().map(ComplexAccumulator::estimate).collect(),
            second: a
                .second
                .chunks(jn * jn)
                .map(|c| c.iter().map(ComplexAccumulator::estimate).collect())
                .collect(),
            estimate_power: a.power.iter().map(ComplexAccumulator::estimate).collect(),
        })
        .collect()
}

pub fn empirical_moments<T: Real>(
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
    assignment: &PilotAssignment,
    k: usize,
    n_samples: usize,
    seed: u64,
) -> MomentEstimates {
    empirical_moments_all(stats, operator, phase, assignment, None, n_samples, seed).swap_remove(k)
}

/// Empirical `E{w_{k,i} w_{k,i}ᴴ}` (row-major J×J) with `keep` applied, minus
/// the same quantity under `subtract` evaluated on identical draws.
pub fn component_oracle<T: Real>(
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
    assignment: &PilotAssignment,
    keep: &ComponentMask,
    subtract: Option<&ComponentMask>,
    (k, i): (usize, usize),
    n_samples: usize,
    seed: u64,
) -> Vec<McEstimate> {
    let d = stats.dims;
    let (jn, kn) = (d.num_aps, d.num_users);
    if keep.is_empty() && subtract.is_none_or(ComponentMask::is_empty) {
        return vec![McEstimate::exact(Complex64::new(0.0, 0.0)); jn * jn];
    }
    let means_keep = cascaded_los(stats, phase, Some(keep));
    let means_sub = subtract.map(|m| cascaded_los(stats, phase, Some(m)));
    let acc = run_chunked(
        seed,
        n_samples,
        || vec![ComplexAccumulator::default(); jn * jn],
        |rng, acc| {
            let real = sample_realization(stats, phase, rng);
            let noise: Vec<Vec<Cx<T>>> = (0..jn * assignment.tau_p)
                .map(|_| (0..d.antennas).map(|_| complex_normal::<T, _>(rng)).collect())
                .collect();
            let outer = |mask: &ComponentMask, means: &[Vec<Vec<Cx<T>>>]| {
                let q = real.aggregate(stats, phase, Some(mask));
                let sd = if mask.pilot_noise {
                    operator.pilot_noise().sqrt()
                } else {
                    T::zero()
                };
                let mut w = Vec::with_capacity(jn);
                for j in 0..jn {
                    let mut y = noise[j * assignment.tau_p + assignment.pilot_of_user[k]]
                        .iter()
                        .map(|z| z.scale(sd))
                        .collect::<Vec<_>>();
                    for &l in &assignment.copilots[k] {
                        for (a, b) in y.iter_mut().zip(&q[j * kn + l]) {
                            *a += b;
                        }
                        for (a, b) in y.iter_mut().zip(&means[j][l]) {
                            *a -= b;
                        }
                    }
                    let mut est = operator.a(j, k).mul_vec(&y);
                    for (e, m) in est.iter_mut().zip(&means[j][k]) {
                        *e += m;
                    }
                    w.push(to_c64(dotc(&est, &q[j * kn + i])));
                }
                let mut out = vec![Complex64::new(0.0, 0.0); jn * jn];
                for j in 0..jn {
                    for h in 0..jn {
                        out[j * jn + h] = w[j] * w[h].conj();
                    }
                }
                out
            };
            let mut v = outer(keep, &means_keep);
            if let (Some(m), Some(ms)) = (subtract, means_sub.as_ref()) {
                for (a, b) in v.iter_mut().zip(outer(m, ms)) {
                    *a -= b;
                }
            }
            for (a, x) in acc.iter_mut().zip(v) {
                a.push(x);
            }
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                x.merge(y);
            }
        },
    );
    acc.iter().map(ComplexAccumulator::estimate).collect()
}

/// Data phase and CPU fusion: `y_j = √ρ_s Σ_i q_{j,i} x_i + n_j`,
/// `x̂_k = Σ_j a*_{j,k} q̂_{j,k}ᴴ y_j`.
pub fn uplink_detect<T: Real, R: Rng + ?Sized>(
    realization: &ChannelRealization<T>,
    estimates: &[Vec<Cx<T>>],
    weights: &[Vec<Cx<T>>],
    symbols: &[Cx<T>],
    rho_s: T,
    sigma2: T,
    rng: &mut R,
) -> Vec<Cx<T>> {
    let kn = symbols.len();
    let jn = realization.q.len() / kn;
    let n = realization.q[0].len();
    let amp = rho_s.sqrt();
    let sd = sigma2.sqrt();
    let mut out = vec![Cx::new(T::zero(), T::zero()); kn];
    for j in 0..jn {
        let mut y: Vec<Cx<T>> = (0..n).map(|_| complex_normal::<T, R>(rng).scale(sd)).collect();
        for (i, x) in symbols.iter().enumerate() {
            for (yi, qi) in y.iter_mut().zip(realization.q(j, i)) {
                *yi += qi * x.scale(amp);
            }
        }
        for k in 0..kn {
            out[k] += weights[k][j].conj() * dotc(&estimates[j * kn + k], &y);
        }
    }
    out
}

/// SINR of global MRC with perfect CSI, `v_k = q_k` stacked over all APs.
pub fn centralized_sinr<T: Real>(realization: &ChannelRealization<T>, num_users: usize, rho: T, sigma2: T) -> Vec<T> {
    let jn = realization.q.len() / num_users;
    let stacked: Vec<Vec<Cx<T>>> = (0..num_users)
        .map(|k| (0..jn).flat_map(|j| realization.q(j, k).iter().copied()).collect())
        .collect();
    (0..num_users)
        .map(|k| {
            let qk = &stacked[k];
            let p = norm_sq(qk);
            let interference: T = (0..num_users)
                .filter(|&i| i != k)
                .map(|i| dotc(qk, &stacked[i]).norm_sqr())
                .sum();
            rho * p * p / (rho * interference + sigma2 * p)
        })
        .collect()
}

pub fn centralized_instantaneous_se<T: Real>(
    realization: &ChannelRealization<T>,
    num_users: usize,
    rho: T,
    sigma2: T,
    tau_p: usize,
    tau_c: usize,
) -> Vec<T> {
    centralized_sinr(realization, num_users, rho, sigma2)
        .into_iter()
        .map(|s| spectral_efficiency(s, tau_p, tau_c))
        .collect()
}

/// Ergodic centralized sum SE averaged over `n_samples` realizations.
pub fn centralized_sum_se<T: Real>(
    stats: &ChannelStatistics<T>,
    phase: &PhaseConfig<T>,
    rho: T,
    sigma2: T,
    tau_p: usize,
    tau_c: usize,
    n_samples: usize,
    seed: u64,
) -> McEstimate {
    let kn = stats.dims.num_users;
    run_chunked(
        seed,
        n_samples,
        ComplexAccumulator::default,
        |rng, acc| {
            let real = sample_realization(stats, phase, rng);
            let s: T = centralized_instantaneous_se(&real, kn, rho, sigma2, tau_p, tau_c)
                .into_iter()
                .sum();
            acc.push(Complex64::new(s.to_f64_lossy(), 0.0));
        },
        |a, b| a.merge(&b),
    )
    .estimate()
}

/// Symbol-level SINR `|E{x̂x*}|² / (E|x̂|² − |E{x̂x*}|²)` of user `k` with a fresh
/// channel, pilot phase and QPSK symbol vector in every slot.
pub fn empirical_sinr<T: Real>(
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
    assignment: &PilotAssignment,
    weights: &[Vec<Cx<T>>],
    rho_s: T,
    slots: usize,
    seed: u64,
) -> Vec<f64> {
    let kn = stats.dims.num_users;
    let means = cascaded_los(stats, phase, None);
    let (corr, power) = run_chunked(
        seed,
        slots,
        || {
            (
                vec![ComplexAccumulator::default(); kn],
                vec![ComplexAccumulator::default(); kn],
            )
        },
        |rng, (corr, power)| {
            let (real, est) = draw_estimates(stats, operator, phase, assignment, None, &means, rng);
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let x: Vec<Cx<T>> = (0..kn)
                .map(|_| {
                    let re = if rng.random::<bool>() { s } else { -s };
                    let im = if rng.random::<bool>() { s } else { -s };
                    Cx::new(T::lit(re), T::lit(im))
                })
                .collect();
            let xh = uplink_detect(&real, &est, weights, &x, rho_s, operator.sigma2, rng);
            for k in 0..kn {
                corr[k].push(to_c64(xh[k] * x[k].conj()));
                power[k].push(Complex64::new(xh[k].norm_sqr().to_f64_lossy(), 0.0));
            }
        },
        |a, b| {
            for (x, y) in a.0.iter_mut().zip(&b.0) {
                x.merge(y);
            }
            for (x, y) in a.1.iter_mut().zip(&b.1) {
                x.merge(y);
            }
        },
    );
    corr.iter()
        .zip(&power)
        .map(|(c, p)| {
            let s = c.estimate().mean.norm_sqr();
            s / (p.estimate().mean.re - s)
        })
        .collect()
}
