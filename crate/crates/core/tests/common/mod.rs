#![allow(dead_code, clippy::needless_range_loop)]

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ris_cellfree::channel::{
    build_channel_statistics, cascaded_los, sample_realization, ChannelStatistics, PhaseConfig,
};
use ris_cellfree::closed_form::se::{LinkParams, SystemModel};
use ris_cellfree::estimation::{estimate_channel, simulate_pilot_phase};
use ris_cellfree::geometry::{AngleSet, PathLossModel, PlacementBox, RicianFactors, SystemTopology};
use ris_cellfree::linalg::dotc;
use ris_cellfree::montecarlo::{run_chunked, ComplexAccumulator};
use ris_cellfree::scalar::dbm_to_watts;

pub struct Setup {
    pub num_aps: usize,
    pub antennas: usize,
    pub num_users: usize,
    pub num_ris: usize,
    pub elements: usize,
    pub grid: (usize, usize),
    pub tau_p: usize,
    pub kappa: f64,
    pub epsilon: f64,
    pub rho_dbm: f64,
    pub sigma2_dbm: f64,
}

impl Setup {
    /// J=2, N=2, K=2, τ_p=2, R=2, M=4, κ=ε=10, ρ=0 dBm, σ²=−104 dBm.
    pub fn small() -> Self {
        Self {
            num_aps: 2,
            antennas: 2,
            num_users: 2,
            num_ris: 2,
            elements: 4,
            grid: (2, 2),
            tau_p: 2,
            kappa: 10.0,
            epsilon: 10.0,
            rho_dbm: 0.0,
            sigma2_dbm: -104.0,
        }
    }

    /// Nodes in a 40 m square so that every link contributes at these powers.
    pub fn placement() -> PlacementBox<f64> {
        PlacementBox {
            width: 40.0,
            depth: 40.0,
            ap_height: 10.0,
            user_height: 1.5,
            ris_height: (5.0, 15.0),
        }
    }

    pub fn stats(&self, seed: u64) -> ChannelStatistics<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (aps, ris, users) = Self::placement().sample(&mut rng, self.num_aps, self.num_ris, self.num_users);
        let topo = SystemTopology {
            num_aps: self.num_aps,
            antennas_per_ap: self.antennas,
            num_users: self.num_users,
            num_ris: self.num_ris,
            elements_per_ris: self.elements,
            ris_grid: self.grid,
            d_over_lambda: 0.5,
            ap_positions: aps,
            ris_positions: ris,
            user_positions: users,
        };
        let angles = AngleSet::random(&mut rng, self.num_ris, self.num_aps, self.num_users);
        let rician = RicianFactors::uniform(self.kappa, self.epsilon, self.num_ris, self.num_aps, self.num_users);
        build_channel_statistics(&topo, &PathLossModel::default(), &rician, &angles).unwrap()
    }

    pub fn params(&self) -> LinkParams<f64> {
        LinkParams::new(
            dbm_to_watts(self.rho_dbm),
            dbm_to_watts(self.sigma2_dbm),
            self.tau_p,
            200,
        )
    }

    pub fn model(&self, seed: u64) -> SystemModel<f64> {
        SystemModel::new(self.stats(seed), self.params()).unwrap()
    }
}

/// One AP (N=2), two users, one 2-element RIS; direct links are nearly blocked so
/// the phases drive the sum SE.
pub fn toy_model(seed: u64) -> SystemModel<f64> {
    use ris_cellfree::channel::{ChannelStatistics, Dims};
    use ris_cellfree::geometry::LargeScale;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = Dims {
        num_aps: 1,
        antennas: 2,
        num_users: 2,
        num_ris: 1,
        elements: 2,
    };
    let large = LargeScale {
        beta: vec![vec![1e-5]],
        alpha: vec![vec![1e-5, 1e-5]],
        gamma: vec![vec![1e-12, 1e-12]],
    };
    let angles = AngleSet::random(&mut rng, 1, 1, 2);
    let rician = RicianFactors::uniform(10.0, 10.0, 1, 1, 2);
    let stats = ChannelStatistics::from_large_scale(dims, (1, 2), 0.5, &large, &rician, &angles).unwrap();
    let params = LinkParams::new(dbm_to_watts(0.0), dbm_to_watts(-104.0), 2, 200);
    SystemModel::new(stats, params).unwrap()
}

pub fn random_phase(model: &SystemModel<f64>, seed: u64) -> PhaseConfig<f64> {
    let d = model.stats.dims;
    PhaseConfig::random(&mut ChaCha8Rng::seed_from_u64(seed), d.num_ris, d.elements)
}

fn c64(z: ris_cellfree::Cx<f64>) -> Complex64 {
    Complex64::new(z.re, z.im)
}

fn merge_all(a: &mut [ComplexAccumulator], b: &[ComplexAccumulator]) {
    for (x, y) in a.iter_mut().zip(b) {
        x.merge(y);
    }
}

/// Largest z-score of the sampled pilot-observation mean and covariance against
/// their closed forms, over every AP, user and entry.
pub fn observation_worst_z(model: &SystemModel<f64>, phase: &PhaseConfig<f64>, n: usize, seed: u64) -> f64 {
    let (stats, asg, op) = (&model.stats, &model.assignment, &model.operator);
    let d = stats.dims;
    let (jn, kn, na) = (d.num_aps, d.num_users, d.antennas);
    let means = cascaded_los(stats, phase, None);
    let y_mean = |j: usize, k: usize, a: usize| {
        asg.copilots[k]
            .iter()
            .map(|&l| means[j][l][a])
            .sum::<ris_cellfree::Cx<f64>>()
    };
    let slots = jn * kn * (na + na * na);
    let acc = run_chunked(
        seed,
        n,
        || vec![ComplexAccumulator::default(); slots],
        |rng, acc| {
            let real = sample_realization(stats, phase, rng);
            let y = simulate_pilot_phase(&real, asg, model.params.rho, model.params.sigma2, rng);
            let mut s = 0;
            for j in 0..jn {
                for k in 0..kn {
                    let v = &y[j * kn + k];
                    for a in 0..na {
                        acc[s].push(c64(v[a]));
                        s += 1;
                    }
                    for a in 0..na {
                        for b in 0..na {
                            acc[s].push(c64((v[a] - y_mean(j, k, a)) * (v[b] - y_mean(j, k, b)).conj()));
                            s += 1;
                        }
                    }
                }
            }
        },
        |a, b| merge_all(a, &b),
    );
    let mut s = 0;
    let mut worst: f64 = 0.0;
    for j in 0..jn {
        for k in 0..kn {
            let cy = op.observation_covariance(stats, j, k);
            for a in 0..na {
                worst = worst.max(acc[s].estimate().z_score(c64(y_mean(j, k, a))));
                s += 1;
            }
            for a in 0..na {
                for b in 0..na {
                    worst = worst.max(acc[s].estimate().z_score(c64(cy[(a, b)])));
                    s += 1;
                }
            }
        }
    }
    worst
}

#[derive(Debug)]
pub struct EstimateCheck {
    /// Largest z-score of the sampled `E{q̂}` against the LoS mean.
    pub worst_mean_z: f64,
    /// Largest z-score of `E{q̂ᴴq̂ − q̂ᴴq}` against zero.
    pub worst_gap_z: f64,
    /// Largest `|E{q̂ᴴq̂} − E{q̂ᴴq}| / |E{q̂ᴴq}|`.
    pub worst_relative_gap: f64,
}

pub fn estimate_checks(model: &SystemModel<f64>, phase: &PhaseConfig<f64>, n: usize, seed: u64) -> EstimateCheck {
    let (stats, asg, op) = (&model.stats, &model.assignment, &model.operator);
    let d = stats.dims;
    let (jn, kn, na) = (d.num_aps, d.num_users, d.antennas);
    let means = cascaded_los(stats, phase, None);
    // Per (j, k): N entries of q̂, then q̂ᴴq̂ − q̂ᴴq, then q̂ᴴq.
    let per = na + 2;
    let acc = run_chunked(
        seed,
        n,
        || vec![ComplexAccumulator::default(); jn * kn * per],
        |rng, acc| {
            let real = sample_realization(stats, phase, rng);
            let y = simulate_pilot_phase(&real, asg, model.params.rho, model.params.sigma2, rng);
            let est = estimate_channel(op, &y, &means, asg);
            for jk in 0..jn * kn {
                let base = jk * per;
                for a in 0..na {
                    acc[base + a].push(c64(est[jk][a]));
                }
                let cross = dotc(&est[jk], &real.q[jk]);
                acc[base + na].push(c64(dotc(&est[jk], &est[jk]) - cross));
                acc[base + na + 1].push(c64(cross));
            }
        },
        |a, b| merge_all(a, &b),
    );
    let zero = Complex64::new(0.0, 0.0);
    let mut out = EstimateCheck {
        worst_mean_z: 0.0,
        worst_gap_z: 0.0,
        worst_relative_gap: 0.0,
    };
    for j in 0..jn {
        for k in 0..kn {
            let base = (j * kn + k) * per;
            for a in 0..na {
                out.worst_mean_z = out
                    .worst_mean_z
                    .max(acc[base + a].estimate().z_score(c64(means[j][k][a])));
            }
            let gap = acc[base + na].estimate();
            let cross = acc[base + na + 1].estimate();
            out.worst_gap_z = out.worst_gap_z.max(gap.z_score(zero));
            out.worst_relative_gap = out.worst_relative_gap.max(gap.mean.norm() / cross.mean.norm());
        }
    }
    out
}
