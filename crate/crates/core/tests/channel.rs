#![allow(clippy::needless_range_loop)]

mod common;

use common::Setup;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ris_cellfree::channel::{cascaded_los, sample_realization, PhaseConfig};
use ris_cellfree::montecarlo::{run_chunked, ComplexAccumulator};

fn c64(z: ris_cellfree::Cx<f64>) -> Complex64 {
    Complex64::new(z.re, z.im)
}

#[test]
fn aggregate_mean_and_covariance_match_sampling() {
    let setup = Setup::small();
    let model = setup.model(11);
    let stats = &model.stats;
    let d = stats.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let phase = PhaseConfig::random(&mut rng, d.num_ris, d.elements);
    let means = cascaded_los(stats, &phase, None);
    let (jn, kn, n) = (d.num_aps, d.num_users, d.antennas);
    let slots = jn * kn * (n + n * n);
    let acc = run_chunked(
        21,
        100_000,
        || vec![ComplexAccumulator::default(); slots],
        |rng, acc| {
            let real = sample_realization(stats, &phase, rng);
            let mut s = 0;
            for j in 0..jn {
                for k in 0..kn {
                    let q = real.q(j, k);
                    for a in 0..n {
                        acc[s].push(c64(q[a]));
                        s += 1;
                    }
                    for a in 0..n {
                        for b in 0..n {
                            let da = q[a] - means[j][k][a];
                            let db = q[b] - means[j][k][b];
                            acc[s].push(c64(da * db.conj()));
                            s += 1;
                        }
                    }
                }
            }
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                x.merge(y);
            }
        },
    );
    let mut s = 0;
    let mut worst: f64 = 0.0;
    for j in 0..jn {
        for k in 0..kn {
            let cov = model.operator.channel_covariance(stats, j, k);
            for a in 0..n {
                let z = acc[s].estimate().z_score(c64(means[j][k][a]));
                worst = worst.max(z);
                s += 1;
            }
            for a in 0..n {
                for b in 0..n {
                    let z = acc[s].estimate().z_score(c64(cov[(a, b)]));
                    worst = worst.max(z);
                    s += 1;
                }
            }
        }
    }
    assert!(worst < 3.0, "largest z-score {worst}");
}

#[test]
fn removing_every_ris_leaves_rayleigh_direct_links() {
    let mut setup = Setup::small();
    setup.num_ris = 0;
    let model = setup.model(2);
    let stats = &model.stats;
    let phase = PhaseConfig::zeros(0, setup.elements);
    assert!(cascaded_los(stats, &phase, None)
        .iter()
        .flatten()
        .flatten()
        .all(|z| z.norm() == 0.0));
    for j in 0..setup.num_aps {
        for k in 0..setup.num_users {
            let cov = model.operator.channel_covariance(stats, j, k);
            let g = stats.gamma[j][k];
            assert!((cov[(0, 0)].re - g).abs() <= 1e-12 * g);
            assert_eq!(cov[(0, 1)].norm(), 0.0);
        }
    }
}
