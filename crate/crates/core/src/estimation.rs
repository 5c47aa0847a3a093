//! Pilot assignment, pilot-phase simulation and the LMMSE estimator of the aggregated channel.

use rand::Rng;

use crate::channel::{cascaded_los, sample_realization, PhaseConfig};
use crate::channel::{complex_normal, ChannelRealization, ChannelStatistics, Dims};
use crate::error::{invalid, Error, Result};
use crate::linalg::{norm_sq, CMatrix, Cholesky};
use crate::montecarlo::{run_chunked, McEstimate, RatioAccumulator};
use crate::scalar::{czero, Cx, Real};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PilotAssignment {
    pub tau_p: usize,
    pub pilot_of_user: Vec<usize>,
    /// `P_k`, sorted, always containing `k`.
    pub copilots: Vec<Vec<usize>>,
}

/// Round-robin assignment: user `k` sends pilot `k mod τ_p`.
pub fn assign_pilots(num_users: usize, tau_p: usize) -> Result<PilotAssignment> {
    if num_users == 0 || tau_p == 0 {
        return invalid("K and tau_p must be positive");
    }
    let pilot_of_user: Vec<usize> = (0..num_users).map(|k| k % tau_p).collect();
    let copilots = (0..num_users)
        .map(|k| {
            (0..num_users)
                .filter(|&l| pilot_of_user[l] == pilot_of_user[k])
                .collect()
        })
        .collect();
    Ok(PilotAssignment {
        tau_p,
        pilot_of_user,
        copilots,
    })
}

impl PilotAssignment {
    pub fn num_users(&self) -> usize {
        self.pilot_of_user.len()
    }

    /// `P_k ∖ {k}`.
    pub fn others(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.copilots[k].iter().copied().filter(move |&l| l != k)
    }

    pub fn is_contaminated(&self, k: usize) -> bool {
        self.copilots[k].len() > 1
    }
}

/// Second-order statistics of the pilot observation:
/// `Cov{q_k} = Σ_r ξ a aᴴ + μ I`, `Cov{q_k, q_l} = δ_{k,l} I`,
/// `C_y = Σ_r ω a aᴴ + ν I`, `C_qy = Σ_r ξ a aᴴ + χ I`.
#[derive(Clone, Debug)]
pub struct LmmseScalars<T> {
    dims: Dims,
    xi: Vec<T>,
    mu: Vec<T>,
    delta: Vec<Cx<T>>,
    omega: Vec<T>,
    nu: Vec<T>,
    chi: Vec<Cx<T>>,
    pilot_noise: T,
}

impl<T: Real> LmmseScalars<T> {
    fn rjk(&self, r: usize, j: usize, k: usize) -> usize {
        (r * self.dims.num_aps + j) * self.dims.num_users + k
    }
    fn jk(&self, j: usize, k: usize) -> usize {
        j * self.dims.num_users + k
    }
    pub fn xi(&self, r: usize, j: usize, k: usize) -> T {
        self.xi[self.rjk(r, j, k)]
    }
    pub fn omega(&self, r: usize, j: usize, k: usize) -> T {
        self.omega[self.rjk(r, j, k)]
    }
    pub fn mu(&self, j: usize, k: usize) -> T {
        self.mu[self.jk(j, k)]
    }
    /// `δ_{j,k,l} = Σ_r η⁽³⁾_k η⁽³⁾_l ḡ_lᴴ ḡ_k`, so that `Cov{q_k, q_l} = δ_{j,k,l} I`.
    pub fn delta(&self, j: usize, k: usize, l: usize) -> Cx<T> {
        let kn = self.dims.num_users;
        self.delta[(j * kn + k) * kn + l]
    }
    pub fn nu(&self, j: usize, k: usize) -> T {
        self.nu[self.jk(j, k)]
    }
    pub fn chi(&self, j: usize, k: usize) -> Cx<T> {
        self.chi[self.jk(j, k)]
    }
    /// `σ² / (ρ τ_p)`.
    pub fn pilot_noise(&self) -> T {
        self.pilot_noise
    }
}

pub fn lmmse_scalars<T: Real>(
    stats: &ChannelStatistics<T>,
    assignment: &PilotAssignment,
    rho: T,
    sigma2: T,
) -> Result<LmmseScalars<T>> {
    let d = stats.dims;
    if assignment.num_users() != d.num_users {
        return invalid("pilot assignment does not match K");
    }
    if !(rho > T::zero()) || !(sigma2 >= T::zero()) {
        return invalid("pilot power must be positive and noise power non-negative");
    }
    let (rn, jn, kn) = (d.num_ris, d.num_aps, d.num_users);
    let m = T::from_usize(d.elements).unwrap();
    let pilot_noise = sigma2 / (rho * T::from_usize(assignment.tau_p).unwrap());

    let mut xi = Vec::with_capacity(rn * jn * kn);
    for r in 0..rn {
        for j in 0..jn {
            for k in 0..kn {
                xi.push(m * stats.eta(2, r, j, k).powi(2));
            }
        }
    }
    let mut mu = Vec::with_capacity(jn * kn);
    for j in 0..jn {
        for k in 0..kn {
            let ris: T = (0..rn)
                .map(|r| m * (stats.eta(3, r, j, k).powi(2) + stats.eta(4, r, j, k).powi(2)))
                .sum();
            mu.push(ris + stats.eta5(j, k).powi(2));
        }
    }
    let mut delta = Vec::with_capacity(jn * kn * kn);
    for j in 0..jn {
        for k in 0..kn {
            for l in 0..kn {
                let mut s = czero();
                for r in 0..rn {
                    let w = stats.eta(3, r, j, k) * stats.eta(3, r, j, l);
                    if w != T::zero() {
                        s += crate::linalg::dotc(&stats.ris_arrival[r][l], &stats.ris_arrival[r][k]).scale(w);
                    }
                }
                delta.push(s);
            }
        }
    }
    let mut out = LmmseScalars {
        dims: d,
        xi,
        mu,
        delta,
        omega: Vec::new(),
        nu: Vec::new(),
        chi: Vec::new(),
        pilot_noise,
    };
    let mut omega = Vec::with_capacity(rn * jn * kn);
    for r in 0..rn {
        for j in 0..jn {
            for k in 0..kn {
                omega.push(assignment.copilots[k].iter().map(|&l| out.xi(r, j, l)).sum());
            }
        }
    }
    let mut nu = Vec::with_capacity(jn * kn);
    let mut chi = Vec::with_capacity(jn * kn);
    for j in 0..jn {
        for k in 0..kn {
            let p = &assignment.copilots[k];
            let mut v = pilot_noise;
            for &l in p {
                v += out.mu(j, l);
                for &l2 in p {
                    if l2 != l {
                        v += out.delta(j, l, l2).re;
                    }
                }
            }
            nu.push(v);
            let mut c = Cx::new(out.mu(j, k), T::zero());
            for l in assignment.others(k) {
                c += out.delta(j, k, l);
            }
            chi.push(c);
        }
    }
    out.omega = omega;
    out.nu = nu;
    out.chi = chi;
    Ok(out)
}

/// LMMSE matrices `A_{j,k} = C_qy C_y⁻¹` with their defining statistics.
#[derive(Clone, Debug)]
pub struct LmmseOperator<T> {
    dims: Dims,
    a: Vec<CMatrix<T>>,
    pub scalars: LmmseScalars<T>,
    pub rho: T,
    pub sigma2: T,
    pub tau_p: usize,
    /// Largest Cholesky condition estimate over all `C_y`.
    pub worst_condition: T,
}

fn rank_one_plus_identity<T: Real>(
    stats: &ChannelStatistics<T>,
    j: usize,
    weight: impl Fn(usize) -> T,
    diag: Cx<T>,
) -> CMatrix<T> {
    let n = stats.dims.antennas;
    let mut c = CMatrix::identity(n).scale(diag);
    for r in 0..stats.dims.num_ris {
        let w = weight(r);
        if w != T::zero() {
            let a = &stats.ap_steering[r][j];
            c.add_assign_scaled(Cx::new(w, T::zero()), &CMatrix::outer(a, a));
        }
    }
    c
}

pub fn lmmse_operator<T: Real>(
    stats: &ChannelStatistics<T>,
    assignment: &PilotAssignment,
    rho: T,
    sigma2: T,
) -> Result<LmmseOperator<T>> {
    let scalars = lmmse_scalars(stats, assignment, rho, sigma2)?;
    let d = stats.dims;
    let mut a = Vec::with_capacity(d.num_aps * d.num_users);
    let mut worst = T::one();
    for j in 0..d.num_aps {
        for k in 0..d.num_users {
            let cy = rank_one_plus_identity(
                stats,
                j,
                |r| scalars.omega(r, j, k),
                Cx::new(scalars.nu(j, k), T::zero()),
            );
            let cqy = rank_one_plus_identity(stats, j, |r| scalars.xi(r, j, k), scalars.chi(j, k));
            let chol = Cholesky::new(&cy).map_err(|_| {
                Error::NumericalDegeneracy(format!(
                    "observation covariance of AP {j}, user {k} is not positive definite"
                ))
            })?;
            worst = worst.max(chol.condition_estimate());
            // A = C_qy C_y⁻¹  ⇔  Aᴴ = C_y⁻¹ C_qyᴴ.
            a.push(chol.solve_mat(&cqy.adjoint()).adjoint());
        }
    }
    Ok(LmmseOperator {
        dims: d,
        a,
        scalars,
        rho,
        sigma2,
        tau_p: assignment.tau_p,
        worst_condition: worst,
    })
}

impl<T: Real> LmmseOperator<T> {
    pub fn a(&self, j: usize, k: usize) -> &CMatrix<T> {
        &self.a[j * self.dims.num_users + k]
    }

    pub fn pilot_noise(&self) -> T {
        self.scalars.pilot_noise()
    }

    pub fn observation_covariance(&self, stats: &ChannelStatistics<T>, j: usize, k: usize) -> CMatrix<T> {
        rank_one_plus_identity(
            stats,
            j,
            |r| self.scalars.omega(r, j, k),
            Cx::new(self.scalars.nu(j, k), T::zero()),
        )
    }

    pub fn cross_covariance(&self, stats: &ChannelStatistics<T>, j: usize, k: usize) -> CMatrix<T> {
        rank_one_plus_identity(stats, j, |r| self.scalars.xi(r, j, k), self.scalars.chi(j, k))
    }

    pub fn channel_covariance(&self, stats: &ChannelStatistics<T>, j: usize, k: usize) -> CMatrix<T> {
        rank_one_plus_identity(
            stats,
            j,
            |r| self.scalars.xi(r, j, k),
            Cx::new(self.scalars.mu(j, k), T::zero()),
        )
    }
}

/// `y_{j,k} = Σ_{l∈P_k} q_{j,l} + ñ_{j,p(k)}`; co-pilot users see the same noise draw.
pub fn simulate_pilot_phase<T: Real, R: Rng + ?Sized>(
    realization: &ChannelRealization<T>,
    assignment: &PilotAssignment,
    rho: T,
    sigma2: T,
    rng: &mut R,
) -> Vec<Vec<Cx<T>>> {
    let noise = sigma2 / (rho * T::from_usize(assignment.tau_p).unwrap());
    let num_aps = realization.q.len() / assignment.num_users();
    pilot_observation(&realization.q, num_aps, assignment, noise, rng)
}

/// Pilot observation from precomputed channels `q[j·K + k]` and noise variance `σ²/(ρτ_p)`.
pub fn pilot_observation<T: Real, R: Rng + ?Sized>(
    q: &[Vec<Cx<T>>],
    num_aps: usize,
    assignment: &PilotAssignment,
    noise_variance: T,
    rng: &mut R,
) -> Vec<Vec<Cx<T>>> {
    let kn = assignment.num_users();
    let n = q[0].len();
    let sd = noise_variance.sqrt();
    let mut y = Vec::with_capacity(num_aps * kn);
    for j in 0..num_aps {
        let noise: Vec<Vec<Cx<T>>> = (0..assignment.tau_p)
            .map(|_| (0..n).map(|_| complex_normal::<T, R>(rng).scale(sd)).collect())
            .collect();
        for k in 0..kn {
            let mut v = noise[assignment.pilot_of_user[k]].clone();
            for &l in &assignment.copilots[k] {
                for (vi, qi) in v.iter_mut().zip(&q[j * kn + l]) {
                    *vi += qi;
                }
            }
            y.push(v);
        }
    }
    y
}

/// `q̂_{j,k} = ǧ_{j,k} + A_{j,k}(y_{j,k} − Σ_{l∈P_k} ǧ_{j,l})`, with `ǧ` the channel means `[j][k]`.
pub fn estimate_channel<T: Real>(
    operator: &LmmseOperator<T>,
    y: &[Vec<Cx<T>>],
    means: &[Vec<Vec<Cx<T>>>],
    assignment: &PilotAssignment,
) -> Vec<Vec<Cx<T>>> {
    let kn = assignment.num_users();
    let num_aps = means.len();
    let mut out = Vec::with_capacity(num_aps * kn);
    for (j, mj) in means.iter().enumerate() {
        for k in 0..kn {
            let mut centered = y[j * kn + k].clone();
            for &l in &assignment.copilots[k] {
                for (c, m) in centered.iter_mut().zip(&mj[l]) {
                    *c -= m;
                }
            }
            let mut est = operator.a(j, k).mul_vec(&centered);
            for (e, m) in est.iter_mut().zip(&mj[k]) {
                *e += m;
            }
            out.push(est);
        }
    }
    out
}

/// Closed-form per-user NMSE: the mean over APs of `Tr(C_q − A C_qyᴴ) / Tr C_q`.
pub fn nmse_closed_form<T: Real>(stats: &ChannelStatistics<T>, operator: &LmmseOperator<T>) -> Vec<T> {
    let d = stats.dims;
    let jn = T::from_usize(d.num_aps).unwrap();
    (0..d.num_users)
        .map(|k| {
            (0..d.num_aps)
                .map(|j| {
                    let cq = operator.channel_covariance(stats, j, k);
                    let explained = operator
                        .a(j, k)
                        .matmul(&operator.cross_covariance(stats, j, k).adjoint());
                    let total = cq.trace().re;
                    (total - explained.trace().re) / total
                })
                .sum::<T>()
                / jn
        })
        .collect()
}

/// Monte-Carlo NMSE per user. The error and channel spreads are measured about
/// their exact means (`E{q − q̂} = 0`, `E{q} = ǧ`); the reported standard error
/// follows from the delta method for the AP-averaged ratio.
pub fn nmse_monte_carlo<T: Real>(
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
    assignment: &PilotAssignment,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    if n_samples < 2 {
        return invalid("need at least two samples");
    }
    let d = stats.dims;
    let means = cascaded_los(stats, phase, None);
    let kn = d.num_users;
    let acc = run_chunked(
        seed,
        n_samples,
        || vec![RatioAccumulator::new(d.num_aps); kn],
        |rng, acc: &mut Vec<RatioAccumulator>| {
            let real = sample_realization(stats, phase, rng);
            let y = simulate_pilot_phase(&real, assignment, operator.rho, operator.sigma2, rng);
            let est = estimate_channel(operator, &y, &means, assignment);
            for (k, a) in acc.iter_mut().enumerate() {
                let mut num = Vec::with_capacity(d.num_aps);
                let mut den = Vec::with_capacity(d.num_aps);
                for j in 0..d.num_aps {
                    let q = real.q(j, k);
                    let e: Vec<Cx<T>> = q.iter().zip(&est[j * kn + k]).map(|(a, b)| a - b).collect();
                    let c: Vec<Cx<T>> = q.iter().zip(&means[j][k]).map(|(a, b)| a - b).collect();
                    num.push(norm_sq(&e).to_f64_lossy());
                    den.push(norm_sq(&c).to_f64_lossy());
                }
                a.push(&num, &den);
            }
        },
        |a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(&y);
            }
        },
    );
    Ok(acc.iter().map(RatioAccumulator::estimate).collect())
}
