//! Long-term channel statistics, RIS phase configurations and per-block realizations.
//!
//! The aggregated channel from user `k` to AP `j` is
//! `q = Σ_r (η₁ H̄ Φ ḡ + η₂ H̄ Φ g̃ + η₃ H̃ Φ ḡ + η₄ H̃ Φ g̃) + η₅ h̃`,
//! where bars denote LoS terms and tildes unit-variance NLoS draws.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::geometry::{array_response, AngleSet, ArrayKind, LargeScale, PathLossModel, RicianFactors, SystemTopology};
use crate::linalg::{dotc, CMatrix};
use crate::scalar::{cx, czero, expj, Cx, Real};

/// Array and population sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub num_aps: usize,
    pub antennas: usize,
    pub num_users: usize,
    pub num_ris: usize,
    pub elements: usize,
}

#[derive(Clone, Debug)]
pub struct ChannelStatistics<T> {
    pub dims: Dims,
    pub ris_grid: (usize, usize),
    /// `[r][j]`
    pub beta: Vec<Vec<T>>,
    /// `[r][j]`
    pub kappa: Vec<Vec<T>>,
    /// `[r][k]`
    pub alpha: Vec<Vec<T>>,
    /// `[r][k]`
    pub epsilon: Vec<Vec<T>>,
    /// `[j][k]`
    pub gamma: Vec<Vec<T>>,
    /// AP steering vector `a_N(φ_{r,j})`, `[r][j]`.
    pub ap_steering: Vec<Vec<Vec<Cx<T>>>>,
    /// RIS departure vector `a_M(ψᵃ_{r,j}, ψᵉ_{r,j})`, `[r][j]`.
    pub ris_departure: Vec<Vec<Vec<Cx<T>>>>,
    /// RIS arrival vector `ḡ_{r,k} = a_M(φᵃ_{r,k}, φᵉ_{r,k})`, `[r][k]`.
    pub ris_arrival: Vec<Vec<Vec<Cx<T>>>>,
    zeta: Vec<T>,
    eta: [Vec<T>; 4],
    eta5: Vec<T>,
}

/// Which parts of each user's channel (and of the pilot noise) are kept when a
/// realization is assembled. Used to isolate individual terms of the moments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentMask {
    pub users: Vec<UserComponents>,
    pub pilot_noise: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UserComponents {
    pub los: bool,
    pub ris_user_nlos: bool,
    pub ap_ris_nlos: bool,
    pub double_nlos: bool,
    pub direct: bool,
}

impl UserComponents {
    pub const ALL: Self = Self {
        los: true,
        ris_user_nlos: true,
        ap_ris_nlos: true,
        double_nlos: true,
        direct: true,
    };
    pub const NONE: Self = Self {
        los: false,
        ris_user_nlos: false,
        ap_ris_nlos: false,
        double_nlos: false,
        direct: false,
    };
    pub const RIS_ONLY: Self = Self {
        direct: false,
        ..Self::ALL
    };
    pub const DIRECT_ONLY: Self = Self {
        direct: true,
        ..Self::NONE
    };

    fn flags(&self) -> [bool; 4] {
        [self.los, self.ris_user_nlos, self.ap_ris_nlos, self.double_nlos]
    }
}

impl ComponentMask {
    pub fn all(num_users: usize) -> Self {
        Self {
            users: vec![UserComponents::ALL; num_users],
            pilot_noise: true,
        }
    }

    pub fn none(num_users: usize) -> Self {
        Self {
            users: vec![UserComponents::NONE; num_users],
            pilot_noise: false,
        }
    }

    pub fn with(mut self, user: usize, c: UserComponents) -> Self {
        self.users[user] = c;
        self
    }

    pub fn with_noise(mut self, on: bool) -> Self {
        self.pilot_noise = on;
        self
    }

    pub fn is_empty(&self) -> bool {
        !self.pilot_noise && self.users.iter().all(|u| *u == UserComponents::NONE)
    }
}

fn keep<T: Real>(x: T, on: bool) -> T {
    if on {
        x
    } else {
        T::zero()
    }
}

impl<T: Real> ChannelStatistics<T> {
    /// Builds the statistics from explicit large-scale gains.
    pub fn from_large_scale(
        dims: Dims,
        ris_grid: (usize, usize),
        d_over_lambda: T,
        large: &LargeScale<T>,
        rician: &RicianFactors<T>,
        angles: &AngleSet<T>,
    ) -> Result<Self> {
        let Dims {
            num_aps: jn,
            antennas: n,
            num_users: kn,
            num_ris: rn,
            elements: m,
        } = dims;
        if jn == 0 || n == 0 || kn == 0 || m == 0 {
            return invalid("J, N, K and M must be positive");
        }
        let shape_ok = |t: &Vec<Vec<T>>, rows: usize, cols: usize| t.len() == rows && t.iter().all(|r| r.len() == cols);
        if !shape_ok(&large.beta, rn, jn)
            || !shape_ok(&large.alpha, rn, kn)
            || !shape_ok(&large.gamma, jn, kn)
            || !shape_ok(&rician.kappa, rn, jn)
            || !shape_ok(&rician.epsilon, rn, kn)
            || !shape_ok(&angles.aoa_ap, rn, jn)
            || !shape_ok(&angles.aod_ris_azimuth, rn, jn)
            || !shape_ok(&angles.aod_ris_elevation, rn, jn)
            || !shape_ok(&angles.aoa_ris_azimuth, rn, kn)
            || !shape_ok(&angles.aoa_ris_elevation, rn, kn)
        {
            return invalid("statistics tables do not match the dimensions");
        }
        let nonneg = |t: &Vec<Vec<T>>| t.iter().flatten().all(|x| *x >= T::zero() && x.is_finite());
        if !nonneg(&large.beta) || !nonneg(&large.alpha) || !nonneg(&large.gamma) {
            return invalid("large-scale gains must be finite and non-negative");
        }
        if !nonneg(&rician.kappa) || !nonneg(&rician.epsilon) {
            return invalid("Rician factors must be finite and non-negative");
        }

        let ap_steering = (0..rn)
            .map(|r| {
                (0..jn)
                    .map(|j| array_response(n, (1, n), angles.aoa_ap[r][j], T::zero(), d_over_lambda, ArrayKind::Ula))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let ris_departure = (0..rn)
            .map(|r| {
                (0..jn)
                    .map(|j| {
                        array_response(
                            m,
                            ris_grid,
                            angles.aod_ris_azimuth[r][j],
                            angles.aod_ris_elevation[r][j],
                            d_over_lambda,
                            ArrayKind::Uspa,
                        )
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let ris_arrival = (0..rn)
            .map(|r| {
                (0..kn)
                    .map(|k| {
                        array_response(
                            m,
                            ris_grid,
                            angles.aoa_ris_azimuth[r][k],
                            angles.aoa_ris_elevation[r][k],
                            d_over_lambda,
                            ArrayKind::Uspa,
                        )
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;

        let one = T::one();
        let len = rn * jn * kn;
        let mut zeta = Vec::with_capacity(len);
        let mut eta: [Vec<T>; 4] = Default::default();
        for r in 0..rn {
            for j in 0..jn {
                for k in 0..kn {
                    let kap = rician.kappa[r][j];
                    let eps = rician.epsilon[r][k];
                    let z = large.beta[r][j] * large.alpha[r][k] / ((one + kap) * (one + eps));
                    zeta.push(z);
                    eta[0].push((z * kap * eps).sqrt());
                    eta[1].push((z * kap).sqrt());
                    eta[2].push((z * eps).sqrt());
                    eta[3].push(z.sqrt());
                }
            }
        }
        let eta5 = large.gamma.iter().flatten().map(|g| g.sqrt()).collect();

        Ok(Self {
            dims,
            ris_grid,
            beta: large.beta.clone(),
            kappa: rician.kappa.clone(),
            alpha: large.alpha.clone(),
            epsilon: rician.epsilon.clone(),
            gamma: large.gamma.clone(),
            ap_steering,
            ris_departure,
            ris_arrival,
            zeta,
            eta,
            eta5,
        })
    }

    #[inline]
    fn rjk(&self, r: usize, j: usize, k: usize) -> usize {
        (r * self.dims.num_aps + j) * self.dims.num_users + k
    }

    pub fn zeta(&self, r: usize, j: usize, k: usize) -> T {
        self.zeta[self.rjk(r, j, k)]
    }

    /// `η⁽ᵘ⁾_{r,j,k}` for `u ∈ {1, 2, 3, 4}`.
    pub fn eta(&self, u: usize, r: usize, j: usize, k: usize) -> T {
        assert!((1..=4).contains(&u), "η index must be 1..=4");
        self.eta[u - 1][self.rjk(r, j, k)]
    }

    pub fn eta5(&self, j: usize, k: usize) -> T {
        self.eta5[j * self.dims.num_users + k]
    }

    /// `[η⁽¹⁾, η⁽²⁾, η⁽³⁾, η⁽⁴⁾]` with masked components set to zero.
    pub fn masked_eta(&self, mask: Option<&ComponentMask>, r: usize, j: usize, k: usize) -> [T; 4] {
        let i = self.rjk(r, j, k);
        let mut out = [self.eta[0][i], self.eta[1][i], self.eta[2][i], self.eta[3][i]];
        if let Some(m) = mask {
            for (e, on) in out.iter_mut().zip(m.users[k].flags()) {
                *e = keep(*e, on);
            }
        }
        out
    }

    pub fn masked_eta5(&self, mask: Option<&ComponentMask>, j: usize, k: usize) -> T {
        keep(self.eta5(j, k), mask.is_none_or(|m| m.users[k].direct))
    }

    /// Rank-one LoS matrix `H̄_{r,j} = a_N a_M^H` (N×M).
    pub fn los_matrix(&self, r: usize, j: usize) -> CMatrix<T> {
        CMatrix::outer(&self.ap_steering[r][j], &self.ris_departure[r][j])
    }

    /// `f_{r,j,k} = a_M^H(ψ_{r,j}) Φ_r ḡ_{r,k}`.
    pub fn los_projection(&self, phase: &PhaseConfig<T>, r: usize, j: usize, k: usize) -> Cx<T> {
        let b = &self.ris_departure[r][j];
        let g = &self.ris_arrival[r][k];
        (0..self.dims.elements).fold(czero(), |acc, m| acc + b[m].conj() * phase.entry(r, m) * g[m])
    }

    pub fn check_phase(&self, phase: &PhaseConfig<T>) -> Result<()> {
        if phase.num_ris() != self.dims.num_ris || phase.elements() != self.dims.elements {
            return invalid(format!(
                "phase config is {}x{}, statistics need {}x{}",
                phase.num_ris(),
                phase.elements(),
                self.dims.num_ris,
                self.dims.elements
            ));
        }
        Ok(())
    }
}

/// Full statistics from a topology: path losses from the positions, LoS terms from the angles.
pub fn build_channel_statistics<T: Real>(
    topology: &SystemTopology<T>,
    path_loss: &PathLossModel<T>,
    rician: &RicianFactors<T>,
    angles: &AngleSet<T>,
) -> Result<ChannelStatistics<T>> {
    topology.validate()?;
    let large = path_loss.large_scale(topology)?;
    let dims = Dims {
        num_aps: topology.num_aps,
        antennas: topology.antennas_per_ap,
        num_users: topology.num_users,
        num_ris: topology.num_ris,
        elements: topology.elements_per_ris,
    };
    ChannelStatistics::from_large_scale(dims, topology.ris_grid, topology.d_over_lambda, &large, rician, angles)
}

/// Maps an angle into `[0, 2π)`.
pub fn wrap_phase<T: Real>(t: T) -> T {
    let tau = T::TAU();
    let w = t - (t / tau).floor() * tau;
    if w >= tau || w < T::zero() {
        T::zero()
    } else {
        w
    }
}

/// RIS phases `θ_{r,m} ∈ [0, 2π)`, defining `Φ_r = diag(e^{jθ_{r,·}})`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseConfig<T> {
    num_ris: usize,
    elements: usize,
    theta: Vec<T>,
}

impl<T: Real> PhaseConfig<T> {
    /// Wraps each angle into `[0, 2π)`.
    pub fn new(num_ris: usize, elements: usize, theta: Vec<T>) -> Result<Self> {
        if theta.len() != num_ris * elements {
            return invalid(format!("expected {} phases, got {}", num_ris * elements, theta.len()));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return invalid("phases must be finite");
        }
        let theta = theta.into_iter().map(wrap_phase).collect();
        Ok(Self {
            num_ris,
            elements,
            theta,
        })
    }

    pub fn zeros(num_ris: usize, elements: usize) -> Self {
        Self {
            num_ris,
            elements,
            theta: vec![T::zero(); num_ris * elements],
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, num_ris: usize, elements: usize) -> Self {
        let tau = std::f64::consts::TAU;
        let theta = (0..num_ris * elements)
            .map(|_| T::lit(rng.random::<f64>() * tau))
            .collect();
        Self::new(num_ris, elements, theta).expect("finite phases")
    }

    pub fn num_ris(&self) -> usize {
        self.num_ris
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    pub fn get(&self, r: usize, m: usize) -> T {
        self.theta[r * self.elements + m]
    }

    pub fn set(&mut self, r: usize, m: usize, value: T) {
        self.theta[r * self.elements + m] = wrap_phase(value);
    }

    /// Diagonal entry `e^{jθ_{r,m}}` of `Φ_r`.
    #[inline]
    pub fn entry(&self, r: usize, m: usize) -> Cx<T> {
        expj(self.get(r, m))
    }

    pub fn diagonal(&self, r: usize) -> Vec<Cx<T>> {
        (0..self.elements).map(|m| self.entry(r, m)).collect()
    }
}

/// `E{q_{j,k}} = Σ_r η⁽¹⁾ H̄ Φ ḡ`, indexed `[j][k]`; masked LoS terms are dropped.
pub fn cascaded_los<T: Real>(
    stats: &ChannelStatistics<T>,
    phase: &PhaseConfig<T>,
    mask: Option<&ComponentMask>,
) -> Vec<Vec<Vec<Cx<T>>>> {
    let d = stats.dims;
    let mut out = vec![vec![vec![czero(); d.antennas]; d.num_users]; d.num_aps];
    for j in 0..d.num_aps {
        for k in 0..d.num_users {
            for r in 0..d.num_ris {
                let e1 = stats.masked_eta(mask, r, j, k)[0];
                if e1 == T::zero() {
                    continue;
                }
                let s = stats.los_projection(phase, r, j, k).scale(e1);
                for (o, a) in out[j][k].iter_mut().zip(&stats.ap_steering[r][j]) {
                    *o += a * s;
                }
            }
        }
    }
    out
}

/// Draws `(u + jv)/√2` with `u, v` independent standard normals.
pub fn complex_normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Cx<T> {
    let u: f64 = rng.sample(StandardNormal);
    let v: f64 = rng.sample(StandardNormal);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    cx(T::lit(u * s), T::lit(v * s))
}

pub fn complex_normal_vec<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Cx<T>> {
    (0..n).map(|_| complex_normal(rng)).collect()
}

/// One coherence block: the NLoS draws and the aggregated channels built from them.
#[derive(Clone, Debug)]
pub struct ChannelRealization<T> {
    dims: Dims,
    /// `H̃_{r,j}` (N×M), index `r·J + j`.
    pub ap_ris_nlos: Vec<CMatrix<T>>,
    /// `g̃_{r,k}`, index `r·K + k`.
    pub ris_user_nlos: Vec<Vec<Cx<T>>>,
    /// `h̃_{j,k}`, index `j·K + k`.
    pub direct_nlos: Vec<Vec<Cx<T>>>,
    /// `q_{j,k}`, index `j·K + k`.
    pub q: Vec<Vec<Cx<T>>>,
}

pub fn sample_realization<T: Real, R: Rng + ?Sized>(
    stats: &ChannelStatistics<T>,
    phase: &PhaseConfig<T>,
    rng: &mut R,
) -> ChannelRealization<T> {
    sample_realization_masked(stats, phase, None, rng)
}

/// As [`sample_realization`], with `q` assembled from the unmasked components only.
pub fn sample_realization_masked<T: Real, R: Rng + ?Sized>(
    stats: &ChannelStatistics<T>,
    phase: &PhaseConfig<T>,
    mask: Option<&ComponentMask>,
    rng: &mut R,
) -> ChannelRealization<T> {
    let d = stats.dims;
    let ap_ris_nlos = (0..d.num_ris * d.num_aps)
        .map(|_| CMatrix::from_fn(d.antennas, d.elements, |_, _| complex_normal(rng)))
        .collect();
    let ris_user_nlos = (0..d.num_ris * d.num_users)
        .map(|_| complex_normal_vec(rng, d.elements))
        .collect();
    let direct_nlos = (0..d.num_aps * d.num_users)
        .map(|_| complex_normal_vec(rng, d.antennas))
        .collect();
    let mut out = ChannelRealization {
        dims: d,
        ap_ris_nlos,
        ris_user_nlos,
        direct_nlos,
        q: Vec::new(),
    };
    out.q = out.aggregate(stats, phase, mask);
    out
}

impl<T: Real> ChannelRealization<T> {
    pub fn q(&self, j: usize, k: usize) -> &[Cx<T>] {
        &self.q[j * self.dims.num_users + k]
    }

    /// Aggregated channels from the stored draws via the five-term decomposition.
    pub fn aggregate(
        &self,
        stats: &ChannelStatistics<T>,
        phase: &PhaseConfig<T>,
        mask: Option<&ComponentMask>,
    ) -> Vec<Vec<Cx<T>>> {
        let d = self.dims;
        let (jn, kn, n, m) = (d.num_aps, d.num_users, d.antennas, d.elements);
        let phi: Vec<Vec<Cx<T>>> = (0..d.num_ris).map(|r| phase.diagonal(r)).collect();
        let mut out = Vec::with_capacity(jn * kn);
        let mut reflect_los = vec![czero(); m];
        let mut reflect_nlos = vec![czero(); m];
        for j in 0..jn {
            for k in 0..kn {
                let e5 = stats.masked_eta5(mask, j, k);
                let mut q: Vec<Cx<T>> = self.direct_nlos[j * kn + k].iter().map(|h| h.scale(e5)).collect();
                for r in 0..d.num_ris {
                    let [e1, e2, e3, e4] = stats.masked_eta(mask, r, j, k);
                    let gbar = &stats.ris_arrival[r][k];
                    let gt = &self.ris_user_nlos[r * kn + k];
                    for x in 0..m {
                        reflect_los[x] = phi[r][x] * (gbar[x].scale(e1) + gt[x].scale(e2));
                        reflect_nlos[x] = phi[r][x] * (gbar[x].scale(e3) + gt[x].scale(e4));
                    }
                    let s = dotc(&stats.ris_departure[r][j], &reflect_los);
                    let ht = self.ap_ris_nlos[r * jn + j].mul_vec(&reflect_nlos);
                    for ((qi, a), h) in q.iter_mut().zip(&stats.ap_steering[r][j]).zip(ht) {
                        *qi += a * s + h;
                    }
                }
                debug_assert_eq!(q.len(), n);
                out.push(q);
            }
        }
        out
    }

    /// Physical RIS–AP channel `H_{r,j} = √β (√(κ/(1+κ)) H̄ + √(1/(1+κ)) H̃)`.
    pub fn ris_ap_channel(&self, stats: &ChannelStatistics<T>, r: usize, j: usize) -> CMatrix<T> {
        let one = T::one();
        let kap = stats.kappa[r][j];
        let b = stats.beta[r][j].sqrt();
        let mut h = stats.los_matrix(r, j).scale_real(b * (kap / (one + kap)).sqrt());
        h.add_assign_scaled(
            Cx::new(b * (one / (one + kap)).sqrt(), T::zero()),
            &self.ap_ris_nlos[r * self.dims.num_aps + j],
        );
        h
    }

    /// Physical user–RIS channel `g_{r,k} = √α (√(ε/(1+ε)) ḡ + √(1/(1+ε)) g̃)`.
    pub fn ris_user_channel(&self, stats: &ChannelStatistics<T>, r: usize, k: usize) -> Vec<Cx<T>> {
        let one = T::one();
        let eps = stats.epsilon[r][k];
        let a = stats.alpha[r][k].sqrt();
        let c1 = a * (eps / (one + eps)).sqrt();
        let c2 = a * (one / (one + eps)).sqrt();
        stats.ris_arrival[r][k]
            .iter()
            .zip(&self.ris_user_nlos[r * self.dims.num_users + k])
            .map(|(gb, gt)| gb.scale(c1) + gt.scale(c2))
            .collect()
    }

    /// Physical direct channel `h_{j,k} = √γ h̃`.
    pub fn direct_channel(&self, stats: &ChannelStatistics<T>, j: usize, k: usize) -> Vec<Cx<T>> {
        let s = stats.gamma[j][k].sqrt();
        self.direct_nlos[j * self.dims.num_users + k]
            .iter()
            .map(|h| h.scale(s))
            .collect()
    }

    /// `Σ_r H_{r,j} Φ_r g_{r,k} + h_{j,k}` from the physical channels.
    pub fn physical_aggregate(
        &self,
        stats: &ChannelStatistics<T>,
        phase: &PhaseConfig<T>,
        j: usize,
        k: usize,
    ) -> Vec<Cx<T>> {
        let mut q = self.direct_channel(stats, j, k);
        for r in 0..self.dims.num_ris {
            let g: Vec<Cx<T>> = self
                .ris_user_channel(stats, r, k)
                .iter()
                .enumerate()
                .map(|(m, x)| phase.entry(r, m) * x)
                .collect();
            let hg = self.ris_ap_channel(stats, r, j).mul_vec(&g);
            for (qi, v) in q.iter_mut().zip(hg) {
                *qi += v;
            }
        }
        q
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn small_stats(seed: u64, kappa: f64) -> ChannelStatistics<f64> {
        let dims = Dims {
            num_aps: 2,
            antennas: 2,
            num_users: 2,
            num_ris: 2,
            elements: 4,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let large = LargeScale {
            beta: vec![vec![0.8, 1.3], vec![0.6, 1.1]],
            alpha: vec![vec![1.2, 0.7], vec![0.9, 1.4]],
            gamma: vec![vec![0.3, 0.5], vec![0.4, 0.2]],
        };
        let rician = RicianFactors::uniform(kappa, kappa, 2, 2, 2);
        let angles = AngleSet::random(&mut rng, 2, 2, 2);
        ChannelStatistics::from_large_scale(dims, (2, 2), 0.5, &large, &rician, &angles).unwrap()
    }

    #[test]
    fn eta_definitions() {
        let s = small_stats(1, 10.0);
        for r in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let z = s.beta[r][j] * s.alpha[r][k] / (11.0 * 11.0);
                    assert!((s.zeta(r, j, k) - z).abs() < 1e-15);
                    assert!((s.eta(1, r, j, k).powi(2) - z * 100.0).abs() < 1e-14);
                    assert!((s.eta(2, r, j, k).powi(2) - z * 10.0).abs() < 1e-14);
                    assert!((s.eta(3, r, j, k).powi(2) - z * 10.0).abs() < 1e-14);
                    assert!((s.eta(4, r, j, k).powi(2) - z).abs() < 1e-15);
                }
                assert!((s.eta5(r, j).powi(2) - s.gamma[r][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn unit_gains_give_ten_elevenths() {
        let dims = Dims {
            num_aps: 1,
            antennas: 1,
            num_users: 1,
            num_ris: 1,
            elements: 1,
        };
        let large = LargeScale {
            beta: vec![vec![1.0]],
            alpha: vec![vec![1.0]],
            gamma: vec![vec![1.0]],
        };
        let angles = AngleSet::random(&mut ChaCha8Rng::seed_from_u64(0), 1, 1, 1);
        let s = ChannelStatistics::from_large_scale(
            dims,
            (1, 1),
            0.5f64,
            &large,
            &RicianFactors::uniform(10.0, 10.0, 1, 1, 1),
            &angles,
        )
        .unwrap();
        assert!((s.eta(1, 0, 0, 0) - 10.0 / 11.0).abs() < 1e-15);
        let s0 = ChannelStatistics::from_large_scale(
            dims,
            (1, 1),
            0.5f64,
            &large,
            &RicianFactors::uniform(0.0, 0.0, 1, 1, 1),
            &angles,
        )
        .unwrap();
        assert_eq!(s0.eta(1, 0, 0, 0), 0.0);
        assert_eq!(s0.eta(2, 0, 0, 0), 0.0);
        assert_eq!(s0.eta(3, 0, 0, 0), 0.0);
        assert!((s0.eta(4, 0, 0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn los_matrix_is_rank_one_unit_modulus() {
        let s = small_stats(2, 10.0);
        let h = s.los_matrix(1, 0);
        assert!(h.as_slice().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        // Every 2x2 minor of a rank-one matrix vanishes.
        for c in 1..4 {
            let minor = h[(0, 0)] * h[(1, c)] - h[(0, c)] * h[(1, 0)];
            assert!(minor.norm() < 1e-12);
        }
    }

    #[test]
    fn decomposition_matches_physical_channels() {
        let s = small_stats(3, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let phase = PhaseConfig::random(&mut rng, 2, 4);
        let real = sample_realization(&s, &phase, &mut rng);
        for j in 0..2 {
            for k in 0..2 {
                let p = real.physical_aggregate(&s, &phase, j, k);
                for (a, b) in p.iter().zip(real.q(j, k)) {
                    assert!((a - b).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn phases_wrap_and_are_unitary() {
        let p = PhaseConfig::new(1, 3, vec![std::f64::consts::TAU, -0.5, 7.0]).unwrap();
        assert_eq!(p.get(0, 0), 0.0);
        assert!(p.theta().iter().all(|t| (0.0..std::f64::consts::TAU).contains(t)));
        assert!(p.diagonal(0).iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn no_ris_or_no_los_means_zero_mean() {
        let s = small_stats(4, 0.0);
        let phase = PhaseConfig::zeros(2, 4);
        assert!(cascaded_los(&s, &phase, None)
            .iter()
            .flatten()
            .flatten()
            .all(|z| z.norm() == 0.0));
    }

    #[test]
    fn identical_seeds_identical_draws() {
        let s = small_stats(5, 10.0);
        let phase = PhaseConfig::zeros(2, 4);
        let a = sample_realization(&s, &phase, &mut ChaCha8Rng::seed_from_u64(77));
        let b = sample_realization(&s, &phase, &mut ChaCha8Rng::seed_from_u64(77));
        assert_eq!(a.q, b.q);
    }

    #[test]
    fn pure_los_limit_has_no_spread() {
        let s = small_stats(6, 1e9);
        let phase = PhaseConfig::zeros(2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200;
        let draws: Vec<CMatrix<f64>> = (0..n)
            .map(|_| sample_realization(&s, &phase, &mut rng).ris_ap_channel(&s, 0, 0))
            .collect();
        let mean = draws
            .iter()
            .skip(1)
            .fold(draws[0].clone(), |acc, d| &acc + d)
            .scale_real(1.0 / n as f64);
        let var = draws.iter().map(|d| (d - &mean).frob_norm_sq()).sum::<f64>() / (n as f64 * 8.0);
        assert!(var < 1e-6 * s.beta[0][0]);
    }
}
