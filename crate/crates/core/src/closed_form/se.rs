//! CPU combining weights, effective SINR and spectral efficiency.

use serde::Serialize;

use crate::channel::{ChannelStatistics, PhaseConfig};
use crate::closed_form::{MomentEngine, MomentSet};
use crate::error::{invalid, Error, Result};
use crate::estimation::{assign_pilots, lmmse_operator, LmmseOperator, PilotAssignment};
use crate::linalg::{dotc, CMatrix, Cholesky};
use crate::scalar::{Cx, Real};

/// Powers (linear watts) and frame lengths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinkParams<T> {
    /// Pilot power ρ.
    pub rho: T,
    /// Data power ρ_s.
    pub rho_s: T,
    pub sigma2: T,
    pub tau_p: usize,
    pub tau_c: usize,
}

impl<T: Real> LinkParams<T> {
    /// Same power for pilots and data.
    pub fn new(rho: T, sigma2: T, tau_p: usize, tau_c: usize) -> Self {
        Self {
            rho,
            rho_s: rho,
            sigma2,
            tau_p,
            tau_c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > T::zero()) || !(self.rho_s > T::zero()) {
            return invalid("transmit powers must be positive");
        }
        if !(self.sigma2 >= T::zero()) {
            return invalid("noise power must be non-negative");
        }
        if self.tau_p == 0 || self.tau_p > self.tau_c {
            return invalid(format!(
                "need 1 <= tau_p <= tau_c, got tau_p = {}, tau_c = {}",
                self.tau_p, self.tau_c
            ));
        }
        Ok(())
    }
}

/// Statistics, pilots and estimator for one system; the estimator does not depend
/// on the RIS phases, so one model serves every phase configuration.
#[derive(Clone, Debug)]
pub struct SystemModel<T> {
    pub stats: ChannelStatistics<T>,
    pub assignment: PilotAssignment,
    pub operator: LmmseOperator<T>,
    pub params: LinkParams<T>,
}

impl<T: Real> SystemModel<T> {
    pub fn new(stats: ChannelStatistics<T>, params: LinkParams<T>) -> Result<Self> {
        params.validate()?;
        let assignment = assign_pilots(stats.dims.num_users, params.tau_p)?;
        let operator = lmmse_operator(&stats, &assignment, params.rho, params.sigma2)?;
        Ok(Self {
            stats,
            assignment,
            operator,
            params,
        })
    }

    pub fn moments(&self, phase: &PhaseConfig<T>) -> Result<Vec<MomentSet<T>>> {
        self.stats.check_phase(phase)?;
        let engine = MomentEngine::new(&self.stats, &self.operator, phase, &self.assignment, None);
        Ok((0..self.stats.dims.num_users).map(|k| engine.user(k)).collect())
    }

    pub fn sum_se(&self, phase: &PhaseConfig<T>) -> Result<SeReport<T>> {
        let moments = self.moments(phase)?;
        se_report(&moments, &self.params)
    }
}

/// `I_k = ρ_s(E{ww ᴴ} − E{w}E{w}ᴴ) + ρ_s Σ_{i≠k} E{w_{k,i}w_{k,i}ᴴ} + σ² V_k`.
pub fn interference_matrix<T: Real>(m: &MomentSet<T>, rho_s: T, sigma2: T) -> CMatrix<T> {
    let jn = m.mean_wkk.len();
    let mut total = CMatrix::zeros(jn, jn);
    for s in &m.second {
        total.add_assign_scaled(Cx::new(rho_s, T::zero()), s);
    }
    total.add_assign_scaled(Cx::new(-rho_s, T::zero()), &CMatrix::outer(&m.mean_wkk, &m.mean_wkk));
    for (j, v) in m.v.iter().enumerate() {
        total[(j, j)] += Cx::new(sigma2 * *v, T::zero());
    }
    total.hermitian_part()
}

/// Weights maximizing the generalized Rayleigh quotient, `a_k = I_k⁻¹ E{w_{k,k}}`.
pub fn combining_weights<T: Real>(m: &MomentSet<T>, rho_s: T, sigma2: T) -> Result<Vec<Cx<T>>> {
    let i = interference_matrix(m, rho_s, sigma2);
    let chol = Cholesky::new(&i).map_err(|_| Error::DegenerateSystem {
        context: format!("interference matrix of user {} is singular", m.user),
        condition: f64::INFINITY,
    })?;
    let cond = chol.condition_estimate();
    if !(cond.to_f64_lossy() < 1e14) {
        return Err(Error::DegenerateSystem {
            context: format!("interference matrix of user {} is ill-conditioned", m.user),
            condition: cond.to_f64_lossy(),
        });
    }
    Ok(chol.solve_vec(&m.mean_wkk))
}

/// `ρ_s |aᴴ E{w_kk}|² / aᴴ I_k a`.
pub fn sinr_closed_form<T: Real>(m: &MomentSet<T>, a: &[Cx<T>], rho_s: T, sigma2: T) -> Result<T> {
    let i = interference_matrix(m, rho_s, sigma2);
    let den = dotc(a, &i.mul_vec(a)).re;
    if !(den > T::zero()) {
        return Err(Error::NumericalDegeneracy(format!(
            "SINR denominator of user {} is {den:e}",
            m.user
        )));
    }
    Ok(rho_s * dotc(a, &m.mean_wkk).norm_sqr() / den)
}

/// `ρ_s E{w_kk}ᴴ I_k⁻¹ E{w_kk}`, the SINR at the optimal weights.
pub fn sinr_optimal<T: Real>(m: &MomentSet<T>, rho_s: T, sigma2: T) -> Result<T> {
    let a = combining_weights(m, rho_s, sigma2)?;
    Ok(rho_s * dotc(&m.mean_wkk, &a).re)
}

/// `(1 − τ_p/τ_c) log₂(1 + SINR)`.
pub fn spectral_efficiency<T: Real>(sinr: T, tau_p: usize, tau_c: usize) -> T {
    let frac = T::one() - T::from_usize(tau_p).unwrap() / T::from_usize(tau_c).unwrap();
    frac * (T::one() + sinr).log2()
}

#[derive(Clone, Debug, Serialize)]
pub struct SeReport<T> {
    pub sinr: Vec<T>,
    pub se: Vec<T>,
    pub sum_se: T,
    #[serde(skip)]
    pub weights: Vec<Vec<Cx<T>>>,
}

pub fn se_report<T: Real>(moments: &[MomentSet<T>], params: &LinkParams<T>) -> Result<SeReport<T>> {
    let mut sinr = Vec::with_capacity(moments.len());
    let mut weights = Vec::with_capacity(moments.len());
    for m in moments {
        let a = combining_weights(m, params.rho_s, params.sigma2)?;
        sinr.push(sinr_closed_form(m, &a, params.rho_s, params.sigma2)?);
        weights.push(a);
    }
    let se: Vec<T> = sinr
        .iter()
        .map(|s| spectral_efficiency(*s, params.tau_p, params.tau_c))
        .collect();
    Ok(SeReport {
        sum_se: se.iter().copied().sum(),
        sinr,
        se,
        weights,
    })
}

/// Sum SE from explicit statistics, pilots and estimator.
pub fn sum_se<T: Real>(
    stats: &ChannelStatistics<T>,
    operator: &LmmseOperator<T>,
    phase: &PhaseConfig<T>,
    assignment: &PilotAssignment,
    params: &LinkParams<T>,
) -> Result<SeReport<T>> {
    stats.check_phase(phase)?;
    let engine = MomentEngine::new(stats, operator, phase, assignment, None);
    let moments: Vec<_> = (0..stats.dims.num_users).map(|k| engine.user(k)).collect();
    se_report(&moments, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn se_formula() {
        assert_eq!(spectral_efficiency(0.0, 4, 200), 0.0);
        assert_eq!(spectral_efficiency(3.0, 200, 200), 0.0);
        assert!((spectral_efficiency(1.0f64, 4, 200) - 0.98).abs() < 1e-12);
    }
}
