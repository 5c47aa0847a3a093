//! The RIS phase-control environment: phases in, closed-form sum SE out.

use rand::Rng;

use crate::channel::{cascaded_los, PhaseConfig};
use crate::closed_form::se::SystemModel;
use crate::error::{invalid, Result};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct RisEnvironment<T> {
    pub model: SystemModel<T>,
    phase: PhaseConfig<T>,
    /// Action entries that fell outside `[−1, 1]` and were clamped.
    pub clamped_actions: usize,
    /// Number of sum-SE evaluations performed.
    pub evaluations: usize,
}

impl<T: Real> RisEnvironment<T> {
    pub fn new(model: SystemModel<T>) -> Self {
        let d = model.stats.dims;
        Self {
            phase: PhaseConfig::zeros(d.num_ris, d.elements),
            model,
            clamped_actions: 0,
            evaluations: 0,
        }
    }

    /// `R·M + J·K·N`.
    pub fn observation_dim(&self) -> usize {
        let d = self.model.stats.dims;
        d.num_ris * d.elements + d.num_aps * d.num_users * d.antennas
    }

    /// `R·M`.
    pub fn action_dim(&self) -> usize {
        let d = self.model.stats.dims;
        d.num_ris * d.elements
    }

    pub fn phase(&self) -> &PhaseConfig<T> {
        &self.phase
    }

    /// Phases followed by the angles of the cascaded LoS means over `(j, k, n)`.
    pub fn observation(&self) -> Vec<T> {
        let mut obs = self.phase.theta().to_vec();
        for row in cascaded_los(&self.model.stats, &self.phase, None) {
            for v in row {
                obs.extend(v.iter().map(|z| z.im.atan2(z.re)));
            }
        }
        obs
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<T> {
        let d = self.model.stats.dims;
        self.phase = PhaseConfig::random(rng, d.num_ris, d.elements);
        self.observation()
    }

    /// `θ = π (a′ + 1)`, with out-of-range entries clamped to `[−1, 1]`.
    pub fn action_to_phase(&mut self, action: &[T]) -> Result<PhaseConfig<T>> {
        if action.len() != self.action_dim() {
            return invalid(format!(
                "action has length {}, expected {}",
                action.len(),
                self.action_dim()
            ));
        }
        let one = T::one();
        let theta = action
            .iter()
            .map(|&a| {
                let c = a.max(-one).min(one);
                if c != a {
                    self.clamped_actions += 1;
                }
                T::PI() * (c + one)
            })
            .collect();
        let d = self.model.stats.dims;
        PhaseConfig::new(d.num_ris, d.elements, theta)
    }

    pub fn evaluate(&mut self, phase: &PhaseConfig<T>) -> Result<T> {
        self.evaluations += 1;
        Ok(self.model.sum_se(phase)?.sum_se)
    }

    /// Applies the action and returns the new observation and the sum SE.
    pub fn step(&mut self, action: &[T]) -> Result<(Vec<T>, T)> {
        let phase = self.action_to_phase(action)?;
        let reward = self.evaluate(&phase)?;
        self.phase = phase;
        Ok((self.observation(), reward))
    }

    pub fn set_phase(&mut self, phase: PhaseConfig<T>) -> Result<()> {
        self.model.stats.check_phase(&phase)?;
        self.phase = phase;
        Ok(())
    }
}
