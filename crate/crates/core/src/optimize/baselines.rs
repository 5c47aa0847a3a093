//! Gradient-free phase search.

use rand::Rng;

use crate::channel::PhaseConfig;
use crate::error::{invalid, Result};
use crate::optimize::env::RisEnvironment;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct SearchResult<T> {
    pub phase: PhaseConfig<T>,
    pub reward: T,
    /// Objective after each evaluation (random search) or each move (coordinate ascent).
    pub history: Vec<T>,
}

/// Best of `n_draws` uniform random phase configurations.
pub fn random_search<T: Real, R: Rng + ?Sized>(
    env: &mut RisEnvironment<T>,
    n_draws: usize,
    rng: &mut R,
) -> Result<SearchResult<T>> {
    if n_draws == 0 {
        return invalid("random search needs at least one draw");
    }
    let d = env.model.stats.dims;
    let mut best: Option<(PhaseConfig<T>, T)> = None;
    let mut history = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let phase = PhaseConfig::random(rng, d.num_ris, d.elements);
        let r = env.evaluate(&phase)?;
        if best.as_ref().is_none_or(|(_, b)| r > *b) {
            best = Some((phase, r));
        }
        history.push(best.as_ref().unwrap().1);
    }
    let (phase, reward) = best.unwrap();
    Ok(SearchResult { phase, reward, history })
}

/// Cyclic coordinate ascent over a uniform grid of `grid_points` phases in `[0, 2π)`,
/// started from a random configuration. A coordinate only moves on strict improvement.
pub fn coordinate_ascent<T: Real, R: Rng + ?Sized>(
    env: &mut RisEnvironment<T>,
    sweeps: usize,
    grid_points: usize,
    rng: &mut R,
) -> Result<SearchResult<T>> {
    if grid_points < 2 {
        return invalid("coordinate ascent needs at least two grid points");
    }
    let d = env.model.stats.dims;
    let mut phase = PhaseConfig::random(rng, d.num_ris, d.elements);
    let mut reward = env.evaluate(&phase)?;
    let mut history = vec![reward];
    let step = T::TAU() / T::from_usize(grid_points).unwrap();
    for _ in 0..sweeps {
        for r in 0..d.num_ris {
            for m in 0..d.elements {
                let mut best = (phase.get(r, m), reward);
                for g in 0..grid_points {
                    let mut trial = phase.clone();
                    trial.set(r, m, step * T::from_usize(g).unwrap());
                    let v = env.evaluate(&trial)?;
                    if v > best.1 {
                        best = (trial.get(r, m), v);
                    }
                }
                phase.set(r, m, best.0);
                reward = best.1;
                history.push(reward);
            }
        }
    }
    Ok(SearchResult { phase, reward, history })
}
