//! Dynamic regret against the time-varying optimal policy.

use nalgebra::DVector;

use crate::dynamics::LtvEnvironment;
use crate::error::{Error, Result};
use crate::ofu::RunRecord;
use crate::riccati::{backward_recursion, optimal_cost};

/// Expected optimal cost of episode `k` from `x1`, using the true schedule.
pub fn episode_optimal_cost(env: &LtvEnvironment, k: usize, x1: &DVector<f64>) -> Result<f64> {
    let schedule = env.episode_schedule(k)?;
    let sol = backward_recursion(schedule, env.q(), env.r(), env.horizon())?;
    optimal_cost(&sol, x1, env.noise_scale())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegretLedger {
    pub algorithm: String,
    pub environment: String,
    pub seed: u64,
    pub episode_costs: Vec<f64>,
    pub optimal_costs: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl RegretLedger {
    pub fn new(algorithm: impl Into<String>, environment: impl Into<String>, seed: u64) -> Self {
        Self {
            algorithm: algorithm.into(),
            environment: environment.into(),
            seed,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn regret(&self, i: usize) -> f64 {
        self.episode_costs[i] - self.optimal_costs[i]
    }

    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn push(&mut self, episode_cost: f64, optimal: f64) {
        let prev = self.final_regret();
        self.episode_costs.push(episode_cost);
        self.optimal_costs.push(optimal);
        self.cumulative.push(prev + (episode_cost - optimal));
    }
}

/// Appends the episodes of `record` to `ledger`.
///
/// The record must continue where the ledger stops: its first logged episode is
/// `ledger.len() + 1` and it may not run past the environment's last episode.
pub fn accumulate(
    ledger: &mut RegretLedger,
    record: &RunRecord,
    env: &LtvEnvironment,
) -> Result<()> {
    let first = ledger.len() + 1;
    let count = record.episode_costs.len();
    if first + count - 1 > env.episodes() || record.initial_states.len() != count {
        return Err(Error::EpisodeMismatch {
            expected: env.episodes(),
            got: first + count - 1,
        });
    }
    if count > 0 {
        let logged_first = record.steps.first().map(|s| s.episode).unwrap_or(first);
        if logged_first != first {
            return Err(Error::EpisodeMismatch {
                expected: first,
                got: logged_first,
            });
        }
    }
    for (i, (cost, x1)) in record
        .episode_costs
        .iter()
        .zip(&record.initial_states)
        .enumerate()
    {
        let optimal = episode_optimal_cost(env, first + i, x1)?;
        ledger.push(*cost, optimal);
    }
    Ok(())
}

/// Whole-run variation: per-episode budgets plus the jumps across episode seams.
pub fn total_variation(env: &LtvEnvironment) -> Result<f64> {
    let mut total = 0.0;
    for k in 1..=env.episodes() {
        total += env.episode_variation_budget(k)?;
        if k < env.episodes() {
            let seam = env.theta(k + 1, 1)?.matrix() - env.theta(k, env.horizon())?.matrix();
            total += seam.norm();
        }
    }
    Ok(total)
}

/// Restart epoch length `round((HK)^{2/3} B^{−2/3})` clamped to `[1, HK]`.
pub fn optimal_epoch_length(
    horizon: usize,
    episodes: usize,
    total_variation: f64,
) -> Result<usize> {
    if !(total_variation > 0.0 && total_variation.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "total_variation",
            reason: format!("must be positive and finite, got {total_variation}"),
        });
    }
    let steps = (horizon * episodes) as f64;
    let raw = (steps / total_variation).powf(2.0 / 3.0).round();
    Ok(raw.clamp(1.0, steps.max(1.0)) as usize)
}

/// Least-squares slope of `ln(max(c_k, 1e-9))` against `ln k` over the second half.
pub fn growth_exponent(cumulative: &[f64]) -> Result<f64> {
    const FLOOR: f64 = 1e-9;
    if cumulative.len() < 10 {
        return Err(Error::InvalidParameter {
            name: "cumulative",
            reason: format!("need at least 10 values, got {}", cumulative.len()),
        });
    }
    let start = cumulative.len() / 2;
    let tail = &cumulative[start..];
    if tail.iter().all(|v| *v <= 0.0) {
        return Err(Error::NonPositiveTail);
    }
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .enumerate()
        .map(|(i, c)| (((start + i + 1) as f64).ln(), c.max(FLOOR).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Sample mean and standard error (zero for a single sample).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
