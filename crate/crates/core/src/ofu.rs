//! Optimistic model selection and the online control loops.
//!
//! At every step the controller forms the ridge estimate, wraps it in a
//! confidence ellipsoid, samples candidate models inside the ellipsoid and acts
//! with the LQR gain of the candidate promising the lowest cost. The restarting
//! variant clears its statistics every `L` steps, the sliding-window variant keeps
//! the last `W` transitions. Both start every episode from `V = λI`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dynamics::{LtvEnvironment, Theta};
use crate::error::{Error, Result};
use crate::estimation::{weighted_norm, ConfidenceEllipsoid, GramState};
use crate::riccati::{backward_recursion, gain_control, ConstantModelEvaluator};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, PartialEq)]
pub struct OfuConfig {
    pub num_candidates: usize,
    /// Half-width of the uniform per-entry perturbation.
    pub perturb_scale: f64,
    pub epoch_length: usize,
    pub window: usize,
    pub lambda: f64,
    pub delta: f64,
    /// Evaluate the optimistic objective at `x_{k,h}` instead of `x_{k,1}`.
    pub evaluate_at_current_state: bool,
}

impl Default for OfuConfig {
    fn default() -> Self {
        Self {
            num_candidates: 50,
            perturb_scale: 0.5,
            epoch_length: 20,
            window: 20,
            lambda: 1.0,
            delta: 0.1,
            evaluate_at_current_state: false,
        }
    }
}

impl OfuConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid =
            |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if self.num_candidates < 1 {
            return invalid("candidates", "must be at least 1".into());
        }
        if !(self.perturb_scale >= 0.0 && self.perturb_scale.is_finite()) {
            return invalid(
                "perturb",
                format!(
                    "must be finite and non-negative, got {}",
                    self.perturb_scale
                ),
            );
        }
        if self.epoch_length < 1 {
            return invalid("epoch", "must be at least 1".into());
        }
        if self.window < 1 {
            return invalid("window", "must be at least 1".into());
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return invalid("lambda", format!("must be positive, got {}", self.lambda));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return invalid("delta", format!("must lie in (0, 1), got {}", self.delta));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    ROfu,
    SwOfu,
    OracleLqr,
    Zero,
    Omniscient,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::ROfu,
        Algorithm::SwOfu,
        Algorithm::OracleLqr,
        Algorithm::Zero,
        Algorithm::Omniscient,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::ROfu => "r-ofu",
            Algorithm::SwOfu => "sw-ofu",
            Algorithm::OracleLqr => "oracle-lqr",
            Algorithm::Zero => "zero",
            Algorithm::Omniscient => "omniscient",
        }
    }

    pub fn run(self, env: &LtvEnvironment, cfg: &OfuConfig, seed: u64) -> Result<RunRecord> {
        match self {
            Algorithm::ROfu => run_r_ofu(env, cfg, seed),
            Algorithm::SwOfu => run_sw_ofu(env, cfg, seed),
            Algorithm::OracleLqr => run_baseline(env, Baseline::OracleLqr, seed),
            Algorithm::Zero => run_baseline(env, Baseline::ZeroControl, seed),
            Algorithm::Omniscient => run_baseline(env, Baseline::Omniscient, seed),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.label() == s.trim())
            .ok_or_else(|| Error::UnknownAlgorithm(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// Finite-horizon LQR designed once per episode on the step-1 dynamics.
    OracleLqr,
    ZeroControl,
    /// Time-varying LQR on the true schedule.
    Omniscient,
}

/// One logged control step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub episode: usize,
    pub step: usize,
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub cost: f64,
    /// Index of the chosen candidate (0 is the ellipsoid center).
    pub selected: Option<usize>,
    pub selected_theta: Option<Theta>,
    pub selected_cost: Option<f64>,
    pub center_cost: Option<f64>,
    pub zeta: Option<f64>,
    pub logdet_v: Option<f64>,
    /// `‖Θ*_{k,h} − Θ_h‖_{V_h}`: diagnostic only, never used for control.
    pub truth_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub horizon: usize,
    pub steps: Vec<StepLog>,
    pub episode_costs: Vec<f64>,
    pub initial_states: Vec<DVector<f64>>,
}

impl RunRecord {
    fn new(algorithm: Algorithm, seed: u64, env: &LtvEnvironment) -> Self {
        let cap = env.horizon() * env.episodes();
        Self {
            algorithm,
            seed,
            horizon: env.horizon(),
            steps: Vec::with_capacity(cap),
            episode_costs: Vec::with_capacity(env.episodes()),
            initial_states: Vec::with_capacity(env.episodes()),
        }
    }

    pub fn episodes(&self) -> usize {
        self.episode_costs.len()
    }

    pub fn episode_steps(&self, k: usize) -> &[StepLog] {
        &self.steps[(k - 1) * self.horizon..k * self.horizon]
    }
}

/// The ellipsoid center followed by `m − 1` uniformly perturbed copies, each
/// projected back into the ellipsoid.
pub fn generate_candidates<R: Rng + ?Sized>(
    ell: &ConfidenceEllipsoid,
    cfg: &OfuConfig,
    rng: &mut R,
) -> Vec<Theta> {
    let center = ell.center();
    let (rows, cols) = center.matrix().shape();
    let mut out = Vec::with_capacity(cfg.num_candidates.max(1));
    out.push(center.clone());
    for _ in 1..cfg.num_candidates {
        let delta = DMatrix::from_fn(rows, cols, |_, _| {
            if cfg.perturb_scale > 0.0 {
                rng.random_range(-cfg.perturb_scale..=cfg.perturb_scale)
            } else {
                0.0
            }
        });
        let raw = Theta::from_matrix(center.matrix() + delta).expect("same shape as center");
        out.push(ell.project(&raw));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub theta: Theta,
    /// Optimistic cost `J*(Θ̃, x_eval)`; infinite when every candidate failed.
    pub cost: f64,
    /// First-step gain of the selected model; zero when every candidate failed.
    pub gain: DMatrix<f64>,
    /// Every candidate was ill-conditioned and the center was returned as a fallback.
    pub fallback: bool,
}

/// Picks the candidate with the lowest constant-model cost over `horizon_span`
/// steps, breaking ties by the lowest index and skipping ill-conditioned models.
pub fn select_optimistic(
    candidates: &[Theta],
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    horizon_span: usize,
    x_eval: &DVector<f64>,
    noise_scale: f64,
) -> Result<Selection> {
    let mut evaluator = ConstantModelEvaluator::new(q, r)?;
    select_with(
        &mut evaluator,
        candidates,
        horizon_span,
        x_eval,
        noise_scale,
    )
    .map(|(s, _)| s)
}

/// Returns the selection and the center's cost (candidate 0), if it was evaluable.
fn select_with(
    evaluator: &mut ConstantModelEvaluator,
    candidates: &[Theta],
    horizon_span: usize,
    x_eval: &DVector<f64>,
    noise_scale: f64,
) -> Result<(Selection, Option<f64>)> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut best: Option<(usize, f64, DMatrix<f64>)> = None;
    let mut center_cost = None;
    for (i, theta) in candidates.iter().enumerate() {
        match evaluator.evaluate(theta, horizon_span, x_eval, noise_scale) {
            Ok((cost, gain)) => {
                if i == 0 {
                    center_cost = Some(cost);
                }
                if best.as_ref().is_none_or(|(_, c, _)| cost < *c) {
                    best = Some((i, cost, gain));
                }
            }
            Err(Error::CandidateIllConditioned) => continue,
            Err(e) => return Err(e),
        }
    }
    let selection = match best {
        Some((index, cost, gain)) => Selection {
            index,
            theta: candidates[index].clone(),
            cost,
            gain,
            fallback: false,
        },
        None => {
            let theta = candidates[0].clone();
            let gain = DMatrix::zeros(theta.m(), theta.n());
            Selection {
                index: 0,
                theta,
                cost: f64::INFINITY,
                gain,
                fallback: true,
            }
        }
    };
    Ok((selection, center_cost))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Strategy {
    Restart { epoch: usize },
    Sliding { window: usize },
}

pub fn run_r_ofu(env: &LtvEnvironment, cfg: &OfuConfig, seed: u64) -> Result<RunRecord> {
    cfg.validate()?;
    run_ofu(
        env,
        cfg,
        seed,
        Strategy::Restart {
            epoch: cfg.epoch_length,
        },
    )
}

pub fn run_sw_ofu(env: &LtvEnvironment, cfg: &OfuConfig, seed: u64) -> Result<RunRecord> {
    cfg.validate()?;
    run_ofu(env, cfg, seed, Strategy::Sliding { window: cfg.window })
}

fn run_ofu(
    env: &LtvEnvironment,
    cfg: &OfuConfig,
    seed: u64,
    strategy: Strategy,
) -> Result<RunRecord> {
    let (n, m, horizon) = (env.n(), env.m(), env.horizon());
    let algorithm = match strategy {
        Strategy::Restart { .. } => Algorithm::ROfu,
        Strategy::Sliding { .. } => Algorithm::SwOfu,
    };
    let mut record = RunRecord::new(algorithm, seed, env);
    let mut evaluator = ConstantModelEvaluator::new(env.q(), env.r())?;

    for k in 1..=env.episodes() {
        let mut init_rng = stream(seed, Purpose::InitialState, k as u64);
        let mut noise_rng = stream(seed, Purpose::ProcessNoise, k as u64);
        let mut cand_rng = stream(seed, Purpose::Candidates, k as u64);
        let budget = env.episode_variation_budget(k)?;
        let x1 = env.sample_initial_state(&mut init_rng);
        let (mut gram, span) = match strategy {
            Strategy::Restart { epoch } => (GramState::restart(n, m, cfg.lambda)?, epoch),
            Strategy::Sliding { window } => (GramState::sliding(n, m, cfg.lambda, window)?, window),
        };
        let mut x = x1.clone();
        let mut episode_cost = 0.0;

        for h in 1..=horizon {
            if let Strategy::Restart { epoch } = strategy {
                if (h - 1) % epoch == 0 {
                    gram.reset()?;
                }
            }
            let estimate = gram.point_estimate()?;
            let zeta =
                gram.confidence_radius(cfg.delta, env.noise_scale(), budget, span, horizon)?;
            let logdet = gram.log_det_ratio()?;
            let truth_distance =
                weighted_norm(&(env.theta(k, h)?.matrix() - estimate.matrix()), gram.v());
            let ell = ConfidenceEllipsoid::new(estimate, gram.v().clone(), zeta)?;
            let candidates = generate_candidates(&ell, cfg, &mut cand_rng);
            let x_eval = if cfg.evaluate_at_current_state {
                &x
            } else {
                &x1
            };
            let (selection, center_cost) = select_with(
                &mut evaluator,
                &candidates,
                horizon - h + 1,
                x_eval,
                env.noise_scale(),
            )?;
            let u = gain_control(&selection.gain, &x)?;
            let t = env.step(k, h, &x, &u, &mut noise_rng)?;
            gram.update(&t)?;
            episode_cost += t.cost;
            record.steps.push(StepLog {
                episode: k,
                step: h,
                x,
                u,
                cost: t.cost,
                selected: Some(selection.index),
                selected_cost: Some(selection.cost),
                selected_theta: Some(selection.theta),
                center_cost,
                zeta: Some(zeta),
                logdet_v: Some(logdet),
                truth_distance: Some(truth_distance),
            });
            x = t.x_next;
        }
        record.episode_costs.push(episode_cost);
        record.initial_states.push(x1);
    }
    Ok(record)
}

pub fn run_baseline(env: &LtvEnvironment, which: Baseline, seed: u64) -> Result<RunRecord> {
    let algorithm = match which {
        Baseline::OracleLqr => Algorithm::OracleLqr,
        Baseline::ZeroControl => Algorithm::Zero,
        Baseline::Omniscient => Algorithm::Omniscient,
    };
    let (m, horizon) = (env.m(), env.horizon());
    let mut record = RunRecord::new(algorithm, seed, env);

    for k in 1..=env.episodes() {
        let mut init_rng = stream(seed, Purpose::InitialState, k as u64);
        let mut noise_rng = stream(seed, Purpose::ProcessNoise, k as u64);
        let x1 = env.sample_initial_state(&mut init_rng);
        let gains = match which {
            Baseline::ZeroControl => None,
            Baseline::OracleLqr => {
                let nominal = vec![env.theta(k, 1)?.clone(); horizon];
                Some(backward_recursion(&nominal, env.q(), env.r(), horizon)?)
            }
            Baseline::Omniscient => Some(backward_recursion(
                env.episode_schedule(k)?,
                env.q(),
                env.r(),
                horizon,
            )?),
        };
        let mut x = x1.clone();
        let mut episode_cost = 0.0;
        for h in 1..=horizon {
            let u = match &gains {
                Some(sol) => gain_control(&sol.gains()[h - 1], &x)?,
                None => DVector::zeros(m),
            };
            let t = env.step(k, h, &x, &u, &mut noise_rng)?;
            episode_cost += t.cost;
            record.steps.push(StepLog {
                episode: k,
                step: h,
                x,
                u,
                cost: t.cost,
                selected: None,
                selected_theta: None,
                selected_cost: None,
                center_cost: None,
                zeta: None,
                logdet_v: None,
                truth_distance: None,
            });
            x = t.x_next;
        }
        record.episode_costs.push(episode_cost);
        record.initial_states.push(x1);
    }
    Ok(record)
}
