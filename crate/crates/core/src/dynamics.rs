//! Episodic linear time-varying environments.
//!
//! An environment holds the true parameter `Θ_{k,h} = [A_{k,h}, B_{k,h}]ᵀ` for
//! every episode `k ∈ [1, K]` and step `h ∈ [1, H]`, the known cost matrices and
//! the noise law. Episodes and steps are 1-based throughout the crate.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure_len, Error, Result};
use crate::rng::{stream, Purpose};

/// Stacked system parameter `[A | B]ᵀ` of shape `(n + m) × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    matrix: DMatrix<f64>,
    n: usize,
}

impl Theta {
    pub fn from_ab(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "A",
                reason: "state dimension must be at least 1".into(),
            });
        }
        ensure_len("A columns", n, a.ncols())?;
        ensure_len("B rows", n, b.nrows())?;
        let m = b.ncols();
        if m == 0 {
            return Err(Error::InvalidParameter {
                name: "B",
                reason: "input dimension must be at least 1".into(),
            });
        }
        let mut matrix = DMatrix::zeros(n + m, n);
        matrix.view_mut((0, 0), (n, n)).copy_from(&a.transpose());
        matrix.view_mut((n, 0), (m, n)).copy_from(&b.transpose());
        Ok(Self { matrix, n })
    }

    /// Wraps an already stacked `(n + m) × n` matrix.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.ncols();
        if n == 0 || matrix.nrows() <= n {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: format!(
                    "expected (n+m) x n with n, m >= 1, got {} x {}",
                    matrix.nrows(),
                    n
                ),
            });
        }
        Ok(Self { matrix, n })
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(n + m, n),
            n,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.matrix.nrows() - self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn a(&self) -> DMatrix<f64> {
        self.matrix.view((0, 0), (self.n, self.n)).transpose()
    }

    pub fn b(&self) -> DMatrix<f64> {
        self.matrix
            .view((self.n, 0), (self.m(), self.n))
            .transpose()
    }

    /// Noise-free successor `A x + B u`, computed as `Θᵀ z`.
    pub fn predict(&self, z: &DVector<f64>) -> DVector<f64> {
        self.matrix.tr_mul(z)
    }
}

/// Law of the initial state `x_{k,1}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialStateLaw {
    /// Uniform direction on the unit sphere scaled by a radius drawn uniformly from `[0, 1]`.
    #[default]
    UniformBall,
    Origin,
    /// Deterministic initial state; its norm must not exceed one.
    Fixed(DVector<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Switching,
    Slow,
    Frequent,
    Lti,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Switching,
        Preset::Slow,
        Preset::Frequent,
        Preset::Lti,
        Preset::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Switching => "switching",
            Preset::Slow => "slow",
            Preset::Frequent => "frequent",
            Preset::Lti => "lti",
            Preset::Custom => "custom",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s.trim())
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// Steps between random reconfigurations of the `frequent` preset.
pub const FREQUENT_PERIOD: usize = 20;

/// The four double-integrator configurations used by the presets:
/// `(A₁, B₁)`, `(A₂, B₂)`, `(A₁, −B₁)`, `(A₂, −B₂)`.
pub fn reference_configurations() -> [Theta; 4] {
    let a1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
    let b1 = DMatrix::from_row_slice(2, 1, &[0.0, 1.2]);
    let a2 = DMatrix::from_row_slice(2, 2, &[1.0, 1.5, 0.0, 1.0]);
    let b2 = DMatrix::from_row_slice(2, 1, &[0.0, 0.9]);
    let mk = |a: &DMatrix<f64>, b: &DMatrix<f64>| Theta::from_ab(a, b).expect("static shapes");
    [
        mk(&a1, &b1),
        mk(&a2, &b2),
        mk(&a1, &(-&b1)),
        mk(&a2, &(-&b2)),
    ]
}

/// One observed step: regressor `z = [x; u]`, successor state and stage cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub z: DVector<f64>,
    pub x_next: DVector<f64>,
    pub cost: f64,
}

impl Transition {
    pub fn state_dim(&self) -> usize {
        self.x_next.len()
    }

    pub fn x(&self) -> DVector<f64> {
        self.z.rows(0, self.state_dim()).into_owned()
    }

    pub fn u(&self) -> DVector<f64> {
        let n = self.state_dim();
        self.z.rows(n, self.z.len() - n).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtvEnvironment {
    preset: Preset,
    n: usize,
    m: usize,
    horizon: usize,
    episodes: usize,
    /// Row-major over `(k, h)`: index `(k - 1) * H + (h - 1)`.
    schedule: Vec<Theta>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    noise_scale: f64,
    initial_state: InitialStateLaw,
}

impl LtvEnvironment {
    /// Builds an environment from an explicit schedule with identity costs.
    pub fn new(
        preset: Preset,
        schedule: Vec<Theta>,
        horizon: usize,
        episodes: usize,
        noise_scale: f64,
    ) -> Result<Self> {
        if horizon < 2 {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: format!("must be at least 2, got {horizon}"),
            });
        }
        if episodes < 1 {
            return Err(Error::InvalidParameter {
                name: "episodes",
                reason: "must be at least 1".into(),
            });
        }
        if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "noise_scale",
                reason: format!("must be finite and non-negative, got {noise_scale}"),
            });
        }
        ensure_len("schedule length", horizon * episodes, schedule.len())?;
        let n = schedule[0].n();
        let m = schedule[0].m();
        for theta in &schedule {
            ensure_len("schedule state dimension", n, theta.n())?;
            ensure_len("schedule input dimension", m, theta.m())?;
        }
        Ok(Self {
            preset,
            n,
            m,
            horizon,
            episodes,
            schedule,
            q: DMatrix::identity(n, n),
            r: DMatrix::identity(m, m),
            noise_scale,
            initial_state: InitialStateLaw::default(),
        })
    }

    /// Cycles through `configurations`, holding each for `period` steps. The cycle
    /// restarts at `h = 1` of every episode.
    pub fn from_configurations(
        configurations: &[Theta],
        period: usize,
        horizon: usize,
        episodes: usize,
        noise_scale: f64,
    ) -> Result<Self> {
        if configurations.is_empty() {
            return Err(Error::InvalidParameter {
                name: "configurations",
                reason: "at least one (A, B) pair is required".into(),
            });
        }
        if period == 0 {
            return Err(Error::InvalidParameter {
                name: "period",
                reason: "must be at least 1".into(),
            });
        }
        let schedule = (0..episodes)
            .flat_map(|_| {
                (0..horizon).map(|i| configurations[(i / period) % configurations.len()].clone())
            })
            .collect();
        Self::new(Preset::Custom, schedule, horizon, episodes, noise_scale)
    }

    pub fn with_costs(mut self, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        ensure_len("Q rows", self.n, q.nrows())?;
        ensure_len("Q columns", self.n, q.ncols())?;
        ensure_len("R rows", self.m, r.nrows())?;
        ensure_len("R columns", self.m, r.ncols())?;
        check_spd("Q", &q)?;
        check_spd("R", &r)?;
        self.q = q;
        self.r = r;
        Ok(self)
    }

    pub fn with_initial_state(mut self, law: InitialStateLaw) -> Result<Self> {
        if let InitialStateLaw::Fixed(x) = &law {
            ensure_len("initial state", self.n, x.len())?;
            if x.norm() > 1.0 + 1e-12 {
                return Err(Error::InvalidParameter {
                    name: "initial_state",
                    reason: format!("norm {} exceeds 1", x.norm()),
                });
            }
        }
        self.initial_state = law;
        Ok(self)
    }

    pub fn with_noise_scale(mut self, noise_scale: f64) -> Result<Self> {
        if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "noise_scale",
                reason: format!("must be finite and non-negative, got {noise_scale}"),
            });
        }
        self.noise_scale = noise_scale;
        Ok(self)
    }

    pub fn preset(&self) -> Preset {
        self.preset
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn episodes(&self) -> usize {
        self.episodes
    }
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }
    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }
    pub fn initial_state_law(&self) -> &InitialStateLaw {
        &self.initial_state
    }

    pub fn theta(&self, k: usize, h: usize) -> Result<&Theta> {
        if k == 0 || k > self.episodes || h == 0 || h > self.horizon {
            return Err(Error::OutOfSchedule {
                episode: k,
                step: h,
            });
        }
        Ok(&self.schedule[(k - 1) * self.horizon + (h - 1)])
    }

    /// The true parameters `Θ_{k,1..H}` of one episode.
    pub fn episode_schedule(&self, k: usize) -> Result<&[Theta]> {
        self.theta(k, 1)?;
        let start = (k - 1) * self.horizon;
        Ok(&self.schedule[start..start + self.horizon])
    }

    /// `xᵀ Q x + uᵀ R u`.
    pub fn stage_cost(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        x.dot(&(&self.q * x)) + u.dot(&(&self.r * u))
    }

    /// Advances `x_{k,h}` under input `u` with Gaussian process noise drawn from `rng`.
    /// The returned cost belongs to the current `(x, u)`.
    pub fn step<R: Rng + ?Sized>(
        &self,
        k: usize,
        h: usize,
        x: &DVector<f64>,
        u: &DVector<f64>,
        rng: &mut R,
    ) -> Result<Transition> {
        ensure_len("state", self.n, x.len())?;
        ensure_len("input", self.m, u.len())?;
        let theta = self.theta(k, h)?;
        let mut z = DVector::zeros(self.n + self.m);
        z.rows_mut(0, self.n).copy_from(x);
        z.rows_mut(self.n, self.m).copy_from(u);
        let mut x_next = theta.predict(&z);
        for xi in x_next.iter_mut() {
            let w: f64 = StandardNormal.sample(rng);
            *xi += self.noise_scale * w;
        }
        Ok(Transition {
            cost: self.stage_cost(x, u),
            z,
            x_next,
        })
    }

    pub fn sample_initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        match &self.initial_state {
            InitialStateLaw::Origin => DVector::zeros(self.n),
            InitialStateLaw::Fixed(x) => x.clone(),
            InitialStateLaw::UniformBall => {
                let mut dir = DVector::from_fn(self.n, |_, _| StandardNormal.sample(rng));
                let norm = dir.norm();
                let radius: f64 = rng.random_range(0.0..=1.0);
                if norm > 0.0 {
                    dir *= radius / norm;
                }
                // rounding in the normalisation may overshoot the unit ball by an ulp
                let scaled = dir.norm();
                if scaled > 1.0 {
                    dir /= scaled;
                }
                dir
            }
        }
    }

    /// Total Frobenius drift `Σ_{h=1}^{H−1} ‖Θ_{k,h+1} − Θ_{k,h}‖_F` within episode `k`.
    pub fn episode_variation_budget(&self, k: usize) -> Result<f64> {
        let schedule = self.episode_schedule(k)?;
        Ok(schedule
            .windows(2)
            .map(|w| (w[1].matrix() - w[0].matrix()).norm())
            .sum())
    }
}

fn check_spd(name: &'static str, m: &DMatrix<f64>) -> Result<()> {
    let asym = (m - m.transpose()).norm();
    if asym > 1e-12 * (1.0 + m.norm()) {
        return Err(Error::NotPositiveDefinite(name));
    }
    let min_eig = m.clone().symmetric_eigenvalues().min();
    if min_eig > 0.0 {
        Ok(())
    } else {
        Err(Error::NotPositiveDefinite(name))
    }
}

/// Builds one of the named environments with identity costs `Q = I`, `R = I`.
///
/// `seed` only matters for `frequent`, whose configuration is redrawn uniformly
/// from the four reference systems every 20 steps, independently per episode.
pub fn build_environment(
    preset: Preset,
    horizon: usize,
    episodes: usize,
    noise_scale: f64,
    seed: u64,
) -> Result<LtvEnvironment> {
    if horizon < 2 {
        return Err(Error::InvalidParameter {
            name: "horizon",
            reason: format!("must be at least 2, got {horizon}"),
        });
    }
    let configs = reference_configurations();
    let [sys1, sys2, _, _] = &configs;
    let schedule: Vec<Theta> = match preset {
        Preset::Lti => vec![sys1.clone(); horizon * episodes],
        Preset::Switching => {
            let half = horizon / 2;
            (0..episodes)
                .flat_map(|_| (1..=horizon).map(|h| if h <= half { sys1 } else { sys2 }.clone()))
                .collect()
        }
        Preset::Slow => {
            let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
            let per_episode: Vec<Theta> = (1..=horizon)
                .map(|h| {
                    let b = DMatrix::from_row_slice(2, 1, &[0.0, h as f64 / 20.0]);
                    Theta::from_ab(&a, &b).expect("static shapes")
                })
                .collect();
            (0..episodes)
                .flat_map(|_| per_episode.iter().cloned())
                .collect()
        }
        Preset::Frequent => {
            if horizon < FREQUENT_PERIOD {
                return Err(Error::InvalidParameter {
                    name: "horizon",
                    reason: format!(
                        "frequent preset needs at least {FREQUENT_PERIOD} steps, got {horizon}"
                    ),
                });
            }
            let mut schedule = Vec::with_capacity(horizon * episodes);
            for k in 1..=episodes {
                let mut rng = stream(seed, Purpose::Schedule, k as u64);
                let mut current = 0;
                for i in 0..horizon {
                    if i % FREQUENT_PERIOD == 0 {
                        current = rng.random_range(0..configs.len());
                    }
                    schedule.push(configs[current].clone());
                }
            }
            schedule
        }
        Preset::Custom => {
            return Err(Error::InvalidParameter {
                name: "preset",
                reason: "custom environments are built from explicit configurations".into(),
            })
        }
    };
    LtvEnvironment::new(preset, schedule, horizon, episodes, noise_scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn switching_preset_halves() {
        let env = build_environment(Preset::Switching, 100, 3, 0.1, 0).unwrap();
        for k in 1..=3 {
            let t1 = env.theta(k, 1).unwrap();
            assert_eq!(t1.a(), m(2, 2, &[1.0, 0.5, 0.0, 1.0]));
            assert_eq!(t1.b(), m(2, 1, &[0.0, 1.2]));
            assert_eq!(env.theta(k, 50).unwrap(), t1);
            let t51 = env.theta(k, 51).unwrap();
            assert_eq!(t51.a(), m(2, 2, &[1.0, 1.5, 0.0, 1.0]));
            assert_eq!(t51.b(), m(2, 1, &[0.0, 0.9]));
        }
    }

    #[test]
    fn slow_preset_input_ramp() {
        let env = build_environment(Preset::Slow, 100, 1, 0.1, 0).unwrap();
        assert_eq!(env.theta(1, 20).unwrap().b(), m(2, 1, &[0.0, 1.0]));
        assert_eq!(env.theta(1, 7).unwrap().a(), m(2, 2, &[1.0, 1.0, 0.0, 1.0]));
    }

    #[test]
    fn frequent_preset_blocks_and_seed() {
        let env = build_environment(Preset::Frequent, 100, 4, 0.1, 11).unwrap();
        let configs = reference_configurations();
        for k in 1..=4 {
            for block in 0..5 {
                let first = env.theta(k, block * 20 + 1).unwrap();
                assert!(configs.contains(first));
                for h in block * 20 + 1..=block * 20 + 20 {
                    assert_eq!(env.theta(k, h).unwrap(), first);
                }
            }
        }
        let again = build_environment(Preset::Frequent, 100, 4, 0.1, 11).unwrap();
        assert_eq!(env, again);
        let other = build_environment(Preset::Frequent, 100, 4, 0.1, 12).unwrap();
        assert_ne!(env, other);
    }

    #[test]
    fn preset_errors() {
        assert!(matches!(
            "bogus".parse::<Preset>(),
            Err(Error::UnknownPreset(_))
        ));
        assert!(build_environment(Preset::Frequent, 19, 1, 0.1, 0).is_err());
        assert!(build_environment(Preset::Lti, 1, 1, 0.1, 0).is_err());
        assert!(build_environment(Preset::Custom, 10, 1, 0.1, 0).is_err());
        assert_eq!("slow".parse::<Preset>().unwrap(), Preset::Slow);
    }

    #[test]
    fn step_examples() {
        let env = build_environment(Preset::Lti, 10, 1, 0.0, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = env
            .step(
                1,
                1,
                &DVector::from_vec(vec![1.0, 0.0]),
                &DVector::from_vec(vec![0.0]),
                &mut rng,
            )
            .unwrap();
        assert_eq!(t.x_next, DVector::from_vec(vec![1.0, 0.0]));
        let t = env
            .step(
                1,
                1,
                &DVector::from_vec(vec![0.0, 0.0]),
                &DVector::from_vec(vec![1.0]),
                &mut rng,
            )
            .unwrap();
        assert_eq!(t.x_next, DVector::from_vec(vec![0.0, 1.2]));
        let t = env
            .step(
                1,
                1,
                &DVector::from_vec(vec![1.0, 0.0]),
                &DVector::from_vec(vec![1.0]),
                &mut rng,
            )
            .unwrap();
        assert_eq!(t.cost, 2.0);
        assert_eq!(t.x(), DVector::from_vec(vec![1.0, 0.0]));
        assert_eq!(t.u(), DVector::from_vec(vec![1.0]));
    }

    #[test]
    fn step_errors() {
        let env = build_environment(Preset::Lti, 10, 2, 0.0, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = DVector::zeros(2);
        let u = DVector::zeros(1);
        assert!(matches!(
            env.step(1, 1, &DVector::zeros(3), &u, &mut rng),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            env.step(1, 1, &x, &DVector::zeros(2), &mut rng),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            env.step(3, 1, &x, &u, &mut rng),
            Err(Error::OutOfSchedule { .. })
        ));
        assert!(matches!(
            env.step(1, 11, &x, &u, &mut rng),
            Err(Error::OutOfSchedule { .. })
        ));
    }

    #[test]
    fn initial_state_laws() {
        let env = build_environment(Preset::Lti, 10, 1, 0.1, 0).unwrap();
        let origin = env
            .clone()
            .with_initial_state(InitialStateLaw::Origin)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(origin.sample_initial_state(&mut rng), DVector::zeros(2));

        let a = env.sample_initial_state(&mut ChaCha8Rng::seed_from_u64(5));
        let b = env.sample_initial_state(&mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            assert!(env.sample_initial_state(&mut rng).norm() <= 1.0 + 1e-12);
        }
        assert!(env
            .with_initial_state(InitialStateLaw::Fixed(DVector::from_vec(vec![1.0, 1.0])))
            .is_err());
    }

    #[test]
    fn variation_budgets() {
        let lti = build_environment(Preset::Lti, 100, 2, 0.1, 0).unwrap();
        assert_eq!(lti.episode_variation_budget(1).unwrap(), 0.0);
        let sw = build_environment(Preset::Switching, 100, 2, 0.1, 0).unwrap();
        assert_relative_eq!(
            sw.episode_variation_budget(2).unwrap(),
            1.09f64.sqrt(),
            max_relative = 1e-14
        );
        let slow = build_environment(Preset::Slow, 100, 1, 0.1, 0).unwrap();
        assert_relative_eq!(
            slow.episode_variation_budget(1).unwrap(),
            4.95,
            max_relative = 1e-12
        );
    }

    #[test]
    fn variation_budget_independent_of_episode_count() {
        for preset in [Preset::Switching, Preset::Slow, Preset::Lti] {
            let one = build_environment(preset, 60, 1, 0.1, 0).unwrap();
            let many = build_environment(preset, 60, 7, 0.1, 0).unwrap();
            let b1 = one.episode_variation_budget(1).unwrap();
            for k in 1..=7 {
                assert_eq!(many.episode_variation_budget(k).unwrap(), b1);
            }
        }
    }

    #[test]
    fn noiseless_zero_input_matches_matrix_product() {
        let env = build_environment(Preset::Switching, 12, 1, 0.0, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x1 = DVector::from_vec(vec![0.3, -0.4]);
        let mut x = x1.clone();
        let u = DVector::zeros(1);
        let mut product = DMatrix::<f64>::identity(2, 2);
        for h in 1..12 {
            x = env.step(1, h, &x, &u, &mut rng).unwrap().x_next;
            product = env.theta(1, h).unwrap().a() * product;
            assert_relative_eq!(x, &product * &x1, max_relative = 1e-12);
        }
    }

    #[test]
    fn cost_matrices_are_validated() {
        let env = build_environment(Preset::Lti, 10, 1, 0.1, 0).unwrap();
        let bad_q = m(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            env.clone().with_costs(bad_q, DMatrix::identity(1, 1)),
            Err(Error::NotPositiveDefinite("Q"))
        ));
        let asym = m(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(env
            .clone()
            .with_costs(asym, DMatrix::identity(1, 1))
            .is_err());
        assert!(env
            .with_costs(DMatrix::identity(2, 2) * 2.0, DMatrix::identity(1, 1) * 3.0)
            .is_ok());
    }

    #[test]
    fn custom_configurations_cycle() {
        let configs = reference_configurations();
        let env = LtvEnvironment::from_configurations(&configs[..2], 5, 12, 2, 0.0).unwrap();
        assert_eq!(env.theta(2, 5).unwrap(), &configs[0]);
        assert_eq!(env.theta(2, 6).unwrap(), &configs[1]);
        assert_eq!(env.theta(2, 11).unwrap(), &configs[0]);
        assert_eq!(env.preset(), Preset::Custom);
    }

    fn small_matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
        prop::collection::vec(-5.0f64..5.0, rows * cols)
            .prop_map(move |v| DMatrix::from_vec(rows, cols, v))
    }

    proptest! {
        #[test]
        fn theta_split_restack_is_exact(
            (a, b) in (1usize..4, 1usize..4).prop_flat_map(|(n, m)| (small_matrix(n, n), small_matrix(n, m)))
        ) {
            let theta = Theta::from_ab(&a, &b).unwrap();
            prop_assert_eq!(theta.matrix().nrows(), a.nrows() + b.ncols());
            prop_assert_eq!(theta.matrix().ncols(), a.nrows());
            prop_assert_eq!(&theta.a(), &a);
            prop_assert_eq!(&theta.b(), &b);
            let again = Theta::from_ab(&theta.a(), &theta.b()).unwrap();
            prop_assert_eq!(again, theta);
        }

        #[test]
        fn cost_is_nonnegative_and_zero_only_at_origin(
            x in prop::collection::vec(-3.0f64..3.0, 2),
            u in -3.0f64..3.0,
        ) {
            let env = build_environment(Preset::Lti, 4, 1, 0.0, 0).unwrap();
            let x = DVector::from_vec(x);
            let u = DVector::from_vec(vec![u]);
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let t = env.step(1, 1, &x, &u, &mut rng).unwrap();
            let recomputed = t.z.dot(&t.z);
            prop_assert!((t.cost - recomputed).abs() <= 1e-12 * recomputed.max(1e-300));
            prop_assert!(t.cost >= 0.0);
            prop_assert_eq!(t.cost == 0.0, x.iter().all(|v| *v == 0.0) && u[0] == 0.0);
        }
    }
}
