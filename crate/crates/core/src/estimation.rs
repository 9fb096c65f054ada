//! Ridge-regression sufficient statistics and confidence ellipsoids.
//!
//! Both estimators keep `V = Σ z zᵀ + λI` and `U = Σ z x_nextᵀ` over the data
//! currently in use. The restarting estimator clears them at every epoch start;
//! the sliding-window estimator evicts the oldest transition once more than `W`
//! are retained.

use std::collections::VecDeque;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::dynamics::{Theta, Transition};
use crate::error::{ensure_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    Restart,
    Sliding { window: usize },
}

#[derive(Debug, Clone)]
pub struct GramState {
    n: usize,
    m: usize,
    lambda: f64,
    mode: EstimatorMode,
    v: DMatrix<f64>,
    u: DMatrix<f64>,
    window: VecDeque<(DVector<f64>, DVector<f64>)>,
    count: usize,
}

impl GramState {
    pub fn new(n: usize, m: usize, lambda: f64, mode: EstimatorMode) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidParameter {
                name: "dimensions",
                reason: format!("n and m must be at least 1, got n={n}, m={m}"),
            });
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must be positive and finite, got {lambda}"),
            });
        }
        if let EstimatorMode::Sliding { window: 0 } = mode {
            return Err(Error::InvalidParameter {
                name: "window",
                reason: "must be at least 1".into(),
            });
        }
        let d = n + m;
        Ok(Self {
            n,
            m,
            lambda,
            mode,
            v: DMatrix::identity(d, d) * lambda,
            u: DMatrix::zeros(d, n),
            window: VecDeque::new(),
            count: 0,
        })
    }

    pub fn restart(n: usize, m: usize, lambda: f64) -> Result<Self> {
        Self::new(n, m, lambda, EstimatorMode::Restart)
    }

    pub fn sliding(n: usize, m: usize, lambda: f64, window: usize) -> Result<Self> {
        Self::new(n, m, lambda, EstimatorMode::Sliding { window })
    }

    pub fn mode(&self) -> EstimatorMode {
        self.mode
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }
    pub fn count(&self) -> usize {
        self.count
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }

    /// Transitions currently contributing, oldest first (sliding mode only).
    pub fn retained(&self) -> impl Iterator<Item = (&DVector<f64>, &DVector<f64>)> {
        self.window.iter().map(|(z, x)| (z, x))
    }

    pub fn update(&mut self, t: &Transition) -> Result<()> {
        self.push(&t.z, &t.x_next)
    }

    /// Adds one regressor/target pair, evicting the oldest pair in sliding mode.
    pub fn push(&mut self, z: &DVector<f64>, x_next: &DVector<f64>) -> Result<()> {
        ensure_len("regressor", self.n + self.m, z.len())?;
        ensure_len("next state", self.n, x_next.len())?;
        self.v.ger(1.0, z, z, 1.0);
        self.u.ger(1.0, z, x_next, 1.0);
        self.count += 1;
        if let EstimatorMode::Sliding { window } = self.mode {
            self.window.push_back((z.clone(), x_next.clone()));
            if self.window.len() > window {
                let (old_z, old_x) = self.window.pop_front().expect("non-empty window");
                self.v.ger(-1.0, &old_z, &old_z, 1.0);
                self.u.ger(-1.0, &old_z, &old_x, 1.0);
                self.count -= 1;
            }
        }
        Ok(())
    }

    /// Discards all data (epoch start of the restarting estimator).
    pub fn reset(&mut self) -> Result<()> {
        if self.mode != EstimatorMode::Restart {
            return Err(Error::InvalidParameter {
                name: "mode",
                reason: "reset is only defined for the restarting estimator".into(),
            });
        }
        let d = self.n + self.m;
        self.v = DMatrix::identity(d, d) * self.lambda;
        self.u = DMatrix::zeros(d, self.n);
        self.window.clear();
        self.count = 0;
        Ok(())
    }

    fn factor(&self) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.v.clone()).ok_or(Error::NotPositiveDefinite("V"))
    }

    /// Ridge estimate `V⁻¹ U`.
    pub fn point_estimate(&self) -> Result<Theta> {
        let chol = self.factor()?;
        Theta::from_matrix(chol.solve(&self.u))
    }

    /// `ln det V − (n + m) ln λ`, accumulated from the Cholesky diagonal.
    pub fn log_det_ratio(&self) -> Result<f64> {
        let chol = self.factor()?;
        let l = chol.l_dirty();
        let d = self.n + self.m;
        let log_det: f64 = (0..d).map(|i| 2.0 * l[(i, i)].ln()).sum();
        Ok(log_det - d as f64 * self.lambda.ln())
    }

    /// Confidence radius around the current estimate.
    ///
    /// `span` is the epoch length `L` (restart) or window `W` (sliding). `horizon`
    /// enters only the sliding form through its `ln(2H/δ)` term.
    pub fn confidence_radius(
        &self,
        delta: f64,
        noise_scale: f64,
        variation_budget: f64,
        span: usize,
        horizon: usize,
    ) -> Result<f64> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: format!("must lie in (0, 1), got {delta}"),
            });
        }
        if span == 0 {
            return Err(Error::InvalidParameter {
                name: "span",
                reason: "must be positive".into(),
            });
        }
        let confidence_log = match self.mode {
            EstimatorMode::Restart => (2.0 / delta).ln(),
            EstimatorMode::Sliding { .. } => {
                if horizon == 0 {
                    return Err(Error::InvalidParameter {
                        name: "horizon",
                        reason: "must be positive".into(),
                    });
                }
                (2.0 * horizon as f64 / delta).ln()
            }
        };
        let log_det = self.log_det_ratio()?;
        let d = (self.n + self.m) as f64;
        let noise_term = noise_scale
            * (2.0 * confidence_log + self.n as f64 * log_det)
                .max(0.0)
                .sqrt();
        let bias_term = (span as f64 * d).sqrt() / self.lambda.sqrt() * variation_budget;
        Ok(self.lambda.sqrt() + noise_term + bias_term)
    }

    /// Ellipsoid `{Θ : ‖Θ − Θ̂‖_V ≤ ζ}` around the current estimate.
    pub fn ellipsoid(&self, radius: f64) -> Result<ConfidenceEllipsoid> {
        ConfidenceEllipsoid::new(self.point_estimate()?, self.v.clone(), radius)
    }
}

/// `‖X‖_Y = √Trace(Xᵀ Y X)`.
pub fn weighted_norm(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let yx = y * x;
    x.dot(&yx).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceEllipsoid {
    center: Theta,
    shaping: DMatrix<f64>,
    radius: f64,
}

impl ConfidenceEllipsoid {
    pub fn new(center: Theta, shaping: DMatrix<f64>, radius: f64) -> Result<Self> {
        let d = center.matrix().nrows();
        ensure_len("shaping rows", d, shaping.nrows())?;
        ensure_len("shaping columns", d, shaping.ncols())?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "radius",
                reason: format!("must be positive and finite, got {radius}"),
            });
        }
        Ok(Self {
            center,
            shaping,
            radius,
        })
    }

    pub fn center(&self) -> &Theta {
        &self.center
    }
    pub fn shaping(&self) -> &DMatrix<f64> {
        &self.shaping
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn distance(&self, theta: &Theta) -> f64 {
        weighted_norm(&(theta.matrix() - self.center.matrix()), &self.shaping)
    }

    pub fn contains(&self, theta: &Theta) -> bool {
        self.distance(theta) <= self.radius
    }

    /// Radial projection onto the ellipsoid; interior points are returned unchanged.
    pub fn project(&self, theta: &Theta) -> Theta {
        let dist = self.distance(theta);
        if dist <= self.radius {
            return theta.clone();
        }
        let dev = theta.matrix() - self.center.matrix();
        let mut scale = self.radius / dist;
        // rounding can leave the rescaled point an ulp outside; shrink until it is in
        for _ in 0..64 {
            let candidate =
                Theta::from_matrix(self.center.matrix() + &dev * scale).expect("same shape");
            if self.contains(&candidate) {
                return candidate;
            }
            scale *= 1.0 - 1e-14;
        }
        self.center.clone()
    }
}
