//! Finite-horizon backward Riccati recursion.
//!
//! With terminal value `P_{H+1} = 0`, each backward step computes
//!
//! ```text
//! S_h = R + B_hᵀ P_{h+1} B_h
//! K_h = −S_h⁻¹ B_hᵀ P_{h+1} A_h
//! P_h = Q + A_hᵀ P_{h+1} A_h + (B_hᵀ P_{h+1} A_h)ᵀ K_h
//! ```
//!
//! `S_h` is factored with a Cholesky decomposition; no inverse is formed.
//! The OFU loop evaluates thousands of constant-model recursions per step, so the
//! step itself runs on flat column-major buffers instead of allocating matrices.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::Theta;
use crate::error::{ensure_len, Error, Result};

/// Value matrices `P_{h₀}, …, P_{H+1}` and gains `K_{h₀}, …, K_H`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    p_seq: Vec<DMatrix<f64>>,
    k_seq: Vec<DMatrix<f64>>,
}

impl RiccatiSolution {
    /// Assembles a solution from its parts; `p_seq` must be one longer than `k_seq`.
    pub fn from_parts(p_seq: Vec<DMatrix<f64>>, k_seq: Vec<DMatrix<f64>>) -> Result<Self> {
        if k_seq.is_empty() {
            return Err(Error::InvalidParameter {
                name: "k_seq",
                reason: "at least one gain is required".into(),
            });
        }
        ensure_len("value sequence", k_seq.len() + 1, p_seq.len())?;
        Ok(Self { p_seq, k_seq })
    }

    pub fn horizon_span(&self) -> usize {
        self.k_seq.len()
    }

    /// `P_{h₀ + i}`; index `horizon_span()` is the terminal `P_{H+1}`.
    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.p_seq
    }

    /// `K_{h₀ + i}`.
    pub fn gains(&self) -> &[DMatrix<f64>] {
        &self.k_seq
    }

    pub fn first_value(&self) -> &DMatrix<f64> {
        &self.p_seq[0]
    }

    pub fn first_gain(&self) -> &DMatrix<f64> {
        &self.k_seq[0]
    }
}

/// One backward Riccati step on column-major buffers.
#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    n: usize,
    m: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    q: Vec<f64>,
    r: Vec<f64>,
    pa: Vec<f64>,
    pb: Vec<f64>,
    s: Vec<f64>,
    g: Vec<f64>,
}

impl Kernel {
    pub(crate) fn new(n: usize, m: usize, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<Self> {
        ensure_len("Q rows", n, q.nrows())?;
        ensure_len("Q columns", n, q.ncols())?;
        ensure_len("R rows", m, r.nrows())?;
        ensure_len("R columns", m, r.ncols())?;
        Ok(Self {
            n,
            m,
            a: vec![0.0; n * n],
            b: vec![0.0; n * m],
            q: q.as_slice().to_vec(),
            r: r.as_slice().to_vec(),
            pa: vec![0.0; n * n],
            pb: vec![0.0; n * m],
            s: vec![0.0; m * m],
            g: vec![0.0; m * n],
        })
    }

    /// Loads `A` and `B` out of a stacked `Θ = [A | B]ᵀ`.
    pub(crate) fn load(&mut self, theta: &Theta) -> Result<()> {
        let (n, m) = (self.n, self.m);
        ensure_len("theta state dimension", n, theta.n())?;
        ensure_len("theta input dimension", m, theta.m())?;
        let t = theta.matrix();
        // A[i, j] = Θ[j, i],  B[i, j] = Θ[n + j, i]
        for j in 0..n {
            for i in 0..n {
                self.a[i + j * n] = t[(j, i)];
            }
        }
        for j in 0..m {
            for i in 0..n {
                self.b[i + j * n] = t[(n + j, i)];
            }
        }
        Ok(())
    }

    /// Writes `P_h` into `p_out` and `K_h` into `k_out` given `P_{h+1}` in `p`.
    pub(crate) fn step(&mut self, p: &[f64], p_out: &mut [f64], k_out: &mut [f64]) -> Result<()> {
        let (n, m) = (self.n, self.m);
        // PA = P A, PB = P B
        for j in 0..n {
            for i in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += p[i + l * n] * self.a[l + j * n];
                }
                self.pa[i + j * n] = acc;
            }
        }
        for j in 0..m {
            for i in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += p[i + l * n] * self.b[l + j * n];
                }
                self.pb[i + j * n] = acc;
            }
        }
        // S = R + Bᵀ PB, G = Bᵀ PA
        for j in 0..m {
            for i in 0..m {
                let mut acc = self.r[i + j * m];
                for l in 0..n {
                    acc += self.b[l + i * n] * self.pb[l + j * n];
                }
                self.s[i + j * m] = acc;
            }
        }
        for j in 0..n {
            for i in 0..m {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += self.b[l + i * n] * self.pa[l + j * n];
                }
                self.g[i + j * m] = acc;
            }
        }
        cholesky_in_place(&mut self.s, m)?;
        // K = −S⁻¹ G, one column at a time
        for j in 0..n {
            let col = &mut k_out[j * m..(j + 1) * m];
            col.copy_from_slice(&self.g[j * m..(j + 1) * m]);
            cholesky_solve_in_place(&self.s, m, col);
            for v in col.iter_mut() {
                *v = -*v;
            }
        }
        // P_h = Q + Aᵀ PA + Gᵀ K
        for j in 0..n {
            for i in 0..n {
                let mut acc = self.q[i + j * n];
                for l in 0..n {
                    acc += self.a[l + i * n] * self.pa[l + j * n];
                }
                for l in 0..m {
                    acc += self.g[l + i * m] * k_out[l + j * m];
                }
                p_out[i + j * n] = acc;
            }
        }
        for j in 0..n {
            for i in 0..j {
                let avg = 0.5 * (p_out[i + j * n] + p_out[j + i * n]);
                p_out[i + j * n] = avg;
                p_out[j + i * n] = avg;
            }
        }
        if p_out.iter().chain(k_out.iter()).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::CandidateIllConditioned)
        }
    }
}

/// Lower Cholesky factor written over the lower triangle of `s`.
fn cholesky_in_place(s: &mut [f64], m: usize) -> Result<()> {
    for j in 0..m {
        let mut d = s[j + j * m];
        for l in 0..j {
            d -= s[j + l * m] * s[j + l * m];
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::CandidateIllConditioned);
        }
        let d = d.sqrt();
        s[j + j * m] = d;
        for i in j + 1..m {
            let mut v = s[i + j * m];
            for l in 0..j {
                v -= s[i + l * m] * s[j + l * m];
            }
            s[i + j * m] = v / d;
        }
    }
    Ok(())
}

fn cholesky_solve_in_place(l: &[f64], m: usize, rhs: &mut [f64]) {
    for i in 0..m {
        let mut v = rhs[i];
        for k in 0..i {
            v -= l[i + k * m] * rhs[k];
        }
        rhs[i] = v / l[i + i * m];
    }
    for i in (0..m).rev() {
        let mut v = rhs[i];
        for k in i + 1..m {
            v -= l[k + i * m] * rhs[k];
        }
        rhs[i] = v / l[i + i * m];
    }
}

fn trace(p: &[f64], n: usize) -> f64 {
    (0..n).map(|i| p[i + i * n]).sum()
}

fn quad_form(p: &[f64], n: usize, x: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            acc += x[i] * p[i + j * n] * x[j];
        }
    }
    acc
}

/// Backward recursion over `thetas[0] = Θ_{h₀}, …, thetas[span−1] = Θ_H`.
pub fn backward_recursion(
    thetas: &[Theta],
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    horizon_span: usize,
) -> Result<RiccatiSolution> {
    if horizon_span == 0 {
        return Err(Error::InvalidParameter {
            name: "horizon_span",
            reason: "must be at least 1".into(),
        });
    }
    ensure_len("theta sequence", horizon_span, thetas.len())?;
    let (n, m) = (thetas[0].n(), thetas[0].m());
    let mut kernel = Kernel::new(n, m, q, r)?;
    let mut p_seq = vec![DMatrix::zeros(n, n); horizon_span + 1];
    let mut k_seq = vec![DMatrix::zeros(m, n); horizon_span];
    for h in (0..horizon_span).rev() {
        kernel.load(&thetas[h])?;
        let (head, tail) = p_seq.split_at_mut(h + 1);
        kernel.step(
            tail[0].as_slice(),
            head[h].as_mut_slice(),
            k_seq[h].as_mut_slice(),
        )?;
    }
    Ok(RiccatiSolution { p_seq, k_seq })
}

/// Expected cost-to-go `x₁ᵀ P_{h₀} x₁ + σ² Σ_{h'=h₀}^{H} Trace(P_{h'+1})` under
/// isotropic Gaussian noise of standard deviation `noise_scale`.
pub fn optimal_cost(sol: &RiccatiSolution, x1: &DVector<f64>, noise_scale: f64) -> Result<f64> {
    let p0 = sol.first_value();
    ensure_len("initial state", p0.nrows(), x1.len())?;
    let quad = x1.dot(&(p0 * x1));
    let traces: f64 = sol.p_seq[1..].iter().map(|p| p.trace()).sum();
    Ok(quad + noise_scale * noise_scale * traces)
}

/// `u = K x`.
pub fn gain_control(gain: &DMatrix<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    ensure_len("state", gain.ncols(), x.len())?;
    Ok(gain * x)
}

/// Reusable evaluator of the constant-model optimal cost `J*(Θ, x)` over a span.
#[derive(Debug, Clone)]
pub struct ConstantModelEvaluator {
    kernel: Kernel,
    n: usize,
    m: usize,
    p: Vec<f64>,
    p_next: Vec<f64>,
    k: Vec<f64>,
}

impl ConstantModelEvaluator {
    pub fn new(q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<Self> {
        let (n, m) = (q.nrows(), r.nrows());
        Ok(Self {
            kernel: Kernel::new(n, m, q, r)?,
            n,
            m,
            p: vec![0.0; n * n],
            p_next: vec![0.0; n * n],
            k: vec![0.0; m * n],
        })
    }

    /// Runs `span` backward steps of the constant model `theta` from `P = 0` and
    /// returns the optimal cost at `x` together with the first-step gain.
    pub fn evaluate(
        &mut self,
        theta: &Theta,
        span: usize,
        x: &DVector<f64>,
        noise_scale: f64,
    ) -> Result<(f64, DMatrix<f64>)> {
        if span == 0 {
            return Err(Error::InvalidParameter {
                name: "horizon_span",
                reason: "must be at least 1".into(),
            });
        }
        ensure_len("state", self.n, x.len())?;
        self.kernel.load(theta)?;
        self.p.iter_mut().for_each(|v| *v = 0.0);
        let mut traces = 0.0;
        for _ in 0..span {
            traces += trace(&self.p, self.n);
            self.kernel.step(&self.p, &mut self.p_next, &mut self.k)?;
            std::mem::swap(&mut self.p, &mut self.p_next);
        }
        let cost = quad_form(&self.p, self.n, x) + noise_scale * noise_scale * traces;
        if !cost.is_finite() {
            return Err(Error::CandidateIllConditioned);
        }
        Ok((cost, DMatrix::from_column_slice(self.m, self.n, &self.k)))
    }
}
