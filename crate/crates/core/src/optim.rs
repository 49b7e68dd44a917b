//! Softmax-parameterized encoders and the multi-restart gradient descent
//! shared by the Lagrangian and DisenIB solvers.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{Encoder, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub step_size: f64,
    pub max_iters: usize,
    /// Stop once the gradient's infinity norm falls below this.
    pub grad_tolerance: f64,
    pub restarts: usize,
    /// Standard deviation of the initial logits.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            step_size: 0.1,
            max_iters: 5000,
            grad_tolerance: 1e-7,
            restarts: 10,
            init_scale: 0.1,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    /// Defaults for the disentangled objective, which needs more restarts.
    pub fn disenib() -> Self {
        OptimizerConfig {
            restarts: 20,
            ..Default::default()
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        OptimizerConfig { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Parameter(format!("step_size must be positive, got {}", self.step_size)));
        }
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be positive".into()));
        }
        if !(self.grad_tolerance > 0.0) {
            return Err(Error::Parameter("grad_tolerance must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Parameter("restarts must be positive".into()));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Parameter("init_scale must be nonnegative".into()));
        }
        Ok(())
    }

    /// Per-restart seeds, drawn from one ChaCha stream keyed by `seed`.
    pub fn restart_seeds(&self) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.restarts).map(|_| rng.next_u64()).collect()
    }
}

/// Unconstrained logits whose row-wise softmax is an encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub logits: Matrix,
}

impl EncoderParams {
    pub fn new(logits: Matrix) -> Result<Self> {
        if logits.rows() == 0 || logits.cols() == 0 {
            return Err(Error::Empty { what: "logits" });
        }
        if logits.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "logits" });
        }
        Ok(EncoderParams { logits })
    }

    pub fn zeros(n_x: usize, card: usize) -> Self {
        EncoderParams {
            logits: Matrix::zeros(n_x, card),
        }
    }

    /// Logits `scale * onehot(f(x))`, a smoothed deterministic encoder.
    pub fn peaked(n_x: usize, card: usize, scale: f64, f: impl Fn(usize) -> usize) -> Self {
        EncoderParams {
            logits: Matrix::from_fn(n_x, card, |x, z| if f(x) == z { scale } else { 0.0 }),
        }
    }

    pub fn random(n_x: usize, card: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        EncoderParams {
            logits: random_logits(n_x, card, scale, &mut rng),
        }
    }

    pub fn encoder(&self) -> Encoder {
        Encoder::new_unchecked(softmax_rows(&self.logits))
    }
}

pub(crate) fn random_logits(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix {
    if scale == 0.0 {
        return Matrix::zeros(rows, cols);
    }
    let normal = Normal::new(0.0, scale).expect("finite nonnegative scale");
    Matrix::from_fn(rows, cols, |_, _| normal.sample(rng))
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

/// Pulls `dF/dq` back through the row softmax: `q (g - <q, g>)` per row.
pub(crate) fn softmax_backward(q: &Matrix, grad_q: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(q.rows(), q.cols());
    for i in 0..q.rows() {
        let qr = q.row(i);
        let gr = grad_q.row(i);
        let mean: f64 = qr.iter().zip(gr).map(|(a, b)| a * b).sum();
        for (o, (a, b)) in out.row_mut(i).iter_mut().zip(qr.iter().zip(gr)) {
            *o = a * (b - mean);
        }
    }
    out
}

/// One finished gradient-descent run.
#[derive(Debug, Clone)]
pub(crate) struct Run {
    pub params: Vec<Matrix>,
    pub objective: f64,
    pub converged: bool,
    pub seed: u64,
}

/// Best run plus bookkeeping over all restarts.
#[derive(Debug, Clone)]
pub(crate) struct MultiRun {
    pub best: Run,
    pub restarts_used: usize,
}

fn inf_norm(grads: &[Matrix]) -> f64 {
    grads.iter().map(Matrix::max_abs).fold(0.0, f64::max)
}

/// Per-row step multipliers `1 / p(x)` (zero where `p(x)` vanishes).
///
/// Every logit-row gradient carries a factor `p(x)`; dividing it out makes
/// the step size independent of |X|.
pub(crate) fn inverse_mass_scale(px: &[f64]) -> Vec<f64> {
    px.iter()
        .map(|&p| if p < crate::prob::ZERO_FLOOR { 0.0 } else { 1.0 / p })
        .collect()
}

/// Fixed-step gradient descent from `init`, each logit row moved by
/// `step_size * row_scale[row]` times its gradient.
pub(crate) fn descend<F>(
    mut params: Vec<Matrix>,
    row_scale: &[f64],
    cfg: &OptimizerConfig,
    seed: u64,
    value_and_grad: &F,
) -> Result<Run>
where
    F: Fn(&[Matrix]) -> Result<(f64, Vec<Matrix>)>,
{
    let mut iterations = 0;
    let (mut value, mut grads) = value_and_grad(&params)?;
    let mut norm = inf_norm(&grads);
    while norm >= cfg.grad_tolerance && iterations < cfg.max_iters {
        for (p, g) in params.iter_mut().zip(&grads) {
            for i in 0..p.rows() {
                let step = cfg.step_size * row_scale[i];
                for (pv, gv) in p.row_mut(i).iter_mut().zip(g.row(i)) {
                    *pv -= step * gv;
                }
            }
        }
        iterations += 1;
        (value, grads) = value_and_grad(&params)?;
        norm = inf_norm(&grads);
    }
    if !value.is_finite() {
        return Err(Error::NonFinite { what: "objective" });
    }
    Ok(Run {
        params,
        objective: value,
        converged: norm < cfg.grad_tolerance,
        seed,
    })
}

/// Runs `cfg.restarts` independent descents from seeded random logits of the
/// given shapes and keeps the lowest objective (earliest restart on ties).
pub(crate) fn multi_restart<F>(
    shapes: &[(usize, usize)],
    row_scale: &[f64],
    cfg: &OptimizerConfig,
    value_and_grad: F,
) -> Result<MultiRun>
where
    F: Fn(&[Matrix]) -> Result<(f64, Vec<Matrix>)> + Sync,
{
    cfg.validate()?;
    let seeds = cfg.restart_seeds();
    let runs: Vec<Run> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let init = shapes
                .iter()
                .map(|&(r, c)| random_logits(r, c, cfg.init_scale, &mut rng))
                .collect();
            descend(init, row_scale, cfg, seed, &value_and_grad)
        })
        .collect::<Result<_>>()?;
    let restarts_used = runs.len();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.objective < a.objective { b } else { a })
        .expect("at least one restart");
    Ok(MultiRun { best, restarts_used })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_rows_are_stochastic() {
        let l = Matrix::from_rows(&[vec![1000.0, 0.0, -1000.0], vec![0.1, 0.2, 0.3]]).unwrap();
        let q = softmax_rows(&l);
        for s in q.row_sums() {
            assert!((s - 1.0).abs() < 1e-15);
        }
        assert!(Encoder::new(q).is_ok());
    }

    #[test]
    fn softmax_shift_invariant() {
        let l = Matrix::from_rows(&[vec![0.3, -0.2, 1.1]]).unwrap();
        let shifted = Matrix::from_rows(&[vec![5.3, 4.8, 6.1]]).unwrap();
        let a = softmax_rows(&l);
        let b = softmax_rows(&shifted);
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn backward_rows_sum_to_zero() {
        let q = softmax_rows(&Matrix::from_rows(&[vec![0.3, -0.2, 1.1], vec![0.0, 0.0, 0.0]]).unwrap());
        let g = Matrix::from_rows(&[vec![1.0, 2.0, -3.0], vec![0.5, 0.5, 0.5]]).unwrap();
        let d = softmax_backward(&q, &g);
        for s in d.row_sums() {
            assert!(s.abs() < 1e-15);
        }
        assert!(d.row(1).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn descent_minimizes_quadratic() {
        let cfg = OptimizerConfig {
            restarts: 3,
            ..Default::default()
        };
        let out = multi_restart(&[(1, 2)], &[1.0], &cfg, |p| {
            let v = p[0].as_slice();
            let value = (v[0] - 1.0).powi(2) + (v[1] + 2.0).powi(2);
            let g = Matrix::from_vec(1, 2, vec![2.0 * (v[0] - 1.0), 2.0 * (v[1] + 2.0)])?;
            Ok((value, vec![g]))
        })
        .unwrap();
        assert!(out.best.converged);
        assert!(out.best.objective < 1e-14);
        assert_eq!(out.restarts_used, 3);
    }

    #[test]
    fn restart_seeds_are_reproducible() {
        let cfg = OptimizerConfig::default().with_seed(11);
        assert_eq!(cfg.restart_seeds(), cfg.restart_seeds());
        assert_eq!(cfg.restart_seeds().len(), 10);
        assert_ne!(cfg.restart_seeds(), cfg.with_seed(12).restart_seeds());
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = OptimizerConfig {
            step_size: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = OptimizerConfig {
            restarts: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
