//! The IB Lagrangian family `-I(T;Y) + beta * h(I(X;T))`: exact evaluation,
//! analytic gradients, multi-restart optimization, beta sweeps and the
//! bisection search for a target compression level.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{inverse_mass_scale, multi_restart, softmax_backward, softmax_rows, EncoderParams, OptimizerConfig};
use crate::prob::{compensated_sum, compose_xt, compose_yt, mutual_information, JointXY, Matrix, ZERO_FLOOR};

/// Monotone transform applied to the compression term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurrogateFn {
    Identity,
    Square,
    /// `u^exponent`, exponent > 1.
    Power { exponent: f64 },
    /// `exp(scale * u) - 1`, scale > 0.
    Exponential { scale: f64 },
}

impl SurrogateFn {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SurrogateFn::Power { exponent } if !(exponent > 1.0 && exponent.is_finite()) => {
                Err(Error::Parameter(format!("power surrogate needs exponent > 1, got {exponent}")))
            }
            SurrogateFn::Exponential { scale } if !(scale > 0.0 && scale.is_finite()) => {
                Err(Error::Parameter(format!("exponential surrogate needs scale > 0, got {scale}")))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        match *self {
            SurrogateFn::Identity => u,
            SurrogateFn::Square => u * u,
            SurrogateFn::Power { exponent } => u.max(0.0).powf(exponent),
            SurrogateFn::Exponential { scale } => (scale * u).exp_m1(),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            SurrogateFn::Identity => 1.0,
            SurrogateFn::Square => 2.0 * u,
            SurrogateFn::Power { exponent } => exponent * u.max(0.0).powf(exponent - 1.0),
            SurrogateFn::Exponential { scale } => scale * (scale * u).exp(),
        }
    }
}

impl fmt::Display for SurrogateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurrogateFn::Identity => write!(f, "identity"),
            SurrogateFn::Square => write!(f, "square"),
            SurrogateFn::Power { exponent } => write!(f, "power:{exponent}"),
            SurrogateFn::Exponential { scale } => write!(f, "exp:{scale}"),
        }
    }
}

impl FromStr for SurrogateFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parsed = match s.split_once(':') {
            None if s == "identity" => SurrogateFn::Identity,
            None if s == "square" => SurrogateFn::Square,
            Some(("power", u)) => SurrogateFn::Power {
                exponent: u
                    .parse()
                    .map_err(|_| Error::Parameter(format!("bad power exponent '{u}'")))?,
            },
            Some(("exp", v)) => SurrogateFn::Exponential {
                scale: v
                    .parse()
                    .map_err(|_| Error::Parameter(format!("bad exponential scale '{v}'")))?,
            },
            _ => return Err(Error::Parameter(format!("unknown surrogate '{s}'"))),
        };
        parsed.validate()?;
        Ok(parsed)
    }
}

/// One solved point on the information plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IBPoint {
    pub beta: f64,
    pub i_xt: f64,
    pub i_ty: f64,
    pub objective: f64,
    pub converged: bool,
    pub restarts_used: usize,
    pub best_restart_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagrangianValue {
    pub objective: f64,
    pub i_xt: f64,
    pub i_ty: f64,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!("beta must be finite and >= 0, got {beta}")));
    }
    Ok(())
}

fn check_params(data: &JointXY, logits: &Matrix) -> Result<()> {
    if logits.rows() != data.n_x() {
        return Err(Error::DimensionMismatch {
            what: "encoder logits rows",
            expected: data.n_x(),
            found: logits.rows(),
        });
    }
    Ok(())
}

/// Exact objective through the generic joint composition routines.
pub fn eval_lagrangian(data: &JointXY, params: &EncoderParams, beta: f64, h: SurrogateFn) -> Result<LagrangianValue> {
    check_beta(beta)?;
    h.validate()?;
    check_params(data, &params.logits)?;
    let enc = params.encoder();
    let i_xt = mutual_information(&compose_xt(data, &enc)?);
    let i_ty = mutual_information(&compose_yt(data, &enc)?);
    Ok(LagrangianValue {
        objective: -i_ty + beta * h.value(i_xt),
        i_xt,
        i_ty,
    })
}

/// Cached marginals of the data joint.
#[derive(Debug, Clone)]
pub(crate) struct DataCache {
    pub pxy: Matrix,
    pub px: Vec<f64>,
    pub py: Vec<f64>,
}

impl DataCache {
    pub fn new(data: &JointXY) -> Self {
        DataCache {
            pxy: data.probs().clone(),
            px: data.p_x(),
            py: data.p_y(),
        }
    }
}

/// I(X;T), I(T;Y) and their derivatives with respect to the entries of q(t|x).
pub(crate) struct BottleneckTerms {
    pub i_xt: f64,
    pub i_ty: f64,
    pub d_xt: Matrix,
    pub d_ty: Matrix,
}

pub(crate) fn bottleneck_terms(cache: &DataCache, q: &Matrix) -> BottleneckTerms {
    let (n_x, n_t, n_y) = (q.rows(), q.cols(), cache.py.len());
    let mut qt = vec![0.0; n_t];
    let mut qyt = Matrix::zeros(n_y, n_t);
    for x in 0..n_x {
        let row = q.row(x);
        for t in 0..n_t {
            qt[t] += cache.px[x] * row[t];
        }
        for y in 0..n_y {
            let p = cache.pxy.get(x, y);
            if p == 0.0 {
                continue;
            }
            let dst = qyt.row_mut(y);
            for t in 0..n_t {
                dst[t] += p * row[t];
            }
        }
    }

    let mut d_xt = Matrix::zeros(n_x, n_t);
    let mut d_ty = Matrix::zeros(n_x, n_t);
    let mut xt_terms = Vec::with_capacity(n_x * n_t);
    for x in 0..n_x {
        for t in 0..n_t {
            let qv = q.get(x, t);
            if qv < ZERO_FLOOR || cache.px[x] < ZERO_FLOOR {
                continue;
            }
            let log_ratio = (qv / qt[t]).ln();
            xt_terms.push(cache.px[x] * qv * log_ratio);
            d_xt.set(x, t, cache.px[x] * log_ratio);
            let mut g = 0.0;
            for y in 0..n_y {
                let p = cache.pxy.get(x, y);
                if p < ZERO_FLOOR {
                    continue;
                }
                g += p * (qyt.get(y, t) / qt[t]).ln();
            }
            d_ty.set(x, t, g);
        }
    }
    let mut ty_terms = Vec::with_capacity(n_y * n_t);
    for y in 0..n_y {
        for t in 0..n_t {
            let v = qyt.get(y, t);
            if v < ZERO_FLOOR {
                continue;
            }
            ty_terms.push(v * (v / (cache.py[y] * qt[t])).ln());
        }
    }
    BottleneckTerms {
        i_xt: compensated_sum(xt_terms).max(0.0),
        i_ty: compensated_sum(ty_terms).max(0.0),
        d_xt,
        d_ty,
    }
}

fn value_and_grad(cache: &DataCache, logits: &Matrix, beta: f64, h: SurrogateFn) -> (f64, Matrix) {
    let q = softmax_rows(logits);
    let terms = bottleneck_terms(cache, &q);
    let slope = beta * h.derivative(terms.i_xt);
    let mut dq = terms.d_ty;
    for (g, c) in dq.as_mut_slice().iter_mut().zip(terms.d_xt.as_slice()) {
        *g = -*g + slope * c;
    }
    (-terms.i_ty + beta * h.value(terms.i_xt), softmax_backward(&q, &dq))
}

/// Exact gradient of the objective with respect to the logits.
pub fn grad_lagrangian(data: &JointXY, params: &EncoderParams, beta: f64, h: SurrogateFn) -> Result<Matrix> {
    check_beta(beta)?;
    h.validate()?;
    check_params(data, &params.logits)?;
    Ok(value_and_grad(&DataCache::new(data), &params.logits, beta, h).1)
}

/// Multi-restart gradient descent at a fixed beta.
pub fn optimize_at_beta(
    data: &JointXY,
    beta: f64,
    h: SurrogateFn,
    card_t: usize,
    cfg: &OptimizerConfig,
) -> Result<IBPoint> {
    Ok(optimize_with_params(data, beta, h, card_t, cfg)?.0)
}

/// As [`optimize_at_beta`], also returning the winning logits.
pub fn optimize_with_params(
    data: &JointXY,
    beta: f64,
    h: SurrogateFn,
    card_t: usize,
    cfg: &OptimizerConfig,
) -> Result<(IBPoint, EncoderParams)> {
    check_beta(beta)?;
    h.validate()?;
    if card_t == 0 {
        return Err(Error::Parameter("card_t must be >= 1".into()));
    }
    let cache = DataCache::new(data);
    let out = multi_restart(&[(data.n_x(), card_t)], &inverse_mass_scale(&cache.px), cfg, |p| {
        let (v, g) = value_and_grad(&cache, &p[0], beta, h);
        Ok((v, vec![g]))
    })?;
    let params = EncoderParams {
        logits: out.best.params.into_iter().next().expect("one parameter block"),
    };
    let value = eval_lagrangian(data, &params, beta, h)?;
    let point = IBPoint {
        beta,
        i_xt: value.i_xt,
        i_ty: value.i_ty,
        objective: value.objective,
        converged: out.best.converged,
        restarts_used: out.restarts_used,
        best_restart_seed: out.best.seed,
    };
    Ok((point, params))
}

/// Solves every beta with the same restart seeds; output follows input order.
pub fn sweep_beta(
    data: &JointXY,
    betas: &[f64],
    h: SurrogateFn,
    card_t: usize,
    cfg: &OptimizerConfig,
) -> Result<Vec<IBPoint>> {
    for b in betas {
        check_beta(*b)?;
    }
    if betas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter("betas must be ascending".into()));
    }
    betas
        .iter()
        .map(|&b| optimize_at_beta(data, b, h, card_t, cfg))
        .collect()
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(count: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || count == 0 {
        return Err(Error::Parameter(format!("bad log grid ({count}, {lo}, {hi})")));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| {
            if i == count - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect())
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linear_grid(count: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if !(hi >= lo) || count == 0 {
        return Err(Error::Parameter(format!("bad linear grid ({count}, {lo}, {hi})")));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect())
}

/// Default grid: 20 log-spaced values in [1e-3, 1].
pub fn default_betas() -> Vec<f64> {
    log_grid(20, 1e-3, 1.0).expect("static grid")
}

/// Tolerance on |I(X;T) - target| for the compression search.
pub const COMPRESSION_TOL: f64 = 0.02;
/// Bisection budget for the compression search.
pub const BISECTION_STEPS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionSearch {
    pub beta: f64,
    pub point: IBPoint,
    /// Whether |I(X;T) - target| <= [`COMPRESSION_TOL`] was reached.
    pub reached: bool,
    pub steps: usize,
}

/// Bisects on beta for a point with I(X;T) close to `target`.
///
/// I(X;T) is non-increasing in beta at exact optima, so the bracket must have
/// the endpoint values on opposite sides of the target. When the curve jumps
/// over the target (deterministic labels, identity surrogate) the search ends
/// with `reached == false` and the closest point seen.
#[allow(clippy::too_many_arguments)]
pub fn beta_at_compression(
    data: &JointXY,
    target: f64,
    h: SurrogateFn,
    card_t: usize,
    cfg: &OptimizerConfig,
    beta_lo: f64,
    beta_hi: f64,
) -> Result<CompressionSearch> {
    check_beta(beta_lo)?;
    check_beta(beta_hi)?;
    if beta_lo >= beta_hi {
        return Err(Error::Parameter(format!("beta_lo {beta_lo} must be below beta_hi {beta_hi}")));
    }
    if !(target >= 0.0 && target < data.h_x()) {
        return Err(Error::Parameter(format!(
            "target {target} outside [0, H(X) = {})",
            data.h_x()
        )));
    }
    let lo_pt = optimize_at_beta(data, beta_lo, h, card_t, cfg)?;
    let hi_pt = optimize_at_beta(data, beta_hi, h, card_t, cfg)?;
    let mut best = if (lo_pt.i_xt - target).abs() <= (hi_pt.i_xt - target).abs() {
        lo_pt.clone()
    } else {
        hi_pt.clone()
    };
    if (best.i_xt - target).abs() <= COMPRESSION_TOL {
        return Ok(CompressionSearch {
            beta: best.beta,
            point: best,
            reached: true,
            steps: 0,
        });
    }
    if (lo_pt.i_xt - target).signum() == (hi_pt.i_xt - target).signum() {
        return Err(Error::BracketFailure {
            target,
            ixt_lo: lo_pt.i_xt,
            ixt_hi: hi_pt.i_xt,
        });
    }
    let lo_above = lo_pt.i_xt > target;
    let (mut lo, mut hi) = (beta_lo, beta_hi);
    for step in 1..=BISECTION_STEPS {
        // Geometric midpoint when both ends are positive; betas span decades.
        let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        let pt = optimize_at_beta(data, mid, h, card_t, cfg)?;
        if (pt.i_xt - target).abs() < (best.i_xt - target).abs() {
            best = pt.clone();
        }
        if (pt.i_xt - target).abs() <= COMPRESSION_TOL {
            return Ok(CompressionSearch {
                beta: mid,
                point: pt,
                reached: true,
                steps: step,
            });
        }
        if (pt.i_xt > target) == lo_above {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CompressionSearch {
        beta: best.beta,
        point: best,
        reached: false,
        steps: BISECTION_STEPS,
    })
}
