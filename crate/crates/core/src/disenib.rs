//! The disentangled objective `-I(T;Y) - I(X;S,Y) + I(S;T)` over the encoder
//! pair (q(s|x), q(t|x)), its optimizer and the maximum-compression check.
//!
//! All three terms carry unit weight. There is no trade-off parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{bottleneck_terms, DataCache};
use crate::optim::{inverse_mass_scale, multi_restart, softmax_backward, softmax_rows, EncoderParams, OptimizerConfig};
use crate::prob::{compensated_sum, information_triple, InformationTerms, JointXY, Matrix, ZERO_FLOOR};

#[derive(Debug, Clone, PartialEq)]
pub struct DisenIBParams {
    pub logits_t: Matrix,
    pub logits_s: Matrix,
}

impl DisenIBParams {
    pub fn new(logits_t: Matrix, logits_s: Matrix) -> Result<Self> {
        let t = EncoderParams::new(logits_t)?;
        let s = EncoderParams::new(logits_s)?;
        if t.logits.rows() != s.logits.rows() {
            return Err(Error::DimensionMismatch {
                what: "s-logits rows",
                expected: t.logits.rows(),
                found: s.logits.rows(),
            });
        }
        Ok(DisenIBParams {
            logits_t: t.logits,
            logits_s: s.logits,
        })
    }

    pub fn random(n_x: usize, card_t: usize, card_s: usize, scale: f64, seed: u64) -> Self {
        DisenIBParams {
            logits_t: EncoderParams::random(n_x, card_t, scale, seed).logits,
            logits_s: EncoderParams::random(n_x, card_s, scale, seed.wrapping_add(0x9e37_79b9_7f4a_7c15)).logits,
        }
    }

    pub fn t(&self) -> EncoderParams {
        EncoderParams {
            logits: self.logits_t.clone(),
        }
    }

    pub fn s(&self) -> EncoderParams {
        EncoderParams {
            logits: self.logits_s.clone(),
        }
    }
}

/// How close a solution sits to maximum
/// compression `I(X;T) = I(T;Y) = H(Y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// |I(X;T) - H(Y)| + |I(T;Y) - H(Y)|
    pub gap: f64,
    pub epsilon: f64,
    pub consistent: bool,
    pub i_xt: f64,
    pub i_ty: f64,
    pub i_xsy: f64,
    pub i_st: f64,
    pub objective: f64,
    pub h_x: f64,
    pub h_y: f64,
    pub i_xy: f64,
    pub analytic_minimum: f64,
    /// H(X) - I(X;S,Y): how much of X the pair (S, Y) fails to reconstruct.
    pub reconstruction_shortfall: f64,
    /// Same gap measured against I(X;Y) instead of H(Y).
    pub gap_vs_i_xy: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisenIBValue {
    pub objective: f64,
    pub terms: InformationTerms,
}

fn check_dims(data: &JointXY, params: &DisenIBParams) -> Result<()> {
    for (what, m) in [("t-logits rows", &params.logits_t), ("s-logits rows", &params.logits_s)] {
        if m.rows() != data.n_x() {
            return Err(Error::DimensionMismatch {
                what,
                expected: data.n_x(),
                found: m.rows(),
            });
        }
    }
    Ok(())
}

pub fn eval_disenib(data: &JointXY, params: &DisenIBParams) -> Result<DisenIBValue> {
    check_dims(data, params)?;
    let terms = information_triple(data, &params.s().encoder(), &params.t().encoder())?;
    Ok(DisenIBValue {
        objective: -terms.i_ty - terms.i_xsy + terms.i_st,
        terms,
    })
}

/// `-H(Y) - H(X)`, the floor of the objective.
pub fn analytic_minimum(data: &JointXY) -> f64 {
    -data.h_y() - data.h_x()
}

/// I(X;S,Y) and its derivative with respect to q(s|x).
fn reconstruction_term(cache: &DataCache, qs: &Matrix) -> (f64, Matrix) {
    let (n_x, n_s, n_y) = (qs.rows(), qs.cols(), cache.py.len());
    let mut qsy = Matrix::zeros(n_s, n_y);
    for x in 0..n_x {
        for s in 0..n_s {
            let a = qs.get(x, s);
            let dst = qsy.row_mut(s);
            for y in 0..n_y {
                dst[y] += cache.pxy.get(x, y) * a;
            }
        }
    }
    let mut grad = Matrix::zeros(n_x, n_s);
    let mut terms = Vec::with_capacity(n_x * n_s);
    for x in 0..n_x {
        if cache.px[x] < ZERO_FLOOR {
            continue;
        }
        for s in 0..n_s {
            let a = qs.get(x, s);
            if a < ZERO_FLOOR {
                continue;
            }
            let mut g = 0.0;
            for y in 0..n_y {
                let p = cache.pxy.get(x, y);
                if p < ZERO_FLOOR {
                    continue;
                }
                // ln q(x|s,y) - ln p(x)
                g += p * (p * a / (cache.px[x] * qsy.get(s, y))).ln();
            }
            grad.set(x, s, g);
            terms.push(a * g);
        }
    }
    (compensated_sum(terms).max(0.0), grad)
}

/// I(S;T) and its derivatives with respect to q(s|x) and q(t|x).
fn overlap_term(cache: &DataCache, qs: &Matrix, qt: &Matrix) -> (f64, Matrix, Matrix) {
    let (n_x, n_s, n_t) = (qs.rows(), qs.cols(), qt.cols());
    let mut qst = Matrix::zeros(n_s, n_t);
    for x in 0..n_x {
        let w = cache.px[x];
        for s in 0..n_s {
            let a = w * qs.get(x, s);
            let dst = qst.row_mut(s);
            for t in 0..n_t {
                dst[t] += a * qt.get(x, t);
            }
        }
    }
    let ms = qst.row_sums();
    let mt = qst.col_sums();
    // log of q(s,t) / (q(s) q(t)), zero where the cell is empty
    let log_ratio = Matrix::from_fn(n_s, n_t, |s, t| {
        let v = qst.get(s, t);
        if v < ZERO_FLOOR {
            0.0
        } else {
            (v / (ms[s] * mt[t])).ln()
        }
    });
    let value = compensated_sum(
        (0..n_s).flat_map(|s| (0..n_t).map(move |t| (s, t))).map(|(s, t)| qst.get(s, t) * log_ratio.get(s, t)),
    );
    // dI/dq(s|x) = p(x) sum_t q(t|x) ln[q(s,t)/(q(s)q(t))] up to a per-row
    // constant, which the softmax pullback discards.
    let grad_s = Matrix::from_fn(n_x, n_s, |x, s| {
        cache.px[x] * (0..n_t).map(|t| qt.get(x, t) * log_ratio.get(s, t)).sum::<f64>()
    });
    let grad_t = Matrix::from_fn(n_x, n_t, |x, t| {
        cache.px[x] * (0..n_s).map(|s| qs.get(x, s) * log_ratio.get(s, t)).sum::<f64>()
    });
    (value.max(0.0), grad_s, grad_t)
}

struct Evaluated {
    objective: f64,
    grad_t: Matrix,
    grad_s: Matrix,
}

fn evaluate(cache: &DataCache, logits_t: &Matrix, logits_s: &Matrix) -> Evaluated {
    let qt = softmax_rows(logits_t);
    let qs = softmax_rows(logits_s);
    let bn = bottleneck_terms(cache, &qt);
    let (i_xsy, d_xsy) = reconstruction_term(cache, &qs);
    let (i_st, d_st_s, d_st_t) = overlap_term(cache, &qs, &qt);

    let mut dq_t = d_st_t;
    for (g, d) in dq_t.as_mut_slice().iter_mut().zip(bn.d_ty.as_slice()) {
        *g -= d;
    }
    let mut dq_s = d_st_s;
    for (g, d) in dq_s.as_mut_slice().iter_mut().zip(d_xsy.as_slice()) {
        *g -= d;
    }
    Evaluated {
        objective: -bn.i_ty - i_xsy + i_st,
        grad_t: softmax_backward(&qt, &dq_t),
        grad_s: softmax_backward(&qs, &dq_s),
    }
}

/// Exact gradients `(d/d logits_t, d/d logits_s)`.
pub fn grad_disenib(data: &JointXY, params: &DisenIBParams) -> Result<(Matrix, Matrix)> {
    check_dims(data, params)?;
    let e = evaluate(&DataCache::new(data), &params.logits_t, &params.logits_s);
    Ok((e.grad_t, e.grad_s))
}

/// Default capacities: |T| = |Y|, |S| = largest number of inputs sharing
/// a most-likely label.
pub fn default_cardinalities(data: &JointXY) -> (usize, usize) {
    let mut counts = vec![0usize; data.n_y()];
    for x in 0..data.n_x() {
        let row = data.probs().row(x);
        let (arg, _) = row
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        counts[arg] += 1;
    }
    (data.n_y(), counts.into_iter().max().unwrap_or(1).max(1))
}

/// Multi-restart descent on the objective. Non-convergence is reported in
/// the returned report, never raised.
pub fn optimize_disenib(
    data: &JointXY,
    card_t: usize,
    card_s: usize,
    cfg: &OptimizerConfig,
    epsilon: f64,
) -> Result<(DisenIBParams, ConsistencyReport)> {
    if card_s == 0 {
        return Err(Error::Parameter("card_s must be >= 1".into()));
    }
    let support = data.support_y();
    if card_t < support {
        return Err(Error::Parameter(format!(
            "card_t = {card_t} cannot carry {support} labels with positive mass"
        )));
    }
    let cache = DataCache::new(data);
    let out = multi_restart(&[(data.n_x(), card_t), (data.n_x(), card_s)], &inverse_mass_scale(&cache.px), cfg, |p| {
        let e = evaluate(&cache, &p[0], &p[1]);
        Ok((e.objective, vec![e.grad_t, e.grad_s]))
    })?;
    let mut blocks = out.best.params.into_iter();
    let params = DisenIBParams {
        logits_t: blocks.next().expect("t block"),
        logits_s: blocks.next().expect("s block"),
    };
    let mut report = consistency_check(data, &params, epsilon)?;
    report.converged = out.best.converged;
    Ok((params, report))
}

pub fn consistency_check(data: &JointXY, params: &DisenIBParams, epsilon: f64) -> Result<ConsistencyReport> {
    if !(epsilon > 0.0) {
        return Err(Error::Parameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let v = eval_disenib(data, params)?;
    let t = v.terms;
    let (h_x, h_y, i_xy) = (data.h_x(), data.h_y(), data.i_xy());
    let gap = (t.i_xt - h_y).abs() + (t.i_ty - h_y).abs();
    Ok(ConsistencyReport {
        gap,
        epsilon,
        consistent: gap < epsilon,
        i_xt: t.i_xt,
        i_ty: t.i_ty,
        i_xsy: t.i_xsy,
        i_st: t.i_st,
        objective: v.objective,
        h_x,
        h_y,
        i_xy,
        analytic_minimum: -h_x - h_y,
        reconstruction_shortfall: (h_x - t.i_xsy).max(0.0),
        gap_vs_i_xy: (t.i_xt - i_xy).abs() + (t.i_ty - i_xy).abs(),
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{make_deterministic, make_random_joint};

    const LN2: f64 = std::f64::consts::LN_2;

    /// Saturated logits: off-peak probabilities underflow to exactly zero.
    fn hard(n: usize, card: usize, f: impl Fn(usize) -> usize) -> Matrix {
        EncoderParams::peaked(n, card, 800.0, f).logits
    }

    #[test]
    fn uniform_encoders_leave_only_data_information() {
        let data = make_random_joint(5, 3, 4).unwrap();
        let p = DisenIBParams::new(Matrix::zeros(5, 3), Matrix::zeros(5, 2)).unwrap();
        let v = eval_disenib(&data, &p).unwrap();
        assert!((v.objective + data.i_xy()).abs() < 1e-12);
    }

    #[test]
    fn maximum_compression_construction() {
        let data = make_deterministic(8, 2).unwrap();
        let p = DisenIBParams::new(hard(8, 2, |x| x % 2), hard(8, 4, |x| x / 2)).unwrap();
        let v = eval_disenib(&data, &p).unwrap();
        assert!((v.objective - (-2.772589)).abs() < 1e-6);
        assert!((v.objective - analytic_minimum(&data)).abs() < 1e-12);
        let r = consistency_check(&data, &p, 1e-6).unwrap();
        assert!(r.gap <= 1e-9);
        assert!(r.consistent);
    }

    #[test]
    fn overlapping_identity_encoders_are_penalized() {
        let data = make_deterministic(8, 2).unwrap();
        let p = DisenIBParams::new(hard(8, 8, |x| x), hard(8, 8, |x| x)).unwrap();
        let v = eval_disenib(&data, &p).unwrap();
        assert!((v.terms.i_st - data.h_x()).abs() < 1e-12);
        assert!((v.objective + data.h_y()).abs() < 1e-12);
    }

    #[test]
    fn consistency_examples() {
        let data = make_deterministic(8, 2).unwrap();
        let uni = DisenIBParams::new(Matrix::zeros(8, 2), Matrix::zeros(8, 4)).unwrap();
        let r = consistency_check(&data, &uni, 0.05).unwrap();
        assert!((r.gap - 2.0 * data.h_y()).abs() < 1e-12);
        assert!(!r.consistent);

        let id = DisenIBParams::new(hard(8, 8, |x| x), Matrix::zeros(8, 4)).unwrap();
        let r = consistency_check(&data, &id, 0.05).unwrap();
        assert!((r.gap - 4f64.ln()).abs() < 1e-12);

        assert!(consistency_check(&data, &id, 0.0).is_err());
    }

    #[test]
    fn analytic_minimum_values() {
        assert!((analytic_minimum(&make_deterministic(8, 2).unwrap()) - (-2.772589)).abs() < 1e-6);
        assert!((analytic_minimum(&make_deterministic(4, 4).unwrap()) + 2.0 * 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn fused_kernel_agrees_with_composition() {
        let data = make_random_joint(6, 3, 2).unwrap();
        let p = DisenIBParams::random(6, 3, 4, 1.3, 8);
        let v = eval_disenib(&data, &p).unwrap();
        let e = evaluate(&DataCache::new(&data), &p.logits_t, &p.logits_s);
        assert!((v.objective - e.objective).abs() < 1e-13);
    }

    #[test]
    fn stationary_near_smoothed_minimum() {
        let data = make_deterministic(8, 2).unwrap();
        let p = DisenIBParams {
            logits_t: EncoderParams::peaked(8, 2, 12.0, |x| x % 2).logits,
            logits_s: EncoderParams::peaked(8, 4, 12.0, |x| x / 2).logits,
        };
        let (gt, gs) = grad_disenib(&data, &p).unwrap();
        assert!(gt.max_abs().max(gs.max_abs()) <= 1e-3);
        for s in gt.row_sums().into_iter().chain(gs.row_sums()) {
            assert!(s.abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_start_has_zero_mean_rows() {
        let data = make_deterministic(4, 2).unwrap();
        let p = DisenIBParams::new(Matrix::zeros(4, 2), Matrix::zeros(4, 2)).unwrap();
        let (gt, gs) = grad_disenib(&data, &p).unwrap();
        for s in gt.row_sums().into_iter().chain(gs.row_sums()) {
            assert!(s.abs() < 1e-15);
        }
    }

    #[test]
    fn default_cardinalities_follow_classes() {
        assert_eq!(default_cardinalities(&make_deterministic(16, 4).unwrap()), (4, 4));
        assert_eq!(default_cardinalities(&make_deterministic(10, 3).unwrap()), (3, 4));
        assert_eq!(default_cardinalities(&make_deterministic(8, 2).unwrap()), (2, 4));
    }

    #[test]
    fn identity_labels_with_degenerate_s() {
        let data = make_deterministic(4, 4).unwrap();
        let (_, r) = optimize_disenib(&data, 4, 1, &OptimizerConfig::disenib(), 0.05).unwrap();
        assert!(r.gap < 0.05, "{r:?}");
        assert_eq!(r.i_st, 0.0);
    }

    #[test]
    fn capacity_shortfall_is_reported() {
        let data = make_deterministic(8, 2).unwrap();
        let (_, r) = optimize_disenib(&data, 2, 1, &OptimizerConfig::disenib(), 0.05).unwrap();
        assert!((r.i_xsy - LN2).abs() < 1e-9);
        assert!(r.objective >= -2.0 * LN2 - 1e-9);
        assert!((r.reconstruction_shortfall - 4f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn cardinality_preconditions() {
        let data = make_deterministic(8, 4).unwrap();
        let cfg = OptimizerConfig::disenib();
        assert!(optimize_disenib(&data, 3, 2, &cfg, 0.05).is_err());
        assert!(optimize_disenib(&data, 4, 0, &cfg, 0.05).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let data = make_deterministic(8, 4).unwrap();
        let p = DisenIBParams::random(7, 4, 2, 0.1, 0);
        assert!(matches!(eval_disenib(&data, &p), Err(Error::DimensionMismatch { .. })));
        assert!(DisenIBParams::new(Matrix::zeros(3, 2), Matrix::zeros(4, 2)).is_err());
    }
}
