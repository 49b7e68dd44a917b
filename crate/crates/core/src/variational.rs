//! Variational bounds on the information terms, evaluated exactly.
//!
//! * prediction: `E_{q(y,t)} ln p(y|t) + H(Y) <= I(T;Y)`
//! * reconstruction: `E_{q(x,s,y)} ln r(x|s,y) + H(X) <= I(X;S,Y)`
//! * compression (VIB): `E_{q(x,t)} ln q(t|x) - E_{q(t)} ln v(t) >= I(X;T)`
//!
//! Each gap is an expected KL divergence and is exposed separately so the
//! identities can be checked term by term.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{random_logits, softmax_rows};
use crate::prob::{
    compensated_sum, compose_xsy, compose_xt, compose_yt, kl_divergence, mutual_information, Distribution, Encoder,
    Joint2, JointXY, Matrix, SIMPLEX_TOL, ZERO_FLOOR,
};

fn check_stochastic(m: &Matrix, what: &'static str) -> Result<()> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::Empty { what });
    }
    if let Some(v) = m.as_slice().iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Parameter(format!("{what} has invalid entry {v}")));
    }
    for s in m.row_sums() {
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::SumMismatch { what, sum: s });
        }
    }
    Ok(())
}

/// p(y|t), rows indexed by t.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    cond: Matrix,
}

impl Decoder {
    pub fn new(cond: Matrix) -> Result<Self> {
        check_stochastic(&cond, "decoder")?;
        Ok(Decoder { cond })
    }

    pub fn cond(&self) -> &Matrix {
        &self.cond
    }
}

/// r(x|s,y), rows indexed by `s * |Y| + y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstructor {
    cond: Matrix,
}

impl Reconstructor {
    pub fn new(cond: Matrix) -> Result<Self> {
        check_stochastic(&cond, "reconstructor")?;
        Ok(Reconstructor { cond })
    }

    pub fn cond(&self) -> &Matrix {
        &self.cond
    }
}

/// Prior v(t) of the compression bound.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorT(pub Distribution);

/// Conditional rows `p(b|a)` from a joint, uniform where `p(a) = 0`.
fn conditional_rows(j: &Joint2) -> Matrix {
    let m = j.probs();
    let rows: Vec<Vec<f64>> = (0..m.rows()).map(|a| j.conditional_b_given_a(a)).collect();
    Matrix::from_rows(&rows).expect("rectangular")
}

/// The decoder that makes the prediction bound tight: q(y|t).
pub fn optimal_decoder(data: &JointXY, enc_t: &Encoder) -> Result<Decoder> {
    let ty = compose_yt(data, enc_t)?.transpose();
    Ok(Decoder {
        cond: conditional_rows(&ty),
    })
}

/// The exact posterior q(x|s,y).
pub fn optimal_reconstructor(data: &JointXY, enc_s: &Encoder) -> Result<Reconstructor> {
    let sy_x = compose_xsy(data, enc_s)?.x_vs_sy().transpose();
    Ok(Reconstructor {
        cond: conditional_rows(&sy_x),
    })
}

/// The marginal q(t), which makes the compression bound tight.
pub fn marginal_prior(data: &JointXY, enc_t: &Encoder) -> Result<PriorT> {
    let m = compose_yt(data, enc_t)?.marginal_b();
    let total = compensated_sum(m.iter().copied());
    Ok(PriorT(Distribution::new(m.into_iter().map(|v| v / total).collect())?))
}

/// `sum_{a,b} w(a,b) ln c(a,b)` over cells with positive weight.
fn expected_log(weights: &Matrix, cond: &Matrix, what: &str) -> Result<f64> {
    let mut terms = Vec::with_capacity(weights.rows() * weights.cols());
    for a in 0..weights.rows() {
        for b in 0..weights.cols() {
            let w = weights.get(a, b);
            if w < ZERO_FLOOR {
                continue;
            }
            let c = cond.get(a, b);
            if c < ZERO_FLOOR {
                return Err(Error::BoundDegenerate(format!(
                    "{what} assigns zero probability to ({a}, {b}) which carries mass {w}"
                )));
            }
            terms.push(w * c.ln());
        }
    }
    Ok(compensated_sum(terms))
}

/// `E_{q(y,t)} ln p(y|t) + H(Y)`.
pub fn ity_lower_bound(data: &JointXY, enc_t: &Encoder, dec: &Decoder) -> Result<f64> {
    let ty = compose_yt(data, enc_t)?.transpose();
    if dec.cond.rows() != ty.probs().rows() || dec.cond.cols() != ty.probs().cols() {
        return Err(Error::DimensionMismatch {
            what: "decoder shape (|T| rows)",
            expected: ty.probs().rows(),
            found: dec.cond.rows(),
        });
    }
    Ok(expected_log(ty.probs(), &dec.cond, "decoder")? + data.h_y())
}

/// `E_{q(t)} KL[q(Y|t) || p(Y|t)]`, the slack of [`ity_lower_bound`].
pub fn ity_gap(data: &JointXY, enc_t: &Encoder, dec: &Decoder) -> Result<f64> {
    let ty = compose_yt(data, enc_t)?.transpose();
    expected_kl(&ty, &dec.cond, "decoder")
}

/// `E_{q(x,s,y)} ln r(x|s,y) + H(X)`.
pub fn ixsy_lower_bound(data: &JointXY, enc_s: &Encoder, rec: &Reconstructor) -> Result<f64> {
    let sy_x = compose_xsy(data, enc_s)?.x_vs_sy().transpose();
    if rec.cond.rows() != sy_x.probs().rows() || rec.cond.cols() != sy_x.probs().cols() {
        return Err(Error::DimensionMismatch {
            what: "reconstructor shape (|S||Y| rows)",
            expected: sy_x.probs().rows(),
            found: rec.cond.rows(),
        });
    }
    Ok(expected_log(sy_x.probs(), &rec.cond, "reconstructor")? + data.h_x())
}

/// `E_{q(s,y)} KL[q(X|s,y) || r(X|s,y)]`.
pub fn ixsy_gap(data: &JointXY, enc_s: &Encoder, rec: &Reconstructor) -> Result<f64> {
    let sy_x = compose_xsy(data, enc_s)?.x_vs_sy().transpose();
    expected_kl(&sy_x, &rec.cond, "reconstructor")
}

/// `E_{q(x,t)} ln q(t|x) - E_{q(t)} ln v(t)`.
pub fn vib_upper_bound(data: &JointXY, enc_t: &Encoder, prior: &PriorT) -> Result<f64> {
    if prior.0.len() != enc_t.cardinality() {
        return Err(Error::DimensionMismatch {
            what: "prior support size",
            expected: enc_t.cardinality(),
            found: prior.0.len(),
        });
    }
    if enc_t.n_x() != data.n_x() {
        return Err(Error::DimensionMismatch {
            what: "encoder rows",
            expected: data.n_x(),
            found: enc_t.n_x(),
        });
    }
    let px = data.p_x();
    let q = enc_t.cond();
    let xt = Matrix::from_fn(q.rows(), q.cols(), |x, t| px[x] * q.get(x, t));
    let cross = expected_log(&xt, q, "encoder")?;
    let qt = xt.col_sums();
    let mut prior_terms = Vec::with_capacity(qt.len());
    for (t, (&m, &v)) in qt.iter().zip(prior.0.probs()).enumerate() {
        if m < ZERO_FLOOR {
            continue;
        }
        if v < ZERO_FLOOR {
            return Err(Error::BoundDegenerate(format!(
                "prior is zero at t = {t} where q(t) = {m}"
            )));
        }
        prior_terms.push(m * v.ln());
    }
    Ok(cross - compensated_sum(prior_terms))
}

/// `KL[q(T) || v(T)]`, the slack of [`vib_upper_bound`].
pub fn vib_gap(data: &JointXY, enc_t: &Encoder, prior: &PriorT) -> Result<f64> {
    let qt = marginal_prior(data, enc_t)?;
    kl_divergence(&qt.0, &prior.0).map_err(|e| match e {
        Error::SupportViolation { index, mass } => {
            Error::BoundDegenerate(format!("prior is zero at t = {index} where q(t) = {mass}"))
        }
        other => other,
    })
}

fn expected_kl(j: &Joint2, cond: &Matrix, what: &str) -> Result<f64> {
    let m = j.probs();
    let mut terms = Vec::new();
    for a in 0..m.rows() {
        for b in 0..m.cols() {
            let w = m.get(a, b);
            if w < ZERO_FLOOR {
                continue;
            }
            let c = cond.get(a, b);
            if c < ZERO_FLOOR {
                return Err(Error::BoundDegenerate(format!(
                    "{what} assigns zero probability to ({a}, {b}) which carries mass {w}"
                )));
            }
            let pa = compensated_sum(m.row(a).iter().copied());
            terms.push(w * ((w / pa) / c).ln());
        }
    }
    Ok(compensated_sum(terms))
}

/// Tolerance for the sandwich and gap identities.
pub const BOUND_TOL: f64 = 1e-10;

/// Outcome of one family of checks over random tuples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    /// Largest `|bound +/- gap - exact|` seen.
    pub max_identity_residual: f64,
    /// Largest amount by which a bound crossed the exact value.
    pub max_sandwich_violation: f64,
    /// Largest `|bound - exact|` at the optimal argument.
    pub max_tightness_residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSuite {
    pub trials: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub checks: Vec<BoundCheck>,
}

impl BoundSuite {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Plain-text table; residuals are shown in the requested unit.
    pub fn to_table(&self, scale: f64, unit: &str) -> String {
        let mut s = format!(
            "{:<16} {:>14} {:>14} {:>14}  result   ({} trials, seed {}, {unit})\n",
            "bound", "identity", "sandwich", "tightness", self.trials, self.seed
        );
        for c in &self.checks {
            s.push_str(&format!(
                "{:<16} {:>14.3e} {:>14.3e} {:>14.3e}  {}\n",
                c.name,
                c.max_identity_residual * scale,
                c.max_sandwich_violation * scale,
                c.max_tightness_residual * scale,
                if c.passed { "PASS" } else { "FAIL" }
            ));
        }
        s
    }
}

fn random_stochastic(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let scale = rng.random_range(0.1..4.0);
    softmax_rows(&random_logits(rows, cols, scale, rng))
}

#[derive(Default)]
struct Tally {
    identity: f64,
    sandwich: f64,
    tight: f64,
}

impl Tally {
    fn finish(self, name: &str, tol: f64) -> BoundCheck {
        BoundCheck {
            name: name.to_string(),
            max_identity_residual: self.identity,
            max_sandwich_violation: self.sandwich,
            max_tightness_residual: self.tight,
            passed: self.identity <= tol && self.sandwich <= tol && self.tight <= tol,
        }
    }
}

/// Draws `trials` random (encoders, decoder, reconstructor, prior) tuples and
/// checks every bound against the exact quantity, its gap identity, and
/// tightness at the optimal argument.
pub fn bound_suite(data: &JointXY, trials: usize, seed: u64) -> Result<BoundSuite> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_x, n_y) = (data.n_x(), data.n_y());
    let (mut pred, mut recon, mut comp) = (Tally::default(), Tally::default(), Tally::default());
    for _ in 0..trials {
        let card_t = rng.random_range(1..=n_x.max(2) + 1);
        let card_s = rng.random_range(1..=n_x.max(2) + 1);
        let enc_t = Encoder::new_unchecked(random_stochastic(n_x, card_t, &mut rng));
        let enc_s = Encoder::new_unchecked(random_stochastic(n_x, card_s, &mut rng));
        let dec = Decoder {
            cond: random_stochastic(card_t, n_y, &mut rng),
        };
        let rec = Reconstructor {
            cond: random_stochastic(card_s * n_y, n_x, &mut rng),
        };
        let prior = PriorT(Distribution::new(random_stochastic(1, card_t, &mut rng).row(0).to_vec())?);

        let ity = mutual_information(&compose_yt(data, &enc_t)?);
        let lb = ity_lower_bound(data, &enc_t, &dec)?;
        pred.identity = pred.identity.max((lb + ity_gap(data, &enc_t, &dec)? - ity).abs());
        pred.sandwich = pred.sandwich.max(lb - ity);
        let opt = ity_lower_bound(data, &enc_t, &optimal_decoder(data, &enc_t)?)?;
        pred.tight = pred.tight.max((opt - ity).abs());

        let ixsy = mutual_information(&compose_xsy(data, &enc_s)?.x_vs_sy());
        let lb = ixsy_lower_bound(data, &enc_s, &rec)?;
        recon.identity = recon.identity.max((lb + ixsy_gap(data, &enc_s, &rec)? - ixsy).abs());
        recon.sandwich = recon.sandwich.max(lb - ixsy);
        let opt = ixsy_lower_bound(data, &enc_s, &optimal_reconstructor(data, &enc_s)?)?;
        recon.tight = recon.tight.max((opt - ixsy).abs());

        let ixt = mutual_information(&compose_xt(data, &enc_t)?);
        let ub = vib_upper_bound(data, &enc_t, &prior)?;
        comp.identity = comp.identity.max((ub - vib_gap(data, &enc_t, &prior)? - ixt).abs());
        comp.sandwich = comp.sandwich.max(ixt - ub);
        let opt = vib_upper_bound(data, &enc_t, &marginal_prior(data, &enc_t)?)?;
        comp.tight = comp.tight.max((opt - ixt).abs());
    }
    Ok(BoundSuite {
        trials,
        seed,
        tolerance: BOUND_TOL,
        checks: vec![
            pred.finish("prediction", BOUND_TOL),
            recon.finish("reconstruction", BOUND_TOL),
            comp.finish("compression", BOUND_TOL),
        ],
    })
}
