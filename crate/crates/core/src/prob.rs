//! Exact information measures on finite discrete distributions.
//!
//! Everything is in nats. Probabilities live in the linear domain; totals use
//! compensated summation. Entries below [`ZERO_FLOOR`] are treated as exact
//! zeros before any logarithm is taken, so `0 ln 0 = 0` holds throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simplex tolerance for user-facing distributions and encoders.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Simplex tolerance for joints assembled from other joints.
pub const JOINT_TOL: f64 = 1e-11;
/// Entries below this are zero as far as logarithms are concerned.
pub const ZERO_FLOOR: f64 = 1e-15;

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `p ln(p / q)` with the zero-floor convention on `p`.
#[inline]
pub(crate) fn plogp_ratio(p: f64, q: f64) -> f64 {
    if p < ZERO_FLOOR {
        0.0
    } else {
        p * (p / q).ln()
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix data length",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Empty { what: "matrix" });
        }
        let m = rows[0].len();
        let mut data = Vec::with_capacity(n * m);
        for r in rows {
            if r.len() != m {
                return Err(Error::DimensionMismatch {
                    what: "matrix row length",
                    expected: m,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: n, cols: m, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.data.iter().copied())
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| compensated_sum(self.row(i).iter().copied()))
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| compensated_sum((0..self.rows).map(|i| self.get(i, j))))
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn check_entries(&self, what: &'static str) -> Result<()> {
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = self.get(i, j);
                if !v.is_finite() {
                    return Err(Error::NonFinite { what });
                }
                if v < 0.0 {
                    return Err(Error::NegativeEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }
}

fn check_simplex(values: &[f64], tol: f64, what: &'static str) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { what });
        }
        if v < 0.0 {
            return Err(Error::NegativeEntry {
                row: 0,
                col: i,
                value: v,
            });
        }
    }
    let sum = compensated_sum(values.iter().copied());
    if (sum - 1.0).abs() > tol {
        return Err(Error::SumMismatch { what, sum });
    }
    Ok(())
}

/// A probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(probs, SIMPLEX_TOL)
    }

    fn with_tolerance(probs: Vec<f64>, tol: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty {
                what: "distribution",
            });
        }
        check_simplex(&probs, tol, "distribution")?;
        Ok(Distribution(probs))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty {
                what: "distribution",
            });
        }
        Ok(Distribution(vec![1.0 / n as f64; n]))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Shannon entropy in nats.
pub fn entropy(p: &Distribution) -> f64 {
    entropy_of(p.probs())
}

/// Entropy of a raw nonnegative vector, no validation.
pub(crate) fn entropy_of(p: &[f64]) -> f64 {
    -compensated_sum(
        p.iter()
            .map(|&v| if v < ZERO_FLOOR { 0.0 } else { v * v.ln() }),
    )
}

/// KL divergence `D(p || q)` in nats. Fails when `p` has mass outside the
/// support of `q`.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            what: "kl support size",
            expected: p.len(),
            found: q.len(),
        });
    }
    let mut terms = Vec::with_capacity(p.len());
    for (i, (&pi, &qi)) in p.probs().iter().zip(q.probs()).enumerate() {
        if pi < ZERO_FLOOR {
            continue;
        }
        if qi < ZERO_FLOOR {
            return Err(Error::SupportViolation { index: i, mass: pi });
        }
        terms.push(pi * (pi / qi).ln());
    }
    Ok(compensated_sum(terms).max(0.0))
}

/// The data distribution p(x, y) with opaque row/column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct JointXY {
    x_labels: Vec<String>,
    y_labels: Vec<String>,
    probs: Matrix,
}

impl JointXY {
    /// Validates and wraps `probs`; labels default to row/column indices.
    pub fn new(probs: Matrix) -> Result<Self> {
        let x_labels = (0..probs.rows()).map(|i| i.to_string()).collect();
        let y_labels = (0..probs.cols()).map(|j| j.to_string()).collect();
        Self::with_labels(x_labels, y_labels, probs)
    }

    pub fn with_labels(x_labels: Vec<String>, y_labels: Vec<String>, probs: Matrix) -> Result<Self> {
        if probs.rows() == 0 || probs.cols() == 0 {
            return Err(Error::Empty { what: "joint" });
        }
        if x_labels.len() != probs.rows() {
            return Err(Error::DimensionMismatch {
                what: "x label count",
                expected: probs.rows(),
                found: x_labels.len(),
            });
        }
        if y_labels.len() != probs.cols() {
            return Err(Error::DimensionMismatch {
                what: "y label count",
                expected: probs.cols(),
                found: y_labels.len(),
            });
        }
        probs.check_entries("joint")?;
        let sum = probs.total();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::SumMismatch { what: "joint", sum });
        }
        Ok(JointXY {
            x_labels,
            y_labels,
            probs,
        })
    }

    pub fn probs(&self) -> &Matrix {
        &self.probs
    }

    pub fn x_labels(&self) -> &[String] {
        &self.x_labels
    }

    pub fn y_labels(&self) -> &[String] {
        &self.y_labels
    }

    pub fn n_x(&self) -> usize {
        self.probs.rows()
    }

    pub fn n_y(&self) -> usize {
        self.probs.cols()
    }

    pub fn p_x(&self) -> Vec<f64> {
        self.probs.row_sums()
    }

    pub fn p_y(&self) -> Vec<f64> {
        self.probs.col_sums()
    }

    pub fn marginal_x(&self) -> Distribution {
        Distribution(self.p_x())
    }

    pub fn marginal_y(&self) -> Distribution {
        Distribution(self.p_y())
    }

    pub fn h_x(&self) -> f64 {
        entropy_of(&self.p_x())
    }

    pub fn h_y(&self) -> f64 {
        entropy_of(&self.p_y())
    }

    /// I(X;Y) of the data itself.
    pub fn i_xy(&self) -> f64 {
        mutual_information(&Joint2 {
            probs: self.probs.clone(),
        })
    }

    /// H(Y|X).
    pub fn h_y_given_x(&self) -> f64 {
        (entropy_of(self.probs.as_slice()) - self.h_x()).max(0.0)
    }

    /// Number of labels with positive mass.
    pub fn support_y(&self) -> usize {
        self.p_y().iter().filter(|&&p| p >= ZERO_FLOOR).count()
    }
}

#[derive(Serialize, Deserialize)]
struct JointXYWire {
    x_labels: Vec<String>,
    y_labels: Vec<String>,
    probs: Vec<Vec<f64>>,
}

impl Serialize for JointXY {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        JointXYWire {
            x_labels: self.x_labels.clone(),
            y_labels: self.y_labels.clone(),
            probs: self.probs.to_rows(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for JointXY {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = JointXYWire::deserialize(d)?;
        let probs = Matrix::from_rows(&wire.probs).map_err(serde::de::Error::custom)?;
        JointXY::with_labels(wire.x_labels, wire.y_labels, probs).map_err(serde::de::Error::custom)
    }
}

/// A row-stochastic map q(z|x); rows indexed by x, columns by z.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    cond: Matrix,
}

impl Encoder {
    pub fn new(cond: Matrix) -> Result<Self> {
        if cond.rows() == 0 || cond.cols() == 0 {
            return Err(Error::Empty { what: "encoder" });
        }
        cond.check_entries("encoder")?;
        for s in cond.row_sums() {
            if (s - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::SumMismatch {
                    what: "encoder row",
                    sum: s,
                });
            }
        }
        Ok(Encoder { cond })
    }

    pub(crate) fn new_unchecked(cond: Matrix) -> Self {
        Encoder { cond }
    }

    pub fn uniform(n_x: usize, card: usize) -> Result<Self> {
        if n_x == 0 || card == 0 {
            return Err(Error::Empty { what: "encoder" });
        }
        Ok(Encoder {
            cond: Matrix::from_fn(n_x, card, |_, _| 1.0 / card as f64),
        })
    }

    /// One-hot encoder z = f(x).
    pub fn deterministic(n_x: usize, card: usize, f: impl Fn(usize) -> usize) -> Result<Self> {
        if n_x == 0 || card == 0 {
            return Err(Error::Empty { what: "encoder" });
        }
        let mut cond = Matrix::zeros(n_x, card);
        for x in 0..n_x {
            let z = f(x);
            if z >= card {
                return Err(Error::Parameter(format!(
                    "deterministic encoder maps {x} to {z}, outside cardinality {card}"
                )));
            }
            cond.set(x, z, 1.0);
        }
        Ok(Encoder { cond })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::deterministic(n, n, |x| x)
    }

    pub fn cond(&self) -> &Matrix {
        &self.cond
    }

    pub fn n_x(&self) -> usize {
        self.cond.rows()
    }

    pub fn cardinality(&self) -> usize {
        self.cond.cols()
    }
}

#[derive(Serialize, Deserialize)]
struct EncoderWire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x_labels: Option<Vec<String>>,
    z_cardinality: usize,
    probs: Vec<Vec<f64>>,
}

impl Serialize for Encoder {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EncoderWire {
            x_labels: Some((0..self.n_x()).map(|i| i.to_string()).collect()),
            z_cardinality: self.cardinality(),
            probs: self.cond.to_rows(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Encoder {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = EncoderWire::deserialize(d)?;
        let cond = Matrix::from_rows(&wire.probs).map_err(serde::de::Error::custom)?;
        if cond.cols() != wire.z_cardinality {
            return Err(serde::de::Error::custom(format!(
                "z_cardinality {} does not match row length {}",
                wire.z_cardinality,
                cond.cols()
            )));
        }
        Encoder::new(cond).map_err(serde::de::Error::custom)
    }
}

/// Joint distribution over two axes (A, B); rows are A.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint2 {
    probs: Matrix,
}

impl Joint2 {
    pub fn new(probs: Matrix) -> Result<Self> {
        if probs.rows() == 0 || probs.cols() == 0 {
            return Err(Error::Empty { what: "joint" });
        }
        probs.check_entries("joint")?;
        let sum = probs.total();
        if (sum - 1.0).abs() > JOINT_TOL {
            return Err(Error::SumMismatch { what: "joint", sum });
        }
        Ok(Joint2 { probs })
    }

    pub fn probs(&self) -> &Matrix {
        &self.probs
    }

    pub fn marginal_a(&self) -> Vec<f64> {
        self.probs.row_sums()
    }

    pub fn marginal_b(&self) -> Vec<f64> {
        self.probs.col_sums()
    }

    pub fn transpose(&self) -> Joint2 {
        Joint2 {
            probs: self.probs.transpose(),
        }
    }

    /// Conditional p(b|a) for row `a`; uniform when p(a) is zero.
    pub fn conditional_b_given_a(&self, a: usize) -> Vec<f64> {
        let row = self.probs.row(a);
        let pa = compensated_sum(row.iter().copied());
        if pa < ZERO_FLOOR {
            vec![1.0 / row.len() as f64; row.len()]
        } else {
            row.iter().map(|v| v / pa).collect()
        }
    }
}

/// Joint distribution over (X, S, Y), indexed `[x][s][y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint3 {
    n_x: usize,
    n_s: usize,
    n_y: usize,
    data: Vec<f64>,
}

impl Joint3 {
    pub fn new(n_x: usize, n_s: usize, n_y: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_x * n_s * n_y {
            return Err(Error::DimensionMismatch {
                what: "joint3 data length",
                expected: n_x * n_s * n_y,
                found: data.len(),
            });
        }
        if data.is_empty() {
            return Err(Error::Empty { what: "joint" });
        }
        check_simplex(&data, JOINT_TOL, "joint")?;
        Ok(Joint3 { n_x, n_s, n_y, data })
    }

    #[inline]
    pub fn get(&self, x: usize, s: usize, y: usize) -> f64 {
        self.data[(x * self.n_s + s) * self.n_y + y]
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_x, self.n_s, self.n_y)
    }

    /// Sum over S, recovering p(x, y).
    pub fn marginal_xy(&self) -> Matrix {
        Matrix::from_fn(self.n_x, self.n_y, |x, y| {
            compensated_sum((0..self.n_s).map(|s| self.get(x, s, y)))
        })
    }

    /// Joint of X against the pair (S, Y), with pair index `s * |Y| + y`.
    pub fn x_vs_sy(&self) -> Joint2 {
        Joint2 {
            probs: Matrix {
                rows: self.n_x,
                cols: self.n_s * self.n_y,
                data: self.data.clone(),
            },
        }
    }

    /// Marginal q(s, y) with pair index `s * |Y| + y`.
    pub fn marginal_sy(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_s * self.n_y];
        for (k, o) in out.iter_mut().enumerate() {
            *o = compensated_sum((0..self.n_x).map(|x| self.data[x * self.n_s * self.n_y + k]));
        }
        out
    }

    /// I(X;S | Y) by direct summation.
    pub fn conditional_mi_xs_given_y(&self) -> f64 {
        let p_y: Vec<f64> = (0..self.n_y)
            .map(|y| {
                compensated_sum(
                    (0..self.n_x).flat_map(|x| (0..self.n_s).map(move |s| (x, s))).map(|(x, s)| self.get(x, s, y)),
                )
            })
            .collect();
        let p_xy = self.marginal_xy();
        let p_sy = self.marginal_sy();
        let mut terms = Vec::new();
        for x in 0..self.n_x {
            for s in 0..self.n_s {
                for y in 0..self.n_y {
                    let p = self.get(x, s, y);
                    if p < ZERO_FLOOR {
                        continue;
                    }
                    terms.push(p * (p * p_y[y] / (p_xy.get(x, y) * p_sy[s * self.n_y + y])).ln());
                }
            }
        }
        compensated_sum(terms)
    }
}

/// I(A;B) in nats.
pub fn mutual_information(j: &Joint2) -> f64 {
    let pa = j.marginal_a();
    let pb = j.marginal_b();
    let m = j.probs();
    let mut terms = Vec::with_capacity(m.rows() * m.cols());
    for a in 0..m.rows() {
        for b in 0..m.cols() {
            terms.push(plogp_ratio(m.get(a, b), pa[a] * pb[b]));
        }
    }
    compensated_sum(terms).max(0.0)
}

fn check_rows(data: &JointXY, enc: &Encoder, what: &'static str) -> Result<()> {
    if enc.n_x() != data.n_x() {
        return Err(Error::DimensionMismatch {
            what,
            expected: data.n_x(),
            found: enc.n_x(),
        });
    }
    Ok(())
}

/// q(x, t) = p(x) q(t|x).
pub fn compose_xt(data: &JointXY, enc_t: &Encoder) -> Result<Joint2> {
    check_rows(data, enc_t, "encoder rows")?;
    let px = data.p_x();
    let q = enc_t.cond();
    Joint2::new(Matrix::from_fn(q.rows(), q.cols(), |x, t| px[x] * q.get(x, t)))
}

/// q(y, t) = sum_x p(x, y) q(t|x); rows are Y.
pub fn compose_yt(data: &JointXY, enc_t: &Encoder) -> Result<Joint2> {
    check_rows(data, enc_t, "encoder rows")?;
    let p = data.probs();
    let q = enc_t.cond();
    Joint2::new(Matrix::from_fn(data.n_y(), q.cols(), |y, t| {
        compensated_sum((0..data.n_x()).map(|x| p.get(x, y) * q.get(x, t)))
    }))
}

/// q(x, s, y) = p(x, y) q(s|x).
pub fn compose_xsy(data: &JointXY, enc_s: &Encoder) -> Result<Joint3> {
    check_rows(data, enc_s, "encoder rows")?;
    let (n_x, n_s, n_y) = (data.n_x(), enc_s.cardinality(), data.n_y());
    let p = data.probs();
    let q = enc_s.cond();
    let mut out = Vec::with_capacity(n_x * n_s * n_y);
    for x in 0..n_x {
        for s in 0..n_s {
            for y in 0..n_y {
                out.push(p.get(x, y) * q.get(x, s));
            }
        }
    }
    Joint3::new(n_x, n_s, n_y, out)
}

/// q(s, t) = sum_x p(x) q(s|x) q(t|x); rows are S.
pub fn compose_st(data: &JointXY, enc_s: &Encoder, enc_t: &Encoder) -> Result<Joint2> {
    check_rows(data, enc_s, "s-encoder rows")?;
    check_rows(data, enc_t, "t-encoder rows")?;
    let px = data.p_x();
    let qs = enc_s.cond();
    let qt = enc_t.cond();
    Joint2::new(Matrix::from_fn(qs.cols(), qt.cols(), |s, t| {
        compensated_sum((0..data.n_x()).map(|x| px[x] * qs.get(x, s) * qt.get(x, t)))
    }))
}

/// All four information terms of the disentangled objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformationTerms {
    pub i_xt: f64,
    pub i_ty: f64,
    pub i_xsy: f64,
    pub i_st: f64,
}

pub fn information_triple(data: &JointXY, enc_s: &Encoder, enc_t: &Encoder) -> Result<InformationTerms> {
    Ok(InformationTerms {
        i_xt: mutual_information(&compose_xt(data, enc_t)?),
        i_ty: mutual_information(&compose_yt(data, enc_t)?),
        i_xsy: mutual_information(&compose_xsy(data, enc_s)?.x_vs_sy()),
        i_st: mutual_information(&compose_st(data, enc_s, enc_t)?),
    })
}
