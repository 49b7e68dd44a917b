//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's information routines.
#![allow(dead_code)]

use iblab::{DisenIBParams, EncoderParams, JointXY, Matrix, SurrogateFn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn table(m: &Matrix) -> Vec<Vec<f64>> {
    m.to_rows()
}

/// Plain double sum `sum p ln(p / (p_a p_b))`.
pub fn brute_mi(p: &[Vec<f64>]) -> f64 {
    let rows = p.len();
    let cols = p[0].len();
    let pa: Vec<f64> = p.iter().map(|r| r.iter().sum()).collect();
    let pb: Vec<f64> = (0..cols).map(|j| (0..rows).map(|i| p[i][j]).sum()).collect();
    let mut total = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            if p[i][j] > 0.0 {
                total += p[i][j] * (p[i][j] / (pa[i] * pb[j])).ln();
            }
        }
    }
    total
}

pub fn brute_entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

pub fn softmax(logits: &Matrix) -> Vec<Vec<f64>> {
    logits
        .to_rows()
        .into_iter()
        .map(|r| {
            let m = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = r.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

pub struct Terms {
    pub i_xt: f64,
    pub i_ty: f64,
    pub i_xsy: f64,
    pub i_st: f64,
}

/// All four terms for encoders `q(t|x)` and `q(s|x)`, composed by loops.
pub fn brute_terms(data: &JointXY, qt: &[Vec<f64>], qs: &[Vec<f64>]) -> Terms {
    let p = table(data.probs());
    let (nx, ny, nt, ns) = (p.len(), p[0].len(), qt[0].len(), qs[0].len());
    let px: Vec<f64> = p.iter().map(|r| r.iter().sum()).collect();
    let mut xt = vec![vec![0.0; nt]; nx];
    let mut yt = vec![vec![0.0; nt]; ny];
    let mut x_sy = vec![vec![0.0; ns * ny]; nx];
    let mut st = vec![vec![0.0; nt]; ns];
    for x in 0..nx {
        for t in 0..nt {
            xt[x][t] = px[x] * qt[x][t];
            for y in 0..ny {
                yt[y][t] += p[x][y] * qt[x][t];
            }
            for s in 0..ns {
                st[s][t] += px[x] * qs[x][s] * qt[x][t];
            }
        }
        for s in 0..ns {
            for y in 0..ny {
                x_sy[x][s * ny + y] = p[x][y] * qs[x][s];
            }
        }
    }
    Terms {
        i_xt: brute_mi(&xt),
        i_ty: brute_mi(&yt),
        i_xsy: brute_mi(&x_sy),
        i_st: brute_mi(&st),
    }
}

pub fn brute_lagrangian(data: &JointXY, logits: &Matrix, beta: f64, h: SurrogateFn) -> f64 {
    let qt = softmax(logits);
    let t = brute_terms(data, &qt, &qt);
    -t.i_ty + beta * h.value(t.i_xt)
}

pub fn brute_disenib(data: &JointXY, params: &DisenIBParams) -> f64 {
    let t = brute_terms(data, &softmax(&params.logits_t), &softmax(&params.logits_s));
    -t.i_ty - t.i_xsy + t.i_st
}

/// Central differences of `f` with respect to every entry of `m`.
pub fn fd_gradient(m: &Matrix, step: f64, f: impl Fn(&Matrix) -> f64) -> Matrix {
    let mut g = Matrix::zeros(m.rows(), m.cols());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let mut plus = m.clone();
            plus.set(i, j, m.get(i, j) + step);
            let mut minus = m.clone();
            minus.set(i, j, m.get(i, j) - step);
            g.set(i, j, (f(&plus) - f(&minus)) / (2.0 * step));
        }
    }
    g
}

/// `max|a - b| / max(max|a|, max|b|, floor)`.
pub fn rel_err(a: &Matrix, b: &Matrix, floor: f64) -> f64 {
    let diff = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    diff / a.max_abs().max(b.max_abs()).max(floor)
}

/// A random joint with a random pattern of exact zeros.
pub fn sparse_joint(rng: &mut ChaCha8Rng, nx: usize, ny: usize) -> JointXY {
    loop {
        let raw: Vec<f64> = (0..nx * ny)
            .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() })
            .collect();
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            continue;
        }
        let mut m = Matrix::from_vec(nx, ny, raw.iter().map(|v| v / total).collect()).unwrap();
        let err = 1.0 - m.total();
        let (idx, _) = m
            .as_slice()
            .iter()
            .enumerate()
            .fold((0, 0.0), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
        m.as_mut_slice()[idx] += err;
        if let Ok(j) = JointXY::new(m) {
            return j;
        }
    }
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> JointXY {
    let nx = rng.random_range(2..=7);
    let ny = rng.random_range(2..=4);
    if rng.random_bool(0.5) {
        iblab::make_random_joint(nx, ny, rng.random()).unwrap()
    } else {
        sparse_joint(rng, nx, ny)
    }
}

pub fn random_logits(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let scale = rng.random_range(0.1..3.0);
    EncoderParams::random(rows, cols, scale, rng.random()).logits
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const FIXTURES: [(usize, usize); 3] = [(8, 2), (16, 4), (12, 3)];
