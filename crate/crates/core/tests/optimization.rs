mod common;

use common::*;
use iblab::lagrangian::{default_betas, optimize_with_params};
use iblab::{
    eval_disenib, eval_lagrangian, grad_disenib, grad_lagrangian, make_noisy, optimize_at_beta, sweep_beta,
    DisenIBParams, EncoderParams, OptimizerConfig, SurrogateFn,
};
use rand::Rng;

const SURROGATES: [SurrogateFn; 4] = [
    SurrogateFn::Identity,
    SurrogateFn::Square,
    SurrogateFn::Power { exponent: 1.5 },
    SurrogateFn::Exponential { scale: 0.7 },
];

#[test]
fn lagrangian_gradient_matches_finite_differences() {
    let mut r = rng(101);
    for i in 0..20 {
        let data = random_instance(&mut r);
        let ct = r.random_range(1..=5);
        let logits = random_logits(&mut r, data.n_x(), ct);
        let beta = r.random_range(0.0..2.0);
        let h = SURROGATES[i % 4];
        let params = EncoderParams { logits: logits.clone() };
        let analytic = grad_lagrangian(&data, &params, beta, h).unwrap();
        let numeric = fd_gradient(&logits, 1e-6, |m| brute_lagrangian(&data, m, beta, h));
        let err = rel_err(&analytic, &numeric, 1e-8);
        assert!(err <= 1e-5, "case {i}: relative error {err}");
    }
}

#[test]
fn disenib_gradient_matches_finite_differences() {
    let mut r = rng(202);
    for i in 0..20 {
        let data = random_instance(&mut r);
        let (ct, cs) = (r.random_range(1..=4), r.random_range(1..=4));
        let p = DisenIBParams::new(random_logits(&mut r, data.n_x(), ct), random_logits(&mut r, data.n_x(), cs))
            .unwrap();
        let (gt, gs) = grad_disenib(&data, &p).unwrap();
        let nt = fd_gradient(&p.logits_t, 1e-6, |m| {
            brute_disenib(&data, &DisenIBParams::new(m.clone(), p.logits_s.clone()).unwrap())
        });
        let ns = fd_gradient(&p.logits_s, 1e-6, |m| {
            brute_disenib(&data, &DisenIBParams::new(p.logits_t.clone(), m.clone()).unwrap())
        });
        assert!(rel_err(&gt, &nt, 1e-8) <= 1e-5, "case {i}: t block");
        assert!(rel_err(&gs, &ns, 1e-8) <= 1e-5, "case {i}: s block");
    }
}

#[test]
fn evaluators_match_oracles() {
    let mut r = rng(303);
    for _ in 0..50 {
        let data = random_instance(&mut r);
        let logits = random_logits(&mut r, data.n_x(), 3);
        let beta = r.random_range(0.0..1.5);
        let v = eval_lagrangian(&data, &EncoderParams { logits: logits.clone() }, beta, SurrogateFn::Square).unwrap();
        assert!((v.objective - brute_lagrangian(&data, &logits, beta, SurrogateFn::Square)).abs() < 1e-12);
        let p = DisenIBParams::new(logits, random_logits(&mut r, data.n_x(), 2)).unwrap();
        assert!((eval_disenib(&data, &p).unwrap().objective - brute_disenib(&data, &p)).abs() < 1e-12);
    }
}

/// The optimizer should beat a blind random search over encoders.
#[test]
fn optimum_beats_random_encoders() {
    let data = make_noisy(8, 2, 0.2).unwrap();
    let (beta, h) = (0.5, SurrogateFn::Identity);
    let point = optimize_at_beta(&data, beta, h, 8, &OptimizerConfig::default()).unwrap();
    let mut r = rng(404);
    for i in 0..1000 {
        let card = 1 + i % 8;
        let scale = [0.1, 1.0, 5.0, 30.0][i % 4];
        let logits = EncoderParams::random(8, card, scale, r.random()).logits;
        let value = brute_lagrangian(&data, &logits, beta, h);
        assert!(point.objective <= value + 1e-9, "draw {i}: {value} < {}", point.objective);
    }
}

#[test]
fn reported_point_matches_returned_encoder() {
    let data = make_noisy(8, 2, 0.2).unwrap();
    let (point, params) =
        optimize_with_params(&data, 0.1, SurrogateFn::Square, 4, &OptimizerConfig::default()).unwrap();
    let v = eval_lagrangian(&data, &params, 0.1, SurrogateFn::Square).unwrap();
    assert_eq!(point.objective, v.objective);
    assert_eq!(point.i_xt, v.i_xt);
    assert!(point.i_ty <= data.i_xy() + 1e-12);
}

#[test]
fn sweep_is_monotone_and_deterministic() {
    let data = make_noisy(8, 2, 0.2).unwrap();
    let cfg = OptimizerConfig::default().with_seed(5);
    let betas = default_betas();
    let a = sweep_beta(&data, &betas, SurrogateFn::Identity, 8, &cfg).unwrap();
    let b = sweep_beta(&data, &betas, SurrogateFn::Identity, 8, &cfg).unwrap();
    assert_eq!(a, b);
    for w in a.windows(2) {
        assert!(w[0].beta < w[1].beta);
        assert!(w[1].i_ty <= w[0].i_ty + 1e-3);
        if w[1].i_xt > 0.01 {
            assert!(w[1].i_xt <= w[0].i_xt + 1e-3);
        }
    }
    assert!(a[0].i_ty - a[a.len() - 1].i_ty >= 0.05);
}

#[test]
fn square_surrogate_traces_curve() {
    let data = make_noisy(8, 2, 0.2).unwrap();
    let mut pts = sweep_beta(&data, &default_betas(), SurrogateFn::Square, 8, &OptimizerConfig::default()).unwrap();
    pts.sort_by(|a, b| a.i_xt.total_cmp(&b.i_xt));
    let last = pts.last().unwrap();
    assert!((last.i_ty - 0.192745).abs() < 1e-2);
    assert!(pts[0].i_ty <= pts[0].i_xt + 1e-9);
    for w in pts.windows(2) {
        assert!(w[1].i_ty >= w[0].i_ty - 1e-3);
    }
}
