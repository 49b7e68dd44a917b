//! C ABI over `iblab`.
//!
//! Every function returns an [`IblabStatus`]. On failure the message is
//! available from [`iblab_last_error`] on the same thread. Joints are opaque
//! handles released with [`iblab_joint_free`]; strings returned by the
//! library are released with [`iblab_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use iblab::disenib::default_cardinalities;
use iblab::{
    beta_at_compression, make_deterministic, make_noisy, make_random_joint, optimize_at_beta, optimize_disenib,
    sweep_beta, Error, IBPoint, JointXY, Matrix, OptimizerConfig, SurrogateFn,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IblabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Validation = 3,
    Numerical = 4,
    Panic = 5,
}

/// Opaque joint distribution p(x, y).
pub struct IblabJoint {
    inner: JointXY,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IblabOptimizerConfig {
    pub step_size: f64,
    pub max_iters: u64,
    pub grad_tolerance: f64,
    pub restarts: u64,
    pub init_scale: f64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IblabSurrogateKind {
    Identity = 0,
    Square = 1,
    Power = 2,
    Exponential = 3,
}

/// `parameter` is the exponent for `Power` and the scale for `Exponential`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IblabSurrogate {
    pub kind: IblabSurrogateKind,
    pub parameter: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IblabPoint {
    pub beta: f64,
    pub i_xt: f64,
    pub i_ty: f64,
    pub objective: f64,
    pub converged: bool,
    pub restarts_used: u64,
    pub best_restart_seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IblabInformation {
    pub h_x: f64,
    pub h_y: f64,
    pub i_xy: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IblabConsistencyReport {
    pub gap: f64,
    pub epsilon: f64,
    pub consistent: bool,
    pub converged: bool,
    pub i_xt: f64,
    pub i_ty: f64,
    pub i_xsy: f64,
    pub i_st: f64,
    pub objective: f64,
    pub analytic_minimum: f64,
    pub h_x: f64,
    pub h_y: f64,
    pub i_xy: f64,
    pub card_t: u64,
    pub card_s: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type FfiResult<T = ()> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult) -> IblabStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IblabStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer passed for {what}"));
            IblabStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_last_error(msg);
            IblabStatus::InvalidArgument
        }
        Ok(Err(Failure::Core(e))) => {
            let status = if e.is_numerical() {
                IblabStatus::Numerical
            } else {
                IblabStatus::Validation
            };
            set_last_error(e.to_string());
            status
        }
        Err(_) => {
            set_last_error("internal panic".to_string());
            IblabStatus::Panic
        }
    }
}

unsafe fn nonnull<'a, T>(p: *const T, what: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out_mut<'a, T>(p: *mut T, what: &'static str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or(Failure::Null(what))
}

fn usize_of(v: u64, what: &str) -> FfiResult<usize> {
    usize::try_from(v).map_err(|_| Failure::Arg(format!("{what} = {v} does not fit in usize")))
}

impl From<OptimizerConfig> for IblabOptimizerConfig {
    fn from(c: OptimizerConfig) -> Self {
        IblabOptimizerConfig {
            step_size: c.step_size,
            max_iters: c.max_iters as u64,
            grad_tolerance: c.grad_tolerance,
            restarts: c.restarts as u64,
            init_scale: c.init_scale,
            seed: c.seed,
        }
    }
}

impl IblabOptimizerConfig {
    fn to_core(self) -> FfiResult<OptimizerConfig> {
        let cfg = OptimizerConfig {
            step_size: self.step_size,
            max_iters: usize_of(self.max_iters, "max_iters")?,
            grad_tolerance: self.grad_tolerance,
            restarts: usize_of(self.restarts, "restarts")?,
            init_scale: self.init_scale,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl IblabSurrogate {
    fn to_core(self) -> FfiResult<SurrogateFn> {
        let h = match self.kind {
            IblabSurrogateKind::Identity => SurrogateFn::Identity,
            IblabSurrogateKind::Square => SurrogateFn::Square,
            IblabSurrogateKind::Power => SurrogateFn::Power {
                exponent: self.parameter,
            },
            IblabSurrogateKind::Exponential => SurrogateFn::Exponential { scale: self.parameter },
        };
        h.validate()?;
        Ok(h)
    }
}

impl From<&IBPoint> for IblabPoint {
    fn from(p: &IBPoint) -> Self {
        IblabPoint {
            beta: p.beta,
            i_xt: p.i_xt,
            i_ty: p.i_ty,
            objective: p.objective,
            converged: p.converged,
            restarts_used: p.restarts_used as u64,
            best_restart_seed: p.best_restart_seed,
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn iblab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn iblab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by the library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn iblab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn iblab_optimizer_config_default(out: *mut IblabOptimizerConfig) -> IblabStatus {
    guard(|| {
        *out_mut(out, "out")? = OptimizerConfig::default().into();
        Ok(())
    })
}

/// Defaults for the disentangled objective (more restarts).
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn iblab_optimizer_config_disenib(out: *mut IblabOptimizerConfig) -> IblabStatus {
    guard(|| {
        *out_mut(out, "out")? = OptimizerConfig::disenib().into();
        Ok(())
    })
}

unsafe fn emit_joint(out: *mut *mut IblabJoint, build: impl FnOnce() -> FfiResult<JointXY>) -> IblabStatus {
    guard(|| {
        let slot = out_mut(out, "out")?;
        *slot = ptr::null_mut();
        let inner = build()?;
        *slot = Box::into_raw(Box::new(IblabJoint { inner }));
        Ok(())
    })
}

/// Uniform x over `n` values with y = x mod k.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn iblab_joint_deterministic(n: u64, k: u64, out: *mut *mut IblabJoint) -> IblabStatus {
    emit_joint(out, || Ok(make_deterministic(usize_of(n, "n")?, usize_of(k, "k")?)?))
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn iblab_joint_noisy(n: u64, k: u64, noise: f64, out: *mut *mut IblabJoint) -> IblabStatus {
    emit_joint(out, || Ok(make_noisy(usize_of(n, "n")?, usize_of(k, "k")?, noise)?))
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn iblab_joint_random(n: u64, k: u64, seed: u64, out: *mut *mut IblabJoint) -> IblabStatus {
    emit_joint(out, || Ok(make_random_joint(usize_of(n, "n")?, usize_of(k, "k")?, seed)?))
}

/// Builds a joint from a row-major `n_x * n_y` array.
///
/// # Safety
/// `probs` must point to `n_x * n_y` readable doubles; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn iblab_joint_from_probs(
    probs: *const f64,
    n_x: u64,
    n_y: u64,
    out: *mut *mut IblabJoint,
) -> IblabStatus {
    emit_joint(out, || {
        let (r, c) = (usize_of(n_x, "n_x")?, usize_of(n_y, "n_y")?);
        let len = r
            .checked_mul(c)
            .ok_or_else(|| Failure::Arg("n_x * n_y overflows".into()))?;
        if probs.is_null() {
            return Err(Failure::Null("probs"));
        }
        let data = std::slice::from_raw_parts(probs, len).to_vec();
        Ok(JointXY::new(Matrix::from_vec(r, c, data)?)?)
    })
}

/// Parses the JSON form `{"x_labels", "y_labels", "probs"}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn iblab_joint_from_json(json: *const c_char, out: *mut *mut IblabJoint) -> IblabStatus {
    emit_joint(out, || {
        let text = CStr::from_ptr(nonnull(json, "json")?)
            .to_str()
            .map_err(|e| Failure::Arg(format!("json is not UTF-8: {e}")))?;
        serde_json::from_str(text).map_err(|e| Failure::Arg(format!("malformed joint JSON: {e}")))
    })
}

/// Serializes a joint; free the result with [`iblab_string_free`].
///
/// # Safety
/// `joint` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn iblab_joint_to_json(joint: *const IblabJoint, out: *mut *mut c_char) -> IblabStatus {
    guard(|| {
        let j = nonnull(joint, "joint")?;
        let slot = out_mut(out, "out")?;
        let text = serde_json::to_string(&j.inner).expect("joint serializes");
        *slot = CString::new(text).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// Releases a joint. NULL is ignored.
///
/// # Safety
/// `joint` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn iblab_joint_free(joint: *mut IblabJoint) {
    if !joint.is_null() {
        drop(Box::from_raw(joint));
    }
}

/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iblab_joint_dims(joint: *const IblabJoint, n_x: *mut u64, n_y: *mut u64) -> IblabStatus {
    guard(|| {
        let j = nonnull(joint, "joint")?;
        *out_mut(n_x, "n_x")? = j.inner.n_x() as u64;
        *out_mut(n_y, "n_y")? = j.inner.n_y() as u64;
        Ok(())
    })
}

/// H(X), H(Y) and I(X;Y) in nats.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iblab_joint_information(joint: *const IblabJoint, out: *mut IblabInformation) -> IblabStatus {
    guard(|| {
        let j = &nonnull(joint, "joint")?.inner;
        *out_mut(out, "out")? = IblabInformation {
            h_x: j.h_x(),
            h_y: j.h_y(),
            i_xy: j.i_xy(),
        };
        Ok(())
    })
}

/// Solves the Lagrangian at one beta.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iblab_optimize_at_beta(
    joint: *const IblabJoint,
    beta: f64,
    surrogate: IblabSurrogate,
    card_t: u64,
    config: *const IblabOptimizerConfig,
    out: *mut IblabPoint,
) -> IblabStatus {
    guard(|| {
        let j = &nonnull(joint, "joint")?.inner;
        let cfg = nonnull(config, "config")?.to_core()?;
        let slot = out_mut(out, "out")?;
        let p = optimize_at_beta(j, beta, surrogate.to_core()?, usize_of(card_t, "card_t")?, &cfg)?;
        *slot = (&p).into();
        Ok(())
    })
}

/// Solves the Lagrangian at each of `count` ascending betas, writing
/// `count` points to `out`.
///
/// # Safety
/// `betas` must hold `count` readable doubles and `out` room for `count`
/// points.
#[no_mangle]
pub unsafe extern "C" fn iblab_sweep_beta(
    joint: *const IblabJoint,
    betas: *const f64,
    count: u64,
    surrogate: IblabSurrogate,
    card_t: u64,
    config: *const IblabOptimizerConfig,
    out: *mut IblabPoint,
) -> IblabStatus {
    guard(|| {
        let j = &nonnull(joint, "joint")?.inner;
        let cfg = nonnull(config, "config")?.to_core()?;
        let n = usize_of(count, "count")?;
        if n == 0 {
            return Ok(());
        }
        if betas.is_null() {
            return Err(Failure::Null("betas"));
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let grid = std::slice::from_raw_parts(betas, n);
        let points = sweep_beta(j, grid, surrogate.to_core()?, usize_of(card_t, "card_t")?, &cfg)?;
        let dest = std::slice::from_raw_parts_mut(out, n);
        for (d, p) in dest.iter_mut().zip(&points) {
            *d = p.into();
        }
        Ok(())
    })
}

/// Bisects on beta in `[beta_lo, beta_hi]` for I(X;T) near `target`.
/// `reached` reports whether the tolerance was met; a bracket that does not
/// straddle the target yields [`IblabStatus::Numerical`].
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn iblab_beta_at_compression(
    joint: *const IblabJoint,
    target: f64,
    surrogate: IblabSurrogate,
    card_t: u64,
    config: *const IblabOptimizerConfig,
    beta_lo: f64,
    beta_hi: f64,
    out: *mut IblabPoint,
    reached: *mut bool,
) -> IblabStatus {
    guard(|| {
        let j = &nonnull(joint, "joint")?.inner;
        let cfg = nonnull(config, "config")?.to_core()?;
        let slot = out_mut(out, "out")?;
        let flag = out_mut(reached, "reached")?;
        let s = beta_at_compression(
            j,
            target,
            surrogate.to_core()?,
            usize_of(card_t, "card_t")?,
            &cfg,
            beta_lo,
            beta_hi,
        )?;
        *slot = (&s.point).into();
        *flag = s.reached;
        Ok(())
    })
}

/// Optimizes the disentangled objective. Zero cardinalities select the
/// defaults (|T| = |Y|, |S| = largest class).
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn iblab_optimize_disenib(
    joint: *const IblabJoint,
    card_t: u64,
    card_s: u64,
    config: *const IblabOptimizerConfig,
    epsilon: f64,
    out: *mut IblabConsistencyReport,
) -> IblabStatus {
    guard(|| {
        let j = &nonnull(joint, "joint")?.inner;
        let cfg = nonnull(config, "config")?.to_core()?;
        let slot = out_mut(out, "out")?;
        if !(epsilon > 0.0) {
            return Err(Failure::Arg(format!("epsilon must be positive, got {epsilon}")));
        }
        let (def_t, def_s) = default_cardinalities(j);
        let ct = if card_t == 0 { def_t } else { usize_of(card_t, "card_t")? };
        let cs = if card_s == 0 { def_s } else { usize_of(card_s, "card_s")? };
        let (_, r) = optimize_disenib(j, ct, cs, &cfg, epsilon)?;
        *slot = IblabConsistencyReport {
            gap: r.gap,
            epsilon: r.epsilon,
            consistent: r.consistent,
            converged: r.converged,
            i_xt: r.i_xt,
            i_ty: r.i_ty,
            i_xsy: r.i_xsy,
            i_st: r.i_st,
            objective: r.objective,
            analytic_minimum: r.analytic_minimum,
            h_x: r.h_x,
            h_y: r.h_y,
            i_xy: r.i_xy,
            card_t: ct as u64,
            card_s: cs as u64,
        };
        Ok(())
    })
}
