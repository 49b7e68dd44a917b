//! Exact information-bottleneck laboratory for finite discrete variables.
//!
//! The crate evaluates and optimizes the IB Lagrangian family and the
//! disentangled objective `-I(T;Y) - I(X;S,Y) + I(S;T)` over softmax
//! encoders, with all information quantities computed exactly in nats.

pub mod cli;
pub mod disenib;
pub mod error;
pub mod instances;
pub mod lagrangian;
pub mod optim;
pub mod prob;
pub mod variational;

pub use disenib::{
    analytic_minimum, consistency_check, eval_disenib, grad_disenib, optimize_disenib, ConsistencyReport,
    DisenIBParams,
};
pub use error::{Error, Result};
pub use instances::{make_deterministic, make_noisy, make_random_joint, InstanceSpec};
pub use lagrangian::{
    beta_at_compression, eval_lagrangian, grad_lagrangian, optimize_at_beta, sweep_beta, IBPoint, SurrogateFn,
};
pub use optim::{EncoderParams, OptimizerConfig};
pub use prob::{Distribution, Encoder, Joint2, Joint3, JointXY, Matrix};
