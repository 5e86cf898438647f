//! Concentration bounds for Hoeffding's combinatorial statistic
//! `Y = sum_i a_{i, pi(i)}` when `pi` follows the Ewens distribution, built
//! on approximate zero-bias couplings, together with the machinery to check
//! every ingredient: exact enumeration of small symmetric groups and a
//! reproducible Monte Carlo engine.
//!
//! Modules, bottom up:
//!
//! * [`perm`], [`ewens`], [`factorial`]: permutations, the Ewens law, CRP and
//!   accept-reject samplers.
//! * [`hoeffding`]: score matrices, centering, the statistics `Y` and `T`.
//! * [`oracle`]: exact joint law of the exchangeable pair for `n <= 8`.
//! * [`bounds`]: the three tail bounds and the closed-form constants.
//! * [`montecarlo`]: sharded simulation and experiment summaries.
//! * [`experiment`]: the four canned experiment configurations.
//! * [`io`]: file formats.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod ewens;
pub mod experiment;
pub mod factorial;
pub mod hoeffding;
pub mod io;
pub mod montecarlo;
pub mod oracle;
pub mod perm;
pub mod rng;
pub mod sum;

pub use error::{Error, Result};
pub use ewens::{EwensParams, SamplerKind};
pub use hoeffding::{CenteredMatrix, ScoreMatrix, TestMatrixGenerator};
pub use perm::Permutation;
