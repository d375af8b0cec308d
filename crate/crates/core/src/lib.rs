//! Perpetual American put under interactive volatility.
//!
//! The price is a GBM with `(mu0, sigma0)` until it first reaches `s0`, then a
//! GBM with `(mu1, sigma1)` for an independent exponential time of rate
//! `lambda`, after which it is frozen. [`excited`] solves the state right
//! after the switch, [`pre_regime`] the state before it, and [`mc`]
//! simulates the process to check both.
//!
//! The closed-form solvers are generic over [`Scalar`] (`f32` or `f64`); the
//! simulator, verification and strategy layers work in `f64`.

pub mod analytic;
pub mod error;
pub mod excited;
pub mod mc;
pub mod pre_regime;
pub mod scalar;
pub mod solver;
pub mod strategy;
pub mod verify;

pub use analytic::{
    beta_roots, exit_transforms, gamma_roots, h_particular, mckean_boundary, mckean_value,
    CharRoots, ModelParams, Particular,
};
pub use error::{Error, Result};
pub use excited::{gamma_big, solve_excited, toy_nonuniqueness_a4, value_excited, ExcitedSolution};
pub use mc::{estimate, simulate_path, MCEstimate, SimConfig, StartState, StoppingRule};
pub use pre_regime::{
    classify, classify_reformulated, g_slope, gamma_cap, mu0_crossing, s0_max, solve_b_star,
    solve_pre_regime, tangency_roots, value_pre_regime, Case, PreRegimeSolution,
};
pub use scalar::Scalar;

pub type Params = ModelParams<f64>;
pub type Roots = CharRoots<f64>;
pub type Excited = ExcitedSolution<f64>;
pub type PreRegime = PreRegimeSolution<f64>;

pub type Params32 = ModelParams<f32>;
pub type Excited32 = ExcitedSolution<f32>;
pub type PreRegime32 = PreRegimeSolution<f32>;
