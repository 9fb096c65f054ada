//! Optimistic online control for unknown linear time-varying (LTV) LQR systems.
//!
//! The crate is organised bottom-up:
//!
//! * [`dynamics`] defines episodic LTV environments and simulates them.
//! * [`estimation`] keeps the restarting / sliding-window ridge statistics and
//!   builds confidence ellipsoids around the point estimate.
//! * [`riccati`] runs the finite-horizon backward Riccati recursion.
//! * [`ofu`] samples candidate models, picks the optimistic one and runs the
//!   restarting (R-OFU) and sliding-window (SW-OFU) control loops, plus baselines.
//! * [`regret`] evaluates the time-varying optimum and accumulates dynamic regret.
//! * [`harness`] is the experiment driver behind the `ltv-ofu` binary.

pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod ofu;
pub mod regret;
pub mod riccati;
pub mod rng;

pub use dynamics::{build_environment, InitialStateLaw, LtvEnvironment, Preset, Theta, Transition};
pub use error::{Error, Result};
pub use estimation::{ConfidenceEllipsoid, EstimatorMode, GramState};
pub use ofu::{
    generate_candidates, run_baseline, run_r_ofu, run_sw_ofu, select_optimistic, Algorithm,
    Baseline, OfuConfig, RunRecord, Selection, StepLog,
};
pub use regret::{
    accumulate, episode_optimal_cost, growth_exponent, optimal_epoch_length, total_variation,
    RegretLedger,
};
pub use riccati::{backward_recursion, gain_control, optimal_cost, RiccatiSolution};
