//! Stratified and modestly-weighted log-rank tests for right-censored
//! survival data.
//!
//! The crate is organised bottom-up:
//!
//! - [`survival`]: risk tables (one 2x2 summary per distinct event time) and
//!   Kaplan-Meier curves.
//! - [`weights`]: per-event-time weights, principally the modest scheme
//!   `w_j = 1 / max(S(t_j-), S(t*))`.
//! - [`logrank`]: per-stratum scores and the seven test statistics
//!   (unstratified, stratified, and three stratified-weighted combinations).
//! - [`scenarios`]: piecewise-exponential trial models and the 27 built-in
//!   simulation scenarios.
//! - [`simulate`]: replicate-parallel Monte Carlo estimation of rejection
//!   rates.
//! - [`design`]: Schoenfeld event counts and the uniform-accrual patient
//!   search.

pub mod design;
pub mod error;
pub mod logrank;
pub mod normal;
pub mod scenarios;
pub mod simulate;
pub mod survival;
pub mod weights;

pub use error::{Error, Result};
pub use logrank::{run_all, Analysis, StratumScore, TestName, TestResult};
pub use scenarios::{Allocation, PiecewiseExp, Prognostic, ScenarioSpec, SimConfig};
pub use simulate::SimResult;
pub use survival::{Arm, KmCurve, RiskRow, RiskTable, SubjectRecord};
pub use weights::{Pooling, WeightSpec};
