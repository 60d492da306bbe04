//! Supervisory control testbed for a heat-pump heated house.
//!
//! The crate is organized around a lumped 2R1C thermal model shared by every
//! component:
//!
//! - [`thermal`] — the 2R1C zone model, COP curve, and exact zero-order-hold
//!   discretization used for prediction.
//! - [`solver`] — a finite-horizon box-constrained LQR solver with analytic
//!   parameter gradients obtained by implicit differentiation of the KKT
//!   optimality conditions. This is the learnable control policy.
//! - [`lp`] — a small dense two-phase simplex used by the economic MPC.
//! - [`controllers`] — the supervisory controllers: a constant-setpoint
//!   baseline, an economic MPC with multi-step system identification, and a
//!   learning controller that pre-trains by imitation and keeps adapting its
//!   model and cost parameters online.
//! - [`plant`] — the simulated house: a perturbed 2R1C plant integrated at
//!   sub-hourly resolution behind a hysteretic two-stage thermostat, weather
//!   traces, fault injection, and the hourly interaction loop.
//! - [`analysis`] — day filtering, COP-corrected energy-signature fits,
//!   area-under-curve savings with Monte-Carlo confidence intervals, and
//!   PMV/PPD comfort statistics.
//! - [`experiment`] — experiment configuration, checkpoints, manifests, and
//!   the end-to-end commands that the CLI wraps.

pub mod analysis;
pub mod controllers;
pub mod experiment;
pub mod lp;
pub mod plant;
pub mod solver;
pub mod thermal;
