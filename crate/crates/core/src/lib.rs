//! Conjunctive synthesis of input signals for black-box dynamical systems.
//!
//! A requirement is an STL conjunction `phi_1 /\ ... /\ phi_m`. The search
//! looks for a piecewise-constant input whose simulated output satisfies every
//! conjunct with positive robustness. Two drivers are provided: plain CMA-ES
//! on the min-aggregated robustness, and CMA-ES whose selection step ranks
//! individuals with multiple constraint ranking (one conjunct as objective,
//! the others as constraints).

pub mod stl;
pub mod campaign;
pub mod cmaes;
pub mod config;
pub mod mcr;
pub mod models;
pub mod signals;
pub mod synthesis;
