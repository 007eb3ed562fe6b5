//! Independent oracles shared by the integration and acceptance suites.
//!
//! Nothing here calls into the code path it checks: finite differences use
//! the inference forward pass, pair counting recounts from scratch every
//! step, and beam results are compared against exhaustive enumeration.

#![allow(dead_code)]

pub mod bpe_oracle;
pub mod desk;
pub mod enumerate;
pub mod finite_diff;
pub mod fixtures;
