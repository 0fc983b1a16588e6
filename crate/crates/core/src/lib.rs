//! Mod-p Breuil-Kisin modules of E-height at most one over `F_q[[u]]`.
//!
//! The crate is `no_std` (with `alloc`). It provides exact arithmetic over
//! finite fields and truncated power series, semilinear matrix algebra,
//! the level-one canonical subgroup solver, and enumeration of the points
//! of the associated characteristic-`p` group schemes as Puiseux series,
//! together with the ramification and pairing data derived from them.
//!
//! Every value carries an explicit precision. Operations that cannot
//! certify their result at the available precision return
//! [`Error::PrecisionExhausted`] instead of truncating silently.

#![no_std]

extern crate alloc;

pub mod additive;
pub mod cansub;
pub mod error;
pub mod field;
pub mod generate;
pub mod kisin;
pub mod matrix;
pub mod points;
pub mod poly;
pub mod puiseux;
pub mod rational;
pub mod series;
pub mod verify;

pub use cansub::{duality_check, quotient_presentation, solve_canonical, verify_frobenius_kernel, CanSubResult};
pub use error::{Error, Result};
pub use field::{Fe, Field, FieldRegistry};
pub use generate::{gen_bt1, GenSpec};
pub use kisin::{AdaptedPresentation, KisinModule};
pub use matrix::{SeriesMatrix, SmithForm};
pub use points::{enumerate_points, PointOptions, PointSet, RamificationReport};
pub use puiseux::PuiseuxSeries;
pub use rational::Q;
pub use series::TruncSeries;
pub use verify::{verify_instance, verify_with_result, ClauseResult, SampleGrid, VerifyReport};
