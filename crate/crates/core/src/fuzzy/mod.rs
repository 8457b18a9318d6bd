//! Membership functions, linguistic variables and single-unit
//! Takagi-Sugeno inference.
//!
//! A [`FuzzyLogicUnit`] is immutable once built and may be shared across
//! threads; training works on private copies.

mod membership;
mod unit;
mod variable;

pub use membership::{membership_degree, MembershipFunction, MfKind};
pub use unit::{fire_strength, flat_rule_count, FuzzyLogicUnit, TskRule};
pub use variable::{grid_partition, Interval, LinguisticVariable};
