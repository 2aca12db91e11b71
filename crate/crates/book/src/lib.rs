//! Compiles the guide's code listings as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}

#[doc = include_str!("../../../book/src/reflection.md")]
pub mod reflection {}

#[doc = include_str!("../../../book/src/hjb.md")]
pub mod hjb {}

#[doc = include_str!("../../../book/src/cost-to-come.md")]
pub mod cost_to_come {}

#[doc = include_str!("../../../book/src/filtering.md")]
pub mod filtering {}

#[doc = include_str!("../../../book/src/boundary.md")]
pub mod boundary {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
