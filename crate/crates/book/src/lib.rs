//! Compiles and runs every listing of the guide in `book/src` as a doctest.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/distances.md")]
pub mod distances {}
#[doc = include_str!("../../../book/src/trend-filtering.md")]
pub mod trend_filtering {}
#[doc = include_str!("../../../book/src/outliers.md")]
pub mod outliers {}
#[doc = include_str!("../../../book/src/periodicity.md")]
pub mod periodicity {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}
