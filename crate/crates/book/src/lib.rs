//! The guide in `book/src`, compiled as doc-tests so its snippets cannot
//! drift from the library. One module per chapter, so a failing test names
//! the chapter it came from.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/angles.md")]
pub mod angles {}
#[doc = include_str!("../../../book/src/directions.md")]
pub mod directions {}
#[doc = include_str!("../../../book/src/speed-quantiles.md")]
pub mod speed_quantiles {}
#[doc = include_str!("../../../book/src/weibull.md")]
pub mod weibull {}
#[doc = include_str!("../../../book/src/bootstrap.md")]
pub mod bootstrap {}
#[doc = include_str!("../../../book/src/variability.md")]
pub mod variability {}
#[doc = include_str!("../../../book/src/data.md")]
pub mod data {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}
