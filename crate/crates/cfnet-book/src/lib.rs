//! The guide in `book/`, compiled so its snippets run under `cargo test`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/characteristic-functions.md")]
pub mod characteristic_functions {}

#[doc = include_str!("../../../book/src/network.md")]
pub mod network {}

#[doc = include_str!("../../../book/src/sampling.md")]
pub mod sampling {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/pricing.md")]
pub mod pricing {}

#[doc = include_str!("../../../book/src/cos.md")]
pub mod cos {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
