//! Guide chapters, compiled so their snippets run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/probabilities.md")]
pub mod probabilities {}

#[doc = include_str!("../../../book/src/channel.md")]
pub mod channel {}

#[doc = include_str!("../../../book/src/divergence.md")]
pub mod divergence {}

#[doc = include_str!("../../../book/src/quadrature.md")]
pub mod quadrature {}

#[doc = include_str!("../../../book/src/searches.md")]
pub mod searches {}

#[doc = include_str!("../../../book/src/optimality.md")]
pub mod optimality {}

#[doc = include_str!("../../../book/src/capacity.md")]
pub mod capacity {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}
