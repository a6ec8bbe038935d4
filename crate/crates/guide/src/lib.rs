//! The agentprobe guide. Each module holds one chapter of `book/`, so every
//! snippet in the book runs as a doctest against the current library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/specification.md")]
pub mod specification {}

#[doc = include_str!("../../../book/src/tools.md")]
pub mod tools {}

#[doc = include_str!("../../../book/src/environment.md")]
pub mod environment {}

#[doc = include_str!("../../../book/src/screen.md")]
pub mod screen {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}

#[doc = include_str!("../../../book/src/suites.md")]
pub mod suites {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}
