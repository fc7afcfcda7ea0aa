//! The user guide, kept honest: every chapter of the book under `book/` is
//! included here verbatim, so its code blocks compile and run as doc-tests.
//! `cargo test --doc` is the drift check between the prose and the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/storage-tiers.md")]
pub mod storage_tiers {}

#[doc = include_str!("../../../book/src/backends.md")]
pub mod backends {}

#[doc = include_str!("../../../book/src/metadata.md")]
pub mod metadata {}

#[doc = include_str!("../../../book/src/ingest.md")]
pub mod ingest {}

#[doc = include_str!("../../../book/src/prefetching.md")]
pub mod prefetching {}

#[doc = include_str!("../../../book/src/sampling.md")]
pub mod sampling {}

#[doc = include_str!("../../../book/src/workloads.md")]
pub mod workloads {}
