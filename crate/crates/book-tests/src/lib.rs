//! Compiles and runs the code blocks of the guide under `book/src` as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/crt.md")]
pub mod crt {}

#[doc = include_str!("../../../book/src/context-constrain.md")]
pub mod context_constrain {}

#[doc = include_str!("../../../book/src/clips.md")]
pub mod clips {}

#[doc = include_str!("../../../book/src/embeddings.md")]
pub mod embeddings {}

#[doc = include_str!("../../../book/src/knn.md")]
pub mod knn {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../book/src/formats.md")]
pub mod formats {}
