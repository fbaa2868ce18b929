//! Discontinuous constituency parsing through augmented non-projective
//! dependency trees.
//!
//! A head-annotated, unaryless constituent tree is reduced to one labelled
//! arc per word (`X#p`: non-terminal plus attachment order on the head's
//! spine). A pointer network with a biaffine labeler predicts these trees
//! left to right, and the reduction is reversed to recover the
//! (possibly discontinuous) constituents.

pub mod autodiff;
pub mod decoding;
pub mod encoding;
mod error;
pub mod evaluation;
pub mod model;
pub mod training;
pub mod trees;

pub use error::{Error, Result};
