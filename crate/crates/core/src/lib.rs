//! Email zoning: split emails into lines, encode each line, and label every
//! line with a functional zone using a BiLSTM + CRF sequence labeler.

pub mod corpus;
pub mod email;
pub mod encoder;
pub mod metrics;
pub mod protocol;
pub mod seqlab;
pub mod taxonomy;

mod io_util;

pub use io_util::write_atomic;
