//! Two-way to one-way transducer definability workbench.

pub mod automata;
pub mod cli;
pub mod definability;
pub mod error;
pub mod fixtures;
pub mod implicit;
pub mod machines;
pub mod oracle;
pub mod par;
pub mod random;
pub mod runs;
pub mod words;
pub mod zmotion;

pub use error::{Error, Result};
