//! Exact counting machinery for representations of binary by quaternary quadratic forms.

pub mod correlation;
pub mod curvecount;
pub mod error;
pub mod exactmath;
pub mod forms;
pub mod genus;
pub mod reps;
pub mod svariety;

pub use error::{Error, Result};
