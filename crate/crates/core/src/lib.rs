//! Group-sequential trial design and the efficiency lost to delayed outcomes.

pub mod boundaries;
pub mod delay;
pub mod design;
pub mod error;
pub mod mc;
pub mod normal;
pub mod recruitment;
pub mod report;
pub mod sequential;

pub use error::{Error, Result};
