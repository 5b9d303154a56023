//! Executable higher-dimensional category theory at desk scale.
//!
//! Everything here works on finite sets, or on size-bounded windows onto
//! infinite ones. Law checks enumerate exhaustively inside their window, so a
//! pass is evidence and a failure comes with a concrete witness.

pub mod batanin;
pub mod error;
pub mod exec;
pub mod finbase;
pub mod freealg;
pub mod monadkit;
pub mod multicat;
pub mod opetopia;
pub mod render;
pub mod report;

pub use error::{Error, Result};
pub use exec::Exec;
pub use report::Report;
