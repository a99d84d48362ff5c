//! Numéraire-invariant preferences on finite spaces and event trees.

pub mod choice;
pub mod counterexamples;
pub mod decomposition;
pub mod error;
pub mod market;
pub mod mc;
pub mod preference;
pub mod runner;
pub mod space;
pub mod tree;

pub use error::{Error, Result};
pub use preference::{prefers, rel, Preference};
pub use space::{safe_div, FiniteSpace, Outcome, RelValue};
