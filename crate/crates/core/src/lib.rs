pub mod baselines;
pub mod consolidate;
pub mod corpus;
pub mod diversify;
pub mod embed;
pub mod error;
pub mod eval;
pub mod ledger;
pub mod llm;
#[cfg(feature = "service")]
pub mod orchestrator;
pub mod retrieval;
pub mod text;

pub use error::{Error, Result};
