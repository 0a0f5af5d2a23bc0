//! Uniform access to text-generation backends.

mod backend;
mod gateway;
pub mod parse;
mod templates;

#[cfg(feature = "http")]
pub use backend::HttpBackend;
pub use backend::{Backend, Decode, GenerationRequest, Script, ScriptEntry, ScriptedBackend};
pub use gateway::{fields, Gateway, GenerationResponse, DEFAULT_RETRIES};
pub use templates::{render, PromptTemplate, TemplateId, TemplateSet};
