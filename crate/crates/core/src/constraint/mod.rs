//! Symmetry-constraint generation through a language-model backend.

pub mod backend;
pub mod dataset;
pub mod generate;
pub mod parse;
pub mod prompt;
pub mod request;

pub use backend::{Backend, BackendConfig, HttpBackend, MockBackend};
pub use dataset::{emit_instruction_dataset, GoldExample, InstructionRecord};
pub use generate::{composition_ratio, generate_constraints, ConstraintResult, GenerationConfig, Transcript};
pub use parse::{format_space_group_answer, format_wyckoff_answer, parse_space_group_response, parse_wyckoff_response};
pub use prompt::{
    candidate_wyckoff_letters, render_space_group_prompt, render_wyckoff_prompt, standardize_property, PromptMode,
    PromptTemplate, RenderedPrompt,
};
pub use request::{Composition, ConstraintRequest};
