//! Toolkit for building and evaluating natural-language-to-Bash datasets.

pub mod bash_ast;
pub mod syntax_kb;
pub mod generator;
pub mod validator;
pub mod scaler;
pub mod metrics;
pub mod nl_prep;
pub mod dataset_io;
pub mod llm_bridge;
