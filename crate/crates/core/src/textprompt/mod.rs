//! Text in-context-learning datasets and the `Input:` / `Label:` prompt
//! format.
//!
//! A context of `(text, label)` pairs renders as
//!
//! ```text
//! Input: {text}
//! Label: {label}
//!
//! ```
//!
//! per example, followed by `Input: {query}\nLabel:` for the test query.

mod dataset;
mod template;

pub use dataset::{
    balanced_sample, filter_by_length, load_dataset, relabel, DatasetError, DatasetFormat,
    LabeledTextDataset, LengthMode, TextRecord,
};
pub use template::{format_context, format_prompt, parse_generated_pairs, parse_prompt, PromptError, PromptTemplate};
