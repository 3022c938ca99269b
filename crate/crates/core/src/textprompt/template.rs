use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ContextDataset, ExamplePair};

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("unparseable generation: no well-formed Input/Label pair")]
    UnparseableGeneration,
}

/// Delimiters of the prompt format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptTemplate {
    pub input_prefix: String,
    pub label_prefix: String,
    /// Ends every rendered example.
    pub pair_separator: String,
    /// Follows the test query.
    pub query_label_lead: String,
    /// Append a single space after `query_label_lead`.
    pub trailing_space: bool,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            input_prefix: "Input: ".into(),
            label_prefix: "Label: ".into(),
            pair_separator: "\n\n".into(),
            query_label_lead: "\nLabel:".into(),
            trailing_space: false,
        }
    }
}

impl PromptTemplate {
    /// `input_prefix` without trailing whitespace; used to open a generation.
    pub fn input_marker(&self) -> &str {
        self.input_prefix.trim_end()
    }

    fn label_marker(&self) -> &str {
        self.label_prefix.trim_end()
    }
}

/// Renders the examples only.
pub fn format_context(template: &PromptTemplate, context: &ContextDataset<String, String>) -> String {
    let mut out = String::new();
    for pair in context {
        out.push_str(&template.input_prefix);
        out.push_str(&pair.query);
        out.push('\n');
        out.push_str(&template.label_prefix);
        out.push_str(&pair.response);
        out.push_str(&template.pair_separator);
    }
    out
}

/// Renders the examples followed by the test query.
pub fn format_prompt(
    template: &PromptTemplate,
    context: &ContextDataset<String, String>,
    query: &str,
) -> String {
    let mut out = format_context(template, context);
    out.push_str(&template.input_prefix);
    out.push_str(query);
    out.push_str(&template.query_label_lead);
    if template.trailing_space {
        out.push(' ');
    }
    out
}

/// Inverse of [`format_prompt`] for fields that contain no delimiter
/// substrings or newlines.
pub fn parse_prompt(
    template: &PromptTemplate,
    text: &str,
) -> Option<(ContextDataset<String, String>, String)> {
    let mut rest = text;
    let mut context = ContextDataset::new();
    loop {
        rest = rest.strip_prefix(template.input_prefix.as_str())?;
        let mut lead = template.query_label_lead.clone();
        if template.trailing_space {
            lead.push(' ');
        }
        if let Some(query) = rest.strip_suffix(lead.as_str()) {
            if !query.contains('\n') {
                return Some((context, query.to_string()));
            }
        }
        let (query, after) = rest.split_once('\n')?;
        let after = after.strip_prefix(template.label_prefix.as_str())?;
        let (label, after) = after.split_once(template.pair_separator.as_str())?;
        context.push(ExamplePair::new(query.to_string(), label.to_string()));
        rest = after;
    }
}

/// Extracts complete `Input: …\nLabel: …\n` blocks from generated text.
///
/// Queries may span lines; a label runs to the end of its line and counts
/// only when that line is newline-terminated, so a block cut off by the
/// token limit is dropped. Blocks with an empty query or label are skipped.
pub fn parse_generated_pairs(
    template: &PromptTemplate,
    text: &str,
) -> Result<Vec<ExamplePair<String, String>>, PromptError> {
    let input = template.input_marker();
    let label_lead = format!("\n{}", template.label_marker());
    let mut pairs = Vec::new();
    let mut cursor = 0;
    while let Some(found) = text[cursor..].find(input) {
        let start = cursor + found + input.len();
        let Some(label_at) = text[start..].find(&label_lead).map(|i| start + i) else {
            break;
        };
        // Another Input marker before the label means this block is malformed.
        if let Some(next_input) = text[start..label_at].find(input) {
            cursor = start + next_input;
            continue;
        }
        let label_start = label_at + label_lead.len();
        let Some(eol) = text[label_start..].find('\n').map(|i| label_start + i) else {
            break;
        };
        let query = strip_one_space(&text[start..label_at]).trim_end_matches('\r');
        let label = strip_one_space(&text[label_start..eol]).trim_end();
        if !query.trim().is_empty() && !label.is_empty() {
            pairs.push(ExamplePair::new(query.to_string(), label.to_string()));
        }
        cursor = eol;
    }
    if pairs.is_empty() {
        Err(PromptError::UnparseableGeneration)
    } else {
        Ok(pairs)
    }
}

fn strip_one_space(s: &str) -> &str {
    s.strip_prefix(' ').unwrap_or(s)
}
