//! The instruction prompt sent to a generative teacher and the parser for
//! its completions.
//!
//! Rendered layout (no trailing newline):
//!
//! ```text
//! User: After reading the essay, assign a holistic score based on the rubric below. For the following evaluations you will need to use a grading scale between 1 (minimum) and 6 (maximum).
//!
//! {essay}
//!
//! {rubric}
//!
//! Assistant:
//! - Score:
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ScoreLabel;
use crate::{Error, Result};

pub const SCORE_MARKER: &str = "Score:";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub user_label: &'static str,
    pub instruction: &'static str,
    pub assistant_label: &'static str,
    pub stub: &'static str,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            user_label: "User:",
            instruction: "After reading the essay, assign a holistic score based on the rubric below. \
                          For the following evaluations you will need to use a grading scale between \
                          {lo} (minimum) and {hi} (maximum).",
            assistant_label: "Assistant:",
            stub: "- Score:",
        }
    }
}

impl PromptTemplate {
    pub fn render(&self, essay: &str, rubric: &str, lo: u8, hi: u8) -> Result<String> {
        if rubric.trim().is_empty() {
            return Err(Error::InvalidInput("rubric text is empty".into()));
        }
        if lo >= hi {
            return Err(Error::InvalidInput(format!("bad score range {lo}..={hi}")));
        }
        let instruction = self
            .instruction
            .replace("{lo}", &lo.to_string())
            .replace("{hi}", &hi.to_string());
        Ok(format!(
            "{} {instruction}\n\n{essay}\n\n{rubric}\n\n{}\n{}",
            self.user_label, self.assistant_label, self.stub
        ))
    }
}

/// Render the default template.
pub fn render_prompt(essay: &str, rubric: &str, lo: u8, hi: u8) -> Result<String> {
    PromptTemplate::default().render(essay, rubric, lo, hi)
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ParseError {
    #[error("no `Score:` marker in completion")]
    NoMarker,
    #[error("no integer after the score marker (found `{0}`)")]
    NotInteger(String),
    #[error("score {0} outside {1}..={2}")]
    OutOfRange(i64, u8, u8),
}

/// Read the integer after the first `Score:` marker. Whitespace and
/// decoration such as `*`, `"` or `[` may sit between marker and number.
pub fn parse_score(completion: &str, lo: u8, hi: u8) -> Result<ScoreLabel, ParseError> {
    let at = completion.find(SCORE_MARKER).ok_or(ParseError::NoMarker)?;
    let rest = completion[at + SCORE_MARKER.len()..]
        .trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '_' | '"' | '\'' | '[' | '(' | '`' | ':'));
    let (sign, digits_from) = match rest.chars().next() {
        Some('-') => (-1i64, 1),
        Some('+') => (1, 1),
        _ => (1, 0),
    };
    let body = &rest[digits_from..];
    let digits: &str = &body[..body.find(|c: char| !c.is_ascii_digit()).unwrap_or(body.len())];
    let snippet: String = rest.chars().take(12).collect();
    if digits.is_empty() {
        return Err(ParseError::NotInteger(snippet));
    }
    // "4.5" is not an integer score
    let after = &body[digits.len()..];
    if after.starts_with('.') && after[1..].starts_with(|c: char| c.is_ascii_digit()) {
        return Err(ParseError::NotInteger(snippet));
    }
    let value = digits
        .parse::<i64>()
        .map(|v| sign * v)
        .map_err(|_| ParseError::NotInteger(snippet))?;
    if value < lo as i64 || value > hi as i64 {
        return Err(ParseError::OutOfRange(value, lo, hi));
    }
    ScoreLabel::new(value).map_err(|_| ParseError::OutOfRange(value, lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let p = render_prompt("E", "R", 1, 6).unwrap();
        assert_eq!(
            p,
            "User: After reading the essay, assign a holistic score based on the rubric below. \
             For the following evaluations you will need to use a grading scale between 1 (minimum) \
             and 6 (maximum).\n\nE\n\nR\n\nAssistant:\n- Score:"
        );
        assert!(p.find('E').unwrap() < p.rfind('R').unwrap());
        assert!(p.ends_with("- Score:"));
        assert_eq!(p.matches("- Score:").count(), 1);
        assert_eq!(render_prompt("E", "R", 1, 6).unwrap(), p);
    }

    #[test]
    fn empty_rubric_rejected() {
        assert!(render_prompt("E", "", 1, 6).is_err());
        assert!(render_prompt("E", "  \n", 1, 6).is_err());
    }

    #[test]
    fn parsing() {
        assert_eq!(parse_score("- Score: 4", 1, 6).unwrap().get(), 4);
        assert_eq!(parse_score("Sure! - Score: 6\nExplanation: Score: 2", 1, 6).unwrap().get(), 6);
        assert_eq!(parse_score("**Score:** 3.", 1, 6).unwrap().get(), 3);
        assert_eq!(parse_score("Score:5", 1, 6).unwrap().get(), 5);
        assert!(matches!(parse_score("- Score: nine", 1, 6), Err(ParseError::NotInteger(_))));
        assert!(matches!(parse_score("I give it a 4", 1, 6), Err(ParseError::NoMarker)));
        assert_eq!(parse_score("- Score: 0", 1, 6), Err(ParseError::OutOfRange(0, 1, 6)));
        assert_eq!(parse_score("- Score: 7", 1, 6), Err(ParseError::OutOfRange(7, 1, 6)));
        assert_eq!(parse_score("- Score: -2", 1, 6), Err(ParseError::OutOfRange(-2, 1, 6)));
        assert!(matches!(parse_score("- Score: 4.5", 1, 6), Err(ParseError::NotInteger(_))));
    }

    #[test]
    fn prompt_parse_round_trip() {
        for k in 1..=6 {
            let p = render_prompt("an essay", "a rubric", 1, 6).unwrap();
            assert_eq!(parse_score(&format!("{p} {k}"), 1, 6).unwrap().get(), k);
        }
    }
}
