//! Text front end: expression and operator grammars, `.ctx` context files,
//! and printers.

mod ctxfile;
mod expr;
mod lexer;
mod operator;
mod print;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use ctxfile::{parse_context, print_context};
pub use expr::{parse_expr, parse_expr_lenient, parse_expr_with, RESERVED};
pub use operator::parse_operator;
pub use print::{expr_json, print_expr, print_latex, print_text, Format};

pub(crate) use expr::parse_expr_at;

/// Byte range `[start, end)` into the parsed input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
}

impl SourceSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        SourceSpan { start, end }
    }

    pub fn join(self, other: SourceSpan) -> SourceSpan {
        SourceSpan::new(self.start.min(other.start), self.end.max(other.end))
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorKind {
    Lexical,
    Syntax,
    UnknownIdentifier,
    Arity,
    /// A derivative variable that the function or context does not have.
    UnknownVariable,
    /// Well-formed text that denotes an invalid object.
    Invalid,
}

impl ParseErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseErrorKind::Lexical => "lexical error",
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::UnknownIdentifier => "unknown identifier",
            ParseErrorKind::Arity => "arity mismatch",
            ParseErrorKind::UnknownVariable => "unknown variable",
            ParseErrorKind::Invalid => "invalid input",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{} at {span}: {message}", kind.as_str())]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub span: SourceSpan,
    pub message: String,
}

impl ParseError {
    pub fn new(kind: ParseErrorKind, span: SourceSpan, message: impl Into<String>) -> Self {
        ParseError { kind, span, message: message.into() }
    }

    /// The error followed by the offending line with a caret underline.
    pub fn render(&self, src: &str) -> String {
        let start = self.span.start.min(src.len());
        let line_start = src[..start].rfind('\n').map_or(0, |i| i + 1);
        let line_end = src[start..].find('\n').map_or(src.len(), |i| start + i);
        let line = src[line_start..line_end].trim_end_matches('\r');
        let line_no = src[..line_start].matches('\n').count() + 1;
        let col = src[line_start..start].chars().count();
        let width = src[start..self.span.end.min(line_end).max(start)].chars().count().max(1);
        format!(
            "{self}\n{line_no:>4} | {line}\n     | {}{}",
            " ".repeat(col),
            "^".repeat(width)
        )
    }
}
