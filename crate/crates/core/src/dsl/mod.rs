//! Textual `.scd` format for [`SystemModel`]s.
//!
//! ```text
//! model      := chart+
//! chart      := "statechart" IDENT "{" "initial" IDENT state* "}"
//! state      := "state" IDENT ("{" transition* "}")?
//! transition := "on" IDENT guard? emits? "->" IDENT
//! guard      := "[" atom ("&&" atom)* "]"
//! atom       := IDENT OP literal | "in" "(" IDENT "." IDENT ")"
//! emits      := "/" "emit" IDENT args? ("," "emit" IDENT args?)*
//! args       := "(" IDENT "=" (literal | "$" IDENT) ("," IDENT "=" ...)* ")"
//! literal    := "true" | "false" | INTEGER
//! ```
//!
//! `#` starts a line comment. Keywords are reserved and cannot be used as
//! identifiers.

mod check;
mod lexer;
mod parser;
mod pretty;

use std::fmt;

use crate::chart::SystemModel;

use check::check;
pub use pretty::{pretty_print, pretty_print_with_spans};

/// Byte range into the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
}

impl SourceSpan {
    pub fn new(start: usize, end: usize) -> Self {
        SourceSpan { start, end }
    }

    pub fn join(self, other: SourceSpan) -> Self {
        SourceSpan::new(self.start.min(other.start), self.end.max(other.end))
    }

    pub fn contains(&self, offset: usize) -> bool {
        self.start <= offset && offset <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    /// 1-based.
    pub line: usize,
    /// 1-based, counted in characters.
    pub column: usize,
    pub code: &'static str,
    pub message: String,
    pub span: SourceSpan,
}

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}[{}] {}:{}: {}", self.code, self.line, self.column, self.message)
    }
}

/// Maps byte offsets to 1-based line/column.
pub(crate) struct LineIndex<'a> {
    src: &'a str,
    starts: Vec<usize>,
}

impl<'a> LineIndex<'a> {
    pub(crate) fn new(src: &'a str) -> Self {
        let mut starts = vec![0];
        starts.extend(src.match_indices('\n').map(|(i, _)| i + 1));
        LineIndex { src, starts }
    }

    pub(crate) fn position(&self, offset: usize) -> (usize, usize) {
        let offset = offset.min(self.src.len());
        let line = self.starts.partition_point(|&s| s <= offset) - 1;
        let start = self.starts[line];
        let column = self.src.get(start..offset).map_or(offset - start, |s| s.chars().count()) + 1;
        (line + 1, column)
    }

    pub(crate) fn diagnostic(
        &self,
        severity: Severity,
        code: &'static str,
        span: SourceSpan,
        message: String,
    ) -> Diagnostic {
        let (line, column) = self.position(span.start);
        Diagnostic {
            severity,
            line,
            column,
            code,
            message,
            span,
        }
    }
}

/// Source positions for every parsed element, indexed like the model.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelSpans {
    pub charts: Vec<ChartSpans>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChartSpans {
    pub whole: SourceSpan,
    pub name: SourceSpan,
    pub initial: SourceSpan,
    pub states: Vec<StateSpans>,
    /// Parallel to `StateChart::transitions`.
    pub transitions: Vec<TransitionSpans>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StateSpans {
    pub whole: SourceSpan,
    pub name: SourceSpan,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitionSpans {
    pub whole: SourceSpan,
    pub event: SourceSpan,
    pub target: SourceSpan,
    pub atoms: Vec<SourceSpan>,
    pub emits: Vec<EmitSpans>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmitSpans {
    pub whole: SourceSpan,
    pub args: Vec<SourceSpan>,
}

/// Parse result keeping warnings and spans alongside the model.
#[derive(Debug, Clone)]
pub struct Parsed {
    /// `None` when any error diagnostic was produced.
    pub model: Option<SystemModel>,
    pub spans: ModelSpans,
    pub diagnostics: Vec<Diagnostic>,
}

/// Parses and checks `text`, returning every diagnostic.
pub fn parse(text: &str) -> Parsed {
    let index = LineIndex::new(text);
    match parser::parse_structure(text) {
        Err(err) => Parsed {
            model: None,
            spans: ModelSpans::default(),
            diagnostics: vec![index.diagnostic(Severity::Error, err.code, err.span, err.message)],
        },
        Ok((model, spans)) => {
            let diagnostics = check(&model, &spans, &index);
            let ok = !diagnostics.iter().any(Diagnostic::is_error);
            Parsed {
                model: ok.then_some(model),
                spans,
                diagnostics,
            }
        }
    }
}

/// Parses `text` into a model; warnings are dropped on success.
pub fn parse_model(text: &str) -> Result<SystemModel, Vec<Diagnostic>> {
    let parsed = parse(text);
    match parsed.model {
        Some(m) => Ok(m),
        None => Err(parsed.diagnostics),
    }
}

/// Diagnoses an in-memory model. Positions refer to the model's canonical
/// rendering from [`pretty_print`].
pub fn validate(model: &SystemModel) -> Vec<Diagnostic> {
    let (text, spans) = pretty_print_with_spans(model);
    check(model, &spans, &LineIndex::new(&text))
}
