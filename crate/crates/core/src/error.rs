use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single bad line in a text input, with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineIssue {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for LineIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

fn join_issues(issues: &[LineIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {}", join_issues(.issues))]
    Parse {
        context: String,
        issues: Vec<LineIssue>,
    },
    #[error("invalid label set: {0}")]
    LabelSet(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("unknown record id `{0}`")]
    UnknownId(String),
    #[error("{0}")]
    EmptyInput(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("split ratios must be positive and sum to 1 (got {0:?})")]
    Ratios([f64; 3]),
    #[error("class `{0}` has no labeled records")]
    EmptyClass(String),
    #[error("records missing from the {block} block: {}", .ids.join(", "))]
    Coverage { block: String, ids: Vec<String> },
    #[error("feature layout mismatch: {0}")]
    Layout(String),
    #[error("non-finite training loss at iteration {0}")]
    NonFiniteLoss(usize),
    #[error("image `{id}`: {message}")]
    Image { id: String, message: String },
    #[error("unsatisfiable schedule: {0}")]
    Schedule(String),
    #[error("{0}")]
    Range(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, issues: Vec<LineIssue>) -> Self {
        Error::Parse {
            context: context.into(),
            issues,
        }
    }

    pub(crate) fn parse_line(
        context: impl Into<String>,
        line: usize,
        message: impl Into<String>,
    ) -> Self {
        Self::parse(
            context,
            vec![LineIssue {
                line,
                message: message.into(),
            }],
        )
    }

    /// True for errors caused by bad inputs or configuration rather than by
    /// the environment or a numerical failure during a run.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io { .. } | Error::NonFiniteLoss(_) | Error::Image { .. }
        )
    }
}
