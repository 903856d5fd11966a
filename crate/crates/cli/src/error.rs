use serde::Serialize;

/// One-based line and column in a source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl Location {
    pub fn of(source: &str, offset: usize) -> Self {
        let before = &source[..offset.min(source.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        Self { line, column }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    /// Unreadable or invalid input; exit code 2.
    Input,
    /// Singular exact system; exit code 3.
    Singular,
    /// Anything else; exit code 1.
    Runtime,
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<Location>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suggested_grid: Option<usize>,
}

impl CliError {
    fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            file: None,
            field: None,
            location: None,
            suggested_grid: None,
        }
    }

    pub fn parse(message: impl Into<String>, field: Option<String>, location: Option<Location>) -> Self {
        Self {
            field,
            location,
            ..Self::new(ErrorKind::Input, message)
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Input, message)
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Runtime, message)
    }

    pub fn in_file(mut self, file: &str) -> Self {
        self.file.get_or_insert_with(|| file.to_string());
        self
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Input => 2,
            ErrorKind::Singular => 3,
            ErrorKind::Runtime => 1,
        }
    }
}

impl From<varspline::Error> for CliError {
    fn from(e: varspline::Error) -> Self {
        use varspline::Error as E;
        let kind = match &e {
            E::SingularSystem { .. } => ErrorKind::Singular,
            E::PoleProximity { .. } => ErrorKind::Runtime,
            _ => ErrorKind::Input,
        };
        let mut out = Self::new(kind, e.to_string());
        if let E::KnotOffGrid { suggested, .. } = e {
            out.suggested_grid = suggested;
        }
        out
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::runtime(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(file) = &self.file {
            write!(f, "{file}")?;
            if let Some(l) = self.location {
                write!(f, ":{}:{}", l.line, l.column)?;
            }
            write!(f, ": ")?;
        }
        if let Some(field) = &self.field {
            write!(f, "{field}: ")?;
        }
        write!(f, "{}", self.message)?;
        if let Some(m) = self.suggested_grid {
            if !self.message.contains("try M") {
                write!(f, " (try --grid {m})")?;
            }
        }
        Ok(())
    }
}
