use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymbolError {
    #[error("unsupported dimension {0} (expected 2 or 3)")]
    Dimension(usize),
    #[error("malformed multiindex: {0}")]
    MultiIndex(String),
    #[error("E channel must be at least 1, got {0}")]
    Channel(u8),
    #[error("cutoff {0} lies below the homogeneity of Xi; the table would be empty")]
    EmptyTable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at position {pos}: {msg}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    Arity,
    UnknownVariable,
    Degree,
    Structure,
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::Arity => "arity error",
            ParseErrorKind::UnknownVariable => "unknown variable",
            ParseErrorKind::Degree => "unsupported degree",
            ParseErrorKind::Structure => "structural error",
        })
    }
}

impl ParseError {
    pub fn new(kind: ParseErrorKind, pos: usize, msg: impl Into<String>) -> Self {
        ParseError { kind, pos, msg: msg.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HopfError {
    #[error("group element has no value for generator {0}")]
    MissingGenerator(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenormError {
    #[error("unsupported pattern: {0}")]
    UnsupportedPattern(String),
    #[error("{0} is not a generator of the renormalisation subgroup")]
    NotAGenerator(String),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("quadrature did not reach tolerance {tol:e} (estimate {estimate}, error {error:e})")]
    Tolerance { tol: f64, estimate: f64, error: f64 },
    #[error("moment solve residual {residual:e} above tolerance {tol:e}")]
    Construction { residual: f64, tol: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoiseError {
    #[error("epsilon {eps} below the resolution guard 2*dx = {guard}")]
    Resolution { eps: f64, guard: f64 },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("field io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}
