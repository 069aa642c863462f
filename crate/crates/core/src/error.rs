use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("orbit left the representable range at step {step}; escape radius misconfigured?")]
    Overflow { step: usize },
    #[error("no convergence: {0}")]
    Convergence(String),
    #[error("bracket [{lo}, {hi}] does not contain a sign change")]
    Bracket { lo: f64, hi: f64 },
    #[error("singular linear system in {0}")]
    Singular(&'static str),
    #[error("argument outside the admissible domain: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("critical orbit escapes at iterate {iterate}; parameter is not renormalizable to the requested depth")]
    NonRenormalizable { iterate: u64 },
    #[error("closest return at level {level} has modulus {modulus:e}; the scale is degenerate")]
    DegenerateScale { level: usize, modulus: f64 },
    #[error("sample count must be positive")]
    EmptySample,
    #[error("reference area estimate is zero at level {level}")]
    DegenerateArea { level: usize },
    #[error("no qualifying orbit was sampled for {0}")]
    NoEvent(&'static str),
    #[error("derivative vanishes along the preimage tree (point on the critical orbit)")]
    SingularPoint,
    #[error("all grid points were undecided")]
    Inconclusive,
    #[error("the critical point is periodic; the preimage tree of 0 degenerates")]
    DegenerateCriticalOrbit,
    #[error("the cut-off measure has no atoms")]
    EmptyMeasure,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("missing level pair: {0}")]
    Pair(String),
    #[error("window contains no boundary cells")]
    EmptySet,
    #[error("only {usable} usable data points, need at least {needed}")]
    InsufficientData { usable: usize, needed: usize },
    #[error("combinatorics break at level {level}: {reason}")]
    Combinatorics { level: usize, reason: String },
}
