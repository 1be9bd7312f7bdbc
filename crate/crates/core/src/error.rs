use thiserror::Error;

pub type Result<T, E = CorefError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CorefError {
    #[error("templates {0} and {1} are incompatible and cannot be unified")]
    IncompatibleTemplates(String, String),

    #[error("invalid configuration for set {set}: {reason}")]
    InvalidConfiguration { set: String, reason: String },

    #[error("validation failed for set {set}: {rule}")]
    Validation { set: String, rule: String },

    #[error("template {later} does not follow {earlier} in text order")]
    OrderViolation { earlier: String, later: String },

    #[error("no key for coreference set {0}")]
    MissingKey(String),

    #[error("invalid key for set {set}: {reason}")]
    InvalidKey { set: String, reason: String },

    #[error("missing pairwise probability for ({s}, {t}) in set {set}")]
    MissingPair { set: String, s: String, t: String },

    #[error("degenerate feature {feature}: {reason}")]
    DegenerateFeature { feature: String, reason: String },

    #[error("iterative scaling did not converge after {iters} iterations (max residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("set of {n} templates exceeds the enumeration cap of {cap}; enable pruning")]
    SetTooLarge { n: usize, cap: usize },

    #[error("smoothing threshold {epsilon} prunes every configuration")]
    EverythingPruned { epsilon: f64 },

    #[error("belief p={p} for ({s}, {t}) has no supporting configuration")]
    InfeasibleBelief { s: String, t: String, p: f64 },

    #[error("mass functions are in total conflict")]
    TotalConflict,

    #[error("every configuration of set {set} scores zero; contradicting pairs: {pairs}")]
    AllZero { set: String, pairs: String },

    #[error("invalid probability {0}")]
    InvalidProbability(f64),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("model file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("parse error at {path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("invalid configuration value: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CorefError {
    pub(crate) fn validation(set: &str, rule: impl Into<String>) -> Self {
        CorefError::Validation { set: set.to_string(), rule: rule.into() }
    }

    pub(crate) fn invalid_config(set: &str, reason: impl Into<String>) -> Self {
        CorefError::InvalidConfiguration { set: set.to_string(), reason: reason.into() }
    }
}
