use thiserror::Error;

#[derive(Debug, Error)]
pub enum SrbError {
    #[error("parameter t={t} outside admissible range [{lo}, {hi}]")]
    ParameterRange { t: f64, lo: f64, hi: f64 },

    #[error("point x={x} outside [0, 1]")]
    PointRange { x: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("gap function has no sign change on bracket [{a}, {b}]")]
    NoSignChange { a: f64, b: f64 },

    #[error("periodic point at t={t} is not repelling (log-multiplier {multiplier_log})")]
    NotRepelling { t: f64, multiplier_log: f64 },

    #[error("critical point is periodic at t={t} (min orbit distance {min_dist})")]
    CriticalPeriodic { t: f64, min_dist: f64 },

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("pair not admissible: {0}")]
    NotAdmissible(String),

    #[error("delta too large: H(delta)={h_delta} < required {required}")]
    DeltaTooLarge { h_delta: usize, required: usize },

    #[error("goodness violation: critical point inside level {level} of the tower")]
    GoodnessViolation { level: usize },

    #[error(
        "cutoff not constructible at level {level}: |I_{{k}}|/|J_{{k-1}}| = {ratio} \
         below the comparability bound C^-3/sqrt(2) = {bound}"
    )]
    CutoffConstructibility { level: usize, ratio: f64, bound: f64 },

    #[error("iteration did not converge: residual {residual} after {iterations} iterations")]
    NoConvergence {
        residual: f64,
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("norm kind needs postcritical multiplier data, none recorded for this tower")]
    MissingMultiplier,

    #[error("{0}")]
    Estimator(String),
}

pub type Result<T> = std::result::Result<T, SrbError>;
