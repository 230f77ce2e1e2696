use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid resolution {n} is unsupported (need an even n >= 16)")]
    Resolution { n: usize },

    #[error("unsupported chart count {0} (expected 1, 2 or 4)")]
    ChartCount(usize),

    #[error("chart count {charts} is not available on this manifold")]
    UnsupportedKind { charts: usize },

    #[error("unknown chart id {0}")]
    UnknownChart(usize),

    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("metric is degenerate at node {node}: smallest eigenvalue {eigenvalue:e}")]
    SingularMetric { node: usize, eigenvalue: f64 },

    #[error("{what} = {value:e} is outside the admissible bound {bound:e}")]
    Inadmissible {
        what: &'static str,
        value: f64,
        bound: f64,
    },

    #[error("fixed-point inversion did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("derivative order {0} is not supported")]
    Order(usize),

    #[error("time {t} is outside the stored interval [{start}, {end}]")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },

    #[error("frozen principal coefficient {value:e} violates normal ellipticity")]
    Ellipticity { value: f64 },

    #[error("non-finite value in state at t = {t}")]
    NonFinite { t: f64 },

    #[error("step size underflow at t = {t} (dt = {dt:e})")]
    StepUnderflow { t: f64, dt: f64 },

    #[error("step limit {steps} reached at t = {t}")]
    MaxSteps { steps: usize, t: f64 },

    #[error("metric lost positivity at t = {t}: smallest eigenvalue {min_eig:e}")]
    PositivityLost { t: f64, min_eig: f64 },

    #[error("graph left the tubular neighbourhood at t = {t}: sup |rho| = {sup}")]
    AdmissibilityExit { t: f64, sup: f64 },

    #[error("invalid configuration: {0}")]
    Config(&'static str),

    #[error("degenerate geometry: {0}")]
    Degenerate(&'static str),
}

impl Error {
    /// True for the errors that signal a state leaving the admissible set
    /// (graph outside the tubular neighbourhood, metric losing positivity)
    /// rather than a numerical failure of the stepper.
    pub fn is_admissibility_exit(&self) -> bool {
        matches!(
            self,
            Error::AdmissibilityExit { .. } | Error::PositivityLost { .. }
        )
    }
}
