use thiserror::Error;

/// Failures of the explicit Runge–Kutta engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("state norm crossed the blow-up guard at t = {time}")]
    BlowUpDetected { time: f64 },
    #[error("adaptive step {step:e} fell below the underflow floor at t = {time}")]
    StepUnderflow { time: f64, step: f64 },
    #[error("exceeded {max_steps} steps before reaching t = {target}")]
    TooManySteps { max_steps: usize, target: f64 },
    #[error("integration span is empty (t_start = t_end = {0})")]
    EmptySpan(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("value function does not exist on all of [0, T]: blow-up at t = {blowup_time}")]
    NonGlobalValue { blowup_time: f64 },
    #[error("density is not log-concave (K2 = {k2})")]
    DegenerateDensity { k2: f64 },
    #[error("t = {t} lies outside the existence interval (blow-up at {blowup_time})")]
    OutsideExistenceInterval { t: f64, blowup_time: f64 },
    #[error("printed formula {formula} has a vanishing denominator")]
    FormulaPole { formula: &'static str },
    #[error("first-integral denominator a + 2A^2 vanishes at t = {t}")]
    DegenerateDenominator { t: f64 },
    #[error("first integral gives a negative squared mode at t = {t}")]
    ImaginaryMode { t: f64 },
    #[error("diffusion {delta} is below the linearization threshold {threshold}")]
    DegenerateDiffusion { delta: f64, threshold: f64 },
    #[error("density mass {mass} at t = {time} left the tolerance band")]
    MassLeak { time: f64, mass: f64 },
    #[error("density maximum sits on the boundary node {index}")]
    BoundaryMaximum { index: usize },
    #[error("density has no strict interior maximum")]
    NoStrictMax,
    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { got: usize, required: usize },
    #[error("a = {a} >= 0: the mode does not settle to a limit")]
    NotConvergent { a: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
}

pub type Result<T> = std::result::Result<T, Error>;
