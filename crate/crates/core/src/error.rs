use thiserror::Error;

/// Errors produced by the numerical modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("input vectors are linearly dependent (wedge norm {wedge:.3e})")]
    DependentVectors { wedge: f64 },

    #[error("matrix is not symplectic: defect {defect:.3e} exceeds {limit:.3e}")]
    NotSymplectic { defect: f64, limit: f64 },

    #[error("subspace is not complex: ||(I-Q)JQ|| = {defect:.3e} exceeds {limit:.3e}")]
    NotComplexSubspace { defect: f64, limit: f64 },

    #[error("matrix is rank deficient: singular value {sigma:.3e} at index {index}")]
    RankDeficient { sigma: f64, index: usize },

    #[error("vector lies outside the required subspace by {defect:.3e}")]
    OutsideSubspace { defect: f64 },

    #[error("integrand is not phase invariant: |g(e^(tJ)x) - g(x)| = {violation:.3e}")]
    NotPhaseInvariant { violation: f64 },

    #[error("unsupported shadow dimension k = {k}; this operation handles {supported}")]
    UnsupportedK { k: usize, supported: &'static str },

    #[error("too few samples: got {got}, need at least {min}")]
    TooFewSamples { got: usize, min: usize },

    #[error("implicit solve did not converge at t = {t:.6e} with step {step:.3e}")]
    FlowNonConvergent { t: f64, step: f64 },

    #[error("trajectory blew up: |x| = {norm:.3e} exceeded bound {bound:.3e} at t = {t:.6e}")]
    FlowBlowUp { t: f64, norm: f64, bound: f64 },

    #[error(
        "step control exhausted: step {step:.3e} below {min_step:.3e} still violates \
         defect/energy tolerances"
    )]
    StepControlExhausted { step: f64, min_step: f64 },

    #[error(
        "Newton continuation failed at t = {t:.6e} (node {node}): residual {residual:.3e} \
         after {iterations} iterations; reached t = {reached_t:.6e}"
    )]
    NewtonDiverged {
        t: f64,
        node: usize,
        residual: f64,
        iterations: usize,
        reached_t: f64,
    },

    #[error("boundary has unconverged nodes (worst residual {residual:.3e})")]
    UnconvergedBoundary { residual: f64 },

    #[error("invalid profile: {reason}")]
    InvalidProfile { reason: String },

    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },

    #[error("bilinear data is not symmetric: asymmetry {asymmetry:.3e}")]
    NotSymmetricBilinear { asymmetry: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
