use thiserror::Error;

/// Unified error type for the whole pipeline.
#[derive(Debug, Error)]
pub enum GenspecError {
    #[error("non-finite drift/diffusion value at {point:?}")]
    NonFiniteCoefficient { point: Vec<f64> },

    #[error("point {point:?} outside domain on axis {axis}")]
    OutOfDomain { point: Vec<f64>, axis: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("domain too small: {0}")]
    DomainTooSmall(String),

    #[error("coefficient evaluation failed at {point:?}: {reason}")]
    CoefficientEvaluationFailed { point: Vec<f64>, reason: String },

    #[error("negative diffusion sample on fibre: D11={value} at index {index}")]
    NegativeDiffusion { index: usize, value: f64 },

    #[error("too few points for fibre operator: got {got}, need at least {need}")]
    TooFewPoints { got: usize, need: usize },

    #[error("eigensolver failure: {0}")]
    EigensolverFailure(String),

    #[error("eigenpair {index} residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    ResidualTooLarge { index: usize, residual: f64, tol: f64 },

    #[error("no eigenvalue within {tol:.3e} of zero (closest |lambda| = {closest:.3e})")]
    ZeroModeNotFound { tol: f64, closest: f64 },

    #[error("invariant density has negative values below tolerance: min = {min:.3e}")]
    NegativeDensity { min: f64 },

    #[error("anchor point degenerate: |psi(anchor)| = {value:.3e}")]
    AnchorDegenerate { value: f64 },

    #[error("gradient degenerate at seed {seed:?}: |grad| = {grad:.3e}")]
    DegenerateGradient { seed: Vec<f64>, grad: f64 },

    #[error("level-set component too short: {vertices} vertices")]
    ComponentTooShort { vertices: usize },

    #[error("fibre too short: length {length:.3e} for spacing {spacing:.3e}")]
    FibreTooShort { length: f64, spacing: f64 },

    #[error("all fibre weights are zero")]
    AllWeightsZero,

    #[error("rank-deficient neighborhood for tangent fit (spread = {spread:.3e})")]
    RankDeficientNeighborhood { spread: f64 },

    #[error("ill-conditioned local polynomial fit: cond = {cond:.3e}")]
    IllConditionedFit { cond: f64 },

    #[error("rotated fibre is not the graph of a function: {detail}")]
    NotAGraph { detail: String },

    #[error("fibre spectrum has {got} eigenvalues, need {need}")]
    IndexMismatch { got: usize, need: usize },

    #[error("section outside domain: {0}")]
    SectionOutsideDomain(String),

    #[error("derivative window too small: {got} points, need {need}")]
    WindowTooSmall { got: usize, need: usize },

    #[error("Demoura system singular at every section point")]
    SingularSystem,

    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),

    #[error("trajectory blow-up: |z| = {norm:.3e} at step {step}")]
    BlowUp { step: usize, norm: f64 },

    #[error("{step}: {source}")]
    Step {
        step: &'static str,
        #[source]
        source: Box<GenspecError>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl GenspecError {
    /// Wrap an error with the pipeline step it occurred in.
    pub fn at_step(self, step: &'static str) -> Self {
        GenspecError::Step {
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, GenspecError>;
