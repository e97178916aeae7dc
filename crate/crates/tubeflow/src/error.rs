use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the tube pipeline.
///
/// Variants carry enough context to be actionable from the CLI; numerical
/// failures report the quantity that tripped the check.
#[derive(Debug, Error)]
pub enum Error {
    #[error("curve speed |gamma'({t})| = {speed:.3e} is numerically zero")]
    ZeroSpeed { t: f64, speed: f64 },

    #[error("arc-length reparametrization did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("flat point at alpha = {alpha}: |gamma' x gamma''| = {cross:.3e} below threshold")]
    FlatPoint { alpha: f64, cross: f64 },

    #[error("degenerate chart: eps * max curvature = {eps_kappa:.3} >= 1")]
    DegenerateChart { eps_kappa: f64 },

    #[error("grid resolution too low: {0}")]
    ResolutionTooLow(String),

    #[error("source term violates compatibility: |integral rho dV| = {integral:.3e} exceeds {tol:.1e}")]
    IncompatibleSource { integral: f64, tol: f64 },

    #[error("iterative solve stalled: residual {residual:.3e} after {iterations} iterations (target {target:.1e})")]
    NoConvergence {
        residual: f64,
        iterations: usize,
        target: f64,
    },

    #[error("field evaluation on the tube axis requested at r = {r:.3e}; polar components are singular there")]
    AxisEvaluation { r: f64 },

    #[error("eigenvalue lambda = {lambda:.3e} too large for the thin-tube field model (limit {limit:.3e})")]
    LambdaTooLarge { lambda: f64, limit: f64 },

    #[error("flow field denominator 1 + psi_alpha + tau psi_theta reached {min:.3e}; field X = v/v_alpha undefined")]
    NonPositiveDenominator { min: f64 },

    #[error("integrator step failure at s = {s}: {detail}")]
    StepFailure { s: f64, detail: String },

    #[error("trajectory left the chart domain at s = {s}: r = {r:.4}")]
    LeftDomain { s: f64, r: f64 },

    #[error("small divisor |e^(ik omega) - 1| = {divisor:.3e} at k = {k} below floor {floor:.1e}")]
    SmallDivisorBreakdown { k: i64, divisor: f64, floor: f64 },

    #[error("deformed curve lost admissibility: {0}")]
    AdmissibilityLost(String),

    #[error("least-squares system ill-conditioned: estimated condition {cond:.3e}")]
    IllConditioned { cond: f64 },

    #[error("fit misfit {misfit:.3e} above tolerance {tol:.1e}")]
    MisfitAboveTol { misfit: f64, tol: f64 },

    #[error("tube neighborhoods overlap: curves {i} and {j} at distance {dist:.4} < {required:.4}")]
    TubesOverlap {
        i: usize,
        j: usize,
        dist: f64,
        required: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
