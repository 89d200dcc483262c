//! Order-restricted inference for independent binomial proportions.
//!
//! Given `I` independent binomial samples with success probabilities
//! `pi_1, ..., pi_I`, this crate tests the homogeneity hypothesis
//! `H0: pi_1 = ... = pi_I` against the isotonic (nondecreasing) alternative
//! `H1: pi_1 <= ... <= pi_I` with at least one strict inequality.
//!
//! The toolkit provides:
//!
//! * maximum-likelihood estimation under the pooled, order-restricted
//!   (pool-adjacent-violators) and unrestricted models ([`estimate`]);
//! * Wald-type statistics `W`, `H`, `D` built on the log-linear
//!   parametrization of the model ([`stats`]);
//! * the power-divergence families `T_lambda` and `S_lambda`, which contain
//!   the likelihood-ratio statistic (`lambda = 0`) and the Pearson-type
//!   statistic (`lambda = 1`) as special cases ([`divergence`], [`stats`]);
//! * the chi-bar-squared null distribution shared by all of the above:
//!   closed-form mixing weights for up to four categories and a Monte Carlo
//!   fallback based on projections onto the monotone cone ([`chibar`]);
//! * a simulation driver for size/power studies with deterministic,
//!   schedule-independent parallel replication ([`sim`]);
//! * a report layer bundling estimates, statistics and p-values for
//!   serialization ([`report`]).
//!
//! All statistics share the same calibration: under `H0` they converge to a
//! chi-bar-squared mixture `sum_i w_i chi^2_i`, so a single weight vector per
//! design yields p-values for the whole family.

use thiserror::Error;

pub mod chibar;
pub mod divergence;
pub mod estimate;
pub mod model;
pub mod report;
pub mod sim;
pub mod stats;

/// Errors reported by this crate.
///
/// Statistical "failures" that are expected outcomes (for example a boundary
/// estimate that leaves a Wald statistic undefined) are *not* errors; they are
/// encoded in the result types (see [`stats::StatOutcome`]). `Error` is
/// reserved for contract violations: malformed input, impossible requests and
/// numerical breakdowns that cannot be represented as a result.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// Fewer than two categories were supplied; a trend test needs `I >= 2`.
    #[error("need at least two categories, got {0}")]
    TooFewCategories(usize),
    /// A category with no trials carries no information and is rejected.
    #[error("category {index}: total count must be at least 1")]
    ZeroTotal { index: usize },
    /// More successes than trials in one category.
    #[error("category {index}: successes ({successes}) exceed total ({total})")]
    SuccessesExceedTotal {
        index: usize,
        successes: u64,
        total: u64,
    },
    /// A probability-like quantity fell outside `[0, 1]`.
    #[error("component {index}: probability {value} is outside [0, 1]")]
    ProbabilityOutOfRange { index: usize, value: f64 },
    /// A probability on the boundary `{0, 1}` has no finite logit.
    #[error("component {index}: probability {value} lies on the boundary, logit undefined")]
    BoundaryProbability { index: usize, value: f64 },
    /// Log-odds must be finite real numbers.
    #[error("component {index}: log-odds must be finite, got {value}")]
    NonFiniteTheta { index: usize, value: f64 },
    /// Sampling fractions must be strictly positive.
    #[error("component {index}: sampling fraction {value} must be strictly positive")]
    NonPositiveNu { index: usize, value: f64 },
    /// Sampling fractions must sum to one.
    #[error("sampling fractions sum to {sum}, expected 1 (tolerance {tol})")]
    NuSumMismatch { sum: f64, tol: f64 },
    /// Two vectors that must align have different lengths.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    /// A cell-probability vector contained a negative entry.
    #[error("cell {index}: negative probability {value}")]
    NegativeCell { index: usize, value: f64 },
    /// Cell probabilities must sum to one.
    #[error("cell probabilities sum to {sum}, expected 1 (tolerance {tol})")]
    CellSumMismatch { sum: f64, tol: f64 },
    /// Cell vectors pair success/failure cells, so their length is even.
    #[error("cell vector length {0} is odd; cells come in success/failure pairs")]
    OddCellCount(usize),
    /// The divergence index must be a finite real number.
    #[error("divergence index lambda must be finite, got {0}")]
    NonFiniteLambda(f64),
    /// A user-supplied divergence generator failed the `phi(1) = 0` normalization.
    #[error("divergence generator violates phi(1) = 0: phi(1) = {0}")]
    UnnormalizedPhi(f64),
    /// Closed-form chi-bar-squared weights exist only for small designs.
    #[error("closed-form weights are available for at most 3 free coordinates, got {0}")]
    ClosedFormUnavailable(usize),
    /// A matrix that must be symmetric positive definite was not.
    #[error("{context}: matrix is not positive definite")]
    NotPositiveDefinite { context: &'static str },
    /// Chi-squared tail probabilities are defined for nonnegative arguments.
    #[error("chi-squared survival function needs t >= 0, got {0}")]
    NegativeStatistic(f64),
    /// Monte Carlo replication counts must be positive.
    #[error("{context}: replication count must be at least 1")]
    ZeroReplications { context: &'static str },
    /// Significance levels live strictly inside (0, 1).
    #[error("significance level alpha must lie strictly inside (0, 1), got {0}")]
    AlphaOutOfRange(f64),
    /// The accuracy criterion needs an interior rejection-rate estimate.
    #[error("rejection-rate estimate {0} lies on the boundary; its logit is undefined")]
    BoundaryRate(f64),
    /// Relative efficiency is undefined against a zero baseline.
    #[error("efficiency is undefined: baseline power gain is zero")]
    ZeroBaselineGain,
    /// The criterion half-width must be positive.
    #[error("criterion half-width epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    /// A simulation run needs at least one statistic to track.
    #[error("no divergence indices supplied; at least one lambda is required")]
    EmptyLambdaGrid,
    /// A named simulation scenario was not found in the catalog.
    #[error("unknown scenario id {0:?}")]
    UnknownScenario(String),
    /// The iterative cone projection failed to converge.
    #[error("cone projection failed to converge after {0} active-set iterations")]
    ProjectionDiverged(usize),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
