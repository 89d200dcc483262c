//! Data model for `I` independent binomial samples and the log-linear
//! parametrization used by the order-restricted tests.
//!
//! A design observes `N_i ~ Bin(n_i, pi_i)` independently for `i = 1..I`.
//! The saturated model is re-expressed through log-odds: with
//! `theta = (theta_1, theta_2*, ..., theta_I*)`,
//!
//! ```text
//! logit(pi_i) = theta_1 + theta_i*   (i < I),    logit(pi_I) = theta_1,
//! ```
//!
//! so `theta_1` is the baseline log-odds of the last category and each
//! `theta_i* = logit(pi_i) - logit(pi_I)` measures departure from it. The
//! homogeneity hypothesis is `theta_i* = 0` for all `i`, and the isotonic
//! alternative is the polyhedral cone `R theta <= 0` for the difference
//! matrix `R` built here.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Tolerance used when validating that user-supplied sampling fractions sum
/// to one. Fractions inside the tolerance are renormalized exactly.
pub const NU_SUM_TOL: f64 = 1e-9;

/// Observed counts for `I` independent binomial samples, kept as integers so
/// that downstream estimators can compare pooled proportions exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IsotonicSample {
    totals: Vec<u64>,
    successes: Vec<u64>,
}

impl IsotonicSample {
    /// Validates and stores `(total, successes)` pairs in category order.
    ///
    /// Requires at least two categories, a positive total in every category
    /// and `successes <= total` componentwise. Zero or full success counts
    /// are legal; they surface later as boundary estimates.
    pub fn new(rows: &[(u64, u64)]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::TooFewCategories(rows.len()));
        }
        for (index, &(total, successes)) in rows.iter().enumerate() {
            if total == 0 {
                return Err(Error::ZeroTotal { index });
            }
            if successes > total {
                return Err(Error::SuccessesExceedTotal {
                    index,
                    successes,
                    total,
                });
            }
        }
        Ok(Self {
            totals: rows.iter().map(|r| r.0).collect(),
            successes: rows.iter().map(|r| r.1).collect(),
        })
    }

    /// Number of categories `I`.
    pub fn categories(&self) -> usize {
        self.totals.len()
    }

    /// Per-category totals `n_i`.
    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    /// Per-category success counts `N_i`.
    pub fn successes(&self) -> &[u64] {
        &self.successes
    }

    /// Failure count `n_i - N_i` for category `i`.
    pub fn failures(&self, index: usize) -> u64 {
        self.totals[index] - self.successes[index]
    }

    /// Grand total `n = sum n_i`.
    pub fn grand_total(&self) -> u64 {
        self.totals.iter().sum()
    }

    /// Total success count `sum N_i`.
    pub fn total_successes(&self) -> u64 {
        self.successes.iter().sum()
    }

    /// Plug-in sampling fractions `nu_i = n_i / n`.
    pub fn nu(&self) -> NuVector {
        NuVector::from_totals(&self.totals)
    }

    /// The same data with category order reversed. Testing a nonincreasing
    /// trend on the original order is the nondecreasing test on this.
    pub fn reversed(&self) -> Self {
        let mut totals = self.totals.clone();
        let mut successes = self.successes.clone();
        totals.reverse();
        successes.reverse();
        Self { totals, successes }
    }
}

/// A vector of per-category success probabilities, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiVector(Vec<f64>);

impl PiVector {
    /// Validates componentwise membership in `[0, 1]`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::ProbabilityOutOfRange { index, value });
            }
        }
        Ok(Self(values))
    }

    /// A constant vector `(value, ..., value)` of the given length.
    pub fn constant(value: f64, len: usize) -> Result<Self> {
        Self::new(vec![value; len])
    }

    /// Probability components.
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Number of categories.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True when there are no categories (never holds for validated samples).
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when every component lies strictly inside `(0, 1)`, so that all
    /// logits are finite.
    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&p| p > 0.0 && p < 1.0)
    }

    /// True when the components satisfy the isotonic constraint
    /// `pi_1 <= ... <= pi_I`.
    pub fn is_nondecreasing(&self) -> bool {
        self.0.windows(2).all(|w| w[0] <= w[1])
    }
}

/// The log-linear parameter `theta = (theta_1, theta_2*, ..., theta_I*)`.
///
/// All components are finite by construction; probabilities on the boundary
/// of `[0, 1]` have no theta representation and are handled upstream.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaVector(Vec<f64>);

impl ThetaVector {
    /// Validates that every component is finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteTheta { index, value });
            }
        }
        Ok(Self(values))
    }

    /// All components `(theta_1, theta_2*, ..., theta_I*)`.
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// The baseline log-odds `theta_1 = logit(pi_I)`.
    pub fn nuisance(&self) -> f64 {
        self.0[0]
    }

    /// The informative part `theta* = (theta_2*, ..., theta_I*)`; under the
    /// isotonic alternative every component is `<= 0`.
    pub fn interactions(&self) -> &[f64] {
        &self.0[1..]
    }

    /// Number of components `I`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True when there are no components (never holds for valid designs).
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Sampling fractions `nu_i = n_i / n`, strictly positive and summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct NuVector(Vec<f64>);

impl NuVector {
    /// Fractions from integer totals; always valid for a validated sample.
    pub fn from_totals(totals: &[u64]) -> Self {
        let n: u64 = totals.iter().sum();
        let n = n as f64;
        Self(totals.iter().map(|&t| t as f64 / n).collect())
    }

    /// Validates user-supplied fractions: strictly positive components whose
    /// sum is within [`NU_SUM_TOL`] of one. The stored vector is renormalized
    /// by the observed sum so downstream identities hold exactly.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooFewCategories(values.len()));
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::NonPositiveNu { index, value });
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > NU_SUM_TOL {
            return Err(Error::NuSumMismatch {
                sum,
                tol: NU_SUM_TOL,
            });
        }
        Ok(Self(values.iter().map(|v| v / sum).collect()))
    }

    /// Fraction components.
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Number of categories.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True when there are no components (never holds for valid designs).
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The leading `I - 1` fractions `nu* = (nu_1, ..., nu_{I-1})`, the block
    /// that parametrizes the null information matrix.
    pub fn star(&self) -> &[f64] {
        &self.0[..self.0.len() - 1]
    }

    /// The matrix `Sigma_nu* = diag(nu*) - nu* nu*^T` of size
    /// `(I-1) x (I-1)`. Up to the factor `pi0 (1 - pi0)`, it is the inverse
    /// covariance of the interaction estimates under the null.
    pub fn sigma_star(&self) -> DMatrix<f64> {
        let star = self.star();
        let k = star.len();
        DMatrix::from_fn(k, k, |i, j| {
            let diag = if i == j { star[i] } else { 0.0 };
            diag - star[i] * star[j]
        })
    }
}

/// The fixed design matrices of the log-linear parametrization for `I`
/// categories.
///
/// * `x`: the `I x I` design with `logit(pi) = X theta`;
/// * `x_inv`: its inverse (`theta = X^{-1} logit(pi)`);
/// * `g`: the `(I-1) x (I-1)` difference matrix with `+1` on the diagonal and
///   `-1` on the superdiagonal, so `(G theta*)_i = theta_i* - theta_{i+1}*`;
/// * `t`: `G^{-1}`, upper triangular of ones;
/// * `r`: the `(I-1) x I` constraint matrix `R = (0 | G)`; the isotonic
///   alternative is exactly `R theta <= 0`;
/// * `e_last`: the last standard basis vector of length `I - 1`, which spans
///   the direction removed by the difference map.
#[derive(Debug, Clone)]
pub struct DesignMatrices {
    pub x: DMatrix<f64>,
    pub x_inv: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub e_last: DVector<f64>,
}

impl DesignMatrices {
    /// Builds all matrices for a design with `categories >= 2` categories.
    pub fn new(categories: usize) -> Self {
        assert!(categories >= 2, "designs need at least two categories");
        let i = categories;
        let k = i - 1;

        // X = [[1, I_{I-1}], [1, 0]]: first column ones, identity block for
        // the interactions in rows 1..I-1, final row picks out theta_1.
        let x = DMatrix::from_fn(i, i, |r, c| if c == 0 || r == c - 1 { 1.0 } else { 0.0 });
        // X^{-1}: theta_1 = logit(pi_I); theta_i* = logit(pi_i) - logit(pi_I).
        let x_inv = DMatrix::from_fn(i, i, |r, c| {
            if r == 0 {
                if c == i - 1 {
                    1.0
                } else {
                    0.0
                }
            } else if c == r - 1 {
                1.0
            } else if c == i - 1 {
                -1.0
            } else {
                0.0
            }
        });
        let g = DMatrix::from_fn(k, k, |r, c| {
            if r == c {
                1.0
            } else if c == r + 1 {
                -1.0
            } else {
                0.0
            }
        });
        let t = DMatrix::from_fn(k, k, |r, c| if c >= r { 1.0 } else { 0.0 });
        let r_mat = DMatrix::from_fn(k, i, |r, c| if c == 0 { 0.0 } else { g[(r, c - 1)] });
        let e_last = DVector::from_fn(k, |r, _| if r == k - 1 { 1.0 } else { 0.0 });

        Self {
            x,
            x_inv,
            g,
            t,
            r: r_mat,
            e_last,
        }
    }
}

/// Log-odds `ln(p / (1 - p))`; caller guarantees `p` strictly inside `(0,1)`.
pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Inverse logit `1 / (1 + e^{-x})`, evaluated in the numerically stable
/// branch for each sign of `x`.
pub(crate) fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Maps interior probabilities to the log-linear parameter:
/// `theta_1 = logit(pi_I)`, `theta_i* = logit(pi_i) - logit(pi_I)`.
///
/// Errors with [`Error::BoundaryProbability`] if any component sits on the
/// boundary of `[0, 1]`.
pub fn theta_from_pi(pi: &PiVector) -> Result<ThetaVector> {
    let values = pi.values();
    for (index, &value) in values.iter().enumerate() {
        if value <= 0.0 || value >= 1.0 {
            return Err(Error::BoundaryProbability { index, value });
        }
    }
    let last = logit(values[values.len() - 1]);
    let mut theta = Vec::with_capacity(values.len());
    theta.push(last);
    for &value in &values[..values.len() - 1] {
        theta.push(logit(value) - last);
    }
    ThetaVector::new(theta)
}

/// Inverse of [`theta_from_pi`]: `pi_i = expit(theta_1 + theta_i*)` for
/// `i < I` and `pi_I = expit(theta_1)`. Total because finite logits always
/// map into the open interval.
pub fn pi_from_theta(theta: &ThetaVector) -> PiVector {
    let base = theta.nuisance();
    let mut pi: Vec<f64> = theta
        .interactions()
        .iter()
        .map(|&t| inv_logit(base + t))
        .collect();
    pi.push(inv_logit(base));
    PiVector(pi)
}

/// The `2I` multinomial-style cell probabilities
/// `(nu_1 pi_1, nu_1 (1 - pi_1), ..., nu_I pi_I, nu_I (1 - pi_I))` on which
/// the divergence statistics operate. Cells are ordered success-then-failure
/// within each category.
pub fn cell_probs(pi: &PiVector, nu: &NuVector) -> Result<Vec<f64>> {
    if pi.len() != nu.len() {
        return Err(Error::LengthMismatch {
            left: pi.len(),
            right: nu.len(),
        });
    }
    let mut cells = Vec::with_capacity(2 * pi.len());
    for (&p, &v) in pi.values().iter().zip(nu.values()) {
        cells.push(v * p);
        cells.push(v * (1.0 - p));
    }
    Ok(cells)
}

/// Fisher information (per observation) for `theta` at interior `pi`:
/// `I_F = X^T D X` with `D = diag(nu_i pi_i (1 - pi_i))`.
///
/// Written out, with `d_i = nu_i pi_i (1 - pi_i)`:
/// the `(1,1)` entry is `sum_i d_i`, the first row/column continue with
/// `d_1, ..., d_{I-1}`, and the lower-right block is `diag(d_1, ..., d_{I-1})`.
pub fn fisher_info(pi: &PiVector, nu: &NuVector) -> Result<DMatrix<f64>> {
    if pi.len() != nu.len() {
        return Err(Error::LengthMismatch {
            left: pi.len(),
            right: nu.len(),
        });
    }
    for (index, &value) in pi.values().iter().enumerate() {
        if value <= 0.0 || value >= 1.0 {
            return Err(Error::BoundaryProbability { index, value });
        }
    }
    let i = pi.len();
    let d: Vec<f64> = pi
        .values()
        .iter()
        .zip(nu.values())
        .map(|(&p, &v)| v * p * (1.0 - p))
        .collect();
    let mut out = DMatrix::zeros(i, i);
    out[(0, 0)] = d.iter().sum();
    for j in 1..i {
        out[(0, j)] = d[j - 1];
        out[(j, 0)] = d[j - 1];
        out[(j, j)] = d[j - 1];
    }
    Ok(out)
}

/// Fisher information evaluated at a homogeneous interior point
/// `pi = (pi0, ..., pi0)`. The common factor `pi0 (1 - pi0)` pulls out,
/// leaving the arrowhead matrix
/// `pi0 (1 - pi0) * [[1, nu*^T], [nu*, diag(nu*)]]`.
pub fn fisher_info_null(pi0: f64, nu: &NuVector) -> Result<DMatrix<f64>> {
    if pi0 <= 0.0 || pi0 >= 1.0 {
        return Err(Error::BoundaryProbability {
            index: 0,
            value: pi0,
        });
    }
    let i = nu.len();
    let scale = pi0 * (1.0 - pi0);
    let star = nu.star();
    let mut out = DMatrix::zeros(i, i);
    out[(0, 0)] = scale;
    for j in 1..i {
        out[(0, j)] = scale * star[j - 1];
        out[(j, 0)] = scale * star[j - 1];
        out[(j, j)] = scale * star[j - 1];
    }
    Ok(out)
}
