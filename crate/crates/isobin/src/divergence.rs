//! Phi-divergence machinery: the power-divergence family and generic
//! Csiszar divergences between `2I`-cell probability vectors.
//!
//! The power-divergence family is indexed by a real `lambda`:
//!
//! ```text
//! d_lambda(p, q) = (lambda (lambda + 1))^{-1} (sum_c p_c^{lambda+1} / q_c^lambda - 1),
//! ```
//!
//! with the continuity limits `d_0(p, q) = sum p log(p/q)` (Kullback-Leibler)
//! and `d_{-1}(p, q) = sum q log(q/p)` (reversed Kullback-Leibler). The
//! implementation evaluates the algebraically equivalent per-cell form
//!
//! ```text
//! (p^{lambda+1} q^{-lambda} - p - lambda (p - q)) / (lambda (lambda + 1)),
//! ```
//!
//! whose terms are individually nonnegative, so no cancellation against the
//! trailing `-1` occurs and zero-cell conventions are local to each cell.
//!
//! Divergences can be legitimately infinite (for example `lambda <= -1`
//! against a distribution with empty cells); infinity is a returned value,
//! not an error.

use crate::model::{cell_probs, IsotonicSample, NuVector, PiVector};
use crate::{Error, Result};

/// Threshold for routing `lambda` to the limit formulas at the poles
/// `lambda = 0` and `lambda = -1`, where the generic expression degenerates
/// to 0/0.
pub const LAMBDA_POLE_TOL: f64 = 1e-9;

/// Tolerance for the `sum = 1` check when validating cell vectors.
pub const CELL_SUM_TOL: f64 = 1e-12;

/// Index of the power-divergence family; a plain finite real number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerDivergenceIndex(f64);

impl PowerDivergenceIndex {
    /// Validates finiteness of the index.
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::NonFiniteLambda(lambda));
        }
        Ok(Self(lambda))
    }

    /// The raw index.
    pub fn lambda(&self) -> f64 {
        self.0
    }

    /// True when this index routes to the Kullback-Leibler limit.
    pub fn is_kl_limit(&self) -> bool {
        self.0.abs() <= LAMBDA_POLE_TOL
    }

    /// True when this index routes to the reversed Kullback-Leibler limit.
    pub fn is_reverse_kl_limit(&self) -> bool {
        (self.0 + 1.0).abs() <= LAMBDA_POLE_TOL
    }

    /// The generator `phi_lambda(x)`, normalized so `phi(1) = phi'(1) = 0`:
    ///
    /// ```text
    /// phi_lambda(x) = (x^{lambda+1} - x - lambda (x - 1)) / (lambda (lambda + 1)),
    /// ```
    ///
    /// with `phi_0(x) = x ln x - x + 1` and `phi_{-1}(x) = -ln x + x - 1`.
    /// Defined for `x >= 0`; may be `+inf` at `x = 0` (when `lambda <= -1`)
    /// or grow superlinearly.
    pub fn phi(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0, "phi is defined on [0, inf)");
        if self.is_kl_limit() {
            if x == 0.0 {
                1.0
            } else {
                x * x.ln() - x + 1.0
            }
        } else if self.is_reverse_kl_limit() {
            // -ln(0) = +inf: correct, the reversed KL blows up at x = 0.
            x - 1.0 - x.ln()
        } else {
            let l = self.0;
            // 0^{l+1} = +inf for l < -1 via powf, again the correct limit.
            (x.powf(l + 1.0) - x - l * (x - 1.0)) / (l * (l + 1.0))
        }
    }

    /// The curvature `phi''(1)`, which normalizes the family so that every
    /// member yields asymptotically equivalent test statistics. For the
    /// power family this is identically 1.
    pub fn curvature_at_one(&self) -> f64 {
        1.0
    }
}

/// A `2I`-cell probability vector in the layout
/// `(p_{11}, p_{12}, ..., p_{I1}, p_{I2})`: success then failure cell for
/// each category. Componentwise nonnegative and summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CellVector(Vec<f64>);

impl CellVector {
    /// Validates nonnegativity, even length and total mass one (within
    /// [`CELL_SUM_TOL`]).
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if !values.len().is_multiple_of(2) {
            return Err(Error::OddCellCount(values.len()));
        }
        for (index, &value) in values.iter().enumerate() {
            if value.is_nan() || value < 0.0 {
                return Err(Error::NegativeCell { index, value });
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > CELL_SUM_TOL {
            return Err(Error::CellSumMismatch {
                sum,
                tol: CELL_SUM_TOL,
            });
        }
        Ok(Self(values))
    }

    /// Cells of a model point: `(nu_i pi_i, nu_i (1 - pi_i))` per category.
    pub fn from_pi_nu(pi: &PiVector, nu: &NuVector) -> Result<Self> {
        Self::new(cell_probs(pi, nu)?)
    }

    /// Empirical cells of a sample: `(N_i / n, (n_i - N_i) / n)` per
    /// category, computed directly from counts so zero cells are exact.
    pub fn observed(sample: &IsotonicSample) -> Self {
        let n = sample.grand_total() as f64;
        let mut cells = Vec::with_capacity(2 * sample.categories());
        for i in 0..sample.categories() {
            cells.push(sample.successes()[i] as f64 / n);
            cells.push(sample.failures(i) as f64 / n);
        }
        Self::new(cells).expect("count fractions form a valid cell vector")
    }

    /// Cell components.
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Number of cells (`2I`).
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True when there are no cells (never holds for validated vectors).
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One cell of `d_lambda` away from the poles, in the cancellation-free form
/// `(p^{l+1} q^{-l} - p - l (p - q)) / (l (l + 1))` with the zero-cell
/// conventions spelled out:
///
/// * `p = q = 0`: contributes 0;
/// * `q = 0 < p`: `+inf` for `l > 0` (the compact term `p^{l+1}/q^l`
///   diverges); `-p / l` for `l < 0` (the compact term vanishes, leaving the
///   affine part);
/// * `p = 0 < q`: `q / (1 + l)` for `l > -1` (`0^{l+1} = 0`); `+inf` for
///   `l < -1` (`0^{l+1}` diverges).
fn power_cell(l: f64, p: f64, q: f64) -> f64 {
    if p == q {
        // Covers the 0/0 cell and makes d(p, p) = 0 exact: the generic
        // branch would reconstruct p as p^{l+1} q^{-l} only up to rounding.
        return 0.0;
    }
    if q == 0.0 {
        return if l > 0.0 { f64::INFINITY } else { -p / l };
    }
    if p == 0.0 {
        return if l > -1.0 {
            q / (1.0 + l)
        } else {
            f64::INFINITY
        };
    }
    (p.powf(l + 1.0) * q.powf(-l) - p - l * (p - q)) / (l * (l + 1.0))
}

/// One cell of the Kullback-Leibler limit `p ln(p/q) - p + q`.
fn kl_cell(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        q
    } else if q == 0.0 {
        f64::INFINITY
    } else {
        p * (p / q).ln() - p + q
    }
}

/// The power divergence `d_lambda(p, q)`. Nonnegative; `+inf` is a
/// legitimate return value (zero `q`-cell against positive `p`-cell when
/// `lambda >= 0`, or zero `p`-cell against positive `q`-cell when
/// `lambda <= -1`). Errors only on malformed input: mismatched lengths or a
/// non-finite index.
pub fn power_divergence(lambda: f64, p: &CellVector, q: &CellVector) -> Result<f64> {
    let index = PowerDivergenceIndex::new(lambda)?;
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let mut total = 0.0;
    if index.is_kl_limit() {
        for (&pc, &qc) in p.values().iter().zip(q.values()) {
            total += kl_cell(pc, qc);
        }
    } else if index.is_reverse_kl_limit() {
        // d_{-1}(p, q) is KL with the arguments swapped.
        for (&pc, &qc) in p.values().iter().zip(q.values()) {
            total += kl_cell(qc, pc);
        }
    } else {
        for (&pc, &qc) in p.values().iter().zip(q.values()) {
            total += power_cell(index.lambda(), pc, qc);
        }
    }
    // Cells are individually nonnegative up to rounding; clamp the total.
    Ok(total.max(0.0))
}

/// Generic Csiszar divergence `sum_c q_c phi(p_c / q_c)` for a caller-supplied
/// convex generator with `phi(1) = phi'(1) = 0`.
///
/// Conventions: a `p = q = 0` cell contributes 0; a `p = 0 < q` cell
/// contributes `q phi(0)` (the generator may return `+inf` there); a
/// `q = 0 < p` cell contributes `+inf`, which is exact for superlinear
/// generators (such as `phi_lambda` with `lambda >= 0`). Generators with
/// sublinear growth at infinity should go through [`power_divergence`] or
/// handle empty reference cells before calling.
///
/// Only the normalization `phi(1) = 0` is verified (tolerance `1e-8`);
/// convexity and `phi'(1) = 0` are the caller's contract.
pub fn divergence_generic(phi: impl Fn(f64) -> f64, p: &CellVector, q: &CellVector) -> Result<f64> {
    let at_one = phi(1.0);
    if at_one.abs() > 1e-8 {
        return Err(Error::UnnormalizedPhi(at_one));
    }
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let mut total = 0.0;
    for (&pc, &qc) in p.values().iter().zip(q.values()) {
        if pc == 0.0 && qc == 0.0 {
            continue;
        }
        if qc == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += qc * phi(pc / qc);
    }
    Ok(total.max(0.0))
}
