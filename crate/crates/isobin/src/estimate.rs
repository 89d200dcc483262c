//! Maximum-likelihood estimation under the three nested models.
//!
//! * Pooled (null) model: a single proportion `pi0^ = sum N_i / n`.
//! * Order-restricted model: the isotonic MLE `pi~` obtained by pooling
//!   adjacent violators, i.e. the weighted least-squares projection of the
//!   raw proportions onto the nondecreasing cone with weights `n_i`.
//! * Unrestricted (saturated) model: the raw proportions `pi-_i = N_i / n_i`.
//!
//! Each estimator also reports the log-linear parameter when it exists;
//! boundary estimates (0 or 1 in some component) have no finite log-odds and
//! yield `None` there while the probability scale stays fully defined.
//!
//! Pooling works on integer count sums, and pooled means are compared by
//! cross-multiplication, so the violator test is exact: no floating-point
//! rounding can merge blocks that are genuinely ordered or keep blocks that
//! genuinely violate the order.

use crate::model::{theta_from_pi, IsotonicSample, NuVector, PiVector, ThetaVector};

/// The three model fits for one sample, on both scales.
///
/// `theta_*` fields are `None` exactly when the corresponding probability
/// estimate touches the boundary of `[0, 1]` somewhere.
#[derive(Debug, Clone)]
pub struct EstimateTriple {
    /// Pooled success proportion `pi0^ = sum N_i / n`.
    pub pi0_hat: f64,
    /// Unrestricted per-category proportions `N_i / n_i`.
    pub pi_bar: PiVector,
    /// Isotonic (nondecreasing) MLE.
    pub pi_tilde: PiVector,
    /// Log-linear parameter of the pooled fit, if `pi0^` is interior.
    pub theta_hat: Option<ThetaVector>,
    /// Log-linear parameter of the unrestricted fit, if interior.
    pub theta_bar: Option<ThetaVector>,
    /// Log-linear parameter of the isotonic fit, if interior.
    pub theta_tilde: Option<ThetaVector>,
}

/// Pooled estimate under the null: the overall success fraction, plus its
/// log-linear representation `theta = (logit(pi0^), 0, ..., 0)` when the
/// fraction is interior.
pub fn pooled_estimate(sample: &IsotonicSample) -> (f64, Option<ThetaVector>) {
    let pi0 = sample.total_successes() as f64 / sample.grand_total() as f64;
    let theta = if pi0 > 0.0 && pi0 < 1.0 {
        let mut values = vec![0.0; sample.categories()];
        values[0] = crate::model::logit(pi0);
        Some(ThetaVector::new(values).expect("finite logit of interior proportion"))
    } else {
        None
    };
    (pi0, theta)
}

/// Unrestricted (saturated) estimate: raw per-category proportions.
pub fn unrestricted_estimate(sample: &IsotonicSample) -> (PiVector, Option<ThetaVector>) {
    let values: Vec<f64> = sample
        .successes()
        .iter()
        .zip(sample.totals())
        .map(|(&s, &t)| s as f64 / t as f64)
        .collect();
    let pi = PiVector::new(values).expect("raw proportions lie in [0, 1]");
    let theta = theta_from_pi(&pi).ok();
    (pi, theta)
}

/// Isotonic MLE by pool-adjacent-violators: the unique nondecreasing vector
/// closest to the raw proportions in the `n_i`-weighted least-squares sense,
/// which is also the binomial MLE under the order restriction.
pub fn isotonic_estimate(sample: &IsotonicSample) -> (PiVector, Option<ThetaVector>) {
    let values = pava_counts(sample.successes(), sample.totals());
    let pi = PiVector::new(values).expect("pooled proportions lie in [0, 1]");
    let theta = theta_from_pi(&pi).ok();
    (pi, theta)
}

/// All three fits at once.
pub fn estimate_all(sample: &IsotonicSample) -> EstimateTriple {
    let (pi0_hat, theta_hat) = pooled_estimate(sample);
    let (pi_bar, theta_bar) = unrestricted_estimate(sample);
    let (pi_tilde, theta_tilde) = isotonic_estimate(sample);
    EstimateTriple {
        pi0_hat,
        pi_bar,
        pi_tilde,
        theta_hat,
        theta_bar,
        theta_tilde,
    }
}

/// Recovers the full log-linear expansion of a fit: the normalizing constant
/// `u` and per-category main effects `u_1(i)` such that the log cell
/// probabilities decompose as
///
/// ```text
/// ln(nu_i pi_i)       = u + u_1(i) + theta_1 + theta_i*,
/// ln(nu_i (1 - pi_i)) = u + u_1(i),
/// ```
///
/// with `theta_I* = 0`. Returns `(u, [u_1(1), ..., u_1(I)])` normalized so
/// that `u_1(I) = 0` absorbs nothing: `u = ln(nu_I (1 - pi_I))` and
/// `u_1(i) = ln(nu_i (1 - pi_i)) - u`.
pub fn expand_loglinear(theta: &ThetaVector, nu: &NuVector) -> (f64, Vec<f64>) {
    let pi = crate::model::pi_from_theta(theta);
    let i = pi.len();
    let u = (nu.values()[i - 1] * (1.0 - pi.values()[i - 1])).ln();
    let u1 = pi
        .values()
        .iter()
        .zip(nu.values())
        .map(|(&p, &v)| (v * (1.0 - p)).ln() - u)
        .collect();
    (u, u1)
}

/// Pool-adjacent-violators on integer counts.
///
/// Maintains a stack of blocks `(successes, totals)`; a new category starts
/// its own block, then merges leftward while the previous block's pooled mean
/// strictly exceeds the current one's. Means `s/t` are compared via
/// `s_prev * t_cur > s_cur * t_prev` in 128-bit arithmetic, which is exact
/// for any counts that fit in `u64`. Ties never merge: equal neighbors are
/// already ordered, and keeping them separate leaves the fitted values
/// unchanged.
fn pava_counts(successes: &[u64], totals: &[u64]) -> Vec<f64> {
    struct Block {
        succ: u64,
        tot: u64,
        len: usize,
    }

    let mut blocks: Vec<Block> = Vec::with_capacity(successes.len());
    for (&s, &t) in successes.iter().zip(totals) {
        blocks.push(Block {
            succ: s,
            tot: t,
            len: 1,
        });
        while blocks.len() > 1 {
            let cur = &blocks[blocks.len() - 1];
            let prev = &blocks[blocks.len() - 2];
            let violates =
                (prev.succ as u128) * (cur.tot as u128) > (cur.succ as u128) * (prev.tot as u128);
            if !violates {
                break;
            }
            let cur = blocks.pop().expect("stack has at least two blocks");
            let prev = blocks.last_mut().expect("stack has at least one block");
            prev.succ += cur.succ;
            prev.tot += cur.tot;
            prev.len += cur.len;
        }
    }

    let mut out = Vec::with_capacity(successes.len());
    for block in &blocks {
        let value = block.succ as f64 / block.tot as f64;
        out.extend(std::iter::repeat_n(value, block.len));
    }
    out
}
