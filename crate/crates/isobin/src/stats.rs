//! The test statistics for homogeneity against the isotonic alternative.
//!
//! Three Wald-type statistics built on the log-linear parameter:
//!
//! * `W`: quadratic form of the isotonic interactions in the null metric,
//! * `H`: full-parameter distance between the isotonic and pooled fits,
//! * `D`: difference of distances from the unrestricted fit;
//!
//! and two divergence families indexed by `lambda`:
//!
//! * `T_lambda = 2n (d_lambda(p-, p^) - d_lambda(p-, p~))`,
//! * `S_lambda = 2n d_lambda(p~, p^)`,
//!
//! where `p-`, `p~`, `p^` are the `2I`-cell vectors of the unrestricted,
//! isotonic and pooled fits. `T_0` is the likelihood-ratio statistic `G2`
//! and `S_1` is the Pearson-type statistic `X2`; both closed forms are
//! exposed for cross-checking. All statistics share the same chi-bar-squared
//! calibration (see [`crate::chibar`]).
//!
//! A statistic can be *undefined* on a given sample — boundary estimates
//! have no log-odds, and some divergences are infinite at empty cells. That
//! is an expected outcome, encoded in [`StatOutcome`], not an error.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::divergence::{power_divergence, CellVector};
use crate::estimate::EstimateTriple;
use crate::model::{
    fisher_info, fisher_info_null, theta_from_pi, DesignMatrices, IsotonicSample, PiVector,
    ThetaVector,
};

/// The divergence indices of the reference results table:
/// `-1.5, -1, -0.5, 0, 2/3, 1`. Includes the likelihood-ratio (`T_0`),
/// Pearson (`S_1`) and Cressie–Read (`2/3`) members.
pub const CANONICAL_LAMBDAS: [f64; 6] = [-1.5, -1.0, -0.5, 0.0, 2.0 / 3.0, 1.0];

/// Which statistic a [`StatValue`] carries. The divergence families carry
/// their index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatKind {
    W,
    H,
    D,
    T(f64),
    S(f64),
}

impl StatKind {
    /// Family letter without the index.
    pub fn label(&self) -> &'static str {
        match self {
            StatKind::W => "W",
            StatKind::H => "H",
            StatKind::D => "D",
            StatKind::T(_) => "T",
            StatKind::S(_) => "S",
        }
    }

    /// The divergence index, when this is a family member.
    pub fn lambda(&self) -> Option<f64> {
        match self {
            StatKind::T(l) | StatKind::S(l) => Some(*l),
            _ => None,
        }
    }
}

impl fmt::Display for StatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatKind::T(l) => write!(f, "T({l})"),
            StatKind::S(l) => write!(f, "S({l})"),
            other => f.write_str(other.label()),
        }
    }
}

/// Why a statistic has no value on a particular sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UndefinedReason {
    /// The pooled proportion is 0 or 1: no category produced both outcomes,
    /// so the null fit sits on the boundary.
    BoundaryPooled,
    /// The isotonic fit has a boundary component, so its log-odds are
    /// infinite.
    BoundaryIsotonic,
    /// The unrestricted fit has a boundary component (some category saw no
    /// successes or no failures).
    BoundaryUnrestricted,
    /// A divergence in the statistic's definition is infinite at this index.
    InfiniteDivergence,
}

impl fmt::Display for UndefinedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            UndefinedReason::BoundaryPooled => "pooled estimate on boundary",
            UndefinedReason::BoundaryIsotonic => "isotonic estimate on boundary",
            UndefinedReason::BoundaryUnrestricted => "unrestricted estimate on boundary",
            UndefinedReason::InfiniteDivergence => "divergence is infinite",
        };
        f.write_str(text)
    }
}

/// A computed statistic: either a nonnegative value or the reason it is
/// undefined on this sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatOutcome {
    Defined(f64),
    Undefined(UndefinedReason),
}

impl StatOutcome {
    /// The value, when defined.
    pub fn value(&self) -> Option<f64> {
        match self {
            StatOutcome::Defined(v) => Some(*v),
            StatOutcome::Undefined(_) => None,
        }
    }

    /// The reason, when undefined.
    pub fn reason(&self) -> Option<UndefinedReason> {
        match self {
            StatOutcome::Defined(_) => None,
            StatOutcome::Undefined(r) => Some(*r),
        }
    }

    /// True when a value is present.
    pub fn is_defined(&self) -> bool {
        matches!(self, StatOutcome::Defined(_))
    }
}

/// A statistic together with its identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatValue {
    pub kind: StatKind,
    pub outcome: StatOutcome,
}

impl StatValue {
    fn defined(kind: StatKind, value: f64) -> Self {
        // Clamp tiny negatives from rounding; every statistic is a
        // nonnegative quantity by construction.
        Self {
            kind,
            outcome: StatOutcome::Defined(value.max(0.0)),
        }
    }

    fn undefined(kind: StatKind, reason: UndefinedReason) -> Self {
        Self {
            kind,
            outcome: StatOutcome::Undefined(reason),
        }
    }
}

fn quadratic_form(matrix: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (v.transpose() * matrix * v)[(0, 0)]
}

fn theta_diff(a: &ThetaVector, b: &ThetaVector) -> DVector<f64> {
    DVector::from_iterator(
        a.len(),
        a.values().iter().zip(b.values()).map(|(x, y)| x - y),
    )
}

/// The Wald statistic `W`, by the simplified interaction-block form
/// `W = n pi0^ (1 - pi0^) (theta~*)^T Sigma_nu* (theta~*)`.
///
/// Undefined when the pooled estimate is on the boundary or the isotonic fit
/// has no log-odds. See [`wald_w_general`] for the equivalent full matrix
/// form kept as a cross-check.
pub fn wald_w(est: &EstimateTriple, sample: &IsotonicSample) -> StatValue {
    let kind = StatKind::W;
    if !(est.pi0_hat > 0.0 && est.pi0_hat < 1.0) {
        return StatValue::undefined(kind, UndefinedReason::BoundaryPooled);
    }
    let theta_tilde = match &est.theta_tilde {
        Some(t) => t,
        None => return StatValue::undefined(kind, UndefinedReason::BoundaryIsotonic),
    };
    let nu = sample.nu();
    let star = nu.star();
    let t = theta_tilde.interactions();
    // (theta*)^T (diag(nu*) - nu* nu*^T) theta* = sum nu_i t_i^2 - (sum nu_i t_i)^2.
    let weighted_sq: f64 = star.iter().zip(t).map(|(&v, &x)| v * x * x).sum();
    let weighted: f64 = star.iter().zip(t).map(|(&v, &x)| v * x).sum();
    let n = sample.grand_total() as f64;
    let value = n * est.pi0_hat * (1.0 - est.pi0_hat) * (weighted_sq - weighted * weighted);
    StatValue::defined(kind, value)
}

/// The Wald statistic `W` by the general constrained form
/// `n theta~^T R^T (R I_F^{-1}(theta^) R^T)^{-1} R theta~`.
///
/// Algebraically identical to [`wald_w`]; retained so the simplification can
/// be verified on arbitrary samples. Prefer [`wald_w`] in production code:
/// it avoids two matrix inversions.
pub fn wald_w_general(est: &EstimateTriple, sample: &IsotonicSample) -> StatValue {
    let kind = StatKind::W;
    if !(est.pi0_hat > 0.0 && est.pi0_hat < 1.0) {
        return StatValue::undefined(kind, UndefinedReason::BoundaryPooled);
    }
    let theta_tilde = match &est.theta_tilde {
        Some(t) => t,
        None => return StatValue::undefined(kind, UndefinedReason::BoundaryIsotonic),
    };
    let nu = sample.nu();
    let dm = DesignMatrices::new(sample.categories());
    let info = fisher_info_null(est.pi0_hat, &nu).expect("interior pooled estimate");
    let info_inv = info
        .try_inverse()
        .expect("null information is positive definite at interior pi0");
    let middle = (&dm.r * info_inv * dm.r.transpose())
        .try_inverse()
        .expect("constraint covariance is positive definite");
    let v = &dm.r * DVector::from_column_slice(theta_tilde.values());
    let n = sample.grand_total() as f64;
    StatValue::defined(kind, n * quadratic_form(&middle, &v))
}

/// The Wald statistic `H = n (theta~ - theta^)^T I_F(theta^) (theta~ - theta^)`,
/// with the information matrix evaluated at the pooled fit.
pub fn wald_h(est: &EstimateTriple, sample: &IsotonicSample) -> StatValue {
    let kind = StatKind::H;
    if !(est.pi0_hat > 0.0 && est.pi0_hat < 1.0) {
        return StatValue::undefined(kind, UndefinedReason::BoundaryPooled);
    }
    let (theta_tilde, theta_hat) = match (&est.theta_tilde, &est.theta_hat) {
        (Some(t), Some(h)) => (t, h),
        _ => return StatValue::undefined(kind, UndefinedReason::BoundaryIsotonic),
    };
    let nu = sample.nu();
    let info = fisher_info_null(est.pi0_hat, &nu).expect("interior pooled estimate");
    let diff = theta_diff(theta_tilde, theta_hat);
    let n = sample.grand_total() as f64;
    StatValue::defined(kind, n * quadratic_form(&info, &diff))
}

/// The Wald statistic
/// `D = n (theta- - theta^)^T I_F(theta^) (theta- - theta^)
///    - n (theta- - theta~)^T I_F(theta~) (theta- - theta~)`.
///
/// Requires all three fits interior; a category with zero successes or zero
/// failures leaves the unrestricted log-odds infinite and `D` undefined (see
/// [`wald_d_haldane`] for the optional correction).
pub fn wald_d(est: &EstimateTriple, sample: &IsotonicSample) -> StatValue {
    let kind = StatKind::D;
    if !(est.pi0_hat > 0.0 && est.pi0_hat < 1.0) {
        return StatValue::undefined(kind, UndefinedReason::BoundaryPooled);
    }
    let theta_bar = match &est.theta_bar {
        Some(b) => b,
        None => return StatValue::undefined(kind, UndefinedReason::BoundaryUnrestricted),
    };
    wald_d_inner(est, sample, theta_bar)
}

/// `D` with the Haldane–Anscombe correction applied to the *unrestricted*
/// fit only: `theta-` is computed from `(N_i + 1/2) / (n_i + 1)`, which is
/// always interior. The pooled and isotonic fits are untouched, so the
/// statistic still requires those to be interior.
pub fn wald_d_haldane(est: &EstimateTriple, sample: &IsotonicSample) -> StatValue {
    let kind = StatKind::D;
    if !(est.pi0_hat > 0.0 && est.pi0_hat < 1.0) {
        return StatValue::undefined(kind, UndefinedReason::BoundaryPooled);
    }
    let corrected: Vec<f64> = sample
        .successes()
        .iter()
        .zip(sample.totals())
        .map(|(&s, &t)| (s as f64 + 0.5) / (t as f64 + 1.0))
        .collect();
    let pi = PiVector::new(corrected).expect("corrected proportions are interior");
    let theta_bar = theta_from_pi(&pi).expect("interior proportions have finite log-odds");
    wald_d_inner(est, sample, &theta_bar)
}

fn wald_d_inner(
    est: &EstimateTriple,
    sample: &IsotonicSample,
    theta_bar: &ThetaVector,
) -> StatValue {
    let kind = StatKind::D;
    let (theta_tilde, theta_hat) = match (&est.theta_tilde, &est.theta_hat) {
        (Some(t), Some(h)) => (t, h),
        _ => return StatValue::undefined(kind, UndefinedReason::BoundaryIsotonic),
    };
    let nu = sample.nu();
    let info_null = fisher_info_null(est.pi0_hat, &nu).expect("interior pooled estimate");
    let info_tilde = fisher_info(&est.pi_tilde, &nu).expect("theta~ defined implies pi~ interior");
    let n = sample.grand_total() as f64;
    let first = quadratic_form(&info_null, &theta_diff(theta_bar, theta_hat));
    let second = quadratic_form(&info_tilde, &theta_diff(theta_bar, theta_tilde));
    StatValue::defined(kind, n * (first - second))
}

/// Cell vectors of the three fits: observed, isotonic, pooled. `None` when
/// the pooled estimate is on the boundary (then the pooled cell vector has
/// empty cells in every category and no divergence statistic is defined).
fn fit_cells(
    est: &EstimateTriple,
    sample: &IsotonicSample,
) -> Option<(CellVector, CellVector, CellVector)> {
    if !(est.pi0_hat > 0.0 && est.pi0_hat < 1.0) {
        return None;
    }
    let nu = sample.nu();
    let observed = CellVector::observed(sample);
    let isotonic = CellVector::from_pi_nu(&est.pi_tilde, &nu)
        .expect("isotonic fit and design yield valid cells");
    let pooled = CellVector::from_pi_nu(
        &PiVector::constant(est.pi0_hat, sample.categories()).expect("interior constant"),
        &nu,
    )
    .expect("pooled fit and design yield valid cells");
    Some((observed, isotonic, pooled))
}

/// The divergence statistic
/// `T_lambda = 2n (d_lambda(p-, p^) - d_lambda(p-, p~))`.
///
/// At `lambda = 0` this is the likelihood-ratio statistic `G2`. Undefined
/// when the pooled estimate is on the boundary or either divergence is
/// infinite (which happens for `lambda <= -1` when some category has an
/// empty observed cell).
pub fn stat_t(lambda: f64, est: &EstimateTriple, sample: &IsotonicSample) -> StatValue {
    let kind = StatKind::T(lambda);
    let (observed, isotonic, pooled) = match fit_cells(est, sample) {
        Some(c) => c,
        None => return StatValue::undefined(kind, UndefinedReason::BoundaryPooled),
    };
    let to_pooled =
        power_divergence(lambda, &observed, &pooled).expect("validated cells of equal length");
    let to_isotonic =
        power_divergence(lambda, &observed, &isotonic).expect("validated cells of equal length");
    if !to_pooled.is_finite() || !to_isotonic.is_finite() {
        return StatValue::undefined(kind, UndefinedReason::InfiniteDivergence);
    }
    let n = sample.grand_total() as f64;
    StatValue::defined(kind, 2.0 * n * (to_pooled - to_isotonic))
}

/// The divergence statistic `S_lambda = 2n d_lambda(p~, p^)`.
///
/// At `lambda = 1` this is Bartholomew's `X2`. Undefined when the pooled
/// estimate is on the boundary, or for `lambda <= -1` when the isotonic fit
/// has an empty cell.
pub fn stat_s(lambda: f64, est: &EstimateTriple, sample: &IsotonicSample) -> StatValue {
    let kind = StatKind::S(lambda);
    let (_, isotonic, pooled) = match fit_cells(est, sample) {
        Some(c) => c,
        None => return StatValue::undefined(kind, UndefinedReason::BoundaryPooled),
    };
    let d = power_divergence(lambda, &isotonic, &pooled).expect("validated cells of equal length");
    if !d.is_finite() {
        return StatValue::undefined(kind, UndefinedReason::InfiniteDivergence);
    }
    let n = sample.grand_total() as f64;
    StatValue::defined(kind, 2.0 * n * d)
}

/// The likelihood-ratio statistic by its closed form,
/// `G2 = 2 sum_i [N_i ln(pi~_i / pi0^) + (n_i - N_i) ln((1-pi~_i)/(1-pi0^))]`,
/// with empty-count terms dropped. Equals `T_0`; kept as an independent
/// route for verification. `None` when the pooled estimate is on the
/// boundary.
pub fn g_squared(est: &EstimateTriple, sample: &IsotonicSample) -> Option<f64> {
    if !(est.pi0_hat > 0.0 && est.pi0_hat < 1.0) {
        return None;
    }
    let mut total = 0.0;
    for i in 0..sample.categories() {
        let successes = sample.successes()[i] as f64;
        let failures = sample.failures(i) as f64;
        let fitted = est.pi_tilde.values()[i];
        if successes > 0.0 {
            total += successes * (fitted / est.pi0_hat).ln();
        }
        if failures > 0.0 {
            total += failures * ((1.0 - fitted) / (1.0 - est.pi0_hat)).ln();
        }
    }
    Some((2.0 * total).max(0.0))
}

/// Bartholomew's statistic by its closed form,
/// `X2 = (pi0^ (1 - pi0^))^{-1} sum_i n_i (pi~_i - pi0^)^2`. Equals `S_1`;
/// kept as an independent route for verification. `None` when the pooled
/// estimate is on the boundary.
pub fn bartholomew_x2(est: &EstimateTriple, sample: &IsotonicSample) -> Option<f64> {
    if !(est.pi0_hat > 0.0 && est.pi0_hat < 1.0) {
        return None;
    }
    let scale = est.pi0_hat * (1.0 - est.pi0_hat);
    let total: f64 = est
        .pi_tilde
        .values()
        .iter()
        .zip(sample.totals())
        .map(|(&p, &t)| t as f64 * (p - est.pi0_hat) * (p - est.pi0_hat))
        .sum();
    Some(total / scale)
}

/// Every statistic of the standard battery: `W`, `H`, `D`, then `T_lambda`
/// and `S_lambda` over the given index grid. `haldane` switches `D` to the
/// corrected variant.
pub fn all_statistics(
    est: &EstimateTriple,
    sample: &IsotonicSample,
    lambdas: &[f64],
    haldane: bool,
) -> Vec<StatValue> {
    let mut out = Vec::with_capacity(3 + 2 * lambdas.len());
    out.push(wald_w(est, sample));
    out.push(wald_h(est, sample));
    out.push(if haldane {
        wald_d_haldane(est, sample)
    } else {
        wald_d(est, sample)
    });
    for &l in lambdas {
        out.push(stat_t(l, est, sample));
    }
    for &l in lambdas {
        out.push(stat_s(l, est, sample));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::estimate_all;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn malformation() -> IsotonicSample {
        IsotonicSample::new(&[(17114, 48), (14502, 38), (793, 5), (165, 2)]).unwrap()
    }

    /// The published 4-decimal table for the malformation data.
    const TABLE_LAMBDAS: [f64; 6] = [-1.5, -1.0, -0.5, 0.0, 2.0 / 3.0, 1.0];
    const TABLE_T: [f64; 6] = [3.3068, 3.8173, 4.4920, 5.4057, 7.2076, 8.4895];
    const TABLE_S: [f64; 6] = [3.2993, 3.8124, 4.4896, 5.4057, 7.2107, 8.4942];

    #[test]
    fn wald_statistics_match_reference_table() {
        let s = malformation();
        let est = estimate_all(&s);
        let w = wald_w(&est, &s).outcome.value().unwrap();
        let h = wald_h(&est, &s).outcome.value().unwrap();
        let d = wald_d(&est, &s).outcome.value().unwrap();
        assert_abs_diff_eq!(w, 2.5979, epsilon = 1e-4);
        assert_abs_diff_eq!(h, 2.6363, epsilon = 1e-4);
        assert_abs_diff_eq!(d, 2.6462, epsilon = 1e-4);
    }

    #[test]
    fn divergence_statistics_match_reference_table() {
        let s = malformation();
        let est = estimate_all(&s);
        for (i, &lambda) in TABLE_LAMBDAS.iter().enumerate() {
            let t = stat_t(lambda, &est, &s).outcome.value().unwrap();
            let sv = stat_s(lambda, &est, &s).outcome.value().unwrap();
            assert_abs_diff_eq!(t, TABLE_T[i], epsilon = 1e-4);
            assert_abs_diff_eq!(sv, TABLE_S[i], epsilon = 1e-4);
        }
    }

    #[test]
    fn simplified_w_equals_general_w() {
        let s = malformation();
        let est = estimate_all(&s);
        let simple = wald_w(&est, &s).outcome.value().unwrap();
        let general = wald_w_general(&est, &s).outcome.value().unwrap();
        assert_abs_diff_eq!(simple, general, epsilon = 1e-10 * simple.max(1.0));
    }

    #[test]
    fn t_zero_equals_g_squared_closed_form() {
        let s = malformation();
        let est = estimate_all(&s);
        let t0 = stat_t(0.0, &est, &s).outcome.value().unwrap();
        let g2 = g_squared(&est, &s).unwrap();
        assert_abs_diff_eq!(t0, g2, epsilon = 1e-10 * g2.max(1.0));
    }

    #[test]
    fn s_one_equals_bartholomew_closed_form() {
        let s = malformation();
        let est = estimate_all(&s);
        let s1 = stat_s(1.0, &est, &s).outcome.value().unwrap();
        let x2 = bartholomew_x2(&est, &s).unwrap();
        assert_abs_diff_eq!(s1, x2, epsilon = 1e-10 * x2.max(1.0));
    }

    #[test]
    fn t_zero_equals_s_zero_for_pooled_fits() {
        // A block property of the isotonic fit: the KL decomposition makes
        // the T and S routes coincide at lambda = 0.
        let s = malformation();
        let est = estimate_all(&s);
        let t0 = stat_t(0.0, &est, &s).outcome.value().unwrap();
        let s0 = stat_s(0.0, &est, &s).outcome.value().unwrap();
        assert_abs_diff_eq!(t0, s0, epsilon = 1e-12 * t0.max(1.0));
    }

    #[test]
    fn constant_isotonic_fit_zeroes_everything() {
        // Decreasing data pools to a single block equal to the pooled mean.
        let s = IsotonicSample::new(&[(10, 7), (10, 5), (10, 3)]).unwrap();
        let est = estimate_all(&s);
        assert_eq!(est.pi_tilde.values(), &[0.5, 0.5, 0.5]);
        assert_eq!(wald_w(&est, &s).outcome.value(), Some(0.0));
        assert_eq!(wald_h(&est, &s).outcome.value(), Some(0.0));
        for lambda in [-1.5, -0.5, 0.0, 1.0, 2.0] {
            assert_eq!(stat_t(lambda, &est, &s).outcome.value(), Some(0.0));
            assert_eq!(stat_s(lambda, &est, &s).outcome.value(), Some(0.0));
        }
    }

    #[test]
    fn feasible_data_makes_d_single_term() {
        // Already isotonic data: theta~ = theta-, second term vanishes.
        let s = IsotonicSample::new(&[(20, 2), (20, 6), (20, 11)]).unwrap();
        let est = estimate_all(&s);
        assert_eq!(est.pi_tilde.values(), est.pi_bar.values());
        let d = wald_d(&est, &s).outcome.value().unwrap();
        let nu = s.nu();
        let info = fisher_info_null(est.pi0_hat, &nu).unwrap();
        let diff = theta_diff(
            est.theta_bar.as_ref().unwrap(),
            est.theta_hat.as_ref().unwrap(),
        );
        let expected = s.grand_total() as f64 * quadratic_form(&info, &diff);
        assert_abs_diff_eq!(d, expected, epsilon = 1e-12 * expected.max(1.0));
        assert!(d >= 0.0);
    }

    #[test]
    fn boundary_policies() {
        // Zero successes in the top category only: PAVA pools it with the
        // positive category below, so the isotonic fit is interior and W/H
        // stay defined, but the unrestricted fit is on the boundary and D
        // is undefined.
        let s = IsotonicSample::new(&[(30, 2), (30, 6), (30, 0)]).unwrap();
        let est = estimate_all(&s);
        assert!(est.theta_bar.is_none());
        assert!(est.theta_tilde.is_some());
        assert!(wald_w(&est, &s).outcome.is_defined());
        assert!(wald_h(&est, &s).outcome.is_defined());
        assert_eq!(
            wald_d(&est, &s).outcome.reason(),
            Some(UndefinedReason::BoundaryUnrestricted)
        );
        // The Haldane variant repairs exactly this case.
        assert!(wald_d_haldane(&est, &s).outcome.is_defined());

        // Zero successes in the bottom category stay at the boundary after
        // pooling: W and H become undefined too.
        let s = IsotonicSample::new(&[(30, 0), (30, 4), (30, 9)]).unwrap();
        let est = estimate_all(&s);
        assert!(est.theta_tilde.is_none());
        assert_eq!(
            wald_w(&est, &s).outcome.reason(),
            Some(UndefinedReason::BoundaryIsotonic)
        );
        assert_eq!(
            wald_h(&est, &s).outcome.reason(),
            Some(UndefinedReason::BoundaryIsotonic)
        );
        // T and S at lambda <= -1 hit an infinite divergence there; at
        // lambda = 0 or 1 they remain defined.
        assert_eq!(
            stat_t(-1.0, &est, &s).outcome.reason(),
            Some(UndefinedReason::InfiniteDivergence)
        );
        assert_eq!(
            stat_s(-1.5, &est, &s).outcome.reason(),
            Some(UndefinedReason::InfiniteDivergence)
        );
        assert!(stat_t(0.0, &est, &s).outcome.is_defined());
        assert!(stat_s(1.0, &est, &s).outcome.is_defined());

        // No successes anywhere: the pooled estimate is 0 and everything is
        // undefined with the pooled-boundary reason.
        let s = IsotonicSample::new(&[(30, 0), (30, 0)]).unwrap();
        let est = estimate_all(&s);
        for stat in all_statistics(&est, &s, &[0.0, 1.0], false) {
            assert_eq!(
                stat.outcome.reason(),
                Some(UndefinedReason::BoundaryPooled),
                "{} should be undefined at the pooled boundary",
                stat.kind
            );
        }
    }

    #[test]
    fn scale_structure_is_exact_for_powers_of_two() {
        // Multiplying all counts by c = 4 leaves every proportion bit-equal
        // and multiplies each statistic by exactly 4.
        let s = IsotonicSample::new(&[(17, 3), (23, 4), (11, 6), (19, 7)]).unwrap();
        let scaled = IsotonicSample::new(&[(68, 12), (92, 16), (44, 24), (76, 28)]).unwrap();
        let est = estimate_all(&s);
        let est_scaled = estimate_all(&scaled);
        let lambdas = [-0.5, 0.0, 2.0 / 3.0, 1.0, 2.0];
        let base = all_statistics(&est, &s, &lambdas, false);
        let big = all_statistics(&est_scaled, &scaled, &lambdas, false);
        for (b, s4) in base.iter().zip(&big) {
            let b = b.outcome.value().unwrap();
            let s4 = s4.outcome.value().unwrap();
            assert_eq!(4.0 * b, s4);
        }
    }

    #[test]
    fn scale_structure_holds_for_general_integers() {
        let s = IsotonicSample::new(&[(17, 3), (23, 4), (11, 6), (19, 7)]).unwrap();
        let scaled = IsotonicSample::new(&[(51, 9), (69, 12), (33, 18), (57, 21)]).unwrap();
        let est = estimate_all(&s);
        let est_scaled = estimate_all(&scaled);
        let lambdas = [0.0, 1.0];
        let base = all_statistics(&est, &s, &lambdas, false);
        let big = all_statistics(&est_scaled, &scaled, &lambdas, false);
        for (b, s3) in base.iter().zip(&big) {
            let b = b.outcome.value().unwrap();
            let s3 = s3.outcome.value().unwrap();
            assert_abs_diff_eq!(3.0 * b, s3, epsilon = 1e-12 * (1.0 + s3.abs()));
        }
    }

    #[test]
    fn all_statistics_layout() {
        let s = malformation();
        let est = estimate_all(&s);
        let stats = all_statistics(&est, &s, &[0.0, 1.0], false);
        assert_eq!(stats.len(), 7);
        assert_eq!(stats[0].kind, StatKind::W);
        assert_eq!(stats[1].kind, StatKind::H);
        assert_eq!(stats[2].kind, StatKind::D);
        assert_eq!(stats[3].kind, StatKind::T(0.0));
        assert_eq!(stats[4].kind, StatKind::T(1.0));
        assert_eq!(stats[5].kind, StatKind::S(0.0));
        assert_eq!(stats[6].kind, StatKind::S(1.0));
    }

    #[test]
    fn stat_kind_display() {
        assert_eq!(StatKind::W.to_string(), "W");
        assert_eq!(StatKind::T(0.5).to_string(), "T(0.5)");
        assert_eq!(StatKind::S(-1.0).to_string(), "S(-1)");
        assert_eq!(StatKind::T(0.5).lambda(), Some(0.5));
        assert_eq!(StatKind::H.lambda(), None);
    }

    fn arbitrary_sample() -> impl Strategy<Value = IsotonicSample> {
        proptest::collection::vec((5u64..120, 1u64..119), 2..6).prop_map(|rows| {
            let rows: Vec<(u64, u64)> = rows
                .into_iter()
                .map(|(t, s)| (t, s.min(t.saturating_sub(1)).max(1)))
                .collect();
            IsotonicSample::new(&rows).unwrap()
        })
    }

    proptest! {
        #[test]
        fn identities_on_random_samples(s in arbitrary_sample()) {
            let est = estimate_all(&s);
            // Interior by construction (1 <= N_i <= n_i - 1).
            let w_simple = wald_w(&est, &s).outcome.value().unwrap();
            let w_general = wald_w_general(&est, &s).outcome.value().unwrap();
            prop_assert!((w_simple - w_general).abs() <= 1e-10 * (1.0 + w_simple.abs()));

            let t0 = stat_t(0.0, &est, &s).outcome.value().unwrap();
            let g2 = g_squared(&est, &s).unwrap();
            prop_assert!((t0 - g2).abs() <= 1e-10 * (1.0 + g2.abs()));

            let s1 = stat_s(1.0, &est, &s).outcome.value().unwrap();
            let x2 = bartholomew_x2(&est, &s).unwrap();
            prop_assert!((s1 - x2).abs() <= 1e-10 * (1.0 + x2.abs()));
        }

        #[test]
        fn defined_statistics_are_nonnegative(s in arbitrary_sample(), lambda in -2.0f64..3.0) {
            let est = estimate_all(&s);
            for stat in all_statistics(&est, &s, &[lambda], false) {
                if let Some(v) = stat.outcome.value() {
                    prop_assert!(v >= 0.0, "{} = {v} < 0", stat.kind);
                }
            }
        }

        #[test]
        fn h_dominates_w(s in arbitrary_sample()) {
            // Expanding the arrowhead quadratic form gives
            // H = W + n pi0(1-pi0) (theta~_1 - theta^_1 + sum nu* theta~*)^2,
            // so H >= W pointwise.
            let est = estimate_all(&s);
            let w = wald_w(&est, &s).outcome.value().unwrap();
            let h = wald_h(&est, &s).outcome.value().unwrap();
            prop_assert!(h >= w - 1e-10 * (1.0 + h.abs()));
            if est.pi_tilde.values().windows(2).all(|p| p[0] == p[1]) {
                prop_assert!(w == 0.0 && h == 0.0);
            }
        }
    }
}
