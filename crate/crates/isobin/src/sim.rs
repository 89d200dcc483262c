//! Size/power simulation engine: scenario catalog, deterministic parallel
//! replication, the Dale accuracy criterion, and relative efficiencies.
//!
//! A scenario fixes per-category totals `n_i` and true probabilities
//! `pi_i`. Each replication draws `N_i ~ Bin(n_i, pi_i)`, computes the whole
//! statistic battery, and tests each against the scenario's chi-bar-squared
//! distribution (built once from the fixed design). The recorded estimate
//! per statistic is the rejection proportion over the replications where the
//! statistic was defined; undefined replications are counted and excluded,
//! never imputed.
//!
//! # Determinism
//!
//! Replication `r` draws from ChaCha12 seeded with the run seed on stream
//! `r`, so results are bit-identical for a given `(scenario, reps, alpha,
//! lambdas, seed, weights)` regardless of thread count or scheduling.
//! Monte Carlo weight estimation, when selected, uses the run seed XOR
//! [`WEIGHTS_SEED_SALT`] so its streams never overlap the replication
//! streams.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chibar::{chibar_pvalue, cone_covariance, resolve_weights, WeightsInfo, WeightsSpec};
use crate::estimate::estimate_all;
use crate::model::{inv_logit, logit, IsotonicSample};
use crate::stats::{all_statistics, StatKind};
use crate::{Error, Result};

/// Salt XORed into the run seed to derive the seed for Monte Carlo weight
/// estimation, keeping its generator streams disjoint from the replication
/// streams.
pub const WEIGHTS_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// A simulation scenario: fixed totals and true success probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    id: String,
    totals: Vec<u64>,
    pis: Vec<f64>,
    is_null: bool,
}

impl Scenario {
    /// A user-defined scenario. Totals must be positive, probabilities in
    /// `[0, 1]`, lengths equal, at least two categories. `is_null` is
    /// derived: true iff all probabilities are equal.
    pub fn custom(id: impl Into<String>, totals: Vec<u64>, pis: Vec<f64>) -> Result<Self> {
        if totals.len() != pis.len() {
            return Err(Error::LengthMismatch {
                left: totals.len(),
                right: pis.len(),
            });
        }
        if totals.len() < 2 {
            return Err(Error::TooFewCategories(totals.len()));
        }
        for (index, &t) in totals.iter().enumerate() {
            if t == 0 {
                return Err(Error::ZeroTotal { index });
            }
        }
        for (index, &p) in pis.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ProbabilityOutOfRange { index, value: p });
            }
        }
        let is_null = pis.windows(2).all(|w| w[0] == w[1]);
        Ok(Self {
            id: id.into(),
            totals,
            pis,
            is_null,
        })
    }

    /// Scenario identifier (catalog ids look like `"A-0"`).
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Per-category totals.
    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    /// True success probabilities.
    pub fn pis(&self) -> &[f64] {
        &self.pis
    }

    /// True exactly when all probabilities are equal (size scenario).
    pub fn is_null(&self) -> bool {
        self.is_null
    }
}

/// The 24 built-in scenarios: letters A-F cross four probability vectors
/// (index 0 the null, 1-3 increasingly separated alternatives) with three
/// total-count profiles. A-C use small proportions around 0.05; D-F use
/// moderate proportions around 0.35. A/D are the smallest samples
/// `(40,30,20,10)`, B/E use `(60,45,30,15)`, C/F use `(100,75,50,25)`.
pub fn scenario_catalog() -> Vec<Scenario> {
    let small_totals: [&[u64; 4]; 3] = [&[40, 30, 20, 10], &[60, 45, 30, 15], &[100, 75, 50, 25]];
    let low_pis: [[f64; 4]; 4] = [
        [0.05, 0.05, 0.05, 0.05],
        [0.05, 0.10, 0.10, 0.10],
        [0.05, 0.10, 0.125, 0.125],
        [0.05, 0.10, 0.125, 0.135],
    ];
    let mid_pis: [[f64; 4]; 4] = [
        [0.35, 0.35, 0.35, 0.35],
        [0.35, 0.45, 0.45, 0.45],
        [0.35, 0.45, 0.475, 0.475],
        [0.35, 0.45, 0.475, 0.485],
    ];

    let mut out = Vec::with_capacity(24);
    for (letter_block, pis_block) in [(0usize, &low_pis), (3usize, &mid_pis)] {
        for (offset, totals) in small_totals.iter().enumerate() {
            let letter = (b'A' + (letter_block + offset) as u8) as char;
            for (variant, pis) in pis_block.iter().enumerate() {
                out.push(
                    Scenario::custom(format!("{letter}-{variant}"), totals.to_vec(), pis.to_vec())
                        .expect("catalog entries are valid"),
                );
            }
        }
    }
    out
}

/// Looks up a catalog scenario by id (case-sensitive, e.g. `"D-2"`).
pub fn find_scenario(id: &str) -> Result<Scenario> {
    scenario_catalog()
        .into_iter()
        .find(|s| s.id == id)
        .ok_or_else(|| Error::UnknownScenario(id.to_string()))
}

/// Per-statistic simulation tally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    /// Family letter: `W`, `H`, `D`, `T` or `S`.
    pub statistic: String,
    /// Divergence index for `T`/`S`; `null` for Wald statistics.
    pub lambda: Option<f64>,
    /// Replications where the statistic was defined and `p <= alpha`.
    pub rejections: u64,
    /// Replications where the statistic was defined.
    pub defined: u64,
    /// Replications excluded because the statistic was undefined.
    pub undefined: u64,
    /// `rejections / defined`; `null` when no replication was defined.
    pub estimate: Option<f64>,
}

/// Result of one scenario run; serializes to JSON and tidy CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub scenario: String,
    /// `"size"` for null scenarios, `"power"` otherwise.
    pub kind: String,
    pub reps: u64,
    pub alpha: f64,
    pub seed: u64,
    pub weights: WeightsInfo,
    pub statistics: Vec<StatResult>,
}

impl SimResult {
    /// True when this run estimated test size (null scenario).
    pub fn is_null(&self) -> bool {
        self.kind == "size"
    }

    /// The tally for a given statistic, if present.
    pub fn stat(&self, kind: StatKind) -> Option<&StatResult> {
        self.statistics.iter().find(|s| {
            s.statistic == kind.label()
                && match (s.lambda, kind.lambda()) {
                    (Some(a), Some(b)) => a == b,
                    (None, None) => true,
                    _ => false,
                }
        })
    }

    /// Pretty JSON encoding (stable field order; byte-identical after a
    /// parse/serialize round trip).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("simulation results always serialize")
    }

    /// Tidy CSV: header plus one row per statistic. Undefined estimates are
    /// written as `n/a`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,statistic,lambda,estimate,kind,reps,undefined\n");
        for s in &self.statistics {
            let lambda = s.lambda.map(|l| l.to_string()).unwrap_or_default();
            let estimate = s
                .estimate
                .map(|e| e.to_string())
                .unwrap_or_else(|| "n/a".to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.scenario, s.statistic, lambda, estimate, self.kind, self.reps, s.undefined
            ));
        }
        out
    }
}

/// Runs one scenario: `reps` replications at level `alpha`, computing
/// `W`, `H`, `D` and `T_lambda`, `S_lambda` over the given index grid.
///
/// The chi-bar distribution is built once from the scenario's fixed design
/// (the sampling fractions are exact, not estimated, because totals are
/// prefixed). Rejection means `p <= alpha`. See the module docs for the
/// determinism contract.
pub fn run_scenario(
    scenario: &Scenario,
    reps: u64,
    alpha: f64,
    lambdas: &[f64],
    seed: u64,
    weights: WeightsSpec,
) -> Result<SimResult> {
    if reps == 0 {
        return Err(Error::ZeroReplications {
            context: "run_scenario",
        });
    }
    if alpha.is_nan() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if lambdas.is_empty() {
        return Err(Error::EmptyLambdaGrid);
    }

    let nu = crate::model::NuVector::from_totals(&scenario.totals);
    let metric = cone_covariance(&nu)?;
    let dist = resolve_weights(&metric, weights, seed ^ WEIGHTS_SEED_SALT)?;

    let kinds: Vec<StatKind> = {
        let mut k = vec![StatKind::W, StatKind::H, StatKind::D];
        k.extend(lambdas.iter().map(|&l| StatKind::T(l)));
        k.extend(lambdas.iter().map(|&l| StatKind::S(l)));
        k
    };
    let samplers: Vec<Binomial> = scenario
        .totals
        .iter()
        .zip(&scenario.pis)
        .map(|(&n, &p)| Binomial::new(n, p).expect("validated scenario probabilities"))
        .collect();

    // Per-statistic (rejections, defined, undefined), summed commutatively.
    let tally = (0..reps)
        .into_par_iter()
        .fold(
            || vec![[0u64; 3]; kinds.len()],
            |mut acc, rep| {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                rng.set_stream(rep);
                let rows: Vec<(u64, u64)> = scenario
                    .totals
                    .iter()
                    .zip(&samplers)
                    .map(|(&n, sampler)| (n, sampler.sample(&mut rng)))
                    .collect();
                let sample = IsotonicSample::new(&rows).expect("draws are valid counts");
                let est = estimate_all(&sample);
                let stats = all_statistics(&est, &sample, lambdas, false);
                for (slot, stat) in acc.iter_mut().zip(&stats) {
                    match stat.outcome.value() {
                        Some(v) => {
                            slot[1] += 1;
                            if chibar_pvalue(v, &dist) <= alpha {
                                slot[0] += 1;
                            }
                        }
                        None => slot[2] += 1,
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![[0u64; 3]; kinds.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    x[0] += y[0];
                    x[1] += y[1];
                    x[2] += y[2];
                }
                a
            },
        );

    let statistics = kinds
        .iter()
        .zip(&tally)
        .map(|(kind, &[rejections, defined, undefined])| {
            debug_assert_eq!(defined + undefined, reps);
            StatResult {
                statistic: kind.label().to_string(),
                lambda: kind.lambda(),
                rejections,
                defined,
                undefined,
                estimate: (defined > 0).then(|| rejections as f64 / defined as f64),
            }
        })
        .collect();

    Ok(SimResult {
        scenario: scenario.id.clone(),
        kind: if scenario.is_null { "size" } else { "power" }.to_string(),
        reps,
        alpha,
        seed,
        weights: WeightsInfo::from_distribution(&dist),
        statistics,
    })
}

/// Dale's accuracy criterion: the estimated size `alpha_hat` is acceptable
/// at half-width `epsilon` when
/// `|logit(1 - alpha_hat) - logit(1 - alpha)| <= epsilon`.
pub fn dale_check(alpha_hat: f64, alpha: f64, epsilon: f64) -> Result<bool> {
    if alpha.is_nan() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if alpha_hat.is_nan() || alpha_hat <= 0.0 || alpha_hat >= 1.0 {
        return Err(Error::BoundaryRate(alpha_hat));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::NonPositiveEpsilon(epsilon));
    }
    Ok((logit(1.0 - alpha_hat) - logit(1.0 - alpha)).abs() <= epsilon)
}

/// The closed acceptance interval `[lo, hi]` of [`dale_check`]: estimates
/// inside it pass. Obtained by inverting the logit inequality.
pub fn dale_band(alpha: f64, epsilon: f64) -> Result<(f64, f64)> {
    if alpha.is_nan() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::NonPositiveEpsilon(epsilon));
    }
    let center = logit(1.0 - alpha);
    Ok((
        1.0 - inv_logit(center + epsilon),
        1.0 - inv_logit(center - epsilon),
    ))
}

/// Relative efficiency of a test against a baseline test on the same
/// scenario pair: `rho = ((beta_t - alpha_t) - (beta_b - alpha_b)) /
/// (beta_b - alpha_b)`, the relative change in size-corrected power.
/// Positive values favor the test over the baseline.
pub fn efficiency(beta_t: f64, alpha_t: f64, beta_base: f64, alpha_base: f64) -> Result<f64> {
    let base_gain = beta_base - alpha_base;
    if base_gain == 0.0 {
        return Err(Error::ZeroBaselineGain);
    }
    Ok(((beta_t - alpha_t) - base_gain) / base_gain)
}

/// The divergence index grid swept by the simulation study: `-1.5` to `3.0`
/// in steps of `0.3`, merged with [`crate::stats`]'s canonical table grid
/// (notably `-1`, `-0.5`, `2/3` and `1`), sorted ascending.
pub fn sweep_lambdas() -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=15).map(|k| (3.0 * k as f64 - 15.0) / 10.0).collect();
    grid.extend_from_slice(&crate::stats::CANONICAL_LAMBDAS);
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    grid.dedup();
    grid
}
