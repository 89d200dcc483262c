//! Shared helpers for the acceptance suite: independent re-implementations
//! used as oracles, random problem generators, and the per-criterion
//! reporting convention.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use isobin::model::IsotonicSample;

/// Deterministic generator for a criterion's random instances.
pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Prints the criterion's verdict line and fails the test on any recorded
/// violation. Details should name the pinned tolerances.
pub fn report(criterion: u32, failures: &[String], details: &str) {
    if failures.is_empty() {
        println!("criterion {criterion}: pass — {details}");
    } else {
        println!(
            "criterion {criterion}: fail — {} violation(s); {details}",
            failures.len()
        );
        panic!("criterion {criterion} failed:\n{}", failures.join("\n"));
    }
}

/// Collects a failure message when `ok` is false.
pub fn check(failures: &mut Vec<String>, ok: bool, message: impl FnOnce() -> String) {
    if !ok {
        failures.push(message());
    }
}

/// The worked-example dataset used throughout the goldens.
pub fn malformation() -> IsotonicSample {
    IsotonicSample::new(&[(17114, 48), (14502, 38), (793, 5), (165, 2)]).unwrap()
}

/// Independent isotonic-regression oracle: repeatedly merge any adjacent
/// violating pair (exact integer cross-multiplication) until none remains,
/// then expand block means. Deliberately structured differently from the
/// library's single-pass stack algorithm.
pub fn pava_by_repeated_scan(totals: &[u64], successes: &[u64]) -> Vec<f64> {
    #[derive(Clone, Copy)]
    struct Block {
        successes: u64,
        total: u64,
        len: usize,
    }
    let mut blocks: Vec<Block> = totals
        .iter()
        .zip(successes)
        .map(|(&total, &successes)| Block {
            successes,
            total,
            len: 1,
        })
        .collect();
    loop {
        let mut merged = false;
        let mut i = 0;
        while i + 1 < blocks.len() {
            let a = blocks[i];
            let b = blocks[i + 1];
            // Strict violation: a's proportion exceeds b's.
            if u128::from(a.successes) * u128::from(b.total)
                > u128::from(b.successes) * u128::from(a.total)
            {
                blocks[i] = Block {
                    successes: a.successes + b.successes,
                    total: a.total + b.total,
                    len: a.len + b.len,
                };
                blocks.remove(i + 1);
                merged = true;
            } else {
                i += 1;
            }
        }
        if !merged {
            break;
        }
    }
    blocks
        .iter()
        .flat_map(|b| std::iter::repeat_n(b.successes as f64 / b.total as f64, b.len))
        .collect()
}

/// Exhaustive active-set oracle for the cone projection: tries every
/// candidate positive set, keeps the feasible stationary point with the
/// smallest objective. Exponential in the dimension; only for small cases.
pub fn enumerate_projection(z: &[f64], v: &DMatrix<f64>) -> Vec<f64> {
    let dim = z.len();
    let m = v.clone().try_inverse().expect("test covariances invert");
    let z_vec = DVector::from_column_slice(z);
    let mz = &m * &z_vec;

    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << dim) {
        let support: Vec<usize> = (0..dim).filter(|&i| mask & (1 << i) != 0).collect();
        let mut zeta = vec![0.0; dim];
        if !support.is_empty() {
            let k = support.len();
            let m_pp = DMatrix::from_fn(k, k, |a, b| m[(support[a], support[b])]);
            let rhs = DVector::from_fn(k, |a, _| mz[support[a]]);
            let Some(solution) = m_pp.lu().solve(&rhs) else {
                continue;
            };
            if solution.iter().any(|&x| x < -1e-9) {
                continue;
            }
            for (slot, &i) in support.iter().enumerate() {
                zeta[i] = solution[slot].max(0.0);
            }
        }
        let diff = DVector::from_fn(dim, |i, _| z[i] - zeta[i]);
        let objective = (diff.transpose() * &m * &diff)[(0, 0)];
        if best.as_ref().is_none_or(|(b, _)| objective < *b) {
            best = Some((objective, zeta));
        }
    }
    best.expect("the empty support is always feasible").1
}

/// A random sample with every category count strictly between 0 and the
/// total, so all estimates and statistics are defined.
pub fn random_interior_sample(rng: &mut ChaCha12Rng) -> IsotonicSample {
    let categories = rng.gen_range(2..=6);
    let rows: Vec<(u64, u64)> = (0..categories)
        .map(|_| {
            let total = rng.gen_range(5..=200u64);
            let successes = rng.gen_range(1..total);
            (total, successes)
        })
        .collect();
    IsotonicSample::new(&rows).unwrap()
}

/// A random well-conditioned covariance matrix `A^T A + 0.1 I`.
pub fn random_covariance(rng: &mut ChaCha12Rng, dim: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
    a.transpose() * &a + DMatrix::identity(dim, dim) * 0.1
}
