//! Closed-form yield and entropy quantities.
//!
//! Conditional pair-count expectations are exact rationals built from
//! the binary expansion of C(n,j); floating point only appears at the
//! reporting boundary. The entropy side gives the binary entropy H, the
//! per-run entanglement ceiling n·H(alpha²), and the expected
//! concentrated entropy sum that the ceiling is compared against.

use crate::combinat::{binomial, binomial_expansion, CombinatError};
use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("alpha = {0} outside (0, 1]")]
    AlphaOutOfRange(f64),
    #[error("need at least {min} shared pairs, got {n}")]
    TooFewPairs { n: usize, min: usize },
    #[error(transparent)]
    Combinat(#[from] CombinatError),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// Binary entropy in bits: H(p) = p log2(1/p) + (1-p) log2(1/(1-p)),
/// extended by continuity with H(0) = H(1) = 0.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(AnalysisError::ProbabilityOutOfRange(p));
    }
    let term = |x: f64| if x == 0.0 { 0.0 } else { x * (1.0 / x).log2() };
    Ok(term(p) + term(1.0 - p))
}

fn check_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(AnalysisError::AlphaOutOfRange(alpha));
    }
    Ok(alpha * alpha)
}

/// Probability of observing Hamming weight j on n shared pairs:
/// C(n,j) (alpha²)^{n-j} (1-alpha²)^j.
pub fn weight_probability(alpha: f64, n: usize, j: usize) -> Result<f64> {
    let a2 = check_alpha(alpha)?;
    let c = binomial(n, j)? as f64;
    Ok(c * a2.powi((n - j) as i32) * (1.0 - a2).powi(j as i32))
}

/// Expected entropy of entanglement left after concentrating n pairs:
/// the sum over interior weights j of P(j) log2 C(n,j). Bounded above
/// by the ceiling n H(alpha²); the gap between the two grows only
/// logarithmically in n.
pub fn expected_concentrated_entropy(alpha: f64, n: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if n < 2 {
        return Err(AnalysisError::TooFewPairs { n, min: 2 });
    }
    let mut total = 0.0;
    for j in 1..n {
        let c = binomial(n, j)? as f64;
        total += weight_probability(alpha, n, j)? * c.log2();
    }
    Ok(total)
}

/// The entanglement ceiling n H(alpha²) minus the expected concentrated
/// entropy: what the weight measurement gives up.
pub fn concentration_loss(alpha: f64, n: usize) -> Result<f64> {
    let a2 = check_alpha(alpha)?;
    Ok(n as f64 * binary_entropy(a2)? - expected_concentrated_entropy(alpha, n)?)
}

/// Exact expected number of clean pairs given weight j: each set bit i
/// of the expansion of C(n,j) is a cascade branch of 2^i ranks yielding
/// i pairs, so the mean is the sum of i 2^i / C(n,j) over set bits.
pub fn expected_pairs_given_j(n: usize, j: usize) -> Result<Ratio<i128>> {
    let e = binomial_expansion(n, j)?;
    let mut numer: i128 = 0;
    for i in 0..e.k {
        if e.bit(i) {
            numer += (i as i128) << i;
        }
    }
    Ok(Ratio::new(numer, e.value as i128))
}

/// Closed-form expected yield of a full protocol run, with the
/// floor-log lower bound it dominates and the entropy ceiling it stays
/// under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedYield {
    /// Sum over j of P(j) E[pairs | j], exactly evaluated per term.
    pub expected_pairs: f64,
    /// Sum over all j of P(j) (floor(log2 C(n,j)) - 1); the j = 0 and
    /// j = n terms contribute -P(j).
    pub lower_bound: f64,
    /// Same sum with each term clamped at zero, matching the fact that
    /// realized pair counts are never negative.
    pub lower_bound_clamped: f64,
    /// n H(alpha²).
    pub entropy_ceiling: f64,
}

pub fn expected_pairs_total(alpha: f64, n: usize) -> Result<ExpectedYield> {
    let a2 = check_alpha(alpha)?;
    let mut expected = 0.0;
    let mut lower = 0.0;
    let mut lower_clamped = 0.0;
    for j in 0..=n {
        let p = weight_probability(alpha, n, j)?;
        let mean = expected_pairs_given_j(n, j)?
            .to_f64()
            .expect("ratio fits in f64");
        let bound = binomial_expansion(n, j)?.k as f64 - 2.0;
        expected += p * mean;
        lower += p * bound;
        lower_clamped += p * bound.max(0.0);
    }
    Ok(ExpectedYield {
        expected_pairs: expected,
        lower_bound: lower,
        lower_bound_clamped: lower_clamped,
        entropy_ceiling: n as f64 * binary_entropy(a2)?,
    })
}

/// One per-weight row of a yield report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldRow {
    pub j: usize,
    /// Analytic probability of measuring weight j.
    pub prob_j: f64,
    /// Bit length of C(n,j).
    pub k: usize,
    /// Exact conditional mean pair count, reported as a float.
    pub expected_pairs_exact: f64,
    /// The floor-log bound k - 2 for this weight.
    pub lower_bound_k_minus_2: f64,
    /// Mean pair count over the trials that measured this weight;
    /// NaN when no trial did.
    pub empirical_mean: f64,
    /// Number of trials that measured this weight.
    pub trials: u64,
}

/// Aggregates across all weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldTotals {
    /// Analytic expected pairs per run.
    pub expected_pairs: f64,
    /// Mean pair count over all trials.
    pub empirical_mean: f64,
    /// Sample variance of the pair count over all trials.
    pub empirical_variance: f64,
    /// n H(alpha²).
    pub entropy_ceiling: f64,
    /// Expected concentrated entropy of entanglement.
    pub expected_entropy: f64,
    /// Floor-log lower bound on the expected pairs, literal form.
    pub lower_bound: f64,
    /// Floor-log lower bound with negative terms clamped to zero.
    pub lower_bound_clamped: f64,
    pub trials: u64,
}

/// Analytic and empirical expected-pair statistics for one (alpha, n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldTable {
    pub alpha: f64,
    pub n: usize,
    pub seed: u64,
    pub engine: String,
    pub rows: Vec<YieldRow>,
    pub totals: YieldTotals,
}

impl YieldTable {
    /// Assemble a table from per-trial (weight, pairs) observations.
    pub fn from_trials(
        alpha: f64,
        n: usize,
        seed: u64,
        engine: &str,
        observations: &[(usize, usize)],
    ) -> Result<YieldTable> {
        let mut counts = vec![0u64; n + 1];
        let mut pair_sums = vec![0u64; n + 1];
        let mut sum = 0.0f64;
        let mut sum_sq = 0.0f64;
        for &(j, pairs) in observations {
            counts[j] += 1;
            pair_sums[j] += pairs as u64;
            sum += pairs as f64;
            sum_sq += (pairs * pairs) as f64;
        }
        let trials = observations.len() as u64;
        let mut rows = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let expansion = binomial_expansion(n, j)?;
            rows.push(YieldRow {
                j,
                prob_j: weight_probability(alpha, n, j)?,
                k: expansion.k,
                expected_pairs_exact: expected_pairs_given_j(n, j)?
                    .to_f64()
                    .expect("ratio fits in f64"),
                lower_bound_k_minus_2: expansion.k as f64 - 2.0,
                empirical_mean: if counts[j] > 0 {
                    pair_sums[j] as f64 / counts[j] as f64
                } else {
                    f64::NAN
                },
                trials: counts[j],
            });
        }
        let yield_totals = expected_pairs_total(alpha, n)?;
        let mean = if trials > 0 { sum / trials as f64 } else { f64::NAN };
        let variance = if trials > 0 {
            sum_sq / trials as f64 - mean * mean
        } else {
            f64::NAN
        };
        let expected_entropy = if n >= 2 {
            expected_concentrated_entropy(alpha, n)?
        } else {
            0.0
        };
        Ok(YieldTable {
            alpha,
            n,
            seed,
            engine: engine.to_string(),
            rows,
            totals: YieldTotals {
                expected_pairs: yield_totals.expected_pairs,
                empirical_mean: mean,
                empirical_variance: variance,
                entropy_ceiling: yield_totals.entropy_ceiling,
                expected_entropy,
                lower_bound: yield_totals.lower_bound,
                lower_bound_clamped: yield_totals.lower_bound_clamped,
                trials,
            },
        })
    }

    /// Check the internal consistency of the analytic columns.
    pub fn validate(&self) -> Result<()> {
        let total_p: f64 = self.rows.iter().map(|r| r.prob_j).sum();
        if (total_p - 1.0).abs() > 1e-10 {
            return Err(AnalysisError::ProbabilityOutOfRange(total_p));
        }
        if self.totals.expected_pairs > self.totals.entropy_ceiling + 1e-9 {
            return Err(AnalysisError::ProbabilityOutOfRange(self.totals.expected_pairs));
        }
        Ok(())
    }
}
