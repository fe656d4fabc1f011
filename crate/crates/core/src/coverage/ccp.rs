//! Monte Carlo coupon-collector estimates.
//!
//! Each draw picks type `i` with probability `weights[i]`, or no type with the
//! remaining mass `1 - Σ weights`. A trial ends when every type has been seen.
//! Trial `j` uses the random stream `(seed, j)`, so results do not depend on
//! thread count.

use rayon::prelude::*;
use thiserror::Error;

use super::CoverageReport;
use crate::refmodel::CombinationCode;
use crate::sim::RngStream;

/// The completion curve is sampled at `2^0 ..= 2^CURVE_MAX_EXPONENT` draws.
pub const CURVE_MAX_EXPONENT: u32 = 16;

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CcpError {
    #[error("type {index} has weight 0 and can never be collected")]
    NeverCompletes { index: usize },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("trials must be at least 1")]
    NoTrials,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcpEstimate {
    pub n_types: usize,
    pub weights: Vec<f64>,
    pub trials: u64,
    pub mean_draws: f64,
    /// Sample standard deviation; 0 for a single trial.
    pub sd_draws: f64,
    /// Draws-to-complete per trial, sorted ascending.
    draws: Vec<u64>,
}

impl CcpEstimate {
    /// Fraction of trials that had collected every type within `n` draws.
    pub fn completion_prob(&self, n: u64) -> f64 {
        let done = self.draws.partition_point(|&d| d <= n);
        done as f64 / self.draws.len() as f64
    }

    /// `(n, completion_prob(n))` at powers of two.
    pub fn curve(&self) -> Vec<(u64, f64)> {
        (0..=CURVE_MAX_EXPONENT)
            .map(|e| {
                let n = 1u64 << e;
                (n, self.completion_prob(n))
            })
            .collect()
    }

    /// Standard error of `mean_draws`.
    pub fn std_error(&self) -> f64 {
        self.sd_draws / (self.trials as f64).sqrt()
    }

    pub fn max_draws(&self) -> u64 {
        self.draws.last().copied().unwrap_or(0)
    }
}

fn cumulative(weights: &[f64]) -> Result<Vec<f64>, CcpError> {
    if weights.is_empty() {
        return Err(CcpError::InvalidWeights("no types given".into()));
    }
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(weights.len());
    for (index, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(CcpError::InvalidWeights(format!("weight {index} is {w}")));
        }
        if w == 0.0 {
            return Err(CcpError::NeverCompletes { index });
        }
        acc += w;
        out.push(acc);
    }
    if acc > 1.0 + SUM_TOLERANCE {
        return Err(CcpError::InvalidWeights(format!("weights sum to {acc}, above 1")));
    }
    Ok(out)
}

fn run_trial(cum: &[f64], seed: u64, trial: u64) -> u64 {
    let mut rng = RngStream::new(seed, trial);
    let mut seen = vec![false; cum.len()];
    let mut missing = cum.len();
    let mut draws = 0u64;
    while missing > 0 {
        draws += 1;
        let u = rng.uniform();
        let i = cum.partition_point(|&c| c <= u);
        if i < cum.len() && !seen[i] {
            seen[i] = true;
            missing -= 1;
        }
    }
    draws
}

pub fn ccp_mc(weights: &[f64], trials: u64, seed: u64) -> Result<CcpEstimate, CcpError> {
    if trials == 0 {
        return Err(CcpError::NoTrials);
    }
    let cum = cumulative(weights)?;
    let mut draws: Vec<u64> = (0..trials)
        .into_par_iter()
        .map(|j| run_trial(&cum, seed, j))
        .collect();

    let n = trials as u128;
    let sum: u128 = draws.iter().map(|&d| d as u128).sum();
    let sum_sq: u128 = draws.iter().map(|&d| (d as u128) * (d as u128)).sum();
    let mean = sum as f64 / n as f64;
    let sd = if trials > 1 {
        // n·Σx² − (Σx)² is exact in integers.
        let num = n * sum_sq - sum * sum;
        (num as f64 / (n * (n - 1)) as f64).sqrt()
    } else {
        0.0
    };
    draws.sort_unstable();
    Ok(CcpEstimate {
        n_types: weights.len(),
        weights: weights.to_vec(),
        trials,
        mean_draws: mean,
        sd_draws: sd,
        draws,
    })
}

pub fn ccp_uniform(n_types: usize, trials: u64, seed: u64) -> Result<CcpEstimate, CcpError> {
    if n_types == 0 {
        return Err(CcpError::InvalidWeights("no types given".into()));
    }
    ccp_mc(&vec![1.0 / n_types as f64; n_types], trials, seed)
}

/// Estimate with an unknown type count, using observed code frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedCcp {
    pub estimate: CcpEstimate,
    /// The codes used as types, in code order.
    pub observed: Vec<CombinationCode>,
    /// Feasible codes never observed.
    pub unseen: Vec<CombinationCode>,
}

impl ObservedCcp {
    pub fn caveat(&self) -> String {
        let feasible = self.observed.len() + self.unseen.len();
        if self.unseen.is_empty() {
            format!("all {feasible} feasible codes observed; weights are empirical frequencies")
        } else {
            format!(
                "{} of {feasible} feasible codes never observed; their probability mass is unknown \
                 and the estimate covers only the {} observed codes",
                self.unseen.len(),
                self.observed.len()
            )
        }
    }
}

pub fn ccp_observed(report: &CoverageReport, trials: u64, seed: u64) -> Result<ObservedCcp, CcpError> {
    let feasible_total: u64 = CombinationCode::all()
        .filter(|c| c.is_feasible())
        .map(|c| report.count(c))
        .sum();
    if feasible_total == 0 {
        return Err(CcpError::InvalidWeights("no feasible code observed".into()));
    }
    let (observed, unseen): (Vec<_>, Vec<_>) = CombinationCode::all()
        .filter(|c| c.is_feasible())
        .partition(|c| report.count(*c) > 0);
    let weights: Vec<f64> = observed
        .iter()
        .map(|c| report.count(*c) as f64 / feasible_total as f64)
        .collect();
    Ok(ObservedCcp {
        estimate: ccp_mc(&weights, trials, seed)?,
        observed,
        unseen,
    })
}
