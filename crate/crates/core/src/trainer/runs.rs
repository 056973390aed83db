use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hyper::HyperParams;
use super::train::{train, TrainOutcome, TrainReport, SPLIT_STREAM};
use crate::error::{Error, Result};
use crate::graph::{make_split, normalized_adjacency, Graph, Split, SplitConfig};
use crate::numerics::{is_deterministic, RngState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub test_acc: f64,
    pub report: TrainReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
    pub runs: Vec<RunResult>,
}

/// Mean and `n − 1` standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// The split used for a run: the dataset's own split when it ships one,
/// otherwise a fresh draw from the run seed.
pub fn split_for_seed(g: &Graph, split_cfg: &SplitConfig, seed: u64) -> Result<Split> {
    match &g.fixed_split {
        Some(s) => Ok(s.clone()),
        None => make_split(g, split_cfg, &mut RngState::with_stream(seed, SPLIT_STREAM)),
    }
}

/// Train `n_runs` models with seeds `hp.seed + r`. Runs execute in parallel
/// unless determinism is on; results are ordered by run index either way.
pub fn run_seeds_with_outcomes(
    g: &Graph,
    hp: &HyperParams,
    split_cfg: &SplitConfig,
    n_runs: usize,
) -> Result<(SeedSummary, Vec<TrainOutcome>)> {
    if n_runs == 0 {
        return Err(Error::Parameter("n_runs must be >= 1".into()));
    }
    hp.validate()?;
    let a_tilde = normalized_adjacency(g, hp.self_loops);
    let one = |r: usize| -> Result<(u64, TrainOutcome)> {
        let seed = hp.seed.wrapping_add(r as u64);
        let split = split_for_seed(g, split_cfg, seed)?;
        let run_hp = HyperParams { seed, ..hp.clone() };
        Ok((seed, train(g, &a_tilde, &split, &run_hp)?))
    };
    let results: Vec<Result<(u64, TrainOutcome)>> = if is_deterministic() {
        (0..n_runs).map(one).collect()
    } else {
        (0..n_runs).into_par_iter().map(one).collect()
    };
    let mut runs = Vec::with_capacity(n_runs);
    let mut outcomes = Vec::with_capacity(n_runs);
    for r in results {
        let (seed, outcome) = r?;
        runs.push(RunResult { seed, test_acc: outcome.report.test_at_best_val, report: outcome.report.clone() });
        outcomes.push(outcome);
    }
    let accs: Vec<f64> = runs.iter().map(|r| r.test_acc).collect();
    let (mean, std) = mean_std(&accs);
    Ok((SeedSummary { mean, std, runs }, outcomes))
}

pub fn run_seeds(g: &Graph, hp: &HyperParams, split_cfg: &SplitConfig, n_runs: usize) -> Result<SeedSummary> {
    Ok(run_seeds_with_outcomes(g, hp, split_cfg, n_runs)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    Full,
    NoSoc,
    NoKl,
    NoPl,
    NoSkn,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 5] = [Self::Full, Self::NoSoc, Self::NoKl, Self::NoPl, Self::NoSkn];

    pub fn apply(self, hp: &HyperParams) -> HyperParams {
        let mut out = hp.clone();
        match self {
            Self::Full => {}
            Self::NoSoc => out.beta = 0.0,
            Self::NoKl => out.lambda_kl = 0.0,
            Self::NoPl => out.lambda_pl = 0.0,
            Self::NoSkn => out.sinkhorn = false,
        }
        out
    }
}

impl fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::NoSoc => "no_soc",
            Self::NoKl => "no_kl",
            Self::NoPl => "no_pl",
            Self::NoSkn => "no_skn",
        })
    }
}

impl FromStr for AblationVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.to_string() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Parameter(format!("unknown ablation variant '{s}'")))
    }
}

pub fn ablate(
    g: &Graph,
    hp: &HyperParams,
    variant: AblationVariant,
    split_cfg: &SplitConfig,
    n_runs: usize,
) -> Result<SeedSummary> {
    run_seeds(g, &variant.apply(hp), split_cfg, n_runs)
}
