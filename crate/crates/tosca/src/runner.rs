//! Timed scenario runs and the lambda x rank sweep.

use std::time::Instant;

use tosca_core::engine::{run_scenario, ScenarioOutcome};
use tosca_core::{FeatureDataset, Method, ScenarioConfig, SplitPlan};

use crate::report::SweepCell;

/// Default L1 strengths of the sweep grid.
pub const SWEEP_LAMBDAS: [f64; 5] = [0.0, 5e-5, 5e-4, 5e-3, 5e-2];
/// Default bottleneck ranks of the sweep grid.
pub const SWEEP_RANKS: [usize; 5] = [8, 16, 32, 48, 64];

/// Runs a scenario and records its wall-clock time in the report.
pub fn run_timed(
    train: &FeatureDataset,
    test: &FeatureDataset,
    splits: &SplitPlan,
    method: Method,
    cfg: &ScenarioConfig,
    seed: u64,
) -> tosca_core::Result<ScenarioOutcome> {
    let start = Instant::now();
    let mut outcome = run_scenario(train, test, splits, method, cfg, seed)?;
    outcome.report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(outcome)
}

/// Runs every `(lambda, rank)` cell in row-major grid order.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    train: &FeatureDataset,
    test: &FeatureDataset,
    splits: &SplitPlan,
    method: Method,
    base: &ScenarioConfig,
    seed: u64,
    lambdas: &[f64],
    ranks: &[usize],
) -> tosca_core::Result<Vec<SweepCell>> {
    let mut cells = Vec::with_capacity(lambdas.len() * ranks.len());
    for &lambda in lambdas {
        for &rank in ranks {
            let mut cfg = base.clone();
            cfg.train.optim.lambda_l1 = lambda;
            cfg.train.rank = rank;
            let report = run_scenario(train, test, splits, method, &cfg, seed)?.report;
            cells.push(SweepCell {
                lambda,
                rank,
                final_accuracy: report.final_accuracy(),
                average_accuracy: report.average_accuracy,
                sparsity_ratio: report.sparsity_ratio,
                orthogonality: report.orthogonality,
            });
        }
    }
    Ok(cells)
}
