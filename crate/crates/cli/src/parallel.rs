//! Rayon drivers for the expensive scans. Each evaluates independent
//! points in parallel, collects them in input order and hands the result
//! to the same assembly step as the sequential version, so the output is
//! bit-identical to it for any pool size.

use rayon::prelude::*;

use mzfisher_core::fisher::Threshold;
use mzfisher_core::optimize::{
    alpha_grid, alpha_objective, finish_alpha_scan, pick_single_component, single_component_objectives, Engine,
    ScalingPoint, ScanOptions, ScanResult, SingleComponentOptimum, ThresholdRule,
};
use mzfisher_core::simulate::{EstimationRun, Experiment};
use mzfisher_core::{LightSource, Result};

pub fn optimize_alpha_par(n_bar: f64, n_res: Threshold, engine: Engine, opts: &ScanOptions) -> Result<ScanResult> {
    let grid = alpha_grid(n_bar, opts.grid_step)?;
    let values: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&a| alpha_objective(n_bar, a, n_res, engine, opts.tail_tol).map(|v| (a, v)))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    finish_alpha_scan(values, n_bar, n_res, engine, opts)
}

/// Parallel over `n̄`; each point runs its own scan sequentially.
pub fn scaling_scan_par(
    n_values: &[f64],
    rule: ThresholdRule,
    engine: Engine,
    opts: &ScanOptions,
) -> Result<Vec<ScalingPoint>> {
    n_values
        .par_iter()
        .map(|&n| mzfisher_core::optimize::scaling_point(n, rule, engine, opts))
        .collect()
}

pub fn single_component_par(n_bar: f64, grid_alpha: f64, n_max: usize) -> Result<SingleComponentOptimum> {
    let grid = alpha_grid(n_bar, grid_alpha)?;
    let table = grid
        .par_iter()
        .map(|&a| single_component_objectives(n_bar, a, n_max))
        .collect::<Result<Vec<_>>>()?;
    Ok(pick_single_component(n_bar, &grid, &table))
}

/// Joint optima over many `n̄`; `n_max(n̄)` picks the largest component.
pub fn single_component_scan_par<F>(n_values: &[f64], grid_alpha: f64, n_max: F) -> Result<Vec<SingleComponentOptimum>>
where
    F: Fn(f64) -> usize + Sync,
{
    n_values
        .par_iter()
        .map(|&n| mzfisher_core::optimize::optimize_single_component(n, grid_alpha, n_max(n)))
        .collect()
}

/// Repetitions in parallel; each draws from its own `(seed, rep)` stream.
pub fn crb_experiment_par(
    src: &LightSource,
    n_res: Threshold,
    true_phi: f64,
    trials: usize,
    repetitions: usize,
    seed: u64,
    tail_tol: f64,
) -> Result<EstimationRun> {
    let exp = Experiment::new(src, n_res, true_phi, trials, seed, tail_tol)?;
    let estimates = (0..repetitions as u64)
        .into_par_iter()
        .map(|rep| exp.estimate(rep))
        .collect::<Result<Vec<_>>>()?;
    exp.finish(estimates)
}
