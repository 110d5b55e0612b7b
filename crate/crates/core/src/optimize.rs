//! Optimal splits of a fixed photon budget `n̄ = α² + sinh² ξ`.
//!
//! Two studies: the joint maximum of `G_N F_{Q,N}` over `{N, α²}` for a
//! single post-selected component, and the maximum of the total QFI over
//! `α²` at a fixed threshold. Both are grid scans (the objectives are cheap
//! and can be flat-topped) with an optional golden-section polish.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fisher::{qfi_per_n_operator_oracle, total_fisher_approx, total_fisher_value, Threshold};
use crate::numerics::compensated_sum;
use crate::states::{build_amplitude_table, postselect, AmplitudeTable, LightSource, DEFAULT_TAIL_TOL};

/// Objective used by [`optimize_alpha`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Engine {
    /// Exact double sum over detectable events.
    Exact,
    /// `erfc` closed-form approximation.
    Approx,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    /// Grid step as a fraction of `n̄`.
    pub grid_step: f64,
    pub tail_tol: f64,
    /// Polish the grid winner by golden-section search.
    pub refine: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            grid_step: 0.01,
            tail_tol: DEFAULT_TAIL_TOL,
            refine: true,
        }
    }
}

/// A one-dimensional scan over `α²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    /// `(α², objective)` at every admissible grid point.
    pub grid: Vec<(f64, f64)>,
    pub argmax: f64,
    pub max_value: f64,
    /// Grid spacing in `α²`.
    pub resolution: f64,
}

impl ScanResult {
    /// Picks the grid maximum (ties go to the smaller control value).
    pub fn from_grid(grid: Vec<(f64, f64)>, resolution: f64) -> Result<Self> {
        let mut best: Option<(f64, f64)> = None;
        for &(x, y) in &grid {
            if best.is_none_or(|(_, b)| y > b) {
                best = Some((x, y));
            }
        }
        let (argmax, max_value) = best.ok_or(Error::InsufficientData { got: 0, need: 1 })?;
        Ok(ScanResult {
            grid,
            argmax,
            max_value,
            resolution,
        })
    }

    /// Golden-section search on `[argmax - resolution, argmax + resolution]`
    /// clipped to `[lo, hi]`; the winner is replaced only if strictly better.
    pub fn refine<F>(mut self, lo: f64, hi: f64, objective: F) -> Self
    where
        F: Fn(f64) -> Option<f64>,
    {
        let a = (self.argmax - self.resolution).max(lo);
        let b = (self.argmax + self.resolution).min(hi);
        if b > a {
            let (x, y) = golden_section_max(&objective, a, b, 1e-10 * hi.abs().max(1.0));
            if y > self.max_value {
                self.argmax = x;
                self.max_value = y;
            }
        }
        self
    }
}

fn golden_section_max<F>(f: &F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> Option<f64>,
{
    let g = |x: f64| f(x).unwrap_or(f64::NEG_INFINITY);
    let inv_phi = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = g(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: "must be positive and finite",
        })
    }
}

/// `α²` grid `{0, h n̄, 2h n̄, …, n̄}`.
pub fn alpha_grid(n_bar: f64, grid_step: f64) -> Result<Vec<f64>> {
    require_positive("n_bar", n_bar)?;
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "grid_step",
            reason: "must lie in (0, 1]",
        });
    }
    let steps = libm::round(1.0 / grid_step) as usize;
    Ok((0..=steps)
        .map(|i| {
            if i == steps {
                n_bar
            } else {
                i as f64 * grid_step * n_bar
            }
        })
        .collect())
}

/// Total QFI at one split; `None` where the chosen engine is undefined.
pub fn alpha_objective(n_bar: f64, alpha2: f64, n_res: Threshold, engine: Engine, tail_tol: f64) -> Option<f64> {
    let src = LightSource::from_split(n_bar, alpha2).ok()?;
    match engine {
        Engine::Approx => total_fisher_approx(&src, n_res).ok(),
        Engine::Exact => {
            let amps = match n_res {
                // every contributing amplitude has index ≤ n_res
                Threshold::Finite(n) => AmplitudeTable::for_source(&src, n),
                Threshold::Infinite => build_amplitude_table(&src, tail_tol),
            }
            .ok()?;
            total_fisher_value(&amps, &src, n_res).ok()
        }
    }
}

/// Maximizes the total QFI over `α² ∈ [0, n̄]` with `sinh² ξ = n̄ - α²`.
/// Points where the approximation is out of its domain are left out.
pub fn optimize_alpha(n_bar: f64, n_res: Threshold, engine: Engine, opts: &ScanOptions) -> Result<ScanResult> {
    let grid = alpha_grid(n_bar, opts.grid_step)?;
    let values = grid
        .into_iter()
        .filter_map(|a| alpha_objective(n_bar, a, n_res, engine, opts.tail_tol).map(|v| (a, v)))
        .collect();
    finish_alpha_scan(values, n_bar, n_res, engine, opts)
}

/// Assembles (and optionally refines) a scan from precomputed grid values;
/// shared with parallel drivers so both give identical results.
pub fn finish_alpha_scan(
    values: Vec<(f64, f64)>,
    n_bar: f64,
    n_res: Threshold,
    engine: Engine,
    opts: &ScanOptions,
) -> Result<ScanResult> {
    let scan = ScanResult::from_grid(values, opts.grid_step * n_bar)?;
    Ok(if opts.refine {
        scan.refine(0.0, n_bar, |a| alpha_objective(n_bar, a, n_res, engine, opts.tail_tol))
    } else {
        scan
    })
}

/// Joint optimum of `G_N F_{Q,N}` over the component `N` and the split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleComponentOptimum {
    pub n_bar: f64,
    pub total_n: usize,
    pub alpha2: f64,
    pub value: f64,
}

/// Default largest component searched: comfortably past where `G_N` dies.
pub fn default_single_component_n_max(n_bar: f64) -> usize {
    libm::ceil(4.0 * n_bar + 40.0) as usize
}

/// `G_N F_{Q,N}` at every `N ≤ n_max` for one split (QFI from the operator
/// expectation values).
pub fn single_component_objectives(n_bar: f64, alpha2: f64, n_max: usize) -> Result<Vec<f64>> {
    let src = LightSource::from_split(n_bar, alpha2)?;
    let amps = AmplitudeTable::for_source(&src, n_max)?;
    Ok((0..=n_max)
        .map(|n| match postselect(&amps, n) {
            Ok(state) => state.gen_prob() * qfi_per_n_operator_oracle(&state),
            Err(_) => 0.0,
        })
        .collect())
}

/// Maximizes `G_N F_{Q,N}` over `N ∈ [0, n_max]` and `α² ∈ [0, n̄]` (step
/// `grid_alpha · n̄`). Ties go to the smaller `N`, then the smaller `α²`.
pub fn optimize_single_component(n_bar: f64, grid_alpha: f64, n_max: usize) -> Result<SingleComponentOptimum> {
    let grid = alpha_grid(n_bar, grid_alpha)?;
    let table = grid
        .iter()
        .map(|&a| single_component_objectives(n_bar, a, n_max))
        .collect::<Result<Vec<_>>>()?;
    Ok(pick_single_component(n_bar, &grid, &table))
}

/// Joint argmax of a `[split][N]` objective table.
pub fn pick_single_component(n_bar: f64, grid: &[f64], table: &[Vec<f64>]) -> SingleComponentOptimum {
    let mut best = SingleComponentOptimum {
        n_bar,
        total_n: 0,
        alpha2: grid.first().copied().unwrap_or(0.0),
        value: f64::NEG_INFINITY,
    };
    let n_max = table.iter().map(Vec::len).max().unwrap_or(0);
    for n in 0..n_max {
        for (&alpha2, row) in grid.iter().zip(table) {
            let value = row.get(n).copied().unwrap_or(0.0);
            if value > best.value {
                best = SingleComponentOptimum {
                    n_bar,
                    total_n: n,
                    alpha2,
                    value,
                };
            }
        }
    }
    best
}

/// How the threshold follows `n̄` in a scaling scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    /// `N_res = round(k n̄)`
    Multiple(f64),
    Infinite,
}

impl ThresholdRule {
    pub fn threshold(&self, n_bar: f64) -> Threshold {
        match *self {
            ThresholdRule::Multiple(k) => Threshold::Finite(libm::round(k * n_bar).max(0.0) as usize),
            ThresholdRule::Infinite => Threshold::Infinite,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint {
    pub n_bar: f64,
    pub n_res: Threshold,
    pub alpha2_opt: f64,
    pub fq_opt: f64,
    /// Best ideal-detector QFI at the same `n̄` (`n̄(n̄ + 3/2)` asymptotically).
    pub fq_ideal: f64,
}

pub fn scaling_point(n_bar: f64, rule: ThresholdRule, engine: Engine, opts: &ScanOptions) -> Result<ScalingPoint> {
    let n_res = rule.threshold(n_bar);
    let best = optimize_alpha(n_bar, n_res, engine, opts)?;
    let ideal = optimize_alpha(n_bar, Threshold::Infinite, Engine::Approx, opts)?;
    Ok(ScalingPoint {
        n_bar,
        n_res,
        alpha2_opt: best.argmax,
        fq_opt: best.max_value,
        fq_ideal: ideal.max_value,
    })
}

/// One optimum per `n̄`, in input order.
pub fn scaling_scan(
    n_values: &[f64],
    rule: ThresholdRule,
    engine: Engine,
    opts: &ScanOptions,
) -> Result<Vec<ScalingPoint>> {
    n_values.iter().map(|&n| scaling_point(n, rule, engine, opts)).collect()
}

/// Smallest `n̄` in a scan whose optimum beats the shot-noise line `F = n̄`.
pub fn first_classical_crossing(points: &[ScalingPoint]) -> Option<f64> {
    points.iter().find(|p| p.fq_opt > p.n_bar).map(|p| p.n_bar)
}

/// `count` log-spaced values in `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => {
            let (a, b) = (libm::log(lo), libm::log(hi));
            (0..count)
                .map(|i| {
                    if i + 1 == count {
                        hi
                    } else {
                        libm::exp(a + (b - a) * i as f64 / (count - 1) as f64)
                    }
                })
                .collect()
        }
    }
}

/// `value ≈ prefactor · n̄^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub prefactor: f64,
    pub exponent: f64,
    /// RMS of the log residuals.
    pub residual: f64,
    pub n_range: (f64, f64),
}

impl PowerLawFit {
    pub fn evaluate(&self, n_bar: f64) -> f64 {
        self.prefactor * libm::pow(n_bar, self.exponent)
    }

    /// Where the fitted curve meets `F = n̄`, if it ever does from below.
    pub fn classical_crossing(&self) -> Option<f64> {
        if self.exponent > 1.0 {
            Some(libm::pow(self.prefactor, -1.0 / (self.exponent - 1.0)))
        } else {
            None
        }
    }
}

/// Least-squares fit of `ln value = ln c + p ln n̄`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 5 {
        return Err(Error::InsufficientData {
            got: points.len(),
            need: 5,
        });
    }
    if points
        .iter()
        .any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: "power-law fit needs positive finite coordinates",
        });
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (libm::log(x), libm::log(y))).collect();
    let n = logs.len() as f64;
    let mx = compensated_sum(logs.iter().map(|l| l.0)) / n;
    let my = compensated_sum(logs.iter().map(|l| l.1)) / n;
    let sxx = compensated_sum(logs.iter().map(|l| (l.0 - mx) * (l.0 - mx)));
    let sxy = compensated_sum(logs.iter().map(|l| (l.0 - mx) * (l.1 - my)));
    if !(sxx > 0.0) {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: "need at least two distinct n_bar values",
        });
    }
    let exponent = sxy / sxx;
    let log_c = my - exponent * mx;
    let ss = compensated_sum(logs.iter().map(|&(x, y)| {
        let r = y - log_c - exponent * x;
        r * r
    }));
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.0), hi.max(p.0))
    });
    Ok(PowerLawFit {
        prefactor: libm::exp(log_c),
        exponent,
        residual: libm::sqrt(ss / n),
        n_range: (lo, hi),
    })
}
