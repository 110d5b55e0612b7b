//! Monte-Carlo photon counting and maximum-likelihood phase estimation.
//!
//! Sampling is inverse-CDF over the flattened outcome list (sorted by `N`
//! then `N_b`, overflow last) driven by ChaCha8. Every repetition of an
//! experiment draws from its own stream `(seed, repetition)`, so runs are
//! reproducible and repetitions can be farmed out in any order.
//!
//! The estimator maximizes `Σ log P(record|φ)` over `φ ∈ (0, π/2)`: a cached
//! coarse grid (step ≈ 1e-2) locates the peak, a fine grid (default 1e-4)
//! within two coarse steps pins it, and a parabola through the best fine
//! point and its neighbours finishes. Overflow events carry the
//! `φ`-independent `log P_add` and are dropped.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::fisher::{total_fisher_value, Threshold};
use crate::numerics::compensated_sum;
use crate::rotation::{full_outcome_distribution_with, DickeRotator, OutcomeDistribution};
use crate::states::{build_amplitude_table, postselect, AmplitudeTable, LightSource, NPhotonState};

/// One photon-counting event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClickRecord {
    Detected {
        n_a: usize,
        n_b: usize,
    },
    /// More than `N_res` photons arrived; counts are unknown.
    Overflow,
}

impl ClickRecord {
    pub fn is_overflow(&self) -> bool {
        matches!(self, ClickRecord::Overflow)
    }
}

/// Flat position of `(N, N_b)` in the outcome list.
pub fn outcome_index(total_n: usize, n_b: usize) -> usize {
    total_n * (total_n + 1) / 2 + n_b
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// ChaCha8 stream `stream` of `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Inverse-CDF sampler over a fixed outcome distribution.
#[derive(Debug, Clone)]
pub struct ClickSampler {
    cdf: Vec<f64>,
    cells: Vec<(usize, usize)>,
    total: f64,
}

impl ClickSampler {
    pub fn new(dist: &OutcomeDistribution) -> Self {
        let mut cdf = Vec::with_capacity(dist.outcomes().len() + 1);
        let mut cells = Vec::with_capacity(dist.outcomes().len());
        let mut acc = 0.0;
        for o in dist.outcomes() {
            acc += o.probability;
            cdf.push(acc);
            cells.push((o.n_a, o.n_b));
        }
        acc += dist.overflow();
        cdf.push(acc);
        ClickSampler { cdf, cells, total: acc }
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> ClickRecord {
        let u = uniform(rng) * self.total;
        let i = self.cdf.partition_point(|&c| c <= u);
        match self.cells.get(i) {
            Some(&(n_a, n_b)) => ClickRecord::Detected { n_a, n_b },
            None => ClickRecord::Overflow,
        }
    }

    pub fn draw_many(&self, count: usize, rng: &mut ChaCha8Rng) -> Vec<ClickRecord> {
        (0..count).map(|_| self.draw(rng)).collect()
    }
}

/// `count` independent events from `dist`, reproducible for a fixed seed.
pub fn sample_clicks(dist: &OutcomeDistribution, count: usize, seed: u64) -> Vec<ClickRecord> {
    ClickSampler::new(dist).draw_many(count, &mut rng_for(seed, 0))
}

/// Default fine step of the likelihood grid, in radians.
pub const DEFAULT_PHI_STEP: f64 = 1e-4;
const COARSE_STEP: f64 = 1e-2;

/// Likelihood of photon-counting records for one source and threshold,
/// with the coarse `φ` grid precomputed.
#[derive(Debug, Clone)]
pub struct LikelihoodModel {
    n_res: usize,
    phi_step: f64,
    rotators: Vec<DickeRotator>,
    states: Vec<Option<NPhotonState>>,
    coarse_phis: Vec<f64>,
    // coarse_log_p[i][outcome_index] = log P_N(N_b | φ_i)
    coarse_log_p: Vec<Vec<f64>>,
}

impl LikelihoodModel {
    pub fn new(amps: &AmplitudeTable, n_res: usize, phi_step: f64) -> Result<Self> {
        if !(phi_step > 0.0 && phi_step < COARSE_STEP) {
            return Err(Error::InvalidParameter {
                name: "phi_step",
                reason: "must lie in (0, 1e-2)",
            });
        }
        let rotators = DickeRotator::family(n_res)?;
        let states: Vec<Option<NPhotonState>> = (0..=n_res)
            .map(|n| postselect(amps, n).ok().filter(|s| s.gen_prob() > 0.0))
            .collect();
        let m = libm::ceil(FRAC_PI_2 / COARSE_STEP) as usize;
        let coarse_phis: Vec<f64> = (1..m).map(|i| FRAC_PI_2 * i as f64 / m as f64).collect();
        let mut model = LikelihoodModel {
            n_res,
            phi_step,
            rotators,
            states,
            coarse_phis,
            coarse_log_p: Vec::new(),
        };
        model.coarse_log_p = model
            .coarse_phis
            .iter()
            .map(|&phi| model.log_conditionals(phi))
            .collect();
        Ok(model)
    }

    pub fn n_res(&self) -> usize {
        self.n_res
    }

    pub fn phi_step(&self) -> f64 {
        self.phi_step
    }

    fn cells(&self) -> usize {
        outcome_index(self.n_res + 1, 0)
    }

    fn log_conditionals(&self, phi: f64) -> Vec<f64> {
        let mut out = vec![f64::NEG_INFINITY; self.cells()];
        for (n, state) in self.states.iter().enumerate() {
            if let Some(state) = state {
                let v = self.rotators[n].rotate(state.coeffs(), phi);
                for (k, x) in v.iter().enumerate() {
                    out[outcome_index(n, k)] = 2.0 * libm::log(libm::fabs(*x));
                }
            }
        }
        out
    }

    /// Per-outcome counts of the detectable records.
    pub fn tally(&self, records: &[ClickRecord]) -> Result<Vec<u64>> {
        let mut counts = vec![0u64; self.cells()];
        for r in records {
            if let ClickRecord::Detected { n_a, n_b } = *r {
                let n = n_a + n_b;
                if n > self.n_res {
                    return Err(Error::InvalidParameter {
                        name: "records",
                        reason: "detected event above the threshold",
                    });
                }
                counts[outcome_index(n, n_b)] += 1;
            }
        }
        Ok(counts)
    }

    /// `Σ count · log P_N(N_b|φ)`, dropping the `φ`-independent `log G_N`
    /// and overflow terms.
    pub fn log_likelihood(&self, counts: &[u64], phi: f64) -> f64 {
        let mut total = 0.0;
        for (n, state) in self.states.iter().enumerate() {
            let base = outcome_index(n, 0);
            let row = &counts[base..base + n + 1];
            if row.iter().all(|&c| c == 0) {
                continue;
            }
            let Some(state) = state else {
                return f64::NEG_INFINITY;
            };
            let v = self.rotators[n].rotate(state.coeffs(), phi);
            for (&c, x) in row.iter().zip(&v) {
                if c > 0 {
                    total += c as f64 * 2.0 * libm::log(libm::fabs(*x));
                }
            }
        }
        total
    }

    fn coarse_log_likelihood(&self, counts: &[u64], i: usize) -> f64 {
        let table = &self.coarse_log_p[i];
        let mut total = 0.0;
        for (&c, &lp) in counts.iter().zip(table) {
            if c > 0 {
                total += c as f64 * lp;
            }
        }
        total
    }
}

fn first_argmax(values: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if v > f64::NEG_INFINITY && best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}

/// Maximum-likelihood phase in `(0, π/2)`.
pub fn mle_estimate(records: &[ClickRecord], model: &LikelihoodModel) -> Result<f64> {
    mle_estimate_counts(&model.tally(records)?, model)
}

pub fn mle_estimate_counts(counts: &[u64], model: &LikelihoodModel) -> Result<f64> {
    // overflow and vacuum events have φ-independent probabilities
    if counts.iter().skip(1).all(|&c| c == 0) {
        return Err(Error::DegenerateLikelihood);
    }
    let (ic, _) = first_argmax((0..model.coarse_phis.len()).map(|i| model.coarse_log_likelihood(counts, i)))
        .ok_or(Error::DegenerateLikelihood)?;
    let coarse = FRAC_PI_2 / (model.coarse_phis.len() + 1) as f64;
    let center = model.coarse_phis[ic];
    let h = model.phi_step;
    let lo = (center - 2.0 * coarse).max(h);
    let hi = (center + 2.0 * coarse).min(FRAC_PI_2 - h);
    let steps = libm::floor((hi - lo) / h) as usize;
    let phis: Vec<f64> = (0..=steps).map(|j| lo + j as f64 * h).collect();
    let ll: Vec<f64> = phis.iter().map(|&p| model.log_likelihood(counts, p)).collect();
    let (j, _) = first_argmax(ll.iter().copied()).ok_or(Error::DegenerateLikelihood)?;
    let mut phi = phis[j];
    if j > 0 && j + 1 < phis.len() {
        let (a, b, c) = (ll[j - 1], ll[j], ll[j + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 && denom.is_finite() {
            phi += 0.5 * h * (a - c) / denom;
        }
    }
    Ok(phi)
}

/// Repeated `ν`-trial experiments and the resulting estimator spread.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationRun {
    pub true_phi: f64,
    /// Events per experiment, `ν`.
    pub trials: usize,
    pub repetitions: usize,
    /// Threshold used for sampling and estimation.
    pub n_res: usize,
    pub estimates: Vec<f64>,
    /// Unbiased sample variance of the estimates.
    pub empirical_variance: f64,
    /// Fisher information per event at `true_phi`.
    pub fisher: f64,
    /// `1 / (ν F)`
    pub crb: f64,
}

impl EstimationRun {
    pub fn from_estimates(
        true_phi: f64,
        trials: usize,
        n_res: usize,
        estimates: Vec<f64>,
        fisher: f64,
    ) -> Result<Self> {
        if estimates.len() < 2 {
            return Err(Error::InsufficientData {
                got: estimates.len(),
                need: 2,
            });
        }
        let n = estimates.len() as f64;
        let mean = compensated_sum(estimates.iter().copied()) / n;
        let empirical_variance = compensated_sum(estimates.iter().map(|e| (e - mean) * (e - mean))) / (n - 1.0);
        Ok(EstimationRun {
            true_phi,
            trials,
            repetitions: estimates.len(),
            n_res,
            estimates,
            empirical_variance,
            fisher,
            crb: 1.0 / (trials as f64 * fisher),
        })
    }

    /// `empirical_variance / crb`
    pub fn ratio(&self) -> f64 {
        self.empirical_variance / self.crb
    }

    pub fn bias(&self) -> f64 {
        compensated_sum(self.estimates.iter().copied()) / self.estimates.len() as f64 - self.true_phi
    }
}

/// Everything a repetition needs, built once per experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub true_phi: f64,
    pub trials: usize,
    pub seed: u64,
    pub n_res: usize,
    pub fisher: f64,
    sampler: ClickSampler,
    model: LikelihoodModel,
}

/// Smallest threshold leaving less than `tol` probability undetected; this
/// is what an infinite threshold means for a finite sample.
pub fn cutoff_complete_threshold(amps: &AmplitudeTable, tol: f64) -> usize {
    let mut missing = 1.0;
    for n in 0..=2 * amps.cutoff() {
        missing -= crate::states::generation_probability(amps, n);
        if missing < tol {
            return n;
        }
    }
    2 * amps.cutoff()
}

impl Experiment {
    pub fn new(
        src: &LightSource,
        n_res: Threshold,
        true_phi: f64,
        trials: usize,
        seed: u64,
        tail_tol: f64,
    ) -> Result<Self> {
        if trials == 0 {
            return Err(Error::InvalidParameter {
                name: "trials",
                reason: "must be positive",
            });
        }
        if !(true_phi > 0.0 && true_phi < FRAC_PI_2) {
            return Err(Error::InvalidParameter {
                name: "phi",
                reason: "must lie in (0, π/2)",
            });
        }
        let base = build_amplitude_table(src, tail_tol)?;
        let n_res = match n_res {
            Threshold::Finite(n) => n,
            Threshold::Infinite => cutoff_complete_threshold(&base, tail_tol),
        };
        let amps = if n_res > base.cutoff() {
            AmplitudeTable::for_source(src, n_res)?
        } else {
            base
        };
        let model = LikelihoodModel::new(&amps, n_res, DEFAULT_PHI_STEP)?;
        let dist = full_outcome_distribution_with(&model.rotators, &amps, true_phi);
        let fisher = total_fisher_value(&amps, src, Threshold::Finite(n_res))?;
        Ok(Experiment {
            true_phi,
            trials,
            seed,
            n_res,
            fisher,
            sampler: ClickSampler::new(&dist),
            model,
        })
    }

    pub fn model(&self) -> &LikelihoodModel {
        &self.model
    }

    /// Records of repetition `rep` (stream `(seed, rep)`).
    pub fn records(&self, rep: u64) -> Vec<ClickRecord> {
        self.sampler.draw_many(self.trials, &mut rng_for(self.seed, rep))
    }

    pub fn estimate(&self, rep: u64) -> Result<f64> {
        let mut counts = vec![0u64; self.model.cells()];
        let mut rng = rng_for(self.seed, rep);
        for _ in 0..self.trials {
            if let ClickRecord::Detected { n_a, n_b } = self.sampler.draw(&mut rng) {
                counts[outcome_index(n_a + n_b, n_b)] += 1;
            }
        }
        mle_estimate_counts(&counts, &self.model)
    }

    pub fn finish(&self, estimates: Vec<f64>) -> Result<EstimationRun> {
        EstimationRun::from_estimates(self.true_phi, self.trials, self.n_res, estimates, self.fisher)
    }
}

/// Runs `repetitions` independent `ν`-trial experiments at `true_phi` and
/// compares the MLE spread with `1/(ν F)`, `F` the exact per-event Fisher
/// information of the detectable events.
pub fn crb_experiment(
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
        .map(|rep| exp.estimate(rep))
        .collect::<Result<Vec<_>>>()?;
    exp.finish(estimates)
}
