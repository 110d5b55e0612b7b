//! Fock-space description of the input `|α⟩ ⊗ |ξ⟩`.
//!
//! Amplitudes are tabulated at `θ_a = θ_b = 0`. For phase-matched inputs
//! (`θ_b = 2θ_a`) every `N`-photon component only picks up the global phase
//! `e^{iNθ_a}`, which drops out of all probabilities. The complex
//! [`ComplexNPhotonState`] exists for the general-phase checks in
//! [`crate::fisher`].

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{compensated_sum, log_factorial, log_sum_exp, wrap_angle, LogSigned};

/// Largest amplitude cutoff [`build_amplitude_table`] will allocate.
pub const MAX_CUTOFF: usize = 16_384;

/// Default tail probability left out of each marginal.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Generation probabilities below this are reported as exactly zero.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

const PHASE_MATCH_TOL: f64 = 1e-12;

/// Input light: a coherent state `|α⟩` in port `a`, squeezed vacuum `|ξ⟩` in
/// port `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightSource {
    alpha_mag: f64,
    theta_a: f64,
    xi_mag: f64,
    theta_b: f64,
}

impl LightSource {
    pub fn new(alpha_mag: f64, theta_a: f64, xi_mag: f64, theta_b: f64) -> Result<Self> {
        if !(alpha_mag.is_finite() && alpha_mag >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "alpha_mag",
                reason: "must be finite and nonnegative",
            });
        }
        if !(xi_mag.is_finite() && xi_mag >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "xi_mag",
                reason: "must be finite and nonnegative",
            });
        }
        if !(theta_a.is_finite() && theta_b.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: "phases must be finite",
            });
        }
        Ok(LightSource {
            alpha_mag,
            theta_a,
            xi_mag,
            theta_b,
        })
    }

    /// Real, phase-matched input with `α² = coherent_mean` and
    /// `sinh²ξ = squeezed_mean`.
    pub fn from_means(coherent_mean: f64, squeezed_mean: f64) -> Result<Self> {
        if !(coherent_mean.is_finite() && coherent_mean >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "alpha2",
                reason: "must be finite and nonnegative",
            });
        }
        if !(squeezed_mean.is_finite() && squeezed_mean >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "squeezed_mean",
                reason: "must be finite and nonnegative",
            });
        }
        Self::new(
            libm::sqrt(coherent_mean),
            0.0,
            libm::asinh(libm::sqrt(squeezed_mean)),
            0.0,
        )
    }

    /// Splits `n_bar` photons into `alpha2` coherent and `n_bar - alpha2`
    /// squeezed photons.
    pub fn from_split(n_bar: f64, alpha2: f64) -> Result<Self> {
        if alpha2 > n_bar * (1.0 + 1e-15) {
            return Err(Error::InvalidParameter {
                name: "alpha2",
                reason: "must not exceed n_bar",
            });
        }
        Self::from_means(alpha2, (n_bar - alpha2).max(0.0))
    }

    /// Same source with the coherent phase moved to `theta_a` and the
    /// squeezing phase set to `2·theta_a`, keeping the input phase matched.
    pub fn with_matched_phase(self, theta_a: f64) -> Self {
        LightSource {
            theta_a,
            theta_b: 2.0 * theta_a,
            ..self
        }
    }

    pub fn with_phases(self, theta_a: f64, theta_b: f64) -> Self {
        LightSource {
            theta_a,
            theta_b,
            ..self
        }
    }

    pub fn alpha_mag(&self) -> f64 {
        self.alpha_mag
    }

    pub fn theta_a(&self) -> f64 {
        self.theta_a
    }

    pub fn xi_mag(&self) -> f64 {
        self.xi_mag
    }

    pub fn theta_b(&self) -> f64 {
        self.theta_b
    }

    /// `n̄_a = |α|²`
    pub fn coherent_mean(&self) -> f64 {
        self.alpha_mag * self.alpha_mag
    }

    /// `n̄_b = sinh²|ξ|`
    pub fn squeezed_mean(&self) -> f64 {
        let s = libm::sinh(self.xi_mag);
        s * s
    }

    pub fn mean_photons(&self) -> f64 {
        self.coherent_mean() + self.squeezed_mean()
    }

    pub fn is_phase_matched(&self) -> bool {
        wrap_angle(self.theta_b - 2.0 * self.theta_a).abs() <= PHASE_MATCH_TOL
    }
}

/// `⟨n|α⟩` at `θ_a = 0`: `e^{-α²/2} αⁿ / √(n!)`.
pub fn coherent_amplitude(alpha_mag: f64, n: usize) -> LogSigned {
    if alpha_mag == 0.0 {
        return if n == 0 { LogSigned::ONE } else { LogSigned::ZERO };
    }
    let log_mag = -0.5 * alpha_mag * alpha_mag + n as f64 * libm::log(alpha_mag) - 0.5 * log_factorial(n as u64);
    LogSigned::new(log_mag, 1)
}

/// `⟨k|ξ⟩` at `θ_b = 0`: `H_k(0) / √(k! cosh ξ) · (tanh ξ / 2)^{k/2}`, with
/// `H_{2m}(0) = (-1)^m (2m)!/m!` and `H_{2m+1}(0) = 0`.
pub fn squeezed_amplitude(xi_mag: f64, k: usize) -> LogSigned {
    if k % 2 == 1 {
        return LogSigned::ZERO;
    }
    if xi_mag == 0.0 {
        return if k == 0 { LogSigned::ONE } else { LogSigned::ZERO };
    }
    let m = (k / 2) as u64;
    let log_mag = 0.5 * log_factorial(2 * m) - log_factorial(m)
        + m as f64 * (libm::log(libm::tanh(xi_mag)) - core::f64::consts::LN_2)
        - 0.5 * libm::log(libm::cosh(xi_mag));
    LogSigned::new(log_mag, if m.is_multiple_of(2) { 1 } else { -1 })
}

/// How [`squeezed_number_distribution`] evaluates `p(2k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionMode {
    Exact,
    /// `(1/cosh ξ) tanh^{2k} ξ / √(πk)`; `p(0)` is left at its exact value
    /// `1/cosh ξ` because the formula diverges at `k = 0`.
    Stirling,
}

/// Photon-number distribution `p(n)` of the squeezed vacuum for
/// `n = 0..=n_max` (odd entries are zero).
pub fn squeezed_number_distribution(xi_mag: f64, n_max: usize, mode: DistributionMode) -> Vec<f64> {
    let sech = 1.0 / libm::cosh(xi_mag);
    let log_tanh2 = 2.0 * libm::log(libm::tanh(xi_mag));
    (0..=n_max)
        .map(|n| {
            if n % 2 == 1 {
                return 0.0;
            }
            match mode {
                DistributionMode::Exact => squeezed_amplitude(xi_mag, n).square().to_f64(),
                DistributionMode::Stirling => {
                    if n == 0 {
                        sech
                    } else if xi_mag == 0.0 {
                        0.0
                    } else {
                        let k = (n / 2) as f64;
                        sech * libm::exp(k * log_tanh2) / libm::sqrt(core::f64::consts::PI * k)
                    }
                }
            }
        })
        .collect()
}

/// Poisson photon-number distribution of `|α⟩` for `n = 0..=n_max`.
pub fn coherent_number_distribution(alpha_mag: f64, n_max: usize) -> Vec<f64> {
    (0..=n_max)
        .map(|n| coherent_amplitude(alpha_mag, n).square().to_f64())
        .collect()
}

/// Fock amplitudes `c_n` and `s_k` of both inputs (at zero phase) for
/// `0 ≤ n, k ≤ cutoff`.
///
/// Immutable once built. Indices past the cutoff read as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeTable {
    alpha_mag: f64,
    xi_mag: f64,
    coherent: Vec<LogSigned>,
    squeezed: Vec<LogSigned>,
}

impl AmplitudeTable {
    /// Tabulates both amplitude sequences up to a fixed `cutoff`.
    pub fn with_cutoff(alpha_mag: f64, xi_mag: f64, cutoff: usize) -> Result<Self> {
        if cutoff > MAX_CUTOFF {
            return Err(Error::CutoffOverflow {
                required: cutoff,
                max: MAX_CUTOFF,
            });
        }
        Ok(AmplitudeTable {
            alpha_mag,
            xi_mag,
            coherent: (0..=cutoff).map(|n| coherent_amplitude(alpha_mag, n)).collect(),
            squeezed: (0..=cutoff).map(|k| squeezed_amplitude(xi_mag, k)).collect(),
        })
    }

    pub fn for_source(src: &LightSource, cutoff: usize) -> Result<Self> {
        Self::with_cutoff(src.alpha_mag(), src.xi_mag(), cutoff)
    }

    pub fn cutoff(&self) -> usize {
        self.coherent.len() - 1
    }

    pub fn alpha_mag(&self) -> f64 {
        self.alpha_mag
    }

    pub fn xi_mag(&self) -> f64 {
        self.xi_mag
    }

    pub fn coherent(&self, n: usize) -> LogSigned {
        self.coherent.get(n).copied().unwrap_or(LogSigned::ZERO)
    }

    pub fn squeezed(&self, k: usize) -> LogSigned {
        self.squeezed.get(k).copied().unwrap_or(LogSigned::ZERO)
    }

    pub fn coherent_table(&self) -> &[LogSigned] {
        &self.coherent
    }

    pub fn squeezed_table(&self) -> &[LogSigned] {
        &self.squeezed
    }

    /// `c_{N-k} s_k` for `k = 0..=N`, zero outside the table.
    pub fn product_terms(&self, total_n: usize) -> Vec<LogSigned> {
        (0..=total_n)
            .map(|k| self.coherent(total_n - k) * self.squeezed(k))
            .collect()
    }

    /// `ln G_N` (`-∞` when the component cannot occur).
    pub fn log_generation_probability(&self, total_n: usize) -> f64 {
        let squares: Vec<LogSigned> = self.product_terms(total_n).into_iter().map(LogSigned::square).collect();
        log_sum_exp(&squares).log_magnitude()
    }
}

/// Builds an [`AmplitudeTable`] whose cutoff leaves less than `tail_tol`
/// probability beyond it in each marginal.
pub fn build_amplitude_table(src: &LightSource, tail_tol: f64) -> Result<AmplitudeTable> {
    if !(tail_tol > 0.0 && tail_tol <= 1e-3) {
        return Err(Error::InvalidParameter {
            name: "tail_tol",
            reason: "must lie in (0, 1e-3]",
        });
    }
    let cutoff = coherent_cutoff(src.alpha_mag(), tail_tol)?.max(squeezed_cutoff(src.xi_mag(), tail_tol)?);
    AmplitudeTable::for_source(src, cutoff)
}

// Smallest n whose Poisson tail beyond n is provably below `tol`. Past the
// mode the term ratio α²/(n+1) is below one and shrinking, so the tail is
// bounded by a geometric series.
fn coherent_cutoff(alpha_mag: f64, tol: f64) -> Result<usize> {
    let mean = alpha_mag * alpha_mag;
    for n in 0..=MAX_CUTOFF {
        let ratio = mean / (n as f64 + 1.0);
        if ratio >= 1.0 {
            continue;
        }
        let p = coherent_amplitude(alpha_mag, n).square().to_f64();
        if p * ratio / (1.0 - ratio) < tol {
            return Ok(n);
        }
    }
    Err(Error::CutoffOverflow {
        required: MAX_CUTOFF + 1,
        max: MAX_CUTOFF,
    })
}

// p(2m+2)/p(2m) = tanh²ξ (2m+1)/(2m+2) < tanh²ξ, so the tail after 2m is at
// most p(2m) tanh²/(1 - tanh²) = p(2m) sinh²ξ.
fn squeezed_cutoff(xi_mag: f64, tol: f64) -> Result<usize> {
    let sinh2 = {
        let s = libm::sinh(xi_mag);
        s * s
    };
    for k in (0..=MAX_CUTOFF).step_by(2) {
        let p = squeezed_amplitude(xi_mag, k).square().to_f64();
        if p * sinh2 < tol {
            return Ok(k);
        }
    }
    Err(Error::CutoffOverflow {
        required: MAX_CUTOFF + 1,
        max: MAX_CUTOFF,
    })
}

/// `G_N = Σ_k |c_{N-k} s_k|²`; values below [`PROBABILITY_FLOOR`] read as 0.
pub fn generation_probability(amps: &AmplitudeTable, total_n: usize) -> f64 {
    let g = libm::exp(amps.log_generation_probability(total_n));
    if g < PROBABILITY_FLOOR {
        0.0
    } else {
        g.min(1.0)
    }
}

/// Post-selected, normalized `N`-photon state at zero phases:
/// `coeffs[k] = c_{N-k} s_k / √G_N`, with `k` the photon number in port `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct NPhotonState {
    total_n: usize,
    coeffs: Vec<f64>,
    gen_prob: f64,
    log_gen_prob: f64,
}

impl NPhotonState {
    /// A normalized state from explicit real coefficients (indexed by the
    /// port-`b` photon number). Used for synthetic states in tests and
    /// probes; `gen_prob` is set to 1.
    pub fn from_coefficients(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter {
                name: "coeffs",
                reason: "need at least one coefficient",
            });
        }
        let norm = libm::sqrt(compensated_sum(coeffs.iter().map(|c| c * c)));
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "coeffs",
                reason: "state has zero norm",
            });
        }
        Ok(NPhotonState {
            total_n: coeffs.len() - 1,
            coeffs: coeffs.into_iter().map(|c| c / norm).collect(),
            gen_prob: 1.0,
            log_gen_prob: 0.0,
        })
    }

    pub fn total_n(&self) -> usize {
        self.total_n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn gen_prob(&self) -> f64 {
        self.gen_prob
    }

    pub fn log_gen_prob(&self) -> f64 {
        self.log_gen_prob
    }
}

/// Projects the input onto its `N`-photon component.
///
/// Only terms inside the table enter, so for `N` above the cutoff this is
/// the component of the truncated input.
pub fn postselect(amps: &AmplitudeTable, total_n: usize) -> Result<NPhotonState> {
    let terms = amps.product_terms(total_n);
    let squares: Vec<LogSigned> = terms.iter().map(|t| t.square()).collect();
    let log_g = log_sum_exp(&squares).log_magnitude();
    if log_g == f64::NEG_INFINITY {
        return Err(Error::ZeroProbability { total_n });
    }
    let coeffs = terms.iter().map(|t| t.scale_log(-0.5 * log_g).to_f64()).collect();
    let g = libm::exp(log_g);
    Ok(NPhotonState {
        total_n,
        coeffs,
        gen_prob: if g < PROBABILITY_FLOOR { 0.0 } else { g.min(1.0) },
        log_gen_prob: log_g,
    })
}

/// `N`-photon component for arbitrary input phases:
/// `coeffs[k] = c_{N-k}(θ_a) s_k(θ_b) / √G_N` with
/// `c_n(θ) = c_n(0) e^{inθ}` and `s_k(θ) = s_k(0) e^{ikθ/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexNPhotonState {
    total_n: usize,
    coeffs: Vec<Complex64>,
    gen_prob: f64,
}

impl ComplexNPhotonState {
    pub fn total_n(&self) -> usize {
        self.total_n
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn gen_prob(&self) -> f64 {
        self.gen_prob
    }
}

pub fn postselect_with_phases(amps: &AmplitudeTable, src: &LightSource, total_n: usize) -> Result<ComplexNPhotonState> {
    let real = postselect(amps, total_n)?;
    let coeffs = real
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let phase = (total_n - k) as f64 * src.theta_a() + 0.5 * k as f64 * src.theta_b();
            Complex64::from_polar(1.0, phase) * c
        })
        .collect();
    Ok(ComplexNPhotonState {
        total_n,
        coeffs,
        gen_prob: real.gen_prob,
    })
}
