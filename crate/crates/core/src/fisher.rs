//! Classical and quantum Fisher information.
//!
//! For a phase-matched input the photon-counting CFI of every post-selected
//! `N`-photon component equals its QFI,
//!
//! ```text
//! F_N = 4⟨J_y²⟩ = (1/G_N) Σ_k [N + 2k(N-k) + 2kα²/tanh ξ] (c_{N-k} s_k)²,
//! ```
//!
//! and the total over every event with `N ≤ N_res` is `F_Q = Σ_N G_N F_N`.
//! This module evaluates that identity three independent ways (brute-force
//! CFI from rotated probabilities, the closed form above, and explicit
//! operator expectation values), plus the ideal-detector limit, the `erfc`
//! closed-form approximation and its large-`n̄_b` expansion.

use alloc::vec::Vec;
use core::f64::consts::{E, FRAC_1_SQRT_2, PI};
use core::fmt;
use core::str::FromStr;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{compensated_sum, erfc, CompensatedSum};
use crate::rotation::{apply_generator, apply_generator_complex, DickeRotator};
use crate::states::{postselect, AmplitudeTable, ComplexNPhotonState, LightSource, NPhotonState, PROBABILITY_FLOOR};

/// Outcomes with a probability below this are left out of CFI sums; for
/// the analytic families here `(∂P)²/P → 0` as `P → 0`.
pub const CFI_PROBABILITY_FLOOR: f64 = 1e-300;

/// Number-resolution threshold of the detector pair: events with
/// `N_a + N_b > N_res` are not resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Threshold {
    Finite(usize),
    /// Perfect detectors; sums run over the whole amplitude table.
    Infinite,
}

impl Threshold {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Threshold::Infinite)
    }

    pub fn finite(&self) -> Option<usize> {
        match *self {
            Threshold::Finite(n) => Some(n),
            Threshold::Infinite => None,
        }
    }

    /// Largest total photon number that contributes given a table `cutoff`.
    pub fn effective_limit(&self, cutoff: usize) -> usize {
        match *self {
            Threshold::Finite(n) => n.min(2 * cutoff),
            Threshold::Infinite => 2 * cutoff,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Finite(n) => write!(f, "{n}"),
            Threshold::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Threshold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(Threshold::Infinite);
        }
        s.parse().map(Threshold::Finite).map_err(|_| Error::InvalidParameter {
            name: "n_res",
            reason: "expected a nonnegative integer or \"inf\"",
        })
    }
}

fn require_matched(src: &LightSource) -> Result<()> {
    if src.is_phase_matched() {
        Ok(())
    } else {
        Err(Error::NotPhaseMatched)
    }
}

fn require_consistent(amps: &AmplitudeTable, src: &LightSource) -> Result<()> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    if close(amps.alpha_mag(), src.alpha_mag()) && close(amps.xi_mag(), src.xi_mag()) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "amps",
            reason: "amplitude table was built for a different source",
        })
    }
}

// 2α²/tanh ξ, the weight of the a†²b² cross term. At ξ = 0 it only ever
// multiplies k s_k² = 0, so it is taken as zero there.
fn cross_weight(alpha_mag: f64, xi_mag: f64) -> f64 {
    if xi_mag == 0.0 {
        0.0
    } else {
        2.0 * alpha_mag * alpha_mag / libm::tanh(xi_mag)
    }
}

/// `F_N(φ) = Σ_μ (∂P_N/∂φ)² / P_N` from rotated probabilities and analytic
/// derivatives.
pub fn cfi_per_n_numeric(state: &NPhotonState, phi: f64) -> Result<f64> {
    let rotator = DickeRotator::new(state.total_n())?;
    Ok(cfi_per_n_numeric_with(&rotator, state, phi))
}

pub fn cfi_per_n_numeric_with(rotator: &DickeRotator, state: &NPhotonState, phi: f64) -> f64 {
    let v = rotator.rotate(state.coeffs(), phi);
    let gv = apply_generator(&v);
    compensated_sum(v.iter().zip(&gv).filter_map(|(&a, &b)| {
        let p = a * a;
        if p < CFI_PROBABILITY_FLOOR {
            None
        } else {
            let dp = 2.0 * a * b;
            Some(dp * dp / p)
        }
    }))
}

/// CFI of a general complex `N`-photon state (no phase matching assumed).
pub fn cfi_per_n_general(rotator: &DickeRotator, state: &ComplexNPhotonState, phi: f64) -> f64 {
    let v = rotator.rotate_complex(state.coeffs(), phi);
    let gv = apply_generator_complex(&v);
    compensated_sum(v.iter().zip(&gv).filter_map(|(a, b)| {
        let p = a.norm_sqr();
        if p < CFI_PROBABILITY_FLOOR {
            None
        } else {
            let dp = 2.0 * (a.conj() * b).re;
            Some(dp * dp / p)
        }
    }))
}

/// Closed-form per-`N` Fisher information of a phase-matched component,
/// `Σ_k [N + 2k(N-k) + 2kα²/tanh ξ] |ψ_k|²`; independent of `φ`.
pub fn cfi_per_n_analytic(state: &NPhotonState, alpha_mag: f64, xi_mag: f64) -> f64 {
    let n = state.total_n() as f64;
    let cross = cross_weight(alpha_mag, xi_mag);
    compensated_sum(state.coeffs().iter().enumerate().map(|(k, &c)| {
        let w = c * c;
        if w == 0.0 {
            return 0.0;
        }
        let k = k as f64;
        (n + 2.0 * k * (n - k)) * w + cross * (k * w)
    }))
}

/// `⟨J_y⟩ = Im⟨a†b⟩` of a complex `N`-photon state.
pub fn mean_jy(coeffs: &[Complex64]) -> f64 {
    let n = coeffs.len().saturating_sub(1);
    // a†b |N-k, k⟩ = √((N-k+1) k) |N-k+1, k-1⟩
    let a_dag_b: Complex64 = (1..=n)
        .map(|k| coeffs[k - 1].conj() * coeffs[k] * libm::sqrt(((n - k + 1) * k) as f64))
        .sum();
    a_dag_b.im
}

/// `4(⟨J_y²⟩ - ⟨J_y⟩²)` by applying `2a†ab†b + a†a + b†b` and
/// `a†²b² + h.c.` to the coefficient vector directly.
pub fn qfi_operator_oracle_complex(coeffs: &[Complex64]) -> f64 {
    let n = coeffs.len().saturating_sub(1);
    let diagonal = compensated_sum(coeffs.iter().enumerate().map(|(k, c)| {
        let (na, nb) = ((n - k) as f64, k as f64);
        (2.0 * na * nb + na + nb) * c.norm_sqr()
    }));
    // a†²b² |N-k, k⟩ = √((N-k+1)(N-k+2) k (k-1)) |N-k+2, k-2⟩
    let mut pair = Complex64::new(0.0, 0.0);
    for k in 2..=n {
        let amp = libm::sqrt(((n - k + 1) * (n - k + 2) * k * (k - 1)) as f64);
        pair += coeffs[k - 2].conj() * coeffs[k] * amp;
    }
    let jy = mean_jy(coeffs);
    diagonal - 2.0 * pair.re - 4.0 * jy * jy
}

/// Operator-level QFI of a real post-selected state.
pub fn qfi_per_n_operator_oracle(state: &NPhotonState) -> f64 {
    let z: Vec<Complex64> = state.coeffs().iter().map(|&c| Complex64::new(c, 0.0)).collect();
    qfi_operator_oracle_complex(&z)
}

/// One `N`-photon component of a [`FisherReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerNRecord {
    pub total_n: usize,
    /// `F_N = F_{Q,N}`
    pub fisher: f64,
    /// `G_N`
    pub gen_prob: f64,
    /// `G_N F_N`
    pub weighted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherReport {
    pub n_bar: f64,
    pub n_bar_a: f64,
    pub n_bar_b: f64,
    pub n_res: Threshold,
    pub cutoff: usize,
    pub per_n: Vec<PerNRecord>,
    /// Double sum over detectable events.
    pub total_exact: f64,
    /// `α² e^{2ξ} + sinh² ξ`
    pub total_ideal: f64,
    /// `erfc` closed form; `None` outside its domain.
    pub total_approx: Option<f64>,
    /// Phase at which [`FisherReport::total_numeric`] was evaluated.
    pub phi: Option<f64>,
    /// `Σ_N Σ_μ (∂P)²/P` from rotated probabilities, if requested.
    pub total_numeric: Option<f64>,
}

impl FisherReport {
    pub fn weighted_sum(&self) -> f64 {
        compensated_sum(self.per_n.iter().map(|r| r.weighted))
    }

    /// Adds the brute-force CFI at `phi` (only for finite thresholds within
    /// the rotation ceiling).
    pub fn with_numeric_check(mut self, amps: &AmplitudeTable, phi: f64) -> Result<Self> {
        let n_res = self.n_res.finite().ok_or(Error::InvalidParameter {
            name: "n_res",
            reason: "numeric CFI needs a finite threshold",
        })?;
        self.total_numeric = Some(total_cfi_numeric(amps, n_res, phi)?);
        self.phi = Some(phi);
        Ok(self)
    }
}

/// Total QFI over all events `N_a + N_b ≤ N_res`:
///
/// ```text
/// F_Q = Σ_{N_a} Σ_{N_b ≤ N_res - N_a} [N_a + (1 + 2N_a + 2α²/tanh ξ) N_b] (c_{N_a} s_{N_b})²
/// ```
///
/// The inner sums over `N_b` are prefix sums, so the cost is linear in the
/// threshold. Every term is nonnegative.
pub fn total_fisher_value(amps: &AmplitudeTable, src: &LightSource, n_res: Threshold) -> Result<f64> {
    require_matched(src)?;
    require_consistent(amps, src)?;
    let cutoff = amps.cutoff();
    let limit = n_res.effective_limit(cutoff);

    let mut s0 = Vec::with_capacity(cutoff + 1);
    let mut s1 = Vec::with_capacity(cutoff + 1);
    let (mut acc0, mut acc1) = (CompensatedSum::new(), CompensatedSum::new());
    for (k, s) in amps.squeezed_table().iter().enumerate() {
        let p = s.square().to_f64();
        acc0.add(p);
        acc1.add(k as f64 * p);
        s0.push(acc0.value());
        s1.push(acc1.value());
    }

    let cross = cross_weight(amps.alpha_mag(), amps.xi_mag());
    let mut total = CompensatedSum::new();
    for (na, c) in amps.coherent_table().iter().enumerate().take(limit.min(cutoff) + 1) {
        let top = (limit - na).min(cutoff);
        let c2 = c.square().to_f64();
        if c2 == 0.0 {
            continue;
        }
        let na = na as f64;
        total.add(c2 * (na * s0[top] + (1.0 + 2.0 * na + cross) * s1[top]));
    }
    Ok(total.value())
}

/// Full report for a phase-matched source: per-`N` contributions, the exact
/// total, the ideal limit and the `erfc` approximation.
pub fn total_fisher_exact(amps: &AmplitudeTable, src: &LightSource, n_res: Threshold) -> Result<FisherReport> {
    let total_exact = total_fisher_value(amps, src, n_res)?;
    let limit = n_res.effective_limit(amps.cutoff());
    let per_n = (0..=limit)
        .map(|total_n| match postselect(amps, total_n) {
            Ok(state) => {
                let fisher = cfi_per_n_analytic(&state, src.alpha_mag(), src.xi_mag());
                let g = libm::exp(state.log_gen_prob());
                PerNRecord {
                    total_n,
                    fisher,
                    gen_prob: state.gen_prob(),
                    weighted: if g < PROBABILITY_FLOOR { 0.0 } else { g * fisher },
                }
            }
            Err(_) => PerNRecord {
                total_n,
                fisher: 0.0,
                gen_prob: 0.0,
                weighted: 0.0,
            },
        })
        .collect();
    Ok(FisherReport {
        n_bar: src.mean_photons(),
        n_bar_a: src.coherent_mean(),
        n_bar_b: src.squeezed_mean(),
        n_res,
        cutoff: amps.cutoff(),
        per_n,
        total_exact,
        total_ideal: total_fisher_ideal(src)?.value(),
        total_approx: total_fisher_approx(src, n_res).ok(),
        phi: None,
        total_numeric: None,
    })
}

/// `Σ_{N ≤ n_res} G_N F_N(φ)` from the rotated photon-counting
/// probabilities (no phase-matching identity used).
pub fn total_cfi_numeric(amps: &AmplitudeTable, n_res: usize, phi: f64) -> Result<f64> {
    let mut total = CompensatedSum::new();
    for total_n in 0..=n_res {
        let Ok(state) = postselect(amps, total_n) else {
            continue;
        };
        let g = libm::exp(state.log_gen_prob());
        if g < PROBABILITY_FLOOR {
            continue;
        }
        let rotator = DickeRotator::new(total_n)?;
        total.add(g * cfi_per_n_numeric_with(&rotator, &state, phi));
    }
    Ok(total.value())
}

/// Ideal-detector QFI in its two algebraic forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealFisher {
    /// `α² e^{2ξ} + sinh² ξ`
    pub closed_form: f64,
    /// `n̄ + 2 n̄_a n̄_b (1 + √(1 + 1/n̄_b))`
    pub mean_form: f64,
}

impl IdealFisher {
    pub fn value(&self) -> f64 {
        self.closed_form
    }
}

pub fn total_fisher_ideal(src: &LightSource) -> Result<IdealFisher> {
    require_matched(src)?;
    let (na, nb) = (src.coherent_mean(), src.squeezed_mean());
    let closed_form = na * libm::exp(2.0 * src.xi_mag()) + nb;
    // n̄_b (1 + √(1 + 1/n̄_b)) written without the 1/n̄_b singularity
    let mean_form = na + nb + 2.0 * na * (nb + libm::sqrt(nb * nb + nb));
    Ok(IdealFisher { closed_form, mean_form })
}

/// `A` and `B` of the closed-form approximation:
/// `B = ln(1 + 1/n̄_b)`, `A = √((N_res - n̄_a + 1) B / 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxParams {
    pub a_value: f64,
    pub b_value: f64,
}

impl ApproxParams {
    pub fn new(coherent_mean: f64, squeezed_mean: f64, n_res: f64) -> Result<Self> {
        if !(squeezed_mean > 0.0) {
            return Err(Error::Domain("needs a squeezed mean photon number > 0"));
        }
        // n̄_a = |α|² carries rounding from the square; forgive it at the edge
        let slack = n_res - coherent_mean + 1.0;
        if slack < -1e-12 * coherent_mean.max(1.0) {
            return Err(Error::Domain("n_res < n_a - 1"));
        }
        let b_value = libm::log1p(1.0 / squeezed_mean);
        let a_value = libm::sqrt(0.5 * slack.max(0.0) * b_value);
        Ok(ApproxParams { a_value, b_value })
    }

    pub fn erfc_term(&self) -> f64 {
        erfc(self.a_value)
    }

    /// `(2A/√π) e^{-A²}`
    pub fn gaussian_term(&self) -> f64 {
        2.0 * self.a_value / libm::sqrt(PI) * libm::exp(-self.a_value * self.a_value)
    }
}

pub fn approx_params(src: &LightSource, n_res: usize) -> Result<ApproxParams> {
    ApproxParams::new(src.coherent_mean(), src.squeezed_mean(), n_res as f64)
}

/// `F_Q ≈ F_Q^(id) [1 - √(n̄_b/(1+n̄_b)) (n̄_b B)^{-3/2} (erfc A + (2A/√π) e^{-A²})]`.
pub fn total_fisher_approx(src: &LightSource, n_res: Threshold) -> Result<f64> {
    let ideal = total_fisher_ideal(src)?.value();
    let Threshold::Finite(n_res) = n_res else {
        return Ok(ideal);
    };
    let params = approx_params(src, n_res)?;
    let nb = src.squeezed_mean();
    let nb_b = nb * params.b_value;
    let bracket =
        1.0 - libm::sqrt(nb / (1.0 + nb)) / (nb_b * libm::sqrt(nb_b)) * (params.erfc_term() + params.gaussian_term());
    Ok(ideal * bracket)
}

/// Intermediate approximation with the `N_a` sum completed:
/// `n̄_a Σ_{N_b ≤ L} s² + (1 + 2n̄_a + 2n̄_a/tanh ξ) Σ_{N_b ≤ L} N_b s²`,
/// `L = ⌊N_res - n̄_a⌋`.
pub fn total_fisher_intermediate(amps: &AmplitudeTable, src: &LightSource, n_res: Threshold) -> Result<f64> {
    require_matched(src)?;
    require_consistent(amps, src)?;
    let na = src.coherent_mean();
    let top = match n_res {
        Threshold::Infinite => amps.cutoff(),
        Threshold::Finite(n) => {
            let l = libm::floor(n as f64 - na);
            if l < 0.0 {
                return Ok(0.0);
            }
            (l as usize).min(amps.cutoff())
        }
    };
    let (mut s0, mut s1) = (CompensatedSum::new(), CompensatedSum::new());
    for (k, s) in amps.squeezed_table().iter().enumerate().take(top + 1) {
        let p = s.square().to_f64();
        s0.add(p);
        s1.add(k as f64 * p);
    }
    let cross = cross_weight(amps.alpha_mag(), amps.xi_mag());
    Ok(na * s0.value() + (1.0 + 2.0 * na + cross) * s1.value())
}

/// Large-`n̄_b` expansion at `N_res = n̄ = 2n̄_b`:
///
/// ```text
/// erfc(A)          = erfc(1/√2) - n̄_b⁻¹ / (2√(2eπ)) + O(n̄_b⁻²)
/// (2A/√π) e^{-A²}  = √(2/(eπ))  - n̄_b⁻² / (8√(2eπ)) + O(n̄_b⁻³)
/// F_Q / F_Q^(id)  → 1 - erfc(1/√2) - √(2/(eπ)) ≈ 0.1987
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticSeries {
    pub leading: f64,
    pub erfc_limit: f64,
    pub gaussian_limit: f64,
    pub erfc_first_order: f64,
    pub gaussian_second_order: f64,
}

impl AsymptoticSeries {
    pub fn erfc_expansion(&self, squeezed_mean: f64) -> f64 {
        self.erfc_limit + self.erfc_first_order / squeezed_mean
    }

    pub fn gaussian_expansion(&self, squeezed_mean: f64) -> f64 {
        self.gaussian_limit + self.gaussian_second_order / (squeezed_mean * squeezed_mean)
    }
}

pub fn asymptotic_constant() -> AsymptoticSeries {
    let erfc_limit = erfc(FRAC_1_SQRT_2);
    let gaussian_limit = libm::sqrt(2.0 / (E * PI));
    let root = libm::sqrt(2.0 * E * PI);
    AsymptoticSeries {
        leading: 1.0 - erfc_limit - gaussian_limit,
        erfc_limit,
        gaussian_limit,
        erfc_first_order: -1.0 / (2.0 * root),
        gaussian_second_order: -1.0 / (8.0 * root),
    }
}
