//! The interferometer as a rotation `exp(-iφ J_y)` in the Dicke basis.
//!
//! Within the `N`-photon sector we index Dicke states by `k = N_b`, the
//! photon number in port `b`, so `μ = N/2 - k` and `|J, μ⟩ = |N-k⟩_a ⊗ |k⟩_b`.
//! With `J_y = (a†b - b†a)/(2i)` the generator `G = -iJ_y` is real and
//! antisymmetric:
//!
//! ```text
//! (G v)_k = ½ [ √(k (N-k+1)) v_{k-1} - √((k+1)(N-k)) v_{k+1} ]
//! ```
//!
//! and `exp(φ G)` is the real Wigner small-d matrix. For `N = 1` it is
//! `[[cos φ/2, -sin φ/2], [sin φ/2, cos φ/2]]` in `(μ = +½, μ = -½)` order.
//!
//! The matrix exponential goes through an eigen-decomposition. Conjugating
//! `J_y` with `D = diag(iᵏ)` gives the real symmetric tridiagonal
//! `T = D† J_y D` (off-diagonal `½√(k(N-k+1))`), so
//! `exp(-iφ J_y) = D W e^{-iφΛ} Wᵀ D†` with `T = W Λ Wᵀ`. The spectrum of `T`
//! is known exactly (`Λ = {N/2, N/2 - 1, …, -N/2}`), and the computed
//! eigenvalues are snapped onto it.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::symmetric_tridiagonal_eigen;
use crate::numerics::compensated_sum;
use crate::states::{generation_probability, postselect, AmplitudeTable, ComplexNPhotonState, NPhotonState};

/// Largest `N` for which a rotation block is built.
pub const MAX_ROTATION_N: usize = 512;

/// A Dicke state `|J, μ⟩` stored as `(N, 2μ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DickeIndex {
    total_n: usize,
    mu_twice: i64,
}

impl DickeIndex {
    pub fn new(total_n: usize, mu_twice: i64) -> Result<Self> {
        let n = total_n as i64;
        if mu_twice.abs() > n || (n - mu_twice) % 2 != 0 {
            return Err(Error::InvalidParameter {
                name: "mu_twice",
                reason: "need |2μ| <= N with 2μ ≡ N (mod 2)",
            });
        }
        Ok(DickeIndex { total_n, mu_twice })
    }

    pub fn from_counts(n_a: usize, n_b: usize) -> Self {
        DickeIndex {
            total_n: n_a + n_b,
            mu_twice: n_a as i64 - n_b as i64,
        }
    }

    pub fn total_n(&self) -> usize {
        self.total_n
    }

    pub fn mu_twice(&self) -> i64 {
        self.mu_twice
    }

    /// `N_a = J + μ`
    pub fn n_a(&self) -> usize {
        ((self.total_n as i64 + self.mu_twice) / 2) as usize
    }

    /// `N_b = J - μ`, also the row index inside a [`RotationBlock`].
    pub fn n_b(&self) -> usize {
        ((self.total_n as i64 - self.mu_twice) / 2) as usize
    }
}

// Multiplies by iᵖ.
#[inline]
fn times_i_pow(z: Complex64, p: usize) -> Complex64 {
    match p % 4 {
        0 => z,
        1 => Complex64::new(-z.im, z.re),
        2 => -z,
        _ => Complex64::new(z.im, -z.re),
    }
}

/// Cached eigen-decomposition of `J_y` in one `N`-photon sector.
#[derive(Debug, Clone)]
pub struct DickeRotator {
    total_n: usize,
    eigenvalues: Vec<f64>,
    // row-major (N+1)×(N+1), column j = eigenvector j
    eigenvectors: Vec<f64>,
}

impl DickeRotator {
    pub fn new(total_n: usize) -> Result<Self> {
        if total_n > MAX_ROTATION_N {
            return Err(Error::SizeExceeded {
                total_n,
                max: MAX_ROTATION_N,
            });
        }
        let dim = total_n + 1;
        let diag = vec![0.0; dim];
        let off: Vec<f64> = (1..dim)
            .map(|k| 0.5 * libm::sqrt((k * (total_n - k + 1)) as f64))
            .collect();
        let (mut eigenvalues, eigenvectors) =
            symmetric_tridiagonal_eigen(&diag, &off).ok_or(Error::NoConvergence { total_n })?;
        for lambda in eigenvalues.iter_mut() {
            *lambda = 0.5 * libm::round(2.0 * *lambda);
        }
        Ok(DickeRotator {
            total_n,
            eigenvalues,
            eigenvectors,
        })
    }

    /// Rotators for every sector `0..=n_max`.
    pub fn family(n_max: usize) -> Result<Vec<DickeRotator>> {
        (0..=n_max).map(DickeRotator::new).collect()
    }

    pub fn total_n(&self) -> usize {
        self.total_n
    }

    fn dim(&self) -> usize {
        self.total_n + 1
    }

    fn check_len(&self, len: usize) {
        assert_eq!(
            len,
            self.dim(),
            "state does not belong to the N = {} sector",
            self.total_n
        );
    }

    /// `exp(-iφ J_y) ψ` for a complex state.
    pub fn rotate_complex(&self, psi: &[Complex64], phi: f64) -> Vec<Complex64> {
        self.check_len(psi.len());
        let dim = self.dim();
        if phi == 0.0 {
            return psi.to_vec();
        }
        let w = &self.eigenvectors;
        // u = e^{-iφΛ} Wᵀ D† ψ
        let mut u = vec![Complex64::new(0.0, 0.0); dim];
        for (l, &p) in psi.iter().enumerate() {
            let shifted = times_i_pow(p, 4 - l % 4);
            for (lam, ul) in u.iter_mut().enumerate() {
                *ul += shifted * w[l * dim + lam];
            }
        }
        for (ul, &lambda) in u.iter_mut().zip(&self.eigenvalues) {
            *ul *= Complex64::from_polar(1.0, -phi * lambda);
        }
        (0..dim)
            .map(|j| {
                let row = &w[j * dim..(j + 1) * dim];
                let s: Complex64 = row.iter().zip(&u).map(|(&wj, &ul)| ul * wj).sum();
                times_i_pow(s, j)
            })
            .collect()
    }

    /// `exp(-iφ J_y) ψ` for a real state (the result is real).
    pub fn rotate(&self, psi: &[f64], phi: f64) -> Vec<f64> {
        if phi == 0.0 {
            self.check_len(psi.len());
            return psi.to_vec();
        }
        let z: Vec<Complex64> = psi.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.rotate_complex(&z, phi).into_iter().map(|c| c.re).collect()
    }

    /// `d^J(φ)` as a dense row-major matrix.
    pub fn block(&self, phi: f64) -> RotationBlock {
        let dim = self.dim();
        let mut d = vec![0.0; dim * dim];
        if phi == 0.0 {
            for i in 0..dim {
                d[i * dim + i] = 1.0;
            }
        } else {
            let w = &self.eigenvectors;
            let phases: Vec<Complex64> = self
                .eigenvalues
                .iter()
                .map(|&lambda| Complex64::from_polar(1.0, -phi * lambda))
                .collect();
            for j in 0..dim {
                for l in 0..dim {
                    let s: Complex64 = (0..dim)
                        .map(|lam| phases[lam] * (w[j * dim + lam] * w[l * dim + lam]))
                        .sum();
                    // Re(i^{j-l} s)
                    d[j * dim + l] = times_i_pow(s, (j + 4 * dim - l) % 4).re;
                }
            }
        }
        RotationBlock {
            total_n: self.total_n,
            phi,
            d,
        }
    }
}

/// `G v` with `G = -i J_y`.
pub fn apply_generator(v: &[f64]) -> Vec<f64> {
    let n = v.len().saturating_sub(1);
    (0..v.len())
        .map(|k| {
            let down = if k > 0 {
                libm::sqrt((k * (n - k + 1)) as f64) * v[k - 1]
            } else {
                0.0
            };
            let up = if k < n {
                libm::sqrt(((k + 1) * (n - k)) as f64) * v[k + 1]
            } else {
                0.0
            };
            0.5 * (down - up)
        })
        .collect()
}

pub fn apply_generator_complex(v: &[Complex64]) -> Vec<Complex64> {
    let n = v.len().saturating_sub(1);
    (0..v.len())
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            if k > 0 {
                acc += v[k - 1] * libm::sqrt((k * (n - k + 1)) as f64);
            }
            if k < n {
                acc -= v[k + 1] * libm::sqrt(((k + 1) * (n - k)) as f64);
            }
            acc * 0.5
        })
        .collect()
}

/// Real Wigner small-d matrix `d^J_{μν}(φ) = ⟨J,μ|e^{-iφJ_y}|J,ν⟩`, rows and
/// columns ordered by `k = J - μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationBlock {
    total_n: usize,
    phi: f64,
    d: Vec<f64>,
}

impl RotationBlock {
    pub fn total_n(&self) -> usize {
        self.total_n
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn dim(&self) -> usize {
        self.total_n + 1
    }

    /// Entry at row `row` and column `col` (both `k`-indices).
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.d[row * self.dim() + col]
    }

    /// Entry addressed by Dicke labels.
    pub fn entry(&self, row: DickeIndex, col: DickeIndex) -> f64 {
        self.get(row.n_b(), col.n_b())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.d
    }
}

pub fn wigner_d_block(total_n: usize, phi: f64) -> Result<RotationBlock> {
    Ok(DickeRotator::new(total_n)?.block(phi))
}

/// `P_N(μ|φ)` indexed by `k = J - μ`.
pub fn conditional_probabilities(state: &NPhotonState, phi: f64) -> Result<Vec<f64>> {
    let rotator = DickeRotator::new(state.total_n())?;
    Ok(conditional_probabilities_with(&rotator, state, phi))
}

pub fn conditional_probabilities_with(rotator: &DickeRotator, state: &NPhotonState, phi: f64) -> Vec<f64> {
    rotator.rotate(state.coeffs(), phi).into_iter().map(|v| v * v).collect()
}

/// `∂P_N(μ|φ)/∂φ = 2 v_μ (G v)_μ` with `v = e^{-iφJ_y} ψ̃_N`.
pub fn probability_derivatives(state: &NPhotonState, phi: f64) -> Result<Vec<f64>> {
    let rotator = DickeRotator::new(state.total_n())?;
    Ok(probability_derivatives_with(&rotator, state, phi))
}

pub fn probability_derivatives_with(rotator: &DickeRotator, state: &NPhotonState, phi: f64) -> Vec<f64> {
    let v = rotator.rotate(state.coeffs(), phi);
    let gv = apply_generator(&v);
    v.iter().zip(&gv).map(|(a, b)| 2.0 * a * b).collect()
}

/// Probabilities of a general (complex) `N`-photon state.
pub fn conditional_probabilities_complex(rotator: &DickeRotator, state: &ComplexNPhotonState, phi: f64) -> Vec<f64> {
    rotator
        .rotate_complex(state.coeffs(), phi)
        .into_iter()
        .map(|v| v.norm_sqr())
        .collect()
}

/// `∂P/∂φ = 2 Re(v̄ · G v)` for a complex state.
pub fn probability_derivatives_complex(rotator: &DickeRotator, state: &ComplexNPhotonState, phi: f64) -> Vec<f64> {
    let v = rotator.rotate_complex(state.coeffs(), phi);
    let gv = apply_generator_complex(&v);
    v.iter().zip(&gv).map(|(a, b)| 2.0 * (a.conj() * b).re).collect()
}

/// One detectable photon-counting event `{N_a, N_b}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub total_n: usize,
    pub n_a: usize,
    pub n_b: usize,
    pub probability: f64,
    pub derivative: f64,
}

/// `P(N, μ | φ) = G_N P_N(μ|φ)` over every event with `N ≤ n_res`, plus the
/// single overflow outcome collecting everything above the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    n_res: usize,
    phi: f64,
    outcomes: Vec<Outcome>,
    overflow: f64,
    overflow_derivative: f64,
}

impl OutcomeDistribution {
    pub fn n_res(&self) -> usize {
        self.n_res
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Detectable outcomes, sorted by `N` then by `N_b`.
    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    /// `P(add|φ) = 1 - Σ P(N, μ|φ)`.
    pub fn overflow(&self) -> f64 {
        self.overflow
    }

    /// `∂P(add|φ)/∂φ = -Σ ∂P(N, μ|φ)/∂φ`.
    pub fn overflow_derivative(&self) -> f64 {
        self.overflow_derivative
    }

    pub fn detectable_mass(&self) -> f64 {
        compensated_sum(self.outcomes.iter().map(|o| o.probability))
    }

    /// Classical Fisher information of the detectable events (outcomes with
    /// `P < 1e-300` are skipped).
    pub fn fisher_information(&self) -> f64 {
        compensated_sum(
            self.outcomes
                .iter()
                .filter(|o| o.probability >= 1e-300)
                .map(|o| o.derivative * o.derivative / o.probability),
        )
    }

    /// Contribution of the overflow outcome if it is kept as an extra
    /// event.
    pub fn overflow_fisher_information(&self) -> f64 {
        if self.overflow < 1e-300 {
            0.0
        } else {
            self.overflow_derivative * self.overflow_derivative / self.overflow
        }
    }
}

pub fn full_outcome_distribution(amps: &AmplitudeTable, n_res: usize, phi: f64) -> Result<OutcomeDistribution> {
    let rotators = DickeRotator::family(n_res)?;
    Ok(full_outcome_distribution_with(&rotators, amps, phi))
}

/// As [`full_outcome_distribution`], reusing rotators for sectors
/// `0..rotators.len()`; the threshold is `rotators.len() - 1`.
pub fn full_outcome_distribution_with(
    rotators: &[DickeRotator],
    amps: &AmplitudeTable,
    phi: f64,
) -> OutcomeDistribution {
    let n_res = rotators.len() - 1;
    let mut outcomes = Vec::with_capacity((n_res + 1) * (n_res + 2) / 2);
    for (total_n, rotator) in rotators.iter().enumerate() {
        let g = generation_probability(amps, total_n);
        let (probs, derivs) = match postselect(amps, total_n) {
            Ok(state) if g > 0.0 => (
                conditional_probabilities_with(rotator, &state, phi),
                probability_derivatives_with(rotator, &state, phi),
            ),
            _ => (vec![0.0; total_n + 1], vec![0.0; total_n + 1]),
        };
        for k in 0..=total_n {
            outcomes.push(Outcome {
                total_n,
                n_a: total_n - k,
                n_b: k,
                probability: g * probs[k],
                derivative: g * derivs[k],
            });
        }
    }
    let detectable = compensated_sum(outcomes.iter().map(|o| o.probability));
    let slope = compensated_sum(outcomes.iter().map(|o| o.derivative));
    OutcomeDistribution {
        n_res,
        phi,
        outcomes,
        overflow: (1.0 - detectable).max(0.0),
        overflow_derivative: -slope,
    }
}
