//! Scalar building blocks shared by every other module.
//!
//! Fock amplitudes at `n̄ ~ 200` reach magnitudes far below `f64::MIN_POSITIVE`,
//! so they are carried as [`LogSigned`] values (log of the magnitude plus a
//! sign) and only materialized once a product has been formed.

use core::cmp::Ordering;
use core::f64::consts::PI;

/// `ln(2π) / 2`
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;
// ln 2 split into a 24-bit head and the remainder
const LN2_HI: f64 = 0.693_147_122_859_954_8;
const LN2_LO: f64 = 5.769_999_047_543_285_4e-8;
/// `1 / √π`
const ONE_OVER_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// A real number stored as `sign · exp(log_magnitude)`.
///
/// Zero is the unique value with `sign == 0`, and it always carries
/// `log_magnitude == -∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSigned {
    log_magnitude: f64,
    sign: i8,
}

impl LogSigned {
    pub const ZERO: LogSigned = LogSigned {
        log_magnitude: f64::NEG_INFINITY,
        sign: 0,
    };

    pub const ONE: LogSigned = LogSigned {
        log_magnitude: 0.0,
        sign: 1,
    };

    /// Builds a value from its parts. A `-∞` magnitude or a zero sign both
    /// collapse to [`LogSigned::ZERO`].
    pub fn new(log_magnitude: f64, sign: i8) -> Self {
        if sign == 0 || log_magnitude == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogSigned {
                log_magnitude,
                sign: sign.signum(),
            }
        }
    }

    pub fn from_f64(value: f64) -> Self {
        if value == 0.0 {
            Self::ZERO
        } else {
            Self::new(libm::log(value.abs()), if value > 0.0 { 1 } else { -1 })
        }
    }

    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * libm::exp(self.log_magnitude),
        }
    }

    #[inline]
    pub fn log_magnitude(self) -> f64 {
        self.log_magnitude
    }

    #[inline]
    pub fn sign(self) -> i8 {
        self.sign
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    /// `self²`, always nonnegative.
    pub fn square(self) -> Self {
        Self::new(2.0 * self.log_magnitude, self.sign * self.sign)
    }

    /// Multiplies by `exp(log_factor)`.
    pub fn scale_log(self, log_factor: f64) -> Self {
        Self::new(self.log_magnitude + log_factor, self.sign)
    }
}

impl core::ops::Mul for LogSigned {
    type Output = LogSigned;

    fn mul(self, rhs: LogSigned) -> LogSigned {
        LogSigned::new(self.log_magnitude + rhs.log_magnitude, self.sign * rhs.sign)
    }
}

impl core::ops::Neg for LogSigned {
    type Output = LogSigned;

    fn neg(self) -> LogSigned {
        LogSigned::new(self.log_magnitude, -self.sign)
    }
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl core::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator of floats.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

const FACTORIALS: [u64; 21] = [
    1,
    1,
    2,
    6,
    24,
    120,
    720,
    5040,
    40320,
    362880,
    3628800,
    39916800,
    479001600,
    6227020800,
    87178291200,
    1307674368000,
    20922789888000,
    355687428096000,
    6402373705728000,
    121645100408832000,
    2432902008176640000,
];

/// `ln(n!)`.
///
/// Exact integer factorials up to 20 (all of them are representable as
/// doubles), the Stirling series with five correction terms above that.
pub fn log_factorial(n: u64) -> f64 {
    if n < FACTORIALS.len() as u64 {
        return libm::log(FACTORIALS[n as usize] as f64);
    }
    stirling_log_factorial(n as f64)
}

fn stirling_log_factorial(n: f64) -> f64 {
    let inv = 1.0 / n;
    let inv2 = inv * inv;
    // 1/12n - 1/360n³ + 1/1260n⁵ - 1/1680n⁷ + 1/1188n⁹
    let series =
        inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
    // ln n = e ln2 + ln m with m ∈ [1, 2). LN2_HI has few enough bits that
    // (n + 1/2) e LN2_HI is exact for n < 2²⁰, so the rounding error of ln n is not
    // amplified by the factor n + 1/2.
    let (m, e) = libm::frexp(n);
    let (m, e) = (2.0 * m, (e - 1) as f64);
    let h = n + 0.5;
    let exact_part = h * (e * LN2_HI);
    let small_part = h * (e * LN2_LO + libm::log(m));
    ((exact_part - n) + small_part) + (HALF_LN_TWO_PI + series)
}

/// Complementary error function with absolute error below `1e-15` on the
/// real line.
///
/// `|x| < 2` uses the everywhere-positive series
/// `erf x = (2/√π) e^{-x²} Σ 2ⁿ x^{2n+1} / (2n+1)!!`; larger arguments use the
/// Laplace continued fraction evaluated with the modified Lentz algorithm.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

fn erf_series(x: f64) -> f64 {
    let two_x2 = 2.0 * x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = 0.0;
    while term > 1e-17 * sum {
        k += 1.0;
        term *= two_x2 / (2.0 * k + 1.0);
        sum += term;
    }
    core::f64::consts::FRAC_2_SQRT_PI * libm::exp(-x * x) * sum
}

fn erfc_continued_fraction(x: f64) -> f64 {
    if x > 27.3 {
        // below the smallest subnormal
        return 0.0;
    }
    // √π e^{x²} erfc(x) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    const TINY: f64 = 1e-300;
    let mut f = TINY;
    let mut c = f;
    let mut d = 0.0;
    for n in 1..2000 {
        let a = if n == 1 { 1.0 } else { (n - 1) as f64 * 0.5 };
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    ONE_OVER_SQRT_PI * libm::exp(-x * x) * f
}

/// Signed sum of log-domain terms.
///
/// Terms are rescaled by the largest magnitude and added with compensated
/// summation, so the result keeps full relative precision unless the sum
/// itself cancels. An empty input yields [`LogSigned::ZERO`].
pub fn log_sum_exp(terms: &[LogSigned]) -> LogSigned {
    let max = terms
        .iter()
        .filter(|t| !t.is_zero())
        .map(|t| t.log_magnitude)
        .max_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let Some(max) = max else {
        return LogSigned::ZERO;
    };
    if max == f64::INFINITY {
        let sign: i8 = terms
            .iter()
            .filter(|t| t.log_magnitude == f64::INFINITY)
            .map(|t| t.sign)
            .sum::<i8>()
            .signum();
        return LogSigned::new(f64::INFINITY, sign);
    }
    let sum = compensated_sum(
        terms
            .iter()
            .filter(|t| !t.is_zero())
            .map(|t| f64::from(t.sign) * libm::exp(t.log_magnitude - max)),
    );
    if sum == 0.0 {
        LogSigned::ZERO
    } else {
        LogSigned::new(max + libm::log(sum.abs()), if sum > 0.0 { 1 } else { -1 })
    }
}

/// `ln(e^a + e^b)` for plain (unsigned) log values.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + libm::log1p(libm::exp(lo - hi))
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut t = libm::fmod(theta, two_pi);
    if t > PI {
        t -= two_pi;
    } else if t <= -PI {
        t += two_pi;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    // 50-digit reference values (mpmath), x = -2.5, -2.25, ..., 2.5
    const ERFC_TABLE: [(f64, f64); 21] = [
        (-2.5, 1.999_593_047_982_555_041_1),
        (-2.25, 1.998_537_283_413_318_848_3),
        (-2.0, 1.995_322_265_018_952_734_2),
        (-1.75, 1.986_671_671_219_182_443_8),
        (-1.5, 1.966_105_146_475_310_727_1),
        (-1.25, 1.922_900_128_256_458_230_1),
        (-1.0, 1.842_700_792_949_714_869_3),
        (-0.75, 1.711_155_633_653_515_131_6),
        (-0.5, 1.520_499_877_813_046_537_7),
        (-0.25, 1.276_326_390_168_236_933),
        (0.0, 1.0),
        (0.25, 0.723_673_609_831_763_067_01),
        (0.5, 0.479_500_122_186_953_462_32),
        (0.75, 0.288_844_366_346_484_868_4),
        (1.0, 0.157_299_207_050_285_130_66),
        (1.25, 0.077_099_871_743_541_769_863),
        (1.5, 0.033_894_853_524_689_272_933),
        (1.75, 0.013_328_328_780_817_556_228),
        (2.0, 0.004_677_734_981_047_265_837_9),
        (2.25, 0.001_462_716_586_681_151_697_9),
        (2.5, 0.000_406_952_017_444_958_939_56),
    ];

    #[test]
    fn erfc_reference_table() {
        for (x, expected) in ERFC_TABLE {
            let got = erfc(x);
            assert!((got - expected).abs() <= 1e-12, "erfc({x}) = {got}, want {expected}");
        }
    }

    #[test]
    fn erfc_tail_values() {
        let cases = [
            (core::f64::consts::FRAC_1_SQRT_2, 0.317_310_507_862_914_102_83),
            (3.0, 2.209_049_699_858_544_137_3e-5),
            (5.0, 1.537_459_794_428_034_850_2e-12),
            (10.0, 2.088_487_583_762_544_757e-45),
            (20.0, 5.395_865_611_607_900_928_9e-176),
        ];
        for (x, expected) in cases {
            let got = erfc(x);
            assert!(((got - expected) / expected).abs() < 1e-13, "erfc({x}) = {got}");
        }
        assert_eq!(erfc(30.0), 0.0);
        assert!((erfc(-6.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn erfc_reflection_and_monotonicity() {
        let mut prev = f64::INFINITY;
        let mut x = -6.0;
        while x <= 30.0 {
            let v = erfc(x);
            assert!(v <= prev, "not monotone at {x}");
            assert!((v + erfc(-x) - 2.0).abs() < 1e-15);
            prev = v;
            x += 0.01;
        }
        // both branches meet continuously: the step is erfc'(2) · 1e-12
        let slope = 2.0 / libm::sqrt(core::f64::consts::PI) * libm::exp(-4.0);
        assert!((erfc(2.0 - 1e-12) - erfc(2.0) - slope * 1e-12).abs() < 1e-15);
    }

    #[test]
    fn log_factorial_small_values() {
        assert_eq!(log_factorial(0), 0.0);
        assert_eq!(log_factorial(1), 0.0);
        assert!((log_factorial(10) - 15.104_412_573_075_515_295).abs() < 1e-13);
    }

    #[test]
    fn stirling_matches_exact_at_crossover() {
        for n in 15..=20u64 {
            let exact = log_factorial(n);
            let series = stirling_log_factorial(n as f64);
            assert!((exact - series).abs() < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn log_factorial_large_argument() {
        // mpmath: ln(10⁶!) = 12815518.38465816962425108
        let got = log_factorial(1_000_000);
        let expected = 12_815_518.384_658_169_624_251;
        // one ulp at this magnitude is 1.9e-9; absolute 1e-12 is not representable
        assert!(((got - expected) / expected).abs() < 1e-15);
    }

    #[test]
    fn log_factorial_recurrence() {
        for n in 1..=10_000u64 {
            let diff = log_factorial(n) - log_factorial(n - 1);
            let lf = log_factorial(n);
            // absolute 1e-12, or two ulps of ln(n!) once a single ulp
            // exceeds what 1e-12 can resolve
            let ulp = libm::exp2(libm::floor(libm::log2(lf.max(1.0))) - 52.0);
            let tol = 1e-12f64.max(2.0 * ulp);
            assert!((diff - libm::log(n as f64)).abs() <= tol, "n = {n}");
        }
    }

    #[test]
    fn log_signed_zero_invariant() {
        assert!(LogSigned::new(f64::NEG_INFINITY, 1).is_zero());
        assert!(LogSigned::new(3.0, 0).is_zero());
        assert_eq!(LogSigned::from_f64(0.0), LogSigned::ZERO);
        assert_eq!(LogSigned::ZERO.log_magnitude(), f64::NEG_INFINITY);
        assert_eq!((LogSigned::from_f64(-2.0) * LogSigned::ZERO).sign(), 0);
    }

    #[test]
    fn log_signed_round_trip() {
        for &v in &[1.0, -1.0, 3.5e-20, -7.25e18, 0.125, -42.0, 1e-25, 6e25] {
            let back = LogSigned::from_f64(v).to_f64();
            assert!(((back - v) / v).abs() < 1e-14, "{v} -> {back}");
        }
        // far from 1 the stored logarithm itself carries |ln v| ε of
        // relative uncertainty
        for &v in &[3.5e-200, -7.25e180, 1e-300, 1e300] {
            let back = LogSigned::from_f64(v).to_f64();
            let tol = 2.0 * f64::EPSILON * libm::log(libm::fabs(v)).abs();
            assert!(((back - v) / v).abs() < tol, "{v} -> {back}");
        }
    }

    #[test]
    fn log_sum_exp_examples() {
        assert_eq!(log_sum_exp(&[]), LogSigned::ZERO);
        let ln2 = libm::log(2.0);
        assert!(log_sum_exp(&[LogSigned::new(ln2, 1), LogSigned::new(ln2, -1)]).is_zero());
        let four = log_sum_exp(&[LogSigned::new(0.0, 1), LogSigned::new(libm::log(3.0), 1)]);
        assert_eq!(four.sign(), 1);
        assert!((four.log_magnitude() - libm::log(4.0)).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_far_below_underflow() {
        // three equal terms of magnitude e^-1000
        let t = LogSigned::new(-1000.0, 1);
        let s = log_sum_exp(&[t, t, -t, t]);
        assert!((s.log_magnitude() - (-1000.0 + libm::log(2.0))).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let values: Vec<f64> = (0..50).map(|i| libm::sin(i as f64) * (1.0 + i as f64)).collect();
        let direct = compensated_sum(values.iter().copied());
        let logs: Vec<LogSigned> = values.iter().map(|&v| LogSigned::from_f64(v)).collect();
        let got = log_sum_exp(&logs).to_f64();
        assert!(((got - direct) / direct).abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap_angle(2.0 * PI + 0.25) - 0.25).abs() < 1e-12);
    }
}
