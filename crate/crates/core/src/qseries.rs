//! Exact rational q-series.
//!
//! Everything in this module is bit-exact: coefficients are arbitrary
//! precision rationals and truncation is tracked explicitly. The only floating
//! point entry point is [`RationalQSeries::eval`], used by the numerical
//! verifiers.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// The 't Hooft flux of the U(3) sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct FluxClass(i8);

impl FluxClass {
    pub const ZERO: FluxClass = FluxClass(0);
    pub const PLUS: FluxClass = FluxClass(1);
    pub const MINUS: FluxClass = FluxClass(-1);

    pub fn new(mu: i64) -> Result<Self> {
        match mu {
            -1..=1 => Ok(FluxClass(mu as i8)),
            other => Err(Error::InvalidFlux(other)),
        }
    }

    /// Build from any representative of a residue mod 3.
    pub fn from_residue(nu: i64) -> Self {
        match nu.rem_euclid(3) {
            0 => FluxClass(0),
            1 => FluxClass(1),
            _ => FluxClass(-1),
        }
    }

    pub fn mu(self) -> i8 {
        self.0
    }

    /// Representative in {0, 1, 2}.
    pub fn residue(self) -> i64 {
        i64::from(self.0).rem_euclid(3)
    }

    /// Δ_μ: 3/8 for μ = 0, -31/24 for μ = ±1.
    pub fn delta(self) -> BigRational {
        if self.0 == 0 {
            rat(3, 8)
        } else {
            rat(-31, 24)
        }
    }

    /// n_μ = n - Δ_μ, exact.
    pub fn n_mu(self, n: i64) -> BigRational {
        int(n) - self.delta()
    }

    /// 24·n_μ, which is always an integer.
    pub fn n_mu_24(self, n: i64) -> i64 {
        if self.0 == 0 {
            24 * n - 9
        } else {
            24 * n + 31
        }
    }

    pub fn n_mu_f64(self, n: i64) -> f64 {
        self.n_mu_24(n) as f64 / 24.0
    }

    /// Largest index of the tabulated h₃,μ coefficients.
    pub fn horizon(self) -> usize {
        if self.0 == 0 {
            H30.len() - 1
        } else {
            H31.len() - 1
        }
    }
}

impl TryFrom<i64> for FluxClass {
    type Error = Error;
    fn try_from(v: i64) -> Result<Self> {
        FluxClass::new(v)
    }
}

impl From<FluxClass> for i64 {
    fn from(f: FluxClass) -> i64 {
        i64::from(f.0)
    }
}

impl fmt::Display for FluxClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A truncated series `q^offset · Σ_{n=0}^{n_max} coeffs[n] q^n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalQSeries {
    offset: BigRational,
    coeffs: Vec<BigRational>,
}

impl RationalQSeries {
    /// Panics if `coeffs` is empty: a series always carries at least its
    /// constant coefficient.
    pub fn new(offset: BigRational, coeffs: Vec<BigRational>) -> Self {
        assert!(!coeffs.is_empty(), "a q-series needs at least one coefficient");
        RationalQSeries { offset, coeffs }
    }

    pub fn offset(&self) -> &BigRational {
        &self.offset
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> Option<&BigRational> {
        self.coeffs.get(n)
    }

    /// Largest reliable index.
    pub fn n_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn truncate(&self, n_max: usize) -> Self {
        let keep = (n_max + 1).min(self.coeffs.len());
        RationalQSeries::new(self.offset.clone(), self.coeffs[..keep].to_vec())
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        RationalQSeries::new(
            self.offset.clone(),
            self.coeffs.iter().map(|x| x * c).collect(),
        )
    }

    /// Cauchy product. The result is reliable only up to the smaller of the
    /// two truncation indices.
    pub fn mul(&self, other: &Self) -> Self {
        let n_max = self.n_max().min(other.n_max());
        let coeffs = (0..=n_max)
            .map(|n| {
                (0..=n).fold(BigRational::zero(), |acc, m| {
                    acc + &self.coeffs[m] * &other.coeffs[n - m]
                })
            })
            .collect();
        RationalQSeries::new(&self.offset + &other.offset, coeffs)
    }

    /// Numerical value at `tau` (Im τ > 0) using the principal branch of
    /// q^offset = e^{2πiτ·offset}.
    pub fn eval(&self, tau: Complex64) -> Complex64 {
        let two_pi_i_tau = Complex64::new(0.0, 2.0 * std::f64::consts::PI) * tau;
        let q = two_pi_i_tau.exp();
        let mut acc = Complex64::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * q + to_f64(c);
        }
        acc * (two_pi_i_tau * to_f64(&self.offset)).exp()
    }

    /// Rough size of the first omitted term at `tau`, using the last known
    /// coefficient as a proxy for the next one.
    pub fn tail_estimate(&self, tau: Complex64) -> f64 {
        let last = to_f64(&self.coeffs[self.n_max()]).abs().max(1.0);
        let abs_q = (-2.0 * std::f64::consts::PI * tau.im).exp();
        let power = to_f64(&self.offset) + (self.n_max() + 1) as f64;
        10.0 * last * abs_q.powf(power)
    }
}

pub(crate) fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Very large numerators: fall back to a quotient of rounded parts.
        let n = r.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = r.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

#[derive(Serialize, Deserialize)]
struct SeriesRepr {
    offset: String,
    coeffs: Vec<String>,
}

impl Serialize for RationalQSeries {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SeriesRepr {
            offset: format_ratio(&self.offset),
            coeffs: self.coeffs.iter().map(format_ratio).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RationalQSeries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = SeriesRepr::deserialize(d)?;
        let offset = BigRational::from_str(&repr.offset).map_err(D::Error::custom)?;
        let coeffs = repr
            .coeffs
            .iter()
            .map(|c| BigRational::from_str(c))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(D::Error::custom)?;
        if coeffs.is_empty() {
            return Err(D::Error::custom("empty coefficient list"));
        }
        Ok(RationalQSeries::new(offset, coeffs))
    }
}

/// Always renders as `p/q`, including integers (`3/1`).
pub fn format_ratio(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Hurwitz class number H(N).
///
/// Enumerates reduced forms `ax² + bxy + cy²` with `b² - 4ac = -N`,
/// `|b| ≤ a ≤ c` and `b ≥ 0` whenever `|b| = a` or `a = c`. Forms equivalent
/// to `a(x² + y²)` count 1/2 and forms equivalent to `a(x² + xy + y²)` count 1/3.
pub fn hurwitz_class_number(n: u64) -> BigRational {
    if n == 0 {
        return rat(-1, 12);
    }
    if n % 4 == 1 || n % 4 == 2 {
        return BigRational::zero();
    }
    let n = n as i128;
    // Counted in units of 1/6 so the sum is an integer.
    let mut sixths: i128 = 0;
    let mut a: i128 = 1;
    while 3 * a * a <= n {
        let mut b = -a + 1;
        while b <= a {
            if (b * b + n) % (4 * a) == 0 {
                let c = (b * b + n) / (4 * a);
                if c >= a && !(b < 0 && c == a) {
                    sixths += if b == 0 && a == c {
                        3
                    } else if b == a && a == c {
                        2
                    } else {
                        6
                    };
                }
            }
            b += 1;
        }
        a += 1;
    }
    BigRational::new(BigInt::from(sixths), BigInt::from(6))
}

/// h_α = Σ H(4n + 3α) q^{n + 3α/4}.
pub fn h2_series(alpha: u8, n_max: usize) -> RationalQSeries {
    let alpha = u64::from(alpha % 2);
    let coeffs = (0..=n_max as u64)
        .map(|n| hurwitz_class_number(4 * n + 3 * alpha))
        .collect();
    RationalQSeries::new(rat(3 * alpha as i64, 4), coeffs)
}

/// η(τ)^e as a q-series with offset e/24.
///
/// Uses the logarithmic-derivative recurrence
/// `n·a_n = -e Σ_{j=1}^{n} σ(j) a_{n-j}`.
pub fn eta_power_series(exponent: i64, n_max: usize) -> RationalQSeries {
    let sigma: Vec<BigInt> = (0..=n_max as u64)
        .map(|j| BigInt::from(divisor_sum(j)))
        .collect();
    let mut a: Vec<BigRational> = Vec::with_capacity(n_max + 1);
    a.push(BigRational::one());
    let minus_e = BigInt::from(-exponent);
    for n in 1..=n_max {
        let mut acc = BigRational::zero();
        for j in 1..=n {
            acc += &a[n - j] * BigRational::from_integer(&sigma[j] * &minus_e);
        }
        a.push(acc / int(n as i64));
    }
    RationalQSeries::new(rat(exponent, 24), a)
}

fn divisor_sum(n: u64) -> u64 {
    if n == 0 {
        return 0;
    }
    let mut s = 0;
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            s += d;
            if d * d != n {
                s += n / d;
            }
        }
        d += 1;
    }
    s
}

/// Known leading coefficients of h₃,₀.
const H30: [(i64, i64); 11] = [
    (1, 9),
    (-1, 1),
    (3, 1),
    (17, 1),
    (41, 1),
    (78, 1),
    (120, 1),
    (193, 1),
    (240, 1),
    (359, 1),
    (414, 1),
];

/// Known leading coefficients of h₃,±₁ (offset 5/3).
const H31: [i64; 7] = [3, 15, 36, 69, 114, 165, 246];

/// The tabulated h₃,μ, truncated at `n_max`.
pub fn h3_series(mu: FluxClass, n_max: usize) -> Result<RationalQSeries> {
    let horizon = mu.horizon();
    if n_max > horizon {
        return Err(Error::HorizonExceeded { mu: mu.mu(), requested: n_max, horizon });
    }
    Ok(if mu.mu() == 0 {
        RationalQSeries::new(
            BigRational::zero(),
            H30[..=n_max].iter().map(|&(p, q)| rat(p, q)).collect(),
        )
    } else {
        RationalQSeries::new(rat(5, 3), H31[..=n_max].iter().map(|&c| int(c)).collect())
    })
}

/// f₃,μ = h₃,μ / η⁹ up to `n_max`; the offset is -Δ_μ.
pub fn f3_series(mu: FluxClass, n_max: usize) -> Result<RationalQSeries> {
    Ok(h3_series(mu, n_max)?.mul(&eta_power_series(-9, n_max)))
}

/// Exact α₃,μ(n), the coefficient of q^{n - Δ_μ} in f₃,μ.
pub fn oracle_alpha3(mu: FluxClass, n: usize) -> Result<BigRational> {
    let f = f3_series(mu, n)?;
    // The product offset must reproduce q^{-Δ_μ}.
    debug_assert_eq!(f.offset(), &(-mu.delta()));
    Ok(f.coeffs()[n].clone())
}

/// Decimal rendering with `digits` places, for display next to `p/q`.
pub fn ratio_decimal(r: &BigRational, digits: usize) -> String {
    let neg = r.is_negative();
    let abs = r.abs();
    let scale = num_traits::pow(BigInt::from(10), digits);
    let scaled = (abs * BigRational::from_integer(scale.clone())).round().to_integer();
    let int_part = &scaled / &scale;
    let frac_part = &scaled % &scale;
    let sign = if neg && !scaled.is_zero() { "-" } else { "" };
    if digits == 0 {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{:0>width$}", frac_part.to_string(), width = digits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        rat(n, d)
    }

    #[test]
    fn hurwitz_small_values() {
        assert_eq!(hurwitz_class_number(0), r(-1, 12));
        assert_eq!(hurwitz_class_number(1), r(0, 1));
        assert_eq!(hurwitz_class_number(2), r(0, 1));
        assert_eq!(hurwitz_class_number(3), r(1, 3));
        assert_eq!(hurwitz_class_number(4), r(1, 2));
        assert_eq!(hurwitz_class_number(12), r(4, 3));
        assert_eq!(hurwitz_class_number(23), r(3, 1));
    }

    #[test]
    fn h2_leading_terms() {
        let h0 = h2_series(0, 4);
        assert_eq!(h0.offset(), &r(0, 1));
        assert_eq!(h0.coeffs(), &[r(-1, 12), r(1, 2), r(1, 1), r(4, 3), r(3, 2)]);
        let h1 = h2_series(1, 2);
        assert_eq!(h1.offset(), &r(3, 4));
        assert_eq!(h1.coeffs(), &[r(1, 3), r(1, 1), r(1, 1)]);
        assert_eq!(h2_series(0, 0).coeffs(), &[r(-1, 12)]);
    }

    #[test]
    fn eta_powers() {
        let e = eta_power_series(-9, 5);
        let expect: Vec<_> = [1, 9, 54, 255, 1035, 3753].iter().map(|&c| int(c)).collect();
        assert_eq!(e.coeffs(), expect.as_slice());
        assert_eq!(e.offset(), &r(-3, 8));
        let e1 = eta_power_series(1, 2);
        assert_eq!(e1.coeffs(), &[int(1), int(-1), int(-1)]);
        assert_eq!(e1.offset(), &r(1, 24));
    }

    #[test]
    fn h3_tables_and_horizon() {
        let s = h3_series(FluxClass::ZERO, 2).unwrap();
        assert_eq!(s.coeffs(), &[r(1, 9), int(-1), int(3)]);
        let s = h3_series(FluxClass::PLUS, 0).unwrap();
        assert_eq!(s.offset(), &r(5, 3));
        assert_eq!(s.coeffs(), &[int(3)]);
        for n in 0..=6 {
            assert_eq!(
                h3_series(FluxClass::PLUS, n).unwrap(),
                h3_series(FluxClass::MINUS, n).unwrap()
            );
        }
        assert!(matches!(
            h3_series(FluxClass::ZERO, 30),
            Err(Error::HorizonExceeded { horizon: 10, .. })
        ));
        assert!(matches!(
            h3_series(FluxClass::PLUS, 7),
            Err(Error::HorizonExceeded { horizon: 6, .. })
        ));
    }

    #[test]
    fn oracle_values() {
        assert_eq!(oracle_alpha3(FluxClass::ZERO, 5).unwrap(), int(1512));
        assert_eq!(oracle_alpha3(FluxClass::PLUS, 5).unwrap(), int(40881));
        assert_eq!(oracle_alpha3(FluxClass::ZERO, 0).unwrap(), r(1, 9));
        assert_eq!(oracle_alpha3(FluxClass::ZERO, 1).unwrap(), int(0));
        assert_eq!(oracle_alpha3(FluxClass::ZERO, 2).unwrap(), int(0));
        assert!(oracle_alpha3(FluxClass::MINUS, 7).is_err());
    }

    #[test]
    fn flux_bookkeeping() {
        assert_eq!(FluxClass::ZERO.delta(), r(3, 8));
        assert_eq!(FluxClass::MINUS.delta(), r(-31, 24));
        assert_eq!(FluxClass::ZERO.n_mu_24(5), 111);
        assert_eq!(
            FluxClass::PLUS.n_mu(5) * int(24),
            int(FluxClass::PLUS.n_mu_24(5))
        );
        assert!(FluxClass::new(2).is_err());
        assert_eq!(FluxClass::from_residue(2), FluxClass::MINUS);
    }

    #[test]
    fn json_shape() {
        let s = h2_series(1, 1);
        let j = serde_json::to_value(&s).unwrap();
        assert_eq!(j["offset"], "3/4");
        assert_eq!(j["coeffs"][0], "1/3");
        let back: RationalQSeries = serde_json::from_value(j).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(ratio_decimal(&r(55, 3), 4), "18.3333");
        assert_eq!(ratio_decimal(&r(-1, 12), 3), "-0.083");
        assert_eq!(ratio_decimal(&int(1512), 0), "1512");
    }

    #[test]
    fn eval_matches_direct_sum() {
        let s = eta_power_series(1, 60);
        let tau = Complex64::new(0.1, 0.9);
        let q = (Complex64::new(0.0, 2.0 * std::f64::consts::PI) * tau).exp();
        let mut prod = Complex64::new(1.0, 0.0);
        for n in 1..200 {
            prod *= Complex64::new(1.0, 0.0) - q.powu(n);
        }
        let direct = (Complex64::new(0.0, 2.0 * std::f64::consts::PI / 24.0) * tau).exp() * prod;
        assert!((s.eval(tau) - direct).norm() < 1e-14);
    }
}
