//! The exact formula for α₃,μ(n) as three truncated Bessel series, and the
//! leading asymptotic expansion.
//!
//! With n_μ = n - Δ_μ and X_k = π√(6n_μ)/k the level-k terms are
//!
//! ```text
//! A₁ = (π/144)(6/n_μ)^{5/4} K_k(μ,0;n,0,0)/k · I_{5/2}(X_k)
//! A₂ = -(9π/512)(6/n_μ)^{5/4} Σ_r K_k(μ,ν;n,r,0)/k² ∫_{-1}^{1} g*_{k,r}(w) I_{5/2}(X_k√(1-w²)) dw
//! A₃ = (3π/1024)(6/n_μ)^{5/4} Σ_{r₁,r₂} K_k(μ,ν;n,r₁,r₂)/k³ ∫_{Q(w)≤1} g*_{k,r}(w) I_{5/2}(X_k√(1-Q(w))) dw
//! ```
//!
//! where ν is fixed by r (ν ≡ r in A₂, ν ≡ r₁ - r₂ in A₃).

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multipliers::{kloosterman_with, KloostermanCache, KloostermanKey};
use crate::qseries::FluxClass;
use crate::quadrature::{elliptic_region_rule, gauss_legendre_on, neumaier_sum_complex, QuadConfig, Rule1, Rule2};
use crate::special::{boundary_weight, gstar_1d, BesselWeight, KernelSum, Scaled};

/// Largest |Im|/scale accepted before a level-k term is declared non-real.
pub const REALNESS_TOL: f64 = 1e-10;

/// Constant of the advisory error estimate C·N^{-3/2}(1 + ln N)².
///
/// Calibrated at n = 5 from the N = 1 deviations (0.046 for μ = 0, 0.270 for
/// μ = 1), rounded up.
pub const ERROR_CONSTANT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RademacherConfig {
    pub flux: FluxClass,
    pub n: i64,
    #[serde(rename = "N")]
    pub big_n: u64,
    #[serde(default)]
    pub quad: QuadConfig,
}

impl RademacherConfig {
    pub fn new(flux: FluxClass, n: i64, big_n: u64) -> Self {
        RademacherConfig { flux, n, big_n, quad: QuadConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.big_n < 1 {
            return Err(Error::Config("N must be at least 1".into()));
        }
        if self.n < 0 {
            return Err(Error::Config(format!("n = {} must be nonnegative", self.n)));
        }
        self.quad.validate()
    }
}

/// Quadrature rules shared by every level k of one run.
pub struct Rules {
    line: Rule1,
    region: Rule2,
}

impl Rules {
    pub fn new(q: &QuadConfig) -> Result<Self> {
        q.validate()?;
        Ok(Rules {
            line: gauss_legendre_on(q.interval_order, -1.0, 1.0)?,
            region: elliptic_region_rule(q.radial_order, q.angular_order)?,
        })
    }
}

struct Level<'a> {
    flux: FluxClass,
    n: i64,
    k: u64,
    weight: BesselWeight,
    cache: Option<&'a KloostermanCache>,
}

impl<'a> Level<'a> {
    fn new(flux: FluxClass, n: i64, k: u64, cache: Option<&'a KloostermanCache>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain { function: "rademacher term", detail: "k must be at least 1".into() });
        }
        Ok(Level { flux, n, k, weight: BesselWeight::new(flux.n_mu_f64(n), k), cache })
    }

    fn kloosterman(&self, nu: i64, r1: i64, r2: i64) -> Result<Complex64> {
        let key = KloostermanKey::new(self.k, self.flux, nu, &self.flux.n_mu(self.n), r1, r2)?;
        kloosterman_with(self.cache, &key)
    }

    /// Bessel mantissa at radial fraction √(1 - t).
    fn bessel(&self, t: f64) -> f64 {
        self.weight.mantissa((1.0 - t).max(0.0).sqrt())
    }

    fn finish(&self, which: &'static str, value: Complex64, scale: f64) -> Result<Scaled> {
        check_real(which, self.k, value, scale)?;
        Ok(Scaled { mantissa: value.re, exponent: self.weight.exponent() })
    }
}

fn check_real(which: &str, k: u64, value: Complex64, scale: f64) -> Result<()> {
    let scale = scale.max(value.norm());
    if value.im.abs() > REALNESS_TOL * scale || !value.re.is_finite() {
        return Err(Error::Numerical(format!(
            "{which} at k = {k} is not real: {value} (scale {scale:.3e})"
        )));
    }
    Ok(())
}

/// Bound on |K_k|: at most k summands, each of modulus at most 1.
fn sum_bound(k: u64) -> f64 {
    k as f64
}

fn level_a1(lv: &Level) -> Result<Scaled> {
    let kk = lv.kloosterman(0, 0, 0)?;
    let pre = PI / 144.0 / lv.k as f64 * lv.weight.mantissa(1.0);
    lv.finish("A1", kk * pre, sum_bound(lv.k) * pre.abs())
}

fn level_a2(lv: &Level, rules: &Rules) -> Result<Scaled> {
    let k = lv.k;
    let nodes = &rules.line;
    let bessel: Vec<f64> = nodes.nodes.iter().map(|&[w]| lv.bessel(w * w)).collect();
    let mut terms = Vec::with_capacity(3 * k as usize);
    let mut scale = 0.0;
    for r in 0..3 * k as i64 {
        let kk = lv.kloosterman(r.rem_euclid(3), r, 0)?;
        let integral = nodes.integrate(|i, &[w]| gstar_1d(k, r, w) * bessel[i]);
        terms.push(kk * integral);
        scale += sum_bound(k) * integral.abs();
    }
    let pre = -9.0 * PI / 512.0 / (k * k) as f64;
    lv.finish("A2", neumaier_sum_complex(terms) * pre, scale * pre.abs())
}

fn level_a3(lv: &Level, rules: &Rules) -> Result<Scaled> {
    let k = lv.k;
    let n = 3 * k as i64;
    let mut weights = Vec::with_capacity((n * n) as usize);
    for r1 in 0..n {
        for r2 in 0..n {
            weights.push(lv.kloosterman((r1 - r2).rem_euclid(3), r1, r2)?);
        }
    }
    let sum = KernelSum::new(k, weights);
    let region = &rules.region;
    let s = 3.0 / (2.0 * SQRT_2);
    let values: Vec<Complex64> = {
        use rayon::prelude::*;
        region
            .nodes
            .par_iter()
            .zip(&region.q_values)
            .map(|(&[w1, w2], &q)| sum.eval(s * w1, s * w2) * (boundary_weight(q) * lv.bessel(q)))
            .collect()
    };
    let integral = neumaier_sum_complex(values.iter().zip(&region.weights).map(|(v, &w)| v * w));
    let scale = values.iter().zip(&region.weights).map(|(v, &w)| v.norm() * w).sum::<f64>();
    let pre = 3.0 * PI / 1024.0 / (k * k * k) as f64;
    lv.finish("A3", integral * pre, scale * pre)
}

/// Level-k terms (A₁, A₂, A₃) in scaled form sharing the exponent π√(6n_μ)/k.
pub fn level_terms(
    flux: FluxClass,
    n: i64,
    k: u64,
    rules: &Rules,
    cache: Option<&KloostermanCache>,
) -> Result<[Scaled; 3]> {
    let lv = Level::new(flux, n, k, cache)?;
    Ok([level_a1(&lv)?, level_a2(&lv, rules)?, level_a3(&lv, rules)?])
}

fn unscale(which: &str, s: Scaled) -> Result<f64> {
    let v = s.value();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(format!("{which}: mantissa {} · e^{} is out of range", s.mantissa, s.exponent)))
    }
}

pub fn term_a1_scaled(flux: FluxClass, n: i64, k: u64) -> Result<Scaled> {
    level_a1(&Level::new(flux, n, k, None)?)
}

pub fn term_a1(flux: FluxClass, n: i64, k: u64) -> Result<f64> {
    unscale("A1", term_a1_scaled(flux, n, k)?)
}

pub fn term_a2(flux: FluxClass, n: i64, k: u64, quad: &QuadConfig) -> Result<f64> {
    let rules = Rules::new(quad)?;
    unscale("A2", level_a2(&Level::new(flux, n, k, None)?, &rules)?)
}

pub fn term_a3(flux: FluxClass, n: i64, k: u64, quad: &QuadConfig) -> Result<f64> {
    let rules = Rules::new(quad)?;
    unscale("A3", level_a3(&Level::new(flux, n, k, None)?, &rules)?)
}

/// One row of a [`SeriesBreakdown`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub k: u64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a1_cum: f64,
    pub a2_cum: f64,
    pub a3_cum: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesBreakdown {
    pub mu: i8,
    pub n: i64,
    #[serde(rename = "N")]
    pub big_n: u64,
    pub rows: Vec<LevelRow>,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub total: f64,
    pub error_estimate: f64,
}

pub const TSV_HEADER: &str = "k\tA1_k\tA2_k\tA3_k\tA1_cum\tA2_cum\tA3_cum\ttotal";

impl SeriesBreakdown {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(TSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let cells = [r.a1, r.a2, r.a3, r.a1_cum, r.a2_cum, r.a3_cum, r.total].map(format_sig);
            out.push_str(&format!("{}\t{}\n", r.k, cells.join("\t")));
        }
        out
    }

    /// JSON with every real rounded to the same 15 digits as the TSV.
    pub fn to_json(&self) -> serde_json::Value {
        let round = |x: f64| round_sig(x);
        let rows: Vec<LevelRow> = self
            .rows
            .iter()
            .map(|r| LevelRow {
                k: r.k,
                a1: round(r.a1),
                a2: round(r.a2),
                a3: round(r.a3),
                a1_cum: round(r.a1_cum),
                a2_cum: round(r.a2_cum),
                a3_cum: round(r.a3_cum),
                total: round(r.total),
            })
            .collect();
        let rounded = SeriesBreakdown {
            rows,
            a1: round(self.a1),
            a2: round(self.a2),
            a3: round(self.a3),
            total: round(self.total),
            error_estimate: round(self.error_estimate),
            ..self.clone()
        };
        serde_json::to_value(rounded).expect("breakdown serializes")
    }
}

/// Significant digits used for every printed real.
pub const PRINT_DIGITS: usize = 15;

/// `x` with 15 significant digits, in positional notation when reasonable.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-5..15).contains(&mag) {
        let decimals = (PRINT_DIGITS as i32 - 1 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.prec$e}", prec = PRINT_DIGITS - 1)
    }
}

/// `x` rounded to 15 significant digits.
pub fn round_sig(x: f64) -> f64 {
    format_sig(x).parse().unwrap_or(x)
}

/// Σ_{k=1}^{N} of the three level terms.
pub fn alpha3_rademacher(cfg: &RademacherConfig) -> Result<SeriesBreakdown> {
    alpha3_rademacher_with(cfg, None)
}

pub fn alpha3_rademacher_with(cfg: &RademacherConfig, cache: Option<&KloostermanCache>) -> Result<SeriesBreakdown> {
    cfg.validate()?;
    let rules = Rules::new(&cfg.quad)?;
    let mut rows = Vec::with_capacity(cfg.big_n as usize);
    let (mut c1, mut c2, mut c3) = (0.0, 0.0, 0.0);
    for k in 1..=cfg.big_n {
        let [t1, t2, t3] = level_terms(cfg.flux, cfg.n, k, &rules, cache)?;
        let (a1, a2, a3) = (unscale("A1", t1)?, unscale("A2", t2)?, unscale("A3", t3)?);
        c1 += a1;
        c2 += a2;
        c3 += a3;
        rows.push(LevelRow { k, a1, a2, a3, a1_cum: c1, a2_cum: c2, a3_cum: c3, total: c1 + c2 + c3 });
    }
    let nf = cfg.big_n as f64;
    Ok(SeriesBreakdown {
        mu: cfg.flux.mu(),
        n: cfg.n,
        big_n: cfg.big_n,
        rows,
        a1: c1,
        a2: c2,
        a3: c3,
        total: c1 + c2 + c3,
        error_estimate: ERROR_CONSTANT * nf.powf(-1.5) * (1.0 + nf.ln()).powi(2),
    })
}

/// The three-term asymptotic expansion of α₃,μ(n), independent of μ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Asymptotic {
    /// ln of e^{π√(6n)}/(4(6n)^{3/2}).
    pub ln_prefactor: f64,
    /// 1 - 81/(8π(6n)^{1/4}) + (243√3/(16π²) - 3/π)/(6n)^{1/2}
    pub bracket: f64,
    /// prefactor · bracket; infinite once the prefactor leaves double range.
    pub value: f64,
}

pub fn alpha3_asymptotic(n: f64) -> Result<Asymptotic> {
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::Domain { function: "alpha3_asymptotic", detail: format!("n = {n} must be at least 1") });
    }
    let m = 6.0 * n;
    let ln_prefactor = PI * m.sqrt() - (4.0 * m.powf(1.5)).ln();
    let bracket = 1.0 - 81.0 / (8.0 * PI * m.powf(0.25))
        + (243.0 * 3f64.sqrt() / (16.0 * PI * PI) - 3.0 / PI) / m.sqrt();
    let value = if bracket == 0.0 { 0.0 } else { bracket.signum() * (ln_prefactor + bracket.abs().ln()).exp() };
    Ok(Asymptotic { ln_prefactor, bracket, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qseries::oracle_alpha3;
    use num_traits::ToPrimitive;

    fn run(mu: FluxClass, n: i64, big_n: u64) -> SeriesBreakdown {
        alpha3_rademacher(&RademacherConfig::new(mu, n, big_n)).unwrap()
    }

    #[test]
    fn table_one_levels() {
        let b = run(FluxClass::ZERO, 5, 3);
        let want = [
            [21840.040155894345, -32806.5410068802, 12478.454748401757],
            [3.2321717841, -4.7730767921, 1.5909559068],
            [-0.2359893209, 0.4591854637, -0.2263141102],
        ];
        for (row, w) in b.rows.iter().zip(want) {
            for (got, w) in [row.a1, row.a2, row.a3].into_iter().zip(w) {
                assert!((got - w).abs() < 1e-6 * w.abs().max(1.0), "k={}: {got} vs {w}", row.k);
            }
        }
        assert!((b.total - 1512.0008303474).abs() < 1e-6);
        assert_eq!(b.total, b.a1 + b.a2 + b.a3);
    }

    #[test]
    fn table_two_levels() {
        let b = run(FluxClass::PLUS, 5, 3);
        assert!((b.rows[0].a1 - 221918.6385849139).abs() < 1e-6);
        assert!((b.rows[0].a2 + 255562.4322136084).abs() < 1e-5);
        assert!((b.rows[0].a3 - 74525.06451550347).abs() < 1e-5);
        // K_3(1, 0; 5, 0, 0) vanishes.
        assert!(b.rows[2].a1.abs() < 1e-9);
        assert!((b.total - 40880.9985896).abs() < 1e-5);
    }

    #[test]
    fn oracle_equivalence_small_n() {
        for mu in [FluxClass::ZERO, FluxClass::PLUS] {
            for n in 0..=6 {
                let exact = oracle_alpha3(mu, n as usize).unwrap().to_f64().unwrap();
                let got = run(mu, n, 3).total;
                assert!((got - exact).abs() < 0.01, "mu={} n={n}: {got} vs {exact}", mu.mu());
            }
        }
    }

    #[test]
    fn flux_sign_symmetry() {
        for n in [0, 3] {
            let a = run(FluxClass::PLUS, n, 2);
            let b = run(FluxClass::MINUS, n, 2);
            assert!((a.total - b.total).abs() <= 1e-9 * a.total.abs().max(1.0));
            for (x, y) in a.rows.iter().zip(&b.rows) {
                assert!((x.a3 - y.a3).abs() <= 1e-9 * x.a3.abs().max(1.0));
            }
        }
    }

    #[test]
    fn refinement_improves_at_n5() {
        for (mu, exact) in [(FluxClass::ZERO, 1512.0), (FluxClass::PLUS, 40881.0)] {
            let b = run(mu, 5, 3);
            assert!((b.rows[2].total - exact).abs() < (b.rows[0].total - exact).abs());
        }
    }

    #[test]
    fn scaled_path_matches_leading_monomial() {
        let n = 1000;
        let nmu = FluxClass::ZERO.n_mu_f64(n);
        let s = term_a1_scaled(FluxClass::ZERO, n, 1).unwrap();
        let x = PI * (6.0 * nmu).sqrt();
        let ln_mono = -(4.0 * (6.0 * nmu).powf(1.5)).ln() + x;
        let dev = (s.ln_abs() - ln_mono).exp() - 1.0;
        let corr = 3.0 / x;
        assert!((dev + corr).abs() < 0.2 * corr, "dev={dev} corr={corr}");
    }

    #[test]
    fn asymptotic_values() {
        let a = alpha3_asymptotic(5.0).unwrap();
        assert!((a.bracket + 0.065).abs() < 2e-3);
        assert!((a.value + 2930.98).abs() < 0.05);
        let b: Vec<f64> = [1e3, 1e4, 1e5].iter().map(|&n| alpha3_asymptotic(n).unwrap().bracket).collect();
        assert!(b[0] < b[1] && b[1] < b[2] && b[2] < 1.0);
        assert!((b[0] - 0.6559).abs() < 1e-3);
        assert!(alpha3_asymptotic(0.5).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(RademacherConfig::new(FluxClass::ZERO, 5, 0).validate().is_err());
        assert!(RademacherConfig::new(FluxClass::ZERO, -1, 1).validate().is_err());
        assert!(term_a1(FluxClass::ZERO, 5, 0).is_err());
    }

    #[test]
    fn renderings_agree() {
        let b = run(FluxClass::ZERO, 5, 2);
        let tsv = b.to_tsv();
        let json = b.to_json();
        let last = tsv.lines().next_back().unwrap().split('\t').next_back().unwrap().parse::<f64>().unwrap();
        assert_eq!(last, json["rows"][1]["total"].as_f64().unwrap());
        assert_eq!(tsv.lines().next().unwrap(), TSV_HEADER);
        assert_eq!(format_sig(1512.000830347412), "1512.00083034741");
        assert_eq!(format_sig(-0.5), "-0.500000000000000");
    }
}
