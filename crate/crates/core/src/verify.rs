//! Verification suites producing one [`Record`] per checked identity.
//!
//! All random parameters come from fixed ChaCha8 seeds, so a report is
//! reproducible bit for bit.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::eichler::{
    e1_direct, e1_mordell, e1_principal_discrepancy, e2_direct, e2_mordell, e2_principal_discrepancy,
    trans1_sides, trans2_sides, trans3_s_sides, trans3_t_sides, verify_mock_transformation, EichlerPoint,
};
use crate::error::{Error, Result};
use crate::multipliers::{hprime, kloosterman_summand, psi2, psi3, KloostermanKey, UnimodularMatrix};
use crate::qseries::FluxClass;
use crate::quadrature::QuadConfig;

pub const MULTIPLIER_TOL: f64 = 1e-12;
pub const THETA_TOL: f64 = 1e-10;
pub const COMPLETION_TOL: f64 = 1e-8;
pub const MORDELL1_TOL: f64 = 1e-8;
pub const MORDELL2_TOL: f64 = 1e-6;
pub const MOCK_TOL: f64 = 1e-6;
/// Largest allowed spread max C / min C of the fitted principal-part constants.
pub const PRINCIPAL_SPREAD: f64 = 2.0;
/// Without the Eichler terms the mock transformation must fail by at least this much.
pub const MOCK_GUARD: f64 = 1e-3;

pub const MATRIX_SAMPLES: usize = 50;
pub const TAU_SAMPLES: usize = 5;
pub const PRINCIPAL_SAMPLES: usize = 10;
pub const PRINCIPAL_LEVELS: u64 = 20;

const SEED_MATRICES: u64 = 0x6d75;
const SEED_TAU: u64 = 0x7461;
const SEED_PRINCIPAL: u64 = 0x7072;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Multipliers,
    Theta,
    Mordell1,
    Mordell2,
    Principal,
    MockTransform,
    All,
}

impl Suite {
    pub const EACH: [Suite; 6] =
        [Suite::Multipliers, Suite::Theta, Suite::Mordell1, Suite::Mordell2, Suite::Principal, Suite::MockTransform];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Multipliers => "multipliers",
            Suite::Theta => "theta",
            Suite::Mordell1 => "mordell1",
            Suite::Mordell2 => "mordell2",
            Suite::Principal => "principal",
            Suite::MockTransform => "mock-transform",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub identity: String,
    pub parameters: Value,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Record {
    fn new(identity: &str, parameters: Value, lhs: Complex64, rhs: Complex64, tolerance: f64) -> Self {
        let residual = (lhs - rhs).norm();
        Record::with_residual(identity, parameters, lhs, rhs, residual, tolerance)
    }

    fn with_residual(identity: &str, parameters: Value, lhs: Complex64, rhs: Complex64, residual: f64, tolerance: f64) -> Self {
        Record {
            identity: identity.to_string(),
            parameters,
            lhs,
            rhs,
            residual,
            tolerance,
            pass: residual.is_finite() && residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: Suite,
    pub records: Vec<Record>,
    pub pass: bool,
}

impl Report {
    fn new(suite: Suite, records: Vec<Record>) -> Self {
        let pass = !records.is_empty() && records.iter().all(|r| r.pass);
        Report { suite, records, pass }
    }

    /// Distinct identities with at least one failing record, in order of appearance.
    pub fn failing_identities(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in self.records.iter().filter(|r| !r.pass) {
            if !out.contains(&r.identity.as_str()) {
                out.push(&r.identity);
            }
        }
        out
    }

    pub fn max_residual(&self, identity: &str) -> Option<f64> {
        self.records.iter().filter(|r| r.identity == identity).map(|r| r.residual).reduce(f64::max)
    }
}

pub fn run_suite(suite: Suite, cfg: &QuadConfig) -> Result<Report> {
    cfg.validate()?;
    let records = match suite {
        Suite::Multipliers => multipliers()?,
        Suite::Theta => theta(cfg)?,
        Suite::Mordell1 => mordell1(cfg)?,
        Suite::Mordell2 => mordell2(cfg)?,
        Suite::Principal => principal(cfg)?,
        Suite::MockTransform => mock_transform(cfg)?,
        Suite::All => {
            let mut all = Vec::new();
            for s in Suite::EACH {
                all.extend(run_suite(s, cfg)?.records);
            }
            all
        }
    };
    Ok(Report::new(suite, records))
}

/// A random element of SL₂(ℤ) with 1 ≤ |c| ≤ 9 (c > 0 unless `allow_negative_c`).
pub fn random_matrix<R: Rng>(rng: &mut R, allow_negative_c: bool) -> UnimodularMatrix {
    loop {
        let c: i64 = if allow_negative_c { rng.gen_range(-9..=9) } else { rng.gen_range(1..=9) };
        let d: i64 = rng.gen_range(-15..=15);
        if c == 0 || c.gcd(&d) != 1 {
            continue;
        }
        let g = d.extended_gcd(&c);
        let a = g.x * g.gcd + c.abs() * rng.gen_range(-2..=2);
        let b = (a * d - 1) / c;
        if let Ok(m) = UnimodularMatrix::new(a, b, c, d) {
            return m;
        }
    }
}

fn matrix_json(m: &UnimodularMatrix) -> Value {
    json!([m.a, m.b, m.c, m.d])
}

fn c64_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

/// The entry of ψψ† farthest from the identity.
fn unitarity_record<const D: usize>(identity: &str, m: &UnimodularMatrix, psi: impl Fn(i64, i64) -> Complex64) -> Record {
    let mut worst = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), -1.0);
    for i in 0..D {
        for j in 0..D {
            let p: Complex64 = (0..D).map(|l| psi(i as i64, l as i64) * psi(j as i64, l as i64).conj()).sum();
            let e = Complex64::new(f64::from(u8::from(i == j)), 0.0);
            if (p - e).norm() > worst.2 {
                worst = (p, e, (p - e).norm());
            }
        }
    }
    Record::new(identity, json!({ "matrix": matrix_json(m) }), worst.0, worst.1, MULTIPLIER_TOL)
}

/// The entry of ψ(M♯) vs conj ψ(M) with the largest difference.
fn conjugation_record<const D: usize>(identity: &str, m: &UnimodularMatrix, psi: impl Fn(&UnimodularMatrix, i64, i64) -> Complex64) -> Record {
    let sharp = m.sharp();
    let mut worst = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), -1.0);
    for i in 0..D as i64 {
        for j in 0..D as i64 {
            let (a, b) = (psi(&sharp, i, j), psi(m, i, j).conj());
            if (a - b).norm() > worst.2 {
                worst = (a, b, (a - b).norm());
            }
        }
    }
    Record::new(identity, json!({ "matrix": matrix_json(m) }), worst.0, worst.1, MULTIPLIER_TOL)
}

fn multipliers() -> Result<Vec<Record>> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED_MATRICES);
    let mut out = Vec::new();
    for _ in 0..MATRIX_SAMPLES {
        let m = random_matrix(&mut rng, true);
        out.push(unitarity_record::<2>("psi2.unitarity", &m, |a, b| psi2(&m, a, b)));
        out.push(unitarity_record::<3>("psi3.unitarity", &m, |a, b| psi3(&m, a, b)));
        out.push(conjugation_record::<2>("psi2.sharp-conjugation", &m, psi2));
        out.push(conjugation_record::<3>("psi3.sharp-conjugation", &m, psi3));
    }
    for _ in 0..MATRIX_SAMPLES {
        let k: i64 = rng.gen_range(2..=12);
        let h = loop {
            let h = rng.gen_range(0..k);
            if h.gcd(&k) == 1 {
                break h;
            }
        };
        let (mu, nu) = (rng.gen_range(0..3), rng.gen_range(0..3));
        let n: i64 = rng.gen_range(0..8);
        let r2: i64 = rng.gen_range(-10..10);
        // Only classes with r₁ ≡ r₂ + ν (mod 3) occur in the expansion.
        let r1 = r2 + nu + 3 * rng.gen_range(-3..3);
        let n24 = FluxClass::from_residue(mu).n_mu_24(n);
        let key = KloostermanKey::from_parts(k as u64, mu, nu, n24, r1, r2)?;
        let hp = hprime(h, k);
        let params = json!({ "k": k, "h": h, "mu": mu, "nu": nu, "n": n, "r1": r1, "r2": r2 });
        let base = kloosterman_summand(&key, h, hp)?;
        let shifted = kloosterman_summand(&key, h, hp + k)?;
        out.push(Record::new("kloosterman.hprime-shift", params.clone(), shifted, base, MULTIPLIER_TOL));
        let s = 3 * k;
        let mut k1 = key;
        k1.r1 += s;
        let mut k2 = key;
        k2.r2 += s;
        out.push(Record::new("kloosterman.r1-shift", params.clone(), kloosterman_summand(&k1, h, hp)?, base, MULTIPLIER_TOL));
        out.push(Record::new("kloosterman.r2-shift", params, kloosterman_summand(&k2, h, hp)?, base, MULTIPLIER_TOL));
    }
    Ok(out)
}

fn theta(cfg: &QuadConfig) -> Result<Vec<Record>> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED_TAU);
    let taus: Vec<Complex64> =
        (0..TAU_SAMPLES).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(0.6..2.0))).collect();
    let mats = [("S", UnimodularMatrix::S), ("T", UnimodularMatrix::T)];
    let mut out = Vec::new();
    for &tau in &taus {
        for (name, m) in &mats {
            for alpha in 0..2 {
                let (l, r) = trans1_sides(m, alpha, tau)?;
                let p = json!({ "M": name, "alpha": alpha, "tau": c64_json(tau) });
                out.push(Record::new("trans1", p, l, r, THETA_TOL));
                for mu in 0..3 {
                    let (l, r) = trans2_sides(m, mu, alpha, tau)?;
                    let p = json!({ "M": name, "mu": mu, "alpha": alpha, "tau": c64_json(tau) });
                    out.push(Record::new("trans2", p, l, r, THETA_TOL));
                }
            }
        }
    }
    let n_max = 40;
    let completions: Vec<Result<Record>> = [(0u8, true), (1, true), (0, false), (1, false)]
        .into_par_iter()
        .map(|(alpha, at_s)| {
            let (tau, (l, r), id) = if at_s {
                let tau = Complex64::new(0.0, 1.0);
                (tau, trans3_s_sides(alpha, tau, n_max, cfg)?, "trans3.S")
            } else {
                let tau = Complex64::new(1.0, 4.0) / 3.0;
                (tau, trans3_t_sides(alpha, tau, n_max, cfg)?, "trans3.T")
            };
            let p = json!({ "alpha": alpha, "tau": c64_json(tau), "n_max": n_max });
            Ok(Record::new(id, p, l, r, COMPLETION_TOL))
        })
        .collect();
    for r in completions {
        out.push(r?);
    }
    Ok(out)
}

fn point_json(pt: &EichlerPoint) -> Value {
    json!({ "hprime": pt.hprime, "k": pt.k, "z": c64_json(pt.z) })
}

/// Grid of 9 points: k ∈ {1, 2, 3} and three values of z, each with several j.
pub fn mordell1_grid() -> Vec<(i64, i64, u64, Complex64)> {
    let zs = [Complex64::new(0.6, 0.0), Complex64::new(1.0, 0.0), Complex64::new(1.3, 0.4)];
    let mut out = Vec::new();
    for (i, k) in [1u64, 2, 3].into_iter().enumerate() {
        for (l, &z) in zs.iter().enumerate() {
            let hp = (i + l) as i64 % k as i64;
            for j in [0i64, 1, 2, 3] {
                out.push((j, hp, k, z));
            }
        }
    }
    out
}

fn mordell1(cfg: &QuadConfig) -> Result<Vec<Record>> {
    mordell1_grid()
        .into_par_iter()
        .map(|(j, hp, k, z)| {
            let pt = EichlerPoint::new(hp, k, z)?;
            let (d, m) = (e1_direct(j, &pt, cfg)?, e1_mordell(j, &pt, cfg)?);
            let mut p = point_json(&pt);
            p["j"] = json!(j);
            Ok(Record::new("E1.direct=mordell", p, d, m, MORDELL1_TOL))
        })
        .collect()
}

pub fn mordell2_grid() -> Vec<(i64, i64, u64, Complex64)> {
    vec![
        (0, 0, 1, Complex64::new(1.0, 0.0)),
        (1, 1, 2, Complex64::new(0.7, 0.0)),
        (2, 0, 1, Complex64::new(1.0, 0.0)),
        (1, 2, 3, Complex64::new(0.9, 0.2)),
    ]
}

fn mordell2(cfg: &QuadConfig) -> Result<Vec<Record>> {
    // The direct form parallelizes internally.
    mordell2_grid()
        .into_iter()
        .map(|(nu, hp, k, z)| {
            let pt = EichlerPoint::new(hp, k, z)?;
            let (d, m) = (e2_direct(nu, &pt, cfg)?, e2_mordell(nu, &pt, cfg)?);
            let mut p = point_json(&pt);
            p["nu"] = json!(nu);
            Ok(Record::new("E2.direct=mordell", p, d, m, MORDELL2_TOL))
        })
        .collect()
}

/// One (h′, z) sample on the path Re(1/z) = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrincipalSample {
    pub hprime: i64,
    pub t: f64,
}

impl PrincipalSample {
    pub fn z(&self) -> Complex64 {
        Complex64::new(1.0, self.t).inv()
    }
}

pub fn principal_samples() -> Vec<PrincipalSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED_PRINCIPAL);
    (0..PRINCIPAL_SAMPLES)
        .map(|_| PrincipalSample { hprime: rng.gen_range(0..50), t: rng.gen_range(-1.0..=1.0) })
        .collect()
}

/// Fitted constants for one sample: max_k D(k)/(1 + ln k) for E₁ and
/// max_k D(k)/(1 + ln k)² for E₂, each D maximized over the classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipalFit {
    pub sample: PrincipalSample,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
}

pub fn principal_fit(sample: PrincipalSample, levels: u64, cfg: &QuadConfig) -> Result<PrincipalFit> {
    let z = sample.z();
    let per_k: Vec<Result<(f64, f64)>> = (1..=levels)
        .into_par_iter()
        .map(|k| {
            let pt = EichlerPoint::new(sample.hprime.rem_euclid(k as i64), k, z)?;
            pt.check_rademacher_path()?;
            let mut d1 = 0f64;
            for j in 0..6 {
                d1 = d1.max(e1_principal_discrepancy(j, &pt, cfg)?);
            }
            let mut d2 = 0f64;
            for nu in 0..3 {
                d2 = d2.max(e2_principal_discrepancy(nu, &pt, cfg)?);
            }
            Ok((d1, d2))
        })
        .collect();
    let mut d1 = Vec::with_capacity(levels as usize);
    let mut d2 = Vec::with_capacity(levels as usize);
    for r in per_k {
        let (a, b) = r?;
        d1.push(a);
        d2.push(b);
    }
    let ln1 = |k: usize| 1.0 + ((k + 1) as f64).ln();
    let c1 = d1.iter().enumerate().map(|(i, d)| d / ln1(i)).fold(0.0, f64::max);
    let c2 = d2.iter().enumerate().map(|(i, d)| d / ln1(i).powi(2)).fold(0.0, f64::max);
    Ok(PrincipalFit { sample, d1, d2, c1, c2 })
}

fn spread_record(identity: &str, fits: &[PrincipalFit], c: impl Fn(&PrincipalFit) -> f64) -> Record {
    let cs: Vec<f64> = fits.iter().map(&c).collect();
    let max = cs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = cs.iter().copied().fold(f64::INFINITY, f64::min);
    let params = json!({
        "levels": PRINCIPAL_LEVELS,
        "samples": fits.iter().map(|f| json!({ "hprime": f.sample.hprime, "t": f.sample.t, "C": c(f) })).collect::<Vec<_>>(),
    });
    Record::with_residual(identity, params, Complex64::new(max, 0.0), Complex64::new(min, 0.0), max / min, PRINCIPAL_SPREAD)
}

fn principal(cfg: &QuadConfig) -> Result<Vec<Record>> {
    let fits = principal_samples()
        .into_iter()
        .map(|s| principal_fit(s, PRINCIPAL_LEVELS, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![spread_record("E1.principal-spread", &fits, |f| f.c1), spread_record("E2.principal-spread", &fits, |f| f.c2)])
}

fn mock_transform(cfg: &QuadConfig) -> Result<Vec<Record>> {
    let tau = Complex64::new(0.0, 1.0);
    let mut out = Vec::new();
    for mu in [FluxClass::ZERO, FluxClass::PLUS] {
        let r = verify_mock_transformation(mu, &UnimodularMatrix::S, tau, 30, cfg)?;
        let p = json!({ "mu": mu.mu(), "M": "S", "tau": c64_json(tau) });
        out.push(Record::new("mock-transformation", p.clone(), r.lhs, r.rhs, MOCK_TOL));
        // Passes when the holomorphic part alone does not satisfy the law.
        let gap = r.residual_without_mock();
        out.push(Record::with_residual(
            "mock-transformation.nonvacuous",
            p,
            r.lhs,
            r.rhs_holomorphic,
            MOCK_GUARD / gap,
            1.0,
        ));
    }
    Ok(out)
}
