//! Theta functions, the one- and two-dimensional theta integrals E₁ and E₂
//! in direct and Mordell form, their principal parts, the completion ĥ_α and
//! numerical checks of the transformation laws.
//!
//! Points are written τ = h′/k + iz with lower limit ϱ = -h′/k. The direct
//! evaluators integrate along w = it - h′/k; the Mordell evaluators integrate
//! the kernels of [`crate::special`] against Gaussians.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multipliers::{chi, psi2, psi3, zeta, UnimodularMatrix};
use crate::quadrature::{
    elliptic_fibered_rule, gauss_legendre_on, gaussian_half_width, neumaier_sum_complex,
    square_fibered_rule, truncated_line_rule, FiberedRule, QuadConfig,
};
use crate::qseries::{eta_power_series, f3_series, h2_series, FluxClass};
use crate::special::{KernelSum, Phase};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// -ln of the relative size at which theta tails are dropped.
const TAIL_LOG: f64 = 40.0;

/// Index of ϑ_ℓ(scale·τ) with ℓ = num/den taken mod 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ThetaIndex {
    num: i64,
    den: i64,
    scale: u8,
}

impl ThetaIndex {
    pub fn new(num: i64, den: i64, scale: u8) -> Result<Self> {
        if den <= 0 {
            return Err(Error::Domain { function: "ThetaIndex::new", detail: format!("denominator {den} must be positive") });
        }
        if scale != 1 && scale != 3 {
            return Err(Error::Domain { function: "ThetaIndex::new", detail: format!("scale {scale} must be 1 or 3") });
        }
        Ok(ThetaIndex { num: num.rem_euclid(den), den, scale })
    }

    /// ϑ_{α/2}(τ).
    pub fn half(alpha: i64) -> Self {
        ThetaIndex { num: alpha.rem_euclid(2), den: 2, scale: 1 }
    }

    /// ϑ_{ℓ/6}(3τ).
    pub fn sixth(ell: i64) -> Self {
        ThetaIndex { num: ell.rem_euclid(6), den: 6, scale: 3 }
    }

    /// ℓ as (numerator, denominator) with 0 ≤ numerator < denominator.
    pub fn ell(&self) -> (i64, i64) {
        (self.num, self.den)
    }

    pub fn scale(&self) -> u8 {
        self.scale
    }

    /// The same function with index -ℓ.
    pub fn negated(&self) -> Self {
        ThetaIndex { num: (-self.num).rem_euclid(self.den), ..*self }
    }
}

/// ϑ_ℓ(scale·τ) = Σ_{n∈ℓ+ℤ} e^{2πi·scale·τ·n²}.
pub fn theta(idx: &ThetaIndex, tau: Complex64) -> Result<Complex64> {
    if !(tau.im > 0.0) {
        return Err(Error::Domain { function: "theta", detail: format!("Im(tau) = {} must be positive", tau.im) });
    }
    let den = idx.den as f64;
    let s = f64::from(idx.scale);
    // e^{-π·Im τ·scale·N_c²} < 1e-16 with N_c measured in units of n.
    let n_cut = (37.0 / (PI * s * tau.im)).sqrt() + 1.0;
    let m_lo = ((-n_cut * den - idx.num as f64) / den).floor() as i64;
    let m_hi = ((n_cut * den - idx.num as f64) / den).ceil() as i64;
    let base = Complex64::new(0.0, 2.0 * PI * s) * tau / (den * den);
    Ok(neumaier_sum_complex((m_lo..=m_hi).map(|m| {
        let n = (idx.num + idx.den * m) as f64;
        (base * (n * n)).exp()
    })))
}

/// A point τ = h′/k + iz together with the principal-part cutoff b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EichlerPoint {
    pub hprime: i64,
    pub k: u64,
    pub z: Complex64,
    pub b: f64,
}

impl EichlerPoint {
    /// Errors unless k ≥ 1 and Re z > 0; b defaults to 3/8.
    pub fn new(hprime: i64, k: u64, z: Complex64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain { function: "EichlerPoint::new", detail: "k must be positive".into() });
        }
        if !(z.re > 0.0) || !z.im.is_finite() {
            return Err(Error::Domain { function: "EichlerPoint::new", detail: format!("Re(z) must be positive, got z = {z}") });
        }
        Ok(EichlerPoint { hprime, k, z, b: 0.375 })
    }

    pub fn with_b(mut self, b: f64) -> Result<Self> {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::Domain { function: "EichlerPoint::with_b", detail: format!("b = {b} must be nonnegative") });
        }
        self.b = b;
        Ok(self)
    }

    /// Checks Re(1/z) ≥ 1, the condition on the Rademacher circle.
    pub fn check_rademacher_path(&self) -> Result<()> {
        let re = self.z.inv().re;
        if re < 1.0 - 1e-12 {
            return Err(Error::Domain { function: "principal part", detail: format!("Re(1/z) = {re} < 1") });
        }
        Ok(())
    }

    /// The point h′/k + i/z at which principal parts are compared.
    pub fn inverted(&self) -> Self {
        EichlerPoint { z: self.z.inv(), ..*self }
    }

    fn kf(&self) -> f64 {
        self.k as f64
    }
}

/// A theta function restricted to a vertical path, with its n = 0 term removed.
///
/// Evaluates Σ_{N ≡ num (den), N ≠ 0} e^{-rate·(im0 + t)·N²}·phase(N).
struct PathTheta {
    num: i64,
    den: i64,
    rate: f64,
    im0: f64,
    phases: PathPhases,
}

enum PathPhases {
    /// ζ_m^{-scale·h′·N²} tabulated by N mod m, m = k·den².
    Table(Vec<Complex64>),
    /// e^{2πi·scale·x·N²/den²} for a real part x.
    Real(f64),
}

impl PathTheta {
    /// ϑ_{num/den}(scale·(it - h′/k)).
    fn rational(idx: &ThetaIndex, hprime: i64, k: u64) -> Self {
        let m = k as i128 * (idx.den as i128).pow(2);
        let s = i128::from(idx.scale);
        let hp = hprime as i128;
        let table = (0..m).map(|n| zeta(-(s * hp % m) * (n * n % m), m)).collect();
        PathTheta {
            num: idx.num,
            den: idx.den,
            rate: 2.0 * PI * f64::from(idx.scale) / (idx.den * idx.den) as f64,
            im0: 0.0,
            phases: PathPhases::Table(table),
        }
    }

    /// ϑ_ℓ(scale·(x + i(y + t))).
    fn real(idx: &ThetaIndex, x: f64, y: f64) -> Self {
        let den2 = (idx.den * idx.den) as f64;
        PathTheta {
            num: idx.num,
            den: idx.den,
            rate: 2.0 * PI * f64::from(idx.scale) / den2,
            im0: y,
            phases: PathPhases::Real(2.0 * PI * f64::from(idx.scale) * x / den2),
        }
    }

    fn has_constant(&self) -> bool {
        self.num == 0
    }

    /// Smallest nonzero N² in the progression.
    fn min_n2(&self) -> f64 {
        let n = if self.num == 0 { self.den } else { self.num.min(self.den - self.num) };
        (n * n) as f64
    }

    /// Path length beyond which every non-constant term is below e^{-40}.
    fn cutoff(&self) -> f64 {
        TAIL_LOG / (self.rate * self.min_n2())
    }

    fn phase(&self, n: i64) -> Complex64 {
        match &self.phases {
            PathPhases::Table(t) => t[n.rem_euclid(t.len() as i64) as usize],
            PathPhases::Real(c) => Complex64::from_polar(1.0, c * (n * n) as f64),
        }
    }

    fn eval_nc(&self, t: f64) -> Complex64 {
        let y = self.im0 + t;
        let n_max = (TAIL_LOG / (self.rate * y)).sqrt() + self.den as f64;
        let den = self.den as f64;
        let m_lo = ((-n_max - self.num as f64) / den).floor() as i64;
        let m_hi = ((n_max - self.num as f64) / den).ceil() as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for m in m_lo..=m_hi {
            let n = self.num + self.den * m;
            if n == 0 {
                continue;
            }
            let nf = n as f64;
            acc += self.phase(n) * (-self.rate * y * nf * nf).exp();
        }
        acc
    }
}

/// (w + z)^{-3/2}, principal branch; Re(w + z) > 0 on every path used here.
fn inv_pow32(base: Complex64) -> Complex64 {
    debug_assert!(base.re > 0.0, "branch cut crossed at {base}");
    base.powf(-1.5)
}

/// E₁,j(τ) by direct integration of ϑ_{j/6}(3(it - h′/k))/(t + z)^{3/2} over t > 0.
pub fn e1_direct(j: i64, pt: &EichlerPoint, cfg: &QuadConfig) -> Result<Complex64> {
    let th = PathTheta::rational(&ThetaIndex::sixth(j), pt.hprime, pt.k);
    let u_max = th.cutoff().sqrt();
    let rule = gauss_legendre_on(cfg.mordell_order, 0.0, u_max)?;
    let z = pt.z;
    let mut s = rule.integrate_complex(|_, &[u]| {
        let t = u * u;
        2.0 * u * th.eval_nc(t) * inv_pow32(t + z)
    });
    if th.has_constant() {
        s += 2.0 / z.sqrt();
    }
    Ok(I * s)
}

/// E₁,j(τ) as a Mordell integral of w·g_{r/6k}(w/2k) against e^{-πzw²/6}.
pub fn e1_mordell(j: i64, pt: &EichlerPoint, cfg: &QuadConfig) -> Result<Complex64> {
    let half_width = gaussian_half_width(PI * pt.z.re / 6.0, cfg.tail_eps);
    let rule = truncated_line_rule(half_width, cfg.mordell_order)?;
    Ok(e1_sum(j, pt, pt.z, &rule.nodes.iter().map(|x| x[0]).collect::<Vec<_>>(), &rule.weights))
}

/// (πi/(3√6k)) Σ_r ζ_{12k}^{-h′r²} Σ_i wᵢ·xᵢg_{r/6k}(xᵢ/2k)·e^{-πζxᵢ²/6}.
fn e1_sum(j: i64, pt: &EichlerPoint, gauss: Complex64, nodes: &[f64], weights: &[f64]) -> Complex64 {
    let k = pt.k as i64;
    let kf = pt.kf();
    let damp: Vec<Complex64> =
        nodes.iter().zip(weights).map(|(&x, &w)| w * (-PI * gauss * x * x / 6.0).exp()).collect();
    let classes: Vec<Complex64> = (0..6 * k)
        .filter(|r| (r - j).rem_euclid(6) == 0)
        .map(|r| {
            let p = Phase::new(r, 6 * k);
            let ph = zeta(-(i128::from(pt.hprime) * i128::from(r * r)), 12 * i128::from(k));
            let sum = neumaier_sum_complex(nodes.iter().zip(&damp).map(|(&x, &d)| d * (2.0 * kf * p.xg(x / (2.0 * kf)))));
            ph * sum
        })
        .collect();
    Complex64::new(0.0, PI / (3.0 * 6f64.sqrt() * kf)) * neumaier_sum_complex(classes)
}

/// E₂,ν(τ) by nested quadrature of the iterated integral along the path.
pub fn e2_direct(nu: i64, pt: &EichlerPoint, cfg: &QuadConfig) -> Result<Complex64> {
    let z = pt.z;
    let n = cfg.interval_order;
    let mut total = Complex64::new(0.0, 0.0);
    for alpha in 0..2 {
        let th_a = PathTheta::rational(&ThetaIndex::sixth(2 * nu + 3 * alpha), pt.hprime, pt.k);
        let th_b = PathTheta::rational(&ThetaIndex::half(alpha), pt.hprime, pt.k);
        let u_max = th_a.cutoff().max(th_b.cutoff()).sqrt();
        let (c_a, c_b) = (th_a.has_constant(), th_b.has_constant());
        let outer = gauss_legendre_on(n, 0.0, u_max)?;
        let parts: Vec<Result<Complex64>> = outer
            .nodes
            .par_iter()
            .zip(&outer.weights)
            .map(|(&[a], &wa)| {
                let w1 = a * a;
                // J(w₁) = ∫_{w₁}^∞ ϑ_B^{nc}(w₂)/(w₂ + z)^{3/2} dw₂
                let inner = gauss_legendre_on(n, a, u_max)?;
                let j = inner.integrate_complex(|_, &[b]| 2.0 * b * th_b.eval_nc(b * b) * inv_pow32(b * b + z));
                let full = if c_b { j + 2.0 / (w1 + z).sqrt() } else { j };
                let p = inv_pow32(w1 + z);
                let mut val = th_a.eval_nc(w1) * full * p;
                if c_a {
                    val += j * p;
                }
                Ok(wa * 2.0 * a * val)
            })
            .collect();
        let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
        let mut s = neumaier_sum_complex(parts);
        if c_a && c_b {
            // ∫_0^∞ 2(w₁ + z)^{-2} dw₁
            s += 2.0 / z;
        }
        total += s;
    }
    Ok(-total)
}

/// Weight table ζ_{3k}^{-h′Q(r)} on classes r₁ ≡ r₂ + ν (mod 3).
fn e2_weights(nu: i64, hprime: i64, k: u64) -> KernelSum {
    let n = 3 * k as i64;
    let mut w = vec![Complex64::new(0.0, 0.0); (n * n) as usize];
    for r1 in 0..n {
        for r2 in 0..n {
            if (r1 - r2 - nu).rem_euclid(3) == 0 {
                let q = i128::from(r1 * r1 + r2 * r2 + r1 * r2);
                w[(r1 * n + r2) as usize] = zeta(-i128::from(hprime) * q, i128::from(n));
            }
        }
    }
    KernelSum::new(k, w)
}

/// -(2π²/(27√3k²)) Σ_r ζ Σ_nodes g_{k,r}(w)e^{-2πζQ(w)/3}.
fn e2_sum(nu: i64, pt: &EichlerPoint, gauss: Complex64, rule: &FiberedRule) -> Complex64 {
    let ks = e2_weights(nu, pt.hprime, pt.k);
    let s = rule.integrate_fibers(|w1, w2s| {
        let vals = ks.eval_fiber(w1, w2s);
        vals.into_iter()
            .zip(w2s)
            .map(|(v, &w2)| v * (-2.0 * PI * gauss * (w1 * w1 + w2 * w2 + w1 * w2) / 3.0).exp())
            .collect()
    });
    let kf = pt.kf();
    -(2.0 * PI * PI / (27.0 * 3f64.sqrt() * kf * kf)) * s
}

/// E₂,ν(τ) as a two-dimensional Mordell integral of g_{k,r} against e^{-2πzQ(w)/3}.
pub fn e2_mordell(nu: i64, pt: &EichlerPoint, cfg: &QuadConfig) -> Result<Complex64> {
    // Q(w) ≥ 3|w|²_∞/4 on the complement of the square.
    let half_width = gaussian_half_width(PI * pt.z.re / 2.0, cfg.tail_eps);
    let rule = square_fibered_rule(half_width, cfg.mordell_order)?;
    Ok(e2_sum(nu, pt, pt.z, &rule))
}

/// E*₁: e^{2πb/z} times the Mordell sum of E₁ at h′/k + i/z, restricted to |w| ≤ 2√(3b).
pub fn e1_principal(j: i64, pt: &EichlerPoint, cfg: &QuadConfig) -> Result<Complex64> {
    pt.check_rademacher_path()?;
    if pt.b == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let edge = 2.0 * (3.0 * pt.b).sqrt();
    let rule = gauss_legendre_on(cfg.mordell_order, -edge, edge)?;
    let nodes: Vec<f64> = rule.nodes.iter().map(|x| x[0]).collect();
    let inv = pt.z.inv();
    Ok((2.0 * PI * pt.b * inv).exp() * e1_sum(j, pt, inv, &nodes, &rule.weights))
}

/// E*₂: e^{2πb/z} times the Mordell sum of E₂ at h′/k + i/z, restricted to Q(w) ≤ 3b.
///
/// The fibred region rule takes its outer and inner orders from
/// `radial_order` and `angular_order`.
pub fn e2_principal(nu: i64, pt: &EichlerPoint, cfg: &QuadConfig) -> Result<Complex64> {
    pt.check_rademacher_path()?;
    if pt.b == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let rule = elliptic_fibered_rule(3.0 * pt.b, cfg.radial_order, cfg.angular_order)?;
    let inv = pt.z.inv();
    Ok((2.0 * PI * pt.b * inv).exp() * e2_sum(nu, pt, inv, &rule))
}

/// |e^{2πb/z}E₁(h′/k + i/z) - E*₁|.
pub fn e1_principal_discrepancy(j: i64, pt: &EichlerPoint, cfg: &QuadConfig) -> Result<f64> {
    let full = e1_mordell(j, &pt.inverted(), cfg)?;
    let star = e1_principal(j, pt, cfg)?;
    Ok(((2.0 * PI * pt.b * pt.z.inv()).exp() * full - star).norm())
}

/// |e^{2πb/z}E₂(h′/k + i/z) - E*₂|.
pub fn e2_principal_discrepancy(nu: i64, pt: &EichlerPoint, cfg: &QuadConfig) -> Result<f64> {
    let full = e2_mordell(nu, &pt.inverted(), cfg)?;
    let star = e2_principal(nu, pt, cfg)?;
    Ok(((2.0 * PI * pt.b * pt.z.inv()).exp() * full - star).norm())
}

/// The non-holomorphic correction ĥ_α - h_α at τ.
pub fn h2_correction(alpha: u8, tau: Complex64, cfg: &QuadConfig) -> Result<Complex64> {
    if !(tau.im > 0.0) {
        return Err(Error::Domain { function: "h2_completion", detail: format!("Im(tau) = {} must be positive", tau.im) });
    }
    // w = -τ̄ + it, so -i(w + τ) = 2y + t and ϑ is taken at -x + i(y + t).
    let (x, y) = (tau.re, tau.im);
    let th = PathTheta::real(&ThetaIndex::half(i64::from(alpha)), -x, y);
    let u_max = th.cutoff().sqrt();
    let rule = gauss_legendre_on(cfg.interval_order, 0.0, u_max)?;
    let mut s = rule.integrate_complex(|_, &[u]| {
        let t = u * u;
        2.0 * u * th.eval_nc(t) * (2.0 * y + t).powf(-1.5)
    });
    if th.has_constant() {
        s += 2.0 / (2.0 * y).sqrt();
    }
    Ok(s / (4.0 * SQRT_2 * PI))
}

/// ĥ_α(τ) from the first n_max + 1 class numbers and the period integral.
pub fn h2_completion(alpha: u8, tau: Complex64, n_max: usize, cfg: &QuadConfig) -> Result<Complex64> {
    let corr = h2_correction(alpha, tau, cfg)?;
    Ok(h2_series(alpha, n_max).eval(tau) + corr)
}

fn act(m: &UnimodularMatrix, tau: Complex64) -> Complex64 {
    m.act(tau)
}

fn automorphy(m: &UnimodularMatrix, tau: Complex64) -> Complex64 {
    m.c as f64 * tau + m.d as f64
}

/// Both sides of ϑ_{α/2}(Mτ) = (cτ+d)^{1/2} Σ_β ψ₂,M(α,β)ϑ_{β/2}(τ).
pub fn trans1_sides(m: &UnimodularMatrix, alpha: i64, tau: Complex64) -> Result<(Complex64, Complex64)> {
    let lhs = theta(&ThetaIndex::half(alpha), act(m, tau))?;
    let mut rhs = Complex64::new(0.0, 0.0);
    for beta in 0..2 {
        rhs += psi2(m, alpha, beta) * theta(&ThetaIndex::half(beta), tau)?;
    }
    Ok((lhs, automorphy(m, tau).sqrt() * rhs))
}

pub fn trans1_residual(m: &UnimodularMatrix, alpha: i64, tau: Complex64) -> Result<f64> {
    let (l, r) = trans1_sides(m, alpha, tau)?;
    Ok((l - r).norm())
}

/// Both sides of ϑ_{(2μ+3α)/6}(3Mτ) = (cτ+d)^{1/2} Σ_{ν,β} ψ₂,M*(α,β)ψ₃,M(μ,ν)ϑ_{(2ν+3β)/6}(3τ).
pub fn trans2_sides(m: &UnimodularMatrix, mu: i64, alpha: i64, tau: Complex64) -> Result<(Complex64, Complex64)> {
    let lhs = theta(&ThetaIndex::sixth(2 * mu + 3 * alpha), act(m, tau))?;
    let mut rhs = Complex64::new(0.0, 0.0);
    for nu in 0..3 {
        for beta in 0..2 {
            let c = psi2(m, alpha, beta).conj() * psi3(m, mu, nu);
            rhs += c * theta(&ThetaIndex::sixth(2 * nu + 3 * beta), tau)?;
        }
    }
    Ok((lhs, automorphy(m, tau).sqrt() * rhs))
}

pub fn trans2_residual(m: &UnimodularMatrix, mu: i64, alpha: i64, tau: Complex64) -> Result<f64> {
    let (l, r) = trans2_sides(m, mu, alpha, tau)?;
    Ok((l - r).norm())
}

/// Both sides of ĥ_α(-1/τ) = -((-iτ)^{3/2}/√2) Σ_β (-1)^{αβ} ĥ_β(τ).
pub fn trans3_s_sides(alpha: u8, tau: Complex64, n_max: usize, cfg: &QuadConfig) -> Result<(Complex64, Complex64)> {
    let lhs = h2_completion(alpha, -tau.inv(), n_max, cfg)?;
    let mut sum = Complex64::new(0.0, 0.0);
    for beta in 0..2u8 {
        let sign = if alpha % 2 == 1 && beta == 1 { -1.0 } else { 1.0 };
        sum += sign * h2_completion(beta, tau, n_max, cfg)?;
    }
    Ok((lhs, -(-I * tau).powf(1.5) / SQRT_2 * sum))
}

pub fn trans3_s_residual(alpha: u8, tau: Complex64, n_max: usize, cfg: &QuadConfig) -> Result<f64> {
    let (l, r) = trans3_s_sides(alpha, tau, n_max, cfg)?;
    Ok((l - r).norm())
}

/// Both sides of ĥ_α(τ+1) = i^{-α²}ĥ_α(τ).
pub fn trans3_t_sides(alpha: u8, tau: Complex64, n_max: usize, cfg: &QuadConfig) -> Result<(Complex64, Complex64)> {
    let lhs = h2_completion(alpha, tau + 1.0, n_max, cfg)?;
    let a = i128::from(alpha % 2);
    Ok((lhs, zeta(-a * a, 4) * h2_completion(alpha, tau, n_max, cfg)?))
}

pub fn trans3_t_residual(alpha: u8, tau: Complex64, n_max: usize, cfg: &QuadConfig) -> Result<f64> {
    let (l, r) = trans3_t_sides(alpha, tau, n_max, cfg)?;
    Ok((l - r).norm())
}

/// Both sides of the mock transformation of f₃,μ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MockTransform {
    /// f₃,μ(τ)(-i(cτ+d))^{-3/2}
    pub lhs: Complex64,
    pub rhs: Complex64,
    /// The right-hand side with both Eichler integral terms dropped.
    pub rhs_holomorphic: Complex64,
}

impl MockTransform {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).norm()
    }

    pub fn residual_without_mock(&self) -> f64 {
        (self.lhs - self.rhs_holomorphic).norm()
    }
}

/// Smallest Im(τ) at which the truncated f₃ series are trusted.
const MOCK_MIN_IM: f64 = 0.8;
const MOCK_SERIES_TOL: f64 = 1e-8;

/// Evaluates both sides of the transformation of f₃,μ under M (c > 0).
///
/// The Eichler integrals are taken at ϱ = -a/c, which is the point
/// h′ = a, k = c, z = i/(c(cτ+d)) of [`EichlerPoint`].
pub fn verify_mock_transformation(
    mu: FluxClass,
    m: &UnimodularMatrix,
    tau: Complex64,
    n_max: usize,
    cfg: &QuadConfig,
) -> Result<MockTransform> {
    if m.c <= 0 {
        return Err(Error::Unsupported(format!("mock transformation check needs c > 0, got c = {}", m.c)));
    }
    let tau_p = act(m, tau);
    if tau.im < MOCK_MIN_IM || tau_p.im < MOCK_MIN_IM {
        return Err(Error::Domain {
            function: "verify_mock_transformation",
            detail: format!("Im(tau) = {} and Im(M tau) = {} must both be at least {MOCK_MIN_IM}", tau.im, tau_p.im),
        });
    }
    let f3 = |nu: i64, at: Complex64| -> Result<Complex64> {
        let class = FluxClass::from_residue(nu);
        let s = f3_series(class, n_max.min(class.horizon()))?;
        if s.tail_estimate(at) > MOCK_SERIES_TOL {
            return Err(Error::Domain {
                function: "verify_mock_transformation",
                detail: format!("f3 series tail {:.1e} exceeds {MOCK_SERIES_TOL:.0e}", s.tail_estimate(at)),
            });
        }
        Ok(s.eval(at))
    };
    let cd = automorphy(m, tau);
    let lhs = f3(mu.residue(), tau)? * (-I * cd).powf(-1.5);

    let f = eta_power_series(-9, n_max).eval(tau_p);
    let f_alpha = [h2_series(0, n_max).eval(tau_p) * f, h2_series(1, n_max).eval(tau_p) * f];
    let pt = EichlerPoint::new(m.a, m.c as u64, I / (m.c as f64 * cd))?;
    let c1 = Complex64::new(0.0, 9.0 * 3f64.sqrt() / (2.0 * SQRT_2 * PI));
    let c2 = 9.0 * 3f64.sqrt() / (16.0 * PI * PI);
    let mut rhs = Complex64::new(0.0, 0.0);
    let mut rhs_holomorphic = Complex64::new(0.0, 0.0);
    for nu in 0..3 {
        let w = chi(m, nu, i64::from(mu.mu()))?;
        let hol = f3(nu, tau_p)?;
        let mut e1 = Complex64::new(0.0, 0.0);
        for (alpha, fa) in f_alpha.iter().enumerate() {
            e1 += fa * e1_direct(2 * nu + 3 * alpha as i64, &pt, cfg)?;
        }
        let e2 = f * e2_direct(nu, &pt, cfg)?;
        rhs += w * (hol - c1 * e1 - c2 * e2);
        rhs_holomorphic += w * hol;
    }
    Ok(MockTransform { lhs, rhs, rhs_holomorphic })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    fn pt(hp: i64, k: u64, z: f64) -> EichlerPoint {
        EichlerPoint::new(hp, k, Complex64::new(z, 0.0)).unwrap()
    }

    #[test]
    fn theta_half_at_i() {
        // q^{n²} = e^{2πiτn²}, so 2Σ e^{-π(n+1/2)²} is ϑ_{1/2} at i/2.
        let v = theta(&ThetaIndex::half(1), I / 2.0).unwrap();
        let direct: f64 = 2.0 * (0..20).map(|n| (-PI * (n as f64 + 0.5).powi(2)).exp()).sum::<f64>();
        let coarse: f64 = 2.0 * (0..5).map(|n| (-PI * (n as f64 + 0.5).powi(2)).exp()).sum::<f64>();
        assert!((direct - coarse).abs() < 1e-15);
        assert!((v.re - direct).abs() < 1e-14 && v.im.abs() < 1e-14);
        assert!((v.re - 0.91358).abs() < 1e-5);
        let at_i = theta(&ThetaIndex::half(1), I).unwrap();
        let direct: f64 = 2.0 * (0..20).map(|n| (-2.0 * PI * (n as f64 + 0.5).powi(2)).exp()).sum::<f64>();
        assert!((at_i.re - direct).abs() < 1e-14);
        assert!(theta(&ThetaIndex::half(0), Complex64::new(0.3, 0.0)).is_err());
    }

    #[test]
    fn theta_index_symmetries() {
        let tau = Complex64::new(0.17, 0.6);
        for ell in 0..6 {
            let a = ThetaIndex::sixth(ell);
            let b = ThetaIndex::new(ell + 6, 6, 3).unwrap();
            assert_eq!(theta(&a, tau).unwrap(), theta(&b, tau).unwrap());
            let c = theta(&a.negated(), tau).unwrap();
            assert!((theta(&a, tau).unwrap() - c).norm() < 1e-14);
        }
        assert!(ThetaIndex::new(1, 0, 1).is_err());
        assert!(ThetaIndex::new(1, 2, 2).is_err());
    }

    #[test]
    fn theta_transformations() {
        let tau = Complex64::new(0.5, 1.5);
        for alpha in 0..2 {
            assert!(trans1_residual(&UnimodularMatrix::S, alpha, tau).unwrap() < 1e-12);
            assert!(trans1_residual(&UnimodularMatrix::T, alpha, tau).unwrap() < 1e-12);
            for mu in 0..3 {
                assert!(trans2_residual(&UnimodularMatrix::S, mu, alpha, tau).unwrap() < 1e-12);
                assert!(trans2_residual(&UnimodularMatrix::T, mu, alpha, tau).unwrap() < 1e-12);
            }
        }
        // A composite matrix exercises the Gauss sums with |c| > 1.
        let m = UnimodularMatrix::new(2, 1, 3, 2).unwrap();
        let tau = Complex64::new(-0.6, 0.35);
        for alpha in 0..2 {
            assert!(trans1_residual(&m, alpha, tau).unwrap() < 1e-10);
            for mu in 0..3 {
                assert!(trans2_residual(&m, mu, alpha, tau).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn e1_direct_matches_mordell() {
        let c = cfg();
        let cases = [
            (0, 0, 1, Complex64::new(1.0, 0.0)),
            (1, 0, 1, Complex64::new(1.0, 0.0)),
            (2, 1, 3, Complex64::new(0.8, 0.0)),
            (3, 2, 5, Complex64::new(1.3, 0.4)),
            (5, 1, 2, Complex64::new(0.6, 0.0)),
        ];
        for (j, hp, k, z) in cases {
            let p = EichlerPoint::new(hp, k, z).unwrap();
            let a = e1_direct(j, &p, &c).unwrap();
            let b = e1_mordell(j, &p, &c).unwrap();
            assert!((a - b).norm() < 1e-10, "j={j} hp={hp} k={k}: {a} vs {b}");
        }
        let v = e1_direct(0, &pt(0, 1, 1.0), &c).unwrap();
        assert!((v - Complex64::new(0.0, 2.16636369992606)).norm() < 1e-10);
        let v = e1_mordell(2, &pt(1, 3, 0.8), &c).unwrap();
        assert!((v - Complex64::new(0.25013026232555, 0.17975958294634)).norm() < 1e-10);
    }

    #[test]
    fn e1_symmetries() {
        let c = cfg();
        let p = pt(0, 1, 1.0);
        let a = e1_direct(1, &p, &c).unwrap();
        let b = e1_direct(5, &p, &c).unwrap();
        assert!((a - b).norm() < 1e-13);
        assert!(e1_direct(0, &p, &c).unwrap().re.abs() < 1e-12);
        assert!(e1_mordell(0, &p, &c).unwrap().re.abs() < 1e-12);
    }

    #[test]
    fn e2_direct_matches_mordell() {
        let c = cfg();
        let cases = [
            (0, 0, 1, Complex64::new(1.0, 0.0), Complex64::new(-2.68245228924, 0.0)),
            (1, 1, 2, Complex64::new(0.7, 0.0), Complex64::new(-0.63773552222, 1.10459032627)),
            (2, 0, 1, Complex64::new(1.0, 0.0), Complex64::new(-1.33398683385, 0.0)),
        ];
        for (nu, hp, k, z, want) in cases {
            let p = EichlerPoint::new(hp, k, z).unwrap();
            let a = e2_direct(nu, &p, &c).unwrap();
            let b = e2_mordell(nu, &p, &c).unwrap();
            assert!((a - b).norm() < 1e-8, "nu={nu}: {a} vs {b}");
            assert!((b - want).norm() < 1e-9, "nu={nu}: {b} vs {want}");
        }
        let p = pt(0, 1, 1.0);
        let d1 = e2_direct(1, &p, &c).unwrap();
        let d2 = e2_direct(2, &p, &c).unwrap();
        assert!((d1 - d2).norm() < 1e-12);
    }

    #[test]
    fn e2_fast_sum_matches_pointwise_kernels() {
        use crate::special::g2d;
        let p = EichlerPoint::new(2, 3, Complex64::new(0.9, 0.3)).unwrap();
        let rule = square_fibered_rule(5.0, 24).unwrap();
        let fast = e2_sum(1, &p, p.z, &rule);
        let n = 9;
        let mut slow = Complex64::new(0.0, 0.0);
        for r1 in 0..n {
            for r2 in 0..n {
                if (r1 - r2 - 1i64).rem_euclid(3) != 0 {
                    continue;
                }
                let ph = zeta(-2 * i128::from(r1 * r1 + r2 * r2 + r1 * r2), 9);
                for fib in &rule.fibers {
                    for (&w2, &wt) in fib.w2.iter().zip(&fib.w2_weights) {
                        let w1 = fib.w1;
                        let g = (-2.0 * PI * p.z * (w1 * w1 + w2 * w2 + w1 * w2) / 3.0).exp();
                        slow += ph * fib.weight * wt * g2d(3, r1, r2, w1, w2) * g;
                    }
                }
            }
        }
        slow *= -(2.0 * PI * PI / (27.0 * 3f64.sqrt() * 9.0));
        assert!((fast - slow).norm() < 1e-11 * slow.norm().max(1.0), "{fast} vs {slow}");
    }

    #[test]
    fn e2_classes_and_representatives() {
        // k = 1: for each ν exactly three pairs (r₁, r₂) mod 3 satisfy r₁ ≡ r₂ + ν.
        for nu in 0..3 {
            let count = (0..3i64).flat_map(|a| (0..3).map(move |b| (a, b))).filter(|(a, b)| (a - b - nu).rem_euclid(3) == 0).count();
            assert_eq!(count, 3);
        }
        // Phases depend on r only mod 3k.
        for (r1, r2) in [(1i64, 2i64), (4, 5)] {
            let a = zeta(-(r1 * r1 + r2 * r2 + r1 * r2) as i128, 6);
            let b = zeta(-((r1 + 6).pow(2) + r2 * r2 + (r1 + 6) * r2) as i128, 6);
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn principal_parts_vanish_at_b_zero() {
        let z = Complex64::new(1.0, 0.5).inv();
        let p = EichlerPoint::new(3, 4, z).unwrap().with_b(0.0).unwrap();
        assert_eq!(e1_principal(1, &p, &cfg()).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(e2_principal(0, &p, &cfg()).unwrap(), Complex64::new(0.0, 0.0));
        let off = EichlerPoint::new(0, 1, Complex64::new(2.0, 0.0)).unwrap();
        assert!(e1_principal(0, &off, &cfg()).is_err());
    }

    #[test]
    fn principal_discrepancy_is_moderate() {
        let c = cfg();
        let z = Complex64::new(1.0, 0.3).inv();
        for k in [1u64, 4] {
            let p = EichlerPoint::new(1, k, z).unwrap();
            let d1 = e1_principal_discrepancy(0, &p, &c).unwrap();
            let d2 = e2_principal_discrepancy(0, &p, &c).unwrap();
            assert!(d1.is_finite() && d1 < 10.0, "k={k}: {d1}");
            assert!(d2.is_finite() && d2 < 10.0, "k={k}: {d2}");
        }
    }

    #[test]
    fn completion_transformations() {
        let c = cfg();
        for alpha in 0..2u8 {
            let s = trans3_s_residual(alpha, I, 40, &c).unwrap();
            assert!(s < 1e-8, "S alpha={alpha}: {s}");
            let t = trans3_t_residual(alpha, Complex64::new(1.0, 4.0) / 3.0, 40, &c).unwrap();
            assert!(t < 1e-10, "T alpha={alpha}: {t}");
            let tau = Complex64::new(0.0, 2.0);
            let corr = h2_correction(alpha, tau, &c).unwrap();
            let h = h2_series(alpha, 40).eval(tau);
            assert!(corr.im.abs() < 1e-15 && corr.re > 0.0);
            if alpha == 0 {
                assert!(corr.norm() < h.norm());
            } else {
                // h₁(2i) ≈ 2.69e-5 is smaller than the correction ≈ 3.19e-4.
                assert!((corr.re - 3.1901413980e-4).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mock_transformation_at_s() {
        let c = cfg();
        for mu in [FluxClass::ZERO, FluxClass::PLUS] {
            let r = verify_mock_transformation(mu, &UnimodularMatrix::S, I, 30, &c).unwrap();
            assert!(r.residual() < 1e-6, "mu={}: {}", mu.mu(), r.residual());
            assert!(r.residual_without_mock() > 1e-3);
        }
        assert!(verify_mock_transformation(FluxClass::ZERO, &UnimodularMatrix::S, Complex64::new(0.0, 0.5), 30, &c).is_err());
        assert!(verify_mock_transformation(FluxClass::ZERO, &UnimodularMatrix::T, I, 30, &c).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn theta_is_periodic_in_ell(ell in -20i64..20, x in -1.0f64..1.0, y in 0.2f64..2.0) {
            let tau = Complex64::new(x, y);
            let a = theta(&ThetaIndex::sixth(ell), tau).unwrap();
            let b = theta(&ThetaIndex::sixth(ell + 6), tau).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn trans1_at_random_points(x in -2.0f64..2.0, y in 0.3f64..3.0, alpha in 0i64..2) {
            let tau = Complex64::new(x, y);
            prop_assert!(trans1_residual(&UnimodularMatrix::S, alpha, tau).unwrap() < 1e-10);
            prop_assert!(trans1_residual(&UnimodularMatrix::T, alpha, tau).unwrap() < 1e-10);
        }
    }
}
