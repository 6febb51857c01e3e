//! Scalar kernels: half-integer Bessel functions and the hyperbolic kernels
//! `g_c`, `f_c`, `G_c` together with the one- and two-dimensional integrands
//! built from them.
//!
//! Arguments `c = num/den` are carried as [`Phase`] so that `sin²(πc)` and
//! `sin(2πc)` are computed once from the exact rational.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

use crate::error::{Error, Result};

const A: f64 = 2.0 * PI / 3.0;
/// Above this |2πw/3| the exponential forms are used.
const LARGE_U: f64 = 40.0;
/// Below this the removable-singularity Taylor expansions take over.
pub const TAYLOR_SWITCH: f64 = 1e-4;

fn gamma_7_2() -> f64 {
    15.0 * PI.sqrt() / 8.0
}

/// Σ_{m≥0} u^m / (m! Γ(m + 7/2)) for real u of either sign.
///
/// This is entire in `u`; I_{5/2}(x) = (x/2)^{5/2}·bessel_entire((x/2)²).
pub fn bessel_entire(u: f64) -> f64 {
    let mut term = 1.0 / gamma_7_2();
    let mut sum = term;
    let mut m = 0.0;
    loop {
        m += 1.0;
        term *= u / (m * (m + 2.5));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() || m > 500.0 {
            return sum;
        }
    }
}

fn i52_series(x: f64) -> f64 {
    (0.5 * x).powf(2.5) * bessel_entire(0.25 * x * x)
}

fn check_nonnegative(function: &'static str, x: f64) -> Result<()> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::Domain { function, detail: format!("argument {x} < 0") });
    }
    Ok(())
}

/// e^{-x}·I_{5/2}(x). Finite for every x ≥ 0.
pub fn bessel_i52_scaled(x: f64) -> Result<f64> {
    check_nonnegative("bessel_i52_scaled", x)?;
    if x < 2.0 {
        return Ok(i52_series(x) * (-x).exp());
    }
    let e = (-2.0 * x).exp();
    let sh = 0.5 * (1.0 - e);
    let ch = 0.5 * (1.0 + e);
    Ok((2.0 / (PI * x)).sqrt() * ((1.0 + 3.0 / (x * x)) * sh - 3.0 / x * ch))
}

/// I_{5/2}(x). Overflows to an error once e^x leaves double range.
pub fn bessel_i52(x: f64) -> Result<f64> {
    check_nonnegative("bessel_i52", x)?;
    if x < 2.0 {
        return Ok(i52_series(x));
    }
    if x > 700.0 {
        return Err(Error::Overflow(format!("I_5/2({x}) exceeds double range; use the scaled form")));
    }
    let (sh, ch) = (x.sinh(), x.cosh());
    Ok((2.0 / (PI * x)).sqrt() * ((1.0 + 3.0 / (x * x)) * sh - 3.0 / x * ch))
}

/// J_{5/2}(y) for y ≥ 0.
pub fn bessel_j52(y: f64) -> Result<f64> {
    check_nonnegative("bessel_j52", y)?;
    if y < 2.0 {
        return Ok((0.5 * y).powf(2.5) * bessel_entire(-0.25 * y * y));
    }
    let (s, c) = y.sin_cos();
    Ok((2.0 / (PI * y)).sqrt() * ((3.0 / (y * y) - 1.0) * s - 3.0 / y * c))
}

/// A positive real carried as `mantissa · e^{exponent}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mantissa: f64,
    pub exponent: f64,
}

impl Scaled {
    pub fn value(self) -> f64 {
        self.mantissa * self.exponent.exp()
    }

    pub fn ln_abs(self) -> f64 {
        self.mantissa.abs().ln() + self.exponent
    }
}

/// The Bessel weight `(6/n)^{5/4}·I_{5/2}(π√(6n)·s/k)` expressed relative to
/// the reference exponent `π√(6n)/k`, i.e. the returned mantissa `m` satisfies
/// `weight = m·e^{π√(6n)/k}` when `n > 0`.
///
/// For `n ≤ 0` the same entire function of `n` is used (the I-Bessel turns into
/// J_{5/2}), and the reference exponent is 0.
#[derive(Debug, Clone, Copy)]
pub struct BesselWeight {
    n_mu: f64,
    k: f64,
    x_ref: f64,
}

impl BesselWeight {
    pub fn new(n_mu: f64, k: u64) -> Self {
        let k = k as f64;
        let x_ref = if n_mu > 0.0 { PI * (6.0 * n_mu).sqrt() / k } else { 0.0 };
        BesselWeight { n_mu, k, x_ref }
    }

    /// The exponent that has been factored out of every [`mantissa`](Self::mantissa).
    pub fn exponent(&self) -> f64 {
        self.x_ref
    }

    /// Mantissa at radial fraction `s ∈ [0, 1]`.
    pub fn mantissa(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        let n = self.n_mu;
        if n > 0.0 {
            let x = self.x_ref * s;
            let scaled = bessel_i52_scaled(x).expect("nonnegative by construction");
            (6.0 / n).powf(1.25) * scaled * (x - self.x_ref).exp()
        } else {
            // 6^{5/4}(cs/2k)^{5/2} Σ (c²n s²/4k²)^j/(j!Γ(j+7/2)) with c = π√6
            let c = PI * 6f64.sqrt();
            let half = c * s / (2.0 * self.k);
            6f64.powf(1.25) * half.powf(2.5) * bessel_entire(half * half * n)
        }
    }
}

/// A rational phase c = num/den reduced to [0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    num: i64,
    den: i64,
    /// sin²(πc)
    sigma: f64,
    /// sin(2πc)
    sin2: f64,
}

impl Phase {
    /// Panics if `den <= 0`.
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den > 0, "phase denominator must be positive");
        let num = num.rem_euclid(den);
        let s = (PI * num as f64 / den as f64).sin();
        let sin2 = if 2 * num == den { 0.0 } else { (2.0 * PI * num as f64 / den as f64).sin() };
        Phase { num, den, sigma: s * s, sin2 }
    }

    /// Phase from a float c; used by the public convenience kernels.
    pub fn from_f64(c: f64) -> Self {
        let c = c.rem_euclid(1.0);
        let s = (PI * c).sin();
        Phase { num: if c == 0.0 { 0 } else { 1 }, den: 1, sigma: s * s, sin2: (2.0 * PI * c).sin() }
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    /// g_c(x) = sinh(2πx/3)/(cosh(2πx/3) - cos 2πc). Infinite at (0, 0).
    pub fn g(&self, x: f64) -> f64 {
        self.g_at(&Hyper::new(x))
    }

    /// f_c(x) = sin(2πc)/(cosh(2πx/3) - cos 2πc).
    pub fn f(&self, x: f64) -> f64 {
        self.f_at(&Hyper::new(x))
    }

    pub(crate) fn g_at(&self, h: &Hyper) -> f64 {
        if h.big {
            let cos2 = 1.0 - 2.0 * self.sigma;
            let e = h.e;
            return h.sign * (1.0 - e * e) / (1.0 + e * e - 2.0 * cos2 * e);
        }
        h.sch / (h.s2 + self.sigma)
    }

    pub(crate) fn f_at(&self, h: &Hyper) -> f64 {
        if h.big {
            let cos2 = 1.0 - 2.0 * self.sigma;
            let e = h.e;
            return 2.0 * self.sin2 * e / (1.0 + e * e - 2.0 * cos2 * e);
        }
        self.sin2 / (2.0 * (h.s2 + self.sigma))
    }

    /// d/dx g_c for c ≠ 0.
    fn g_prime(&self, x: f64) -> f64 {
        let u = A * x;
        if u.abs() > LARGE_U {
            return 0.0;
        }
        let s2 = (0.5 * u).sinh().powi(2);
        let sg = self.sigma;
        A * (sg - s2 + 2.0 * sg * s2) / (2.0 * (s2 + sg).powi(2))
    }

    /// d²/dx² g_c for c ≠ 0.
    fn g_second(&self, x: f64) -> f64 {
        let u = A * x;
        if u.abs() > LARGE_U {
            return 0.0;
        }
        let s = (0.5 * u).sinh();
        let ch = (0.5 * u).cosh();
        let s2 = s * s;
        let sg = self.sigma;
        A * A * s * ch * (s2 - 3.0 * sg - 2.0 * sg * s2 + 2.0 * sg * sg) / (2.0 * (s2 + sg).powi(3))
    }

    /// x·g_c(x), finite everywhere (equal to 3/π at 0 when c = 0).
    pub fn xg(&self, x: f64) -> f64 {
        if self.is_zero() {
            xg0(x)
        } else {
            x * self.g(x)
        }
    }

    /// G_c(x) = x²·g_c(x).
    pub fn big_g(&self, x: f64) -> f64 {
        if self.is_zero() {
            (3.0 / PI) * x * phi(PI * x / 3.0)
        } else {
            x * x * self.g(x)
        }
    }

    /// (G_c, G_c', G_c'') at x.
    pub fn big_g_derivs(&self, x: f64) -> (f64, f64, f64) {
        if self.is_zero() {
            let y = PI * x / 3.0;
            let (p, p1, p2) = phi_derivs(y);
            ((3.0 / PI) * x * p, (3.0 / PI) * p + x * p1, 2.0 * p1 + y * p2)
        } else {
            let g = self.g(x);
            let g1 = self.g_prime(x);
            let g2 = self.g_second(x);
            (x * x * g, 2.0 * x * g + x * x * g1, 2.0 * g + 4.0 * x * g1 + x * x * g2)
        }
    }

    /// (G_c(x) - G_c(x + w/(2k)))/w with the Taylor fallback near w = 0.
    fn difference_quotient(&self, x: f64, w: f64, k: f64) -> f64 {
        if w.abs() < TAYLOR_SWITCH {
            let (_, d1, d2) = self.big_g_derivs(x);
            -d1 / (2.0 * k) - d2 * w / (8.0 * k * k)
        } else {
            (self.big_g(x) - self.big_g(x + w / (2.0 * k))) / w
        }
    }
}

/// sinh and cosh of πx/3 shared by every phase evaluated at the same x.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Hyper {
    x: f64,
    s2: f64,
    sch: f64,
    big: bool,
    e: f64,
    sign: f64,
}

impl Hyper {
    pub(crate) fn new(x: f64) -> Self {
        let u = A * x;
        if u.abs() > LARGE_U {
            return Hyper { x, s2: 0.0, sch: 0.0, big: true, e: (-u.abs()).exp(), sign: 1f64.copysign(u) };
        }
        let s = (0.5 * u).sinh();
        let ch = (0.5 * u).cosh();
        Hyper { x, s2: s * s, sch: s * ch, big: false, e: 0.0, sign: 1.0 }
    }

    /// G_c(x) = x²g_c(x) for a nonzero phase.
    fn big_g(&self, p: &Phase) -> f64 {
        self.x * self.x * p.g_at(self)
    }
}

/// φ(y) = y·coth(y), with φ(0) = 1.
fn phi(y: f64) -> f64 {
    phi_derivs(y).0
}

fn phi_derivs(y: f64) -> (f64, f64, f64) {
    if y.abs() < 0.1 {
        let y2 = y * y;
        let p = 1.0 + y2 * (1.0 / 3.0 + y2 * (-1.0 / 45.0 + y2 * (2.0 / 945.0 + y2 * (-1.0 / 4725.0 + y2 * 2.0 / 93555.0))));
        let p1 = y * (2.0 / 3.0 + y2 * (-4.0 / 45.0 + y2 * (12.0 / 945.0 + y2 * (-8.0 / 4725.0 + y2 * 20.0 / 93555.0))));
        let p2 = 2.0 / 3.0 + y2 * (-12.0 / 45.0 + y2 * (60.0 / 945.0 + y2 * (-56.0 / 4725.0 + y2 * 180.0 / 93555.0)));
        return (p, p1, p2);
    }
    let coth = 1.0 / y.tanh();
    let p = y * coth;
    let inv_sh2 = if y.abs() > 350.0 { 0.0 } else { 1.0 / y.sinh().powi(2) };
    (p, coth - y * inv_sh2, 2.0 * inv_sh2 * (p - 1.0))
}

/// x·g_0(x), equal to 3/π at the origin.
pub fn xg0(x: f64) -> f64 {
    (3.0 / PI) * phi(PI * x / 3.0)
}

/// g_0(x) - 3/(πx), the bounded part of g_0. Zero at the origin.
pub fn g0_subtracted(x: f64) -> f64 {
    let y = PI * x / 3.0;
    if y.abs() < 0.1 {
        let y2 = y * y;
        return y * (1.0 / 3.0 + y2 * (-1.0 / 45.0 + y2 * (2.0 / 945.0 + y2 * (-1.0 / 4725.0 + y2 * 2.0 / 93555.0))));
    }
    1.0 / y.tanh() - 1.0 / y
}

fn check_c(function: &'static str, c: f64) -> Result<()> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::Domain { function, detail: format!("c = {c} outside [0, 1)") });
    }
    Ok(())
}

/// g_c(w) for c ∈ [0, 1). Errors at the pole c = 0, w = 0.
pub fn g_c(c: f64, w: f64) -> Result<f64> {
    check_c("g_c", c)?;
    if c == 0.0 && w == 0.0 {
        return Err(Error::Pole);
    }
    Ok(Phase::from_f64(c).g(w))
}

/// f_c(w) for c ∈ [0, 1). Errors at c = 0, w = 0.
pub fn f_c(c: f64, w: f64) -> Result<f64> {
    check_c("f_c", c)?;
    if c == 0.0 && w == 0.0 {
        return Err(Error::Pole);
    }
    Ok(Phase::from_f64(c).f(w))
}

/// G_c(x) = x²·g_c(x), continuous at c = 0, x = 0.
pub fn big_g_c(c: f64, x: f64) -> Result<f64> {
    check_c("big_g_c", c)?;
    Ok(Phase::from_f64(c).big_g(x))
}

/// (1 - t)^{5/4} with round-off below 0 clamped.
pub fn boundary_weight(t: f64) -> f64 {
    let one_minus = 1.0 - t;
    if one_minus <= 0.0 {
        0.0
    } else {
        (1.25 * one_minus.ln()).exp()
    }
}

/// g*_{k,r}(w) = w·g_{r/3k}(3w/(2√2k))·(1 - w²)^{5/4}.
pub fn gstar_1d(k: u64, r: i64, w: f64) -> f64 {
    let kf = k as f64;
    let x = 3.0 * w / (2.0 * SQRT_2 * kf);
    let phase = Phase::new(r, 3 * k as i64);
    let core = if phase.is_zero() { (2.0 * SQRT_2 * kf / 3.0) * xg0(x) } else { w * phase.g(x) };
    core * boundary_weight(w * w)
}

/// Q(x₁, x₂) = x₁² + x₂² + x₁x₂.
pub fn quad_form(x1: f64, x2: f64) -> f64 {
    x1 * x1 + x2 * x2 + x1 * x2
}

/// Two-dimensional kernel g_{k,(r₁,r₂)}(w₁, w₂).
///
/// The r ≡ 0 cases are evaluated in a form free of cancellation; every
/// apparent singularity on the axes is removable and never produces a NaN.
pub fn g2d(k: u64, r1: i64, r2: i64, w1: f64, w2: f64) -> f64 {
    let den = 3 * k as i64;
    let p1 = Phase::new(r1, den);
    let p2 = Phase::new(r2, den);
    g2d_phases(k, &p1, &p2, w1, w2)
}

pub(crate) fn g2d_phases(k: u64, p1: &Phase, p2: &Phase, w1: f64, w2: f64) -> f64 {
    let kf = k as f64;
    match (p1.is_zero(), p2.is_zero()) {
        (false, false) => {
            let (x1, x2) = (w1 / kf, w2 / kf);
            let poly = w1 * w1 + w2 * w2 + 4.0 * w1 * w2;
            poly * (p1.g(x1) * p2.g(x2) - p1.f(x1) * p2.f(x2))
        }
        (true, false) => one_zero(kf, p2, w1, w2),
        (false, true) => one_zero(kf, p1, w2, w1),
        (true, true) => {
            let zero = Phase::new(0, 1);
            let (x1, x2) = (w1 / kf, w2 / kf);
            let mut t = 4.0 * kf * kf * xg0(x1) * xg0(x2);
            t += kf * kf * zero.big_g(x2) * g0_subtracted(x1);
            t += 3.0 * kf.powi(3) / PI * zero.difference_quotient(x2, w1, kf);
            t += kf * kf * zero.big_g(x1) * g0_subtracted(x2);
            t += 3.0 * kf.powi(3) / PI * zero.difference_quotient(x1, w2, kf);
            t
        }
    }
}

/// Kernel with the first residue ≡ 0 and the second `p` nonzero.
fn one_zero(k: f64, p: &Phase, w1: f64, w2: f64) -> f64 {
    let (x1, x2) = (w1 / k, w2 / k);
    let g2 = p.g(x2);
    (w1 + 4.0 * w2) * k * xg0(x1) * g2
        + w2 * w2 * g0_subtracted(x1) * g2
        + 3.0 * k.powi(3) / PI * p.difference_quotient(x2, w1, k)
}

/// g*_{k,r₁,r₂}(w) = g_{k,r}(3w₁/(2√2), 3w₂/(2√2))·(1 - Q(w))^{5/4}.
pub fn gstar_2d(k: u64, r1: i64, r2: i64, w1: f64, w2: f64) -> f64 {
    let s = 3.0 / (2.0 * SQRT_2);
    g2d(k, r1, r2, s * w1, s * w2) * boundary_weight(quad_form(w1, w2))
}

/// Σ_r c_r·g_{k,r}(w₁, w₂) over all residue pairs r ∈ (ℤ/3k)² for a fixed weight table.
///
/// Evaluation along a fibre (fixed w₁, many w₂) costs O(k) per point after an
/// O(k²) set-up, since the product structure of the generic kernel lets the
/// r₁ sum be folded in once.
#[derive(Debug, Clone)]
pub struct KernelSum {
    k: u64,
    phases: Vec<Phase>,
    /// Row-major c[r₁·3k + r₂].
    weights: Vec<Complex64>,
    row0: Vec<(usize, Complex64)>,
    col0: Vec<(usize, Complex64)>,
    c00: Complex64,
}

impl KernelSum {
    /// `weights` has length (3k)², indexed by r₁·3k + r₂.
    pub fn new(k: u64, weights: Vec<Complex64>) -> Self {
        let n = 3 * k as usize;
        assert_eq!(weights.len(), n * n, "weight table must be 3k by 3k");
        let phases = (0..n).map(|r| Phase::new(r as i64, n as i64)).collect();
        let zero = Complex64::new(0.0, 0.0);
        let row0 = (1..n).map(|r| (r, weights[r])).filter(|&(_, c)| c != zero).collect();
        let col0 = (1..n).map(|r| (r, weights[r * n])).filter(|&(_, c)| c != zero).collect();
        let c00 = weights[0];
        KernelSum { k, phases, weights, row0, col0, c00 }
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn eval(&self, w1: f64, w2: f64) -> Complex64 {
        self.eval_fiber(w1, &[w2])[0]
    }

    /// Values at (w₁, w₂) for each w₂ in `w2s`.
    pub fn eval_fiber(&self, w1: f64, w2s: &[f64]) -> Vec<Complex64> {
        let kf = self.k as f64;
        let n = self.phases.len();
        let dq_scale = 3.0 * kf.powi(3) / PI;
        let x1 = w1 / kf;
        let h1 = Hyper::new(x1);
        let mut g1 = vec![0.0; n];
        let mut f1 = vec![0.0; n];
        for r in 1..n {
            g1[r] = self.phases[r].g_at(&h1);
            f1[r] = self.phases[r].f_at(&h1);
        }
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        let mut u = vec![Complex64::new(0.0, 0.0); n];
        for r1 in 1..n {
            let row = &self.weights[r1 * n..(r1 + 1) * n];
            for r2 in 1..n {
                v[r2] += row[r2] * g1[r1];
                u[r2] += row[r2] * f1[r1];
            }
        }
        let (xg01, g0s1) = (xg0(x1), g0_subtracted(x1));
        let zero_phase = Phase::new(0, 1);
        let mut g2 = vec![0.0; n];
        w2s.iter()
            .map(|&w2| {
                let x2 = w2 / kf;
                let h2 = Hyper::new(x2);
                let poly = w1 * w1 + w2 * w2 + 4.0 * w1 * w2;
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 1..n {
                    g2[r] = self.phases[r].g_at(&h2);
                    acc += v[r] * g2[r] - u[r] * self.phases[r].f_at(&h2);
                }
                acc *= poly;
                if !self.row0.is_empty() {
                    let lead = (w1 + 4.0 * w2) * kf * xg01 + w2 * w2 * g0s1;
                    let shifted = (w1.abs() >= TAYLOR_SWITCH).then(|| Hyper::new(x2 + w1 / (2.0 * kf)));
                    for &(r, c) in &self.row0 {
                        let p = &self.phases[r];
                        let dq = match &shifted {
                            Some(hs) => (x2 * x2 * g2[r] - hs.big_g(p)) / w1,
                            None => p.difference_quotient(x2, w1, kf),
                        };
                        acc += c * (lead * g2[r] + dq_scale * dq);
                    }
                }
                if !self.col0.is_empty() {
                    let lead = (w2 + 4.0 * w1) * kf * xg0(x2) + w1 * w1 * g0_subtracted(x2);
                    let shifted = (w2.abs() >= TAYLOR_SWITCH).then(|| Hyper::new(x1 + w2 / (2.0 * kf)));
                    for &(r, c) in &self.col0 {
                        let p = &self.phases[r];
                        let dq = match &shifted {
                            Some(hs) => (x1 * x1 * g1[r] - hs.big_g(p)) / w2,
                            None => p.difference_quotient(x1, w2, kf),
                        };
                        acc += c * (lead * g1[r] + dq_scale * dq);
                    }
                }
                if self.c00 != Complex64::new(0.0, 0.0) {
                    acc += self.c00 * g2d_phases(self.k, &zero_phase, &zero_phase, w1, w2);
                }
                acc
            })
            .collect()
    }
}
