//! Multiplier systems and generalized Kloosterman sums.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::{OnceLock, RwLock};

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qseries::FluxClass;

/// e^{2πi j/m} with j reduced mod m before any floating point work.
pub fn zeta(j: i128, m: i128) -> Complex64 {
    assert!(m != 0, "root of unity of order 0");
    let (j, m) = if m < 0 { (-j, -m) } else { (j, m) };
    let r = j.rem_euclid(m);
    if 4 * r % m == 0 {
        return match 4 * r / m {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
    }
    // Symmetric representative keeps the angle in (-π, π].
    let r = if 2 * r > m { r - m } else { r };
    let (s, c) = (2.0 * PI * r as f64 / m as f64).sin_cos();
    Complex64::new(c, s)
}

/// An integer matrix of determinant one, with d > 0 whenever c = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnimodularMatrix {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl UnimodularMatrix {
    pub const S: UnimodularMatrix = UnimodularMatrix { a: 0, b: -1, c: 1, d: 0 };
    pub const T: UnimodularMatrix = UnimodularMatrix { a: 1, b: 1, c: 0, d: 1 };
    pub const IDENTITY: UnimodularMatrix = UnimodularMatrix { a: 1, b: 0, c: 0, d: 1 };

    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        let det = i128::from(a) * i128::from(d) - i128::from(b) * i128::from(c);
        if det != 1 {
            return Err(Error::InvalidMatrix { a, b, c, d, reason: "determinant is not 1" });
        }
        if c == 0 && d <= 0 {
            return Err(Error::InvalidMatrix { a, b, c, d, reason: "d must be positive when c = 0" });
        }
        Ok(UnimodularMatrix { a, b, c, d })
    }

    /// M♯ = (a, -b; -c, d).
    pub fn sharp(&self) -> Self {
        UnimodularMatrix { a: self.a, b: -self.b, c: -self.c, d: self.d }
    }

    pub fn mul(&self, o: &Self) -> Self {
        UnimodularMatrix {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    /// Möbius action.
    pub fn act(&self, tau: Complex64) -> Complex64 {
        (tau * self.a as f64 + self.b as f64) / (tau * self.c as f64 + self.d as f64)
    }

    /// The matrix (h′, -(1+hh′)/k; k, -h) attached to the cusp h/k.
    pub fn rademacher(h: i64, hprime: i64, k: i64) -> Result<Self> {
        let num = 1 + h * hprime;
        if k <= 0 || num % k != 0 {
            return Err(Error::InvalidMatrix {
                a: hprime,
                b: 0,
                c: k,
                d: -h,
                reason: "h·h′ ≢ -1 (mod k)",
            });
        }
        UnimodularMatrix::new(hprime, -num / k, k, -h)
    }
}

/// Kronecker symbol (a/n), including n even, negative and zero.
pub fn kronecker(a: i64, n: i64) -> i32 {
    if n == 0 {
        return i32::from(a.abs() == 1);
    }
    let mut result = 1;
    let mut n = n;
    if n < 0 {
        n = -n;
        if a < 0 {
            result = -result;
        }
    }
    let twos = n.trailing_zeros();
    if twos > 0 {
        if a % 2 == 0 {
            return 0;
        }
        if twos % 2 == 1 && matches!(a.rem_euclid(8), 3 | 5) {
            result = -result;
        }
        n >>= twos;
    }
    result * jacobi(a, n)
}

/// Jacobi symbol for odd positive n.
pub fn jacobi(a: i64, n: i64) -> i32 {
    assert!(n > 0 && n % 2 == 1, "Jacobi symbol needs odd positive modulus");
    let mut a = a.rem_euclid(n);
    let mut n = n;
    let mut r = 1;
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            if matches!(n % 8, 3 | 5) {
                r = -r;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            r = -r;
        }
        a %= n;
    }
    if n == 1 {
        r
    } else {
        0
    }
}

fn i_pow(e: i64) -> Complex64 {
    zeta(i128::from(e), 4)
}

/// ψ₂,M(α, β) for α, β mod 2.
pub fn psi2(m: &UnimodularMatrix, alpha: i64, beta: i64) -> Complex64 {
    let (alpha, beta) = (alpha.rem_euclid(2), beta.rem_euclid(2));
    let (a, b, c, d) = (m.a as i128, m.b as i128, m.c as i128, m.d as i128);
    if c == 0 {
        if alpha != beta {
            return Complex64::new(0.0, 0.0);
        }
        // e^{-πi(1 - sgn d)/4} = ζ_8^{-(1 - sgn d)}
        let sd = d.signum();
        return zeta(a * b * (alpha * alpha) as i128, 4) * zeta(-(1 - sd), 8);
    }
    let (al, be) = (alpha as i128, beta as i128);
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..c.abs() {
        let x = 2 * j + al;
        // e^{πi N/(2c)} = ζ_{4c}^N
        sum += zeta(a * x * x - 2 * be * x + d * be * be, 4 * c);
    }
    zeta(-c.signum(), 8) * sum / (2.0 * c.abs() as f64).sqrt()
}

/// λ₃,M(μ, ν) for c ≠ 0.
fn lambda3(m: &UnimodularMatrix, mu: i128, nu: i128) -> Complex64 {
    let (a, c, d) = (m.a as i128, m.c as i128, m.d as i128);
    let mut sum = Complex64::new(0.0, 0.0);
    for j1 in 0..c.abs() {
        for j2 in 0..c.abs() {
            let n = a * mu * mu + d * nu * nu - 2 * mu * nu
                + 3 * a * (j1 * j1 - j1 * j2 + j2 * j2)
                + 3 * j1 * (a * mu - nu);
            sum += zeta(n, 3 * c);
        }
    }
    sum
}

/// ψ₃,M(μ, ν) for μ, ν mod 3.
pub fn psi3(m: &UnimodularMatrix, mu: i64, nu: i64) -> Complex64 {
    let (mu, nu) = (mu.rem_euclid(3) as i128, nu.rem_euclid(3) as i128);
    if m.c == 0 {
        if mu != nu {
            return Complex64::new(0.0, 0.0);
        }
        let (a, b) = (m.a as i128, m.b as i128);
        return zeta(a * b * mu * mu, 3) * i_pow(m.d.signum() - 1);
    }
    i_pow(-m.c.signum()) * lambda3(m, mu, nu) / (3f64.sqrt() * m.c.abs() as f64)
}

/// Dedekind η multiplier ψ(M), defined here for c > 0 and for c = 0.
///
/// For c < 0 the principal-branch square root in the η transformation law
/// crosses its cut, so no value is returned.
pub fn eta_multiplier(m: &UnimodularMatrix) -> Result<Complex64> {
    let (a, b, c, d) = (m.a as i128, m.b as i128, m.c as i128, m.d as i128);
    if c == 0 {
        return Ok(zeta(b, 24));
    }
    if c < 0 {
        return Err(Error::Unsupported(format!(
            "eta multiplier for c = {c} < 0; conjugate by -I first"
        )));
    }
    let (sym, e) = if c % 2 != 0 {
        (kronecker(m.d, m.c.abs()), (a + d) * c - b * d * (c * c - 1) - 3 * c + 3)
    } else {
        (kronecker(m.c, m.d), a * c * (1 - d * d) + d * (b - c + 3))
    };
    Ok(zeta(e, 24) * f64::from(sym))
}

fn chi_matrix_uncached(m: &UnimodularMatrix) -> Result<[[Complex64; 3]; 3]> {
    let pre = Complex64::new(0.0, 1.0) * eta_multiplier(m)?.powu(9);
    let mut out = [[Complex64::new(0.0, 0.0); 3]; 3];
    for (mu, row) in out.iter_mut().enumerate() {
        for (nu, cell) in row.iter_mut().enumerate() {
            *cell = pre * psi3(m, mu as i64, nu as i64);
        }
    }
    Ok(out)
}

type ChiTable = RwLock<HashMap<UnimodularMatrix, [[Complex64; 3]; 3]>>;

fn chi_cache() -> &'static ChiTable {
    static CACHE: OnceLock<ChiTable> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// The full 3×3 table χ_M(μ, ν), memoized per matrix.
pub fn chi_matrix(m: &UnimodularMatrix) -> Result<[[Complex64; 3]; 3]> {
    if let Some(t) = chi_cache().read().expect("chi cache poisoned").get(m) {
        return Ok(*t);
    }
    let t = chi_matrix_uncached(m)?;
    // Concurrent writers insert identical values, so the race is benign.
    chi_cache().write().expect("chi cache poisoned").insert(*m, t);
    Ok(t)
}

/// χ_M(μ, ν) = i·ψ(M)⁹·ψ₃,M(μ, ν).
pub fn chi(m: &UnimodularMatrix, mu: i64, nu: i64) -> Result<Complex64> {
    Ok(chi_matrix(m)?[mu.rem_euclid(3) as usize][nu.rem_euclid(3) as usize])
}

/// Identifies one generalized Kloosterman sum K_k(μ, ν; n, r₁, r₂).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KloostermanKey {
    pub k: u64,
    pub mu: i64,
    pub nu: i64,
    /// 24·n_μ, exact.
    pub n_mu_24: i64,
    pub r1: i64,
    pub r2: i64,
}

impl KloostermanKey {
    /// Validates that 24·n_μ is an integer.
    pub fn new(k: u64, mu: FluxClass, nu: i64, n_mu: &BigRational, r1: i64, r2: i64) -> Result<Self> {
        let t = n_mu * BigRational::from_integer(24.into());
        if !t.is_integer() {
            return Err(Error::NonIntegralPhase(t.to_f64().unwrap_or(f64::NAN)));
        }
        let n24 = t
            .to_integer()
            .to_i64()
            .ok_or_else(|| Error::Overflow("24·n_mu does not fit in i64".into()))?;
        Self::from_parts(k, i64::from(mu.mu()), nu, n24, r1, r2)
    }

    /// Same as [`new`](Self::new) for a float n_μ; rejects 24·n_μ off an integer by more than 1e-9.
    pub fn with_n_mu_f64(k: u64, mu: FluxClass, nu: i64, n_mu: f64, r1: i64, r2: i64) -> Result<Self> {
        let t = 24.0 * n_mu;
        if (t - t.round()).abs() > 1e-9 || !t.is_finite() {
            return Err(Error::NonIntegralPhase(t));
        }
        Self::from_parts(k, i64::from(mu.mu()), nu, t.round() as i64, r1, r2)
    }

    pub fn from_parts(k: u64, mu: i64, nu: i64, n_mu_24: i64, r1: i64, r2: i64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain { function: "kloosterman", detail: "k must be at least 1".into() });
        }
        Ok(KloostermanKey { k, mu: mu.rem_euclid(3), nu: nu.rem_euclid(3), n_mu_24, r1, r2 })
    }

    /// Key with r₁, r₂ reduced mod 3k; the sum depends on them only through this.
    pub fn canonical(&self) -> Self {
        let m = 3 * self.k as i64;
        KloostermanKey { r1: self.r1.rem_euclid(m), r2: self.r2.rem_euclid(m), ..*self }
    }
}

/// Least nonnegative h′ with h·h′ ≡ -1 (mod k); 0 when k = 1.
pub fn hprime(h: i64, k: i64) -> i64 {
    if k == 1 {
        return 0;
    }
    let g = h.extended_gcd(&k);
    debug_assert_eq!(g.gcd, 1);
    (-g.x).rem_euclid(k)
}

/// One h-summand of K_k, with an explicit choice of h′.
pub fn kloosterman_summand(key: &KloostermanKey, h: i64, hp: i64) -> Result<Complex64> {
    let k = key.k as i64;
    let m = UnimodularMatrix::rademacher(h, hp, k)?;
    let (r1, r2) = (key.r1 as i128, key.r2 as i128);
    let qq = r1 * r1 + r2 * r2 + r1 * r2;
    let e = -(key.n_mu_24 as i128) * h as i128 - (9 + 8 * qq) * hp as i128;
    Ok(zeta(e, 24 * k as i128) * chi(&m, key.nu, key.mu)?)
}

/// K_k(μ, ν; n, r₁, r₂) = Σ_{h mod k, (h,k)=1} ζ_{24k}^{-24n_μh - (9+8Q(r))h′} χ_M(ν, μ).
pub fn kloosterman(key: &KloostermanKey) -> Result<Complex64> {
    let key = key.canonical();
    let k = key.k as i64;
    let mut terms = Vec::new();
    for h in 0..k {
        if h.gcd(&k) != 1 {
            continue;
        }
        terms.push(kloosterman_summand(&key, h, hprime(h, k))?);
    }
    Ok(crate::quadrature::neumaier_sum_complex(terms))
}

/// Persistent memo of Kloosterman sums, stored as exact f64 bit patterns.
#[derive(Debug, Default)]
pub struct KloostermanCache {
    path: Option<PathBuf>,
    entries: RwLock<BTreeMap<String, [u64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    version: u32,
    entries: BTreeMap<String, [u64; 2]>,
}

fn cache_key(key: &KloostermanKey) -> String {
    let c = key.canonical();
    format!("{},{},{},{},{},{}", c.k, c.mu, c.nu, c.n_mu_24, c.r1, c.r2)
}

impl KloostermanCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or prepares to create) a cache file.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let entries = if path.exists() {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::Cache(e.to_string()))?;
            let file: CacheFile =
                serde_json::from_str(&text).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
            if file.version != 1 {
                return Err(Error::Cache(format!("unsupported cache version {}", file.version)));
            }
            file.entries
        } else {
            BTreeMap::new()
        };
        Ok(KloostermanCache { path: Some(path), entries: RwLock::new(entries) })
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_or_compute(&self, key: &KloostermanKey) -> Result<Complex64> {
        let s = cache_key(key);
        if let Some(&[re, im]) = self.entries.read().expect("cache poisoned").get(&s) {
            return Ok(Complex64::new(f64::from_bits(re), f64::from_bits(im)));
        }
        let v = kloosterman(key)?;
        self.entries
            .write()
            .expect("cache poisoned")
            .insert(s, [v.re.to_bits(), v.im.to_bits()]);
        Ok(v)
    }

    /// Writes the cache back to its file, if it has one.
    pub fn save(&self) -> Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        let file = CacheFile { version: 1, entries: self.entries.read().expect("cache poisoned").clone() };
        let text = serde_json::to_string(&file).map_err(|e| Error::Cache(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))
    }
}

/// Evaluates through the cache when one is supplied.
pub fn kloosterman_with(cache: Option<&KloostermanCache>, key: &KloostermanKey) -> Result<Complex64> {
    match cache {
        Some(c) => c.get_or_compute(key),
        None => kloosterman(key),
    }
}
