//! Fixed-order quadrature rules and deterministic compensated summation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    Interval,
    EllipticRegion,
    RealLine,
    RealPlane,
}

/// Nodes and positive weights in `D` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<const D: usize> {
    pub kind: RuleKind,
    pub order: usize,
    pub nodes: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    /// For elliptic-region rules, Q(w) at each node computed from the radial
    /// coordinate directly (so that 1 - Q carries no cancellation error).
    pub q_values: Vec<f64>,
}

pub type Rule1 = QuadratureRule<1>;
pub type Rule2 = QuadratureRule<2>;

impl<const D: usize> QuadratureRule<D> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Σ wᵢ f(xᵢ), evaluated in parallel and reduced in node order.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(usize, &[f64; D]) -> f64 + Sync,
    {
        let terms: Vec<f64> = self
            .nodes
            .par_iter()
            .enumerate()
            .map(|(i, x)| self.weights[i] * f(i, x))
            .collect();
        neumaier_sum(terms)
    }

    pub fn integrate_complex<F>(&self, f: F) -> Complex64
    where
        F: Fn(usize, &[f64; D]) -> Complex64 + Sync,
    {
        let terms: Vec<Complex64> = self
            .nodes
            .par_iter()
            .enumerate()
            .map(|(i, x)| f(i, x) * self.weights[i])
            .collect();
        neumaier_sum_complex(terms)
    }
}

/// Neumaier's variant of Kahan summation, in iteration order.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn neumaier_sum_complex<I: IntoIterator<Item = Complex64>>(values: I) -> Complex64 {
    let (re, im): (Vec<f64>, Vec<f64>) = values.into_iter().map(|z| (z.re, z.im)).unzip();
    Complex64::new(neumaier_sum(re), neumaier_sum(im))
}

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
///
/// Nodes are ascending and exactly antisymmetric.
pub fn gauss_legendre(order: usize) -> Result<Rule1> {
    if order == 0 {
        return Err(Error::Config("quadrature order must be at least 1".into()));
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // i-th largest node
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule {
        kind: RuleKind::Interval,
        order,
        nodes: nodes.into_iter().map(|x| [x]).collect(),
        weights,
        q_values: Vec::new(),
    })
}

/// (P_n(x), P_n'(x)) via the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre mapped to [lo, hi].
pub fn gauss_legendre_on(order: usize, lo: f64, hi: f64) -> Result<Rule1> {
    let base = gauss_legendre(order)?;
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    Ok(QuadratureRule {
        kind: RuleKind::Interval,
        order,
        nodes: base.nodes.iter().map(|&[x]| [mid + half * x]).collect(),
        weights: base.weights.iter().map(|w| w * half).collect(),
        q_values: Vec::new(),
    })
}

/// Rule on {Q(w₁,w₂) ≤ 1}, Q = w₁² + w₂² + w₁w₂.
///
/// The unit disk is covered by Gauss–Legendre in s = ρ² times the trapezoid
/// rule in angle, then mapped through w₂ = 2u₂/√3, w₁ = u₁ - u₂/√3.
/// Nodes are ordered radial-major: node `i` has radial index `i / angular_order`.
pub fn elliptic_region_rule(radial_order: usize, angular_order: usize) -> Result<Rule2> {
    if angular_order == 0 {
        return Err(Error::Config("angular order must be at least 1".into()));
    }
    let radial = gauss_legendre_on(radial_order, 0.0, 1.0)?;
    let sqrt3 = 3f64.sqrt();
    let dtheta = 2.0 * PI / angular_order as f64;
    let jac = 0.5 * (2.0 / sqrt3) * dtheta;
    let cap = radial_order * angular_order;
    let mut nodes = Vec::with_capacity(cap);
    let mut weights = Vec::with_capacity(cap);
    let mut q_values = Vec::with_capacity(cap);
    for (&[s], &ws) in radial.nodes.iter().zip(&radial.weights) {
        let rho = s.sqrt();
        for j in 0..angular_order {
            let th = dtheta * (j as f64 + 0.5);
            let (u2, u1) = th.sin_cos();
            let (u1, u2) = (rho * u1, rho * u2);
            nodes.push([u1 - u2 / sqrt3, 2.0 * u2 / sqrt3]);
            weights.push(ws * jac);
            q_values.push(s);
        }
    }
    Ok(QuadratureRule {
        kind: RuleKind::EllipticRegion,
        order: radial_order,
        nodes,
        weights,
        q_values,
    })
}

/// Gauss–Legendre on [-W, W].
pub fn truncated_line_rule(half_width: f64, order: usize) -> Result<Rule1> {
    check_width(half_width)?;
    let mut r = gauss_legendre_on(order, -half_width, half_width)?;
    r.kind = RuleKind::RealLine;
    Ok(r)
}

/// Tensor Gauss–Legendre on the square [-W, W]².
pub fn truncated_plane_rule(half_width: f64, order: usize) -> Result<Rule2> {
    check_width(half_width)?;
    let line = gauss_legendre_on(order, -half_width, half_width)?;
    let mut nodes = Vec::with_capacity(order * order);
    let mut weights = Vec::with_capacity(order * order);
    for (&[a], &wa) in line.nodes.iter().zip(&line.weights) {
        for (&[b], &wb) in line.nodes.iter().zip(&line.weights) {
            nodes.push([a, b]);
            weights.push(wa * wb);
        }
    }
    Ok(QuadratureRule { kind: RuleKind::RealPlane, order, nodes, weights, q_values: Vec::new() })
}

/// A two-dimensional rule organised by lines of constant w₁.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberedRule {
    pub fibers: Vec<Fiber>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fiber {
    pub w1: f64,
    pub weight: f64,
    pub w2: Vec<f64>,
    pub w2_weights: Vec<f64>,
}

impl FiberedRule {
    pub fn len(&self) -> usize {
        self.fibers.iter().map(|f| f.w2.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Σ w f over the rule, where `f(w₁, w₂s)` returns the values along one fibre.
    /// Fibres run in parallel; the reduction order is fixed.
    pub fn integrate_fibers<F>(&self, f: F) -> Complex64
    where
        F: Fn(f64, &[f64]) -> Vec<Complex64> + Sync,
    {
        let per_fiber: Vec<Complex64> = self
            .fibers
            .par_iter()
            .map(|fib| {
                let vals = f(fib.w1, &fib.w2);
                fib.weight * neumaier_sum_complex(vals.iter().zip(&fib.w2_weights).map(|(v, &w)| v * w))
            })
            .collect();
        neumaier_sum_complex(per_fiber)
    }
}

/// Fibred rule on {Q(w) ≤ R}.
///
/// The outer variable is w₁ = 2√(R/3)·sin θ, which absorbs the square-root
/// vanishing of the fibre length at the ends; each fibre carries its own
/// Gauss–Legendre rule in w₂. An empty rule is returned for R = 0.
pub fn elliptic_fibered_rule(radius_sq: f64, outer_order: usize, inner_order: usize) -> Result<FiberedRule> {
    if !(radius_sq >= 0.0 && radius_sq.is_finite()) {
        return Err(Error::Config(format!("region radius² {radius_sq} must be finite and nonnegative")));
    }
    if radius_sq == 0.0 {
        return Ok(FiberedRule { fibers: Vec::new() });
    }
    let outer = gauss_legendre_on(outer_order, -0.5 * PI, 0.5 * PI)?;
    let inner = gauss_legendre(inner_order)?;
    let w1max = 2.0 * (radius_sq / 3.0).sqrt();
    let fibers = outer
        .nodes
        .iter()
        .zip(&outer.weights)
        .map(|(&[th], &wt)| {
            let w1 = w1max * th.sin();
            let half = radius_sq.sqrt() * th.cos();
            let mid = -0.5 * w1;
            Fiber {
                w1,
                weight: wt * w1max * th.cos(),
                w2: inner.nodes.iter().map(|&[x]| mid + half * x).collect(),
                w2_weights: inner.weights.iter().map(|w| w * half).collect(),
            }
        })
        .collect();
    Ok(FiberedRule { fibers })
}

/// The tensor rule on [-W, W]² in fibred form.
pub fn square_fibered_rule(half_width: f64, order: usize) -> Result<FiberedRule> {
    check_width(half_width)?;
    let line = gauss_legendre_on(order, -half_width, half_width)?;
    let w2: Vec<f64> = line.nodes.iter().map(|&[x]| x).collect();
    let fibers = w2
        .iter()
        .zip(&line.weights)
        .map(|(&w1, &weight)| Fiber { w1, weight, w2: w2.clone(), w2_weights: line.weights.clone() })
        .collect();
    Ok(FiberedRule { fibers })
}

fn check_width(w: f64) -> Result<()> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::Config(format!("half width {w} must be positive and finite")));
    }
    Ok(())
}

/// Half width W with e^{-rate·W²} below `eps`.
pub fn gaussian_half_width(rate: f64, eps: f64) -> f64 {
    (-eps.ln() / rate).sqrt()
}

/// Quadrature orders shared across the library.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadConfig {
    pub interval_order: usize,
    pub radial_order: usize,
    pub angular_order: usize,
    pub mordell_order: usize,
    pub tail_eps: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            interval_order: 200,
            radial_order: 120,
            angular_order: 160,
            mordell_order: 400,
            tail_eps: 1e-16,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("interval_order", self.interval_order),
            ("radial_order", self.radial_order),
            ("angular_order", self.angular_order),
            ("mordell_order", self.mordell_order),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("quad.{name} must be at least 1")));
            }
        }
        if !(self.tail_eps > 0.0 && self.tail_eps < 1.0) {
            return Err(Error::Config("quad.tail_eps must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Every order doubled; used by convergence checks.
    pub fn doubled(&self) -> Self {
        QuadConfig {
            interval_order: 2 * self.interval_order,
            radial_order: 2 * self.radial_order,
            angular_order: 2 * self.angular_order,
            mordell_order: 2 * self.mordell_order,
            tail_eps: self.tail_eps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn low_order_exactness() {
        let r = gauss_legendre(1).unwrap();
        assert_eq!(r.nodes, vec![[0.0]]);
        assert!((r.weights[0] - 2.0).abs() < 1e-15);
        let r = gauss_legendre(2).unwrap();
        let v = r.integrate(|_, &[x]| x * x);
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        assert!(gauss_legendre(0).is_err());
    }

    #[test]
    fn weights_sum_and_positivity() {
        for n in [1, 2, 3, 7, 50, 200, 401, 800] {
            let r = gauss_legendre(n).unwrap();
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!((neumaier_sum(r.weights.iter().copied()) - 2.0).abs() < 1e-13, "n={n}");
            assert!(r.nodes.windows(2).all(|p| p[0][0] < p[1][0]));
            assert!(r.nodes.iter().all(|&[x]| (-1.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn boundary_factor_integral() {
        // √π Γ(9/4)/Γ(11/4)
        let gamma_9_4 = 1.133_003_096_319_76;
        let gamma_11_4 = 1.608_359_421_985_546;
        let exact = PI.sqrt() * gamma_9_4 / gamma_11_4;
        assert!((exact - 1.248_598_835).abs() < 1e-9);
        let r = gauss_legendre(200).unwrap();
        let v = r.integrate(|_, &[x]| crate::special::boundary_weight(x * x));
        assert!((v - exact).abs() < 1e-10, "{v} vs {exact}");
    }

    #[test]
    fn elliptic_area_and_odd() {
        let r = elliptic_region_rule(40, 64).unwrap();
        let area = r.integrate(|_, _| 1.0);
        assert!((area - 2.0 * PI / 3f64.sqrt()).abs() < 1e-13);
        assert!((area - 3.62760).abs() < 1e-5);
        let odd = r.integrate(|_, &[a, b]| a + a * a * a * b * b + b * b * b);
        assert!(odd.abs() < 1e-14);
        for (i, &[a, b]) in r.nodes.iter().enumerate() {
            let q = a * a + b * b + a * b;
            assert!((q - r.q_values[i]).abs() < 1e-14);
            assert!(q <= 1.0 + 1e-14);
        }
        // ∫∫ Q over the region = (∫ s ds dθ)·2/√3·(1/2) = π/√3
        let mq = r.integrate(|i, _| r.q_values[i]);
        assert!((mq - PI / 3f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn gaussian_integrals() {
        let w = gaussian_half_width(PI / 6.0, 1e-16);
        let r = truncated_line_rule(w, 200).unwrap();
        let v = r.integrate(|_, &[x]| (-PI * x * x / 6.0).exp());
        assert!((v - 6f64.sqrt()).abs() < 1e-13);
        let odd = r.integrate(|_, &[x]| x * (-PI * x * x / 6.0).exp());
        assert!(odd.abs() < 1e-15);

        // ∫ e^{-Q} = π/√det(M) with M = (1, 1/2; 1/2, 1)
        let w = gaussian_half_width(0.75, 1e-17);
        let p = truncated_plane_rule(w, 120).unwrap();
        let v = p.integrate(|_, &[a, b]| (-(a * a + b * b + a * b)).exp());
        assert!((v - 2.0 * PI / 3f64.sqrt()).abs() < 1e-12);

        // scaled by 2π/3: π/√det(2πM/3) = √3
        let w = gaussian_half_width(0.75 * 2.0 * PI / 3.0, 1e-17);
        let p = truncated_plane_rule(w, 120).unwrap();
        let v = p.integrate(|_, &[a, b]| (-2.0 * PI * (a * a + b * b + a * b) / 3.0).exp());
        assert!((v - 3f64.sqrt()).abs() < 1e-12, "{v}");
    }

    #[test]
    fn compensated_sum() {
        let v = vec![1.0, 1e100, 1.0, -1e100];
        assert_eq!(neumaier_sum(v), 2.0);
    }

    #[test]
    fn config_validation() {
        assert!(QuadConfig::default().validate().is_ok());
        let bad = QuadConfig { radial_order: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = QuadConfig { tail_eps: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn polynomial_exactness(n in 1usize..40, deg_frac in 0.0f64..1.0) {
            let deg = ((2 * n - 1) as f64 * deg_frac) as i32;
            let r = gauss_legendre(n).unwrap();
            let v = r.integrate(|_, &[x]| x.powi(deg));
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            prop_assert!((v - exact).abs() < 1e-13);
        }

        #[test]
        fn deterministic(n in 1usize..300) {
            let a = gauss_legendre(n).unwrap();
            let b = gauss_legendre(n).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn fibered_rules() {
        // ∫_{Q≤R} 1 = 2πR/√3 and ∫_{Q≤R} Q = πR²/√3.
        let r = elliptic_fibered_rule(1.125, 40, 40).unwrap();
        let one = r.integrate_fibers(|_, w2| vec![Complex64::new(1.0, 0.0); w2.len()]);
        assert!((one.re - 2.0 * PI * 1.125 / 3f64.sqrt()).abs() < 1e-12);
        let q = r.integrate_fibers(|w1, w2| w2.iter().map(|&b| Complex64::new(w1 * w1 + w1 * b + b * b, 0.0)).collect());
        assert!((q.re - PI * 1.125f64.powi(2) / 3f64.sqrt()).abs() < 1e-12);
        assert!(elliptic_fibered_rule(0.0, 4, 4).unwrap().is_empty());
        let sq = square_fibered_rule(2.0, 30).unwrap();
        assert_eq!(sq.len(), 900);
        let g = sq.integrate_fibers(|w1, w2| w2.iter().map(|&b| Complex64::new((-(w1 * w1 + b * b)).exp(), 0.0)).collect());
        assert!((g.re - PI * erf_squared(2.0)).abs() < 1e-10);
    }

    /// erf(x)² via a Gauss–Legendre integral of e^{-t²}.
    fn erf_squared(x: f64) -> f64 {
        let r = gauss_legendre_on(60, 0.0, x).unwrap();
        let e = r.integrate(|_, &[t]| (-t * t).exp()) * 2.0 / PI.sqrt();
        e * e
    }
}
