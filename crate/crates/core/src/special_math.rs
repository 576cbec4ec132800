//! Scalar special functions and quadrature used by the analytic BER formulas.
//!
//! Everything here is pure: no global state, safe to call from any thread.

use crate::error::{Error, Result};
use std::f64::consts::{FRAC_PI_2, PI};

/// Default relative term tolerance for infinite-series truncation.
pub const DEFAULT_SERIES_TOL: f64 = 1e-12;
/// Default cap on series terms before flagging non-convergence.
pub const DEFAULT_MAX_TERMS: usize = 500;

// ---------------------------------------------------------------------------
// Gamma-family wrappers
// ---------------------------------------------------------------------------

/// Natural log of |Γ(x)| for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

/// Γ(x) for moderate positive x.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

// ---------------------------------------------------------------------------
// Gaussian Q function
// ---------------------------------------------------------------------------

/// Tail probability of the standard normal, Q(x) = P(Z > x).
///
/// Evaluated through the complementary error function, which stays accurate
/// deep into the tail (Q(40) underflows gracefully toward zero).
pub fn q_func(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("q_func requires finite input, got {x}")));
    }
    Ok(0.5 * libm::erfc(x / std::f64::consts::SQRT_2))
}

/// Q via the finite-interval representation
/// Q(x) = (1/π) ∫₀^{π/2} exp(−x²/(2 sin²ψ)) dψ, x ≥ 0,
/// evaluated with the supplied quadrature rule.
///
/// The integrand rises from 0 to 1 across ψ ∈ [x/8, 8x], a boundary layer
/// no fixed node set can resolve for every x. The rule is therefore applied
/// on a geometric panel decomposition of (0, π/2) that tracks the layer,
/// which keeps the result within machine precision of Q for x ≤ 8 even with
/// small rules.
pub fn q_func_craig(x: f64, rule: &QuadratureRule) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("q_func_craig requires x >= 0, got {x}")));
    }
    let half_x2 = 0.5 * x * x;
    let integrand = |psi: f64| {
        let s = psi.sin();
        (-half_x2 / (s * s)).exp()
    };
    let mut bounds = vec![0.0f64];
    if x > 0.0 {
        let mut b = (x / 8.0).min(FRAC_PI_2 / 2.0);
        while b < FRAC_PI_2 / 2.0 {
            bounds.push(b);
            b *= 2.0;
        }
    }
    bounds.push(FRAC_PI_2 / 2.0);
    bounds.push(FRAC_PI_2);
    let mut acc = 0.0;
    for win in bounds.windows(2) {
        let (a, b) = (win[0], win[1]);
        if b <= a {
            continue;
        }
        // Rescale the rule from (0, pi/2) onto the panel.
        let scale = (b - a) / FRAC_PI_2;
        for (&psi, &w) in rule.nodes.iter().zip(rule.weights.iter()) {
            acc += w * scale * integrand(a + psi * scale);
        }
    }
    Ok(acc / PI)
}

// ---------------------------------------------------------------------------
// Incomplete gamma
// ---------------------------------------------------------------------------

/// Lower incomplete gamma Φ(a, z) = ∫₀ᶻ t^{a−1} e^{−t} dt, a > 0, z ≥ 0.
pub fn lower_incomplete_gamma(a: f64, z: f64) -> Result<f64> {
    Ok(reg_lower_gamma(a, z)? * gamma(a))
}

/// Regularized lower incomplete gamma P(a, z) = Φ(a, z)/Γ(a) ∈ [0, 1].
pub fn reg_lower_gamma(a: f64, z: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("incomplete gamma requires a > 0, got {a}")));
    }
    if !(z >= 0.0) {
        return Err(Error::Domain(format!("incomplete gamma requires z >= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z < a + 1.0 {
        Ok(lower_gamma_series(a, z))
    } else {
        Ok(1.0 - upper_gamma_cf(a, z))
    }
}

/// Regularized upper incomplete gamma Q(a, z) = 1 − P(a, z).
pub fn reg_upper_gamma(a: f64, z: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("incomplete gamma requires a > 0, got {a}")));
    }
    if !(z >= 0.0) {
        return Err(Error::Domain(format!("incomplete gamma requires z >= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if z < a + 1.0 {
        Ok(1.0 - lower_gamma_series(a, z))
    } else {
        Ok(upper_gamma_cf(a, z))
    }
}

/// Inverse of P(a, ·): smallest z with P(a, z) = p, found by bisection.
pub fn reg_lower_gamma_inv(a: f64, p: f64) -> Result<f64> {
    if !(a > 0.0) || !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("gamma quantile needs a > 0, p in [0,1]; got a={a}, p={p}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    let mut hi = a + 1.0;
    while reg_lower_gamma(a, hi)? < p {
        hi *= 2.0;
        if hi > 1e12 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if reg_lower_gamma(a, mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn lower_gamma_series(a: f64, z: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut denom = a;
    for _ in 0..400 {
        denom += 1.0;
        term *= z / denom;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    (a * z.ln() - z - ln_gamma(a)).exp() * sum
}

// Modified Lentz continued fraction for Q(a, z), valid for z >= a + 1.
fn upper_gamma_cf(a: f64, z: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = z + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..400 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (a * z.ln() - z - ln_gamma(a)).exp() * h
}

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature on (0, pi/2)
// ---------------------------------------------------------------------------

/// Nodes and weights of a Gauss-Legendre rule mapped onto (0, π/2).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// ∫₀^{π/2} f(ψ) dψ under this rule.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss-Legendre rule with `n` nodes on (0, π/2), exact for polynomials of
/// degree ≤ 2n−1 in the mapped variable.
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule> {
    if n < 2 {
        return Err(Error::Domain(format!("quadrature needs at least 2 nodes, got {n}")));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev initial guess for the i-th root of P_n, refined by Newton.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map [-1, 1] onto (0, pi/2); roots come out in descending order.
        nodes[n - 1 - i] = FRAC_PI_2 * 0.5 * (1.0 + x);
        weights[n - 1 - i] = FRAC_PI_2 * 0.5 * w;
        nodes[i] = FRAC_PI_2 * 0.5 * (1.0 - x);
        weights[i] = FRAC_PI_2 * 0.5 * w;
    }
    Ok(QuadratureRule { nodes, weights })
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

// ---------------------------------------------------------------------------
// Power series of the lower incomplete gamma function
// ---------------------------------------------------------------------------

/// Coefficients S₀..S_I of the expansion
/// Φ(m, rate·y)^μ = (rate·y)^{mμ} Γ(m)^μ e^{−μ·rate·y} Σᵢ Sᵢ yⁱ
/// built from a_z = rateᶻ/Γ(m+z+1) through the power-of-a-series recurrence
/// S₀ = a₀^μ, Sᵢ = (1/(i·a₀)) Σ_{z=1..i} (z(μ+1)−i) a_z S_{i−z}.
#[derive(Debug, Clone)]
pub struct SeriesCoefficients {
    pub mu: f64,
    pub m: f64,
    pub rate: f64,
    pub values: Vec<f64>,
    pub truncation_index: usize,
    pub converged: bool,
}

impl SeriesCoefficients {
    /// Reconstruct Φ(m, rate·y)^μ from the stored coefficients.
    pub fn phi_power(&self, y: f64) -> f64 {
        let x = self.rate * y;
        let series: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &s)| s * y.powi(i as i32))
            .sum();
        (x.ln() * self.m * self.mu + self.mu * ln_gamma(self.m) - self.mu * x).exp() * series
    }
}

/// Incrementally generated coefficients of the μ-th power of the scaled
/// series Σ_z ã_z yᶻ with ã_z = 1/Γ(m+z+1). The unscaled coefficients
/// follow as Sᵢ = S̃ᵢ·rateⁱ, which keeps every intermediate bounded for
/// extreme rates; terms are produced on demand so callers pay only for the
/// indices their own stopping rule reaches.
///
/// Integer powers are built by repeated self-convolution: all summands are
/// positive, so the coefficients stay accurate down to underflow depth.
/// The power-of-a-series recurrence, which mixes signs and loses all
/// precision a few hundred terms in, is kept only for fractional powers.
pub(crate) struct ScaledSeries {
    mu: f64,
    m: f64,
    a: Vec<f64>,
    /// For integer μ ≥ 2: powers[p] holds the coefficients of (Σ ã yᶻ)^(p+2).
    powers: Vec<Vec<f64>>,
    /// For fractional μ: the recurrence outputs.
    s: Vec<f64>,
}

impl ScaledSeries {
    pub(crate) fn new(mu: f64, m: f64) -> Self {
        let a0 = (-ln_gamma(m + 1.0)).exp();
        let int_mu = mu >= 0.0 && mu.fract() == 0.0 && mu <= 64.0;
        let powers = if int_mu {
            (0..(mu as usize).saturating_sub(1)).map(|_| Vec::new()).collect()
        } else {
            Vec::new()
        };
        Self { mu, m, a: vec![a0], powers, s: vec![a0.powf(mu)] }
    }

    fn base(&mut self, z: usize) -> f64 {
        while self.a.len() <= z {
            let zz = self.a.len() as f64;
            self.a.push((-ln_gamma(self.m + zz + 1.0)).exp());
        }
        self.a[z]
    }

    pub(crate) fn coeff(&mut self, i: usize) -> f64 {
        if self.mu == 0.0 {
            return if i == 0 { 1.0 } else { 0.0 };
        }
        if self.mu == 1.0 {
            return self.base(i);
        }
        if !self.powers.is_empty() {
            self.base(i);
            for p in 0..self.powers.len() {
                while self.powers[p].len() <= i {
                    let next = self.powers[p].len();
                    let mut acc = 0.0;
                    for z in 0..=next {
                        let lower = if p == 0 { self.a[z] } else { self.powers[p - 1][z] };
                        acc += lower * self.a[next - z];
                    }
                    self.powers[p].push(acc);
                }
            }
            return self.powers.last().unwrap()[i];
        }
        while self.s.len() <= i {
            let next = self.s.len();
            self.base(next);
            let mut acc = 0.0;
            for z in 1..=next {
                acc += (z as f64 * (self.mu + 1.0) - next as f64) * self.a[z] * self.s[next - z];
            }
            self.s.push(acc / (next as f64 * self.a[0]));
        }
        self.s[i]
    }
}

/// The series coefficients Sᵢ with truncation control.
///
/// Convergence is judged on the unit-argument witness Σᵢ Sᵢ: the recursion
/// stops once |Sᵢ| drops below `tol` relative to the accumulated sum, so a
/// large `rate` (a low averaging scale) needs proportionally many terms.
/// Callers that fold the coefficients into larger sums apply their own
/// term-level stopping rule on top.
pub fn series_s(mu: f64, m: f64, rate: f64, tol: f64, max_terms: usize) -> Result<SeriesCoefficients> {
    if !(mu >= 0.0) || !(m > 0.0) || !(rate > 0.0) {
        return Err(Error::Domain(format!(
            "series_s requires mu >= 0, m > 0, rate > 0; got mu={mu}, m={m}, rate={rate}"
        )));
    }
    if !(tol > 0.0) || max_terms < 1 {
        return Err(Error::Config(format!(
            "series_s requires tol > 0 and max_terms >= 1; got tol={tol}, max_terms={max_terms}"
        )));
    }
    let mut scaled = ScaledSeries::new(mu, m);
    let mut values = Vec::new();
    let mut running = 0.0;
    let mut truncation_index = max_terms;
    let mut converged = mu == 0.0;
    let mut rate_pow = 1.0;
    for i in 0..=max_terms {
        let s = scaled.coeff(i) * rate_pow;
        values.push(s);
        rate_pow *= rate;
        running += s.abs();
        if mu == 0.0 {
            break;
        }
        if i > 0 && s.abs() <= tol * running && running.is_finite() {
            truncation_index = i;
            converged = true;
            break;
        }
    }
    if mu == 0.0 {
        truncation_index = 0;
    }
    Ok(SeriesCoefficients { mu, m, rate, values, truncation_index, converged })
}
