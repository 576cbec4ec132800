//! Nakagami-m channel gains, order statistics, and the ordered densities
//! used by the fading averages.
//!
//! Gains are redrawn independently per transmitted symbol (fast flat fading),
//! matching the per-symbol averaging of the analytic formulas. Sampling takes
//! an explicit caller-owned RNG; density functions are pure.

use crate::error::{Error, Result};
use crate::special_math::{gamma, ln_gamma, reg_lower_gamma, reg_lower_gamma_inv, ScaledSeries};
use rand::Rng;
use rand_distr::Distribution;

/// Nakagami parameters plus the order-statistics context of one user.
///
/// `rank` counts from 1 = weakest of `n_users` i.i.d. links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingSpec {
    pub m: f64,
    pub omega: f64,
    pub n_users: usize,
    pub rank: usize,
}

impl FadingSpec {
    pub fn new(m: f64, omega: f64, n_users: usize, rank: usize) -> Result<Self> {
        if !(m >= 0.5) {
            return Err(Error::Domain(format!("Nakagami shape must satisfy m >= 0.5, got {m}")));
        }
        if !(omega > 0.0) {
            return Err(Error::Domain(format!("spread must satisfy omega > 0, got {omega}")));
        }
        if n_users == 0 || rank == 0 || rank > n_users {
            return Err(Error::Config(format!(
                "rank must lie in 1..={n_users}, got {rank}"
            )));
        }
        Ok(Self { m, omega, n_users, rank })
    }

    /// K_n = N!/((n-1)!(N-n)!), the order-statistics normalizer.
    pub fn order_factor(&self) -> f64 {
        let (n, r) = (self.n_users as f64, self.rank as f64);
        (ln_gamma(n + 1.0) - ln_gamma(r) - ln_gamma(n - r + 1.0)).exp()
    }
}

/// N channel gains sorted ascending, weakest first.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedGains {
    alphas: Vec<f64>,
}

impl OrderedGains {
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn gain(&self, rank: usize) -> f64 {
        self.alphas[rank - 1]
    }
}

/// One Nakagami-m draw: α = √X with X ~ Gamma(shape m, scale Ω/m).
pub fn sample_nakagami<R: Rng + ?Sized>(m: f64, omega: f64, rng: &mut R) -> Result<f64> {
    if !(m >= 0.5) {
        return Err(Error::Domain(format!("Nakagami shape must satisfy m >= 0.5, got {m}")));
    }
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("spread must satisfy omega > 0, got {omega}")));
    }
    let gamma_dist = rand_distr::Gamma::new(m, omega / m)
        .map_err(|e| Error::Config(format!("gamma sampler rejected parameters: {e}")))?;
    Ok(gamma_dist.sample(rng).sqrt())
}

/// N i.i.d. Nakagami draws sorted ascending.
pub fn sample_ordered<R: Rng + ?Sized>(
    n_users: usize,
    m: f64,
    omega: f64,
    rng: &mut R,
) -> Result<OrderedGains> {
    if n_users == 0 {
        return Err(Error::Config("need at least one user".into()));
    }
    let mut alphas = Vec::with_capacity(n_users);
    for _ in 0..n_users {
        alphas.push(sample_nakagami(m, omega, rng)?);
    }
    alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(OrderedGains { alphas })
}

/// Unordered Nakagami pdf f(α) = 2 m^m α^{2m-1} e^{-mα²/Ω} / (Ω^m Γ(m)).
pub fn nakagami_pdf(m: f64, omega: f64, alpha: f64) -> f64 {
    if alpha <= 0.0 {
        // The α → 0 limit diverges for m < 0.5, is finite at m = 0.5.
        return if alpha < 0.0 {
            0.0
        } else if m == 0.5 {
            (0.5f64.ln() * 0.5 - 0.5 * omega.ln() - ln_gamma(0.5)).exp() * 2.0
        } else {
            0.0
        };
    }
    let ln = (2.0 * m - 1.0) * alpha.ln() + m * (m / omega).ln() - m * alpha * alpha / omega
        - ln_gamma(m);
    2.0 * ln.exp()
}

/// Unordered Nakagami cdf F(α) = P(m, mα²/Ω).
pub fn nakagami_cdf(m: f64, omega: f64, alpha: f64) -> Result<f64> {
    if alpha <= 0.0 {
        return Ok(0.0);
    }
    reg_lower_gamma(m, m * alpha * alpha / omega)
}

/// Ordered pdf of the rank-n gain,
/// fₙ(α) = Kₙ f(α) F(α)^{n-1} (1-F(α))^{N-n}.
pub fn ordered_gain_pdf(spec: &FadingSpec, alpha: f64) -> Result<f64> {
    if alpha < 0.0 {
        return Ok(0.0);
    }
    let f = nakagami_pdf(spec.m, spec.omega, alpha);
    let cdf = nakagami_cdf(spec.m, spec.omega, alpha)?;
    let surv = (1.0 - cdf).max(0.0);
    Ok(spec.order_factor() * f * cdf.powi(spec.rank as i32 - 1)
        * surv.powi((spec.n_users - spec.rank) as i32))
}

/// Marginal cdf of the rank-n gain, P(α₍ₙ₎ ≤ x) = Σ_{j≥n} C(N,j) F^j (1-F)^{N-j}.
pub fn rank_cdf(spec: &FadingSpec, alpha: f64) -> Result<f64> {
    let p = nakagami_cdf(spec.m, spec.omega, alpha)?;
    Ok(binomial_tail(spec.n_users, spec.rank, p))
}

/// Quantile of the rank-n gain by double inversion: first the binomial tail
/// in the underlying cdf value, then the Nakagami quantile itself.
pub fn rank_quantile(spec: &FadingSpec, u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("quantile level must lie in [0,1], got {u}")));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    if u == 1.0 {
        return Ok(f64::INFINITY);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if binomial_tail(spec.n_users, spec.rank, mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = 0.5 * (lo + hi);
    let x = reg_lower_gamma_inv(spec.m, p)?;
    Ok((x * spec.omega / spec.m).sqrt())
}

fn binomial_tail(n: usize, rank: usize, p: f64) -> f64 {
    let mut acc = 0.0;
    for j in rank..=n {
        let ln_c = ln_gamma(n as f64 + 1.0) - ln_gamma(j as f64 + 1.0) - ln_gamma((n - j) as f64 + 1.0);
        let term = if p <= 0.0 {
            if j == 0 { 1.0 } else { 0.0 }
        } else if p >= 1.0 {
            if j == n { 1.0 } else { 0.0 }
        } else {
            (ln_c + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()).exp()
        };
        acc += term;
    }
    acc.min(1.0)
}

/// Ordered pdf of γ = α²·(scale) with mean `gamma_bar`, expanded through the
/// incomplete-gamma power series:
///
/// fₙ(γ) = Kₙ/Γ(m) Σ_{k=0}^{N-n} C(N-n,k)(-1)^k (m/γ̄)^{m(n+k)} e^{-m(n+k)γ/γ̄}
///         Σᵢ Sᵢ γ^{i+m(n+k)-1}
///
/// with the series built for μ = n+k-1 at rate m/γ̄. The γ exponent carries
/// m(n+k)-1 so that the N = 1 case reduces to the plain Gamma density and the
/// expansion integrates to one for every m.
pub fn ordered_gamma_pdf(
    spec: &FadingSpec,
    gamma_bar: f64,
    gamma_val: f64,
    tol: f64,
    max_terms: usize,
) -> Result<f64> {
    if !(gamma_bar > 0.0) {
        return Err(Error::Domain(format!("gamma_bar must be positive, got {gamma_bar}")));
    }
    if gamma_val < 0.0 {
        return Ok(0.0);
    }
    let (m, n) = (spec.m, spec.rank as f64);
    let rate = m / gamma_bar;
    let x = rate * gamma_val;
    if gamma_val == 0.0 {
        // Only the k = 0 term can contribute at the origin.
        return Ok(match (m * n - 1.0).partial_cmp(&0.0).unwrap() {
            std::cmp::Ordering::Greater => 0.0,
            std::cmp::Ordering::Equal => spec.order_factor() / gamma(m) * rate,
            std::cmp::Ordering::Less => f64::INFINITY,
        });
    }
    let kmax = spec.n_users - spec.rank;
    let mut total = 0.0;
    for k in 0..=kmax {
        let mu = n + k as f64 - 1.0;
        let big_m = m * (n + k as f64);
        // Terms are accumulated through ratio updates so that the x^i and
        // coefficient magnitudes never overflow or underflow separately.
        let mut coeffs = ScaledSeries::new(mu, m);
        let mut prev = coeffs.coeff(0);
        let mut term = prev;
        let mut series = term;
        let mut converged = false;
        for i in 1..=max_terms {
            let c = coeffs.coeff(i);
            if prev == 0.0 || term == 0.0 {
                converged = true;
                break;
            }
            term *= x * (c / prev);
            prev = c;
            series += term;
            if term.abs() <= tol * series.abs() {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence { terms_used: max_terms });
        }
        let ln_pref = big_m * rate.ln() + (big_m - 1.0) * gamma_val.ln() - (n + k as f64) * x;
        let binom = (ln_gamma(kmax as f64 + 1.0)
            - ln_gamma(k as f64 + 1.0)
            - ln_gamma((kmax - k) as f64 + 1.0))
        .exp();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * binom * (ln_pref + series.ln()).exp();
    }
    Ok((spec.order_factor() / gamma(m)) * total)
}
