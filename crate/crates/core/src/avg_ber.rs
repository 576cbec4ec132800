//! Fading-averaged BER: the general Nakagami series form, its closed
//! Rayleigh reductions, and a stratified numeric averaging oracle.
//!
//! The per-case building block is the ordered average E[Q(√γ)] for the
//! rank-n user, expanded through the incomplete-gamma power series and the
//! finite-interval Q representation:
//!
//! Kₙ/(πΓ(m)) Σ_k C(N−n,k)(−1)^k (m/γ̄)^{m(n+k)}
//!   Σᵢ Sᵢ ∫₀^{π/2} Γ(i+m(n+k)) / (1/(2sin²ψ) + m(n+k)/γ̄)^{i+m(n+k)} dψ
//!
//! with Sᵢ built for μ = n+k−1 at rate m/γ̄. The gamma-function argument
//! carries i+m(n+k) so that the k-th component is the exact integral of the
//! expanded rank density against Q; with that choice the series reproduces
//! the closed Rayleigh forms at m = 1 and tracks simulation for every m.

use crate::error::{Error, Result};
use crate::exact_cond_ber::{self, formula};
use crate::fading::{ordered_gain_pdf, rank_cdf, rank_quantile, FadingSpec};
use crate::model::{gamma_catalog, PowerAllocation};
use crate::special_math::{
    gauss_legendre, ln_gamma, QuadratureRule, ScaledSeries, DEFAULT_MAX_TERMS, DEFAULT_SERIES_TOL,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default Gauss-Legendre node count for the ψ integrals.
pub const DEFAULT_NODES: usize = 64;

/// Inputs of one fading-averaged BER evaluation. Eb/N0 = 1/N0.
#[derive(Debug, Clone)]
pub struct AvgBerSpec {
    pub alloc: PowerAllocation,
    pub user: usize,
    pub m: f64,
    pub omega: f64,
    pub n0: f64,
    pub tol: f64,
    pub max_terms: usize,
    pub nodes: usize,
}

impl AvgBerSpec {
    pub fn new(alloc: PowerAllocation, user: usize, m: f64, omega: f64, ebn0_db: f64) -> Result<Self> {
        if user == 0 || user > alloc.n_users() {
            return Err(Error::Config(format!("user must lie in 1..={}", alloc.n_users())));
        }
        if !(m >= 0.5) || !(omega > 0.0) {
            return Err(Error::Domain(format!("need m >= 0.5 and omega > 0, got m={m}, omega={omega}")));
        }
        if !ebn0_db.is_finite() {
            return Err(Error::Domain(format!("Eb/N0 must be finite, got {ebn0_db} dB")));
        }
        Ok(Self {
            alloc,
            user,
            m,
            omega,
            n0: 10f64.powf(-ebn0_db / 10.0),
            tol: DEFAULT_SERIES_TOL,
            max_terms: DEFAULT_MAX_TERMS,
            nodes: DEFAULT_NODES,
        })
    }

    pub fn with_controls(mut self, tol: f64, max_terms: usize, nodes: usize) -> Result<Self> {
        if !(tol > 0.0) || max_terms == 0 {
            return Err(Error::Config(format!("need tol > 0 and max_terms >= 1, got {tol}, {max_terms}")));
        }
        if nodes < 8 {
            return Err(Error::Config(format!("need at least 8 quadrature nodes, got {nodes}")));
        }
        self.tol = tol;
        self.max_terms = max_terms;
        self.nodes = nodes;
        Ok(self)
    }

    /// Per-dimension noise variance σ² = N0/2.
    pub fn sigma2(&self) -> f64 {
        self.n0 / 2.0
    }
}

/// How an averaged value was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum AvgMethod {
    Series,
    RayleighClosed,
    NumericOracle,
}

/// An averaged BER value with its convergence bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvgBerResult {
    pub value: f64,
    pub converged: bool,
    pub terms_used: usize,
    pub method: AvgMethod,
    /// Set when the value leaves [0, 1]; the audited three-user weight
    /// vectors can produce that at low SNR. Values are never clamped.
    pub anomalous: bool,
}

impl AvgBerResult {
    fn new(value: f64, converged: bool, terms_used: usize, method: AvgMethod) -> Self {
        Self { value, converged, terms_used, method, anomalous: !(0.0..=1.0).contains(&value) }
    }
}

// ---------------------------------------------------------------------------
// Series form
// ---------------------------------------------------------------------------

struct TermEval {
    value: f64,
    converged: bool,
    terms_used: usize,
}

/// Ordered average E[Q(√γ)] for the rank-n user of N, at averaging scale
/// `gamma_bar`, through the general series form.
pub fn avg_term_general(
    n_users: usize,
    rank: usize,
    gamma_bar: f64,
    m: f64,
    tol: f64,
    max_terms: usize,
    rule: &QuadratureRule,
) -> Result<AvgBerResult> {
    let t = avg_term_impl(n_users, rank, gamma_bar, m, tol, max_terms, rule)?;
    Ok(AvgBerResult::new(t.value, t.converged, t.terms_used, AvgMethod::Series))
}

fn avg_term_impl(
    n_users: usize,
    rank: usize,
    gamma_bar: f64,
    m: f64,
    tol: f64,
    max_terms: usize,
    rule: &QuadratureRule,
) -> Result<TermEval> {
    if rank == 0 || rank > n_users {
        return Err(Error::Config(format!("rank must lie in 1..={n_users}, got {rank}")));
    }
    if !(gamma_bar >= 0.0) {
        return Err(Error::Domain(format!("gamma_bar must be nonnegative, got {gamma_bar}")));
    }
    if !(m >= 0.5) {
        return Err(Error::Domain(format!("need m >= 0.5, got {m}")));
    }
    // A vanishing averaging scale pins the case SNR at zero, where Q = 1/2.
    if gamma_bar < 1e-280 {
        return Ok(TermEval { value: 0.5, converged: true, terms_used: 0 });
    }
    let n = rank as f64;
    let rate = m / gamma_bar;
    let spec = FadingSpec::new(m, 1.0, n_users, rank)?;
    let order_factor = spec.order_factor();
    let kmax = n_users - rank;
    let mut total = 0.0;
    let mut converged = true;
    let mut terms_used = 0usize;
    for k in 0..=kmax {
        let mu = n + k as f64 - 1.0;
        let big_m = m * (n + k as f64);
        let decay = (n + k as f64) * rate;
        let ln_gamma_big_m = ln_gamma(big_m);
        // Per-node running term rate^i (m/γ̄)^M Γ(i+M)/b^(i+M), advanced
        // multiplicatively so no factor overflows on its own.
        let mut node_terms: Vec<f64> = rule
            .nodes
            .iter()
            .map(|&psi| {
                let s = psi.sin();
                let b = 0.5 / (s * s) + decay;
                (ln_gamma_big_m + big_m * (rate.ln() - b.ln())).exp()
            })
            .collect();
        let ratios: Vec<f64> = rule
            .nodes
            .iter()
            .map(|&psi| {
                let s = psi.sin();
                rate / (0.5 / (s * s) + decay)
            })
            .collect();
        let mut coeffs = ScaledSeries::new(mu, m);
        let mut prev_coeff = coeffs.coeff(0);
        // Fold the leading coefficient into every node term; the later terms
        // then accumulate coefficient ratios only.
        for t in node_terms.iter_mut() {
            *t *= prev_coeff;
        }
        let mut k_sum = node_terms
            .iter()
            .zip(rule.weights.iter())
            .map(|(t, w)| t * w)
            .sum::<f64>();
        let mut k_converged = mu == 0.0;
        if !k_converged {
            for i in 1..=max_terms {
                let c = coeffs.coeff(i);
                if prev_coeff == 0.0 {
                    k_converged = true;
                    break;
                }
                let coeff_ratio = c / prev_coeff;
                prev_coeff = c;
                let step = i as f64 - 1.0 + big_m;
                let mut term = 0.0;
                for ((t, r), w) in node_terms.iter_mut().zip(ratios.iter()).zip(rule.weights.iter())
                {
                    *t *= coeff_ratio * step * r;
                    term += *t * w;
                }
                k_sum += term;
                terms_used = terms_used.max(i);
                if term.abs() <= tol * k_sum.abs() {
                    k_converged = true;
                    break;
                }
            }
        }
        if !k_converged {
            converged = false;
        }
        let binom = (ln_gamma(kmax as f64 + 1.0)
            - ln_gamma(k as f64 + 1.0)
            - ln_gamma((kmax - k) as f64 + 1.0))
        .exp();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * binom * k_sum;
    }
    let value = order_factor / (std::f64::consts::PI * crate::special_math::gamma(m)) * total;
    Ok(TermEval { value, converged, terms_used })
}

/// Fading-averaged BER of `spec.user`: the conditional weight vector applied
/// to the per-case ordered averages, with γ̄ = A²Ω/σ².
pub fn avg_ber(spec: &AvgBerSpec) -> Result<AvgBerResult> {
    let n = spec.alloc.n_users();
    if n != 2 && n != 3 {
        return Err(Error::Unsupported(format!("series average exists for 2 or 3 users, got {n}")));
    }
    let catalog = gamma_catalog(n, &spec.alloc)?;
    let weights = formula(n, spec.user)?;
    let rule = gauss_legendre(spec.nodes)?;
    let sigma2 = spec.sigma2();
    let mut acc = 0.0;
    let mut converged = true;
    let mut terms_used = 0usize;
    for &(w, case) in &weights.terms {
        let gamma_bar = catalog.gamma_bar(spec.user, case, spec.omega, sigma2)?;
        let t = avg_term_impl(n, spec.user, gamma_bar, spec.m, spec.tol, spec.max_terms, &rule)?;
        converged &= t.converged;
        terms_used = terms_used.max(t.terms_used);
        acc += w as f64 * t.value;
    }
    Ok(AvgBerResult::new(weights.coefficient * acc, converged, terms_used, AvgMethod::Series))
}

// ---------------------------------------------------------------------------
// Rayleigh closed forms
// ---------------------------------------------------------------------------

/// Closed ordered average E[Q(√γ)] at m = 1:
/// Kₙ Σ_j C(n−1,j)(−1)^j/(N−n+1+j) · ½(1 − √(γ̄/(γ̄+2(N−n+1+j)))).
fn rayleigh_rank_average(n_users: usize, rank: usize, gamma_bar: f64) -> f64 {
    if gamma_bar <= 0.0 {
        return 0.5;
    }
    let k_n = (ln_gamma(n_users as f64 + 1.0)
        - ln_gamma(rank as f64)
        - ln_gamma((n_users - rank) as f64 + 1.0))
    .exp();
    let mut acc = 0.0;
    for j in 0..rank {
        let d = (n_users - rank + 1 + j) as f64;
        let binom = (ln_gamma(rank as f64) - ln_gamma(j as f64 + 1.0) - ln_gamma((rank - j) as f64))
            .exp();
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom / d * 0.5 * (1.0 - (gamma_bar / (gamma_bar + 2.0 * d)).sqrt());
    }
    k_n * acc
}

/// Closed-form Rayleigh (m = 1) average BER for one user. `gamma_bars` must
/// list the per-case averaging scales in the order of the user's weight
/// vector. These are the exact m = 1 reductions of the series form; the
/// variants as printed in the source derivation are kept separately in
/// [`rayleigh_printed`] for the audit.
pub fn rayleigh_closed(n_users: usize, user: usize, gamma_bars: &[f64]) -> Result<f64> {
    let weights = formula(n_users, user)?;
    if gamma_bars.len() != weights.terms.len() {
        return Err(Error::Config(format!(
            "expected {} averaging scales for user {user} of {n_users}, got {}",
            weights.terms.len(),
            gamma_bars.len()
        )));
    }
    let mut acc = 0.0;
    for (&(w, _), &gb) in weights.terms.iter().zip(gamma_bars) {
        acc += w as f64 * rayleigh_rank_average(n_users, user, gb);
    }
    Ok(weights.coefficient * acc)
}

/// Catalog-driven wrapper around [`rayleigh_closed`].
pub fn rayleigh_closed_for_spec(spec: &AvgBerSpec) -> Result<AvgBerResult> {
    let n = spec.alloc.n_users();
    let catalog = gamma_catalog(n, &spec.alloc)?;
    let weights = formula(n, spec.user)?;
    let sigma2 = spec.sigma2();
    let mut gamma_bars = Vec::with_capacity(weights.terms.len());
    for &(_, case) in &weights.terms {
        gamma_bars.push(catalog.gamma_bar(spec.user, case, spec.omega, sigma2)?);
    }
    let value = rayleigh_closed(n, spec.user, &gamma_bars)?;
    Ok(AvgBerResult::new(value, true, 0, AvgMethod::RayleighClosed))
}

/// The Rayleigh closed forms exactly as printed in the source derivation,
/// retained for the deviation audit. Several of them carry transcription
/// defects (their low-SNR limits exceed 1/2), so they are never used as the
/// computational path.
pub fn rayleigh_printed(n_users: usize, user: usize, gamma_bars: &[f64]) -> Result<f64> {
    let weights = formula(n_users, user)?;
    if gamma_bars.len() != weights.terms.len() {
        return Err(Error::Config(format!(
            "expected {} averaging scales for user {user} of {n_users}, got {}",
            weights.terms.len(),
            gamma_bars.len()
        )));
    }
    let value = match (n_users, user) {
        (2, 1) => {
            0.25 * gamma_bars
                .iter()
                .map(|&gb| 1.0 - 1.0 / (1.0 / gb + 1.0).sqrt())
                .sum::<f64>()
        }
        (2, 2) => {
            0.5 * weights
                .terms
                .iter()
                .zip(gamma_bars)
                .map(|(&(w, _), &gb)| {
                    w as f64
                        * ((gb / (gb + 1.0)).sqrt() - (8.0 * gb / (2.0 * gb + 1.0)).sqrt() + 1.0)
                })
                .sum::<f64>()
        }
        (3, 1) => {
            0.25 * gamma_bars
                .iter()
                .map(|&gb| 1.0 - (2.0 * gb / (2.0 * gb + 3.0)).sqrt())
                .sum::<f64>()
        }
        (3, 2) => {
            0.25 * weights
                .terms
                .iter()
                .zip(gamma_bars)
                .map(|(&(w, _), &gb)| {
                    w as f64
                        * ((2.0 * gb / (2.0 * gb + 3.0)).sqrt()
                            - 1.5 * (gb / (gb + 1.0)).sqrt()
                            + 0.5)
                })
                .sum::<f64>()
        }
        (3, 3) => {
            0.25 * weights
                .terms
                .iter()
                .zip(gamma_bars)
                .map(|(&(w, _), &gb)| {
                    w as f64
                        * (-(2.0 * gb / (2.0 * gb + 3.0)).sqrt()
                            - 3.0 * (2.0 * gb / (2.0 * gb + 1.0)).sqrt()
                            + 3.0 * (gb / (gb + 1.0)).sqrt()
                            + 0.5)
                })
                .sum::<f64>()
        }
        _ => unreachable!(),
    };
    Ok(value)
}

// ---------------------------------------------------------------------------
// Numeric averaging oracle
// ---------------------------------------------------------------------------

/// A stratified-sampling estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Controls for [`avg_numeric_oracle`].
#[derive(Debug, Clone, Copy)]
pub struct OracleControls {
    pub strata: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for OracleControls {
    fn default() -> Self {
        Self { strata: 32_768, replicates: 8, seed: 0x6f2a_11c9 }
    }
}

/// E[conditional BER] for `spec.user`, integrating the enumeration oracle
/// against the rank marginal of the ordered gains by stratified sampling of
/// the quantile function. No symbol-level simulation is involved; the
/// conditional BER at each sampled gain is exact.
pub fn avg_numeric_oracle(spec: &AvgBerSpec, controls: OracleControls) -> Result<OracleEstimate> {
    let n = spec.alloc.n_users();
    let fading = FadingSpec::new(spec.m, spec.omega, n, spec.user)?;
    let sigma2 = spec.sigma2();
    if controls.strata < 16 || controls.replicates < 2 {
        return Err(Error::Config("oracle needs at least 16 strata and 2 replicates".into()));
    }

    // Quantile grid over the rank marginal; per-sample refinement by Newton.
    let grid_len = 2048usize;
    let u_hi = 1.0 - 1e-12;
    let mut grid = Vec::with_capacity(grid_len + 1);
    for g in 0..=grid_len {
        let u = (g as f64 / grid_len as f64) * u_hi;
        grid.push(rank_quantile(&fading, u)?);
    }
    let quantile = |u: f64| -> Result<f64> {
        let idx = ((u / u_hi) * grid_len as f64).floor() as usize;
        let idx = idx.min(grid_len - 1);
        let mut alpha = 0.5 * (grid[idx] + grid[idx + 1]);
        for _ in 0..3 {
            let f = rank_cdf(&fading, alpha)?;
            let d = ordered_gain_pdf(&fading, alpha)?;
            if d <= 0.0 {
                break;
            }
            alpha = (alpha + (u - f) / d).clamp(grid[idx], grid[idx + 1]);
        }
        Ok(alpha)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(controls.seed);
    let mut replicate_means = Vec::with_capacity(controls.replicates);
    for _ in 0..controls.replicates {
        let mut acc = 0.0;
        for k in 0..controls.strata {
            let u = (k as f64 + rng.random::<f64>()) / controls.strata as f64 * u_hi;
            let alpha = quantile(u)?;
            acc += conditional_ber_of_gain(&spec.alloc, spec.user, alpha, sigma2)?;
        }
        replicate_means.push(acc / controls.strata as f64);
    }
    let mean = replicate_means.iter().sum::<f64>() / controls.replicates as f64;
    let var = replicate_means.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (controls.replicates as f64 - 1.0);
    let std_error = (var / controls.replicates as f64).sqrt();
    Ok(OracleEstimate { value: mean, std_error })
}

fn conditional_ber_of_gain(
    alloc: &PowerAllocation,
    user: usize,
    alpha: f64,
    sigma2: f64,
) -> Result<f64> {
    let mut gains = vec![0.0; alloc.n_users()];
    gains[user - 1] = alpha;
    let r = exact_cond_ber::enumerate_exact(alloc, &gains, sigma2)?;
    Ok(r.per_user[user - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_math::reg_lower_gamma;

    fn alloc2() -> PowerAllocation {
        PowerAllocation::new(vec![0.7, 0.3]).unwrap()
    }

    fn rule64() -> QuadratureRule {
        gauss_legendre(64).unwrap()
    }

    #[test]
    fn single_user_rayleigh_term() {
        // N = 1, n = 1, m = 1: E[Q(sqrt(g))] = (1 - sqrt(gb/(2+gb)))/2.
        let rule = rule64();
        for &gb in &[0.4, 3.0, 25.0] {
            let t = avg_term_general(1, 1, gb, 1.0, 1e-13, 400, &rule).unwrap();
            let expect = 0.5 * (1.0 - (gb / (2.0 + gb)).sqrt());
            assert!((t.value - expect).abs() < 1e-12, "gb={gb}: {} vs {expect}", t.value);
            assert!(t.converged);
        }
    }

    #[test]
    fn vanishing_scale_gives_half() {
        let rule = rule64();
        let t = avg_term_general(2, 1, 0.0, 1.5, 1e-12, 300, &rule).unwrap();
        assert_eq!(t.value, 0.5);
        let t = avg_term_general(2, 2, 1e-9, 1.0, 1e-12, 300, &rule).unwrap();
        assert!((t.value - 0.5).abs() < 1e-4);
    }

    // Direct-integration oracle: E[Q(sqrt(g))] over the closed ordered rank
    // density, integrated in t = sqrt(g) to avoid the origin cusp.
    fn direct_average(n_users: usize, rank: usize, gamma_bar: f64, m: f64) -> f64 {
        let k_n = (ln_gamma(n_users as f64 + 1.0)
            - ln_gamma(rank as f64)
            - ln_gamma((n_users - rank) as f64 + 1.0))
        .exp();
        let q = |x: f64| 0.5 * libm::erfc(x / std::f64::consts::SQRT_2);
        let f = |t: f64| -> f64 {
            let g = t * t;
            let x = m * g / gamma_bar;
            let pdf = (m * (m / gamma_bar).ln() + (m - 1.0) * g.ln() - x - ln_gamma(m)).exp();
            let cdf = reg_lower_gamma(m, x).unwrap();
            2.0 * t
                * q(g.sqrt())
                * k_n
                * pdf
                * cdf.powi(rank as i32 - 1)
                * (1.0 - cdf).powi((n_users - rank) as i32)
        };
        let hi = (gamma_bar * 50.0 / m + 50.0).sqrt();
        let steps = 60_000;
        let h = hi / steps as f64;
        let mut acc = 0.0;
        for i in 0..steps {
            // Nudge the origin: the m = 1/2 integrand is finite but its
            // log-space evaluation is 0/0 at exactly t = 0.
            let t0 = (i as f64 * h).max(1e-9);
            acc += (f(t0) + 4.0 * f(t0 + 0.5 * h) + f(t0 + h)) * h / 6.0;
        }
        acc
    }

    #[test]
    fn series_matches_direct_integration() {
        let rule = rule64();
        for &(n_users, rank, m, gb) in &[
            (2usize, 1usize, 2.0, 10.0),
            (2, 2, 2.0, 10.0),
            (2, 1, 0.5, 3.0),
            (3, 2, 1.0, 6.0),
            (3, 3, 3.0, 12.0),
            (3, 1, 2.0, 0.8),
        ] {
            let t = avg_term_general(n_users, rank, gb, m, 1e-13, 500, &rule).unwrap();
            let direct = direct_average(n_users, rank, gb, m);
            assert!(
                (t.value - direct).abs() < 1e-8,
                "N={n_users} n={rank} m={m} gb={gb}: series {} vs direct {direct}",
                t.value
            );
        }
    }

    #[test]
    fn series_equals_rayleigh_closed_at_m1() {
        for &ebn0 in &[0.0, 10.0, 20.0, 30.0] {
            for user in 1..=2 {
                let spec = AvgBerSpec::new(alloc2(), user, 1.0, 1.0, ebn0).unwrap();
                let s = avg_ber(&spec).unwrap();
                let c = rayleigh_closed_for_spec(&spec).unwrap();
                assert!(s.converged);
                assert!(
                    (s.value - c.value).abs() < 1e-8,
                    "user {user} at {ebn0} dB: series {} vs closed {}",
                    s.value,
                    c.value
                );
            }
        }
    }

    #[test]
    fn rayleigh_closed_reference_points() {
        // Equal scales of 10 for the two first-user cases.
        let v = rayleigh_closed(2, 1, &[10.0, 10.0]).unwrap();
        let expect = 0.5 * (1.0 - (10.0f64 / 14.0).sqrt());
        assert!((v - expect).abs() < 1e-14);
        assert!((v - 0.077_422_872_635_741_64).abs() < 1e-12);
        // High-SNR limit collapses to zero.
        let v = rayleigh_closed(2, 1, &[1e12, 1e12]).unwrap();
        assert!(v < 1e-5);
        assert!(rayleigh_closed(2, 1, &[1.0]).is_err());
    }

    #[test]
    fn printed_forms_keep_their_arithmetic() {
        // The verbatim first-user form at scale 10 on both cases.
        let v = rayleigh_printed(2, 1, &[10.0, 10.0]).unwrap();
        let expect = 0.25 * 2.0 * (1.0 - 1.0 / 1.1f64.sqrt());
        assert!((v - expect).abs() < 1e-14);
        assert!((v - 0.023_268_705_377_203_73).abs() < 1e-10);
        // Its infinite-scale limit vanishes; toward zero scale it returns 1/2.
        let v = rayleigh_printed(2, 1, &[1e12, 1e12]).unwrap();
        assert!(v.abs() < 1e-5);
        let v = rayleigh_printed(2, 1, &[1e-12, 1e-12]).unwrap();
        assert!((v - 0.5).abs() < 1e-5);
        // The second-user printed form breaks its low-SNR limit, which is
        // exactly why it is audit-only.
        let v = rayleigh_printed(2, 2, &[1e-9; 5]).unwrap();
        assert!((v - 1.0).abs() < 1e-3);
    }

    #[test]
    fn avg_ber_monotone_in_ebn0() {
        for user in 1..=2 {
            let mut prev = 1.0;
            for &ebn0 in &[0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0] {
                let spec = AvgBerSpec::new(alloc2(), user, 2.0, 1.0, ebn0).unwrap();
                let r = avg_ber(&spec).unwrap();
                assert!(r.value < prev, "user {user} not monotone at {ebn0} dB");
                prev = r.value;
            }
        }
    }

    #[test]
    fn milder_fading_helps_at_high_snr() {
        for user in 1..=2 {
            let strong = avg_ber(&AvgBerSpec::new(alloc2(), user, 3.0, 1.0, 25.0).unwrap()).unwrap();
            let weak = avg_ber(&AvgBerSpec::new(alloc2(), user, 1.0, 1.0, 25.0).unwrap()).unwrap();
            assert!(
                strong.value < weak.value,
                "user {user}: m=3 {} vs m=1 {}",
                strong.value,
                weak.value
            );
        }
    }

    #[test]
    fn control_doubling_is_stable() {
        let spec = AvgBerSpec::new(alloc2(), 2, 2.0, 1.0, 12.0).unwrap();
        let base = avg_ber(&spec).unwrap();
        let finer = avg_ber(
            &spec
                .clone()
                .with_controls(spec.tol, spec.max_terms * 2, spec.nodes * 2)
                .unwrap(),
        )
        .unwrap();
        assert!(base.converged && finer.converged);
        assert!((base.value - finer.value).abs() < 1e-10);
    }

    #[test]
    fn numeric_oracle_agrees_with_series() {
        let controls = OracleControls { strata: 8_192, replicates: 4, seed: 99 };
        for &(user, m) in &[(1usize, 1.0), (2, 2.0)] {
            let spec = AvgBerSpec::new(alloc2(), user, m, 1.0, 10.0).unwrap();
            let s = avg_ber(&spec).unwrap();
            let o = avg_numeric_oracle(&spec, controls).unwrap();
            let band = (3.0 * o.std_error).max(1e-6);
            assert!(
                (s.value - o.value).abs() < band,
                "user {user} m {m}: series {} vs oracle {} +- {}",
                s.value,
                o.value,
                o.std_error
            );
        }
    }
}
