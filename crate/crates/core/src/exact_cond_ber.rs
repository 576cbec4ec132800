//! Conditional (fixed-gain) BER: the closed Q-sum formulas for the 2- and
//! 3-user systems and an exact enumeration oracle for arbitrary user counts.
//!
//! The oracle is the internal ground truth. It enumerates, for one real
//! dimension, every transmitted sign pattern together with every SIC decision
//! trajectory of the evaluated user; each trajectory restricts the noise to
//! an interval, so its probability is a difference of Q values at the
//! interval endpoints. The closed formulas are validated against it, not the
//! other way around.

use crate::detectors::SicMode;
use crate::error::{Error, Result};
use crate::model::{gamma_catalog, GammaCatalog, PowerAllocation};
use crate::special_math::q_func;

/// Hard cap on the oracle's user count; the trajectory tree is 4^N.
pub const MAX_ORACLE_USERS: usize = 8;

/// Inputs shared by every conditional-BER evaluation.
#[derive(Debug, Clone)]
pub struct CondBerInput {
    pub alloc: PowerAllocation,
    /// Evaluated user, 1-based.
    pub user: usize,
    /// Channel gains α₁..α_N; each user's receiver sees its own entry.
    pub gains: Vec<f64>,
    /// Per-dimension noise variance σ² = N₀/2.
    pub sigma2: f64,
}

impl CondBerInput {
    pub fn new(alloc: PowerAllocation, user: usize, gains: Vec<f64>, sigma2: f64) -> Result<Self> {
        if gains.len() != alloc.n_users() {
            return Err(Error::Config(format!(
                "{} gains supplied for {} users",
                gains.len(),
                alloc.n_users()
            )));
        }
        if user == 0 || user > alloc.n_users() {
            return Err(Error::Config(format!("user must lie in 1..={}", alloc.n_users())));
        }
        if gains.iter().any(|g| !(*g >= 0.0)) {
            return Err(Error::Config("gains must be nonnegative".into()));
        }
        if !(sigma2 > 0.0) {
            return Err(Error::Config(format!("noise variance must be positive, got {sigma2}")));
        }
        Ok(Self { alloc, user, gains, sigma2 })
    }

    fn own_gain(&self) -> f64 {
        self.gains[self.user - 1]
    }
}

/// A conditional-BER value; `anomalous` marks outputs outside [0, 1],
/// which the audited three-user formulas produce at low SNR. Values are
/// never clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondBerValue {
    pub value: f64,
    pub anomalous: bool,
}

impl CondBerValue {
    fn from_raw(value: f64) -> Self {
        Self { value, anomalous: !(0.0..=1.0).contains(&value) }
    }
}

// ---------------------------------------------------------------------------
// Weighted Q sums
// ---------------------------------------------------------------------------

/// coefficient·(constant + Σ w·Q(√γ_c) + Σ w·Q(√γ_a)·Q(√γ_b)).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedQSum {
    pub coefficient: f64,
    pub constant: f64,
    /// (weight, case index).
    pub terms: Vec<(i32, usize)>,
    /// (weight, case a, case b) cross terms of the scenario intermediates.
    pub products: Vec<(i32, usize, usize)>,
}

impl WeightedQSum {
    pub fn evaluate(&self, q_of_case: &mut impl FnMut(usize) -> Result<f64>) -> Result<f64> {
        let mut acc = self.constant;
        for &(w, c) in &self.terms {
            acc += w as f64 * q_of_case(c)?;
        }
        for &(w, a, b) in &self.products {
            acc += w as f64 * q_of_case(a)? * q_of_case(b)?;
        }
        Ok(self.coefficient * acc)
    }
}

fn linear(coefficient: f64, weights: &[(i32, usize)]) -> WeightedQSum {
    WeightedQSum { coefficient, constant: 0.0, terms: weights.to_vec(), products: vec![] }
}

/// The combined per-user formula: weights over the γ catalog cases.
pub fn formula(n_users: usize, user: usize) -> Result<WeightedQSum> {
    match (n_users, user) {
        (2, 1) => Ok(linear(0.5, &[(1, 1), (1, 2)])),
        (2, 2) => Ok(linear(0.5, &[(2, 1), (1, 2), (-1, 3), (-1, 4), (1, 5)])),
        (3, 1) => Ok(linear(0.25, &[(1, 1), (1, 2), (1, 3), (1, 4)])),
        (3, 2) => Ok(linear(
            0.25,
            &[(1, 1), (1, 2), (-1, 3), (-1, 4), (6, 5), (2, 6), (-1, 7), (-1, 8), (1, 9), (1, 10)],
        )),
        (3, 3) => Ok(linear(
            0.25,
            &[(-1, 2), (-1, 4), (12, 11), (2, 13), (-1, 14), (-1, 15), (-1, 16), (-1, 17), (-1, 18)],
        )),
        _ => Err(Error::Unsupported(format!(
            "no closed conditional formula for user {user} of {n_users}"
        ))),
    }
}

/// Scenario intermediates, numbered by the SIC outcome they condition on:
/// two users: 1 = first bit cancelled correctly, 2 = incorrectly;
/// three users, user 2: same split on the first user's bit;
/// three users, user 3: 1 = both stages right, 2 = second wrong,
/// 3 = first wrong, 4 = both wrong.
pub fn scenario_formula(n_users: usize, user: usize, scenario: usize) -> Result<WeightedQSum> {
    match (n_users, user, scenario) {
        (2, 2, 1) => Ok(WeightedQSum {
            coefficient: 0.5,
            constant: 0.0,
            terms: vec![(2, 1), (-1, 3)],
            products: vec![(-1, 1, 2), (-1, 1, 3)],
        }),
        (2, 2, 2) => Ok(WeightedQSum {
            coefficient: 1.0,
            constant: 0.0,
            terms: vec![(1, 2), (-1, 4), (1, 5)],
            products: vec![(1, 1, 2), (1, 1, 3)],
        }),
        (3, 2, 1) => Ok(WeightedQSum {
            coefficient: 0.25,
            constant: 0.0,
            terms: vec![(6, 5), (-1, 3), (-1, 4), (2, 6)],
            products: vec![(-1, 5, 1), (-1, 5, 2), (-1, 5, 3), (-1, 5, 4)],
        }),
        (3, 2, 2) => Ok(WeightedQSum {
            coefficient: 0.25,
            constant: 0.0,
            terms: vec![(1, 1), (1, 2), (-1, 7), (-1, 8), (1, 9), (1, 10)],
            products: vec![(1, 5, 1), (1, 5, 2), (1, 5, 3), (1, 5, 4)],
        }),
        (3, 3, 1) => Ok(WeightedQSum {
            coefficient: 0.25,
            constant: 0.0,
            terms: vec![(8, 11), (-1, 2), (1, 4)],
            products: vec![(-1, 11, 1), (-1, 11, 2), (-1, 11, 3), (-1, 11, 4)],
        }),
        (3, 3, 2) => Ok(WeightedQSum {
            coefficient: 1.0,
            constant: 2.0,
            terms: vec![(-1, 1), (-1, 2), (-1, 4), (-1, 14), (2, 13), (4, 11)],
            products: vec![(-1, 11, 1), (-1, 11, 2), (-1, 11, 3), (-1, 11, 4)],
        }),
        (3, 3, 3) => Ok(WeightedQSum {
            coefficient: 1.0,
            constant: 0.0,
            terms: vec![(1, 2), (1, 4)],
            products: vec![(1, 11, 1), (1, 11, 2), (1, 11, 3), (1, 11, 4)],
        }),
        (3, 3, 4) => Ok(WeightedQSum {
            coefficient: 1.0,
            constant: 0.0,
            terms: vec![(1, 1), (-1, 15), (1, 16), (1, 17), (1, 18)],
            products: vec![(1, 11, 1), (1, 11, 2), (1, 11, 3), (1, 11, 4)],
        }),
        _ => Err(Error::Unsupported(format!(
            "no scenario {scenario} for user {user} of {n_users}"
        ))),
    }
}

fn eval_catalog_sum(input: &CondBerInput, sum: &WeightedQSum) -> Result<CondBerValue> {
    let catalog: GammaCatalog = gamma_catalog(input.alloc.n_users(), &input.alloc)?;
    let gain = input.own_gain();
    let user = input.user;
    let sigma2 = input.sigma2;
    let mut q_of_case = |case: usize| -> Result<f64> {
        let g = catalog.gamma(user, case, gain, sigma2)?;
        q_func(g.sqrt())
    };
    Ok(CondBerValue::from_raw(sum.evaluate(&mut q_of_case)?))
}

/// Conditional BER of the first of two users: ½[Q(√γ₁,₁) + Q(√γ₁,₂)].
pub fn cond_ber_n2_u1(input: &CondBerInput) -> Result<CondBerValue> {
    if input.alloc.n_users() != 2 || input.user != 1 {
        return Err(Error::Config("cond_ber_n2_u1 expects the first of two users".into()));
    }
    eval_catalog_sum(input, &formula(2, 1)?)
}

/// Conditional BER of the second of two users:
/// ½ Σᵢ vᵢ Q(√γ₂,ᵢ) with v = [2, 1, −1, −1, 1].
pub fn cond_ber_n2_u2(input: &CondBerInput) -> Result<CondBerValue> {
    if input.alloc.n_users() != 2 || input.user != 2 {
        return Err(Error::Config("cond_ber_n2_u2 expects the second of two users".into()));
    }
    eval_catalog_sum(input, &formula(2, 2)?)
}

/// Conditional BER formulas of the three-user system.
///
/// With `scenario = None` the combined per-user expression is evaluated;
/// a scenario index selects the corresponding intermediate (including its
/// Q·Q product terms). Because the levels enter squared, the derivations
/// assume every catalog level keeps its sign, which holds on the region
/// √β₁ ≥ √β₂ + √β₃. The combined user-2 and user-3 expressions also break
/// the 1/2 bound at low SNR; out-of-range values set the `anomalous` flag
/// and are never clamped.
pub fn cond_ber_n3(input: &CondBerInput, scenario: Option<usize>) -> Result<CondBerValue> {
    if input.alloc.n_users() != 3 {
        return Err(Error::Config("cond_ber_n3 expects a three-user allocation".into()));
    }
    let sum = match scenario {
        None => formula(3, input.user)?,
        Some(s) => scenario_formula(3, input.user, s)?,
    };
    eval_catalog_sum(input, &sum)
}

// ---------------------------------------------------------------------------
// Enumeration oracle
// ---------------------------------------------------------------------------

/// Exact conditional BER per bit and per user, for any N ≤ 8.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumerateResult {
    /// Per-user BER, the average of the two bit BERs.
    pub per_user: Vec<f64>,
    /// Per-user [inphase-bit, quadrature-bit] BER.
    pub per_bit: Vec<[f64; 2]>,
}

fn q_unbounded(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        1.0
    } else if x == f64::INFINITY {
        0.0
    } else {
        0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
    }
}

fn interval_prob(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        0.0
    } else {
        (q_unbounded(lo) - q_unbounded(hi)).max(0.0)
    }
}

/// Probability that the target user's sign decision is wrong, given the
/// transmitted sign pattern, accumulated over all SIC trajectories.
#[allow(clippy::too_many_arguments)]
fn error_mass(
    sqrt_betas: &[f64],
    signs: &[f64],
    sum_tx: f64,
    aos: f64, // gain over noise std
    target: usize,
    stage: usize,
    lo: f64,
    hi: f64,
    cancelled: f64,
    perfect: bool,
) -> f64 {
    // Standardized decision threshold of this stage.
    let theta = -aos * (sum_tx - cancelled);
    if stage == target {
        return if signs[stage] > 0.0 {
            interval_prob(lo, hi.min(theta))
        } else {
            interval_prob(lo.max(theta), hi)
        };
    }
    if perfect {
        // Genie cancellation subtracts the true symbol and tells us nothing
        // about the noise, so the interval is unchanged.
        return error_mass(
            sqrt_betas,
            signs,
            sum_tx,
            aos,
            target,
            stage + 1,
            lo,
            hi,
            cancelled + sqrt_betas[stage] * signs[stage],
            perfect,
        );
    }
    let mut mass = 0.0;
    // Decided +1 on [theta, inf).
    let lo_pos = lo.max(theta);
    if lo_pos < hi {
        mass += error_mass(
            sqrt_betas,
            signs,
            sum_tx,
            aos,
            target,
            stage + 1,
            lo_pos,
            hi,
            cancelled + sqrt_betas[stage],
            perfect,
        );
    }
    // Decided -1 on (-inf, theta).
    let hi_neg = hi.min(theta);
    if lo < hi_neg {
        mass += error_mass(
            sqrt_betas,
            signs,
            sum_tx,
            aos,
            target,
            stage + 1,
            lo,
            hi_neg,
            cancelled - sqrt_betas[stage],
            perfect,
        );
    }
    mass
}

/// Exact conditional BER for every user with imperfect SIC.
pub fn enumerate_exact(alloc: &PowerAllocation, gains: &[f64], sigma2: f64) -> Result<EnumerateResult> {
    enumerate_exact_with_mode(alloc, gains, sigma2, SicMode::Imperfect)
}

/// Exact conditional BER for every user, selectable SIC mode.
pub fn enumerate_exact_with_mode(
    alloc: &PowerAllocation,
    gains: &[f64],
    sigma2: f64,
    mode: SicMode,
) -> Result<EnumerateResult> {
    let n = alloc.n_users();
    if n > MAX_ORACLE_USERS {
        return Err(Error::Unsupported(format!(
            "enumeration oracle is limited to {MAX_ORACLE_USERS} users, got {n}"
        )));
    }
    if gains.len() != n {
        return Err(Error::Config(format!("{} gains supplied for {n} users", gains.len())));
    }
    if gains.iter().any(|g| !(*g >= 0.0)) {
        return Err(Error::Config("gains must be nonnegative".into()));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::Config(format!("noise variance must be positive, got {sigma2}")));
    }
    let sqrt_betas = alloc.sqrt_betas();
    let sigma = sigma2.sqrt();
    let perfect = mode == SicMode::Perfect;
    let patterns = 1usize << n;
    let weight = 1.0 / patterns as f64;

    let mut per_bit = vec![[0.0; 2]; n];
    for (user_idx, &gain) in gains.iter().enumerate() {
        let aos = gain / sigma;
        let target = user_idx; // zero-based stage index
        let mut forward = 0.0;
        let mut backward = 0.0;
        let mut signs = vec![0.0f64; n];
        for p in 0..patterns {
            set_signs(&mut signs, p, n);
            let sum_tx: f64 = sqrt_betas.iter().zip(&signs).map(|(b, s)| b * s).sum();
            forward += error_mass(
                &sqrt_betas,
                &signs,
                sum_tx,
                aos,
                target,
                0,
                f64::NEG_INFINITY,
                f64::INFINITY,
                0.0,
                perfect,
            );
        }
        // The quadrature bit sees an identical chain driven by independent
        // noise; accumulate it in the opposite pattern order so the two bit
        // estimates are numerically independent round-off witnesses.
        for p in (0..patterns).rev() {
            set_signs(&mut signs, p, n);
            let sum_tx: f64 = sqrt_betas.iter().zip(&signs).map(|(b, s)| b * s).sum();
            backward += error_mass(
                &sqrt_betas,
                &signs,
                sum_tx,
                aos,
                target,
                0,
                f64::NEG_INFINITY,
                f64::INFINITY,
                0.0,
                perfect,
            );
        }
        per_bit[user_idx] = [forward * weight, backward * weight];
    }
    let per_user = per_bit.iter().map(|b| 0.5 * (b[0] + b[1])).collect();
    Ok(EnumerateResult { per_user, per_bit })
}

fn set_signs(signs: &mut [f64], pattern: usize, n: usize) {
    for (j, s) in signs.iter_mut().enumerate().take(n) {
        *s = if pattern & (1 << j) == 0 { 1.0 } else { -1.0 };
    }
}

/// Oracle value for the single user selected by `input`.
pub fn enumerate_exact_user(input: &CondBerInput) -> Result<f64> {
    let all = enumerate_exact(&input.alloc, &input.gains, input.sigma2)?;
    Ok(all.per_user[input.user - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn input(betas: Vec<f64>, user: usize, gains: Vec<f64>, sigma2: f64) -> CondBerInput {
        CondBerInput::new(PowerAllocation::new(betas).unwrap(), user, gains, sigma2).unwrap()
    }

    #[test]
    fn single_user_is_plain_qpsk() {
        let alloc = PowerAllocation::new(vec![1.0]).unwrap();
        for &(alpha, sigma2) in &[(0.5, 0.05), (1.0, 0.5), (2.0, 0.01)] {
            let r = enumerate_exact(&alloc, &[alpha], sigma2).unwrap();
            let expect = q_func(alpha / sigma2.sqrt()).unwrap();
            assert!((r.per_user[0] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_gain_gives_half() {
        let i = input(vec![0.7, 0.3], 1, vec![0.0, 1.0], 0.05);
        assert!((cond_ber_n2_u1(&i).unwrap().value - 0.5).abs() < 1e-15);
        let i = input(vec![0.7, 0.3], 2, vec![0.5, 0.0], 0.05);
        assert!((cond_ber_n2_u2(&i).unwrap().value - 0.5).abs() < 1e-15);
        let i = input(vec![0.8, 0.15, 0.05], 1, vec![0.0, 1.0, 1.5], 0.05);
        assert!((cond_ber_n3(&i, None).unwrap().value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn vanishing_noise_gives_zero() {
        let i = input(vec![0.7, 0.3], 1, vec![1.0, 1.2], 1e-9);
        assert!(cond_ber_n2_u1(&i).unwrap().value < 1e-12);
        let i = input(vec![0.7, 0.3], 2, vec![1.0, 1.2], 1e-9);
        assert!(cond_ber_n2_u2(&i).unwrap().value < 1e-12);
    }

    #[test]
    fn n2_formulas_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _ in 0..200 {
            let b1 = rng.random_range(0.5..1.0);
            let alloc = vec![b1, 1.0 - b1];
            let gains = vec![rng.random_range(1e-3..3.0), rng.random_range(1e-3..3.0)];
            let ebn0_db = rng.random_range(0.0..30.0);
            let sigma2 = 0.5 * 10f64.powf(-ebn0_db / 10.0);

            let i1 = input(alloc.clone(), 1, gains.clone(), sigma2);
            let i2 = input(alloc.clone(), 2, gains.clone(), sigma2);
            let oracle = enumerate_exact(&i1.alloc, &gains, sigma2).unwrap();
            let f1 = cond_ber_n2_u1(&i1).unwrap().value;
            let f2 = cond_ber_n2_u2(&i2).unwrap().value;
            assert!((f1 - oracle.per_user[0]).abs() < 1e-12, "U1 mismatch: {f1} vs {}", oracle.per_user[0]);
            assert!((f2 - oracle.per_user[1]).abs() < 1e-12, "U2 mismatch: {f2} vs {}", oracle.per_user[1]);
        }
    }

    #[test]
    fn n3_first_user_matches_oracle() {
        // The three-user formulas square the amplitude levels, so they hold
        // on the region where every level keeps its derived sign, i.e.
        // sqrt(b1) >= sqrt(b2) + sqrt(b3).
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut tested = 0;
        while tested < 100 {
            let b1: f64 = rng.random_range(0.55..0.95);
            let rest = 1.0 - b1;
            let b2 = rng.random_range(rest / 2.0..rest.min(b1));
            let b3 = rest - b2;
            if b3 > b2 || b1.sqrt() < b2.sqrt() + b3.sqrt() + 1e-3 {
                continue;
            }
            tested += 1;
            let alloc = vec![b1, b2, b3];
            let gains = vec![
                rng.random_range(1e-3..2.0),
                rng.random_range(1e-3..2.0),
                rng.random_range(1e-3..2.0),
            ];
            let sigma2 = 0.5 * 10f64.powf(-rng.random_range(0.0..25.0) / 10.0);
            let i1 = input(alloc, 1, gains.clone(), sigma2);
            let oracle = enumerate_exact(&i1.alloc, &gains, sigma2).unwrap();
            let f1 = cond_ber_n3(&i1, None).unwrap().value;
            assert!((f1 - oracle.per_user[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn n3_u2_scenarios_combine_to_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        for _ in 0..100 {
            let alloc = vec![0.72, 0.2, 0.08];
            let gains = vec![
                rng.random_range(1e-2..2.0),
                rng.random_range(1e-2..2.0),
                rng.random_range(1e-2..2.0),
            ];
            let sigma2 = rng.random_range(1e-3..0.6);
            let i = input(alloc, 2, gains, sigma2);
            let total = cond_ber_n3(&i, None).unwrap().value;
            let s1 = cond_ber_n3(&i, Some(1)).unwrap().value;
            let s2 = cond_ber_n3(&i, Some(2)).unwrap().value;
            assert!(
                (s1 + s2 - total).abs() < 1e-12,
                "scenario combination broke: {s1} + {s2} != {total}"
            );
        }
    }

    #[test]
    fn unknown_scenario_is_rejected() {
        let i = input(vec![0.8, 0.15, 0.05], 2, vec![0.4, 0.9, 1.4], 0.05);
        assert!(cond_ber_n3(&i, Some(7)).is_err());
        let i3 = input(vec![0.8, 0.15, 0.05], 1, vec![0.4, 0.9, 1.4], 0.05);
        assert!(cond_ber_n3(&i3, Some(1)).is_err());
    }

    #[test]
    fn n3_low_snr_values_exceed_half_and_flag_when_above_one() {
        // At zero gain the combined three-user formulas evaluate above the
        // 1/2 bound; the values are reported verbatim, never clamped.
        let i = input(vec![0.8, 0.15, 0.05], 2, vec![0.0, 0.0, 0.0], 0.5);
        let v = cond_ber_n3(&i, None).unwrap();
        assert!((v.value - 1.0).abs() < 1e-12);
        let i = input(vec![0.8, 0.15, 0.05], 3, vec![0.0, 0.0, 0.0], 0.5);
        let v = cond_ber_n3(&i, None).unwrap();
        assert!((v.value - 0.875).abs() < 1e-12);
        assert!(!v.anomalous);

        // Near-equal power split drives the third-user expression above 1,
        // which sets the anomaly flag.
        let i = input(vec![0.5, 0.4999, 0.0001], 3, vec![1.0, 1.0, 1.0], 0.01);
        let v = cond_ber_n3(&i, None).unwrap();
        assert!(v.value > 1.0, "expected an out-of-range value, got {}", v.value);
        assert!(v.anomalous);
    }

    #[test]
    fn oracle_bit_symmetry() {
        let alloc = PowerAllocation::new(vec![0.6, 0.3, 0.1]).unwrap();
        let r = enumerate_exact(&alloc, &[0.4, 0.9, 1.7], 0.07).unwrap();
        for bits in &r.per_bit {
            assert!((bits[0] - bits[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn oracle_monotone_in_gain_and_noise() {
        let alloc = PowerAllocation::new(vec![0.7, 0.3]).unwrap();
        let mut prev = 1.0;
        for i in 1..=20 {
            let a = 0.2 * i as f64;
            let r = enumerate_exact(&alloc, &[a, 1.0], 0.05).unwrap();
            assert!(r.per_user[0] <= prev + 1e-14);
            prev = r.per_user[0];
        }
        let mut prev = [1.0, 1.0];
        for i in 0..=20 {
            let sigma2 = 10f64.powf(-(i as f64) / 8.0);
            let r = enumerate_exact(&alloc, &[0.5, 1.2], sigma2).unwrap();
            for (p, v) in prev.iter_mut().zip(r.per_user.iter()) {
                assert!(*v <= *p + 1e-14);
                *p = *v;
            }
        }
    }

    #[test]
    fn perfect_mode_never_worse() {
        let alloc = PowerAllocation::new(vec![0.8, 0.15, 0.05]).unwrap();
        for &sigma2 in &[0.3, 0.05, 0.01] {
            let imp = enumerate_exact_with_mode(&alloc, &[0.5, 0.9, 1.4], sigma2, SicMode::Imperfect).unwrap();
            let per = enumerate_exact_with_mode(&alloc, &[0.5, 0.9, 1.4], sigma2, SicMode::Perfect).unwrap();
            assert!((imp.per_user[0] - per.per_user[0]).abs() < 1e-15);
            for u in 1..3 {
                assert!(per.per_user[u] <= imp.per_user[u] + 1e-14);
            }
        }
    }

    #[test]
    fn every_referenced_case_resolves() {
        // Exhaustiveness: the combined and scenario formulas only reference
        // catalog cases that resolve for their user.
        let i2 = input(vec![0.7, 0.3], 2, vec![0.6, 1.1], 0.05);
        for scenario in 1..=2 {
            let v = eval_catalog_sum(&i2, &scenario_formula(2, 2, scenario).unwrap()).unwrap();
            assert!(v.value.is_finite());
        }
        for user in 1..=3 {
            let i = input(vec![0.8, 0.15, 0.05], user, vec![0.4, 0.9, 1.4], 0.05);
            assert!(cond_ber_n3(&i, None).unwrap().value.is_finite());
            let scenarios: &[usize] = match user {
                2 => &[1, 2],
                3 => &[1, 2, 3, 4],
                _ => &[],
            };
            for &scenario in scenarios {
                let v = cond_ber_n3(&i, Some(scenario)).unwrap();
                assert!(v.value.is_finite(), "user {user} scenario {scenario}");
            }
        }
    }

    #[test]
    fn u3_scenarios_bounded_at_zero_gain() {
        // Scenario intermediates stay finite at the zero-SNR corner, where
        // each Q evaluates to one half.
        let i = input(vec![0.8, 0.15, 0.05], 3, vec![0.0, 0.0, 0.0], 0.5);
        let values: Vec<f64> = (1..=4)
            .map(|s| cond_ber_n3(&i, Some(s)).unwrap().value)
            .collect();
        // Eb31 at Q = 1/2: (8*0.5 - 0.5*4*0.5 - 0.5 + 0.5)/4 = 0.75.
        assert!((values[0] - 0.75).abs() < 1e-12, "{values:?}");
        for v in &values {
            assert!(v.is_finite());
        }
    }

    #[test]
    fn oracle_refuses_oversized_systems() {
        let alloc = PowerAllocation::new(vec![1.0 / 9.0; 9]).unwrap();
        assert!(enumerate_exact(&alloc, &[1.0; 9], 0.1).is_err());
    }
}
