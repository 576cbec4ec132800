//! Superposed Gray-QPSK signal model: bit mapping, power allocation,
//! amplitude levels, and the per-case SNR catalog indexed by every
//! analytic BER formula.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Tolerance for the unit-sum and ordering checks on power coefficients.
/// Optimizer iterates are allowed to touch the ordering boundary.
pub const BETA_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Power allocation
// ---------------------------------------------------------------------------

/// Per-user power fractions β₁ ≥ β₂ ≥ ... ≥ β_N with Σβₙ = 1.
///
/// User 1 is the weakest channel and receives the most power.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PowerAllocation {
    betas: Vec<f64>,
}

impl PowerAllocation {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::Config("power allocation needs at least one user".into()));
        }
        let sum: f64 = betas.iter().sum();
        if (sum - 1.0).abs() > BETA_TOL {
            return Err(Error::Config(format!("power fractions must sum to 1, got {sum}")));
        }
        for (i, &b) in betas.iter().enumerate() {
            if !(b >= -BETA_TOL) || !b.is_finite() {
                return Err(Error::Config(format!("beta_{} = {b} is not a valid power fraction", i + 1)));
            }
            if i > 0 && betas[i - 1] + BETA_TOL < b {
                return Err(Error::Config(format!(
                    "power fractions must be non-increasing; beta_{} = {} < beta_{} = {b}",
                    i,
                    betas[i - 1],
                    i + 1
                )));
            }
        }
        Ok(Self { betas: betas.into_iter().map(|b| b.max(0.0)).collect() })
    }

    pub fn n_users(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn beta(&self, user: usize) -> f64 {
        self.betas[user - 1]
    }

    /// √βₖ for k = 1..N, the per-dimension component amplitudes.
    pub fn sqrt_betas(&self) -> Vec<f64> {
        self.betas.iter().map(|b| b.sqrt()).collect()
    }
}

// ---------------------------------------------------------------------------
// QPSK symbols
// ---------------------------------------------------------------------------

/// A Gray-coded QPSK symbol. The first bit selects the inphase sign and the
/// second the quadrature sign, with bit 0 mapping to +1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QpskSymbol {
    pub bits: (u8, u8),
}

impl QpskSymbol {
    pub fn new(b1: u8, b2: u8) -> Result<Self> {
        if b1 > 1 || b2 > 1 {
            return Err(Error::Config(format!("bits must be 0 or 1, got ({b1}, {b2})")));
        }
        Ok(Self { bits: (b1, b2) })
    }

    /// Symbol a_i with i ∈ {0..3} reading the bits as (b1 b2) = binary i.
    pub fn from_index(i: usize) -> Result<Self> {
        if i > 3 {
            return Err(Error::Config(format!("symbol index must be 0..=3, got {i}")));
        }
        Ok(Self { bits: ((i >> 1) as u8, (i & 1) as u8) })
    }

    pub fn i_sign(&self) -> f64 {
        if self.bits.0 == 0 { 1.0 } else { -1.0 }
    }

    pub fn q_sign(&self) -> f64 {
        if self.bits.1 == 0 { 1.0 } else { -1.0 }
    }

    /// Complex point ±1 ± j before power scaling.
    pub fn point(&self) -> Complex64 {
        Complex64::new(self.i_sign(), self.q_sign())
    }
}

/// √βₙ·(i_sign + j·q_sign) for one user's symbol.
pub fn map_bits(bits: (u8, u8), beta_n: f64) -> Result<Complex64> {
    if !(0.0..=1.0).contains(&beta_n) {
        return Err(Error::Config(format!("beta must lie in [0, 1], got {beta_n}")));
    }
    let s = QpskSymbol::new(bits.0, bits.1)?;
    Ok(s.point() * beta_n.sqrt())
}

/// Superposed transmit sample x = Σₙ √βₙ sₙ with unit total power.
pub fn superpose(symbols: &[QpskSymbol], alloc: &PowerAllocation) -> Result<Complex64> {
    if symbols.len() != alloc.n_users() {
        return Err(Error::Config(format!(
            "{} symbols supplied for {} users",
            symbols.len(),
            alloc.n_users()
        )));
    }
    let mut x = Complex64::new(0.0, 0.0);
    for (s, &b) in symbols.iter().zip(alloc.betas()) {
        x += s.point() * b.sqrt();
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// Amplitude levels
// ---------------------------------------------------------------------------

/// A per-dimension superposed level u₁√β₁ + u₂√β₂ + u₃√β₃.
///
/// Entries u = ±2 arise from failed-SIC residuals; u₃ = 0 whenever N = 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeLevel {
    pub u: [i8; 3],
    pub value: f64,
}

impl AmplitudeLevel {
    pub fn squared(&self) -> f64 {
        self.value * self.value
    }
}

/// Build the level A_{u1 u2 u3} for the given allocation.
pub fn amplitude_level(u: [i8; 3], alloc: &PowerAllocation) -> Result<AmplitudeLevel> {
    for &ui in &u {
        if !(-2..=2).contains(&ui) {
            return Err(Error::Config(format!("level coefficients must lie in -2..=2, got {ui}")));
        }
    }
    if alloc.n_users() < 3 && u[2] != 0 {
        return Err(Error::Config("u3 must be 0 for systems with fewer than 3 users".into()));
    }
    let sb = alloc.sqrt_betas();
    let mut value = 0.0;
    for (k, &ui) in u.iter().enumerate() {
        if ui != 0 {
            value += ui as f64 * sb[k];
        }
    }
    Ok(AmplitudeLevel { u, value })
}

// ---------------------------------------------------------------------------
// Gamma catalog
// ---------------------------------------------------------------------------

/// The indexed family of per-case SNRs γ_{n,c} = α²A²/σ² used by the
/// conditional formulas, and their averaging scales γ̄_{n,c} = A²Ω/σ².
///
/// Case indices bind to amplitude levels only; the gain is always the
/// evaluating user's. For the two-user system each user has its own index
/// space; for three users the indices 1..18 are shared and each user's
/// formula draws on a subset (user 3 reuses cases 2 and 4).
#[derive(Debug, Clone)]
pub struct GammaCatalog {
    n_users: usize,
    /// (user, case, level); the per-user view listed by the formulas.
    entries: Vec<(usize, usize, AmplitudeLevel)>,
}

const N2_U1_CASES: [(usize, [i8; 3]); 2] = [(1, [1, -1, 0]), (2, [1, 1, 0])];
const N2_U2_CASES: [(usize, [i8; 3]); 5] = [
    (1, [0, 1, 0]),
    (2, [1, -1, 0]),
    (3, [1, 1, 0]),
    (4, [2, -1, 0]),
    (5, [2, 1, 0]),
];
const N3_LEVELS: [[i8; 3]; 18] = [
    [1, -1, -1],
    [1, -1, 1],
    [1, 1, -1],
    [1, 1, 1],
    [0, 1, 1],
    [0, 1, -1],
    [2, -1, -1],
    [2, -1, 1],
    [2, 1, -1],
    [2, 1, 1],
    [0, 0, 1],
    [0, 2, -1],
    [2, 0, 1],
    [2, 0, -1],
    [2, -2, -1],
    [2, -2, 1],
    [2, 2, -1],
    [2, 2, 1],
];

/// Assemble the complete catalog for a 2- or 3-user system.
pub fn gamma_catalog(n_users: usize, alloc: &PowerAllocation) -> Result<GammaCatalog> {
    if n_users != 2 && n_users != 3 {
        return Err(Error::Unsupported(format!(
            "analytic gamma catalog exists only for 2 or 3 users, got {n_users}"
        )));
    }
    if alloc.n_users() != n_users {
        return Err(Error::Config(format!(
            "allocation has {} users but catalog was requested for {n_users}",
            alloc.n_users()
        )));
    }
    let mut entries = Vec::new();
    match n_users {
        2 => {
            for (c, u) in N2_U1_CASES {
                entries.push((1, c, amplitude_level(u, alloc)?));
            }
            for (c, u) in N2_U2_CASES {
                entries.push((2, c, amplitude_level(u, alloc)?));
            }
        }
        3 => {
            // User 1: cases 1..4; user 2: cases 1..10; user 3: cases 11..18
            // (cases 2 and 4 are reused by lookup through the shared space).
            for (idx, u) in N3_LEVELS.iter().enumerate() {
                let c = idx + 1;
                if c <= 4 {
                    entries.push((1, c, amplitude_level(*u, alloc)?));
                }
                if c <= 10 {
                    entries.push((2, c, amplitude_level(*u, alloc)?));
                }
                if c >= 11 {
                    entries.push((3, c, amplitude_level(*u, alloc)?));
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(GammaCatalog { n_users, entries })
}

impl GammaCatalog {
    pub fn n_users(&self) -> usize {
        self.n_users
    }

    /// Every (user, case, level) entry the per-user formulas enumerate.
    pub fn entries(&self) -> &[(usize, usize, AmplitudeLevel)] {
        &self.entries
    }

    /// Resolve a case index for the given evaluating user.
    pub fn level(&self, user: usize, case: usize) -> Result<AmplitudeLevel> {
        if self.n_users == 3 {
            // Shared index space; any user may reference any defined case.
            if (1..=18).contains(&case) && (1..=3).contains(&user) {
                return Ok(self.entries.iter().find(|(_, c, _)| *c == case).unwrap().2);
            }
        } else if let Some(e) = self.entries.iter().find(|(u, c, _)| *u == user && *c == case) {
            return Ok(e.2);
        }
        Err(Error::Unsupported(format!(
            "no catalog entry for user {user}, case {case} in the {}-user system",
            self.n_users
        )))
    }

    /// γ_{n,c} = α²A²/σ² for the evaluating user's gain.
    pub fn gamma(&self, user: usize, case: usize, gain: f64, sigma2: f64) -> Result<f64> {
        let level = self.level(user, case)?;
        Ok(gain * gain * level.squared() / sigma2)
    }

    /// γ̄_{n,c} = A²Ω/σ², the averaging scale of the fading integrals.
    pub fn gamma_bar(&self, user: usize, case: usize, omega: f64, sigma2: f64) -> Result<f64> {
        let level = self.level(user, case)?;
        Ok(level.squared() * omega / sigma2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alloc2() -> PowerAllocation {
        PowerAllocation::new(vec![0.7, 0.3]).unwrap()
    }

    fn alloc3() -> PowerAllocation {
        PowerAllocation::new(vec![0.8, 0.15, 0.05]).unwrap()
    }

    #[test]
    fn allocation_validation() {
        assert!(PowerAllocation::new(vec![0.5, 0.6]).is_err());
        assert!(PowerAllocation::new(vec![0.3, 0.7]).is_err());
        assert!(PowerAllocation::new(vec![]).is_err());
        assert!(PowerAllocation::new(vec![1.0]).is_ok());
        assert!(PowerAllocation::new(vec![1.0, 0.0]).is_ok());
        // Equality at tolerance is allowed for optimizer boundary iterates.
        assert!(PowerAllocation::new(vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn bit_mapping_follows_sign_convention() {
        let p = map_bits((0, 0), 0.7).unwrap();
        assert!((p.re - 0.836_660_026_534_075_6).abs() < 1e-12);
        assert!((p.im - 0.836_660_026_534_075_6).abs() < 1e-12);

        let p = map_bits((1, 0), 1.0).unwrap();
        assert_eq!(p, Complex64::new(-1.0, 1.0));

        let p = map_bits((1, 1), 0.3).unwrap();
        assert!((p.re + 0.547_722_557_505_166_1).abs() < 1e-12);
        assert!((p.im + 0.547_722_557_505_166_1).abs() < 1e-12);
    }

    #[test]
    fn gray_adjacency_single_sign_flip() {
        for i in 0..4 {
            let s = QpskSymbol::from_index(i).unwrap();
            let f1 = QpskSymbol::new(s.bits.0 ^ 1, s.bits.1).unwrap();
            let f2 = QpskSymbol::new(s.bits.0, s.bits.1 ^ 1).unwrap();
            assert_eq!(s.i_sign(), -f1.i_sign());
            assert_eq!(s.q_sign(), f1.q_sign());
            assert_eq!(s.i_sign(), f2.i_sign());
            assert_eq!(s.q_sign(), -f2.q_sign());
        }
    }

    #[test]
    fn superpose_matches_reference_points() {
        // s1 = s2 = 10 puts the inphase at -(sqrt(b1) + sqrt(b2)).
        let s = [QpskSymbol::from_index(2).unwrap(), QpskSymbol::from_index(2).unwrap()];
        let x = superpose(&s, &alloc2()).unwrap();
        assert!((x.re + 1.384_382_584_039_241_7).abs() < 1e-12);
        assert!((x.im - 1.384_382_584_039_241_7).abs() < 1e-12);

        // Degenerate single-user split.
        let alloc = PowerAllocation::new(vec![1.0, 0.0]).unwrap();
        let s = [QpskSymbol::new(0, 0).unwrap(), QpskSymbol::new(1, 1).unwrap()];
        let x = superpose(&s, &alloc).unwrap();
        assert!((x - Complex64::new(1.0, 1.0)).norm() < 1e-12);

        // All-zero bits with three users.
        let s = [QpskSymbol::new(0, 0).unwrap(); 3];
        let x = superpose(&s, &alloc3()).unwrap();
        let expect = 0.8f64.sqrt() + 0.15f64.sqrt() + 0.05f64.sqrt();
        assert!((x.re - expect).abs() < 1e-12);
        assert!((expect - 1.505_332_323_370_636_4).abs() < 1e-12);

        assert!(superpose(&s[..2], &alloc3()).is_err());
    }

    #[test]
    fn superpose_linear_in_each_user() {
        let alloc = PowerAllocation::new(vec![0.6, 0.4]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let s1 = QpskSymbol::from_index(i).unwrap();
                let s2 = QpskSymbol::from_index(j).unwrap();
                let x = superpose(&[s1, s2], &alloc).unwrap();
                let parts = map_bits(s1.bits, 0.6).unwrap() + map_bits(s2.bits, 0.4).unwrap();
                assert!((x - parts).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn amplitude_level_arithmetic() {
        let l = amplitude_level([1, 1, 0], &alloc2()).unwrap();
        assert!((l.value - 1.384_382_584_039_241_7).abs() < 1e-12);
        let l = amplitude_level([0, 0, 0], &alloc2()).unwrap();
        assert_eq!(l.value, 0.0);
        let l = amplitude_level([2, -1, 0], &alloc2()).unwrap();
        assert!((l.value - (2.0 * 0.7f64.sqrt() - 0.3f64.sqrt())).abs() < 1e-12);
        assert!((l.value - 1.125_597_495_563_0).abs() < 1e-10);

        assert!(amplitude_level([0, 0, 1], &alloc2()).is_err());
        assert!(amplitude_level([3, 0, 0], &alloc3()).is_err());
    }

    #[test]
    fn catalog_cardinality_and_lookup() {
        let cat2 = gamma_catalog(2, &alloc2()).unwrap();
        assert_eq!(cat2.entries().len(), 2 + 5);
        let cat3 = gamma_catalog(3, &alloc3()).unwrap();
        assert_eq!(cat3.entries().len(), 4 + 10 + 8);

        // gamma_{2,1} for N=2 has the level sqrt(beta2).
        let l = cat2.level(2, 1).unwrap();
        assert!((l.value - 0.3f64.sqrt()).abs() < 1e-12);
        assert!((l.value - 0.547_722_557_505_166_1).abs() < 1e-12);

        // N=3 user 3 case 11 is sqrt(beta3); cases 2 and 4 resolve via reuse.
        let l = cat3.level(3, 11).unwrap();
        assert!((l.value - 0.05f64.sqrt()).abs() < 1e-12);
        assert!((l.value - 0.223_606_797_749_979).abs() < 1e-12);
        assert!(cat3.level(3, 2).is_ok());
        assert!(cat3.level(3, 4).is_ok());
        assert!(cat3.level(3, 12).is_ok());

        assert!(cat2.level(2, 6).is_err());
        assert!(cat2.level(1, 3).is_err());
        assert!(gamma_catalog(4, &alloc3()).is_err());
    }

    #[test]
    fn catalog_gamma_scaling() {
        let cat = gamma_catalog(2, &alloc2()).unwrap();
        let g = cat.gamma(2, 1, 1.2, 0.05).unwrap();
        assert!((g - 1.2 * 1.2 * 0.3 / 0.05).abs() < 1e-10);
        let gb = cat.gamma_bar(2, 1, 1.0, 0.05).unwrap();
        assert!((gb - 0.3 / 0.05).abs() < 1e-10);
        assert!(g >= 0.0 && gb >= 0.0);
    }
}
