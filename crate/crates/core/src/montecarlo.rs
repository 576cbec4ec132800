//! End-to-end symbol-level simulation: fresh ordered gains per symbol,
//! superposed Gray-QPSK transmission, per-user AWGN, and the SIC detector
//! chain, with deterministic counter-based sharding.
//!
//! Trials are partitioned into fixed-size tasks seeded independently from
//! the master seed, so the error counts are identical no matter how many
//! worker threads execute them; parallel and serial runs agree bit for bit.

use crate::detectors::SicMode;
use crate::error::{Error, Result};
use crate::model::PowerAllocation;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

/// Trials per shard task; the unit of deterministic work splitting.
const TRIALS_PER_TASK: u64 = 1 << 16;

/// Simulation configuration for a grid of Eb/N0 points.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    pub alloc: PowerAllocation,
    pub m: f64,
    pub omega: f64,
    pub ebn0_db_grid: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub sic_mode: SicMode,
    /// Overrides fading: every trial uses these gains (conditional-BER mode).
    pub fixed_gains: Option<Vec<f64>>,
    /// Optional stop rule: halt a grid point early once every user's 95% CI
    /// half-width falls below this fraction of its BER estimate.
    pub max_rel_ci_half_width: Option<f64>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 10_000 {
            return Err(Error::Config(format!("need at least 1e4 trials, got {}", self.trials)));
        }
        if self.ebn0_db_grid.is_empty() {
            return Err(Error::Config("Eb/N0 grid must not be empty".into()));
        }
        if !(self.m >= 0.5) || !(self.omega > 0.0) {
            return Err(Error::Config(format!(
                "need m >= 0.5 and omega > 0, got m={}, omega={}",
                self.m, self.omega
            )));
        }
        if let Some(g) = &self.fixed_gains {
            if g.len() != self.alloc.n_users() {
                return Err(Error::Config(format!(
                    "{} fixed gains supplied for {} users",
                    g.len(),
                    self.alloc.n_users()
                )));
            }
            if g.iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::Config("fixed gains must be nonnegative".into()));
            }
        }
        if let Some(w) = self.max_rel_ci_half_width {
            if !(w > 0.0) {
                return Err(Error::Config("CI stop rule must be positive".into()));
            }
        }
        Ok(())
    }
}

/// How a BER estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Provenance {
    AnalyticConditional,
    AnalyticAverage,
    Oracle,
    MonteCarlo,
}

/// Per-user BER with its error counts and 95% Wilson interval.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct UserBer {
    pub ber: f64,
    pub errors: u64,
    pub errors_inphase: u64,
    pub errors_quadrature: u64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// One grid point's estimates.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BerEstimate {
    pub ebn0_db: f64,
    pub per_user: Vec<UserBer>,
    pub trials: u64,
    pub seed: u64,
    pub provenance: Provenance,
}

fn wilson_interval(errors: u64, n: u64) -> (f64, f64) {
    // 95% score interval; well-defined for zero counts.
    let z = 1.959_963_984_540_054f64;
    let n = n as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

struct TaskCounts {
    /// [user][0 = inphase, 1 = quadrature] bit errors.
    errors: Vec<[u64; 2]>,
    trials: u64,
}

fn run_task(config: &SimConfig, ebn0_db: f64, task_seed: u64, trials: u64) -> TaskCounts {
    let n = config.alloc.n_users();
    let sqrt_betas = config.alloc.sqrt_betas();
    let n0 = 10f64.powf(-ebn0_db / 10.0);
    let sigma = (n0 / 2.0).sqrt();
    let perfect = config.sic_mode == SicMode::Perfect;
    let mut rng = ChaCha8Rng::seed_from_u64(task_seed);
    let gamma_dist = rand_distr::Gamma::new(config.m, config.omega / config.m).unwrap();
    let normal = rand_distr::StandardNormal;

    let mut gains = vec![0.0f64; n];
    let mut tx_i = vec![0.0f64; n];
    let mut tx_q = vec![0.0f64; n];
    let mut errors = vec![[0u64; 2]; n];

    for _ in 0..trials {
        if let Some(fixed) = &config.fixed_gains {
            gains.copy_from_slice(fixed);
        } else {
            for g in gains.iter_mut() {
                *g = gamma_dist.sample(&mut rng).sqrt();
            }
            gains.sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
        let bits: u32 = rng.random();
        let mut x_i = 0.0;
        let mut x_q = 0.0;
        for k in 0..n {
            let ti = if bits & (1 << (2 * k)) == 0 { 1.0 } else { -1.0 };
            let tq = if bits & (1 << (2 * k + 1)) == 0 { 1.0 } else { -1.0 };
            tx_i[k] = ti;
            tx_q[k] = tq;
            x_i += sqrt_betas[k] * ti;
            x_q += sqrt_betas[k] * tq;
        }
        for user in 0..n {
            let alpha = gains[user];
            let wi: f64 = normal.sample(&mut rng);
            let wq: f64 = normal.sample(&mut rng);
            let mut res_i = alpha * x_i + sigma * wi;
            let mut res_q = alpha * x_q + sigma * wq;
            for k in 0..=user {
                let di = if res_i >= 0.0 { 1.0 } else { -1.0 };
                let dq = if res_q >= 0.0 { 1.0 } else { -1.0 };
                if k == user {
                    if di != tx_i[user] {
                        errors[user][0] += 1;
                    }
                    if dq != tx_q[user] {
                        errors[user][1] += 1;
                    }
                } else {
                    let (ci, cq) = if perfect { (tx_i[k], tx_q[k]) } else { (di, dq) };
                    res_i -= alpha * sqrt_betas[k] * ci;
                    res_q -= alpha * sqrt_betas[k] * cq;
                }
            }
        }
    }
    TaskCounts { errors, trials }
}

fn task_seed(master: u64, point: u64, task: u64) -> u64 {
    // SplitMix64 over the (master, point, task) triple.
    let mut z = master ^ point.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ task.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    for _ in 0..3 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut x = z;
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z = x ^ (x >> 31);
    }
    z
}

/// Run the simulation over the whole Eb/N0 grid.
///
/// Shards execute under the ambient rayon pool; counts depend only on the
/// seed and the (fixed) shard layout. When a relative-CI stop rule is set,
/// shards are consumed in deterministic groups so early stopping is itself
/// reproducible.
pub fn run(config: &SimConfig) -> Result<Vec<BerEstimate>> {
    config.validate()?;
    let n = config.alloc.n_users();
    let mut out = Vec::with_capacity(config.ebn0_db_grid.len());
    for (point_idx, &ebn0_db) in config.ebn0_db_grid.iter().enumerate() {
        let total_tasks = config.trials.div_ceil(TRIALS_PER_TASK);
        // Fixed group size keeps early stopping independent of thread count.
        let group = 8u64;
        let mut errors = vec![[0u64; 2]; n];
        let mut trials_done = 0u64;
        let mut next_task = 0u64;
        while next_task < total_tasks {
            let batch_end = if config.max_rel_ci_half_width.is_some() {
                (next_task + group).min(total_tasks)
            } else {
                total_tasks
            };
            let batch: Vec<TaskCounts> = (next_task..batch_end)
                .into_par_iter()
                .map(|t| {
                    let trials = if (t + 1) * TRIALS_PER_TASK <= config.trials {
                        TRIALS_PER_TASK
                    } else {
                        config.trials - t * TRIALS_PER_TASK
                    };
                    run_task(config, ebn0_db, task_seed(config.seed, point_idx as u64, t), trials)
                })
                .collect();
            for tc in batch {
                for (acc, e) in errors.iter_mut().zip(tc.errors.iter()) {
                    acc[0] += e[0];
                    acc[1] += e[1];
                }
                trials_done += tc.trials;
            }
            next_task = batch_end;
            if let Some(limit) = config.max_rel_ci_half_width {
                let all_tight = (0..n).all(|u| {
                    let e = errors[u][0] + errors[u][1];
                    let bits = 2 * trials_done;
                    let (lo, hi) = wilson_interval(e, bits);
                    let p = e as f64 / bits as f64;
                    e > 0 && 0.5 * (hi - lo) <= limit * p
                });
                if all_tight {
                    break;
                }
            }
        }
        let per_user = (0..n)
            .map(|u| {
                let e = errors[u][0] + errors[u][1];
                let bits = 2 * trials_done;
                let (ci_low, ci_high) = wilson_interval(e, bits);
                UserBer {
                    ber: e as f64 / bits as f64,
                    errors: e,
                    errors_inphase: errors[u][0],
                    errors_quadrature: errors[u][1],
                    ci_low,
                    ci_high,
                }
            })
            .collect();
        out.push(BerEstimate {
            ebn0_db,
            per_user,
            trials: trials_done,
            seed: config.seed,
            provenance: Provenance::MonteCarlo,
        });
    }
    Ok(out)
}
