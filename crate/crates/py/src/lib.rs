//! Python bindings: the main analytic, oracle, simulation, and optimization
//! entry points of the NOMA BER library.

use noma_ber::avg_ber as averaging;
use noma_ber::avg_ber::{AvgBerSpec, OracleControls};
use noma_ber::detectors::SicMode;
use noma_ber::exact_cond_ber::{self, CondBerInput};
use noma_ber::model::PowerAllocation;
use noma_ber::montecarlo::{self, SimConfig};
use noma_ber::optimizer::{self, Objective, OptProblem};
use noma_ber::special_math;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err<T>(r: noma_ber::Result<T>) -> PyResult<T> {
    r.map_err(|e| PyValueError::new_err(e.to_string()))
}

fn sigma2_of(ebn0_db: f64) -> f64 {
    0.5 * 10f64.powf(-ebn0_db / 10.0)
}

/// Per-user power fractions, ordered weakest channel first.
#[pyclass(name = "PowerAllocation", skip_from_py_object)]
#[derive(Clone)]
struct PyPowerAllocation {
    inner: PowerAllocation,
}

#[pymethods]
impl PyPowerAllocation {
    #[new]
    fn new(betas: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: err(PowerAllocation::new(betas))? })
    }

    fn betas(&self) -> Vec<f64> {
        self.inner.betas().to_vec()
    }

    fn n_users(&self) -> usize {
        self.inner.n_users()
    }

    fn __repr__(&self) -> String {
        format!("PowerAllocation({:?})", self.inner.betas())
    }
}

/// Gaussian tail probability Q(x).
#[pyfunction]
fn q_func(x: f64) -> PyResult<f64> {
    err(special_math::q_func(x))
}

/// Closed-form conditional BER of one user at fixed gains (2 or 3 users).
#[pyfunction]
fn conditional_ber(betas: Vec<f64>, user: usize, gains: Vec<f64>, ebn0_db: f64) -> PyResult<f64> {
    let alloc = err(PowerAllocation::new(betas))?;
    let sigma2 = sigma2_of(ebn0_db);
    let n = alloc.n_users();
    let input = err(CondBerInput::new(alloc, user, gains, sigma2))?;
    let value = match (n, user) {
        (2, 1) => err(exact_cond_ber::cond_ber_n2_u1(&input))?,
        (2, 2) => err(exact_cond_ber::cond_ber_n2_u2(&input))?,
        (3, _) => err(exact_cond_ber::cond_ber_n3(&input, None))?,
        _ => return Err(PyValueError::new_err("closed formulas exist for 2 or 3 users")),
    };
    Ok(value.value)
}

/// Exact conditional BER of every user by trajectory enumeration (N <= 8).
#[pyfunction]
fn enumerate_exact(betas: Vec<f64>, gains: Vec<f64>, ebn0_db: f64) -> PyResult<Vec<f64>> {
    let alloc = err(PowerAllocation::new(betas))?;
    let r = err(exact_cond_ber::enumerate_exact(&alloc, &gains, sigma2_of(ebn0_db)))?;
    Ok(r.per_user)
}

/// Fading-averaged BER of one user through the Nakagami series.
#[pyfunction]
fn avg_ber(betas: Vec<f64>, user: usize, m: f64, omega: f64, ebn0_db: f64) -> PyResult<f64> {
    let alloc = err(PowerAllocation::new(betas))?;
    let spec = err(AvgBerSpec::new(alloc, user, m, omega, ebn0_db))?;
    let r = err(averaging::avg_ber(&spec))?;
    if !r.converged {
        return Err(PyValueError::new_err("series did not converge"));
    }
    Ok(r.value)
}

/// Closed-form Rayleigh (m = 1) average BER of one user.
#[pyfunction]
fn rayleigh_closed_avg(betas: Vec<f64>, user: usize, omega: f64, ebn0_db: f64) -> PyResult<f64> {
    let alloc = err(PowerAllocation::new(betas))?;
    let spec = err(AvgBerSpec::new(alloc, user, 1.0, omega, ebn0_db))?;
    Ok(err(averaging::rayleigh_closed_for_spec(&spec))?.value)
}

/// Stratified exact-average oracle; returns (value, std_error).
#[pyfunction]
fn average_oracle(betas: Vec<f64>, user: usize, m: f64, omega: f64, ebn0_db: f64) -> PyResult<(f64, f64)> {
    let alloc = err(PowerAllocation::new(betas))?;
    let spec = err(AvgBerSpec::new(alloc, user, m, omega, ebn0_db))?;
    let r = err(averaging::avg_numeric_oracle(&spec, OracleControls::default()))?;
    Ok((r.value, r.std_error))
}

/// Symbol-level Monte Carlo at one Eb/N0 point. Returns, per user,
/// (ber, ci_low, ci_high, bit_errors).
#[pyfunction]
#[pyo3(signature = (betas, m, omega, ebn0_db, trials, seed, perfect_sic=false, fixed_gains=None))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    betas: Vec<f64>,
    m: f64,
    omega: f64,
    ebn0_db: f64,
    trials: u64,
    seed: u64,
    perfect_sic: bool,
    fixed_gains: Option<Vec<f64>>,
) -> PyResult<Vec<(f64, f64, f64, u64)>> {
    let alloc = err(PowerAllocation::new(betas))?;
    let config = SimConfig {
        alloc,
        m,
        omega,
        ebn0_db_grid: vec![ebn0_db],
        trials,
        seed,
        sic_mode: if perfect_sic { SicMode::Perfect } else { SicMode::Imperfect },
        fixed_gains,
        max_rel_ci_half_width: None,
    };
    let estimates = err(montecarlo::run(&config))?;
    Ok(estimates[0]
        .per_user
        .iter()
        .map(|u| (u.ber, u.ci_low, u.ci_high, u.errors))
        .collect())
}

/// Optimal power allocation; `objective` is "fairness" or "min-average".
/// Returns (betas, per_user_ber, residual, converged).
#[pyfunction]
fn solve_power_allocation(
    objective: &str,
    n_users: usize,
    m: f64,
    omega: f64,
    ebn0_db: f64,
) -> PyResult<(Vec<f64>, Vec<f64>, f64, bool)> {
    let obj = match objective {
        "fairness" => Objective::Fairness,
        "min-average" => Objective::MinAverage,
        other => {
            return Err(PyValueError::new_err(format!(
                "objective must be 'fairness' or 'min-average', got {other}"
            )))
        }
    };
    let problem = err(OptProblem::new(obj, n_users, m, omega, ebn0_db))?;
    let r = err(match obj {
        Objective::Fairness => optimizer::solve_fairness(&problem),
        Objective::MinAverage => optimizer::solve_min_average(&problem),
    })?;
    Ok((r.alloc.betas().to_vec(), r.per_user_ber, r.residual, r.converged))
}

#[pymodule]
fn noma_ber_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPowerAllocation>()?;
    m.add_function(wrap_pyfunction!(q_func, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_ber, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_exact, m)?)?;
    m.add_function(wrap_pyfunction!(avg_ber, m)?)?;
    m.add_function(wrap_pyfunction!(rayleigh_closed_avg, m)?)?;
    m.add_function(wrap_pyfunction!(average_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(solve_power_allocation, m)?)?;
    Ok(())
}
