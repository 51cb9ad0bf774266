//! Python bindings: `import pynbshare`.
//!
//! Games are built from full-power rates, from explicit gains, or from a
//! seeded random scenario. Solvers return a `SolveReport` whose lists are
//! plain Python floats.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use nbshare::oracle::{
    fdm_ts_oracle, grid_nb_two_user_smc, projected_gradient_for, PgOptions,
};
use nbshare::{
    ChannelSet, Classification, Disagreement, DualConfig, GameInstance, MaskSpec, Multipliers,
    NbError, ScenarioSpec, SolveReport, SpectralMask,
};

fn err(e: NbError) -> PyErr {
    match e {
        NbError::NoConvergence { .. } | NbError::Refused(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_disagreement(name: Option<&str>, has_tpc: bool) -> PyResult<Disagreement> {
    match name {
        None if has_tpc => Ok(Disagreement::Origin),
        None | Some("nash_equilibrium") | Some("ne") => Ok(Disagreement::NashEquilibrium),
        Some("origin") => Ok(Disagreement::Origin),
        Some(other) => Err(PyValueError::new_err(format!(
            "disagreement must be 'nash_equilibrium' or 'origin', not {other:?}"
        ))),
    }
}

/// A bargaining game: channels, spectral masks, optional power limits.
#[pyclass(name = "GameInstance", module = "pynbshare", frozen, skip_from_py_object)]
struct PyGame {
    inner: GameInstance,
}

#[pymethods]
impl PyGame {
    /// `gain[rx][tx][k]` magnitudes, per-user noise, `pmax[user][k]`.
    #[new]
    #[pyo3(signature = (gain, noise, pmax, tpc=None, disagreement=None))]
    fn new(
        gain: Vec<Vec<Vec<f64>>>,
        noise: Vec<f64>,
        pmax: Vec<Vec<f64>>,
        tpc: Option<Vec<f64>>,
        disagreement: Option<&str>,
    ) -> PyResult<Self> {
        let d = parse_disagreement(disagreement, tpc.is_some())?;
        let channels = ChannelSet::new(gain, noise).map_err(err)?;
        let mask = SpectralMask::new(pmax).map_err(err)?;
        let inner = GameInstance::new(channels, mask, tpc, d).map_err(err)?;
        Ok(Self { inner })
    }

    /// Interference-free game with the given full-mask rates per user and bin.
    #[staticmethod]
    #[pyo3(signature = (rates, pmax=None, tpc=None, disagreement=None))]
    fn from_rates(
        rates: Vec<Vec<f64>>,
        pmax: Option<Vec<Vec<f64>>>,
        tpc: Option<Vec<f64>>,
        disagreement: Option<&str>,
    ) -> PyResult<Self> {
        let d = parse_disagreement(disagreement, tpc.is_some())?;
        let pmax = pmax.unwrap_or_else(|| rates.iter().map(|r| vec![1.0; r.len()]).collect());
        let inner = GameInstance::from_exclusive_rates(&rates, pmax, tpc, d).map_err(err)?;
        Ok(Self { inner })
    }

    /// Seeded random game with Rayleigh gains and a Rayleigh mask.
    #[staticmethod]
    #[pyo3(signature = (users, bins, seed, noise=0.01, cross_mean=0.0, mask_mean=1.0, tpc=None))]
    fn random(
        users: usize,
        bins: usize,
        seed: u64,
        noise: f64,
        cross_mean: f64,
        mask_mean: f64,
        tpc: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let spec = ScenarioSpec {
            users,
            bins,
            noise,
            desired_mean: 1.0,
            cross_means: (cross_mean > 0.0).then(|| vec![vec![cross_mean; users]; users]),
            mask: MaskSpec::Rayleigh { mean: mask_mean },
            tpc,
            seed: None,
            disagreement: None,
        };
        let inner = nbshare::generate_scenario(&spec, seed).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn users(&self) -> usize {
        self.inner.users()
    }

    #[getter]
    fn bins(&self) -> usize {
        self.inner.bins()
    }

    #[getter]
    fn tpc(&self) -> Option<Vec<f64>> {
        self.inner.tpc().map(<[f64]>::to_vec)
    }

    /// Per-user, per-bin rates with the bin held alone at mask power.
    fn full_power_rates(&self) -> Vec<Vec<f64>> {
        self.inner.full_power_rates()
    }

    fn ne_rates(&self) -> Vec<f64> {
        self.inner.ne_rates()
    }

    fn disagreement_point(&self) -> Vec<f64> {
        self.inner.disagreement_point()
    }

    fn __repr__(&self) -> String {
        format!(
            "GameInstance(users={}, bins={}, tpc={:?})",
            self.inner.users(),
            self.inner.bins(),
            self.inner.tpc()
        )
    }
}

#[pyclass(name = "SolveReport", module = "pynbshare", frozen, skip_from_py_object)]
struct PyReport {
    inner: SolveReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method.name()
    }

    #[getter]
    fn rates(&self) -> Vec<f64> {
        self.inner.rates.clone()
    }

    #[getter]
    fn disagreement(&self) -> Vec<f64> {
        self.inner.disagreement.clone()
    }

    #[getter]
    fn log_nf(&self) -> f64 {
        self.inner.log_nf
    }

    #[getter]
    fn alpha(&self) -> Vec<Vec<f64>> {
        self.inner.allocation.alpha.clone()
    }

    #[getter]
    fn power(&self) -> Vec<Vec<f64>> {
        self.inner.allocation.power.clone()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.diagnostics.iterations
    }

    #[getter]
    fn duality_gap(&self) -> Option<f64> {
        self.inner.diagnostics.duality_gap
    }

    #[getter]
    fn classification(&self) -> Option<PyClassification> {
        self.inner
            .diagnostics
            .classification
            .clone()
            .map(|inner| PyClassification { inner })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn allocation_csv(&self) -> String {
        self.inner.allocation_csv()
    }

    fn __repr__(&self) -> String {
        format!(
            "SolveReport(method={:?}, rates={:?}, log_nf={})",
            self.inner.method.name(),
            self.inner.rates,
            self.inner.log_nf
        )
    }
}

#[pyclass(name = "Classification", module = "pynbshare", frozen, skip_from_py_object)]
struct PyClassification {
    inner: Classification,
}

#[pymethods]
impl PyClassification {
    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind.name()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau
    }

    /// `(bin, alpha_lo, alpha_hi)` of the first feasible split, if any.
    #[getter]
    fn witness(&self) -> Option<(usize, f64, f64)> {
        self.inner
            .witness
            .as_ref()
            .map(|w| (w.bin, w.alpha_lo, w.alpha_hi))
    }

    fn __repr__(&self) -> String {
        format!("Classification(kind={:?}, tau={})", self.inner.kind.name(), self.inner.tau)
    }
}

fn report(r: nbshare::Result<SolveReport>) -> PyResult<PyReport> {
    r.map(|inner| PyReport { inner }).map_err(err)
}

/// Picks the solver for the game: power-limited two-user scheme, exact
/// two-user solver, or dual decomposition.
#[pyfunction]
fn solve(py: Python<'_>, game: &PyGame) -> PyResult<PyReport> {
    let g = &game.inner;
    report(py.detach(|| {
        if g.tpc().is_some() {
            nbshare::solve_tpc(g)
        } else if g.users() == 2 {
            nbshare::solve_two_user_smc(g)
        } else {
            nbshare::run_dual(g, &DualConfig::default())
        }
    }))
}

#[pyfunction]
fn solve_two_user_smc(game: &PyGame) -> PyResult<PyReport> {
    report(nbshare::solve_two_user_smc(&game.inner))
}

#[pyfunction]
fn solve_tpc(game: &PyGame) -> PyResult<PyReport> {
    report(nbshare::solve_tpc(&game.inner))
}

#[pyfunction]
#[pyo3(signature = (game, delta=0.2, xi=1e-5, max_iters=100_000, lambda0=None))]
fn run_dual(
    py: Python<'_>,
    game: &PyGame,
    delta: f64,
    xi: f64,
    max_iters: usize,
    lambda0: Option<Vec<f64>>,
) -> PyResult<PyReport> {
    let lambda0 = lambda0.map(Multipliers::new).transpose().map_err(err)?;
    let cfg = DualConfig {
        delta,
        xi,
        max_iters,
        lambda0,
        ..DualConfig::default()
    };
    report(py.detach(|| nbshare::run_dual(&game.inner, &cfg)))
}

#[pyfunction]
fn classify(game: &PyGame) -> PyResult<PyClassification> {
    nbshare::classify(&game.inner)
        .map(|inner| PyClassification { inner })
        .map_err(err)
}

/// Vertices `(r1, r2)` of the two-user TDM/FDM Pareto boundary.
#[pyfunction]
fn tdmfdm_frontier(game: &PyGame) -> PyResult<Vec<(f64, f64)>> {
    let f = nbshare::tdmfdm_frontier(&game.inner).map_err(err)?;
    Ok(f.vertices.iter().map(|v| (v.rates[0], v.rates[1])).collect())
}

/// Capped water-filling; returns `(power, rate)`.
#[pyfunction]
fn waterfill(eps: Vec<f64>, budget: f64, caps: Vec<f64>) -> PyResult<(Vec<f64>, f64)> {
    let wf = nbshare::waterfill::waterfill(&eps, budget, &caps).map_err(err)?;
    Ok((wf.power, wf.rate))
}

#[pyfunction]
fn log_nf(rates: Vec<f64>, disagreement: Vec<f64>) -> PyResult<f64> {
    nbshare::bargaining::log_nf_rates(&rates, &disagreement).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (game, beta_step=1e-3))]
fn grid_oracle(game: &PyGame, beta_step: f64) -> PyResult<PyReport> {
    report(grid_nb_two_user_smc(&game.inner, beta_step))
}

#[pyfunction]
fn fdm_ts_oracle_py(game: &PyGame) -> PyResult<PyReport> {
    report(fdm_ts_oracle(&game.inner))
}

/// Log-NF of the projected-gradient reference solution.
#[pyfunction]
fn projected_gradient_log_nf(py: Python<'_>, game: &PyGame) -> PyResult<f64> {
    py.detach(|| projected_gradient_for(&game.inner, &PgOptions::default()))
        .map(|s| s.log_nf)
        .map_err(err)
}

#[pymodule]
fn pynbshare(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGame>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyClassification>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_two_user_smc, m)?)?;
    m.add_function(wrap_pyfunction!(solve_tpc, m)?)?;
    m.add_function(wrap_pyfunction!(run_dual, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(tdmfdm_frontier, m)?)?;
    m.add_function(wrap_pyfunction!(waterfill, m)?)?;
    m.add_function(wrap_pyfunction!(log_nf, m)?)?;
    m.add_function(wrap_pyfunction!(grid_oracle, m)?)?;
    m.add("fdm_ts_oracle", wrap_pyfunction!(fdm_ts_oracle_py, m)?)?;
    m.add_function(wrap_pyfunction!(projected_gradient_log_nf, m)?)?;
    Ok(())
}
