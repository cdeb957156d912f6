//! Python bindings for the cachefield library.
//!
//! The module mirrors the core surface: state spaces, replacement schemes,
//! transition matrices and fields, hit-probability analysis, trace generation,
//! and the Monte Carlo simulator. Vectors cross the boundary as plain lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use cachefield::analysis;
use cachefield::popularity::{self, ModelConfig, ModelKind, PopularityVector, Predictor};
use cachefield::schemes;
use cachefield::simulator::{self, SimConfig};
use cachefield::state_space::ContentId;

/// Dense row-major matrix crossing the boundary as nested lists.
type Matrix = Vec<Vec<f64>>;
/// One simplex-grid sample: (eta, u, d_gamma).
type FieldPoint = ([f64; 3], [f64; 3], f64);

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn popularity_vector(values: Vec<f64>) -> PyResult<PopularityVector> {
    PopularityVector::new(values).map_err(value_err)
}

#[pyclass(name = "StateSpace")]
struct PyStateSpace {
    inner: cachefield::StateSpace,
}

#[pymethods]
impl PyStateSpace {
    #[new]
    fn new(n_contents: usize, cache_size: usize) -> PyResult<Self> {
        Ok(Self {
            inner: cachefield::StateSpace::build(n_contents, cache_size).map_err(value_err)?,
        })
    }

    #[getter]
    fn n_states(&self) -> usize {
        self.inner.n_states()
    }

    #[getter]
    fn n_contents(&self) -> usize {
        self.inner.n_contents()
    }

    #[getter]
    fn cache_size(&self) -> usize {
        self.inner.cache_size()
    }

    /// All cache states as sorted content-id lists, in index order.
    fn states(&self) -> Vec<Vec<usize>> {
        self.inner
            .states()
            .iter()
            .map(|s| s.contents().iter().map(|c| c.index()).collect())
            .collect()
    }

    fn state_vector(&self, k: usize) -> PyResult<Vec<f64>> {
        self.inner.state_vector(k).map_err(value_err)
    }

    fn neighbors(&self, k: usize) -> PyResult<Vec<usize>> {
        self.inner.neighbors(k).map_err(value_err)
    }

    fn content_neighbors(&self, k: usize, l: usize) -> PyResult<Vec<usize>> {
        self.inner
            .content_neighbors(k, ContentId(l))
            .map_err(value_err)
    }

    fn exchanged_content(&self, k: usize, m: usize) -> PyResult<usize> {
        Ok(self
            .inner
            .exchanged_content(k, m)
            .map_err(value_err)?
            .index())
    }

    fn __repr__(&self) -> String {
        format!(
            "StateSpace(n_contents={}, cache_size={}, n_states={})",
            self.inner.n_contents(),
            self.inner.cache_size(),
            self.inner.n_states()
        )
    }
}

#[pyclass(name = "Scheme")]
#[derive(Clone)]
struct PyScheme {
    inner: schemes::SchemeSpec,
}

#[pymethods]
impl PyScheme {
    #[staticmethod]
    fn rr(phi: f64) -> Self {
        Self {
            inner: schemes::SchemeSpec::Rr { phi },
        }
    }

    #[staticmethod]
    fn lp(alpha: f64) -> Self {
        Self {
            inner: schemes::SchemeSpec::Lp { alpha },
        }
    }

    #[staticmethod]
    fn tlpa() -> Self {
        Self {
            inner: schemes::SchemeSpec::TlpA,
        }
    }

    #[staticmethod]
    fn tlpp() -> Self {
        Self {
            inner: schemes::SchemeSpec::TlpP,
        }
    }

    #[staticmethod]
    fn lru() -> Self {
        Self {
            inner: schemes::SchemeSpec::Lru,
        }
    }

    fn __repr__(&self) -> String {
        format!("Scheme({})", self.inner.name())
    }
}

#[pyclass(name = "LruTable")]
#[derive(Clone)]
struct PyLruTable {
    inner: schemes::LruConditionalTable,
}

#[pymethods]
impl PyLruTable {
    /// Estimates the recency table from a seeded LRU simulation.
    #[staticmethod]
    fn estimate(
        space: &PyStateSpace,
        upsilon: Vec<f64>,
        n_requests: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let upsilon = popularity_vector(upsilon)?;
        Ok(Self {
            inner: schemes::LruConditionalTable::estimate_monte_carlo(
                &space.inner,
                &upsilon,
                n_requests,
                seed,
            )
            .map_err(value_err)?,
        })
    }

    /// Exact table from the window enumeration under constant popularity.
    #[staticmethod]
    fn exact_constant(
        space: &PyStateSpace,
        upsilon: Vec<f64>,
        w_max: usize,
        tail_tol: f64,
    ) -> PyResult<Self> {
        let upsilon = popularity_vector(upsilon)?;
        let history = vec![upsilon; w_max];
        Ok(Self {
            inner: schemes::LruConditionalTable::exact_from_history(
                &space.inner,
                &history,
                w_max,
                tail_tol,
            )
            .map_err(value_err)?,
        })
    }

    fn prob(&self, space: &PyStateSpace, k: usize, q: usize) -> PyResult<f64> {
        self.inner
            .prob(&space.inner, k, ContentId(q))
            .map_err(value_err)
    }
}

fn build_matrix(
    scheme: &PyScheme,
    space: &PyStateSpace,
    upsilon: &PopularityVector,
    prediction: Option<&PopularityVector>,
    lru_table: Option<&PyLruTable>,
) -> PyResult<cachefield::TransitionMatrix> {
    schemes::overall_transition(
        &scheme.inner,
        &space.inner,
        upsilon,
        prediction,
        lru_table.map(|t| &t.inner),
    )
    .map_err(value_err)
}

/// Overall transition matrix as a dense row-major list of lists.
#[pyfunction]
#[pyo3(signature = (scheme, space, upsilon, prediction=None, lru_table=None))]
fn overall_transition(
    scheme: &PyScheme,
    space: &PyStateSpace,
    upsilon: Vec<f64>,
    prediction: Option<Vec<f64>>,
    lru_table: Option<&PyLruTable>,
) -> PyResult<Matrix> {
    let upsilon = popularity_vector(upsilon)?;
    let prediction = match prediction {
        Some(p) => popularity_vector(p)?,
        None => upsilon.clone(),
    };
    Ok(build_matrix(scheme, space, &upsilon, Some(&prediction), lru_table)?.to_dense())
}

/// Conditional transition matrix for one requested content, dense.
#[pyfunction]
#[pyo3(signature = (scheme, space, l, prediction=None, lru_table=None))]
fn conditional_transition(
    scheme: &PyScheme,
    space: &PyStateSpace,
    l: usize,
    prediction: Option<Vec<f64>>,
    lru_table: Option<&PyLruTable>,
) -> PyResult<Matrix> {
    let prediction = prediction.map(popularity_vector).transpose()?;
    Ok(schemes::conditional_transition(
        &scheme.inner,
        &space.inner,
        ContentId(l),
        prediction.as_ref(),
        lru_table.map(|t| &t.inner),
    )
    .map_err(value_err)?
    .to_dense())
}

/// Instantaneous field `Theta eta - eta` at an SCP point.
#[pyfunction]
#[pyo3(signature = (scheme, space, upsilon, eta, prediction=None, lru_table=None))]
fn instantaneous_stf(
    scheme: &PyScheme,
    space: &PyStateSpace,
    upsilon: Vec<f64>,
    eta: Vec<f64>,
    prediction: Option<Vec<f64>>,
    lru_table: Option<&PyLruTable>,
) -> PyResult<Vec<f64>> {
    let upsilon = popularity_vector(upsilon)?;
    let prediction = match prediction {
        Some(p) => popularity_vector(p)?,
        None => upsilon.clone(),
    };
    let eta = analysis::SCPVector::new(eta).map_err(value_err)?;
    let theta = build_matrix(scheme, space, &upsilon, Some(&prediction), lru_table)?;
    Ok(analysis::instantaneous_stf(&theta, &eta)
        .map_err(value_err)?
        .as_slice()
        .to_vec())
}

/// Content caching probabilities `C_s eta`.
#[pyfunction]
fn ccp_from_scp(space: &PyStateSpace, eta: Vec<f64>) -> PyResult<Vec<f64>> {
    let eta = analysis::SCPVector::new(eta).map_err(value_err)?;
    Ok(analysis::ccp_from_scp(&space.inner, &eta)
        .map_err(value_err)?
        .as_slice()
        .to_vec())
}

/// Minimum-norm SCP reproducing the content caching probabilities; returns
/// `(eta, unique)`.
#[pyfunction]
fn scp_from_ccp(space: &PyStateSpace, lam: Vec<f64>) -> PyResult<(Vec<f64>, bool)> {
    let lam = analysis::CCPVector::new(lam, space.inner.cache_size()).map_err(value_err)?;
    let lifted = analysis::scp_from_ccp(&space.inner, &lam).map_err(value_err)?;
    Ok((lifted.eta.as_slice().to_vec(), lifted.unique))
}

/// Next-request hit probability `upsilon . lambda`. The CCP mass determines
/// the cache size.
#[pyfunction]
fn instantaneous_hit_prob(upsilon_next: Vec<f64>, lam: Vec<f64>) -> PyResult<f64> {
    let upsilon = popularity_vector(upsilon_next)?;
    let cache_size = lam.iter().sum::<f64>().round() as usize;
    let lam = analysis::CCPVector::new(lam, cache_size).map_err(value_err)?;
    analysis::instantaneous_hit_prob(&upsilon, &lam).map_err(value_err)
}

/// One-step hit-probability delta of performing the replacement.
#[pyfunction]
#[pyo3(signature = (scheme, space, upsilon_n, upsilon_next, eta, prediction=None, lru_table=None))]
#[allow(clippy::too_many_arguments)]
fn hit_prob_delta(
    scheme: &PyScheme,
    space: &PyStateSpace,
    upsilon_n: Vec<f64>,
    upsilon_next: Vec<f64>,
    eta: Vec<f64>,
    prediction: Option<Vec<f64>>,
    lru_table: Option<&PyLruTable>,
) -> PyResult<f64> {
    let upsilon_n = popularity_vector(upsilon_n)?;
    let upsilon_next = popularity_vector(upsilon_next)?;
    let prediction = match prediction {
        Some(p) => popularity_vector(p)?,
        None => upsilon_next.clone(),
    };
    let eta = analysis::SCPVector::new(eta).map_err(value_err)?;
    let theta = build_matrix(scheme, space, &upsilon_n, Some(&prediction), lru_table)?;
    let u = analysis::instantaneous_stf(&theta, &eta).map_err(value_err)?;
    analysis::hit_prob_delta(&upsilon_next, &space.inner, &u).map_err(value_err)
}

/// Worst-case `(lower, upper)` bounds on the one-step delta.
#[pyfunction]
#[pyo3(signature = (scheme, upsilon_n, cache_size, prediction=None))]
fn delta_bounds(
    scheme: &PyScheme,
    upsilon_n: Vec<f64>,
    cache_size: usize,
    prediction: Option<Vec<f64>>,
) -> PyResult<(f64, f64)> {
    let upsilon_n = popularity_vector(upsilon_n)?;
    let prediction = prediction.map(popularity_vector).transpose()?;
    analysis::delta_bounds(&scheme.inner, &upsilon_n, prediction.as_ref(), cache_size)
        .map_err(value_err)
}

/// Steady state under constant popularity.
#[pyfunction]
#[pyo3(signature = (scheme, space, upsilon, prediction=None, lru_table=None, tol=1e-12, max_iters=1_000_000))]
fn steady_state(
    scheme: &PyScheme,
    space: &PyStateSpace,
    upsilon: Vec<f64>,
    prediction: Option<Vec<f64>>,
    lru_table: Option<&PyLruTable>,
    tol: f64,
    max_iters: usize,
) -> PyResult<Vec<f64>> {
    let upsilon = popularity_vector(upsilon)?;
    let prediction = match prediction {
        Some(p) => popularity_vector(p)?,
        None => upsilon.clone(),
    };
    Ok(analysis::steady_state(
        &scheme.inner,
        &space.inner,
        &upsilon,
        Some(&prediction),
        lru_table.map(|t| &t.inner),
        tol,
        max_iters,
    )
    .map_err(value_err)?
    .as_slice()
    .to_vec())
}

/// SCP trajectory and field increments through a popularity sequence;
/// returns `(etas, stfs)`.
#[pyfunction]
#[pyo3(signature = (scheme, space, popularity_seq, eta0, prediction_seq=None, lru_table=None))]
fn evolve_scp(
    scheme: &PyScheme,
    space: &PyStateSpace,
    popularity_seq: Vec<Vec<f64>>,
    eta0: Vec<f64>,
    prediction_seq: Option<Vec<Vec<f64>>>,
    lru_table: Option<&PyLruTable>,
) -> PyResult<(Matrix, Matrix)> {
    let seq: Vec<PopularityVector> = popularity_seq
        .into_iter()
        .map(popularity_vector)
        .collect::<PyResult<_>>()?;
    let preds: Option<Vec<PopularityVector>> = prediction_seq
        .map(|ps| {
            ps.into_iter()
                .map(popularity_vector)
                .collect::<PyResult<_>>()
        })
        .transpose()?;
    let eta0 = analysis::SCPVector::new(eta0).map_err(value_err)?;
    let evo = analysis::evolve_scp(
        &scheme.inner,
        &space.inner,
        &seq,
        preds.as_deref(),
        &eta0,
        lru_table.map(|t| &t.inner),
    )
    .map_err(value_err)?;
    Ok((
        evo.etas.iter().map(|e| e.as_slice().to_vec()).collect(),
        evo.stfs.iter().map(|u| u.as_slice().to_vec()).collect(),
    ))
}

/// Field samples over the SCP simplex of a 3-state space:
/// `(eta, u, d_gamma)` per grid point.
#[pyfunction]
#[pyo3(signature = (scheme, space, upsilon_n, upsilon_next, grid_step=0.05, lru_table=None))]
fn field_grid(
    scheme: &PyScheme,
    space: &PyStateSpace,
    upsilon_n: Vec<f64>,
    upsilon_next: Vec<f64>,
    grid_step: f64,
    lru_table: Option<&PyLruTable>,
) -> PyResult<Vec<FieldPoint>> {
    let upsilon_n = popularity_vector(upsilon_n)?;
    let upsilon_next = popularity_vector(upsilon_next)?;
    let samples = analysis::field_grid(
        &scheme.inner,
        &space.inner,
        &upsilon_n,
        &upsilon_next,
        None,
        lru_table.map(|t| &t.inner),
        grid_step,
    )
    .map_err(value_err)?;
    Ok(samples
        .into_iter()
        .map(|s| (s.eta, s.u, s.d_gamma))
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn model_config(
    model: &str,
    n_contents: usize,
    t0_max: f64,
    a_min: f64,
    a_max: f64,
    decay_b: f64,
    sigma: f64,
    upsilon: Option<Vec<f64>>,
) -> PyResult<ModelConfig> {
    let kind = match model {
        "shotnoise" => ModelKind::ShotNoise { decay: decay_b },
        "gaussian" => ModelKind::GaussianPulse { sigma },
        "static" => ModelKind::Static(popularity_vector(upsilon.ok_or_else(|| {
            PyValueError::new_err("static model requires upsilon")
        })?)?),
        other => return Err(PyValueError::new_err(format!("unknown model '{other}'"))),
    };
    Ok(ModelConfig {
        n_contents,
        t0_max,
        a_min,
        a_max,
        kind,
    })
}

fn parse_predictor(name: &str) -> PyResult<Predictor> {
    if name == "oracle" {
        Ok(Predictor::Oracle)
    } else if let Some(k) = name.strip_prefix("stale:") {
        Ok(Predictor::StaleEveryK(k.parse().map_err(value_err)?))
    } else {
        Err(PyValueError::new_err(format!("unknown predictor '{name}'")))
    }
}

/// Samples a request trace; returns `(time, content)` pairs.
#[pyfunction]
#[pyo3(signature = (model, n_contents, horizon, seed, t0_max=0.0, a_min=1.0, a_max=100.0, decay_b=0.01, sigma=200.0, upsilon=None))]
#[allow(clippy::too_many_arguments)]
fn sample_trace(
    model: &str,
    n_contents: usize,
    horizon: f64,
    seed: u64,
    t0_max: f64,
    a_min: f64,
    a_max: f64,
    decay_b: f64,
    sigma: f64,
    upsilon: Option<Vec<f64>>,
) -> PyResult<Vec<(f64, usize)>> {
    let config = model_config(model, n_contents, t0_max, a_min, a_max, decay_b, sigma, upsilon)?;
    let sampled = popularity::sample_model(&config, seed).map_err(value_err)?;
    let trace = popularity::sample_trace(&sampled, horizon, seed).map_err(value_err)?;
    Ok(trace
        .requests()
        .iter()
        .map(|&(t, c)| (t, c.index()))
        .collect())
}

/// Seeded multi-round hit-ratio estimate; returns
/// `(mean, stderr, per_round, total_requests)`.
#[pyfunction]
#[pyo3(signature = (scheme, cache_size, model, n_contents, horizon, rounds, seed,
                    t0_max=0.0, a_min=1.0, a_max=100.0, decay_b=0.01, sigma=200.0,
                    upsilon=None, predictor="oracle", lookahead=true))]
#[allow(clippy::too_many_arguments)]
fn run_monte_carlo(
    scheme: &PyScheme,
    cache_size: usize,
    model: &str,
    n_contents: usize,
    horizon: f64,
    rounds: usize,
    seed: u64,
    t0_max: f64,
    a_min: f64,
    a_max: f64,
    decay_b: f64,
    sigma: f64,
    upsilon: Option<Vec<f64>>,
    predictor: &str,
    lookahead: bool,
) -> PyResult<(f64, f64, Vec<f64>, u64)> {
    let config = SimConfig {
        model_config: model_config(
            model, n_contents, t0_max, a_min, a_max, decay_b, sigma, upsilon,
        )?,
        horizon,
        rounds,
        cache_size,
        master_seed: seed,
        predictor: parse_predictor(predictor)?,
        lookahead,
    };
    let result = simulator::run_monte_carlo(&scheme.inner, &config).map_err(value_err)?;
    Ok((
        result.mean,
        result.stderr,
        result.per_round_hit_ratio,
        result.total_requests,
    ))
}

#[pymodule]
fn cachefield_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStateSpace>()?;
    m.add_class::<PyScheme>()?;
    m.add_class::<PyLruTable>()?;
    m.add_function(wrap_pyfunction!(overall_transition, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_transition, m)?)?;
    m.add_function(wrap_pyfunction!(instantaneous_stf, m)?)?;
    m.add_function(wrap_pyfunction!(ccp_from_scp, m)?)?;
    m.add_function(wrap_pyfunction!(scp_from_ccp, m)?)?;
    m.add_function(wrap_pyfunction!(instantaneous_hit_prob, m)?)?;
    m.add_function(wrap_pyfunction!(hit_prob_delta, m)?)?;
    m.add_function(wrap_pyfunction!(delta_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_scp, m)?)?;
    m.add_function(wrap_pyfunction!(field_grid, m)?)?;
    m.add_function(wrap_pyfunction!(sample_trace, m)?)?;
    m.add_function(wrap_pyfunction!(run_monte_carlo, m)?)?;
    Ok(())
}
