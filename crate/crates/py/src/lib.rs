//! Python bindings. Structured results (training and symmetry reports,
//! network specs) cross the boundary as JSON and arrive as plain dicts.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use seagull::bench::{self, ExperimentPlan, TargetSpec};
use seagull::datagen::{self, Domain, NoiseSpec, Point9, SolidAngleVariant, TargetKind, TransformKind};
use seagull::network::{Network, NetworkSpec};
use seagull::{checkpoint, symmetry, ActivationKind, Tensor};

fn err(e: seagull::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn activation(name: &str) -> PyResult<ActivationKind> {
    name.parse().map_err(err)
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn rows_to_tensor(rows: Vec<Vec<f64>>) -> PyResult<Tensor> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Tensor::new(vec![n, d], rows.concat()).map_err(err)
}

fn point(p: Vec<f64>) -> PyResult<Point9> {
    if p.len() != 9 {
        return Err(PyValueError::new_err(format!("expected 9 coordinates, got {}", p.len())));
    }
    Ok(Point9::from_slice(&p))
}

/// `eval(name, x)` for each `x`.
#[pyfunction]
fn activation_eval(name: &str, xs: Vec<f64>) -> PyResult<Vec<f64>> {
    let k = activation(name)?;
    Ok(xs.into_iter().map(|x| k.eval(x)).collect())
}

#[pyfunction]
fn activation_deriv(name: &str, xs: Vec<f64>) -> PyResult<Vec<f64>> {
    let k = activation(name)?;
    Ok(xs.into_iter().map(|x| k.deriv(x)).collect())
}

/// `(is_even, is_odd)`
#[pyfunction]
fn activation_parity(name: &str) -> PyResult<(bool, bool)> {
    let k = activation(name)?;
    Ok((k.is_even(), k.is_odd()))
}

#[pyfunction]
fn triangle_area(p: Vec<f64>) -> PyResult<f64> {
    Ok(datagen::triangle_area(&point(p)?))
}

#[pyfunction]
#[pyo3(signature = (p, variant = "paper"))]
fn solid_angle(p: Vec<f64>, variant: &str) -> PyResult<f64> {
    let variant = match variant {
        "paper" => SolidAngleVariant::Paper,
        "standard" => SolidAngleVariant::Standard,
        other => return Err(PyValueError::new_err(format!("unknown variant {other:?}; valid: paper, standard"))),
    };
    datagen::solid_angle(&point(p)?, variant).map_err(err)
}

/// Returns `(features, labels)` as lists.
#[pyfunction]
#[pyo3(signature = (target, transform, n, seed, noise = None, domain = None))]
fn make_dataset(
    target: &str,
    transform: &str,
    n: usize,
    seed: u64,
    noise: Option<f64>,
    domain: Option<&str>,
) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let target: TargetKind = target.parse().map_err(err)?;
    let transform: TransformKind = transform.parse().map_err(err)?;
    let domain = match domain {
        Some(d) => d.parse::<Domain>().map_err(err)?,
        None => target.default_domain(),
    };
    let noise = match noise {
        Some(sigma) => NoiseSpec {
            relative_sigma: sigma,
            ..NoiseSpec::five_percent(seed.wrapping_add(1))
        },
        None => NoiseSpec::none(),
    };
    let d = datagen::make_dataset(target, transform, noise, n, seed, domain).map_err(err)?;
    let dim = d.feature_dim();
    let features = d.features.data().chunks(dim).map(<[f64]>::to_vec).collect();
    Ok((features, d.labels.data().to_vec()))
}

/// A fully connected regression network.
#[pyclass(name = "Network", module = "seagull_py", from_py_object)]
#[derive(Clone)]
struct PyNetwork {
    inner: Network,
}

#[pymethods]
impl PyNetwork {
    /// The 9 → 100×4 → 1 benchmark network.
    #[new]
    #[pyo3(signature = (activation = "relu", seed = 0, seagull_first = false, first_bias = true))]
    fn new(activation: &str, seed: u64, seagull_first: bool, first_bias: bool) -> PyResult<Self> {
        let act = self::activation(activation)?;
        let first = if seagull_first { ActivationKind::Seagull } else { act };
        let spec = if first_bias {
            let mut spec = NetworkSpec::benchmark(act);
            spec.layers[0].activation = first;
            spec
        } else {
            NetworkSpec::benchmark_unbiased_first(first, act)
        };
        Ok(Self {
            inner: Network::build(spec, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: checkpoint::load(path).map_err(err)?,
        })
    }

    #[staticmethod]
    fn sinxy() -> Self {
        Self {
            inner: symmetry::make_sinxy_network(),
        }
    }

    fn save(&self, path: &str) -> PyResult<()> {
        checkpoint::save(&self.inner, path).map_err(err)
    }

    /// One output per input row.
    fn forward(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let x = rows_to_tensor(rows)?;
        Ok(self.inner.forward(&x).map_err(err)?.into_data())
    }

    fn replace_activation(&self, layer: usize, name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.replace_activation(layer, activation(name)?).map_err(err)?,
        })
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.spec().input_dim()
    }

    fn spec<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, self.inner.spec())
    }

    fn __repr__(&self) -> String {
        let acts: Vec<String> = self.inner.spec().layers.iter().map(|l| l.activation.to_string()).collect();
        format!("Network(layers={}, activations=[{}])", acts.len(), acts.join(", "))
    }
}

/// Trains a copy of `net` on freshly generated data and returns
/// `(trained, report)`. Data and shuffling derive from `seed` exactly as in
/// a one-run experiment grid.
#[pyfunction]
#[pyo3(signature = (net, target = "triangle-area", transform = "identity", train_n = 10_000, test_n = 2_000, epochs = 500, seed = 0, halve_every = 100, lr = 0.003, noise = false))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    net: &PyNetwork,
    target: &str,
    transform: &str,
    train_n: usize,
    test_n: usize,
    epochs: usize,
    seed: u64,
    halve_every: usize,
    lr: f64,
    noise: bool,
) -> PyResult<(PyNetwork, Bound<'py, PyAny>)> {
    let target: TargetKind = target.parse().map_err(err)?;
    let transform: TransformKind = transform.parse().map_err(err)?;
    let first = net.inner.spec().layers[0].activation;
    let mut plan = ExperimentPlan::new("py", vec![TargetSpec { target, transform }], vec![first]);
    plan.seagull_variants = vec![false];
    plan.runs_per_cell = 1;
    plan.train_n = train_n;
    plan.test_n = test_n;
    plan.train.epochs = epochs;
    plan.train.halve_every = halve_every;
    plan.train.lr0 = lr;
    plan.base_seed = seed;
    if noise {
        plan.noise = NoiseSpec::five_percent(0);
    }
    plan.validate().map_err(err)?;
    let job = plan.jobs()[0];
    let prep = bench::prepare_run(&plan, &job).map_err(err)?;
    let (trained, report) = py
        .detach(|| seagull::train(&net.inner, &prep.train_set, &prep.test_set, &prep.config))
        .map_err(err)?;
    Ok((PyNetwork { inner: trained }, json_to_py(py, &report)?))
}

#[pyfunction]
#[pyo3(signature = (net, n = 1000, seed = 0, domain = "cube"))]
fn measure_symmetry<'py>(py: Python<'py>, net: &PyNetwork, n: usize, seed: u64, domain: &str) -> PyResult<Bound<'py, PyAny>> {
    let domain: Domain = domain.parse().map_err(err)?;
    let report = seagull::measure_symmetry(&net.inner, n, seed, domain).map_err(err)?;
    json_to_py(py, &report)
}

/// Names accepted wherever an activation is expected.
#[pyfunction]
fn activation_names() -> &'static str {
    seagull::activation::VALID_NAMES
}

#[pymodule]
fn seagull_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(activation_eval, m)?)?;
    m.add_function(wrap_pyfunction!(activation_deriv, m)?)?;
    m.add_function(wrap_pyfunction!(activation_parity, m)?)?;
    m.add_function(wrap_pyfunction!(activation_names, m)?)?;
    m.add_function(wrap_pyfunction!(triangle_area, m)?)?;
    m.add_function(wrap_pyfunction!(solid_angle, m)?)?;
    m.add_function(wrap_pyfunction!(make_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(measure_symmetry, m)?)?;
    let info = PyDict::new(m.py());
    info.set_item("version", env!("CARGO_PKG_VERSION"))?;
    m.add("build_info", info)?;
    Ok(())
}
