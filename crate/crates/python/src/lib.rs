//! Python bindings. Matrices cross the boundary as lists of rows.

use std::path::Path;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use domconf::adaptnet::{self, JointLossConfig, OptimizerConfig, TrainInputs};
use domconf::baselines::{self, FusionConfig, FusionMode, SvmParams};
use domconf::data::{synth_domains as synth, DomainShift, LabeledDataset, SynthSpec};
use domconf::harness::{self, ExperimentConfig};
use domconf::mmd::{self, KernelSpec};
use domconf::numerics::{self, FeatureMatrix, Subspace};
use domconf::error::ErrorClass;
use domconf::Error;

type Rows = Vec<Vec<f64>>;

fn py_err(e: Error) -> PyErr {
    match e.class() {
        ErrorClass::Numerical => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn features(rows: &Rows) -> PyResult<FeatureMatrix> {
    FeatureMatrix::from_rows(rows).map_err(py_err)
}

fn to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn dataset(x: &Rows, y: Vec<usize>, domain: &str) -> PyResult<LabeledDataset> {
    LabeledDataset::with_generated_ids(features(x)?, y, None, domain, domain).map_err(py_err)
}

/// A subspace from a `d × k` basis given as `d` rows of length `k`.
fn subspace(basis: &Rows) -> PyResult<Subspace> {
    Subspace::from_basis(features(basis)?.into_matrix()).map_err(py_err)
}

#[pyfunction]
fn mmd_linear(xs: Rows, xt: Rows) -> PyResult<f64> {
    mmd::mmd_linear(&features(&xs)?, &features(&xt)?).map_err(py_err)
}

/// Kernel MMD². `gamma=None` with the RBF kernel uses the median heuristic.
#[pyfunction]
#[pyo3(signature = (xs, xt, kernel="rbf", gamma=None, unbiased=false))]
fn mmd2_kernel(xs: Rows, xt: Rows, kernel: &str, gamma: Option<f64>, unbiased: bool) -> PyResult<f64> {
    let (s, t) = (features(&xs)?, features(&xt)?);
    let spec = match (kernel, gamma) {
        ("linear", None) => KernelSpec::Linear,
        ("rbf", Some(g)) => KernelSpec::rbf(g).map_err(py_err)?,
        ("rbf", None) => KernelSpec::rbf_median(&s, &t).map_err(py_err)?,
        _ => return Err(PyValueError::new_err("kernel must be 'linear' (no gamma) or 'rbf'")),
    };
    mmd::mmd2_kernel(&s, &t, spec, unbiased).map_err(py_err)
}

/// Returns `(basis, mean)`; the basis is `d` rows of length `k`.
#[pyfunction]
fn pca(x: Rows, k: usize) -> PyResult<(Rows, Vec<f64>)> {
    let s = numerics::pca(&features(&x)?, k).map_err(py_err)?;
    Ok((to_rows(s.basis()), s.mean().iter().copied().collect()))
}

#[pyfunction]
fn principal_angles(u: Rows, v: Rows) -> PyResult<Vec<f64>> {
    numerics::principal_angles(&subspace(&u)?, &subspace(&v)?).map_err(py_err)
}

/// Geodesic flow kernel matrix `G` for two bases.
#[pyfunction]
fn gfk(u: Rows, v: Rows) -> PyResult<Rows> {
    let g = baselines::gfk_compute(&subspace(&u)?, &subspace(&v)?).map_err(py_err)?;
    Ok(to_rows(&g.g))
}

#[pyfunction]
fn sa_align(u: Rows, v: Rows) -> PyResult<Rows> {
    let m = baselines::sa_align(&subspace(&u)?, &subspace(&v)?).map_err(py_err)?;
    Ok(to_rows(&m))
}

#[pyfunction]
fn daume_augment(x: Rows, is_source: bool) -> PyResult<Rows> {
    Ok(baselines::daume_augment(&features(&x)?, is_source).to_rows())
}

#[pyfunction]
#[pyo3(signature = (v_s, v_t, mode="max", alpha=0.5))]
fn late_fusion(v_s: Vec<f64>, v_t: Vec<f64>, mode: &str, alpha: f64) -> PyResult<Vec<f64>> {
    let mode: FusionMode = mode.parse().map_err(py_err)?;
    baselines::late_fusion(&v_s, &v_t, mode, &FusionConfig { alpha }).map_err(py_err)
}

/// Returns `(xs, ys, xt, yt)`.
#[pyfunction]
#[pyo3(signature = (
    n_classes=5, dim=16, n_per_class_source=30, n_per_class_target=30,
    rotation_deg=30.0, offset_norm=2.0, noise_sd=0.5, class_sep=4.0, seed=0
))]
#[allow(clippy::too_many_arguments)]
fn synth_domains(
    n_classes: usize,
    dim: usize,
    n_per_class_source: usize,
    n_per_class_target: usize,
    rotation_deg: f64,
    offset_norm: f64,
    noise_sd: f64,
    class_sep: f64,
    seed: u64,
) -> PyResult<(Rows, Vec<usize>, Rows, Vec<usize>)> {
    let spec = SynthSpec {
        n_classes,
        dim,
        n_per_class_source,
        n_per_class_target,
        shift: DomainShift::uniform_offset(dim, offset_norm, rotation_deg.to_radians()),
        noise_sd,
        class_sep,
        seed,
    };
    let (s, t) = synth(&spec).map_err(py_err)?;
    Ok((
        s.features().to_rows(),
        s.labels().to_vec(),
        t.features().to_rows(),
        t.labels().to_vec(),
    ))
}

/// One-vs-rest linear SVM. Returns `(weights, bias, objective)` with one
/// weight row per class.
#[pyfunction]
#[pyo3(signature = (x, y, c_reg=0.01, epochs=50, seed=0))]
fn svm(x: Rows, y: Vec<usize>, c_reg: f64, epochs: usize, seed: u64) -> PyResult<(Rows, Vec<f64>, f64)> {
    let fit = baselines::svm_train(&dataset(&x, y, "train")?, &SvmParams { c_reg, epochs, seed }).map_err(py_err)?;
    let clf = &fit.classifier;
    Ok((to_rows(&clf.weights), clf.bias.iter().copied().collect(), fit.objective()))
}

/// Runs a config given as text; relative paths resolve against `base_dir`.
/// Returns a dict with per-split accuracies and their summary.
#[pyfunction]
#[pyo3(signature = (config_text, base_dir="."))]
fn run_experiment<'py>(py: Python<'py>, config_text: &str, base_dir: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig::parse(config_text, Path::new(base_dir)).map_err(py_err)?;
    let report = harness::run_experiment(&cfg).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("task", &report.task)?;
    out.set_item("method", report.method.to_string())?;
    out.set_item("accuracies", report.accuracies())?;
    out.set_item("mean_accuracy", report.mean_accuracy())?;
    out.set_item("standard_error", report.standard_error())?;
    Ok(out)
}

/// The adaptation network: backbone, adaptation layer and classifier.
#[pyclass(name = "AdaptationNet")]
struct PyAdaptationNet {
    net: adaptnet::AdaptationNet,
}

#[pymethods]
impl PyAdaptationNet {
    #[new]
    #[pyo3(signature = (input_dim, width, n_classes, seed=0))]
    fn new(input_dim: usize, width: usize, n_classes: usize, seed: u64) -> PyResult<Self> {
        let net = adaptnet::AdaptationNet::new(input_dim, width, n_classes, seed).map_err(py_err)?;
        Ok(PyAdaptationNet { net })
    }

    #[getter]
    fn width(&self) -> usize {
        self.net.width()
    }

    #[getter]
    fn n_classes(&self) -> usize {
        self.net.n_classes()
    }

    fn params(&self) -> Vec<f64> {
        self.net.params()
    }

    fn predict(&self, x: Rows) -> PyResult<Vec<usize>> {
        self.net.predict(&features(&x)?).map_err(py_err)
    }

    fn adapt_activations(&self, x: Rows) -> PyResult<Rows> {
        Ok(self.net.adapt_activations(&features(&x)?).map_err(py_err)?.to_rows())
    }

    /// Unsupervised fine-tuning on labeled source rows and unlabeled target
    /// rows. Returns the learning curve as `(iteration, cls_loss, mmd)` tuples.
    #[pyo3(signature = (xs, ys, xt, lam=0.25, iterations=1000, lr=1e-3, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        &mut self,
        xs: Rows,
        ys: Vec<usize>,
        xt: Rows,
        lam: f64,
        iterations: usize,
        lr: f64,
        seed: u64,
    ) -> PyResult<Vec<(usize, f64, f64)>> {
        let source = dataset(&xs, ys, "source")?
            .with_n_classes(self.net.n_classes())
            .map_err(py_err)?;
        let target = features(&xt)?;
        let inputs = TrainInputs {
            source: &source,
            target_labeled: None,
            target_unlabeled: &target,
            test: None,
        };
        let cfg = JointLossConfig { lambda: lam, ..JointLossConfig::default() };
        let opt = OptimizerConfig {
            base_lr: lr,
            iterations,
            ..OptimizerConfig::default()
        };
        let report = adaptnet::train(self.net.clone(), &inputs, &cfg, &opt, seed).map_err(py_err)?;
        let curve = report.records.iter().map(|r| (r.iteration, r.cls_loss, r.mmd)).collect();
        self.net = report.net;
        Ok(curve)
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.net.to_bytes()
    }

    #[staticmethod]
    fn from_bytes(data: Vec<u8>) -> PyResult<Self> {
        Ok(PyAdaptationNet {
            net: adaptnet::AdaptationNet::from_bytes(&data).map_err(py_err)?,
        })
    }
}

#[pymodule]
fn pydomconf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(mmd_linear, m)?)?;
    m.add_function(wrap_pyfunction!(mmd2_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(pca, m)?)?;
    m.add_function(wrap_pyfunction!(principal_angles, m)?)?;
    m.add_function(wrap_pyfunction!(gfk, m)?)?;
    m.add_function(wrap_pyfunction!(sa_align, m)?)?;
    m.add_function(wrap_pyfunction!(daume_augment, m)?)?;
    m.add_function(wrap_pyfunction!(late_fusion, m)?)?;
    m.add_function(wrap_pyfunction!(synth_domains, m)?)?;
    m.add_function(wrap_pyfunction!(svm, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_class::<PyAdaptationNet>()?;
    Ok(())
}
