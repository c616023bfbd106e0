//! Python bindings for memdex: dataset handling, nearest-neighbor search,
//! kernel-density scoring, binarization, and ROC evaluation.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use memdex_core::binarize;
use memdex_core::deep::MuMode;
use memdex_core::eval;
use memdex_core::fusion::{
    self, BinarizePolicy, FusionParams, Protocol, ScoreMatrix, ScoreMode, ScoringConfig,
};
use memdex_core::index::{ApproxParams, DescriptorIndex, IndexMode, IndexedFeatures};
use memdex_core::io;
use memdex_core::model::ClassBy;
use memdex_core::shallow::ShallowScoreConfig;
use memdex_core::synth::{self, SynthConfig};

type AlphaSweepResult = (Vec<(f64, f64)>, f64, f64);

fn err(e: memdex_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn protocol_of(s: &str) -> PyResult<Protocol> {
    match s {
        "family" => Ok(Protocol::Family),
        "group" => Ok(Protocol::Group),
        other => Err(PyValueError::new_err(format!(
            "protocol must be \"family\" or \"group\", got {other:?}"
        ))),
    }
}

fn mode_of(s: &str) -> PyResult<ScoreMode> {
    match s {
        "shallow" => Ok(ScoreMode::Shallow),
        "deep" => Ok(ScoreMode::Deep),
        "fused" => Ok(ScoreMode::Fused),
        other => Err(PyValueError::new_err(format!(
            "mode must be \"shallow\", \"deep\" or \"fused\", got {other:?}"
        ))),
    }
}

fn class_by_of(s: &str) -> PyResult<ClassBy> {
    match s {
        "subject" => Ok(ClassBy::Subject),
        "instance" => Ok(ClassBy::Instance),
        "group" => Ok(ClassBy::Group),
        other => Err(PyValueError::new_err(format!(
            "class_by must be \"subject\", \"instance\" or \"group\", got {other:?}"
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
fn scoring_config(
    mode: ScoreMode,
    exact: bool,
    k_trunc: usize,
    binarized: bool,
    protocol: Protocol,
    mu_per_class: bool,
    threads: usize,
) -> ScoringConfig {
    ScoringConfig {
        shallow: ShallowScoreConfig {
            k_trunc,
            ..ShallowScoreConfig::default()
        },
        deep: memdex_core::deep::DeepScoreConfig {
            mu_mode: if mu_per_class {
                MuMode::PerClass
            } else {
                MuMode::AllTraining
            },
            ..memdex_core::deep::DeepScoreConfig::default()
        },
        index_mode: if exact {
            IndexMode::Exact
        } else {
            IndexMode::Approximate
        },
        mode,
        binarize: if binarized {
            BinarizePolicy::default_for(protocol)
        } else {
            BinarizePolicy::Off
        },
        threads,
        ..ScoringConfig::default()
    }
}

/// An immutable subject corpus.
#[pyclass(name = "Dataset")]
struct PyDataset {
    inner: memdex_core::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Load a corpus from a manifest CSV.
    #[staticmethod]
    fn load(manifest: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: io::load_dataset(&manifest).map_err(err)?,
        })
    }

    /// Write the corpus under a directory; returns the manifest path.
    fn save(&self, dir: PathBuf) -> PyResult<PathBuf> {
        io::write_dataset(&self.inner, &dir).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn subject_ids(&self) -> Vec<String> {
        self.inner
            .subjects()
            .iter()
            .map(|s| s.subject_id.clone())
            .collect()
    }

    #[getter]
    fn d_kp(&self) -> usize {
        self.inner.d_kp()
    }

    #[getter]
    fn d_dv(&self) -> usize {
        self.inner.d_dv()
    }

    fn instance_label(&self, subject_id: &str) -> PyResult<String> {
        self.inner
            .subject(subject_id)
            .map(|s| s.instance_label.clone())
            .ok_or_else(|| PyValueError::new_err(format!("unknown subject {subject_id:?}")))
    }

    fn group_label(&self, subject_id: &str) -> PyResult<String> {
        self.inner
            .subject(subject_id)
            .map(|s| s.group_label.clone())
            .ok_or_else(|| PyValueError::new_err(format!("unknown subject {subject_id:?}")))
    }

    fn keypoint_count(&self, subject_id: &str) -> PyResult<usize> {
        self.inner
            .subject(subject_id)
            .map(|s| s.keypoints.len())
            .ok_or_else(|| PyValueError::new_err(format!("unknown subject {subject_id:?}")))
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset({} subjects, d_kp={}, d_dv={})",
            self.inner.len(),
            self.inner.d_kp(),
            self.inner.d_dv()
        )
    }
}

/// A nearest-neighbor index over keypoint descriptors or deep vectors.
#[pyclass(name = "Index")]
struct PyIndex {
    inner: DescriptorIndex,
}

#[pymethods]
impl PyIndex {
    #[staticmethod]
    #[pyo3(signature = (dataset, which="keypoints", exact=false, trees=4, leaf_size=16, checks=48, seed=0x6d647831))]
    fn build(
        dataset: &PyDataset,
        which: &str,
        exact: bool,
        trees: usize,
        leaf_size: usize,
        checks: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let which = match which {
            "keypoints" => IndexedFeatures::Keypoints,
            "vectors" => IndexedFeatures::Vectors,
            other => {
                return Err(PyValueError::new_err(format!(
                    "which must be \"keypoints\" or \"vectors\", got {other:?}"
                )))
            }
        };
        let inner = memdex_core::index::build_index(
            &dataset.inner.view(),
            which,
            if exact {
                IndexMode::Exact
            } else {
                IndexMode::Approximate
            },
            ApproxParams {
                trees,
                leaf_size,
                max_checked_leaves: checks,
                seed,
            },
        )
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: DescriptorIndex::read_from(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_to(&path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// k nearest neighbors of a query descriptor as
    /// (point_index, distance, subject_id) tuples.
    #[pyo3(signature = (query, k=1, exclude_subject=None))]
    fn knn(
        &self,
        query: Vec<f64>,
        k: usize,
        exclude_subject: Option<&str>,
    ) -> PyResult<Vec<(usize, f64, String)>> {
        let hits = self.inner.knn(&query, k, exclude_subject).map_err(err)?;
        Ok(hits
            .into_iter()
            .map(|h| (h.point_index, h.distance, h.subject_id.to_string()))
            .collect())
    }
}

/// Dense all-pairs shallow/deep scores.
#[pyclass(name = "ScoreMatrix")]
struct PyScoreMatrix {
    inner: ScoreMatrix,
}

#[pymethods]
impl PyScoreMatrix {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: ScoreMatrix::read_csv(&path).map_err(err)?,
        })
    }

    #[pyo3(signature = (path, alpha=0.5))]
    fn save(&self, path: PathBuf, alpha: f64) -> PyResult<()> {
        let p = FusionParams::new(alpha).map_err(err)?;
        self.inner.write_csv(&p, &path).map_err(err)
    }

    #[getter]
    fn protocol(&self) -> &'static str {
        match self.inner.protocol {
            Protocol::Family => "family",
            Protocol::Group => "group",
        }
    }

    #[getter]
    fn query_ids(&self) -> Vec<String> {
        self.inner.query_ids.clone()
    }

    #[getter]
    fn candidate_ids(&self) -> Vec<String> {
        self.inner.candidate_ids.clone()
    }

    fn shallow(&self, row: usize, col: usize) -> f64 {
        self.inner.shallow(row, col)
    }

    fn deep(&self, row: usize, col: usize) -> f64 {
        self.inner.deep(row, col)
    }

    fn valid(&self, row: usize, col: usize) -> bool {
        self.inner.is_valid(row, col)
    }

    fn __repr__(&self) -> String {
        format!(
            "ScoreMatrix({} x {}, {} valid)",
            self.inner.n_rows(),
            self.inner.n_cols(),
            self.inner.valid_cell_count()
        )
    }
}

/// Per-element binarization thresholds with information gains.
#[pyclass(name = "ThresholdTable")]
struct PyThresholdTable {
    inner: binarize::ThresholdTable,
}

#[pymethods]
impl PyThresholdTable {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: binarize::ThresholdTable::read_from(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_to(&path).map_err(err)
    }

    #[getter]
    fn taus(&self) -> Vec<f64> {
        self.inner.taus().to_vec()
    }

    #[getter]
    fn gains(&self) -> Vec<f64> {
        self.inner.gains().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.dim()
    }
}

/// ROC curve with its area.
#[pyclass(name = "Roc")]
struct PyRoc {
    #[pyo3(get)]
    auc: f64,
    #[pyo3(get)]
    points: Vec<(f64, f64)>,
    #[pyo3(get)]
    thresholds: Vec<f64>,
    #[pyo3(get)]
    positives: usize,
    #[pyo3(get)]
    negatives: usize,
}

impl From<eval::RocCurve> for PyRoc {
    fn from(r: eval::RocCurve) -> Self {
        Self {
            auc: r.auc,
            points: r.points,
            thresholds: r.thresholds,
            positives: r.positives,
            negatives: r.negatives,
        }
    }
}

#[pyfunction]
#[pyo3(signature = (seed=0, families=40, members=2, keypoints=50, d_kp=8, d_dv=16,
                    family_signal=0.8, group_signal=0.8, complementarity=0.0,
                    members_min=None, members_max=None))]
#[allow(clippy::too_many_arguments)]
fn generate_synthetic(
    seed: u64,
    families: usize,
    members: usize,
    keypoints: usize,
    d_kp: usize,
    d_dv: usize,
    family_signal: f64,
    group_signal: f64,
    complementarity: f64,
    members_min: Option<usize>,
    members_max: Option<usize>,
) -> PyResult<PyDataset> {
    let cfg = SynthConfig {
        n_families: families,
        members_min: members_min.unwrap_or(members),
        members_max: members_max.unwrap_or(members),
        keypoints_per_subject: keypoints,
        d_kp,
        d_dv,
        family_signal,
        group_signal,
        modality_complementarity: complementarity,
        seed,
    };
    Ok(PyDataset {
        inner: synth::generate_synthetic(&cfg).map_err(err)?,
    })
}

#[pyfunction]
fn load_dataset(manifest: PathBuf) -> PyResult<PyDataset> {
    PyDataset::load(manifest)
}

#[pyfunction]
#[pyo3(signature = (dataset, protocol="family", mode="fused", exact=false, k_trunc=64,
                    binarized=false, mu_per_class=false, threads=0))]
#[allow(clippy::too_many_arguments)]
fn all_pairs_scores(
    dataset: &PyDataset,
    protocol: &str,
    mode: &str,
    exact: bool,
    k_trunc: usize,
    binarized: bool,
    mu_per_class: bool,
    threads: usize,
) -> PyResult<PyScoreMatrix> {
    let protocol = protocol_of(protocol)?;
    let cfg = scoring_config(
        mode_of(mode)?,
        exact,
        k_trunc,
        binarized,
        protocol,
        mu_per_class,
        threads,
    );
    Ok(PyScoreMatrix {
        inner: fusion::all_pairs_scores(&dataset.inner, &cfg, protocol).map_err(err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (scores, dataset, mode="fused", alpha=0.5))]
fn family_auc(
    scores: &PyScoreMatrix,
    dataset: &PyDataset,
    mode: &str,
    alpha: f64,
) -> PyResult<PyRoc> {
    let p = FusionParams::new(alpha).map_err(err)?;
    Ok(
        fusion::family_roc(&scores.inner, &dataset.inner, mode_of(mode)?, &p)
            .map_err(err)?
            .into(),
    )
}

#[pyfunction]
#[pyo3(signature = (scores, dataset, mode="fused", alpha=0.5))]
fn group_auc(
    scores: &PyScoreMatrix,
    dataset: &PyDataset,
    mode: &str,
    alpha: f64,
) -> PyResult<PyRoc> {
    let p = FusionParams::new(alpha).map_err(err)?;
    Ok(
        fusion::group_roc(&scores.inner, &dataset.inner, mode_of(mode)?, &p)
            .map_err(err)?
            .into(),
    )
}

#[pyfunction]
#[pyo3(signature = (dataset, grid_step=0.1, protocol="family", exact=false, k_trunc=64, threads=0))]
fn alpha_sweep(
    dataset: &PyDataset,
    grid_step: f64,
    protocol: &str,
    exact: bool,
    k_trunc: usize,
    threads: usize,
) -> PyResult<AlphaSweepResult> {
    let protocol = protocol_of(protocol)?;
    let cfg = scoring_config(
        ScoreMode::Fused,
        exact,
        k_trunc,
        false,
        protocol,
        false,
        threads,
    );
    let sweep = fusion::alpha_sweep(&dataset.inner, &cfg, grid_step, protocol).map_err(err)?;
    Ok((sweep.points, sweep.best_alpha, sweep.best_auc))
}

#[pyfunction]
fn independence_diagnostic(scores: &PyScoreMatrix) -> PyResult<f64> {
    fusion::independence_diagnostic(&scores.inner).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (dataset, class_by="instance"))]
fn fit_thresholds(dataset: &PyDataset, class_by: &str) -> PyResult<PyThresholdTable> {
    let by = class_by_of(class_by)?;
    let rows: Vec<(&memdex_core::DeepVector, &str)> = dataset
        .inner
        .subjects()
        .iter()
        .filter_map(|s| s.deep_vector.as_ref().map(|v| (v, by.label_of(s))))
        .collect();
    Ok(PyThresholdTable {
        inner: binarize::fit_thresholds(&rows).map_err(err)?,
    })
}

#[pyfunction]
fn apply_thresholds(dataset: &PyDataset, table: &PyThresholdTable) -> PyResult<PyDataset> {
    let mut subjects = dataset.inner.subjects().to_vec();
    for s in &mut subjects {
        if let Some(v) = &s.deep_vector {
            s.deep_vector = Some(binarize::apply_thresholds(v, &table.inner).map_err(err)?);
        }
    }
    Ok(PyDataset {
        inner: memdex_core::Dataset::new(subjects, dataset.inner.d_kp(), dataset.inner.d_dv())
            .map_err(err)?,
    })
}

#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<PyRoc> {
    Ok(eval::roc_auc(&scores, &labels).map_err(err)?.into())
}

#[pyfunction]
fn entropy_bits(counts: Vec<u64>) -> PyResult<f64> {
    binarize::entropy_bits(&counts).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (shallow, deep, alpha=0.5))]
fn fuse(shallow: f64, deep: f64, alpha: f64) -> PyResult<f64> {
    let p = FusionParams::new(alpha).map_err(err)?;
    Ok(fusion::fuse(shallow, deep, &p))
}

#[pymodule]
fn memdex(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyIndex>()?;
    m.add_class::<PyScoreMatrix>()?;
    m.add_class::<PyThresholdTable>()?;
    m.add_class::<PyRoc>()?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(load_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(all_pairs_scores, m)?)?;
    m.add_function(wrap_pyfunction!(family_auc, m)?)?;
    m.add_function(wrap_pyfunction!(group_auc, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(independence_diagnostic, m)?)?;
    m.add_function(wrap_pyfunction!(fit_thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(apply_thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(entropy_bits, m)?)?;
    m.add_function(wrap_pyfunction!(fuse, m)?)?;
    Ok(())
}
