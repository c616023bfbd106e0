//! Log-linear score fusion and the all-pairs scoring protocols.
//!
//! The family (retrieval) protocol treats every subject as a single-exemplar
//! candidate class and scores all ordered pairs with the query's own features
//! excluded from the training side. The group protocol scores each subject
//! against the two group labels with every other subject as training
//! (leave-one-subject-out). Both store the shallow and deep log-likelihoods
//! separately; fusion happens at evaluation time, so one score matrix serves
//! a whole α sweep.
//!
//! Directed scores are not symmetric in general (self-exclusion and the μ
//! bandwidth depend on the query side); the matrix stores both directions and
//! the family ROC averages them per unordered pair. A corpus of N subjects
//! therefore yields N(N-1) directed cells and N(N-1)/2 evaluated pairs.

use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;

use crate::binarize::{apply_thresholds, fit_thresholds, ThresholdTable};
use crate::deep::{self, DeepScoreConfig, TrainingVectors};
use crate::error::{Error, Result};
use crate::eval::{pearson, roc_auc, RocCurve};
use crate::index::{build_index, ApproxParams, IndexMode, IndexedFeatures};
use crate::io::{fmt_f64, write_atomic};
use crate::model::{ClassBy, Dataset, DeepVector};
use crate::shallow::{self, ShallowScoreConfig};

/// The fusion weight α: the fused score is α·shallow + (1-α)·deep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams {
    pub alpha: f64,
}

impl FusionParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in [0, 1], got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }
}

impl Default for FusionParams {
    fn default() -> Self {
        Self { alpha: 0.5 }
    }
}

/// α-weighted combination of the two log-likelihood terms.
pub fn fuse(shallow: f64, deep: f64, p: &FusionParams) -> f64 {
    p.alpha * shallow + (1.0 - p.alpha) * deep
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Instance retrieval: every subject is its own candidate class.
    Family,
    /// Two-class group classification under leave-one-subject-out.
    Group,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    Shallow,
    Deep,
    Fused,
}

/// How binarization thresholds are fit inside a protocol without leaking
/// evaluation labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinarizePolicy {
    /// Score the stored vectors as they are.
    Off,
    /// Fit thresholds per query on the remaining subjects (leave-one-out
    /// folds). The group-protocol default.
    PerFold,
    /// Fit thresholds once on a held-out calibration split; every cell
    /// touching a calibration subject is flagged invalid. The family-protocol
    /// default (families are kept whole across the split).
    CalibrationSplit { fraction: f64, seed: u64 },
}

impl BinarizePolicy {
    /// The leak-free default per protocol, used by `--binarized`.
    pub fn default_for(protocol: Protocol) -> Self {
        match protocol {
            Protocol::Family => BinarizePolicy::CalibrationSplit {
                fraction: 1.0 / 3.0,
                seed: 0x10ad,
            },
            Protocol::Group => BinarizePolicy::PerFold,
        }
    }
}

/// All knobs of a scoring run.
#[derive(Debug, Clone, Copy)]
pub struct ScoringConfig {
    pub shallow: ShallowScoreConfig,
    pub deep: DeepScoreConfig,
    pub index_mode: IndexMode,
    pub approx: ApproxParams,
    pub mode: ScoreMode,
    pub binarize: BinarizePolicy,
    /// Worker cap for row parallelism; 0 means automatic.
    pub threads: usize,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            shallow: ShallowScoreConfig::default(),
            deep: DeepScoreConfig::default(),
            index_mode: IndexMode::Approximate,
            approx: ApproxParams::default(),
            mode: ScoreMode::Fused,
            binarize: BinarizePolicy::Off,
            threads: 0,
        }
    }
}

/// Dense per-pair score storage. Rows are query subjects; columns are
/// candidate subjects (family) or the two group labels (group).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub protocol: Protocol,
    pub query_ids: Vec<String>,
    pub candidate_ids: Vec<String>,
    shallow: Vec<f64>,
    deep: Vec<f64>,
    valid: Vec<bool>,
}

impl ScoreMatrix {
    pub fn new(
        protocol: Protocol,
        query_ids: Vec<String>,
        candidate_ids: Vec<String>,
        shallow: Vec<f64>,
        deep: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        let cells = query_ids.len() * candidate_ids.len();
        if shallow.len() != cells || deep.len() != cells || valid.len() != cells {
            return Err(Error::InvalidConfig(format!(
                "score matrix storage must hold {cells} cells"
            )));
        }
        Ok(Self {
            protocol,
            query_ids,
            candidate_ids,
            shallow,
            deep,
            valid,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.query_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.candidate_ids.len()
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> usize {
        r * self.candidate_ids.len() + c
    }

    pub fn shallow(&self, r: usize, c: usize) -> f64 {
        self.shallow[self.at(r, c)]
    }

    pub fn deep(&self, r: usize, c: usize) -> f64 {
        self.deep[self.at(r, c)]
    }

    pub fn is_valid(&self, r: usize, c: usize) -> bool {
        self.valid[self.at(r, c)]
    }

    pub fn score(&self, r: usize, c: usize, mode: ScoreMode, p: &FusionParams) -> f64 {
        match mode {
            ScoreMode::Shallow => self.shallow(r, c),
            ScoreMode::Deep => self.deep(r, c),
            ScoreMode::Fused => fuse(self.shallow(r, c), self.deep(r, c), p),
        }
    }

    pub fn valid_cell_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// CSV emission, row-major, all cells:
    /// `query_id,candidate_id,shallow,deep,fused,valid`.
    pub fn to_csv(&self, p: &FusionParams) -> String {
        let mut out = String::from("query_id,candidate_id,shallow,deep,fused,valid\n");
        for r in 0..self.n_rows() {
            for c in 0..self.n_cols() {
                let i = self.at(r, c);
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    self.query_ids[r],
                    self.candidate_ids[c],
                    fmt_f64(self.shallow[i]),
                    fmt_f64(self.deep[i]),
                    fmt_f64(fuse(self.shallow[i], self.deep[i], p)),
                    u8::from(self.valid[i]),
                ));
            }
        }
        out
    }

    pub fn write_csv(&self, p: &FusionParams, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv(p).as_bytes())
    }

    /// Parse a score-matrix CSV back. The protocol is inferred: a candidate
    /// set equal to the query set is the family protocol.
    pub fn read_csv(path: &Path) -> Result<ScoreMatrix> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let perr = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| perr(1, "empty file".into()))?;
        if header != "query_id,candidate_id,shallow,deep,fused,valid" {
            return Err(perr(1, format!("unexpected header {header:?}")));
        }
        let mut query_ids: Vec<String> = Vec::new();
        let mut candidate_ids: Vec<String> = Vec::new();
        let mut cells: Vec<(f64, f64, bool)> = Vec::new();
        for (ix, line) in lines {
            let lineno = ix + 1;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(perr(lineno, format!("expected 6 fields, got {}", f.len())));
            }
            if query_ids.last().map(String::as_str) != Some(f[0]) {
                query_ids.push(f[0].to_string());
            }
            if query_ids.len() == 1 {
                candidate_ids.push(f[1].to_string());
            }
            let shallow: f64 = f[2]
                .parse()
                .map_err(|_| perr(lineno, format!("bad shallow score {:?}", f[2])))?;
            let deep: f64 = f[3]
                .parse()
                .map_err(|_| perr(lineno, format!("bad deep score {:?}", f[3])))?;
            let valid = match f[5] {
                "0" => false,
                "1" => true,
                v => return Err(perr(lineno, format!("bad valid flag {v:?}"))),
            };
            cells.push((shallow, deep, valid));
        }
        if cells.len() != query_ids.len() * candidate_ids.len() {
            return Err(perr(
                1,
                format!(
                    "expected {} x {} cells, got {}",
                    query_ids.len(),
                    candidate_ids.len(),
                    cells.len()
                ),
            ));
        }
        let protocol = if query_ids == candidate_ids {
            Protocol::Family
        } else {
            Protocol::Group
        };
        ScoreMatrix::new(
            protocol,
            query_ids,
            candidate_ids,
            cells.iter().map(|c| c.0).collect(),
            cells.iter().map(|c| c.1).collect(),
            cells.iter().map(|c| c.2).collect(),
        )
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

/// Select calibration subjects for [`BinarizePolicy::CalibrationSplit`].
/// Family protocol splits whole families; group protocol splits subjects.
fn calibration_subjects(
    ds: &Dataset,
    protocol: Protocol,
    fraction: f64,
    seed: u64,
) -> Result<HashSet<usize>> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    if !(0.0 < fraction && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "calibration fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut picked = HashSet::new();
    match protocol {
        Protocol::Family => {
            let mut families: Vec<&str> = {
                let mut f: Vec<&str> = ds
                    .subjects()
                    .iter()
                    .map(|s| s.instance_label.as_str())
                    .collect();
                f.sort_unstable();
                f.dedup();
                f
            };
            families.shuffle(&mut rng);
            let take =
                ((families.len() as f64 * fraction).ceil() as usize).clamp(1, families.len() - 1);
            let chosen: HashSet<&str> = families.into_iter().take(take).collect();
            for (ix, s) in ds.subjects().iter().enumerate() {
                if chosen.contains(s.instance_label.as_str()) {
                    picked.insert(ix);
                }
            }
        }
        Protocol::Group => {
            let mut ixs: Vec<usize> = (0..ds.len()).collect();
            ixs.shuffle(&mut rng);
            let take = ((ds.len() as f64 * fraction).ceil() as usize).clamp(1, ds.len() - 1);
            picked.extend(ixs.into_iter().take(take));
        }
    }
    Ok(picked)
}

/// Score every subject against every candidate class under the chosen
/// protocol. Rows are computed independently and in parallel; outputs are
/// bit-identical for any worker count.
pub fn all_pairs_scores(
    ds: &Dataset,
    cfg: &ScoringConfig,
    protocol: Protocol,
) -> Result<ScoreMatrix> {
    all_pairs_scores_with_index(ds, cfg, protocol, None)
}

/// Like [`all_pairs_scores`], but reusing a prebuilt keypoint index (for
/// example one deserialized from disk) instead of building one.
pub fn all_pairs_scores_with_index(
    ds: &Dataset,
    cfg: &ScoringConfig,
    protocol: Protocol,
    prebuilt: Option<&crate::index::DescriptorIndex>,
) -> Result<ScoreMatrix> {
    if ds.is_empty() {
        return Err(Error::InvalidConfig("empty dataset".into()));
    }
    let need_shallow = cfg.mode != ScoreMode::Deep;
    let need_deep = cfg.mode != ScoreMode::Shallow;
    let subjects = ds.subjects();
    let n = subjects.len();

    let query_ids: Vec<String> = subjects.iter().map(|s| s.subject_id.clone()).collect();
    let (candidate_ids, class_by) = match protocol {
        Protocol::Family => (query_ids.clone(), ClassBy::Subject),
        Protocol::Group => {
            let mut labels: Vec<String> = subjects.iter().map(|s| s.group_label.clone()).collect();
            labels.sort_unstable();
            labels.dedup();
            if labels.len() != 2 {
                return Err(Error::GroupLabelCount(labels.len()));
            }
            (labels, ClassBy::Group)
        }
    };
    let n_cols = candidate_ids.len();

    if need_deep {
        for s in subjects {
            if s.deep_vector.is_none() {
                return Err(Error::MissingModality(s.subject_id.clone()));
            }
        }
        if cfg.binarize != BinarizePolicy::Off {
            for s in subjects {
                if s.deep_vector.as_ref().is_some_and(DeepVector::is_binary) {
                    return Err(Error::AlreadyBinary);
                }
            }
        }
    }

    // validity mask: self-pairs and calibration subjects are not evaluated
    let calibration = match cfg.binarize {
        BinarizePolicy::CalibrationSplit { fraction, seed } if need_deep => {
            Some(calibration_subjects(ds, protocol, fraction, seed)?)
        }
        _ => None,
    };
    let mut valid = vec![true; n * n_cols];
    if protocol == Protocol::Family {
        for r in 0..n {
            valid[r * n_cols + r] = false;
        }
    }
    if let Some(cal) = &calibration {
        for r in 0..n {
            for c in 0..n_cols {
                let touches =
                    cal.contains(&r) || (protocol == Protocol::Family && cal.contains(&c));
                if touches {
                    valid[r * n_cols + c] = false;
                }
            }
        }
    }

    let pool = thread_pool(cfg.threads)?;
    let fit_class_by = match protocol {
        Protocol::Family => ClassBy::Instance,
        Protocol::Group => ClassBy::Group,
    };

    let mut shallow_m = vec![0.0f64; n * n_cols];
    if need_shallow {
        let built;
        let idx = match prebuilt {
            Some(idx) => {
                if idx.which() != IndexedFeatures::Keypoints {
                    return Err(Error::InvalidConfig(
                        "prebuilt index must hold keypoints".into(),
                    ));
                }
                if idx.dim() != ds.d_kp() || idx.len() != ds.view().total_keypoints() {
                    return Err(Error::InvalidConfig(format!(
                        "prebuilt index ({} points, dim {}) does not match the dataset ({} keypoints, dim {})",
                        idx.len(),
                        idx.dim(),
                        ds.view().total_keypoints(),
                        ds.d_kp()
                    )));
                }
                idx
            }
            None => {
                built = build_index(
                    &ds.view(),
                    IndexedFeatures::Keypoints,
                    cfg.index_mode,
                    cfg.approx,
                )?;
                &built
            }
        };
        let col_slots: Vec<Option<usize>> = candidate_ids
            .iter()
            .map(|c| idx.class_slot(class_by, c))
            .collect();
        pool.install(|| {
            shallow_m
                .par_chunks_mut(n_cols)
                .enumerate()
                .try_for_each(|(r, row)| -> Result<()> {
                    let q = &subjects[r];
                    let dense = shallow::scores_dense(
                        &q.keypoints,
                        idx,
                        class_by,
                        &cfg.shallow,
                        Some(q.subject_id.as_str()),
                    )?;
                    for (c, slot) in col_slots.iter().enumerate() {
                        row[c] = slot.map_or(0.0, |s| dense[s]);
                    }
                    Ok(())
                })
        })?;
    }

    let mut deep_m = vec![0.0f64; n * n_cols];
    if need_deep {
        match cfg.binarize {
            BinarizePolicy::Off | BinarizePolicy::CalibrationSplit { .. } => {
                let table: Option<ThresholdTable> = match (&cfg.binarize, &calibration) {
                    (BinarizePolicy::CalibrationSplit { .. }, Some(cal)) => {
                        let fit_set: Vec<(&DeepVector, &str)> = cal
                            .iter()
                            .map(|&ix| {
                                let s = &subjects[ix];
                                (
                                    s.deep_vector.as_ref().expect("deep modality checked"),
                                    fit_class_by.label_of(s),
                                )
                            })
                            .collect();
                        Some(fit_thresholds(&fit_set)?)
                    }
                    _ => None,
                };
                let entries: Vec<(DeepVector, String, String)> = subjects
                    .iter()
                    .map(|s| -> Result<_> {
                        let v = s.deep_vector.as_ref().expect("deep modality checked");
                        let v = match &table {
                            Some(t) => apply_thresholds(v, t)?,
                            None => v.clone(),
                        };
                        Ok((v, s.subject_id.clone(), class_by.label_of(s).to_string()))
                    })
                    .collect::<Result<_>>()?;
                let tv = TrainingVectors::from_entries(entries)?;
                let col_slots: Vec<Option<usize>> =
                    candidate_ids.iter().map(|c| tv.class_slot(c)).collect();
                pool.install(|| {
                    deep_m.par_chunks_mut(n_cols).enumerate().try_for_each(
                        |(r, row)| -> Result<()> {
                            let q = &subjects[r];
                            let qv = q.deep_vector.as_ref().expect("deep modality checked");
                            let qv = match &table {
                                Some(t) => apply_thresholds(qv, t)?,
                                None => qv.clone(),
                            };
                            let dense = deep::scores_dense(
                                &qv,
                                &tv,
                                &cfg.deep,
                                Some(q.subject_id.as_str()),
                            )?;
                            for (c, slot) in col_slots.iter().enumerate() {
                                row[c] = slot.map_or(0.0, |s| dense[s]);
                            }
                            Ok(())
                        },
                    )
                })?;
            }
            BinarizePolicy::PerFold => {
                pool.install(|| {
                    deep_m.par_chunks_mut(n_cols).enumerate().try_for_each(
                        |(r, row)| -> Result<()> {
                            let q = &subjects[r];
                            let fit_set: Vec<(&DeepVector, &str)> = subjects
                                .iter()
                                .enumerate()
                                .filter(|(ix, _)| *ix != r)
                                .map(|(_, s)| {
                                    (
                                        s.deep_vector.as_ref().expect("deep modality checked"),
                                        fit_class_by.label_of(s),
                                    )
                                })
                                .collect();
                            let table = fit_thresholds(&fit_set)?;
                            let entries: Vec<(DeepVector, String, String)> = subjects
                                .iter()
                                .enumerate()
                                .filter(|(ix, _)| *ix != r)
                                .map(|(_, s)| -> Result<_> {
                                    Ok((
                                        apply_thresholds(
                                            s.deep_vector.as_ref().expect("deep modality checked"),
                                            &table,
                                        )?,
                                        s.subject_id.clone(),
                                        class_by.label_of(s).to_string(),
                                    ))
                                })
                                .collect::<Result<_>>()?;
                            let tv = TrainingVectors::from_entries(entries)?;
                            let qv = apply_thresholds(
                                q.deep_vector.as_ref().expect("deep modality checked"),
                                &table,
                            )?;
                            let dense = deep::scores_dense(&qv, &tv, &cfg.deep, None)?;
                            for (c, cand) in candidate_ids.iter().enumerate() {
                                row[c] = tv.class_slot(cand).map_or(0.0, |s| dense[s]);
                            }
                            Ok(())
                        },
                    )
                })?;
            }
        }
    }

    ScoreMatrix::new(protocol, query_ids, candidate_ids, shallow_m, deep_m, valid)
}

/// Family-protocol ROC: one score per unordered pair (mean of the two
/// directions), positive when the pair shares an instance label.
pub fn family_roc(
    sm: &ScoreMatrix,
    ds: &Dataset,
    mode: ScoreMode,
    p: &FusionParams,
) -> Result<RocCurve> {
    if sm.protocol != Protocol::Family {
        return Err(Error::InvalidConfig(
            "family_roc requires a family-protocol score matrix".into(),
        ));
    }
    let families: Vec<&str> = sm
        .query_ids
        .iter()
        .map(|id| {
            ds.subject(id)
                .map(|s| s.instance_label.as_str())
                .ok_or_else(|| Error::UnknownSubject(id.clone()))
        })
        .collect::<Result<_>>()?;
    let n = sm.n_rows();
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if !(sm.is_valid(i, j) && sm.is_valid(j, i)) {
                continue;
            }
            let s = 0.5 * (sm.score(i, j, mode, p) + sm.score(j, i, mode, p));
            scores.push(s);
            labels.push(families[i] == families[j]);
        }
    }
    roc_auc(&scores, &labels)
}

/// Group-protocol ROC over per-subject score differences between the two
/// group columns; the lexicographically first group label is the positive
/// class.
pub fn group_roc(
    sm: &ScoreMatrix,
    ds: &Dataset,
    mode: ScoreMode,
    p: &FusionParams,
) -> Result<RocCurve> {
    if sm.protocol != Protocol::Group || sm.n_cols() != 2 {
        return Err(Error::InvalidConfig(
            "group_roc requires a group-protocol score matrix with 2 columns".into(),
        ));
    }
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (r, id) in sm.query_ids.iter().enumerate() {
        if !(sm.is_valid(r, 0) && sm.is_valid(r, 1)) {
            continue;
        }
        let s = ds
            .subject(id)
            .ok_or_else(|| Error::UnknownSubject(id.clone()))?;
        scores.push(sm.score(r, 0, mode, p) - sm.score(r, 1, mode, p));
        labels.push(s.group_label == sm.candidate_ids[0]);
    }
    roc_auc(&scores, &labels)
}

/// One evaluated α with its AUC.
#[derive(Debug, Clone)]
pub struct AlphaSweep {
    pub points: Vec<(f64, f64)>,
    pub best_alpha: f64,
    pub best_auc: f64,
}

/// Evaluate fused AUC on an α grid including both endpoints. Ties resolve to
/// the smallest α. One score matrix serves the whole sweep, so the endpoints
/// reproduce the shallow-only and deep-only AUCs exactly.
pub fn alpha_sweep(
    ds: &Dataset,
    cfg: &ScoringConfig,
    grid_step: f64,
    protocol: Protocol,
) -> Result<AlphaSweep> {
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "grid step must lie in (0, 1], got {grid_step}"
        )));
    }
    let m = (1.0 / grid_step).round();
    if ((m * grid_step) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "grid step {grid_step} does not divide 1 evenly"
        )));
    }
    let m = m as usize;
    let mut cfg = *cfg;
    cfg.mode = ScoreMode::Fused;
    let sm = all_pairs_scores(ds, &cfg, protocol)?;
    alpha_sweep_on(&sm, ds, protocol, m)
}

pub(crate) fn alpha_sweep_on(
    sm: &ScoreMatrix,
    ds: &Dataset,
    protocol: Protocol,
    m: usize,
) -> Result<AlphaSweep> {
    let mut points = Vec::with_capacity(m + 1);
    let mut best_alpha = 0.0;
    let mut best_auc = f64::NEG_INFINITY;
    for i in 0..=m {
        let alpha = if i == 0 {
            0.0
        } else if i == m {
            1.0
        } else {
            i as f64 / m as f64
        };
        let p = FusionParams { alpha };
        let roc = match protocol {
            Protocol::Family => family_roc(sm, ds, ScoreMode::Fused, &p)?,
            Protocol::Group => group_roc(sm, ds, ScoreMode::Fused, &p)?,
        };
        points.push((alpha, roc.auc));
        if roc.auc > best_auc {
            best_auc = roc.auc;
            best_alpha = alpha;
        }
    }
    Ok(AlphaSweep {
        points,
        best_alpha,
        best_auc,
    })
}

/// Pearson correlation between the shallow and deep scores over all valid
/// cells: the conditional-independence diagnostic.
pub fn independence_diagnostic(sm: &ScoreMatrix) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in 0..sm.n_rows() {
        for c in 0..sm.n_cols() {
            if sm.is_valid(r, c) {
                xs.push(sm.shallow(r, c));
                ys.push(sm.deep(r, c));
            }
        }
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientCells {
            need: 3,
            got: xs.len(),
        });
    }
    pearson(&xs, &ys)
}
