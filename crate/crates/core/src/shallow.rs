//! Keypoint-set log-likelihood with adaptive per-keypoint bandwidth.
//!
//! A query keypoint set scores against a class as a sum over query keypoints
//! of log(kernel_mass / N_k + 1): the kernel is exp(-d² / (1 + dNN²)) with
//! dNN the distance from the query keypoint to its nearest admissible
//! training keypoint of any class, N_k the number of admissible training
//! keypoints of the class, and the +1 a uniform background term that keeps
//! every factor at least 1. Scores are therefore always non-negative.
//!
//! The inner sum is truncated to the `k_trunc` nearest neighbors; kernel
//! decay makes the discarded tail exponentially small. Reductions accumulate
//! in value-sorted order, so results are bit-identical under permutations of
//! query or training keypoints and independent of thread count.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::index::{DescriptorIndex, IndexMode};
use crate::model::{ClassBy, Keypoint, SubjectRecord};

/// How the adaptive bandwidth distance dNN is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DnnMode {
    /// Take dNN from the index's own neighbor search (exact on an exact
    /// index, approximate on an approximate one).
    #[default]
    Approximate,
    /// Force a linear-scan exact dNN even on an approximate index.
    Exact,
}

#[derive(Debug, Clone, Copy)]
pub struct ShallowScoreConfig {
    /// Neighbors kept per query keypoint; `usize::MAX` disables truncation.
    pub k_trunc: usize,
    pub dnn_mode: DnnMode,
    /// Exclude the query subject's own features from dNN and the kernel sum
    /// (required by any all-pairs protocol where the query is indexed).
    pub exclude_self_subject: bool,
}

impl Default for ShallowScoreConfig {
    fn default() -> Self {
        Self {
            k_trunc: 64,
            dnn_mode: DnnMode::Approximate,
            exclude_self_subject: true,
        }
    }
}

impl ShallowScoreConfig {
    fn validate(&self) -> Result<()> {
        if self.k_trunc == 0 {
            return Err(Error::InvalidConfig("k_trunc must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-class scores for one query keypoint set, indexed by class slot of
/// `class_by` in the index. Classes never seen among the truncated neighbor
/// sets score 0 (the pure noise floor).
pub(crate) fn scores_dense(
    query_kps: &[Keypoint],
    idx: &DescriptorIndex,
    class_by: ClassBy,
    cfg: &ShallowScoreConfig,
    query_subject: Option<&str>,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n_classes = idx.n_classes(class_by);
    let exclude = if cfg.exclude_self_subject {
        idx.exclude_slot(query_subject)
    } else {
        None
    };

    let mut terms: Vec<(u32, f64)> = Vec::new();
    let mut masses = vec![0.0f64; n_classes];
    let mut touched: Vec<u32> = Vec::new();
    let mut raw = Vec::new();

    for kp in query_kps {
        if kp.descriptor.len() != idx.dim() {
            return Err(Error::DimensionMismatch {
                context: "query keypoint descriptor".into(),
                expected: idx.dim(),
                got: kp.descriptor.len(),
            });
        }
        idx.knn_raw(&kp.descriptor, cfg.k_trunc, exclude, &mut raw);
        if raw.is_empty() {
            continue;
        }
        let dnn2 = match (cfg.dnn_mode, idx.mode()) {
            (DnnMode::Approximate, _) | (DnnMode::Exact, IndexMode::Exact) => raw[0].d2,
            (DnnMode::Exact, IndexMode::Approximate) => {
                let d = idx
                    .nearest_distance_exact(
                        &kp.descriptor,
                        query_subject.filter(|_| cfg.exclude_self_subject),
                    )?
                    .expect("admissible set non-empty");
                d * d
            }
        };
        let bandwidth = 1.0 + dnn2;
        // Hits are sorted by (distance², id); accumulating in that order keeps
        // per-class masses independent of training order.
        for c in &raw {
            let slot = idx.class_slot_of_point(class_by, c.id as usize) as u32;
            if masses[slot as usize] == 0.0 && !touched.contains(&slot) {
                touched.push(slot);
            }
            masses[slot as usize] += (-c.d2 / bandwidth).exp();
        }
        for &slot in &touched {
            let n_k = idx.class_point_count_by_slot(class_by, slot as usize, exclude);
            if n_k > 0 {
                terms.push((slot, (masses[slot as usize] / n_k as f64).ln_1p()));
            }
            masses[slot as usize] = 0.0;
        }
        touched.clear();
    }

    // Canonical reduction: per class, sum the per-keypoint terms in ascending
    // value order. The result depends only on the multiset of terms.
    terms.sort_unstable_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.total_cmp(&b.1)));
    let mut scores = vec![0.0f64; n_classes];
    for (slot, term) in terms {
        scores[slot as usize] += term;
    }
    Ok(scores)
}

/// log p({f_i} | C_k) for a single class. The empty keypoint set scores 0
/// (empty product), and a class with no admissible training keypoints scores
/// 0 (pure noise floor) rather than erroring.
pub fn keypoint_log_likelihood(
    query_kps: &[Keypoint],
    idx: &DescriptorIndex,
    target_class: &str,
    class_by: ClassBy,
    cfg: &ShallowScoreConfig,
    query_subject: Option<&str>,
) -> Result<f64> {
    cfg.validate()?;
    let Some(target_slot) = idx.class_slot(class_by, target_class) else {
        return Ok(0.0);
    };
    let exclude = if cfg.exclude_self_subject {
        idx.exclude_slot(query_subject)
    } else {
        None
    };
    let n_k = idx.class_point_count_by_slot(class_by, target_slot, exclude);
    if n_k == 0 {
        return Ok(0.0);
    }

    let mut terms: Vec<f64> = Vec::new();
    let mut raw = Vec::new();
    for kp in query_kps {
        if kp.descriptor.len() != idx.dim() {
            return Err(Error::DimensionMismatch {
                context: "query keypoint descriptor".into(),
                expected: idx.dim(),
                got: kp.descriptor.len(),
            });
        }
        idx.knn_raw(&kp.descriptor, cfg.k_trunc, exclude, &mut raw);
        if raw.is_empty() {
            continue;
        }
        let dnn2 = match (cfg.dnn_mode, idx.mode()) {
            (DnnMode::Approximate, _) | (DnnMode::Exact, IndexMode::Exact) => raw[0].d2,
            (DnnMode::Exact, IndexMode::Approximate) => {
                let d = idx
                    .nearest_distance_exact(
                        &kp.descriptor,
                        query_subject.filter(|_| cfg.exclude_self_subject),
                    )?
                    .expect("admissible set non-empty");
                d * d
            }
        };
        let bandwidth = 1.0 + dnn2;
        let mut mass = 0.0;
        for c in &raw {
            if idx.class_slot_of_point(class_by, c.id as usize) == target_slot {
                mass += (-c.d2 / bandwidth).exp();
            }
        }
        if mass != 0.0 {
            terms.push((mass / n_k as f64).ln_1p());
        }
    }
    terms.sort_unstable_by(|a, b| a.total_cmp(b));
    Ok(terms.iter().sum())
}

/// Scores for every class in `class_set` in one pass: neighbor lists and dNN
/// are computed once per query keypoint and shared across classes. Equal to
/// the per-class op bit for bit.
pub fn batch_shallow_scores(
    query: &SubjectRecord,
    idx: &DescriptorIndex,
    class_set: &[String],
    class_by: ClassBy,
    cfg: &ShallowScoreConfig,
) -> Result<BTreeMap<String, f64>> {
    let dense = scores_dense(
        &query.keypoints,
        idx,
        class_by,
        cfg,
        Some(query.subject_id.as_str()),
    )?;
    Ok(class_set
        .iter()
        .map(|label| {
            let score = idx
                .class_slot(class_by, label)
                .map_or(0.0, |slot| dense[slot]);
            (label.clone(), score)
        })
        .collect())
}
