//! Deep-vector log-likelihood with a mean-distance bandwidth.
//!
//! A query vector scores against a class as log(kernel_mass / N_k + 1) with
//! kernel exp(-d² / μ²), where μ is the mean Euclidean distance from the
//! query to the admissible training vectors and N_k the number of admissible
//! training vectors of the class. As in the shallow term, the +1 keeps the
//! score non-negative.
//!
//! Binary vectors are packed one bit per element and compared by population
//! count; on {0,1} vectors the Hamming distance equals the squared Euclidean
//! distance, so the two storage forms score identically.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{ClassBy, DatasetView, DeepVector};

/// Which training vectors define the bandwidth μ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MuMode {
    /// Mean distance to every admissible training vector regardless of class,
    /// computed once per query and shared across classes. This reading keeps
    /// μ defined in the single-exemplar-per-class protocol.
    #[default]
    AllTraining,
    /// Mean distance to the admissible vectors of the target class only.
    PerClass,
}

#[derive(Debug, Clone, Copy)]
pub struct DeepScoreConfig {
    pub mu_mode: MuMode,
    pub exclude_self_subject: bool,
    /// Lower clamp for μ; guards the all-identical degenerate case, where the
    /// kernel then correctly vanishes for any positive distance.
    pub mu_floor: f64,
}

impl Default for DeepScoreConfig {
    fn default() -> Self {
        Self {
            mu_mode: MuMode::AllTraining,
            exclude_self_subject: true,
            mu_floor: 1e-12,
        }
    }
}

impl DeepScoreConfig {
    fn validate(&self) -> Result<()> {
        if self.mu_floor.is_nan() || self.mu_floor <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "mu_floor must be positive, got {}",
                self.mu_floor
            )));
        }
        Ok(())
    }
}

/// The training side of deep scoring: vectors with their owners and class
/// labels in canonical order, pre-packed when binary.
#[derive(Debug, Clone)]
pub struct TrainingVectors {
    dim: usize,
    binary: bool,
    subjects: Vec<String>,
    classes: Vec<String>,
    /// distinct class labels in first-appearance order
    class_labels: Vec<String>,
    /// entry -> index into `class_labels`
    class_slot_of: Vec<u32>,
    values: Vec<Vec<f64>>,
    packed: Vec<u64>,
    blocks_per_vec: usize,
}

pub(crate) fn pack_bits(values: &[f64], out: &mut Vec<u64>) {
    let blocks = values.len().div_ceil(64);
    let start = out.len();
    out.resize(start + blocks, 0);
    for (i, &v) in values.iter().enumerate() {
        if v == 1.0 {
            out[start + i / 64] |= 1u64 << (i % 64);
        }
    }
}

fn hamming(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

impl TrainingVectors {
    /// Collect every deep vector of the view, labeled by `class_by`, in
    /// canonical subject order.
    pub fn from_view(view: &DatasetView<'_>, class_by: ClassBy) -> Result<Self> {
        let dim = view.dataset().d_dv();
        let mut out = Self {
            dim,
            binary: false,
            subjects: Vec::new(),
            classes: Vec::new(),
            class_labels: Vec::new(),
            class_slot_of: Vec::new(),
            values: Vec::new(),
            packed: Vec::new(),
            blocks_per_vec: dim.div_ceil(64),
        };
        let mut first = true;
        for s in view.subjects() {
            let Some(v) = &s.deep_vector else { continue };
            if first {
                out.binary = v.is_binary();
                first = false;
            } else if v.is_binary() != out.binary {
                return Err(Error::MixedVectorKinds(format!(
                    "subject {:?} differs from the rest of the training set",
                    s.subject_id
                )));
            }
            out.subjects.push(s.subject_id.clone());
            out.classes.push(class_by.label_of(s).to_string());
            if v.is_binary() {
                pack_bits(v.values(), &mut out.packed);
            }
            out.values.push(v.values().to_vec());
        }
        out.build_slots();
        Ok(out)
    }

    /// Assemble from explicit (vector, subject, class) triples.
    pub fn from_entries(entries: Vec<(DeepVector, String, String)>) -> Result<Self> {
        let mut dim = None;
        let mut binary = None;
        let mut out = Self {
            dim: 0,
            binary: false,
            subjects: Vec::new(),
            classes: Vec::new(),
            class_labels: Vec::new(),
            class_slot_of: Vec::new(),
            values: Vec::new(),
            packed: Vec::new(),
            blocks_per_vec: 0,
        };
        for (v, subject, class) in entries {
            match dim {
                None => {
                    dim = Some(v.dim());
                    binary = Some(v.is_binary());
                    out.blocks_per_vec = v.dim().div_ceil(64);
                }
                Some(d) if d != v.dim() => {
                    return Err(Error::DimensionMismatch {
                        context: format!("training vector of subject {subject:?}"),
                        expected: d,
                        got: v.dim(),
                    })
                }
                _ => {}
            }
            if binary != Some(v.is_binary()) {
                return Err(Error::MixedVectorKinds(format!(
                    "subject {subject:?} differs from the rest of the training set"
                )));
            }
            if v.is_binary() {
                pack_bits(v.values(), &mut out.packed);
            }
            out.subjects.push(subject);
            out.classes.push(class);
            out.values.push(v.values().to_vec());
        }
        out.dim = dim.unwrap_or(0);
        out.binary = binary.unwrap_or(false);
        out.build_slots();
        Ok(out)
    }

    fn build_slots(&mut self) {
        let mut slot_by_label: std::collections::HashMap<&str, u32> =
            std::collections::HashMap::new();
        let mut labels: Vec<String> = Vec::new();
        let mut slots = Vec::with_capacity(self.classes.len());
        for c in &self.classes {
            let next = labels.len() as u32;
            let slot = *slot_by_label.entry(c.as_str()).or_insert_with(|| {
                labels.push(c.clone());
                next
            });
            slots.push(slot);
        }
        self.class_labels = labels;
        self.class_slot_of = slots;
    }

    /// Distinct class labels in first-appearance order.
    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn class_slot(&self, label: &str) -> Option<usize> {
        self.class_labels.iter().position(|l| l == label)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    fn packed_of(&self, j: usize) -> &[u64] {
        &self.packed[j * self.blocks_per_vec..(j + 1) * self.blocks_per_vec]
    }
}

struct Prepared {
    query_packed: Vec<u64>,
}

fn prepare(query: &DeepVector, training: &TrainingVectors) -> Result<Prepared> {
    if query.dim() != training.dim {
        return Err(Error::DimensionMismatch {
            context: "query deep vector".into(),
            expected: training.dim,
            got: query.dim(),
        });
    }
    if query.is_binary() != training.binary {
        return Err(Error::MixedVectorKinds(
            "query and training vectors disagree".into(),
        ));
    }
    let mut query_packed = Vec::new();
    if training.binary {
        pack_bits(query.values(), &mut query_packed);
    }
    Ok(Prepared { query_packed })
}

fn d2(query: &DeepVector, prep: &Prepared, training: &TrainingVectors, j: usize) -> f64 {
    if training.binary {
        hamming(&prep.query_packed, training.packed_of(j)) as f64
    } else {
        query
            .values()
            .iter()
            .zip(&training.values[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

fn admissible<'t>(
    training: &'t TrainingVectors,
    cfg: &DeepScoreConfig,
    query_subject: Option<&str>,
) -> impl Iterator<Item = usize> + 't {
    let exclude: Option<String> = if cfg.exclude_self_subject {
        query_subject.map(str::to_string)
    } else {
        None
    };
    (0..training.len()).filter(move |&j| exclude.as_deref() != Some(training.subjects[j].as_str()))
}

/// μ over the given distances (already restricted per `mu_mode`), clamped to
/// the floor. `None` when the set is empty.
fn mu_of(dists: impl Iterator<Item = f64>, floor: f64) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for d in dists {
        sum += d;
        n += 1;
    }
    (n > 0).then(|| (sum / n as f64).max(floor))
}

/// log p(v̄ | C_k) for a single class. A class with no admissible exemplar
/// scores 0 (the +1 noise floor); an empty admissible training set is a
/// missing-evidence error because μ is undefined.
pub fn deep_log_likelihood(
    query: &DeepVector,
    training: &TrainingVectors,
    target_class: &str,
    cfg: &DeepScoreConfig,
    query_subject: Option<&str>,
) -> Result<f64> {
    cfg.validate()?;
    let prep = prepare(query, training)?;
    let idxs: Vec<usize> = admissible(training, cfg, query_subject).collect();
    if idxs.is_empty() {
        return Err(Error::MissingEvidence);
    }
    let mu = match cfg.mu_mode {
        MuMode::AllTraining => mu_of(
            idxs.iter().map(|&j| d2(query, &prep, training, j).sqrt()),
            cfg.mu_floor,
        ),
        MuMode::PerClass => mu_of(
            idxs.iter()
                .filter(|&&j| training.classes[j] == target_class)
                .map(|&j| d2(query, &prep, training, j).sqrt()),
            cfg.mu_floor,
        ),
    };
    let Some(mu) = mu else {
        // per-class μ over an empty class: noise floor
        return Ok(0.0);
    };
    let mu2 = mu * mu;
    let mut mass = 0.0;
    let mut n_k = 0usize;
    for &j in &idxs {
        if training.classes[j] == target_class {
            mass += (-d2(query, &prep, training, j) / mu2).exp();
            n_k += 1;
        }
    }
    if n_k == 0 {
        return Ok(0.0);
    }
    Ok((mass / n_k as f64).ln_1p())
}

/// Per-class scores aligned with `training.class_labels()`. Distances are
/// computed once per training vector; per-class accumulators run in canonical
/// entry order, so every slot equals the single-class op bit for bit.
pub(crate) fn scores_dense(
    query: &DeepVector,
    training: &TrainingVectors,
    cfg: &DeepScoreConfig,
    query_subject: Option<&str>,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let prep = prepare(query, training)?;
    let n_classes = training.class_labels.len();
    let mut d2s: Vec<f64> = Vec::new();
    let mut slots: Vec<u32> = Vec::new();
    for j in admissible(training, cfg, query_subject) {
        d2s.push(d2(query, &prep, training, j));
        slots.push(training.class_slot_of[j]);
    }
    if d2s.is_empty() {
        return Err(Error::MissingEvidence);
    }

    let mut counts = vec![0usize; n_classes];
    for &s in &slots {
        counts[s as usize] += 1;
    }
    // μ per class slot
    let mut mu2 = vec![0.0f64; n_classes];
    match cfg.mu_mode {
        MuMode::AllTraining => {
            let mut sum = 0.0;
            for &d2v in &d2s {
                sum += d2v.sqrt();
            }
            let mu = (sum / d2s.len() as f64).max(cfg.mu_floor);
            mu2.fill(mu * mu);
        }
        MuMode::PerClass => {
            let mut sums = vec![0.0f64; n_classes];
            for (&d2v, &s) in d2s.iter().zip(&slots) {
                sums[s as usize] += d2v.sqrt();
            }
            for c in 0..n_classes {
                if counts[c] > 0 {
                    let mu = (sums[c] / counts[c] as f64).max(cfg.mu_floor);
                    mu2[c] = mu * mu;
                }
            }
        }
    }

    let mut masses = vec![0.0f64; n_classes];
    for (&d2v, &s) in d2s.iter().zip(&slots) {
        masses[s as usize] += (-d2v / mu2[s as usize]).exp();
    }
    Ok((0..n_classes)
        .map(|c| {
            if counts[c] == 0 {
                0.0
            } else {
                (masses[c] / counts[c] as f64).ln_1p()
            }
        })
        .collect())
}

/// Scores for every class in `class_set`. With [`MuMode::AllTraining`] μ is
/// computed once and shared; results equal the per-class op bit for bit.
pub fn batch_deep_scores(
    query: &DeepVector,
    training: &TrainingVectors,
    class_set: &[String],
    cfg: &DeepScoreConfig,
    query_subject: Option<&str>,
) -> Result<BTreeMap<String, f64>> {
    let dense = scores_dense(query, training, cfg, query_subject)?;
    Ok(class_set
        .iter()
        .map(|c| {
            let score = training.class_slot(c).map_or(0.0, |slot| dense[slot]);
            (c.clone(), score)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn real(v: &[f64]) -> DeepVector {
        DeepVector::real(v.to_vec()).unwrap()
    }

    fn training_of(entries: &[(&[f64], &str, &str)]) -> TrainingVectors {
        TrainingVectors::from_entries(
            entries
                .iter()
                .map(|(v, s, c)| (real(v), s.to_string(), c.to_string()))
                .collect(),
        )
        .unwrap()
    }

    fn no_exclude() -> DeepScoreConfig {
        DeepScoreConfig {
            exclude_self_subject: false,
            ..DeepScoreConfig::default()
        }
    }

    #[test]
    fn sole_identical_training_vector_scores_ln2() {
        let tr = training_of(&[(&[0.3, -0.7, 2.0], "S01", "F1")]);
        let score =
            deep_log_likelihood(&real(&[0.3, -0.7, 2.0]), &tr, "F1", &no_exclude(), None).unwrap();
        assert!((score - std::f64::consts::LN_2).abs() < 1e-15, "{score}");
    }

    #[test]
    fn absent_class_scores_noise_floor() {
        let tr = training_of(&[(&[1.0, 0.0], "S01", "F1"), (&[0.0, 1.0], "S02", "F1")]);
        let score =
            deep_log_likelihood(&real(&[0.5, 0.5]), &tr, "F9", &no_exclude(), None).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn empty_admissible_set_is_missing_evidence() {
        let tr = training_of(&[(&[1.0, 0.0], "S01", "F1")]);
        let err = deep_log_likelihood(
            &real(&[1.0, 0.0]),
            &tr,
            "F1",
            &DeepScoreConfig::default(),
            Some("S01"),
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingEvidence));
    }

    #[test]
    fn dimension_and_kind_mismatches() {
        let tr = training_of(&[(&[1.0, 0.0], "S01", "F1")]);
        assert!(matches!(
            deep_log_likelihood(&real(&[1.0]), &tr, "F1", &no_exclude(), None),
            Err(Error::DimensionMismatch { .. })
        ));
        let b = DeepVector::binary(vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            deep_log_likelihood(&b, &tr, "F1", &no_exclude(), None),
            Err(Error::MixedVectorKinds(_))
        ));
    }

    /// Independent evaluation straight from the formula.
    fn brute_force(
        query: &[f64],
        entries: &[(&[f64], &str, &str)],
        target: &str,
        mu_mode: MuMode,
        exclude: Option<&str>,
        floor: f64,
    ) -> Option<f64> {
        let adm: Vec<&(&[f64], &str, &str)> = entries
            .iter()
            .filter(|(_, s, _)| Some(*s) != exclude)
            .collect();
        if adm.is_empty() {
            return None;
        }
        let dist = |v: &[f64]| -> f64 {
            query
                .iter()
                .zip(v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };
        let mu_set: Vec<f64> = match mu_mode {
            MuMode::AllTraining => adm.iter().map(|(v, _, _)| dist(v)).collect(),
            MuMode::PerClass => adm
                .iter()
                .filter(|(_, _, c)| *c == target)
                .map(|(v, _, _)| dist(v))
                .collect(),
        };
        if mu_set.is_empty() {
            return Some(0.0);
        }
        let mu = (mu_set.iter().sum::<f64>() / mu_set.len() as f64).max(floor);
        let class: Vec<&&(&[f64], &str, &str)> =
            adm.iter().filter(|(_, _, c)| *c == target).collect();
        if class.is_empty() {
            return Some(0.0);
        }
        let mass: f64 = class
            .iter()
            .map(|(v, _, _)| (-(dist(v) * dist(v)) / (mu * mu)).exp())
            .sum();
        Some((mass / class.len() as f64 + 1.0).ln())
    }

    #[test]
    fn matches_brute_force_oracle() {
        let mut rng = StdRng::seed_from_u64(71);
        let dim = 16;
        let vecs: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ids: Vec<String> = (0..30).map(|i| format!("S{i:02}")).collect();
        let entries: Vec<(&[f64], &str, &str)> = (0..30)
            .map(|i| {
                (
                    vecs[i].as_slice(),
                    ids[i].as_str(),
                    if i % 2 == 0 { "A" } else { "B" },
                )
            })
            .collect();
        let tr = training_of(&entries);
        let query: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        for mu_mode in [MuMode::AllTraining, MuMode::PerClass] {
            let cfg = DeepScoreConfig {
                mu_mode,
                exclude_self_subject: true,
                mu_floor: 1e-12,
            };
            for target in ["A", "B"] {
                let got =
                    deep_log_likelihood(&real(&query), &tr, target, &cfg, Some("S03")).unwrap();
                let want =
                    brute_force(&query, &entries, target, mu_mode, Some("S03"), 1e-12).unwrap();
                assert!(
                    (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                    "{mu_mode:?}/{target}: got {got} want {want}"
                );
            }
        }
    }

    #[test]
    fn batch_equals_per_class_loop_bit_for_bit() {
        let mut rng = StdRng::seed_from_u64(73);
        let dim = 8;
        let vecs: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ids: Vec<String> = (0..12).map(|i| format!("S{i:02}")).collect();
        let entries: Vec<(&[f64], &str, &str)> = (0..12)
            .map(|i| (vecs[i].as_slice(), ids[i].as_str(), ["A", "B", "C"][i % 3]))
            .collect();
        let tr = training_of(&entries);
        let classes: Vec<String> = ["A", "B", "C", "missing"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let query: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        for mu_mode in [MuMode::AllTraining, MuMode::PerClass] {
            let cfg = DeepScoreConfig {
                mu_mode,
                exclude_self_subject: true,
                mu_floor: 1e-12,
            };
            let batch = batch_deep_scores(&real(&query), &tr, &classes, &cfg, Some("S01")).unwrap();
            for c in &classes {
                let single = deep_log_likelihood(&real(&query), &tr, c, &cfg, Some("S01")).unwrap();
                assert_eq!(batch[c].to_bits(), single.to_bits(), "class {c}");
            }
        }
        // singleton class set equals the single op
        let singleton = batch_deep_scores(
            &real(&query),
            &tr,
            &classes[..1],
            &DeepScoreConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(singleton.len(), 1);
    }

    #[test]
    fn binarized_distance_is_hamming() {
        // 1920-bit vectors differing in 480 positions: d² = 480.
        let dim = 1920;
        let a: Vec<f64> = (0..dim).map(|i| f64::from(i % 2 == 0)).collect();
        let mut b = a.clone();
        for i in 0..480 {
            b[i * 4] = 1.0 - b[i * 4];
        }
        let qa = DeepVector::binary(a).unwrap();
        let qb = DeepVector::binary(b.clone()).unwrap();
        let tr = TrainingVectors::from_entries(vec![(qb, "S01".into(), "F1".into())]).unwrap();
        let mut packed_q = Vec::new();
        pack_bits(qa.values(), &mut packed_q);
        assert_eq!(hamming(&packed_q, tr.packed_of(0)), 480);

        // score must equal the real-valued evaluation of the same vectors
        let cfg = no_exclude();
        let got = deep_log_likelihood(&qa, &tr, "F1", &cfg, None).unwrap();
        let b_real: Vec<(&[f64], &str, &str)> = vec![(b.as_slice(), "S01", "F1")];
        let want =
            brute_force(qa.values(), &b_real, "F1", MuMode::AllTraining, None, 1e-12).unwrap();
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn coordinate_permutation_leaves_binary_scores_identical() {
        let mut rng = StdRng::seed_from_u64(79);
        let dim = 96;
        let mk = |rng: &mut StdRng| -> Vec<f64> {
            (0..dim).map(|_| f64::from(rng.random::<bool>())).collect()
        };
        let vecs: Vec<Vec<f64>> = (0..8).map(|_| mk(&mut rng)).collect();
        let query = mk(&mut rng);
        let mut perm: Vec<usize> = (0..dim).collect();
        // deterministic shuffle
        for i in (1..dim).rev() {
            let j = rng.random_range(0..=i);
            perm.swap(i, j);
        }
        let apply = |v: &[f64]| -> Vec<f64> { perm.iter().map(|&p| v[p]).collect() };

        let ids: Vec<String> = (0..8).map(|i| format!("S{i}")).collect();
        let tr = TrainingVectors::from_entries(
            (0..8)
                .map(|i| {
                    (
                        DeepVector::binary(vecs[i].clone()).unwrap(),
                        ids[i].clone(),
                        ["A", "B"][i % 2].to_string(),
                    )
                })
                .collect(),
        )
        .unwrap();
        let tr_perm = TrainingVectors::from_entries(
            (0..8)
                .map(|i| {
                    (
                        DeepVector::binary(apply(&vecs[i])).unwrap(),
                        ids[i].clone(),
                        ["A", "B"][i % 2].to_string(),
                    )
                })
                .collect(),
        )
        .unwrap();
        let cfg = no_exclude();
        for target in ["A", "B"] {
            let s1 = deep_log_likelihood(
                &DeepVector::binary(query.clone()).unwrap(),
                &tr,
                target,
                &cfg,
                None,
            )
            .unwrap();
            let s2 = deep_log_likelihood(
                &DeepVector::binary(apply(&query)).unwrap(),
                &tr_perm,
                target,
                &cfg,
                None,
            )
            .unwrap();
            assert_eq!(s1.to_bits(), s2.to_bits());
        }
    }

    #[test]
    fn global_scaling_leaves_scores_unchanged() {
        let mut rng = StdRng::seed_from_u64(83);
        let dim = 12;
        let vecs: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let query: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ids: Vec<String> = (0..10).map(|i| format!("S{i}")).collect();
        let base = TrainingVectors::from_entries(
            (0..10)
                .map(|i| {
                    (
                        real(&vecs[i]),
                        ids[i].clone(),
                        ["A", "B"][i % 2].to_string(),
                    )
                })
                .collect(),
        )
        .unwrap();
        let cfg = no_exclude();
        let s0 = deep_log_likelihood(&real(&query), &base, "A", &cfg, None).unwrap();
        for c in [2.0f64, 0.25, 3.0] {
            let scaled = TrainingVectors::from_entries(
                (0..10)
                    .map(|i| {
                        let v: Vec<f64> = vecs[i].iter().map(|x| x * c).collect();
                        (real(&v), ids[i].clone(), ["A", "B"][i % 2].to_string())
                    })
                    .collect(),
            )
            .unwrap();
            let qs: Vec<f64> = query.iter().map(|x| x * c).collect();
            let s = deep_log_likelihood(&real(&qs), &scaled, "A", &cfg, None).unwrap();
            assert!(
                (s - s0).abs() <= 1e-12 * s0.abs().max(1.0),
                "c={c}: {s} vs {s0}"
            );
        }
    }

    #[test]
    fn single_exemplar_scores_capped_at_ln2() {
        let mut rng = StdRng::seed_from_u64(89);
        let dim = 6;
        let entries: Vec<(DeepVector, String, String)> = (0..20)
            .map(|i| {
                let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                (real(&v), format!("S{i:02}"), format!("S{i:02}"))
            })
            .collect();
        let tr = TrainingVectors::from_entries(entries).unwrap();
        let query: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cfg = DeepScoreConfig::default();
        for i in 0..20 {
            let s = deep_log_likelihood(&real(&query), &tr, &format!("S{i:02}"), &cfg, Some("S00"))
                .unwrap();
            assert!(s >= 0.0);
            assert!(s <= std::f64::consts::LN_2 + 1e-15);
        }
    }
}
