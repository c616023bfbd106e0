//! Domain types: keypoints, deep vectors, subjects, and the dataset container.
//!
//! A [`Dataset`] is immutable after construction and safe for unrestricted
//! concurrent reads. [`DatasetView`] is a cheap copyable handle that optionally
//! hides one subject; it is the unit every training-side computation consumes,
//! so leave-one-out protocols never copy data.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// One shallow feature: a located, scaled descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    /// 3D location, world or voxel units.
    pub position: [f64; 3],
    /// Detection scale, same units as `position`. Always > 0.
    pub scale: f64,
    /// Fixed-length appearance descriptor.
    pub descriptor: Vec<f64>,
}

impl Keypoint {
    pub fn new(position: [f64; 3], scale: f64, descriptor: Vec<f64>) -> Result<Self> {
        if scale <= 0.0 || !scale.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "keypoint scale must be a positive finite real, got {scale}"
            )));
        }
        if position.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "keypoint position".into(),
            });
        }
        if descriptor.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "keypoint descriptor".into(),
            });
        }
        Ok(Self {
            position,
            scale,
            descriptor,
        })
    }
}

/// One fixed-length deep descriptor. `is_binary` marks a vector whose entries
/// are exactly 0 or 1; such vectors compare by Hamming distance downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepVector {
    values: Vec<f64>,
    is_binary: bool,
}

impl DeepVector {
    /// A real-valued vector. Entries must be finite.
    pub fn real(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "deep vector".into(),
            });
        }
        Ok(Self {
            values,
            is_binary: false,
        })
    }

    /// A binary vector. Every entry must be exactly 0.0 or 1.0.
    pub fn binary(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidConfig(
                "binary deep vector entries must be exactly 0 or 1".into(),
            ));
        }
        Ok(Self {
            values,
            is_binary: true,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_binary(&self) -> bool {
        self.is_binary
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// A subject with its identity, class labels, and features. The deep vector is
/// optional; fused scoring of a subject without one is an error, never a
/// silent fallback.
#[derive(Debug, Clone)]
pub struct SubjectRecord {
    pub subject_id: String,
    /// Instance class, e.g. family identity. One class per subject.
    pub instance_label: String,
    /// Group class, e.g. sex.
    pub group_label: String,
    pub keypoints: Vec<Keypoint>,
    pub deep_vector: Option<DeepVector>,
}

/// Which label of a subject acts as the class variable for a computation.
///
/// The retrieval protocol treats every subject as its own single-exemplar
/// class; group classification uses the group label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassBy {
    Subject,
    Instance,
    Group,
}

impl ClassBy {
    pub fn label_of<'a>(&self, s: &'a SubjectRecord) -> &'a str {
        match self {
            ClassBy::Subject => &s.subject_id,
            ClassBy::Instance => &s.instance_label,
            ClassBy::Group => &s.group_label,
        }
    }
}

/// The immutable dataset: subjects in canonical order plus the dataset-wide
/// descriptor dimensions. Subject order is the iteration order for every
/// deterministic reduction in the engine.
#[derive(Debug, Clone)]
pub struct Dataset {
    subjects: Vec<SubjectRecord>,
    d_kp: usize,
    d_dv: usize,
    by_id: HashMap<String, usize>,
}

impl Dataset {
    pub fn new(subjects: Vec<SubjectRecord>, d_kp: usize, d_dv: usize) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(subjects.len());
        for (ix, s) in subjects.iter().enumerate() {
            if s.instance_label.is_empty() || s.group_label.is_empty() {
                return Err(Error::InvalidSubject {
                    subject_id: s.subject_id.clone(),
                    msg: "instance and group labels must be non-empty".into(),
                });
            }
            if by_id.insert(s.subject_id.clone(), ix).is_some() {
                return Err(Error::DuplicateSubject {
                    subject_id: s.subject_id.clone(),
                });
            }
            for kp in &s.keypoints {
                if kp.descriptor.len() != d_kp {
                    return Err(Error::DimensionMismatch {
                        context: format!("keypoint descriptor of subject {:?}", s.subject_id),
                        expected: d_kp,
                        got: kp.descriptor.len(),
                    });
                }
            }
            if let Some(v) = &s.deep_vector {
                if v.dim() != d_dv {
                    return Err(Error::DimensionMismatch {
                        context: format!("deep vector of subject {:?}", s.subject_id),
                        expected: d_dv,
                        got: v.dim(),
                    });
                }
            }
        }
        Ok(Self {
            subjects,
            d_kp,
            d_dv,
            by_id,
        })
    }

    pub fn subjects(&self) -> &[SubjectRecord] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn d_kp(&self) -> usize {
        self.d_kp
    }

    pub fn d_dv(&self) -> usize {
        self.d_dv
    }

    pub fn subject_index(&self, subject_id: &str) -> Option<usize> {
        self.by_id.get(subject_id).copied()
    }

    pub fn subject(&self, subject_id: &str) -> Option<&SubjectRecord> {
        self.subject_index(subject_id).map(|ix| &self.subjects[ix])
    }

    /// A view over the whole dataset.
    pub fn view(&self) -> DatasetView<'_> {
        DatasetView {
            ds: self,
            excluded: None,
        }
    }

    /// A view excluding every feature owned by `subject_id`. The underlying
    /// dataset is untouched; any number of views may coexist.
    pub fn leave_subject_out(&self, subject_id: &str) -> Result<DatasetView<'_>> {
        let ix = self
            .subject_index(subject_id)
            .ok_or_else(|| Error::UnknownSubject(subject_id.to_string()))?;
        Ok(DatasetView {
            ds: self,
            excluded: Some(ix),
        })
    }
}

/// A read-only window onto a [`Dataset`] with at most one subject excluded.
#[derive(Debug, Clone, Copy)]
pub struct DatasetView<'a> {
    ds: &'a Dataset,
    excluded: Option<usize>,
}

impl<'a> DatasetView<'a> {
    pub fn dataset(&self) -> &'a Dataset {
        self.ds
    }

    pub fn excluded_subject(&self) -> Option<&'a str> {
        self.excluded
            .map(|ix| self.ds.subjects[ix].subject_id.as_str())
    }

    /// Subjects in canonical order, skipping the excluded one.
    pub fn subjects(&self) -> impl Iterator<Item = &'a SubjectRecord> + '_ {
        let excluded = self.excluded;
        self.ds
            .subjects
            .iter()
            .enumerate()
            .filter(move |(ix, _)| Some(*ix) != excluded)
            .map(|(_, s)| s)
    }

    pub fn len(&self) -> usize {
        self.ds.len() - usize::from(self.excluded.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Training keypoints of class `label` in this view (the per-class
    /// normalizer of the shallow likelihood).
    pub fn keypoint_count_for(&self, class_by: ClassBy, label: &str) -> usize {
        self.subjects()
            .filter(|s| class_by.label_of(s) == label)
            .map(|s| s.keypoints.len())
            .sum()
    }

    /// Training deep vectors of class `label` in this view (the per-class
    /// normalizer of the deep likelihood).
    pub fn vector_count_for(&self, class_by: ClassBy, label: &str) -> usize {
        self.subjects()
            .filter(|s| class_by.label_of(s) == label && s.deep_vector.is_some())
            .count()
    }

    pub fn total_keypoints(&self) -> usize {
        self.subjects().map(|s| s.keypoints.len()).sum()
    }

    pub fn total_vectors(&self) -> usize {
        self.subjects().filter(|s| s.deep_vector.is_some()).count()
    }

    /// Distinct class labels under `class_by`, in first-appearance order.
    pub fn class_labels(&self, class_by: ClassBy) -> Vec<String> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for s in self.subjects() {
            let label = class_by.label_of(s);
            if seen.insert(label.to_string(), ()).is_none() {
                out.push(label.to_string());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kp(d: &[f64]) -> Keypoint {
        Keypoint::new([0.0, 0.0, 0.0], 1.0, d.to_vec()).unwrap()
    }

    fn subject(id: &str, family: &str, group: &str, n_kp: usize) -> SubjectRecord {
        SubjectRecord {
            subject_id: id.to_string(),
            instance_label: family.to_string(),
            group_label: group.to_string(),
            keypoints: (0..n_kp).map(|i| kp(&[i as f64, 0.0])).collect(),
            deep_vector: Some(DeepVector::real(vec![0.0, 1.0, 2.0]).unwrap()),
        }
    }

    #[test]
    fn keypoint_rejects_bad_scale() {
        assert!(Keypoint::new([0.0; 3], 0.0, vec![1.0]).is_err());
        assert!(Keypoint::new([0.0; 3], -1.0, vec![1.0]).is_err());
        assert!(Keypoint::new([0.0; 3], f64::NAN, vec![1.0]).is_err());
        assert!(Keypoint::new([0.0; 3], 1.0, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn deep_vector_kinds() {
        assert!(DeepVector::real(vec![0.5, f64::NAN]).is_err());
        assert!(DeepVector::binary(vec![0.0, 1.0, 1.0]).unwrap().is_binary());
        assert!(DeepVector::binary(vec![0.0, 0.5]).is_err());
    }

    #[test]
    fn duplicate_subject_id_rejected() {
        let subjects = vec![subject("S01", "F1", "G0", 1), subject("S01", "F2", "G1", 1)];
        let err = Dataset::new(subjects, 2, 3).unwrap_err();
        assert!(matches!(err, Error::DuplicateSubject { subject_id } if subject_id == "S01"));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut s = subject("S01", "F1", "G0", 1);
        s.keypoints.push(kp(&[1.0, 2.0, 3.0]));
        let err = Dataset::new(vec![s], 2, 3).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                got: 3,
                ..
            }
        ));
    }

    #[test]
    fn leave_subject_out_counts() {
        let ds = Dataset::new(
            vec![
                subject("S01", "F1", "G0", 3),
                subject("S02", "F1", "G1", 5),
                subject("S03", "F2", "G0", 7),
            ],
            2,
            3,
        )
        .unwrap();

        let view = ds.leave_subject_out("S01").unwrap();
        assert_eq!(view.len(), 2);
        assert_eq!(view.total_keypoints(), 12);
        assert_eq!(view.keypoint_count_for(ClassBy::Instance, "F1"), 5);
        assert_eq!(view.vector_count_for(ClassBy::Group, "G0"), 1);

        // Excluding the only member of a class leaves the class empty.
        let view = ds.leave_subject_out("S03").unwrap();
        assert_eq!(view.keypoint_count_for(ClassBy::Instance, "F2"), 0);

        // Views are independent and do not mutate the dataset.
        let a = ds.leave_subject_out("S01").unwrap();
        let b = ds.leave_subject_out("S02").unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(b.len(), 2);
        assert_eq!(ds.len(), 3);

        assert!(ds.leave_subject_out("S99").is_err());
    }

    #[test]
    fn per_class_counts_match_direct_recount() {
        let ds = Dataset::new(
            vec![
                subject("S01", "F1", "G0", 3),
                subject("S02", "F1", "G1", 5),
                subject("S03", "F2", "G0", 7),
            ],
            2,
            3,
        )
        .unwrap();
        let view = ds.view();
        for label in view.class_labels(ClassBy::Instance) {
            let direct: usize = ds
                .subjects()
                .iter()
                .filter(|s| s.instance_label == label)
                .map(|s| s.keypoints.len())
                .sum();
            assert_eq!(view.keypoint_count_for(ClassBy::Instance, &label), direct);
        }
    }
}
