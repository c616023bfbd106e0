//! ROC/AUC evaluation and the score-correlation diagnostic.
//!
//! The ROC sweeps thresholds downward through the distinct score values,
//! grouping ties into a single step; the trapezoidal area then equals the
//! Mann-Whitney statistic with ties counted one half.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_atomic};

/// An ROC curve with its area. Points run from (0,0) to (1,1), one per
/// distinct score threshold; `thresholds[0]` is +inf for the empty-positive
/// corner.
#[derive(Debug, Clone)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    /// (false-positive rate, true-positive rate) per threshold.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
}

/// ROC and AUC of binary-labeled scores (higher score means more positive).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidConfig(format!(
            "scores ({}) and labels ({}) differ in length",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite {
            context: "roc scores".into(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClassLabels);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| a.cmp(&b)));

    let mut thresholds = vec![f64::INFINITY];
    let mut points = vec![(0.0, 0.0)];
    let mut auc = 0.0;
    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut prev_fpr, mut prev_tpr) = (0.0f64, 0.0f64);
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        // absorb the whole tie group in one step
        let mut j = i;
        while j < order.len() && scores[order[j]] == score {
            if labels[order[j]] {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        i = j;
        let tpr = tp as f64 / positives as f64;
        let fpr = fp as f64 / negatives as f64;
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) * 0.5;
        thresholds.push(score);
        points.push((fpr, tpr));
        prev_fpr = fpr;
        prev_tpr = tpr;
    }

    Ok(RocCurve {
        thresholds,
        points,
        auc,
        positives,
        negatives,
    })
}

impl RocCurve {
    /// CSV emission: a leading `# auc=... pos=... neg=...` comment, then
    /// `threshold,fpr,tpr` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# auc={} pos={} neg={}\n",
            fmt_f64(self.auc),
            self.positives,
            self.negatives
        ));
        out.push_str("threshold,fpr,tpr\n");
        for (t, (fpr, tpr)) in self.thresholds.iter().zip(&self.points) {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt_f64(*t),
                fmt_f64(*fpr),
                fmt_f64(*tpr)
            ));
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn read_from(path: &Path) -> Result<RocCurve> {
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
        let (_, meta) = lines
            .next()
            .ok_or_else(|| perr(1, "empty ROC file".into()))?;
        let mut auc = None;
        let mut positives = None;
        let mut negatives = None;
        for tok in meta.trim_start_matches('#').split_whitespace() {
            if let Some(v) = tok.strip_prefix("auc=") {
                auc = v.parse::<f64>().ok();
            } else if let Some(v) = tok.strip_prefix("pos=") {
                positives = v.parse::<usize>().ok();
            } else if let Some(v) = tok.strip_prefix("neg=") {
                negatives = v.parse::<usize>().ok();
            }
        }
        let (Some(auc), Some(positives), Some(negatives)) = (auc, positives, negatives) else {
            return Err(perr(1, format!("bad metadata line {meta:?}")));
        };
        let (_, header) = lines
            .next()
            .ok_or_else(|| perr(2, "missing header".into()))?;
        if header != "threshold,fpr,tpr" {
            return Err(perr(2, format!("unexpected header {header:?}")));
        }
        let mut thresholds = Vec::new();
        let mut points = Vec::new();
        for (ix, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(perr(ix + 1, format!("expected 3 fields, got {}", f.len())));
            }
            let parse = |tok: &str| -> Result<f64> {
                tok.parse()
                    .map_err(|_| perr(ix + 1, format!("bad number {tok:?}")))
            };
            thresholds.push(parse(f[0])?);
            points.push((parse(f[1])?, parse(f[2])?));
        }
        Ok(RocCurve {
            thresholds,
            points,
            auc,
            positives,
            negatives,
        })
    }
}

/// Pearson correlation coefficient of two equal-length samples.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidConfig(
            "pearson needs two samples of equal length >= 2".into(),
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("first score coordinate"));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("second score coordinate"));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Independent AUC: normalized pair counting with half credit for ties.
    pub(crate) fn mann_whitney_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let pos: Vec<f64> = scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l)
            .map(|(s, _)| *s)
            .collect();
        let neg: Vec<f64> = scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| !l)
            .map(|(s, _)| *s)
            .collect();
        let mut num = 0.0;
        for p in &pos {
            for n in &neg {
                if p > n {
                    num += 1.0;
                } else if p == n {
                    num += 0.5;
                }
            }
        }
        num / (pos.len() as f64 * neg.len() as f64)
    }

    #[test]
    fn separable_scores_have_auc_one() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        let roc = roc_auc(&scores, &labels).unwrap();
        assert_eq!(roc.auc, 1.0);
        assert_eq!(roc.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(roc.points.last(), Some(&(1.0, 1.0)));
        assert_eq!(roc.positives, 2);
        assert_eq!(roc.negatives, 2);
    }

    #[test]
    fn identical_scores_have_auc_half() {
        let scores = [0.5; 6];
        let labels = [true, false, true, false, true, false];
        let roc = roc_auc(&scores, &labels).unwrap();
        assert!((roc.auc - 0.5).abs() < 1e-15);
        assert_eq!(roc.points.len(), 2); // (0,0) and (1,1) only
    }

    #[test]
    fn single_class_labels_rejected() {
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[true, true]),
            Err(Error::SingleClassLabels)
        ));
    }

    #[test]
    fn sweep_auc_equals_pair_counting() {
        let mut rng = StdRng::seed_from_u64(113);
        for _ in 0..40 {
            let n = rng.random_range(5..200);
            // coarse grid forces plenty of ties
            let scores: Vec<f64> = (0..n)
                .map(|_| rng.random_range(0..12) as f64 / 4.0)
                .collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
                continue;
            }
            let roc = roc_auc(&scores, &labels).unwrap();
            let mw = mann_whitney_auc(&scores, &labels);
            assert!((roc.auc - mw).abs() <= 1e-12, "{} vs {mw}", roc.auc);
        }
    }

    #[test]
    fn roc_points_are_monotone() {
        let mut rng = StdRng::seed_from_u64(127);
        let scores: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels: Vec<bool> = (0..100).map(|_| rng.random()).collect();
        let roc = roc_auc(&scores, &labels).unwrap();
        for w in roc.points.windows(2) {
            assert!(w[1].0 >= w[0].0);
            assert!(w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn constant_shift_leaves_roc_unchanged() {
        let mut rng = StdRng::seed_from_u64(131);
        let scores: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..4.0)).collect();
        let labels: Vec<bool> = (0..64).map(|_| rng.random()).collect();
        let base = roc_auc(&scores, &labels).unwrap();
        let shifted: Vec<f64> = scores.iter().map(|s| s + 17.5).collect();
        let moved = roc_auc(&shifted, &labels).unwrap();
        assert_eq!(base.points, moved.points);
        assert_eq!(base.auc.to_bits(), moved.auc.to_bits());
    }

    #[test]
    fn pearson_reference_cases() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(
            pearson(&xs, &[1.0, 1.0, 1.0, 1.0]),
            Err(Error::ZeroVariance(_))
        ));
    }

    #[test]
    fn csv_has_comment_and_rows() {
        let roc = roc_auc(&[0.9, 0.1], &[true, false]).unwrap();
        let csv = roc.to_csv();
        let mut lines = csv.lines();
        let head = lines.next().unwrap();
        assert!(head.starts_with("# auc="));
        assert!(head.contains("pos=1"));
        assert_eq!(lines.next().unwrap(), "threshold,fpr,tpr");
        assert_eq!(lines.count(), roc.points.len());
    }

    #[test]
    fn roc_file_round_trips_byte_identically() {
        let mut rng = StdRng::seed_from_u64(137);
        let scores: Vec<f64> = (0..40)
            .map(|_| rng.random_range(0..9) as f64 / 3.0)
            .collect();
        let labels: Vec<bool> = (0..40).map(|_| rng.random()).collect();
        let roc = roc_auc(&scores, &labels).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("roc.csv");
        let b = dir.path().join("roc2.csv");
        roc.write_to(&a).unwrap();
        let loaded = RocCurve::read_from(&a).unwrap();
        assert_eq!(loaded.auc.to_bits(), roc.auc.to_bits());
        assert_eq!(loaded.points, roc.points);
        loaded.write_to(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}
