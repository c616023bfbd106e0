//! Per-element binarization thresholds maximizing information gain.
//!
//! For each deep-vector element, candidate thresholds are the midpoints
//! between consecutive distinct sorted training values; the fitted τ
//! maximizes the empirical mutual information H(b) - H(b|C) between the
//! induced bit b = value > τ and the class label, ties resolved to the
//! smallest candidate. Elements with a single distinct value are flagged
//! degenerate with zero gain. With one sample per class the conditional
//! entropy vanishes for every split, so the fit reduces to the entropy-
//! maximizing (median) split.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{fmt_f64, write_atomic};
use crate::model::DeepVector;

/// Two MI values within this distance count as tied, so symmetric splits
/// whose entropies differ only in the last float ulps still resolve to the
/// smallest candidate.
const MI_TIE_EPS: f64 = 1e-12;

/// Fitted per-element thresholds with their achieved information gain in
/// bits.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    taus: Vec<f64>,
    gains: Vec<f64>,
    degenerate: Vec<bool>,
}

impl ThresholdTable {
    pub fn new(taus: Vec<f64>, gains: Vec<f64>, degenerate: Vec<bool>) -> Result<Self> {
        if taus.len() != gains.len() || taus.len() != degenerate.len() {
            return Err(Error::InvalidConfig(
                "threshold table columns must have equal length".into(),
            ));
        }
        if taus.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite {
                context: "threshold table taus".into(),
            });
        }
        if gains.iter().any(|&g| !(0.0..=1.0).contains(&g)) {
            return Err(Error::InvalidConfig("gains must lie in [0, 1] bits".into()));
        }
        Ok(Self {
            taus,
            gains,
            degenerate,
        })
    }

    pub fn dim(&self) -> usize {
        self.taus.len()
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn degenerate_mask(&self) -> &[bool] {
        &self.degenerate
    }

    /// Text serialization: `THRESHOLDS <dim>` then one line per element.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("THRESHOLDS {}\n", self.dim()));
        for i in 0..self.dim() {
            out.push_str(&format!(
                "{} {} {} {}\n",
                i,
                fmt_f64(self.taus[i]),
                fmt_f64(self.gains[i]),
                u8::from(self.degenerate[i])
            ));
        }
        write_atomic(path, out.as_bytes())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
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
        let (_, header) = lines
            .next()
            .ok_or_else(|| perr(1, "empty threshold file".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 2 || parts[0] != "THRESHOLDS" {
            return Err(perr(1, format!("bad header {header:?}")));
        }
        let dim: usize = parts[1]
            .parse()
            .map_err(|_| perr(1, format!("bad dimension {:?}", parts[1])))?;
        let mut taus = vec![0.0; dim];
        let mut gains = vec![0.0; dim];
        let mut degenerate = vec![false; dim];
        let mut seen = vec![false; dim];
        for (ix, line) in lines {
            let lineno = ix + 1;
            if line.trim().is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 4 {
                return Err(perr(
                    lineno,
                    format!("expected 4 fields, got {}", toks.len()),
                ));
            }
            let i: usize = toks[0]
                .parse()
                .map_err(|_| perr(lineno, format!("bad element index {:?}", toks[0])))?;
            if i >= dim || seen[i] {
                return Err(perr(
                    lineno,
                    format!("element index {i} out of range or repeated"),
                ));
            }
            seen[i] = true;
            taus[i] = toks[1]
                .parse()
                .map_err(|_| perr(lineno, format!("bad tau {:?}", toks[1])))?;
            gains[i] = toks[2]
                .parse()
                .map_err(|_| perr(lineno, format!("bad gain {:?}", toks[2])))?;
            degenerate[i] = match toks[3] {
                "0" => false,
                "1" => true,
                other => return Err(perr(lineno, format!("bad degenerate flag {other:?}"))),
            };
        }
        if !seen.iter().all(|&s| s) {
            return Err(perr(1, "missing element rows".into()));
        }
        Self::new(taus, gains, degenerate)
    }
}

/// Shannon entropy in bits of an empirical count distribution; 0·log 0 = 0.
pub fn entropy_bits(counts: &[u64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyCounts);
    }
    let n = total as f64;
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.log2();
        }
    }
    Ok(h)
}

#[inline]
fn h2(a: u64, b: u64) -> f64 {
    let n = (a + b) as f64;
    let mut h = 0.0;
    if a > 0 {
        let p = a as f64 / n;
        h -= p * p.log2();
    }
    if b > 0 {
        let p = b as f64 / n;
        h -= p * p.log2();
    }
    h
}

/// H(b|C), accumulated in value-sorted order so the result is independent of
/// class numbering and sample order.
fn conditional_entropy(left: &[u64], right: &[u64], total: u64, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    for (&l, &r) in left.iter().zip(right) {
        let n_c = l + r;
        if n_c > 0 {
            scratch.push((n_c as f64 / total as f64) * h2(l, r));
        }
    }
    scratch.sort_unstable_by(|a, b| a.total_cmp(b));
    scratch.iter().sum()
}

/// Fit per-element thresholds on real-valued training vectors with class
/// labels. Requires at least two samples.
pub fn fit_thresholds(training: &[(&DeepVector, &str)]) -> Result<ThresholdTable> {
    if training.len() < 2 {
        return Err(Error::TooFewSamples(training.len()));
    }
    if training.iter().any(|(v, _)| v.is_binary()) {
        return Err(Error::AlreadyBinary);
    }
    let dim = training[0].0.dim();
    for (v, _) in training {
        if v.dim() != dim {
            return Err(Error::DimensionMismatch {
                context: "threshold fit training vector".into(),
                expected: dim,
                got: v.dim(),
            });
        }
    }

    // class slots by first appearance in sample order
    let mut class_of: Vec<u32> = Vec::with_capacity(training.len());
    let mut slots: HashMap<&str, u32> = HashMap::new();
    for (_, label) in training {
        let next = slots.len() as u32;
        class_of.push(*slots.entry(label).or_insert(next));
    }
    let n_classes = slots.len();
    let n = training.len() as u64;

    let mut taus = vec![0.0; dim];
    let mut gains = vec![0.0; dim];
    let mut degenerate = vec![false; dim];

    let mut order: Vec<usize> = Vec::with_capacity(training.len());
    let mut left = vec![0u64; n_classes];
    let mut right = vec![0u64; n_classes];
    let mut scratch: Vec<f64> = Vec::new();

    for elem in 0..dim {
        order.clear();
        order.extend(0..training.len());
        order.sort_by(|&a, &b| {
            training[a].0.values()[elem]
                .total_cmp(&training[b].0.values()[elem])
                .then_with(|| a.cmp(&b))
        });
        let lo = training[order[0]].0.values()[elem];
        let hi = training[*order.last().expect("non-empty")].0.values()[elem];
        if lo == hi {
            taus[elem] = lo;
            degenerate[elem] = true;
            continue;
        }

        left.fill(0);
        right.fill(0);
        for &s in order.iter() {
            right[class_of[s] as usize] += 1;
        }

        let mut best_mi = f64::NEG_INFINITY;
        let mut best_tau = 0.0;
        let mut n_left = 0u64;
        for (pos, &s) in order.iter().enumerate() {
            let c = class_of[s] as usize;
            left[c] += 1;
            right[c] -= 1;
            n_left += 1;
            if pos + 1 == order.len() {
                break;
            }
            let v = training[s].0.values()[elem];
            let v_next = training[order[pos + 1]].0.values()[elem];
            if v_next <= v {
                continue;
            }
            let tau = 0.5 * (v + v_next);
            let mi = h2(n_left, n - n_left) - conditional_entropy(&left, &right, n, &mut scratch);
            if mi > best_mi + MI_TIE_EPS {
                best_mi = mi;
                best_tau = tau;
            }
        }
        taus[elem] = best_tau;
        gains[elem] = best_mi.clamp(0.0, 1.0);
    }

    ThresholdTable::new(taus, gains, degenerate)
}

/// Binarize a real-valued vector: bit i is 1 iff value > τ_i (strict, so a
/// value exactly at the threshold maps to 0).
pub fn apply_thresholds(v: &DeepVector, table: &ThresholdTable) -> Result<DeepVector> {
    if v.is_binary() {
        return Err(Error::AlreadyBinary);
    }
    if v.dim() != table.dim() {
        return Err(Error::DimensionMismatch {
            context: "vector to binarize".into(),
            expected: table.dim(),
            got: v.dim(),
        });
    }
    let bits: Vec<f64> = v
        .values()
        .iter()
        .zip(table.taus())
        .map(|(&x, &t)| f64::from(x > t))
        .collect();
    DeepVector::binary(bits)
}
