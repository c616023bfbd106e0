//! Text file formats and dataset loading.
//!
//! All numeric text is written as 17-significant-digit scientific notation,
//! which round-trips every f64 exactly; parsers reject non-finite tokens.
//! Writes go through a temp-file-and-rename so readers never observe a
//! partial file.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::model::{Dataset, DeepVector, Keypoint, SubjectRecord};

pub const MANIFEST_HEADER: &str = "subject_id,family_id,group_label,keypoint_file,vector_file";

/// Default keypoint descriptor dimension when the manifest does not declare
/// one and no keypoint file exists to derive it from.
pub const DEFAULT_D_KP: usize = 64;
/// Default deep-vector dimension under the same fallback.
pub const DEFAULT_D_DV: usize = 1920;

/// Canonical numeric formatting: 17 significant digits, scientific.
/// `parse::<f64>` of the output reproduces the input bit for bit.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(tok: &str, path: &Path, line: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("invalid numeric token {tok:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("non-finite value {tok:?}"),
        });
    }
    Ok(v)
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Write `bytes` to `path` atomically (temp file in the same directory, then
/// rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let stem = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(
        ".{stem}.tmp.{}.{}",
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(bytes).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Keypoint files
// ---------------------------------------------------------------------------

/// Parse a keypoint file: header `KEYPOINTS <count> <dim>`, then one line per
/// keypoint: `x y z scale d_1 ... d_dim`.
pub fn read_keypoint_file(path: &Path) -> Result<(Vec<Keypoint>, usize)> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: "empty keypoint file".into(),
    })?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let bad_header = || Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: format!("expected header \"KEYPOINTS <count> <dim>\", got {header:?}"),
    };
    if parts.len() != 3 || parts[0] != "KEYPOINTS" {
        return Err(bad_header());
    }
    let count: usize = parts[1].parse().map_err(|_| bad_header())?;
    let dim: usize = parts[2].parse().map_err(|_| bad_header())?;

    let mut kps = Vec::with_capacity(count);
    for (ix, line) in lines {
        let lineno = ix + 1;
        if line.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 + dim {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: format!(
                    "expected {} fields (x y z scale + {dim} descriptor values), got {}",
                    4 + dim,
                    toks.len()
                ),
            });
        }
        let mut vals = Vec::with_capacity(4 + dim);
        for t in &toks {
            vals.push(parse_f64(t, path, lineno)?);
        }
        let kp = Keypoint::new([vals[0], vals[1], vals[2]], vals[3], vals[4..].to_vec()).map_err(
            |e| Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: e.to_string(),
            },
        )?;
        kps.push(kp);
    }
    if kps.len() != count {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("header declares {count} keypoints, file has {}", kps.len()),
        });
    }
    Ok((kps, dim))
}

pub fn keypoint_file_string(kps: &[Keypoint], dim: usize) -> String {
    let mut out = String::new();
    out.push_str(&format!("KEYPOINTS {} {}\n", kps.len(), dim));
    for kp in kps {
        out.push_str(&fmt_f64(kp.position[0]));
        for v in [kp.position[1], kp.position[2], kp.scale] {
            out.push(' ');
            out.push_str(&fmt_f64(v));
        }
        for v in &kp.descriptor {
            out.push(' ');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_keypoint_file(path: &Path, kps: &[Keypoint], dim: usize) -> Result<()> {
    write_atomic(path, keypoint_file_string(kps, dim).as_bytes())
}

// ---------------------------------------------------------------------------
// Deep-vector files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct VectorFile {
    pub dim: usize,
    /// True when every value in the file is exactly 0 or 1; such a file holds
    /// binarized vectors.
    pub is_binary: bool,
    pub rows: Vec<(String, Vec<f64>)>,
}

/// Parse a vector file: header `VECTORS <count> <dim>`, then one line per
/// subject: `<subject_id> v_1 ... v_dim`.
pub fn read_vector_file(path: &Path) -> Result<VectorFile> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: "empty vector file".into(),
    })?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let bad_header = || Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: format!("expected header \"VECTORS <count> <dim>\", got {header:?}"),
    };
    if parts.len() != 3 || parts[0] != "VECTORS" {
        return Err(bad_header());
    }
    let count: usize = parts[1].parse().map_err(|_| bad_header())?;
    let dim: usize = parts[2].parse().map_err(|_| bad_header())?;

    let mut rows = Vec::with_capacity(count);
    let mut is_binary = true;
    for (ix, line) in lines {
        let lineno = ix + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let id = toks.next().expect("non-empty line").to_string();
        let mut vals = Vec::with_capacity(dim);
        for t in toks {
            let v = parse_f64(t, path, lineno)?;
            if v != 0.0 && v != 1.0 {
                is_binary = false;
            }
            vals.push(v);
        }
        if vals.len() != dim {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: format!(
                    "expected {dim} values for subject {id:?}, got {}",
                    vals.len()
                ),
            });
        }
        rows.push((id, vals));
    }
    if rows.len() != count {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("header declares {count} vectors, file has {}", rows.len()),
        });
    }
    Ok(VectorFile {
        dim,
        is_binary,
        rows,
    })
}

pub fn vector_file_string(rows: &[(String, &DeepVector)], dim: usize) -> String {
    let mut out = String::new();
    out.push_str(&format!("VECTORS {} {}\n", rows.len(), dim));
    for (id, v) in rows {
        out.push_str(id);
        if v.is_binary() {
            for x in v.values() {
                out.push(' ');
                out.push(if *x == 1.0 { '1' } else { '0' });
            }
        } else {
            for x in v.values() {
                out.push(' ');
                out.push_str(&fmt_f64(*x));
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_vector_file(path: &Path, rows: &[(String, &DeepVector)], dim: usize) -> Result<()> {
    write_atomic(path, vector_file_string(rows, dim).as_bytes())
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct ManifestRow {
    line: usize,
    subject_id: String,
    family_id: String,
    group_label: String,
    keypoint_file: String,
    vector_file: String,
}

/// Load a dataset from a manifest CSV. Columns:
/// `subject_id,family_id,group_label,keypoint_file,vector_file`, paths
/// relative to the manifest. Optional `# d_kp=<n>` / `# d_dv=<n>` comment
/// directives above the header pin the dataset-wide dimensions; otherwise
/// they are taken from the first referenced feature file of each kind, and
/// failing that default to 64 and 1920.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let text = read_to_string(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut d_kp_decl: Option<usize> = None;
    let mut d_dv_decl: Option<usize> = None;
    let mut rows: Vec<ManifestRow> = Vec::new();
    let mut saw_header = false;
    for (ix, raw) in text.lines().enumerate() {
        let lineno = ix + 1;
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            let body = line.trim_start_matches('#').trim();
            if let Some(v) = body.strip_prefix("d_kp=") {
                d_kp_decl = Some(v.trim().parse().map_err(|_| Error::Parse {
                    path: manifest_path.to_path_buf(),
                    line: lineno,
                    msg: format!("invalid d_kp directive {v:?}"),
                })?);
            } else if let Some(v) = body.strip_prefix("d_dv=") {
                d_dv_decl = Some(v.trim().parse().map_err(|_| Error::Parse {
                    path: manifest_path.to_path_buf(),
                    line: lineno,
                    msg: format!("invalid d_dv directive {v:?}"),
                })?);
            }
            continue;
        }
        if !saw_header {
            if line != MANIFEST_HEADER {
                return Err(Error::Parse {
                    path: manifest_path.to_path_buf(),
                    line: lineno,
                    msg: format!("expected header {MANIFEST_HEADER:?}, got {line:?}"),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                path: manifest_path.to_path_buf(),
                line: lineno,
                msg: format!("expected 5 comma-separated fields, got {}", fields.len()),
            });
        }
        rows.push(ManifestRow {
            line: lineno,
            subject_id: fields[0].to_string(),
            family_id: fields[1].to_string(),
            group_label: fields[2].to_string(),
            keypoint_file: fields[3].to_string(),
            vector_file: fields[4].to_string(),
        });
    }
    if !saw_header {
        return Err(Error::Parse {
            path: manifest_path.to_path_buf(),
            line: 1,
            msg: "missing manifest header".into(),
        });
    }

    // Parse every referenced file once.
    let mut kp_cache: HashMap<PathBuf, (Vec<Keypoint>, usize)> = HashMap::new();
    let mut vec_cache: HashMap<PathBuf, VectorFile> = HashMap::new();
    for row in &rows {
        if !row.keypoint_file.is_empty() {
            let p = base.join(&row.keypoint_file);
            if let std::collections::hash_map::Entry::Vacant(e) = kp_cache.entry(p.clone()) {
                e.insert(read_keypoint_file(&p)?);
            }
        }
        if !row.vector_file.is_empty() {
            let p = base.join(&row.vector_file);
            if let std::collections::hash_map::Entry::Vacant(e) = vec_cache.entry(p.clone()) {
                e.insert(read_vector_file(&p)?);
            }
        }
    }

    let d_kp = d_kp_decl
        .or_else(|| {
            rows.iter().find_map(|r| {
                (!r.keypoint_file.is_empty()).then(|| kp_cache[&base.join(&r.keypoint_file)].1)
            })
        })
        .unwrap_or(DEFAULT_D_KP);
    let d_dv = d_dv_decl
        .or_else(|| {
            rows.iter().find_map(|r| {
                (!r.vector_file.is_empty()).then(|| vec_cache[&base.join(&r.vector_file)].dim)
            })
        })
        .unwrap_or(DEFAULT_D_DV);

    let mut subjects = Vec::with_capacity(rows.len());
    for row in &rows {
        let keypoints = if row.keypoint_file.is_empty() {
            Vec::new()
        } else {
            let p = base.join(&row.keypoint_file);
            let (kps, file_dim) = &kp_cache[&p];
            if *file_dim != d_kp {
                return Err(Error::Parse {
                    path: p,
                    line: 1,
                    msg: format!(
                        "subject {:?}: keypoint dimension {file_dim} does not match dataset d_kp={d_kp}",
                        row.subject_id
                    ),
                });
            }
            kps.clone()
        };
        let deep_vector = if row.vector_file.is_empty() {
            None
        } else {
            let p = base.join(&row.vector_file);
            let vf = &vec_cache[&p];
            if vf.dim != d_dv {
                return Err(Error::Parse {
                    path: p,
                    line: 1,
                    msg: format!(
                        "subject {:?}: vector dimension {} does not match dataset d_dv={d_dv}",
                        row.subject_id, vf.dim
                    ),
                });
            }
            let values = vf
                .rows
                .iter()
                .find(|(id, _)| *id == row.subject_id)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| Error::Parse {
                    path: p.clone(),
                    line: row.line,
                    msg: format!("subject {:?} not present in vector file", row.subject_id),
                })?;
            Some(if vf.is_binary {
                DeepVector::binary(values).expect("0/1 values checked at parse")
            } else {
                DeepVector::real(values).expect("finite values checked at parse")
            })
        };
        subjects.push(SubjectRecord {
            subject_id: row.subject_id.clone(),
            instance_label: row.family_id.clone(),
            group_label: row.group_label.clone(),
            keypoints,
            deep_vector,
        });
    }

    Dataset::new(subjects, d_kp, d_dv)
}

/// Write a dataset under `dir`: `manifest.csv`, one keypoint file per subject
/// in `kp/`, and a shared `vectors.txt` for every subject with a deep vector.
/// Returns the manifest path.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<PathBuf> {
    let io_err = |source| Error::Io {
        path: dir.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir.join("kp")).map_err(io_err)?;

    let mut manifest = String::new();
    manifest.push_str(&format!("# d_kp={}\n# d_dv={}\n", ds.d_kp(), ds.d_dv()));
    manifest.push_str(MANIFEST_HEADER);
    manifest.push('\n');

    let vector_rows: Vec<(String, &DeepVector)> = ds
        .subjects()
        .iter()
        .filter_map(|s| s.deep_vector.as_ref().map(|v| (s.subject_id.clone(), v)))
        .collect();
    let has_vectors = !vector_rows.is_empty();
    if has_vectors {
        write_vector_file(&dir.join("vectors.txt"), &vector_rows, ds.d_dv())?;
    }

    for s in ds.subjects() {
        let kp_rel = format!("kp/{}.kp", s.subject_id);
        write_keypoint_file(&dir.join(&kp_rel), &s.keypoints, ds.d_kp())?;
        let vec_rel = if s.deep_vector.is_some() {
            "vectors.txt"
        } else {
            ""
        };
        manifest.push_str(&format!(
            "{},{},{},{},{}\n",
            s.subject_id, s.instance_label, s.group_label, kp_rel, vec_rel
        ));
    }

    let manifest_path = dir.join("manifest.csv");
    write_atomic(&manifest_path, manifest.as_bytes())?;
    Ok(manifest_path)
}
