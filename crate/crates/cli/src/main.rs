//! memdex: generate, index, binarize, score, and evaluate descriptor corpora.
//!
//! Worker count for parallel scoring is capped by the MEMDEX_THREADS
//! environment variable (0 or unset means automatic).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use memdex_core::binarize::{apply_thresholds, fit_thresholds, ThresholdTable};
use memdex_core::eval::RocCurve;
use memdex_core::fusion::{
    all_pairs_scores_with_index, alpha_sweep, family_roc, group_roc, independence_diagnostic,
    BinarizePolicy, FusionParams, Protocol, ScoreMatrix, ScoreMode, ScoringConfig,
};
use memdex_core::index::{build_index, ApproxParams, DescriptorIndex, IndexMode, IndexedFeatures};
use memdex_core::io::{fmt_f64, load_dataset, write_atomic, write_dataset};
use memdex_core::model::{ClassBy, Dataset};
use memdex_core::shallow::ShallowScoreConfig;
use memdex_core::synth::{generate_synthetic_to_dir, SynthConfig};

#[derive(Parser)]
#[command(
    name = "memdex",
    version,
    about = "memory-based descriptor indexing and classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum WhichArg {
    Keypoints,
    Vectors,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Shallow,
    Deep,
    Fused,
}

impl From<ModeArg> for ScoreMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Shallow => ScoreMode::Shallow,
            ModeArg::Deep => ScoreMode::Deep,
            ModeArg::Fused => ScoreMode::Fused,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Family,
    Group,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Family => Protocol::Family,
            ProtocolArg::Group => Protocol::Group,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassByArg {
    Instance,
    Group,
}

#[derive(Clone, Copy, ValueEnum)]
enum IndexModeArg {
    Exact,
    Approx,
}

#[derive(Args, Clone, Copy)]
struct IndexKnobs {
    /// Randomized trees in the approximate index.
    #[arg(long, default_value_t = 4)]
    trees: usize,
    /// Maximum points per tree leaf.
    #[arg(long, default_value_t = 16)]
    leaf_size: usize,
    /// Leaf budget per query across trees.
    #[arg(long, default_value_t = 48)]
    checks: usize,
    /// Seed for the randomized tree construction.
    #[arg(long, default_value_t = 0x6d647831)]
    index_seed: u64,
}

impl IndexKnobs {
    fn params(&self) -> ApproxParams {
        ApproxParams {
            trees: self.trees,
            leaf_size: self.leaf_size,
            max_checked_leaves: self.checks,
            seed: self.index_seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with known ground truth.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 40)]
        families: usize,
        /// Members per family (sets both bounds).
        #[arg(long, default_value_t = 2)]
        members: usize,
        /// Lower bound on members per family (overrides --members).
        #[arg(long)]
        members_min: Option<usize>,
        /// Upper bound on members per family (overrides --members).
        #[arg(long)]
        members_max: Option<usize>,
        #[arg(long, default_value_t = 50)]
        keypoints: usize,
        #[arg(long, default_value_t = 8)]
        d_kp: usize,
        #[arg(long, default_value_t = 16)]
        d_dv: usize,
        #[arg(long, default_value_t = 0.8)]
        family_signal: f64,
        #[arg(long, default_value_t = 0.8)]
        group_signal: f64,
        #[arg(long, default_value_t = 0.0)]
        complementarity: f64,
    },
    /// Build a nearest-neighbor index and serialize it.
    Index {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = WhichArg::Keypoints)]
        which: WhichArg,
        #[arg(long, value_enum, default_value_t = IndexModeArg::Approx)]
        mode: IndexModeArg,
        #[command(flatten)]
        knobs: IndexKnobs,
    },
    /// Fit or apply binarization thresholds.
    Binarize {
        #[command(subcommand)]
        action: BinarizeAction,
    },
    /// Compute the all-pairs score matrix.
    Score {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ProtocolArg::Family)]
        protocol: ProtocolArg,
        #[arg(long, value_enum, default_value_t = ModeArg::Fused)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Binarize deep vectors inside the protocol with the leak-free
        /// default policy (calibration split for family, per-fold for group).
        #[arg(long)]
        binarized: bool,
        /// Calibration fraction for the family-protocol binarization split.
        #[arg(long)]
        calib_fraction: Option<f64>,
        /// Seed for the calibration split.
        #[arg(long)]
        calib_seed: Option<u64>,
        /// Neighbors kept per query keypoint.
        #[arg(long, default_value_t = 64)]
        k_trunc: usize,
        /// Use exact (linear-scan) search instead of the approximate index.
        #[arg(long)]
        exact: bool,
        /// Reuse a serialized keypoint index instead of rebuilding one.
        #[arg(long)]
        index: Option<PathBuf>,
        #[command(flatten)]
        knobs: IndexKnobs,
    },
    /// ROC/AUC from a score matrix and its manifest; writes an ROC CSV.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        protocol: Option<ProtocolArg>,
        #[arg(long, value_enum, default_value_t = ModeArg::Fused)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// Evaluate fused AUC over an α grid.
    AlphaSweep {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ProtocolArg::Family)]
        protocol: ProtocolArg,
        #[arg(long, default_value_t = 0.1)]
        grid_step: f64,
        #[arg(long, default_value_t = 64)]
        k_trunc: usize,
        #[arg(long)]
        exact: bool,
        #[command(flatten)]
        knobs: IndexKnobs,
    },
    /// Pearson correlation between shallow and deep scores of a matrix.
    DiagIndependence {
        #[arg(long)]
        scores: PathBuf,
    },
}

#[derive(Subcommand)]
enum BinarizeAction {
    /// Fit thresholds on the deep vectors of a corpus.
    Fit {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Class variable the gain is computed against.
        #[arg(long, value_enum, default_value_t = ClassByArg::Instance)]
        class_by: ClassByArg,
    },
    /// Apply a threshold table, writing a binarized copy of the corpus.
    Apply {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        thresholds: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn env_threads() -> Result<usize> {
    match std::env::var("MEMDEX_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .with_context(|| format!("MEMDEX_THREADS must be a non-negative integer, got {v:?}")),
        Err(_) => Ok(0),
    }
}

fn scoring_config(
    mode: ScoreMode,
    k_trunc: usize,
    exact: bool,
    knobs: &IndexKnobs,
    binarize: BinarizePolicy,
) -> Result<ScoringConfig> {
    Ok(ScoringConfig {
        shallow: ShallowScoreConfig {
            k_trunc,
            ..ShallowScoreConfig::default()
        },
        index_mode: if exact {
            IndexMode::Exact
        } else {
            IndexMode::Approximate
        },
        approx: knobs.params(),
        mode,
        binarize,
        threads: env_threads()?,
        ..ScoringConfig::default()
    })
}

fn load(manifest: &Path) -> Result<Dataset> {
    load_dataset(manifest).with_context(|| format!("loading {}", manifest.display()))
}

fn roc_for(
    sm: &ScoreMatrix,
    ds: &Dataset,
    protocol: Protocol,
    mode: ScoreMode,
    p: &FusionParams,
) -> Result<RocCurve> {
    Ok(match protocol {
        Protocol::Family => family_roc(sm, ds, mode, p)?,
        Protocol::Group => group_roc(sm, ds, mode, p)?,
    })
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Synth {
            out,
            seed,
            families,
            members,
            members_min,
            members_max,
            keypoints,
            d_kp,
            d_dv,
            family_signal,
            group_signal,
            complementarity,
        } => {
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
            let (ds, manifest) = generate_synthetic_to_dir(&cfg, &out)?;
            println!(
                "wrote {} ({} subjects, {} keypoints)",
                manifest.display(),
                ds.len(),
                ds.view().total_keypoints()
            );
        }
        Command::Index {
            manifest,
            out,
            which,
            mode,
            knobs,
        } => {
            let ds = load(&manifest)?;
            let idx = build_index(
                &ds.view(),
                match which {
                    WhichArg::Keypoints => IndexedFeatures::Keypoints,
                    WhichArg::Vectors => IndexedFeatures::Vectors,
                },
                match mode {
                    IndexModeArg::Exact => IndexMode::Exact,
                    IndexModeArg::Approx => IndexMode::Approximate,
                },
                knobs.params(),
            )?;
            idx.write_to(&out)?;
            println!(
                "wrote {} ({} points, dim {})",
                out.display(),
                idx.len(),
                idx.dim()
            );
        }
        Command::Binarize { action } => match action {
            BinarizeAction::Fit {
                manifest,
                out,
                class_by,
            } => {
                let ds = load(&manifest)?;
                let by = match class_by {
                    ClassByArg::Instance => ClassBy::Instance,
                    ClassByArg::Group => ClassBy::Group,
                };
                let rows: Vec<(&memdex_core::DeepVector, &str)> = ds
                    .subjects()
                    .iter()
                    .filter_map(|s| s.deep_vector.as_ref().map(|v| (v, by.label_of(s))))
                    .collect();
                if rows.is_empty() {
                    bail!("no deep vectors in {}", manifest.display());
                }
                let table = fit_thresholds(&rows)?;
                table.write_to(&out)?;
                let mean_gain =
                    table.gains().iter().sum::<f64>() / table.gains().len().max(1) as f64;
                println!(
                    "wrote {} ({} elements, mean gain {:.4} bits)",
                    out.display(),
                    table.dim(),
                    mean_gain
                );
            }
            BinarizeAction::Apply {
                manifest,
                thresholds,
                out_dir,
            } => {
                let ds = load(&manifest)?;
                let table = ThresholdTable::read_from(&thresholds)?;
                let mut subjects = ds.subjects().to_vec();
                for s in &mut subjects {
                    if let Some(v) = &s.deep_vector {
                        s.deep_vector = Some(apply_thresholds(v, &table)?);
                    }
                }
                let out_ds = Dataset::new(subjects, ds.d_kp(), ds.d_dv())?;
                let manifest_out = write_dataset(&out_ds, &out_dir)?;
                println!("wrote {}", manifest_out.display());
            }
        },
        Command::Score {
            manifest,
            out,
            protocol,
            mode,
            alpha,
            binarized,
            calib_fraction,
            calib_seed,
            k_trunc,
            exact,
            index,
            knobs,
        } => {
            let ds = load(&manifest)?;
            let prebuilt = index
                .as_deref()
                .map(DescriptorIndex::read_from)
                .transpose()?;
            let protocol: Protocol = protocol.into();
            let mut policy = if binarized {
                BinarizePolicy::default_for(protocol)
            } else {
                BinarizePolicy::Off
            };
            if let BinarizePolicy::CalibrationSplit { fraction, seed } = &mut policy {
                if let Some(f) = calib_fraction {
                    *fraction = f;
                }
                if let Some(s) = calib_seed {
                    *seed = s;
                }
            }
            let cfg = scoring_config(mode.into(), k_trunc, exact, &knobs, policy)?;
            let sm = all_pairs_scores_with_index(&ds, &cfg, protocol, prebuilt.as_ref())?;
            let p = FusionParams::new(alpha)?;
            sm.write_csv(&p, &out)?;
            println!(
                "wrote {} ({} x {}, {} valid cells)",
                out.display(),
                sm.n_rows(),
                sm.n_cols(),
                sm.valid_cell_count()
            );
        }
        Command::Eval {
            scores,
            manifest,
            out,
            protocol,
            mode,
            alpha,
        } => {
            let ds = load(&manifest)?;
            let sm = ScoreMatrix::read_csv(&scores)?;
            let protocol = match protocol {
                Some(p) => {
                    let p: Protocol = p.into();
                    if p != sm.protocol {
                        bail!("--protocol disagrees with the score matrix shape");
                    }
                    p
                }
                None => sm.protocol,
            };
            let p = FusionParams::new(alpha)?;
            let roc = roc_for(&sm, &ds, protocol, mode.into(), &p)?;
            roc.write_to(&out)?;
            println!(
                "auc={} pos={} neg={} wrote {}",
                fmt_f64(roc.auc),
                roc.positives,
                roc.negatives,
                out.display()
            );
        }
        Command::AlphaSweep {
            manifest,
            out,
            protocol,
            grid_step,
            k_trunc,
            exact,
            knobs,
        } => {
            let ds = load(&manifest)?;
            let cfg = scoring_config(
                ScoreMode::Fused,
                k_trunc,
                exact,
                &knobs,
                BinarizePolicy::Off,
            )?;
            let sweep = alpha_sweep(&ds, &cfg, grid_step, protocol.into())?;
            if let Some(out) = &out {
                let mut csv = format!(
                    "# best_alpha={} best_auc={}\nalpha,auc\n",
                    fmt_f64(sweep.best_alpha),
                    fmt_f64(sweep.best_auc)
                );
                for (alpha, auc) in &sweep.points {
                    csv.push_str(&format!("{},{}\n", fmt_f64(*alpha), fmt_f64(*auc)));
                }
                write_atomic(out, csv.as_bytes())?;
                println!("wrote {}", out.display());
            }
            for (alpha, auc) in &sweep.points {
                println!("alpha={alpha:.3} auc={auc:.6}");
            }
            println!(
                "best alpha={:.3} auc={:.6}",
                sweep.best_alpha, sweep.best_auc
            );
        }
        Command::DiagIndependence { scores } => {
            let sm = ScoreMatrix::read_csv(&scores)?;
            let r = independence_diagnostic(&sm)?;
            println!("r={r:.6}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
