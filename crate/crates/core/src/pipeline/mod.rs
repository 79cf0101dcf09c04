//! File-based batch pipeline: predict, segments, fuse, eval, analyze, loss.
//!
//! Every stage reads its inputs from disk (the manifest or earlier stage
//! outputs under the run directory) and writes its outputs back, so stages
//! can be run separately and resumed. Per-record failures are collected
//! rather than aborting the batch.

mod config;
mod io;
mod manifest;
mod stages;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

pub use config::{RunConfig, DEFAULT_SEED};
pub use manifest::{Candidates, Manifest, Record};
pub use stages::LossRow;

use crate::data::{fold_classes, AnchorSet, Dataset, FoldSpec, HyperParams};
use crate::error::{Error, Result};
use crate::fusion::FUSION_RULE_VERSION;
use crate::metrics::ACCUMULATION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Predict,
    Segments,
    Fuse,
    Eval,
    Analyze,
    Loss,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Predict,
        Stage::Segments,
        Stage::Fuse,
        Stage::Eval,
        Stage::Analyze,
        Stage::Loss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Predict => "predict",
            Stage::Segments => "segments",
            Stage::Fuse => "fuse",
            Stage::Eval => "eval",
            Stage::Analyze => "analyze",
            Stage::Loss => "loss",
        }
    }

    /// Output directory name under the run directory.
    pub fn dir(self) -> &'static str {
        self.name()
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

/// `all` or a comma-separated stage list, returned in pipeline order.
pub fn parse_stages(spec: &str) -> Result<Vec<Stage>> {
    if spec.trim() == "all" {
        return Ok(Stage::ALL.to_vec());
    }
    let mut out: Vec<Stage> = spec
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

/// Machine-readable failure, one JSON line in `errors.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FailureRecord {
    pub stage: Stage,
    pub record: Option<String>,
    pub kind: String,
    pub message: String,
}

impl FailureRecord {
    fn new(stage: Stage, record: Option<&str>, err: &Error) -> Self {
        Self {
            stage,
            record: record.map(str::to_owned),
            kind: err.kind().to_owned(),
            message: err.to_string(),
        }
    }
}

/// Provenance block embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportHeader {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub dataset: String,
    pub fold: u32,
    pub fold_scheme: String,
    pub unseen: Vec<u32>,
    pub fusion_rule: &'static str,
    pub fusion_granularity: &'static str,
    pub iou_accumulation: &'static str,
    pub both_empty_iou: f64,
    pub hyperparams: HyperParams,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSummary {
    pub stages: Vec<Stage>,
    pub failures: Vec<FailureRecord>,
    /// Per-record losses, manifest order (`loss` stage only).
    pub losses: Vec<LossRow>,
    /// mIoU per evaluated source (`predict`, `fuse`).
    pub miou: Vec<(String, Option<f64>)>,
}

impl RunSummary {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Shared state for one run.
pub(crate) struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub manifest: &'a Manifest,
    pub fold: FoldSpec,
    pub header: ReportHeader,
    pub anchors: Option<AnchorSet>,
    pub requested: Vec<Stage>,
}

impl Context<'_> {
    pub fn dir(&self, stage: Stage) -> PathBuf {
        self.cfg.out_dir.join(stage.dir())
    }

    pub fn anchors(&self) -> Result<&AnchorSet> {
        self.anchors
            .as_ref()
            .ok_or_else(|| Error::Manifest("no `#anchors=` file declared".into()))
    }

    /// Requested in this run, or produced by an earlier one.
    pub fn available(&self, stage: Stage) -> bool {
        self.requested.contains(&stage) || self.dir(stage).is_dir()
    }
}

/// Resolves the evaluation fold from command-line overrides and manifest
/// directives (overrides win).
pub fn resolve_fold(cfg: &RunConfig, manifest: &Manifest) -> Result<FoldSpec> {
    let dataset = cfg.dataset.or(manifest.dataset).unwrap_or(Dataset::Pascal5i);
    let fold = cfg.fold.or(manifest.fold).unwrap_or(0);
    let scheme = cfg.scheme.or(manifest.scheme).unwrap_or_default();
    match (dataset, &manifest.unseen) {
        (Dataset::Custom { classes }, Some(unseen)) => {
            let mut spec = FoldSpec::custom(classes, unseen.clone())?;
            spec.fold = fold;
            spec.scheme = scheme;
            Ok(spec)
        }
        (Dataset::Custom { .. }, None) => Err(Error::Manifest(
            "custom datasets need an `#unseen=` list".into(),
        )),
        (_, Some(_)) => Err(Error::Manifest(
            "`#unseen=` only applies to custom datasets".into(),
        )),
        (d, None) => fold_classes(d, fold, scheme),
    }
}

/// Runs `stages` over `manifest`. `Err` means the run could not start
/// (configuration, dependencies); per-record problems land in
/// [`RunSummary::failures`] and in `errors.jsonl`.
pub fn run_pipeline(cfg: &RunConfig, manifest: &Manifest, stages: &[Stage]) -> Result<RunSummary> {
    cfg.hp.validate()?;
    if cfg.workers == 0 {
        return Err(Error::Config("workers must be >= 1".into()));
    }
    let mut requested = stages.to_vec();
    requested.sort();
    requested.dedup();
    let fold = resolve_fold(cfg, manifest)?;
    let header = ReportHeader {
        tool: "spectraseg",
        version: env!("CARGO_PKG_VERSION"),
        config_hash: cfg.config_hash(),
        seed: cfg.seed,
        dataset: fold.dataset.to_string(),
        fold: fold.fold,
        fold_scheme: fold.scheme.to_string(),
        unseen: fold.unseen.clone(),
        fusion_rule: FUSION_RULE_VERSION,
        fusion_granularity: "per-class",
        iou_accumulation: ACCUMULATION,
        both_empty_iou: 1.0,
        hyperparams: cfg.hp.clone(),
    };
    let anchors = match &manifest.anchors {
        Some(p) => Some(io::load_anchors(p, manifest.anchor_names.as_deref())?),
        None => None,
    };
    let ctx = Context {
        cfg,
        manifest,
        fold,
        header,
        anchors,
        requested: requested.clone(),
    };
    check_dependencies(&ctx)?;
    io::ensure_dir(&cfg.out_dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut summary = RunSummary {
        stages: requested.clone(),
        ..RunSummary::default()
    };
    pool.install(|| -> Result<()> {
        for &stage in &requested {
            log::info!("stage {stage}: {} records", manifest.records.len());
            io::ensure_dir(&ctx.dir(stage))?;
            match stage {
                Stage::Predict => stages::predict(&ctx, &mut summary),
                Stage::Segments => stages::segments(&ctx, &mut summary),
                Stage::Fuse => stages::fuse(&ctx, &mut summary),
                Stage::Eval => stages::eval(&ctx, &mut summary),
                Stage::Analyze => stages::analyze(&ctx, &mut summary),
                Stage::Loss => stages::loss(&ctx, &mut summary),
            }
        }
        Ok(())
    })?;

    let errors = cfg.out_dir.join("errors.jsonl");
    if summary.failures.is_empty() {
        io::remove_if_exists(&errors)?;
    } else {
        let mut text = String::new();
        for f in &summary.failures {
            text.push_str(&serde_json::to_string(f).expect("failure record serialises"));
            text.push('\n');
        }
        io::write_text(&errors, &text)?;
    }
    Ok(summary)
}

fn check_dependencies(ctx: &Context<'_>) -> Result<()> {
    let need = |stage: &'static str, dep: Stage| -> Result<()> {
        if ctx.available(dep) {
            Ok(())
        } else {
            Err(Error::StageDependency {
                stage,
                missing: format!("{} outputs in {}", dep, ctx.dir(dep).display()),
            })
        }
    };
    for &stage in &ctx.requested {
        match stage {
            Stage::Fuse => {
                need("fuse", Stage::Predict)?;
                need("fuse", Stage::Segments)?;
            }
            Stage::Eval if !ctx.available(Stage::Predict) && !ctx.available(Stage::Fuse) => {
                need("eval", Stage::Predict)?;
            }
            Stage::Analyze => need("analyze", Stage::Eval)?,
            _ => {}
        }
    }
    Ok(())
}

pub(crate) fn record_path(dir: &Path, id: &str, ext: &str) -> PathBuf {
    dir.join(format!("{id}.{ext}"))
}
