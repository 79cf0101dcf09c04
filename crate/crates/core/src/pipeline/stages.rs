use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::io::{self, VisualInput};
use super::manifest::{Candidates, Record};
use super::{record_path, Context, FailureRecord, ReportHeader, RunSummary, Stage};
use crate::align::{align_loss_scaled, compute_logits, predict_labels, Logits};
use crate::data::{
    read_npy, write_npy, write_pgm, BinaryMask, NpyArray, NpyData, SemanticMask,
};
use crate::error::{Error, Result};
use crate::fusion::fuse_predictions;
use crate::metrics::{locality_stats, shape_stats, EvalReport, FoldAccumulator};
use crate::shape::{bce_loss, mask_to_edges, shape_loss_with, total_loss, AffineOptions};
use crate::spectral::{spectral_stage, DroppedSegment, EigenSegment, SolverKind};

/// Runs `f` over every record on the current pool; results come back in
/// manifest order and failures are recorded.
fn each_record<T: Send>(
    ctx: &Context<'_>,
    stage: Stage,
    summary: &mut RunSummary,
    f: impl Fn(&Record) -> Result<T> + Sync,
) -> Vec<(usize, T)> {
    let results: Vec<Result<T>> = ctx.manifest.records.par_iter().map(&f).collect();
    let mut out = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.push((i, v)),
            Err(e) => {
                let id = &ctx.manifest.records[i].id;
                log::error!("{stage} {id}: {e}");
                summary.failures.push(FailureRecord::new(stage, Some(id), &e));
            }
        }
    }
    out
}

fn stage_failure(stage: Stage, summary: &mut RunSummary, e: Error) {
    log::error!("{stage}: {e}");
    summary.failures.push(FailureRecord::new(stage, None, &e));
}

fn missing(what: &str) -> Error {
    Error::Manifest(format!("record has no {what} column"))
}

fn load_gt(ctx: &Context<'_>, rec: &Record) -> Result<Option<SemanticMask>> {
    let Some(p) = &rec.gt else { return Ok(None) };
    let gt = io::load_mask(p, ctx.manifest.ignore_value)?;
    gt.validate(ctx.fold.class_count() + 1)?;
    Ok(Some(gt))
}

fn resize_to(mask: SemanticMask, target: Option<&SemanticMask>) -> SemanticMask {
    match target {
        Some(t) if !t.same_shape(&mask) => mask.resize_nearest(t.height(), t.width()),
        _ => mask,
    }
}

/// Anchor channels `predict` may choose from.
fn candidate_ids(ctx: &Context<'_>, k: usize) -> Result<Vec<u32>> {
    let ids: Vec<u32> = match ctx.manifest.candidates {
        Candidates::All => (0..k as u32).collect(),
        Candidates::Unseen => {
            let mut ids = vec![ctx.manifest.background];
            ids.extend(&ctx.fold.unseen);
            ids.sort_unstable();
            ids.dedup();
            ids
        }
    };
    if let Some(&bad) = ids.iter().find(|&&c| c as usize >= k) {
        return Err(Error::ClassOutOfRange { class: bad, classes: k });
    }
    Ok(ids)
}

fn select_channels(logits: &Logits, ids: &[u32]) -> Result<Logits> {
    let k = logits.classes();
    let mut scores = Vec::with_capacity(logits.pixel_count() * ids.len());
    for row in logits.scores().chunks(k) {
        scores.extend(ids.iter().map(|&c| row[c as usize]));
    }
    Logits::new(logits.height(), logits.width(), ids.len(), scores)
}

pub(super) fn predict(ctx: &Context<'_>, summary: &mut RunSummary) {
    let dir = ctx.dir(Stage::Predict);
    each_record(ctx, Stage::Predict, summary, |rec| {
        let visual = rec.visual.as_ref().ok_or_else(|| missing("visual feature"))?;
        let gt = load_gt(ctx, rec)?;
        let mask = match io::load_visual(visual, ctx.manifest.ignore_value)? {
            VisualInput::Labels(m) => m,
            VisualInput::Features(f) => {
                let anchors = ctx.anchors()?;
                let logits = compute_logits(&f, anchors)?;
                let ids = candidate_ids(ctx, anchors.len())?;
                predict_labels(&select_channels(&logits, &ids)?, &ids)?
            }
        };
        let mask = resize_to(mask, gt.as_ref());
        write_pgm(&mask, record_path(&dir, &rec.id, "pgm"))
    });
}

#[derive(Debug, Serialize)]
struct SegmentSidecar<'a> {
    header: &'a ReportHeader,
    id: &'a str,
    grid: [usize; 2],
    size: [usize; 2],
    solver: &'static str,
    eigenvalues: Vec<f64>,
    /// Eigenvector index of each stack layer.
    segments: Vec<usize>,
    dropped: &'a [DroppedSegment],
}

pub(super) fn segments(ctx: &Context<'_>, summary: &mut RunSummary) {
    let dir = ctx.dir(Stage::Segments);
    each_record(ctx, Stage::Segments, summary, |rec| {
        let ssl = rec.ssl.as_ref().ok_or_else(|| missing("self-supervised feature"))?;
        let feats = io::load_features(ssl)?;
        let image = match (&rec.image, ctx.cfg.hp.lambda_affinity > 0.0) {
            (Some(p), true) => Some(io::load_image(p)?),
            _ => None,
        };
        let out = spectral_stage::<f64>(&feats, image.as_ref(), &ctx.cfg.hp, ctx.cfg.seed)?;
        let (gh, gw) = (feats.height(), feats.width());
        let (h, w) = match load_gt(ctx, rec)? {
            Some(gt) => (gt.height(), gt.width()),
            None => (gh, gw),
        };
        let masks: Vec<BinaryMask> = out
            .segments
            .segments
            .iter()
            .map(|s| {
                if (h, w) == (gh, gw) {
                    s.mask.clone()
                } else {
                    s.mask.resize_nearest(h, w)
                }
            })
            .collect();
        let npy = record_path(&dir, &rec.id, "npy");
        if masks.is_empty() {
            io::remove_if_exists(&npy)?;
        } else {
            let data: Vec<u8> = masks
                .iter()
                .flat_map(|m| m.data().iter().map(|&b| b as u8))
                .collect();
            write_npy(&NpyArray::new(vec![masks.len(), h, w], NpyData::U8(data)), &npy)?;
        }
        let sidecar = SegmentSidecar {
            header: &ctx.header,
            id: &rec.id,
            grid: [gh, gw],
            size: [h, w],
            solver: match out.solver {
                SolverKind::Dense => "dense",
                SolverKind::Lanczos => "lanczos",
            },
            eigenvalues: out.spectrum.values().to_vec(),
            segments: out.segments.segments.iter().map(|s| s.source_eigenindex).collect(),
            dropped: &out.segments.dropped,
        };
        io::write_json(&record_path(&dir, &rec.id, "json"), &sidecar)
    });
}

fn load_segments(dir: &Path, id: &str) -> Result<Vec<EigenSegment>> {
    let meta = io::read_json(&record_path(dir, id, "json"))?;
    let sources: Vec<usize> = meta["segments"]
        .as_array()
        .ok_or_else(|| Error::InvalidValue(format!("segment sidecar for {id} lacks `segments`")))?
        .iter()
        .map(|v| v.as_u64().map(|x| x as usize))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::InvalidValue(format!("segment sidecar for {id} is malformed")))?;
    if sources.is_empty() {
        return Ok(Vec::new());
    }
    let arr = read_npy(record_path(dir, id, "npy"))?;
    let (&[s, h, w], NpyData::U8(data)) = (arr.shape.as_slice(), &arr.data) else {
        return Err(Error::BadShape {
            shape: arr.shape.clone(),
            expected: "(S, H, W) u8 segment stack",
        });
    };
    if s != sources.len() {
        return Err(Error::ShapeMismatch(format!(
            "{s} segment layers, sidecar lists {}",
            sources.len()
        )));
    }
    sources
        .into_iter()
        .enumerate()
        .map(|(k, source_eigenindex)| {
            let layer = &data[k * h * w..(k + 1) * h * w];
            Ok(EigenSegment {
                mask: BinaryMask::new(h, w, layer.iter().map(|&b| b != 0).collect())?,
                source_eigenindex,
            })
        })
        .collect()
}

pub(super) fn fuse(ctx: &Context<'_>, summary: &mut RunSummary) {
    let (pdir, sdir, fdir) = (
        ctx.dir(Stage::Predict),
        ctx.dir(Stage::Segments),
        ctx.dir(Stage::Fuse),
    );
    each_record(ctx, Stage::Fuse, summary, |rec| {
        let pred = io::load_mask(&record_path(&pdir, &rec.id, "pgm"), ctx.manifest.ignore_value)?;
        let segs = load_segments(&sdir, &rec.id)?;
        let (fused, trace) =
            fuse_predictions(&pred, &segs, ctx.cfg.hp.tau_fuse, ctx.manifest.background)?;
        write_pgm(&fused, record_path(&fdir, &rec.id, "pgm"))?;
        io::write_text(&record_path(&fdir, &rec.id, "trace.jsonl"), &trace.to_json_lines())
    });
}

#[derive(Debug, Serialize)]
struct EvalDocument<'a> {
    header: &'a ReportHeader,
    source: &'static str,
    report: &'a EvalReport,
}

pub(super) fn eval(ctx: &Context<'_>, summary: &mut RunSummary) {
    let edir = ctx.dir(Stage::Eval);
    for source in [Stage::Predict, Stage::Fuse] {
        if !ctx.available(source) {
            continue;
        }
        let sdir = ctx.dir(source);
        let pairs = each_record(ctx, Stage::Eval, summary, |rec| {
            let Some(gt) = load_gt(ctx, rec)? else {
                return Ok(None);
            };
            let pred = io::load_mask(&record_path(&sdir, &rec.id, "pgm"), ctx.manifest.ignore_value)?;
            let mut acc = FoldAccumulator::new(&ctx.fold);
            acc.add(&pred, &gt)?;
            Ok(Some(acc))
        });
        let mut total = FoldAccumulator::new(&ctx.fold);
        for acc in pairs.into_iter().filter_map(|(_, a)| a) {
            total.merge(&acc);
        }
        let report = total.report(&ctx.fold);
        summary.miou.push((source.name().to_owned(), report.miou));
        let doc = EvalDocument {
            header: &ctx.header,
            source: source.name(),
            report: &report,
        };
        let base = format!("report_{}", source.name());
        let written = io::write_json(&edir.join(format!("{base}.json")), &doc)
            .and_then(|_| io::write_text(&edir.join(format!("{base}.csv")), &report.to_csv()));
        if let Err(e) = written {
            stage_failure(Stage::Eval, summary, e);
        }
    }
}

fn class_iou_from_report(path: &Path) -> Result<BTreeMap<u32, f64>> {
    let doc = io::read_json(path)?;
    let classes = doc["report"]["classes"]
        .as_array()
        .ok_or_else(|| Error::InvalidValue(format!("{} lacks report.classes", path.display())))?;
    Ok(classes
        .iter()
        .filter_map(|c| Some((c["class"].as_u64()? as u32, c["iou"].as_f64()?)))
        .collect())
}

#[derive(Debug, Serialize)]
struct AnalysisDocument<'a, T> {
    header: &'a ReportHeader,
    iou_source: String,
    stats: &'a T,
}

pub(super) fn analyze(ctx: &Context<'_>, summary: &mut RunSummary) {
    let edir = ctx.dir(Stage::Eval);
    let adir = ctx.dir(Stage::Analyze);
    let Some(report) = ["report_fuse.json", "report_predict.json"]
        .into_iter()
        .map(|f| edir.join(f))
        .find(|p| p.is_file())
    else {
        stage_failure(
            Stage::Analyze,
            summary,
            Error::StageDependency {
                stage: "analyze",
                missing: format!("an eval report in {}", edir.display()),
            },
        );
        return;
    };
    let class_iou = match class_iou_from_report(&report) {
        Ok(m) => m,
        Err(e) => return stage_failure(Stage::Analyze, summary, e),
    };
    let iou_source = report.file_name().unwrap().to_string_lossy().into_owned();

    // one CO sample per (image, target class present in its ground truth)
    let per_image = each_record(ctx, Stage::Analyze, summary, |rec| {
        let Some(gt) = load_gt(ctx, rec)? else {
            return Ok(Vec::new());
        };
        let present = gt.present_labels();
        Ok(ctx
            .fold
            .unseen
            .iter()
            .filter(|c| present.contains(c))
            .map(|&c| (c, gt.class_mask(c)))
            .collect::<Vec<_>>())
    });
    let instances: Vec<(u32, BinaryMask)> = per_image.into_iter().flat_map(|(_, v)| v).collect();
    let shape = shape_stats(instances.iter().map(|(c, m)| (*c, m)), &class_iou);
    let written = shape.and_then(|stats| {
        io::write_json(
            &adir.join("shape.json"),
            &AnalysisDocument {
                header: &ctx.header,
                iou_source: iou_source.clone(),
                stats: &stats,
            },
        )?;
        io::write_text(&adir.join("shape_scatter.csv"), &stats.scatter_csv())
    });
    if let Err(e) = written {
        stage_failure(Stage::Analyze, summary, e);
    }

    let locality = ctx
        .anchors()
        .and_then(|a| locality_stats(a, &ctx.fold.unseen, &class_iou));
    let written = locality.and_then(|stats| {
        io::write_json(
            &adir.join("locality.json"),
            &AnalysisDocument {
                header: &ctx.header,
                iou_source: iou_source.clone(),
                stats: &stats,
            },
        )?;
        io::write_text(&adir.join("locality_scatter.csv"), &stats.scatter_csv())
    });
    if let Err(e) = written {
        stage_failure(Stage::Analyze, summary, e);
    }
}

/// Loss components of one record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossRow {
    pub id: String,
    /// Summed cross-entropy over labelled pixels.
    pub align: f64,
    pub shape: f64,
    pub bce: f64,
    pub total: f64,
}

#[derive(Debug, Serialize)]
struct LossDocument<'a> {
    header: &'a ReportHeader,
    seen_channels: &'a [u32],
    records: &'a [LossRow],
    mean: Option<LossMean>,
}

#[derive(Debug, Serialize)]
struct LossMean {
    align: f64,
    shape: f64,
    bce: f64,
    total: f64,
}

pub(super) fn loss(ctx: &Context<'_>, summary: &mut RunSummary) {
    let ldir = ctx.dir(Stage::Loss);
    let hp = &ctx.cfg.hp;
    let mut seen = vec![ctx.manifest.background];
    seen.extend(&ctx.fold.seen);
    seen.sort_unstable();
    seen.dedup();
    let rows = each_record(ctx, Stage::Loss, summary, |rec| {
        let visual = rec.visual.as_ref().ok_or_else(|| missing("visual feature"))?;
        let boundary = rec.boundary.as_ref().ok_or_else(|| missing("boundary"))?;
        let gt = load_gt(ctx, rec)?.ok_or_else(|| missing("ground-truth"))?;
        let feats = io::load_features(visual)?;
        let logits = compute_logits(&feats, ctx.anchors()?)?;

        // align term on the feature grid; unseen labels do not supervise
        let small = resize_to(
            gt.clone(),
            Some(&SemanticMask::new(feats.height(), feats.width(), vec![0; feats.pixel_count()])?),
        );
        let ignore = small.ignore_value();
        let labels = small
            .labels()
            .iter()
            .map(|&l| if seen.contains(&l) { l } else { ignore })
            .collect();
        let supervised = SemanticMask::with_ignore(small.height(), small.width(), labels, ignore)?;
        let align = align_loss_scaled(&logits, &supervised, &seen, hp.temperature)?;

        let pred = io::load_boundary(boundary)?;
        let gt_full = if gt.height() == pred.height() && gt.width() == pred.width() {
            gt
        } else {
            gt.resize_nearest(pred.height(), pred.width())
        };
        let edges = mask_to_edges::<f64>(&gt_full);
        let shape = shape_loss_with(&pred, &edges, hp.patch_rows, hp.patch_cols, &AffineOptions::default())?;
        let bce = bce_loss(&pred, &edges)?;
        let total = total_loss(align, shape, bce, hp)?;
        Ok(LossRow {
            id: rec.id.clone(),
            align,
            shape,
            bce,
            total,
        })
    });
    let rows: Vec<LossRow> = rows.into_iter().map(|(_, r)| r).collect();
    let mean = (!rows.is_empty()).then(|| {
        let n = rows.len() as f64;
        LossMean {
            align: rows.iter().map(|r| r.align).sum::<f64>() / n,
            shape: rows.iter().map(|r| r.shape).sum::<f64>() / n,
            bce: rows.iter().map(|r| r.bce).sum::<f64>() / n,
            total: rows.iter().map(|r| r.total).sum::<f64>() / n,
        }
    });
    let mut csv = String::from("id,align,shape,bce,total\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{:.9},{:.9},{:.9},{:.9}\n",
            r.id, r.align, r.shape, r.bce, r.total
        ));
    }
    let doc = LossDocument {
        header: &ctx.header,
        seen_channels: &seen,
        records: &rows,
        mean,
    };
    let written = io::write_text(&ldir.join("losses.csv"), &csv)
        .and_then(|_| io::write_json(&ldir.join("summary.json"), &doc));
    if let Err(e) = written {
        stage_failure(Stage::Loss, summary, e);
    }
    summary.losses = rows;
}
