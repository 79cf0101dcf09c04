//! `spectraseg` batch driver.
//!
//! Exit status: 0 when every stage and record succeeded, 1 when the run
//! finished with per-record failures (see `<out>/errors.jsonl`), 2 when the
//! run could not start. Fatal errors are also printed to stderr as one JSON
//! object.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use clap::Parser;
use spectraseg::pipeline::{parse_stages, run_pipeline, Manifest, RunConfig, RunSummary};

#[derive(Debug, Parser)]
#[command(name = "spectraseg", version, about = "Zero-shot segmentation batch pipeline")]
struct Cli {
    /// `all` or a comma-separated subset of predict,segments,fuse,eval,analyze,loss.
    stage: String,
    /// Tab-separated manifest file.
    #[arg(long)]
    manifest: PathBuf,
    /// key=value configuration file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    fold: Option<u32>,
    /// pascal5i, coco20i or customN.
    #[arg(long)]
    dataset: Option<String>,
    /// sequential or interleaved.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long = "lambda-affinity")]
    lambda_affinity: Option<f64>,
    #[arg(long = "k-eig")]
    k_eig: Option<usize>,
    #[arg(long = "k-nn")]
    k_nn: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Cli {
    fn config(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let overrides: [(&str, Option<String>); 10] = [
            ("fold", self.fold.map(|v| v.to_string())),
            ("dataset", self.dataset.clone()),
            ("scheme", self.scheme.clone()),
            ("tau", self.tau.map(|v| v.to_string())),
            ("lambda_affinity", self.lambda_affinity.map(|v| v.to_string())),
            ("k_eig", self.k_eig.map(|v| v.to_string())),
            ("k_nn", self.k_nn.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("workers", self.workers.map(|v| v.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, &v).with_context(|| format!("--{}", key.replace('_', "-")))?;
            }
        }
        cfg.hp.validate()?;
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> anyhow::Result<RunSummary> {
    let stages = parse_stages(&cli.stage)?;
    let cfg = cli.config()?;
    let manifest = Manifest::load(&cli.manifest)?;
    log::info!(
        "{} records, stages {:?}, config {}",
        manifest.records.len(),
        stages,
        cfg.config_hash()
    );
    Ok(run_pipeline(&cfg, &manifest, &stages)?)
}

fn report(summary: &RunSummary) {
    for row in &summary.losses {
        println!(
            "loss {}: align={:.6} shape={:.6} bce={:.6} total={:.6}",
            row.id, row.align, row.shape, row.bce, row.total
        );
    }
    for (source, miou) in &summary.miou {
        match miou {
            Some(v) => println!("mIoU[{source}] = {:.4}", v),
            None => println!("mIoU[{source}] = n/a (no target class present)"),
        }
    }
    if !summary.ok() {
        eprintln!("{} record failure(s); see errors.jsonl", summary.failures.len());
    }
}

fn fatal(err: &anyhow::Error) -> serde_json::Value {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<spectraseg::Error>())
        .map_or("UsageError", |e| e.kind());
    serde_json::json!({ "kind": kind, "message": format!("{err:#}") })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPECTRASEG_LOG", "error")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            report(&summary);
            if summary.ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("{}", fatal(&err));
            ExitCode::from(2)
        }
    }
}
