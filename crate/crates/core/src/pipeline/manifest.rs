use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::{Dataset, FoldScheme, DEFAULT_IGNORE};
use crate::error::{Error, Result};

/// Which anchors `predict` may choose from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Candidates {
    /// Background plus the fold's unseen classes.
    #[default]
    Unseen,
    /// Every anchor row.
    All,
}

/// One manifest line. Absent columns (`-`) are `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub id: String,
    pub line: usize,
    pub image: Option<PathBuf>,
    pub visual: Option<PathBuf>,
    pub ssl: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub boundary: Option<PathBuf>,
}

/// Parsed batch description.
///
/// Format: UTF-8, tab-separated. `#key=value` lines set options
/// (`anchors`, `anchor_names`, `dataset`, `fold`, `scheme`, `unseen`,
/// `background`, `ignore`, `candidates`); other `#` lines and blank lines
/// are skipped. Record columns: image, visual features, self-supervised
/// features, ground truth, optional predicted boundary. Relative paths
/// resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub records: Vec<Record>,
    pub anchors: Option<PathBuf>,
    pub anchor_names: Option<PathBuf>,
    pub dataset: Option<Dataset>,
    pub fold: Option<u32>,
    pub scheme: Option<FoldScheme>,
    pub unseen: Option<Vec<u32>>,
    pub background: u32,
    pub ignore_value: u32,
    pub candidates: Candidates,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let m = Self::parse(&text, base)?;
        let missing: Vec<String> = m
            .referenced()
            .filter(|p| !p.exists())
            .map(|p| p.display().to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Manifest(format!("missing files: {}", missing.join(", "))));
        }
        Ok(m)
    }

    /// Parses manifest text without touching the filesystem.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut m = Manifest {
            records: Vec::new(),
            anchors: None,
            anchor_names: None,
            dataset: None,
            fold: None,
            scheme: None,
            unseen: None,
            background: 0,
            ignore_value: DEFAULT_IGNORE,
            candidates: Candidates::Unseen,
        };
        let resolve = |s: &str| -> PathBuf {
            let p = Path::new(s);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let mut ids = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let Some((key, value)) = rest.split_once('=') else {
                    continue;
                };
                let (key, value) = (key.trim(), value.trim());
                let bad = |what: &str| Error::Manifest(format!("line {line_no}: bad {what} `{value}`"));
                match key {
                    "anchors" => m.anchors = Some(resolve(value)),
                    "anchor_names" => m.anchor_names = Some(resolve(value)),
                    "dataset" => m.dataset = Some(value.parse().map_err(|_| bad("dataset"))?),
                    "fold" => m.fold = Some(value.parse().map_err(|_| bad("fold"))?),
                    "scheme" => m.scheme = Some(value.parse().map_err(|_| bad("scheme"))?),
                    "unseen" => {
                        let ids: std::result::Result<Vec<u32>, _> =
                            value.split(',').map(|s| s.trim().parse()).collect();
                        m.unseen = Some(ids.map_err(|_| bad("unseen list"))?);
                    }
                    "background" => m.background = value.parse().map_err(|_| bad("background"))?,
                    "ignore" => m.ignore_value = value.parse().map_err(|_| bad("ignore"))?,
                    "candidates" => {
                        m.candidates = match value {
                            "unseen" => Candidates::Unseen,
                            "all" => Candidates::All,
                            _ => return Err(bad("candidates")),
                        }
                    }
                    _ => log::debug!("manifest line {line_no}: ignoring directive `{key}`"),
                }
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if !(4..=5).contains(&cols.len()) {
                return Err(Error::Manifest(format!(
                    "line {line_no}: expected 4 or 5 tab-separated columns, got {}",
                    cols.len()
                )));
            }
            let col = |i: usize| -> Option<PathBuf> {
                cols.get(i)
                    .map(|s| s.trim())
                    .filter(|s| !s.is_empty() && *s != "-")
                    .map(resolve)
            };
            let (image, visual, ssl, gt, boundary) = (col(0), col(1), col(2), col(3), col(4));
            let id = [&gt, &visual, &ssl, &image, &boundary]
                .into_iter()
                .flatten()
                .next()
                .and_then(|p| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .ok_or_else(|| Error::Manifest(format!("line {line_no}: record has no files")))?;
            if !ids.insert(id.clone()) {
                return Err(Error::Manifest(format!(
                    "line {line_no}: duplicate record id `{id}`"
                )));
            }
            m.records.push(Record {
                id,
                line: line_no,
                image,
                visual,
                ssl,
                gt,
                boundary,
            });
        }
        if m.records.is_empty() {
            return Err(Error::Manifest("no records".into()));
        }
        Ok(m)
    }

    fn referenced(&self) -> impl Iterator<Item = &PathBuf> {
        self.anchors.iter().chain(&self.anchor_names).chain(self.records.iter().flat_map(|r| {
            [&r.image, &r.visual, &r.ssl, &r.gt, &r.boundary]
                .into_iter()
                .flatten()
        }))
    }
}
