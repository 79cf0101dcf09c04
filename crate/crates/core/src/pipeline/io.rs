//! File loaders and writers shared by the stages.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::data::{
    read_npy, read_pgm, AnchorSet, FeatureMap, ImageRgb, NpyArray, NpyData, SemanticMask,
};
use crate::error::{Error, Result};
use crate::shape::BoundaryMap;

fn is_pgm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// PGM or 2-D integer NPY label mask.
pub(crate) fn load_mask(path: &Path, ignore: u32) -> Result<SemanticMask> {
    let m = if is_pgm(path) {
        read_pgm(path, ignore)?
    } else {
        SemanticMask::from_npy(&read_npy(path)?)?
    };
    if m.ignore_value() == ignore {
        Ok(m)
    } else {
        SemanticMask::with_ignore(m.height(), m.width(), m.labels().to_vec(), ignore)
    }
}

/// A visual-feature column holds either a feature grid or, for
/// precomputed predictions, a label map.
pub(crate) enum VisualInput {
    Features(FeatureMap),
    Labels(SemanticMask),
}

pub(crate) fn load_visual(path: &Path, ignore: u32) -> Result<VisualInput> {
    if is_pgm(path) {
        return Ok(VisualInput::Labels(load_mask(path, ignore)?));
    }
    let arr = read_npy(path)?;
    if is_label_array(&arr) {
        let m = SemanticMask::from_npy(&arr)?;
        return Ok(VisualInput::Labels(SemanticMask::with_ignore(
            m.height(),
            m.width(),
            m.labels().to_vec(),
            ignore,
        )?));
    }
    Ok(VisualInput::Features(FeatureMap::from_npy(&arr)?))
}

pub(crate) fn load_features(path: &Path) -> Result<FeatureMap> {
    FeatureMap::from_npy(&read_npy(path)?)
}

fn is_label_array(arr: &NpyArray) -> bool {
    arr.shape.len() == 2 && matches!(arr.data, NpyData::U8(_) | NpyData::I64(_))
}

pub(crate) fn load_image(path: &Path) -> Result<ImageRgb> {
    ImageRgb::from_npy(&read_npy(path)?)
}

pub(crate) fn load_anchors(path: &Path, names: Option<&Path>) -> Result<AnchorSet> {
    let names = match names {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Some(
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(str::to_owned)
                    .collect(),
            )
        }
        None => None,
    };
    AnchorSet::from_npy(&read_npy(path)?, names)
}

/// 2-D float array with values in `[0, 1]`.
pub(crate) fn load_boundary(path: &Path) -> Result<BoundaryMap<f64>> {
    let arr = read_npy(path)?;
    let &[h, w] = arr.shape.as_slice() else {
        return Err(Error::BadShape {
            shape: arr.shape.clone(),
            expected: "(H, W) boundary map",
        });
    };
    BoundaryMap::new(h, w, arr.to_f64()?)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidValue(format!("serialising {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidValue(format!("parsing {}: {e}", path.display())))
}

pub(crate) fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn remove_if_exists(path: &Path) -> Result<()> {
    match fs::remove_file(path) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(Error::io(path, e)),
    }
}
