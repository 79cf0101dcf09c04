//! Value types shared by every stage, plus the array/mask file formats and
//! benchmark fold definitions.

mod folds;
pub mod npy;
mod params;
pub mod pgm;

pub use folds::{fold_classes, Dataset, FoldScheme, FoldSpec, COCO_CLASSES, PASCAL_CLASSES};
pub use npy::{read_npy, read_npy_with, write_npy, NpyArray, NpyData, ReadOptions};
pub use params::{EigenMode, HyperParams};
pub use pgm::{read_pgm, write_pgm};

use crate::error::{Error, Result};

/// Sentinel label for pixels excluded from every loss and metric.
pub const DEFAULT_IGNORE: u32 = 255;

/// 8-bit RGB image, row-major, interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRgb {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl ImageRgb {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::TooSmall(format!("image {height}x{width}")));
        }
        if data.len() != 3 * height * width {
            return Err(Error::ShapeMismatch(format!(
                "image {height}x{width} needs {} bytes, got {}",
                3 * height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Accepts a `(H, W, 3)` u8 array.
    pub fn from_npy(array: &NpyArray) -> Result<Self> {
        match (array.shape.as_slice(), &array.data) {
            (&[h, w, 3], NpyData::U8(v)) => Self::new(h, w, v.clone()),
            _ => Err(Error::BadShape {
                shape: array.shape.clone(),
                expected: "(H, W, 3) u8 image",
            }),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let o = 3 * (row * self.width + col);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    /// Nearest-neighbour resampling to `height x width`.
    pub fn resize_nearest(&self, height: usize, width: usize) -> Self {
        let mut data = Vec::with_capacity(3 * height * width);
        for r in 0..height {
            let sr = nearest_source(r, height, self.height);
            for c in 0..width {
                let sc = nearest_source(c, width, self.width);
                data.extend_from_slice(&self.pixel(sr, sc));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }
}

/// Dense per-pixel embedding grid, channel-minor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    dim: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || dim == 0 {
            return Err(Error::TooSmall(format!(
                "feature map {height}x{width}x{dim}"
            )));
        }
        if data.len() != height * width * dim {
            return Err(Error::ShapeMismatch(format!(
                "feature map {height}x{width}x{dim} needs {} values, got {}",
                height * width * dim,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        Ok(Self {
            height,
            width,
            dim,
            data,
        })
    }

    /// Accepts a `(H, W, D)` float array; f64 payloads are narrowed to f32.
    pub fn from_npy(array: &NpyArray) -> Result<Self> {
        let &[h, w, d] = array.shape.as_slice() else {
            return Err(Error::BadShape {
                shape: array.shape.clone(),
                expected: "(H, W, D) feature map",
            });
        };
        Self::new(h, w, d, array.to_f32()?)
    }

    pub fn to_npy(&self) -> NpyArray {
        NpyArray::new(
            vec![self.height, self.width, self.dim],
            NpyData::F32(self.data.clone()),
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f32] {
        self.node(row * self.width + col)
    }

    /// Feature vector of the raster-ordered pixel `index`.
    pub fn node(&self, index: usize) -> &[f32] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }
}

/// Text-anchor embeddings, one row per category.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    names: Vec<String>,
    dim: usize,
    embeddings: Vec<f32>,
}

impl AnchorSet {
    pub fn new(names: Vec<String>, dim: usize, embeddings: Vec<f32>) -> Result<Self> {
        if names.is_empty() || dim == 0 {
            return Err(Error::TooSmall("anchor set needs K >= 1 and D >= 1".into()));
        }
        if embeddings.len() != names.len() * dim {
            return Err(Error::ShapeMismatch(format!(
                "{} names with dim {dim} need {} values, got {}",
                names.len(),
                names.len() * dim,
                embeddings.len()
            )));
        }
        if let Some(i) = embeddings.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        for (k, row) in embeddings.chunks(dim).enumerate() {
            if row.iter().all(|&v| v == 0.0) {
                return Err(Error::ZeroAnchor(k));
            }
        }
        Ok(Self {
            names,
            dim,
            embeddings,
        })
    }

    /// `(K, D)` float array; names default to `class<k>` when not given.
    pub fn from_npy(array: &NpyArray, names: Option<Vec<String>>) -> Result<Self> {
        let &[k, d] = array.shape.as_slice() else {
            return Err(Error::BadShape {
                shape: array.shape.clone(),
                expected: "(K, D) anchor matrix",
            });
        };
        let names = names.unwrap_or_else(|| (0..k).map(|i| format!("class{i}")).collect());
        if names.len() != k {
            return Err(Error::ShapeMismatch(format!(
                "{} anchor names for {k} rows",
                names.len()
            )));
        }
        Self::new(names, d, array.to_f32()?)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, k: usize) -> &[f32] {
        &self.embeddings[k * self.dim..(k + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.embeddings.chunks(self.dim)
    }
}

/// Integer label grid with an ignore sentinel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticMask {
    height: usize,
    width: usize,
    labels: Vec<u32>,
    ignore_value: u32,
}

impl SemanticMask {
    pub fn new(height: usize, width: usize, labels: Vec<u32>) -> Result<Self> {
        Self::with_ignore(height, width, labels, DEFAULT_IGNORE)
    }

    pub fn with_ignore(
        height: usize,
        width: usize,
        labels: Vec<u32>,
        ignore_value: u32,
    ) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "mask {height}x{width} needs {} labels, got {}",
                height * width,
                labels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
            ignore_value,
        })
    }

    /// Checks that every non-ignored label is below `classes`.
    pub fn validate(&self, classes: u32) -> Result<()> {
        match self
            .labels
            .iter()
            .find(|&&l| l != self.ignore_value && l >= classes)
        {
            Some(&l) => Err(Error::ClassOutOfRange {
                class: l,
                classes: classes as usize,
            }),
            None => Ok(()),
        }
    }

    /// Accepts a 2-D u8 or i64 array.
    pub fn from_npy(array: &NpyArray) -> Result<Self> {
        let &[h, w] = array.shape.as_slice() else {
            return Err(Error::BadShape {
                shape: array.shape.clone(),
                expected: "(H, W) label mask",
            });
        };
        let labels = match &array.data {
            NpyData::U8(v) => v.iter().map(|&x| x as u32).collect(),
            NpyData::I64(v) => v
                .iter()
                .map(|&x| {
                    u32::try_from(x).map_err(|_| Error::InvalidValue(format!("label {x}")))
                })
                .collect::<Result<_>>()?,
            _ => {
                return Err(Error::BadShape {
                    shape: array.shape.clone(),
                    expected: "integer label mask",
                })
            }
        };
        Self::new(h, w, labels)
    }

    pub fn to_npy(&self) -> NpyArray {
        NpyArray::new(
            vec![self.height, self.width],
            NpyData::I64(self.labels.iter().map(|&l| l as i64).collect()),
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn ignore_value(&self) -> u32 {
        self.ignore_value
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    pub fn is_ignored(&self, index: usize) -> bool {
        self.labels[index] == self.ignore_value
    }

    pub fn same_shape(&self, other: &SemanticMask) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Binary mask of pixels carrying `class`.
    pub fn class_mask(&self, class: u32) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            data: self.labels.iter().map(|&l| l == class).collect(),
        }
    }

    /// Distinct non-ignored labels, ascending.
    pub fn present_labels(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self
            .labels
            .iter()
            .copied()
            .filter(|&l| l != self.ignore_value)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn resize_nearest(&self, height: usize, width: usize) -> Self {
        let mut labels = Vec::with_capacity(height * width);
        for r in 0..height {
            let sr = nearest_source(r, height, self.height);
            for c in 0..width {
                labels.push(self.get(sr, nearest_source(c, width, self.width)));
            }
        }
        Self {
            height,
            width,
            labels,
            ignore_value: self.ignore_value,
        }
    }
}

/// Boolean pixel mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "binary mask {height}x{width} needs {} cells, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn same_shape(&self, other: &BinaryMask) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn resize_nearest(&self, height: usize, width: usize) -> Self {
        Self::from_fn(height, width, |r, c| {
            self.get(
                nearest_source(r, height, self.height),
                nearest_source(c, width, self.width),
            )
        })
    }
}

/// Source index for nearest-neighbour resampling from `src` to `dst` cells.
fn nearest_source(i: usize, dst: usize, src: usize) -> usize {
    (((2 * i + 1) * src) / (2 * dst)).min(src - 1)
}
