use super::BoundaryMap;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Patch<T> {
    pub row0: usize,
    pub col0: usize,
    pub map: BoundaryMap<T>,
}

/// Row-major tiling of a boundary map; the last row and column of patches
/// absorb the division remainders.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid<T> {
    pub rows: usize,
    pub cols: usize,
    pub patches: Vec<Patch<T>>,
}

/// Standard 3 x 6 tiling.
pub fn split_patches<T: Scalar>(map: &BoundaryMap<T>) -> Result<PatchGrid<T>> {
    split_patches_grid(map, 3, 6)
}

pub fn split_patches_grid<T: Scalar>(
    map: &BoundaryMap<T>,
    rows: usize,
    cols: usize,
) -> Result<PatchGrid<T>> {
    if rows == 0 || cols == 0 || map.height() < rows || map.width() < cols {
        return Err(Error::TooSmall(format!(
            "{}x{} map cannot be split into {rows}x{cols} patches",
            map.height(),
            map.width()
        )));
    }
    let ph = map.height() / rows;
    let pw = map.width() / cols;
    let mut patches = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let row0 = r * ph;
        let h = if r + 1 == rows { map.height() - row0 } else { ph };
        for c in 0..cols {
            let col0 = c * pw;
            let w = if c + 1 == cols { map.width() - col0 } else { pw };
            patches.push(Patch {
                row0,
                col0,
                map: map.crop(row0, col0, h, w),
            });
        }
    }
    Ok(PatchGrid {
        rows,
        cols,
        patches,
    })
}
