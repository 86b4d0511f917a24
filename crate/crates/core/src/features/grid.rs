use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// One patch rectangle, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchRect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

/// Overlapping patch layout over an image, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub image_height: usize,
    pub image_width: usize,
    pub rows: usize,
    pub cols: usize,
    pub rects: Vec<PatchRect>,
}

impl PatchGrid {
    pub fn len(&self) -> usize {
        self.rects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rects.is_empty()
    }
}

fn stride(patch: usize, overlap: f64, axis: &str) -> Result<usize> {
    let s = patch as f64 * (1.0 - overlap);
    let rounded = s.round();
    if (s - rounded).abs() > 1e-9 || rounded < 1.0 {
        return Err(invalid!(
            "{axis} stride {patch} x (1 - {overlap}) = {s} is not a positive integer"
        ));
    }
    Ok(rounded as usize)
}

/// Patches of `patch_h × patch_w` stepping by `patch × (1 − overlap)` along
/// each axis; `floor((img − patch) / stride) + 1` patches per axis.
pub fn build_patch_grid(
    img_h: usize,
    img_w: usize,
    patch_h: usize,
    patch_w: usize,
    overlap_fraction: f64,
) -> Result<PatchGrid> {
    if [img_h, img_w, patch_h, patch_w].contains(&0) {
        return Err(invalid!("image and patch sizes must be positive"));
    }
    if patch_h > img_h || patch_w > img_w {
        return Err(invalid!(
            "patch {patch_h}x{patch_w} does not fit in image {img_h}x{img_w}"
        ));
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(invalid!("overlap fraction must lie in [0, 1), got {overlap_fraction}"));
    }
    let sy = stride(patch_h, overlap_fraction, "vertical")?;
    let sx = stride(patch_w, overlap_fraction, "horizontal")?;
    let rows = (img_h - patch_h) / sy + 1;
    let cols = (img_w - patch_w) / sx + 1;
    let mut rects = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            rects.push(PatchRect {
                top: r * sy,
                left: c * sx,
                height: patch_h,
                width: patch_w,
            });
        }
    }
    Ok(PatchGrid {
        image_height: img_h,
        image_width: img_w,
        rows,
        cols,
        rects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_layout_has_155_patches() {
        let g = build_patch_grid(128, 48, 8, 16, 0.5).unwrap();
        assert_eq!((g.rows, g.cols, g.len()), (31, 5, 155));
        assert!(g
            .rects
            .iter()
            .all(|r| r.top + r.height <= 128 && r.left + r.width <= 48));
        assert_eq!(g.rects[1], PatchRect { top: 0, left: 8, height: 8, width: 16 });
        assert_eq!(g.rects[5].top, 4);
    }

    #[test]
    fn small_layouts() {
        let g = build_patch_grid(8, 16, 8, 16, 0.5).unwrap();
        assert_eq!(g.rects, vec![PatchRect { top: 0, left: 0, height: 8, width: 16 }]);
        let g = build_patch_grid(16, 16, 8, 16, 0.5).unwrap();
        assert_eq!(g.len(), 3);
        assert!(g.rects.iter().all(|r| r.left == 0));
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(build_patch_grid(8, 8, 9, 8, 0.5).is_err());
        assert!(build_patch_grid(16, 16, 5, 5, 0.5).is_err());
        assert!(build_patch_grid(16, 16, 4, 4, 1.0).is_err());
    }
}
