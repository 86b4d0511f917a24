//! Per-video descriptor: pooled colour/LBP patch statistics plus a
//! space-time gradient histogram.
//!
//! With the default preset every frame is resized to 128×48 and covered by
//! 155 overlapping 8×16 patches. Each patch contributes 11 values: the means
//! of H, S, V, L*, a*, b* (see [`color`]) followed by a 5-bin L1-normalised
//! LBP class histogram (see [`lbp`]), giving 1705 appearance values per
//! frame. Frame descriptors are averaged over the video. The space-time part
//! is a 6×2×5-cell, 20-bin gradient histogram (1200 values, see
//! [`spacetime`]). The combined vector is `[space-time ‖ appearance]`, 2905
//! values.

pub mod color;
pub mod grid;
pub mod lbp;
pub mod spacetime;

pub use grid::{build_patch_grid, PatchGrid, PatchRect};
pub use spacetime::{CellLayout, GrayVolume};

use image::{imageops, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use lbp::{LbpClass, LBP_BINS};

/// Colour means per patch (H, S, V, L*, a*, b*).
pub const COLOR_STATS: usize = 6;
/// Values per patch in the appearance descriptor.
pub const PATCH_BLOCK: usize = COLOR_STATS + LBP_BINS;

/// Geometry and layout of the descriptor. Its [`hash`](Self::hash) is
/// recorded in feature stores so incompatible descriptors never mix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescriptorPreset {
    pub name: String,
    pub frame_height: usize,
    pub frame_width: usize,
    pub patch_height: usize,
    pub patch_width: usize,
    pub overlap: f64,
    pub cells: CellLayout,
    /// Always `["spacetime", "appearance"]`.
    pub block_order: Vec<String>,
}

impl Default for DescriptorPreset {
    fn default() -> Self {
        DescriptorPreset {
            name: DescriptorPreset::DEFAULT_NAME.into(),
            frame_height: 128,
            frame_width: 48,
            patch_height: 8,
            patch_width: 16,
            overlap: 0.5,
            cells: CellLayout {
                cells_y: 6,
                cells_x: 2,
                cells_t: 5,
            },
            block_order: vec!["spacetime".into(), "appearance".into()],
        }
    }
}

impl DescriptorPreset {
    pub const DEFAULT_NAME: &'static str = "tdl-2905";

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            Self::DEFAULT_NAME => Ok(DescriptorPreset::default()),
            other => Err(Error::Config(format!(
                "unknown descriptor preset {other:?} (available: {})",
                Self::DEFAULT_NAME
            ))),
        }
    }

    /// SHA-256 of the canonical JSON form, as raw bytes.
    pub fn hash(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("preset serialises");
        Sha256::digest(&json).into()
    }

    pub fn grid(&self) -> Result<PatchGrid> {
        build_patch_grid(
            self.frame_height,
            self.frame_width,
            self.patch_height,
            self.patch_width,
            self.overlap,
        )
    }

    pub fn appearance_dim(&self) -> Result<usize> {
        Ok(self.grid()?.len() * PATCH_BLOCK)
    }

    pub fn spacetime_dim(&self) -> usize {
        self.cells.dim()
    }

    pub fn dim(&self) -> Result<usize> {
        Ok(self.appearance_dim()? + self.spacetime_dim())
    }
}

/// An RGB frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    image: RgbImage,
}

impl Frame {
    /// Wraps an image as-is.
    pub fn new(image: RgbImage) -> Result<Self> {
        if image.width() == 0 || image.height() == 0 {
            return Err(invalid!("frame must be nonempty"));
        }
        Ok(Frame { image })
    }

    /// Resizes to `height × width` with bilinear (triangle) filtering unless
    /// the image already has that size.
    pub fn resized(image: RgbImage, height: usize, width: usize) -> Result<Self> {
        let frame = Frame::new(image)?;
        if frame.height() == height && frame.width() == width {
            return Ok(frame);
        }
        let image = imageops::resize(
            &frame.image,
            width as u32,
            height as u32,
            imageops::FilterType::Triangle,
        );
        Ok(Frame { image })
    }

    pub fn for_preset(image: RgbImage, preset: &DescriptorPreset) -> Result<Self> {
        Frame::resized(image, preset.frame_height, preset.frame_width)
    }

    pub fn height(&self) -> usize {
        self.image.height() as usize
    }

    pub fn width(&self) -> usize {
        self.image.width() as usize
    }

    pub fn image(&self) -> &RgbImage {
        &self.image
    }

    /// Integer Rec. 601 luma, row-major.
    pub fn luma(&self) -> Vec<u8> {
        self.image
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0;
                ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
            })
            .collect()
    }

    /// Luma scaled to `[0, 1]`, row-major.
    pub fn intensity(&self) -> Vec<f64> {
        self.luma().into_iter().map(|v| v as f64 / 255.0).collect()
    }
}

/// Appearance descriptor of one frame: [`PATCH_BLOCK`] values per patch in
/// grid order.
pub fn frame_descriptor(frame: &Frame, grid: &PatchGrid) -> Result<Vec<f64>> {
    let (h, w) = (frame.height(), frame.width());
    if (grid.image_height, grid.image_width) != (h, w) {
        return Err(invalid!(
            "grid is laid out for {}x{} images, frame is {h}x{w}",
            grid.image_height,
            grid.image_width
        ));
    }
    let channels: Vec<[f64; COLOR_STATS]> = frame
        .image
        .pixels()
        .map(|p| {
            let [hh, s, v] = color::rgb_to_hsv(p.0);
            let [l, a, b] = color::rgb_to_lab(p.0);
            [hh, s, v, l, a, b]
        })
        .collect();
    let classes = lbp::classify_image(&frame.luma(), h, w);

    let mut out = Vec::with_capacity(grid.len() * PATCH_BLOCK);
    for rect in &grid.rects {
        let mut sums = [0.0; COLOR_STATS];
        let mut hist = [0.0; LBP_BINS];
        for y in rect.top..rect.top + rect.height {
            for x in rect.left..rect.left + rect.width {
                let idx = y * w + x;
                for (s, c) in sums.iter_mut().zip(channels[idx]) {
                    *s += c;
                }
                hist[classes[idx] as usize] += 1.0;
            }
        }
        let count = (rect.height * rect.width) as f64;
        out.extend(sums.iter().map(|s| s / count));
        spacetime::l1_normalize_guarded(&mut hist);
        out.extend_from_slice(&hist);
    }
    Ok(out)
}

/// Elementwise mean, accumulated incrementally so repeated identical inputs
/// reproduce themselves exactly.
pub fn average_pool(descriptors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = descriptors.first() else {
        return Err(invalid!("cannot pool an empty list of descriptors"));
    };
    let mut mean = first.clone();
    for (k, d) in descriptors.iter().enumerate().skip(1) {
        if d.len() != mean.len() {
            return Err(invalid!("descriptor dimensions differ: {} vs {}", d.len(), mean.len()));
        }
        let n = (k + 1) as f64;
        for (m, v) in mean.iter_mut().zip(d) {
            *m += (v - *m) / n;
        }
    }
    Ok(mean)
}

pub fn spacetime_descriptor(video: &[Frame], cells: CellLayout) -> Result<Vec<f64>> {
    let Some(first) = video.first() else {
        return Err(invalid!("space-time descriptor needs at least 2 frames, got 0"));
    };
    let (h, w) = (first.height(), first.width());
    if video.iter().any(|f| f.height() != h || f.width() != w) {
        return Err(invalid!("all frames of a video must share one size"));
    }
    let volume = GrayVolume {
        height: h,
        width: w,
        frames: video.iter().map(Frame::intensity).collect(),
    };
    spacetime::spacetime_histogram(&volume, cells)
}

/// Both descriptor parts and their concatenation.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoDescriptor {
    pub appearance: Vec<f64>,
    pub spacetime: Vec<f64>,
    /// `[spacetime ‖ appearance]`.
    pub combined: Vec<f64>,
}

/// Describes a video whose frames already have the preset's size.
pub fn video_descriptor(video: &[Frame], preset: &DescriptorPreset) -> Result<VideoDescriptor> {
    if video.len() < 2 {
        return Err(invalid!("a video needs at least 2 frames, got {}", video.len()));
    }
    let grid = preset.grid()?;
    let spacetime = spacetime_descriptor(video, preset.cells)?;
    let per_frame = video
        .par_iter()
        .map(|f| frame_descriptor(f, &grid))
        .collect::<Result<Vec<_>>>()?;
    let appearance = average_pool(&per_frame)?;
    let mut combined = Vec::with_capacity(spacetime.len() + appearance.len());
    combined.extend_from_slice(&spacetime);
    combined.extend_from_slice(&appearance);
    Ok(VideoDescriptor {
        appearance,
        spacetime,
        combined,
    })
}

// LbpClass is `repr(u8)`; keep the histogram index in sync with it.
const _: () = assert!(LbpClass::Flat as usize == LBP_BINS - 1);

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn uniform(h: u32, w: u32, px: [u8; 3]) -> Frame {
        Frame::new(RgbImage::from_pixel(w, h, Rgb(px))).unwrap()
    }

    #[test]
    fn default_preset_dimensions() {
        let p = DescriptorPreset::default();
        assert_eq!(p.grid().unwrap().len(), 155);
        assert_eq!(p.appearance_dim().unwrap(), 1705);
        assert_eq!(p.spacetime_dim(), 1200);
        assert_eq!(p.dim().unwrap(), 2905);
        assert!(DescriptorPreset::by_name("nope").is_err());
        assert_eq!(DescriptorPreset::by_name("tdl-2905").unwrap().hash(), p.hash());
    }

    #[test]
    fn uniform_gray_frame_has_identical_flat_blocks() {
        let p = DescriptorPreset::default();
        let f = uniform(128, 48, [128, 128, 128]);
        let d = frame_descriptor(&f, &p.grid().unwrap()).unwrap();
        assert_eq!(d.len(), 1705);
        let first = &d[..PATCH_BLOCK];
        assert!(d.chunks(PATCH_BLOCK).all(|b| b == first));
        assert_eq!(&first[COLOR_STATS..], &[0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn grid_frame_mismatch_rejected() {
        let grid = build_patch_grid(16, 16, 8, 16, 0.5).unwrap();
        assert!(frame_descriptor(&uniform(8, 16, [1, 2, 3]), &grid).is_err());
    }

    #[test]
    fn permuting_pixels_inside_a_patch_keeps_colour_means() {
        // Two side-by-side 4x4 patches; the left one holds a checker pattern.
        let mut a = RgbImage::from_pixel(8, 4, Rgb([40, 90, 200]));
        for y in 0..4 {
            for x in 0..4 {
                if (x + y) % 2 == 0 {
                    a.put_pixel(x, y, Rgb([220, 30, 60]));
                }
            }
        }
        // Same pixels, rearranged into two vertical bands.
        let mut b = RgbImage::from_pixel(8, 4, Rgb([40, 90, 200]));
        for y in 0..4 {
            for x in 0..2 {
                b.put_pixel(x, y, Rgb([220, 30, 60]));
            }
        }
        let grid = build_patch_grid(4, 8, 4, 4, 0.0).unwrap();
        let da = frame_descriptor(&Frame::new(a).unwrap(), &grid).unwrap();
        let db = frame_descriptor(&Frame::new(b).unwrap(), &grid).unwrap();
        for (x, y) in da[..COLOR_STATS].iter().zip(&db[..COLOR_STATS]) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_ne!(da[COLOR_STATS..PATCH_BLOCK], db[COLOR_STATS..PATCH_BLOCK]);
    }

    #[test]
    fn pooling() {
        let u = vec![0.1, 0.7, 0.3];
        let v = vec![0.5, 0.2, 0.9];
        assert_eq!(average_pool(std::slice::from_ref(&u)).unwrap(), u);
        assert_eq!(average_pool(&vec![u.clone(); 7]).unwrap(), u);
        let uv = average_pool(&[u.clone(), v.clone()]).unwrap();
        let vu = average_pool(&[v.clone(), u.clone()]).unwrap();
        for ((a, b), (x, y)) in uv.iter().zip(&vu).zip(u.iter().zip(&v)) {
            assert!((a - (x + y) / 2.0).abs() < 1e-15);
            assert!((a - b).abs() < 1e-15);
        }
        assert!(average_pool(&[]).is_err());
        assert!(average_pool(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn constant_video_descriptor() {
        let p = DescriptorPreset::default();
        let video = vec![uniform(128, 48, [30, 160, 90]); 6];
        let d = video_descriptor(&video, &p).unwrap();
        assert_eq!(d.combined.len(), 2905);
        assert!(d.spacetime.iter().all(|&v| v == 0.0));
        let single = frame_descriptor(&video[0], &p.grid().unwrap()).unwrap();
        assert_eq!(d.appearance, single);
        assert_eq!(&d.combined[..1200], &d.spacetime[..]);
        assert_eq!(&d.combined[1200..], &d.appearance[..]);
        assert!(video_descriptor(&video[..1], &p).is_err());
    }

    #[test]
    fn resize_reaches_preset_size() {
        let f = Frame::for_preset(RgbImage::new(64, 160), &DescriptorPreset::default()).unwrap();
        assert_eq!((f.height(), f.width()), (128, 48));
    }
}
