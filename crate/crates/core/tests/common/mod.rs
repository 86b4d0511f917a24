#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use image::{Rgb, RgbImage};
use tdl_core::dataset::FeatureStore;
use tdl_core::{FeatureVector, LabeledSample};

/// Writes `frames` small PNG frames whose colours depend on `person` and
/// drift a little over time.
pub fn write_video(dir: &Path, person: usize, camera: usize, frames: usize) {
    std::fs::create_dir_all(dir).unwrap();
    for t in 0..frames {
        let img = RgbImage::from_fn(24, 64, |x, y| {
            let top = y < 32;
            let p = person as i64;
            let base = (if top { 40 + 50 * p } else { 200 - 30 * p }).rem_euclid(256) as u32;
            let tex = ((x + y + t as u32) % 4) * 6 + camera as u32 * 5;
            Rgb([
                ((base + tex) % 256) as u8,
                ((base / 2 + 3 * tex) % 256) as u8,
                ((255 - base + tex) % 256) as u8,
            ])
        });
        img.save(dir.join(format!("{t:04}.png"))).unwrap();
    }
}

/// `root/cam_a/person_XXXX`, `root/cam_b/person_XXXX`.
pub fn write_prid_tree(root: &Path, persons: usize, frames: usize) {
    for p in 0..persons {
        for (c, cam) in ["cam_a", "cam_b"].iter().enumerate() {
            write_video(&root.join(cam).join(format!("person_{p:04}")), p, c, frames);
        }
    }
}

/// Both cameras hold identical vectors for each identity.
pub fn self_matching_store(persons: usize, dim: usize) -> FeatureStore {
    let mut records = Vec::new();
    for p in 0..persons {
        let v: Vec<f64> = (0..dim).map(|k| ((p * 7 + k * 3) % 11) as f64 + p as f64 * 0.1).collect();
        for cam in ["cam_a", "cam_b"] {
            records.push(
                LabeledSample::new(FeatureVector::new(v.clone()).unwrap(), format!("p{p:02}"), cam).unwrap(),
            );
        }
    }
    FeatureStore::new("toy", [1; 32], [2; 32], records).unwrap()
}

pub fn tdl_bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_tdl"))
}

pub fn tdl(args: &[&str]) -> Output {
    Command::new(tdl_bin()).args(args).output().expect("spawn tdl")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
