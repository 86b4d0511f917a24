//! Discovery of person videos on disk.
//!
//! Supported layouts (frames are `.png` or `.bmp`, ordered by file name):
//!
//! * `prid2011-style`: `ROOT/cam_a/person_0001/*.png`, `ROOT/cam_b/...`
//! * `ilids-style`: `ROOT/cam1/person001/*.png`, `ROOT/cam2/...`, optionally
//!   below a `ROOT/sequences/` directory
//! * `flat`: `ROOT/<person>/<camera>/*.png`

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{protocol, Error, Result};

/// Default minimum video length.
pub const DEFAULT_MIN_FRAMES: usize = 27;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    #[serde(rename = "prid2011-style")]
    Prid2011,
    #[serde(rename = "ilids-style")]
    Ilids,
    #[serde(rename = "flat")]
    Flat,
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prid2011-style" | "prid2011" | "prid" => Ok(Layout::Prid2011),
            "ilids-style" | "ilids" => Ok(Layout::Ilids),
            "flat" => Ok(Layout::Flat),
            other => Err(Error::Config(format!(
                "unknown dataset layout {other:?} (expected prid2011-style, ilids-style or flat)"
            ))),
        }
    }
}

impl Layout {
    fn camera_dirs(self) -> &'static [&'static str] {
        match self {
            Layout::Prid2011 => &["cam_a", "cam_b"],
            Layout::Ilids => &["cam1", "cam2"],
            Layout::Flat => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub person_id: String,
    pub camera_id: String,
    pub frame_directory: PathBuf,
    pub frame_count: usize,
    pub frames: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub layout: Layout,
    pub min_frames: usize,
    /// Sorted by person id, then camera id.
    pub persons: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.persons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.persons.is_empty()
    }

    pub fn person_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.persons.iter().map(|e| e.person_id.as_str()).collect();
        ids.dedup();
        ids
    }
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                out.push((name.to_string(), path));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn is_frame(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png") || e.eq_ignore_ascii_case("bmp"))
}

fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut frames = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && is_frame(&path) {
            frames.push(path);
        }
    }
    frames.sort();
    Ok(frames)
}

fn entry(person_id: &str, camera_id: &str, dir: PathBuf) -> Result<ManifestEntry> {
    let frames = frame_files(&dir)?;
    Ok(ManifestEntry {
        person_id: person_id.to_string(),
        camera_id: camera_id.to_string(),
        frame_directory: dir,
        frame_count: frames.len(),
        frames,
    })
}

/// Lists every person/camera video with at least `min_frames` frames.
pub fn scan_dataset(root: impl AsRef<Path>, layout: Layout, min_frames: usize) -> Result<DatasetManifest> {
    let root = root.as_ref();
    let meta = fs::metadata(root).map_err(|e| Error::io(root, e))?;
    if !meta.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotADirectory, "dataset root is not a directory"),
        ));
    }
    let mut found = Vec::new();
    match layout {
        Layout::Prid2011 | Layout::Ilids => {
            let base = match root.join("sequences") {
                s if layout == Layout::Ilids && s.is_dir() => s,
                _ => root.to_path_buf(),
            };
            for cam in layout.camera_dirs() {
                let cam_dir = base.join(cam);
                if !cam_dir.is_dir() {
                    continue;
                }
                for (person, dir) in sorted_subdirs(&cam_dir)? {
                    found.push(entry(&person, cam, dir)?);
                }
            }
        }
        Layout::Flat => {
            for (person, pdir) in sorted_subdirs(root)? {
                for (cam, dir) in sorted_subdirs(&pdir)? {
                    found.push(entry(&person, &cam, dir)?);
                }
            }
        }
    }
    found.retain(|e| e.frame_count > 0);
    if found.is_empty() {
        return Err(protocol!("no sequences found under {}", root.display()));
    }
    found.retain(|e| e.frame_count >= min_frames);
    found.sort_by(|a, b| (&a.person_id, &a.camera_id).cmp(&(&b.person_id, &b.camera_id)));
    let name = root
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("dataset")
        .to_string();
    Ok(DatasetManifest {
        name,
        layout,
        min_frames,
        persons: found,
    })
}
