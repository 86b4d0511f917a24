use std::fs;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{DatasetManifest, FeatureStore, ManifestEntry};
use crate::error::{protocol, Error, Result};
use crate::features::{video_descriptor, DescriptorPreset, Frame};
use crate::metric::{FeatureVector, LabeledSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    /// The store already held features for exactly these inputs.
    Hit,
    Written,
}

pub fn load_frame(path: &Path, preset: &DescriptorPreset) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let format = image::ImageFormat::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let img = image::load_from_memory_with_format(&bytes, format)
        .map_err(|e| Error::format(path, e.to_string()))?;
    Frame::for_preset(img.to_rgb8(), preset)
}

fn hash_str(h: &mut Sha256, s: &str) {
    h.update((s.len() as u64).to_le_bytes());
    h.update(s.as_bytes());
}

/// SHA-256 over the preset and every frame's name and bytes.
pub fn source_hash(manifest: &DatasetManifest, preset: &DescriptorPreset) -> Result<[u8; 32]> {
    let mut h = Sha256::new();
    h.update(preset.hash());
    h.update((manifest.persons.len() as u64).to_le_bytes());
    for e in &manifest.persons {
        hash_str(&mut h, &e.person_id);
        hash_str(&mut h, &e.camera_id);
        h.update((e.frames.len() as u64).to_le_bytes());
        for f in &e.frames {
            let name = f.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            hash_str(&mut h, name);
            let bytes = fs::read(f).map_err(|err| Error::io(f, err))?;
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
    }
    Ok(h.finalize().into())
}

pub fn describe_entry(entry: &ManifestEntry, preset: &DescriptorPreset) -> Result<LabeledSample> {
    let frames = entry
        .frames
        .iter()
        .map(|p| load_frame(p, preset))
        .collect::<Result<Vec<_>>>()?;
    let desc = video_descriptor(&frames, preset)?;
    LabeledSample::new(
        FeatureVector::new(desc.combined)?,
        entry.person_id.clone(),
        entry.camera_id.clone(),
    )
}

/// Describes every manifest entry and persists the store, unless the store
/// at `store_path` was already built from identical inputs.
pub fn extract_and_cache(
    manifest: &DatasetManifest,
    preset: &DescriptorPreset,
    store_path: impl AsRef<Path>,
) -> Result<(FeatureStore, CacheStatus)> {
    let store_path = store_path.as_ref();
    if manifest.is_empty() {
        return Err(protocol!("manifest has no videos to extract"));
    }
    let preset_hash = preset.hash();
    let existing = if store_path.exists() {
        Some(FeatureStore::read(store_path)?)
    } else {
        None
    };
    if let Some(store) = &existing {
        if store.header.preset_hash != preset_hash {
            return Err(protocol!(
                "{} was built with preset {:?} ({}), refusing to mix with {:?} ({})",
                store_path.display(),
                store.header.preset_name,
                super::hex(&store.header.preset_hash[..8]),
                preset.name,
                super::hex(&preset_hash[..8]),
            ));
        }
    }
    let source = source_hash(manifest, preset)?;
    if let Some(store) = existing {
        if store.header.source_hash == source {
            return Ok((store, CacheStatus::Hit));
        }
    }
    let records = manifest
        .persons
        .par_iter()
        .map(|e| describe_entry(e, preset))
        .collect::<Result<Vec<_>>>()?;
    let store = FeatureStore::new(preset.name.clone(), preset_hash, source, records)?;
    store.write(store_path)?;
    Ok((store, CacheStatus::Written))
}
