//! Getting feature vectors in and out: directory scanning, descriptor
//! extraction with caching, the `TDLF` store, synthetic data and
//! preprocessing.

mod extract;
pub(crate) mod manifest;
mod preprocess;
mod store;
mod synth;

pub use extract::{describe_entry, extract_and_cache, load_frame, source_hash, CacheStatus};
pub use manifest::{scan_dataset, DatasetManifest, Layout, ManifestEntry, DEFAULT_MIN_FRAMES};
pub use preprocess::{preprocess, FittedStep, PreprocessOption, Preprocessor, ZscoreParams};
pub use store::{hex, FeatureStore, StoreHeader, STORE_MAGIC, STORE_VERSION};
pub use synth::{generate_synthetic, person_label, synthetic_store, SynthConfig, SYNTH_CAMERAS};
