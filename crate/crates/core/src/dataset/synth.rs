//! Seeded synthetic identities for verification runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::FeatureStore;
use crate::error::{Error, Result};
use crate::metric::{FeatureVector, LabeledSample};

/// Camera labels assigned alternately to an identity's samples.
pub const SYNTH_CAMERAS: [&str; 2] = ["cam_a", "cam_b"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_identities: usize,
    /// Samples per identity; they alternate between the two cameras.
    pub samples_per_identity: usize,
    pub dim: usize,
    /// Leading dimensions that carry identity information.
    pub informative_dim: usize,
    /// Std-dev of per-sample noise on informative dimensions.
    pub intra_class_noise_scale: f64,
    /// Std-dev of identity prototypes on informative dimensions.
    pub inter_class_separation: f64,
    /// Std-dev of per-sample noise on the remaining dimensions.
    pub distractor_noise_scale: f64,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig::moderate()
    }
}

impl SynthConfig {
    /// 40 identities × 2 views, 50 dims of which 10 informative; distractor
    /// noise comparable to the identity signal.
    pub fn moderate() -> Self {
        SynthConfig {
            num_identities: 40,
            samples_per_identity: 2,
            dim: 50,
            informative_dim: 10,
            intra_class_noise_scale: 0.25,
            inter_class_separation: 1.0,
            distractor_noise_scale: 0.75,
            rng_seed: 2016,
        }
    }

    /// Same shape as [`moderate`](Self::moderate) with weaker noise.
    pub fn low_noise() -> Self {
        SynthConfig {
            intra_class_noise_scale: 0.15,
            distractor_noise_scale: 0.3,
            ..SynthConfig::moderate()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.num_identities == 0 || self.samples_per_identity == 0 || self.dim == 0 {
            return fail("num_identities, samples_per_identity and dim must be positive".into());
        }
        if self.informative_dim > self.dim {
            return fail(format!(
                "informative_dim {} exceeds dim {}",
                self.informative_dim, self.dim
            ));
        }
        if !(self.inter_class_separation > 0.0 && self.inter_class_separation.is_finite()) {
            return fail("inter_class_separation must be positive".into());
        }
        for (name, v) in [
            ("intra_class_noise_scale", self.intra_class_noise_scale),
            ("distractor_noise_scale", self.distractor_noise_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be nonnegative, got {v}"));
            }
        }
        Ok(())
    }

    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(serde_json::to_vec(self).expect("config serialises")).into()
    }
}

pub fn person_label(i: usize) -> String {
    format!("id_{i:04}")
}

/// Identity-major samples: `prototype + noise`, cameras alternating.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Vec<LabeledSample>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };
    let mut out = Vec::with_capacity(cfg.num_identities * cfg.samples_per_identity);
    for id in 0..cfg.num_identities {
        let prototype: Vec<f64> = (0..cfg.informative_dim)
            .map(|_| cfg.inter_class_separation * normal())
            .collect();
        for s in 0..cfg.samples_per_identity {
            let values: Vec<f64> = (0..cfg.dim)
                .map(|k| match prototype.get(k) {
                    Some(p) => p + cfg.intra_class_noise_scale * normal(),
                    None => cfg.distractor_noise_scale * normal(),
                })
                .collect();
            out.push(LabeledSample::new(
                FeatureVector::new(values)?,
                person_label(id),
                SYNTH_CAMERAS[s % 2],
            )?);
        }
    }
    Ok(out)
}

/// [`generate_synthetic`] packaged as a store tagged `"synthetic"`.
pub fn synthetic_store(cfg: &SynthConfig) -> Result<FeatureStore> {
    let samples = generate_synthetic(cfg)?;
    let hash = cfg.hash();
    FeatureStore::new("synthetic", hash, hash, samples)
}
