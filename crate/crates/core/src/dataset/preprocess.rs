//! Optional feature normalisation.
//!
//! Statistics-bearing steps (z-scoring) are fitted on one sample set and
//! then applied to others through [`Preprocessor`], so evaluation data never
//! influences the fit.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::metric::{FeatureVector, LabeledSample};

/// Dimensions with a standard deviation below this are centred but not scaled.
pub const ZSCORE_MIN_STD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreprocessOption {
    None,
    L1Normalize,
    L2Normalize,
    Zscore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZscoreParams {
    pub mean: Vec<f64>,
    /// `1.0` for near-constant dimensions.
    pub scale: Vec<f64>,
}

impl ZscoreParams {
    pub fn fit(samples: &[LabeledSample]) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(invalid!("cannot fit z-score statistics on zero samples"));
        };
        let d = first.dim();
        let n = samples.len() as f64;
        let mut mean = vec![0.0; d];
        for s in samples {
            if s.dim() != d {
                return Err(invalid!("sample dimensions differ: {} vs {d}", s.dim()));
            }
            for (m, v) in mean.iter_mut().zip(s.feature.as_slice()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for s in samples {
            for ((acc, v), m) in var.iter_mut().zip(s.feature.as_slice()).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd < ZSCORE_MIN_STD {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(ZscoreParams { mean, scale })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedStep {
    L1Normalize,
    L2Normalize,
    Zscore(ZscoreParams),
}

/// A fitted sequence of preprocessing steps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub steps: Vec<FittedStep>,
}

fn rescale(v: &mut [f64], norm: f64) {
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

impl FittedStep {
    fn apply(&self, v: &mut [f64]) -> Result<()> {
        match self {
            FittedStep::L1Normalize => {
                let n: f64 = v.iter().map(|x| x.abs()).sum();
                rescale(v, n);
            }
            FittedStep::L2Normalize => {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                rescale(v, n);
            }
            FittedStep::Zscore(p) => {
                if p.mean.len() != v.len() {
                    return Err(invalid!(
                        "z-score fitted on dimension {}, got {}",
                        p.mean.len(),
                        v.len()
                    ));
                }
                for ((x, m), s) in v.iter_mut().zip(&p.mean).zip(&p.scale) {
                    *x = (*x - m) / s;
                }
            }
        }
        Ok(())
    }
}

impl Preprocessor {
    /// Fits the steps in order on `train`, each on the output of the previous.
    pub fn fit(options: &[PreprocessOption], train: &[LabeledSample]) -> Result<Self> {
        let mut fitted = Preprocessor::default();
        let mut current: Option<Vec<LabeledSample>> = None;
        for opt in options {
            let step = match opt {
                PreprocessOption::None => continue,
                PreprocessOption::L1Normalize => FittedStep::L1Normalize,
                PreprocessOption::L2Normalize => FittedStep::L2Normalize,
                PreprocessOption::Zscore => {
                    FittedStep::Zscore(ZscoreParams::fit(current.as_deref().unwrap_or(train))?)
                }
            };
            let input = current.as_deref().unwrap_or(train);
            let next = Preprocessor { steps: vec![step.clone()] }.apply(input)?;
            current = Some(next);
            fitted.steps.push(step);
        }
        Ok(fitted)
    }

    pub fn is_identity(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn apply(&self, samples: &[LabeledSample]) -> Result<Vec<LabeledSample>> {
        samples
            .iter()
            .map(|s| {
                let mut v = s.feature.as_slice().to_vec();
                for step in &self.steps {
                    step.apply(&mut v)?;
                }
                Ok(LabeledSample {
                    feature: FeatureVector::new(v)?,
                    person_id: s.person_id.clone(),
                    camera_id: s.camera_id.clone(),
                })
            })
            .collect()
    }
}

/// Fits on `samples` and transforms them.
pub fn preprocess(samples: &[LabeledSample], options: &[PreprocessOption]) -> Result<Vec<LabeledSample>> {
    Preprocessor::fit(options, samples)?.apply(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[f64]) -> LabeledSample {
        LabeledSample::new(FeatureVector::new(v.to_vec()).unwrap(), "p", "c").unwrap()
    }

    #[test]
    fn none_is_identity() {
        let data = vec![s(&[1.0, -2.0]), s(&[3.5, 0.0])];
        assert_eq!(preprocess(&data, &[PreprocessOption::None]).unwrap(), data);
        assert_eq!(preprocess(&data, &[]).unwrap(), data);
    }

    #[test]
    fn l2_gives_unit_norm_and_keeps_zero_vectors() {
        let data = vec![s(&[3.0, 4.0]), s(&[0.0, 0.0]), s(&[-1e-3, 2e-3])];
        let out = preprocess(&data, &[PreprocessOption::L2Normalize]).unwrap();
        for (o, i) in out.iter().zip(&data) {
            let n: f64 = o.feature.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
            if i.feature.as_slice().iter().all(|&x| x == 0.0) {
                assert_eq!(n, 0.0);
            } else {
                assert!((n - 1.0).abs() <= 1e-9);
            }
        }
        let l1 = preprocess(&data, &[PreprocessOption::L1Normalize]).unwrap();
        assert_eq!(l1[0].feature.as_slice(), &[3.0 / 7.0, 4.0 / 7.0]);
    }

    #[test]
    fn zscore_fitted_on_train_only() {
        let train = vec![s(&[1.0, 10.0, 5.0]), s(&[3.0, 14.0, 5.0]), s(&[5.0, 12.0, 5.0])];
        let test = vec![s(&[100.0, -3.0, 7.0])];
        let pre = Preprocessor::fit(&[PreprocessOption::Zscore], &train).unwrap();
        let out = pre.apply(&train).unwrap();
        for k in 0..3 {
            let mean: f64 = out.iter().map(|x| x.feature.as_slice()[k]).sum::<f64>() / 3.0;
            assert!(mean.abs() <= 1e-9);
        }
        // Constant dimension is centred, not scaled.
        assert!(out.iter().all(|x| x.feature.as_slice()[2] == 0.0));
        let t = pre.apply(&test).unwrap();
        // mean 3, population std sqrt(8/3)
        assert!((t[0].feature.as_slice()[0] - 97.0 / (8.0f64 / 3.0).sqrt()).abs() < 1e-9);
        assert_eq!(t[0].feature.as_slice()[2], 2.0);
        assert!(pre.apply(&[s(&[1.0])]).is_err());
    }

    #[test]
    fn options_parse_from_kebab_case() {
        let o: Vec<PreprocessOption> =
            serde_json::from_str(r#"["none","l1-normalize","l2-normalize","zscore"]"#).unwrap();
        assert_eq!(o.len(), 4);
    }
}
