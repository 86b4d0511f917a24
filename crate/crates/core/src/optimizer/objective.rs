//! The top-push objective, its triggered set and its subgradient.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::TrainConfig;
use crate::error::{invalid, protocol, Result};
use crate::metric::{feature_matrix, pairwise_distances, LabeledSample, MetricMatrix, Triplet};

/// Nearest differently-labelled sample of one anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NearestNegative {
    pub index: usize,
    pub distance: f64,
}

/// A triplet whose hinge `D(i,j) − D(i,k*) + ρ` is strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriggeredTriplet {
    pub triplet: Triplet,
    pub hinge: f64,
}

/// Triplets that activate the top-push term under a given metric.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TriggeredSet {
    /// Ordered by anchor, then positive.
    pub triplets: Vec<TriggeredTriplet>,
    /// Per-anchor nearest negative; `None` for anchors with no positive.
    pub nearest: Vec<Option<NearestNegative>>,
}

impl TriggeredSet {
    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn triplet_list(&self) -> Vec<Triplet> {
        self.triplets.iter().map(|t| t.triplet).collect()
    }
}

/// Value of the objective split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveParts {
    /// `Σ D(i,j)` over ordered positive pairs.
    pub pull: f64,
    /// `Σ max{D(i,j) − min_k D(i,k) + ρ, 0}` over ordered positive pairs.
    pub hinge: f64,
    /// `(1 − α)·pull + α·hinge`.
    pub total: f64,
}

/// Training data in matrix form with integer labels and its positive pairs.
#[derive(Debug, Clone)]
pub struct Problem {
    x: DMatrix<f64>,
    labels: Vec<u32>,
    positive_pairs: Vec<(usize, usize)>,
    /// `positives_of[i]` indexes into `positive_pairs` for anchor `i`.
    positives_of: Vec<std::ops::Range<usize>>,
}

impl Problem {
    /// Requires at least two labels and one ordered positive pair.
    pub fn new(samples: &[LabeledSample]) -> Result<Self> {
        let x = feature_matrix(samples.iter().map(|s| &s.feature))?;
        let mut ids: HashMap<&str, u32> = HashMap::new();
        let labels: Vec<u32> = samples
            .iter()
            .map(|s| {
                let next = ids.len() as u32;
                *ids.entry(s.person_id.as_str()).or_insert(next)
            })
            .collect();
        if ids.len() < 2 {
            return Err(protocol!(
                "all samples share one label; the nearest different-class neighbour is undefined"
            ));
        }
        let n = labels.len();
        let mut positive_pairs = Vec::new();
        let mut positives_of = Vec::with_capacity(n);
        for i in 0..n {
            let start = positive_pairs.len();
            for j in 0..n {
                if i != j && labels[i] == labels[j] {
                    positive_pairs.push((i, j));
                }
            }
            positives_of.push(start..positive_pairs.len());
        }
        if positive_pairs.is_empty() {
            return Err(protocol!("no identity has two samples, so there are no positive pairs"));
        }
        Ok(Problem {
            x,
            labels,
            positive_pairs,
            positives_of,
        })
    }

    /// The same labels and pairs over other features for the same samples,
    /// e.g. coordinates in a subspace.
    pub fn with_features(&self, x: DMatrix<f64>) -> Result<Problem> {
        if x.nrows() != self.len() || x.ncols() == 0 {
            return Err(invalid!(
                "replacement features are {}x{}, expected {} rows",
                x.nrows(),
                x.ncols(),
                self.len()
            ));
        }
        Ok(Problem {
            x,
            labels: self.labels.clone(),
            positive_pairs: self.positive_pairs.clone(),
            positives_of: self.positives_of.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn positive_pairs(&self) -> &[(usize, usize)] {
        &self.positive_pairs
    }

    fn check_metric(&self, m: &MetricMatrix) -> Result<()> {
        if m.dim() != self.dim() {
            return Err(invalid!(
                "metric dimension {} does not match feature dimension {}",
                m.dim(),
                self.dim()
            ));
        }
        Ok(())
    }

    /// Unclamped pairwise distance matrix under `m`.
    pub fn distances(&self, m: &MetricMatrix) -> Result<DMatrix<f64>> {
        self.check_metric(m)?;
        pairwise_distances(m, &self.x)
    }

    /// Nearest negative of `i` from a precomputed distance row; ties go to
    /// the smaller index.
    fn nearest_in_row(&self, dist: &DMatrix<f64>, i: usize) -> NearestNegative {
        let mut best: Option<NearestNegative> = None;
        for k in 0..self.len() {
            if self.labels[k] == self.labels[i] {
                continue;
            }
            let d = dist[(i, k)];
            if best.is_none_or(|b| d < b.distance) {
                best = Some(NearestNegative { index: k, distance: d });
            }
        }
        // Problem::new guarantees a second label exists.
        best.expect("anchor without a negative")
    }

    /// Nearest negatives of every anchor that has at least one positive.
    pub fn nearest_negatives(&self, dist: &DMatrix<f64>) -> Vec<Option<NearestNegative>> {
        (0..self.len())
            .into_par_iter()
            .map(|i| (!self.positives_of[i].is_empty()).then(|| self.nearest_in_row(dist, i)))
            .collect()
    }

    pub fn triggered(&self, dist: &DMatrix<f64>, rho: f64) -> TriggeredSet {
        let nearest = self.nearest_negatives(dist);
        let mut triplets = Vec::new();
        for &(i, j) in &self.positive_pairs {
            let nn = nearest[i].expect("anchor with a positive has a nearest negative");
            let hinge = dist[(i, j)] - nn.distance + rho;
            if hinge > 0.0 {
                triplets.push(TriggeredTriplet {
                    triplet: Triplet {
                        anchor: i,
                        positive: j,
                        negative: nn.index,
                    },
                    hinge,
                });
            }
        }
        TriggeredSet { triplets, nearest }
    }

    pub fn objective(&self, dist: &DMatrix<f64>, alpha: f64, rho: f64) -> ObjectiveParts {
        let nearest = self.nearest_negatives(dist);
        let mut pull = 0.0;
        let mut hinge = 0.0;
        for &(i, j) in &self.positive_pairs {
            let dij = dist[(i, j)];
            let nn = nearest[i].expect("anchor with a positive has a nearest negative");
            pull += dij;
            hinge += (dij - nn.distance + rho).max(0.0);
        }
        ObjectiveParts {
            pull,
            hinge,
            total: (1.0 - alpha) * pull + alpha * hinge,
        }
    }

    /// `Σ w·(x_a − x_b)(x_a − x_b)ᵀ` over weighted index pairs, evaluated as
    /// `Xᵀ L X` with the graph Laplacian `L` of the weights.
    pub fn weighted_outer_sum<I>(&self, edges: I) -> DMatrix<f64>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let n = self.len();
        let mut lap = DMatrix::<f64>::zeros(n, n);
        for (a, b, w) in edges {
            lap[(a, a)] += w;
            lap[(b, b)] += w;
            lap[(a, b)] -= w;
            lap[(b, a)] -= w;
        }
        let lx = &lap * &self.x;
        let s = self.x.transpose() * lx;
        crate::metric::symmetrize(&s)
    }

    /// `Σ X_{i,j}` over all ordered positive pairs.
    pub fn positive_outer_sum(&self) -> DMatrix<f64> {
        self.weighted_outer_sum(self.positive_pairs.iter().map(|&(i, j)| (i, j, 1.0)))
    }

    /// `Σ (X_{i,j} − X_{i,k})` over the given triplets.
    pub fn triplet_outer_sum<'a, I>(&self, triplets: I) -> DMatrix<f64>
    where
        I: IntoIterator<Item = &'a TriggeredTriplet>,
    {
        self.weighted_outer_sum(triplets.into_iter().flat_map(|t| {
            let Triplet {
                anchor,
                positive,
                negative,
            } = t.triplet;
            [(anchor, positive, 1.0), (anchor, negative, -1.0)]
        }))
    }
}

/// Index and distance of the nearest differently-labelled sample to
/// `samples[i]`; ties go to the smaller index.
pub fn min_interclass_distance(
    m: &MetricMatrix,
    samples: &[LabeledSample],
    i: usize,
) -> Result<(usize, f64)> {
    if i >= samples.len() {
        return Err(invalid!("anchor index {i} out of range for {} samples", samples.len()));
    }
    let anchor = &samples[i];
    let mut best: Option<(usize, f64)> = None;
    for (k, s) in samples.iter().enumerate() {
        if s.person_id == anchor.person_id {
            continue;
        }
        let d = crate::metric::mahalanobis_distance(m, &anchor.feature, &s.feature)?;
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((k, d));
        }
    }
    best.ok_or_else(|| protocol!("all samples share label {:?}", anchor.person_id))
}

/// `(1 − α)·Σ D(i,j) + α·Σ max{D(i,j) − min_k D(i,k) + ρ, 0}` over ordered
/// positive pairs.
pub fn objective(m: &MetricMatrix, samples: &[LabeledSample], cfg: &TrainConfig) -> Result<f64> {
    Ok(objective_parts(m, samples, cfg)?.total)
}

pub fn objective_parts(
    m: &MetricMatrix,
    samples: &[LabeledSample],
    cfg: &TrainConfig,
) -> Result<ObjectiveParts> {
    let problem = Problem::new(samples)?;
    let dist = problem.distances(m)?;
    Ok(problem.objective(&dist, cfg.alpha, cfg.rho))
}

pub fn triggered_set(m: &MetricMatrix, samples: &[LabeledSample], rho: f64) -> Result<TriggeredSet> {
    let problem = Problem::new(samples)?;
    let dist = problem.distances(m)?;
    Ok(problem.triggered(&dist, rho))
}

/// `(1 − α)·Σ X_{i,j} + α·Σ_{trig} (X_{i,j} − X_{i,k})`.
pub fn gradient(
    m: &MetricMatrix,
    samples: &[LabeledSample],
    cfg: &TrainConfig,
    trig: &TriggeredSet,
) -> Result<DMatrix<f64>> {
    let problem = Problem::new(samples)?;
    problem.check_metric(m)?;
    let n = problem.len();
    if let Some(t) = trig.triplets.iter().find(|t| {
        let Triplet {
            anchor,
            positive,
            negative,
        } = t.triplet;
        anchor.max(positive).max(negative) >= n
    }) {
        return Err(invalid!("triplet {:?} indexes past {n} samples", t.triplet));
    }
    let pull = problem.positive_outer_sum() * (1.0 - cfg.alpha);
    Ok(pull + problem.triplet_outer_sum(&trig.triplets) * cfg.alpha)
}
