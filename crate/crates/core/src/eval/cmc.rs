use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::rank::Ranker;
use crate::error::{invalid, protocol, Result};
use crate::metric::{LabeledSample, MetricMatrix};

/// Cumulative matching rates; `rates[k - 1]` is the rank-`k` rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmcCurve {
    pub rates: Vec<f64>,
}

impl CmcCurve {
    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    /// Rank-`k` rate (1-based); ranks past the gallery size saturate.
    pub fn at_rank(&self, k: usize) -> f64 {
        assert!(k >= 1, "ranks are 1-based");
        self.rates[(k - 1).min(self.rates.len() - 1)]
    }

    /// Builds the curve from the 0-based rank of each probe's true match.
    pub fn from_match_ranks(ranks: &[usize], gallery_size: usize) -> Result<Self> {
        if ranks.is_empty() || gallery_size == 0 {
            return Err(invalid!("a CMC curve needs at least one probe and one gallery entry"));
        }
        let mut hits = vec![0usize; gallery_size];
        for &r in ranks {
            if r >= gallery_size {
                return Err(invalid!("match rank {r} outside gallery of {gallery_size}"));
            }
            hits[r] += 1;
        }
        let n = ranks.len() as f64;
        let mut acc = 0;
        let rates = hits
            .into_iter()
            .map(|h| {
                acc += h;
                acc as f64 / n
            })
            .collect();
        Ok(CmcCurve { rates })
    }
}

/// Mean of the per-rank rates.
pub fn auc_cmc(curve: &CmcCurve) -> Result<f64> {
    if curve.is_empty() {
        return Err(invalid!("cannot take the area of an empty CMC curve"));
    }
    Ok(curve.rates.iter().sum::<f64>() / curve.len() as f64)
}

/// Index in `gallery` of each probe's identity, which must occur exactly once.
pub fn match_indices(probes: &[LabeledSample], gallery: &[LabeledSample]) -> Result<Vec<usize>> {
    probes
        .iter()
        .map(|p| {
            let mut hits = gallery
                .iter()
                .enumerate()
                .filter(|(_, g)| g.person_id == p.person_id)
                .map(|(i, _)| i);
            match (hits.next(), hits.next()) {
                (Some(i), None) => Ok(i),
                (None, _) => Err(protocol!("probe identity {:?} is absent from the gallery", p.person_id)),
                (Some(_), Some(_)) => Err(protocol!(
                    "probe identity {:?} occurs more than once in the gallery",
                    p.person_id
                )),
            }
        })
        .collect()
}

/// 0-based position of `truth` when the row is ordered by distance, ties by
/// index.
pub fn match_rank(dist_row: &[f64], truth: usize) -> usize {
    let t = dist_row[truth];
    dist_row
        .iter()
        .enumerate()
        .filter(|&(g, &d)| d < t || (d == t && g < truth))
        .count()
}

pub fn cmc_from_distances(dist: &DMatrix<f64>, truth: &[usize]) -> Result<CmcCurve> {
    let ranks: Vec<usize> = truth
        .iter()
        .enumerate()
        .map(|(p, &t)| {
            let row: Vec<f64> = dist.row(p).iter().copied().collect();
            match_rank(&row, t)
        })
        .collect();
    CmcCurve::from_match_ranks(&ranks, dist.ncols())
}

pub fn cmc_with(ranker: &Ranker, probes: &[LabeledSample], gallery: &[LabeledSample]) -> Result<CmcCurve> {
    let truth = match_indices(probes, gallery)?;
    let dist = ranker.distances(probes, gallery)?;
    cmc_from_distances(&dist, &truth)
}

/// Single-shot CMC of `probes` against `gallery` under `m`.
pub fn cmc(m: &MetricMatrix, probes: &[LabeledSample], gallery: &[LabeledSample]) -> Result<CmcCurve> {
    cmc_with(&Ranker::Metric(m.clone()), probes, gallery)
}
