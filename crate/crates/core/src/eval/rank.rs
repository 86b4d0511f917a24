//! Gallery ranking under a learned metric or a fixed baseline distance.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::metric::{cross_distances, feature_matrix, LabeledSample, MetricMatrix};

/// How probe/gallery distances are measured.
#[derive(Debug, Clone)]
pub enum Ranker {
    Metric(MetricMatrix),
    /// Squared Euclidean distance.
    Euclidean,
    /// `Σ |p − g|`.
    L1,
}

impl Ranker {
    /// `probes × gallery` distance matrix (unclamped for [`Ranker::Metric`]).
    pub fn distances(&self, probes: &[LabeledSample], gallery: &[LabeledSample]) -> Result<DMatrix<f64>> {
        if gallery.is_empty() || probes.is_empty() {
            return Err(invalid!("probe and gallery sets must be nonempty"));
        }
        let p = feature_matrix(probes.iter().map(|s| &s.feature))?;
        let g = feature_matrix(gallery.iter().map(|s| &s.feature))?;
        if p.ncols() != g.ncols() {
            return Err(invalid!(
                "dimension mismatch: probes {} vs gallery {}",
                p.ncols(),
                g.ncols()
            ));
        }
        match self {
            Ranker::Metric(m) => cross_distances(m, &p, &g),
            Ranker::Euclidean => Ok(DMatrix::from_fn(p.nrows(), g.nrows(), |i, j| {
                p.row(i)
                    .iter()
                    .zip(g.row(j).iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum()
            })),
            Ranker::L1 => Ok(DMatrix::from_fn(p.nrows(), g.nrows(), |i, j| {
                p.row(i).iter().zip(g.row(j).iter()).map(|(a, b)| (a - b).abs()).sum()
            })),
        }
    }
}

/// Gallery indices ordered by ascending distance, ties by index.
pub fn order_by_distance(dist: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    order
}

/// Gallery indices sorted by `D(probe, g)` under `m`.
pub fn rank_gallery(m: &MetricMatrix, probe: &LabeledSample, gallery: &[LabeledSample]) -> Result<Vec<usize>> {
    let d = Ranker::Metric(m.clone()).distances(std::slice::from_ref(probe), gallery)?;
    Ok(order_by_distance(d.row(0).transpose().as_slice()))
}

/// Gallery indices sorted by L1 distance to the probe.
pub fn l1_rank_gallery(probe: &LabeledSample, gallery: &[LabeledSample]) -> Result<Vec<usize>> {
    let d = Ranker::L1.distances(std::slice::from_ref(probe), gallery)?;
    Ok(order_by_distance(d.row(0).transpose().as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::FeatureVector;
    use proptest::prelude::*;

    fn s(v: &[f64], id: &str) -> LabeledSample {
        LabeledSample::new(FeatureVector::new(v.to_vec()).unwrap(), id, "cam_b").unwrap()
    }

    fn line_gallery() -> Vec<LabeledSample> {
        vec![s(&[3.0], "a"), s(&[-1.0], "b"), s(&[2.0], "c")]
    }

    #[test]
    fn one_dimensional_orders() {
        let probe = s(&[0.0], "x");
        let id = MetricMatrix::identity(1);
        assert_eq!(rank_gallery(&id, &probe, &line_gallery()).unwrap(), vec![1, 2, 0]);
        assert_eq!(l1_rank_gallery(&probe, &line_gallery()).unwrap(), vec![1, 2, 0]);
    }

    #[test]
    fn exact_copy_ranks_first_and_ties_by_index() {
        let probe = s(&[0.4, 1.0], "x");
        let gallery = vec![s(&[5.0, 5.0], "a"), s(&[0.4, 1.0], "b"), s(&[0.4, 1.0], "c")];
        let m = MetricMatrix::identity(2);
        assert_eq!(rank_gallery(&m, &probe, &gallery).unwrap()[0], 1);
        assert_eq!(l1_rank_gallery(&probe, &gallery).unwrap(), vec![1, 2, 0]);
    }

    #[test]
    fn zero_metric_keeps_gallery_order() {
        let probe = s(&[0.0], "x");
        assert_eq!(
            rank_gallery(&MetricMatrix::zeros(1), &probe, &line_gallery()).unwrap(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn dimension_mismatch() {
        let probe = s(&[0.0, 1.0], "x");
        assert!(rank_gallery(&MetricMatrix::identity(1), &probe, &line_gallery()).is_err());
        assert!(l1_rank_gallery(&probe, &line_gallery()).is_err());
        assert!(l1_rank_gallery(&probe, &[]).is_err());
    }

    proptest! {
        #[test]
        fn ordering_invariant_under_scaling_and_translation(
            vals in proptest::collection::vec(-3.0f64..3.0, 9),
            pts in proptest::collection::vec(-10.0f64..10.0, 24),
            shift in proptest::collection::vec(-4.0f64..4.0, 3),
            exp in -6i32..6,
        ) {
            let a = DMatrix::from_row_slice(3, 3, &vals);
            let m = MetricMatrix::new(&a * a.transpose() + DMatrix::identity(3, 3)).unwrap();
            let samples: Vec<LabeledSample> = pts.chunks(3).map(|c| s(c, "g")).collect();
            let (probe, gallery) = samples.split_first().unwrap();
            let base = rank_gallery(&m, probe, gallery).unwrap();
            // Power-of-two scales are exact, so the order must not move at all.
            let c = 2f64.powi(exp);
            prop_assert_eq!(&rank_gallery(&m.scaled(c).unwrap(), probe, gallery).unwrap(), &base);

            let moved = |x: &LabeledSample| {
                let v: Vec<f64> = x.feature.as_slice().iter().zip(&shift).map(|(a, b)| a + b).collect();
                s(&v, "g")
            };
            let probe2 = moved(probe);
            let gallery2: Vec<LabeledSample> = gallery.iter().map(moved).collect();
            let d1 = Ranker::Metric(m.clone()).distances(std::slice::from_ref(probe), gallery).unwrap();
            let d2 = Ranker::Metric(m.clone()).distances(std::slice::from_ref(&probe2), &gallery2).unwrap();
            for (x, y) in d1.iter().zip(d2.iter()) {
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }

            let l1 = l1_rank_gallery(probe, gallery).unwrap();
            let scaled = |x: &LabeledSample| {
                let v: Vec<f64> = x.feature.as_slice().iter().map(|a| a * c).collect();
                s(&v, "g")
            };
            let gallery3: Vec<LabeledSample> = gallery.iter().map(scaled).collect();
            prop_assert_eq!(l1_rank_gallery(&scaled(probe), &gallery3).unwrap(), l1);
        }
    }
}
