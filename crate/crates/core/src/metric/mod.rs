//! Domain types and the Mahalanobis distance shared by training and matching.
//!
//! Distances are always the squared form `(x - y)ᵀ M (x - y)`.

mod file;

pub(crate) use file::write_atomic_bytes;
pub use file::{decode_metric, encode_metric, export_metric_csv, read_metric, write_metric, METRIC_MAGIC, METRIC_VERSION};

use nalgebra::{Cholesky, DMatrix, DVectorView, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Relative tolerance for the symmetry invariant of [`MetricMatrix`].
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Relative tolerance for the PSD invariant of [`MetricMatrix`].
pub const PSD_TOL: f64 = 1e-8;

/// A real descriptor of one person video (or one frame).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid!("feature vector must have positive dimension"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "feature vector entry {pos} is not finite"
            )));
        }
        Ok(FeatureVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn view(&self) -> DVectorView<'_, f64> {
        DVectorView::from_slice(&self.0, self.0.len())
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        FeatureVector::new(values)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(v: FeatureVector) -> Self {
        v.0
    }
}

/// A feature vector tagged with the person it shows and the camera it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub feature: FeatureVector,
    pub person_id: String,
    pub camera_id: String,
}

impl LabeledSample {
    pub fn new(
        feature: FeatureVector,
        person_id: impl Into<String>,
        camera_id: impl Into<String>,
    ) -> Result<Self> {
        let person_id = person_id.into();
        if person_id.is_empty() {
            return Err(invalid!("person_id must be nonempty"));
        }
        Ok(LabeledSample {
            feature,
            person_id,
            camera_id: camera_id.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.feature.dim()
    }
}

/// Index triple `(anchor, positive, negative)` with
/// `label(anchor) == label(positive)` and `label(negative) != label(anchor)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Symmetric positive semidefinite `d × d` matrix parameterising the distance.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix(DMatrix<f64>);

impl MetricMatrix {
    /// Validates `m` after symmetrising it as `(M + Mᵀ) / 2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(invalid!(
                "metric must be a nonempty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            ));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("metric has non-finite entries".into()));
        }
        let metric = MetricMatrix(symmetrize(&m));
        metric.check_psd()?;
        Ok(metric)
    }

    /// Builds a metric from row-major entries.
    pub fn from_row_slice(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(invalid!(
                "expected {} entries for a {dim}x{dim} metric, got {}",
                dim * dim,
                entries.len()
            ));
        }
        MetricMatrix::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(dim: usize) -> Self {
        MetricMatrix(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        MetricMatrix(DMatrix::zeros(dim, dim))
    }

    /// Wraps a matrix already known to be symmetric PSD (e.g. a projection result).
    pub(crate) fn from_psd_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert!(m.is_square());
        MetricMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.transpose().as_slice().to_vec()
    }

    /// `c · M` for `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(invalid!("metric scale must be finite and nonnegative, got {c}"));
        }
        Ok(MetricMatrix(&self.0 * c))
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let eig = SymmetricEigen::try_new(self.0.clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Numerical("eigendecomposition did not converge".into()))?;
        let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        values.sort_by(f64::total_cmp);
        Ok(values)
    }

    /// Smallest eigenvalue at least `−PSD_TOL · max(max |m_ab|, 1)`, tested
    /// by Cholesky-factorising the shifted matrix (far cheaper than an
    /// eigendecomposition for large `d`).
    fn check_psd(&self) -> Result<()> {
        let d = self.0.nrows();
        let scale = self.0.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        let shifted = &self.0 + DMatrix::identity(d, d) * (PSD_TOL * scale);
        if Cholesky::new(shifted).is_some() {
            return Ok(());
        }
        let lo = self.eigenvalues()?[0];
        Err(Error::Numerical(format!(
            "metric is not positive semidefinite (smallest eigenvalue {lo:e})"
        )))
    }

    /// Re-checks every invariant; used by tests and after deserialisation.
    pub fn check_invariants(&self) -> Result<()> {
        let m = &self.0;
        let d = m.nrows();
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("metric has non-finite entries".into()));
        }
        for a in 0..d {
            for b in (a + 1)..d {
                let (x, y) = (m[(a, b)], m[(b, a)]);
                if (x - y).abs() > SYMMETRY_TOL * x.abs().max(1.0) {
                    return Err(Error::Numerical(format!(
                        "metric is not symmetric at ({a},{b}): {x} vs {y}"
                    )));
                }
            }
        }
        self.check_psd()
    }
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn check_dims(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(invalid!("dimension mismatch in {what}: {a} vs {b}"));
    }
    Ok(())
}

/// `(x_i − x_j)(x_i − x_j)ᵀ`.
pub fn pairwise_diff_outer(xi: &FeatureVector, xj: &FeatureVector) -> Result<DMatrix<f64>> {
    check_dims(xi.dim(), xj.dim(), "pairwise_diff_outer")?;
    let diff = xi.view() - xj.view();
    Ok(&diff * diff.transpose())
}

/// Unclamped quadratic form, for internal comparisons.
pub(crate) fn quadratic_form(m: &MetricMatrix, xi: &[f64], xj: &[f64]) -> f64 {
    let d = xi.len();
    let diff = DVectorView::from_slice(xi, d) - DVectorView::from_slice(xj, d);
    let md = m.as_matrix() * &diff;
    diff.dot(&md)
}

/// `(x_i − x_j)ᵀ M (x_i − x_j)`, clamped at zero.
pub fn mahalanobis_distance(m: &MetricMatrix, xi: &FeatureVector, xj: &FeatureVector) -> Result<f64> {
    check_dims(xi.dim(), xj.dim(), "mahalanobis_distance")?;
    check_dims(m.dim(), xi.dim(), "mahalanobis_distance")?;
    Ok(quadratic_form(m, xi.as_slice(), xj.as_slice()).max(0.0))
}

/// `tr(M X)` for a conformable square `X`.
pub fn trace_form_distance(m: &MetricMatrix, x: &DMatrix<f64>) -> Result<f64> {
    if !x.is_square() {
        return Err(invalid!("trace form needs a square matrix, got {}x{}", x.nrows(), x.ncols()));
    }
    check_dims(m.dim(), x.nrows(), "trace_form_distance")?;
    // tr(MX) = Σ_ab M_ab X_ba without forming the product.
    Ok(m.as_matrix().component_mul(&x.transpose()).sum())
}

/// Stacks sample features as rows of an `n × d` matrix.
pub fn feature_matrix<'a, I>(features: I) -> Result<DMatrix<f64>>
where
    I: IntoIterator<Item = &'a FeatureVector>,
{
    let rows: Vec<&FeatureVector> = features.into_iter().collect();
    let Some(first) = rows.first() else {
        return Err(invalid!("no feature vectors given"));
    };
    let d = first.dim();
    let mut out = DMatrix::zeros(rows.len(), d);
    for (r, fv) in rows.iter().enumerate() {
        check_dims(d, fv.dim(), "feature_matrix")?;
        out.row_mut(r).copy_from_slice(fv.as_slice());
    }
    Ok(out)
}

/// Unclamped distances between every row of `a` and every row of `b`
/// (`a.nrows() × b.nrows()`), under `m`.
///
/// Uses `D(p, g) = (Mp − Mg)·(p − g)`, which costs one `n·d²` product per side
/// instead of `d²` per pair and is exactly antisymmetric-cancelling, so
/// swapping the roles of `p` and `g` gives bitwise the same value.
pub fn cross_distances(m: &MetricMatrix, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dims(a.ncols(), b.ncols(), "cross_distances")?;
    check_dims(m.dim(), a.ncols(), "cross_distances")?;
    let ma = a * m.as_matrix();
    let mb = b * m.as_matrix();
    let (na, nb, d) = (a.nrows(), b.nrows(), a.ncols());
    let rows: Vec<Vec<f64>> = (0..na)
        .into_par_iter()
        .map(|p| {
            (0..nb)
                .map(|g| {
                    let mut acc = 0.0;
                    for c in 0..d {
                        acc += (ma[(p, c)] - mb[(g, c)]) * (a[(p, c)] - b[(g, c)]);
                    }
                    acc
                })
                .collect()
        })
        .collect();
    Ok(DMatrix::from_fn(na, nb, |p, g| rows[p][g]))
}

/// [`cross_distances`] of a sample set with itself.
pub fn pairwise_distances(m: &MetricMatrix, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    cross_distances(m, x, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    fn m2(rows: [[f64; 2]; 2]) -> MetricMatrix {
        MetricMatrix::from_row_slice(2, &[rows[0][0], rows[0][1], rows[1][0], rows[1][1]]).unwrap()
    }

    #[test]
    fn outer_of_equal_vectors_is_zero() {
        let x = fv(&[1.5, -2.0, 3.0]);
        assert_eq!(pairwise_diff_outer(&x, &x).unwrap(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn outer_examples() {
        let o = pairwise_diff_outer(&fv(&[1.0, 0.0]), &fv(&[0.0, 0.0])).unwrap();
        assert_eq!(o, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let o = pairwise_diff_outer(&fv(&[2.0, 1.0]), &fv(&[0.0, -1.0])).unwrap();
        assert_eq!(o, DMatrix::from_row_slice(2, 2, &[4.0, 4.0, 4.0, 4.0]));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = fv(&[1.0, 2.0]);
        let b = fv(&[1.0, 2.0, 3.0]);
        assert!(matches!(pairwise_diff_outer(&a, &b), Err(Error::InvalidInput(_))));
        let m = MetricMatrix::identity(2);
        assert!(matches!(mahalanobis_distance(&m, &a, &b), Err(Error::InvalidInput(_))));
        assert!(matches!(
            mahalanobis_distance(&MetricMatrix::identity(3), &a, &a),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            trace_form_distance(&m, &DMatrix::zeros(3, 3)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn mahalanobis_examples() {
        let id = MetricMatrix::identity(2);
        assert_eq!(mahalanobis_distance(&id, &fv(&[3.0, 4.0]), &fv(&[0.0, 0.0])).unwrap(), 25.0);
        let x = fv(&[0.3, -7.0]);
        assert_eq!(mahalanobis_distance(&id, &x, &x).unwrap(), 0.0);
        let m = m2([[2.0, 0.0], [0.0, 1.0]]);
        assert_eq!(mahalanobis_distance(&m, &fv(&[1.0, 1.0]), &fv(&[0.0, 0.0])).unwrap(), 3.0);
    }

    #[test]
    fn trace_form_examples() {
        let id = MetricMatrix::identity(2);
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(trace_form_distance(&id, &x).unwrap(), 1.0);
        assert_eq!(trace_form_distance(&id, &DMatrix::zeros(2, 2)).unwrap(), 0.0);
        let m = m2([[1.0, 1.0], [1.0, 2.0]]);
        let x = DMatrix::from_element(2, 2, 4.0);
        assert_eq!(trace_form_distance(&m, &x).unwrap(), 20.0);
    }

    #[test]
    fn constructor_symmetrizes_and_rejects_bad_input() {
        let m = MetricMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0])).unwrap();
        assert_eq!(m.get(0, 1), 0.1);
        assert_eq!(m.get(1, 0), 0.1);
        let neg = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(MetricMatrix::new(neg), Err(Error::Numerical(_))));
        let nan = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(matches!(MetricMatrix::new(nan), Err(Error::Numerical(_))));
        assert!(matches!(
            MetricMatrix::new(DMatrix::zeros(2, 3)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn feature_vector_rejects_non_finite() {
        assert!(FeatureVector::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(FeatureVector::new(vec![]).is_err());
        assert!(LabeledSample::new(fv(&[1.0]), "", "cam").is_err());
    }

    fn random_psd(d: usize, seed: &[f64]) -> MetricMatrix {
        let a = DMatrix::from_fn(d, d, |r, c| seed[(r * d + c) % seed.len()] * (1.0 + r as f64));
        MetricMatrix::new(&a * a.transpose()).unwrap()
    }

    proptest! {
        #[test]
        fn quadratic_and_trace_forms_agree(
            vals in proptest::collection::vec(-3.0f64..3.0, 16),
            x in proptest::collection::vec(-5.0f64..5.0, 4),
            y in proptest::collection::vec(-5.0f64..5.0, 4),
        ) {
            let m = random_psd(4, &vals);
            let (x, y) = (fv(&x), fv(&y));
            let q = quadratic_form(&m, x.as_slice(), y.as_slice());
            let t = trace_form_distance(&m, &pairwise_diff_outer(&x, &y).unwrap()).unwrap();
            prop_assert!((q - t).abs() <= 1e-9 * q.abs().max(1.0));
            prop_assert!(q >= -1e-9);
            prop_assert!(mahalanobis_distance(&m, &x, &y).unwrap() >= 0.0);
        }

        #[test]
        fn distance_is_symmetric_and_scale_equivariant(
            vals in proptest::collection::vec(-3.0f64..3.0, 9),
            x in proptest::collection::vec(-5.0f64..5.0, 3),
            y in proptest::collection::vec(-5.0f64..5.0, 3),
            c in 0.01f64..100.0,
        ) {
            let m = random_psd(3, &vals);
            let (x, y) = (fv(&x), fv(&y));
            let dxy = mahalanobis_distance(&m, &x, &y).unwrap();
            prop_assert_eq!(dxy, mahalanobis_distance(&m, &y, &x).unwrap());
            let scaled = mahalanobis_distance(&m.scaled(c).unwrap(), &x, &y).unwrap();
            prop_assert!((scaled - c * dxy).abs() <= 1e-9 * (c * dxy).max(1e-300));
        }

        #[test]
        fn cross_distances_match_quadratic_form(
            vals in proptest::collection::vec(-2.0f64..2.0, 9),
            pts in proptest::collection::vec(-4.0f64..4.0, 15),
        ) {
            let m = random_psd(3, &vals);
            let x = DMatrix::from_row_slice(5, 3, &pts);
            let all = pairwise_distances(&m, &x).unwrap();
            for i in 0..5 {
                for j in 0..5 {
                    let a: Vec<f64> = x.row(i).iter().copied().collect();
                    let b: Vec<f64> = x.row(j).iter().copied().collect();
                    let q = quadratic_form(&m, &a, &b);
                    prop_assert!((all[(i, j)] - q).abs() <= 1e-9 * q.abs().max(1.0));
                    prop_assert_eq!(all[(i, j)], all[(j, i)]);
                }
            }
        }
    }
}
