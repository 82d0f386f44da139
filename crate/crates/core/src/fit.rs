//! Per-movie least squares for attribute weights, the assembled model, and
//! RMSE evaluation.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::center::{CenteredRatings, Edge};
use crate::dataset::{Partition, RatingsDataset};
use crate::error::{Error, Result};

/// Ridge added to every per-movie normal matrix.
pub const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    /// Global indices of the movies the bits were trained on.
    pub training_subset: Vec<u32>,
    pub config_hash: u64,
}

/// Viewer bit-vectors, movie weight-vectors and the means removed before
/// training.
#[derive(Debug, Clone, PartialEq)]
pub struct BarModel {
    pub d: usize,
    pub viewer_ids: Vec<String>,
    pub movie_ids: Vec<String>,
    pub titles: Vec<Option<String>>,
    /// Row-major `viewers × d`, each entry 0 or 1.
    pub bits: Vec<u8>,
    /// Row-major `movies × d`, stars per bit.
    pub weights: Vec<f64>,
    pub movie_means: Vec<f64>,
    pub viewer_means: Vec<f64>,
    pub global_mean: f64,
    pub provenance: Provenance,
}

impl BarModel {
    pub fn num_viewers(&self) -> usize {
        self.viewer_ids.len()
    }

    pub fn num_movies(&self) -> usize {
        self.movie_ids.len()
    }

    pub fn viewer_bits(&self, viewer: usize) -> &[u8] {
        &self.bits[viewer * self.d..(viewer + 1) * self.d]
    }

    pub fn movie_weights(&self, movie: usize) -> &[f64] {
        &self.weights[movie * self.d..(movie + 1) * self.d]
    }

    /// Column `attribute` of the weight matrix.
    pub fn attribute_weights(&self, attribute: usize) -> Vec<f64> {
        self.weights
            .chunks_exact(self.d)
            .map(|w| w[attribute])
            .collect()
    }

    /// Checks shapes and value domains.
    pub fn validate(&self) -> Result<()> {
        let (nv, nm, d) = (self.num_viewers(), self.num_movies(), self.d);
        if nv == 0 {
            return Err(Error::Empty("viewer set"));
        }
        if d == 0 {
            return Err(Error::Dimension("d must be at least 1".into()));
        }
        let checks = [
            ("bits", self.bits.len(), nv * d),
            ("weights", self.weights.len(), nm * d),
            ("movie means", self.movie_means.len(), nm),
            ("viewer means", self.viewer_means.len(), nv),
            ("titles", self.titles.len(), nm),
        ];
        for (what, got, want) in checks {
            if got != want {
                return Err(Error::Dimension(format!("{what}: {got} values, expected {want}")));
            }
        }
        if self.bits.iter().any(|&b| b > 1) {
            return Err(Error::Format("bits must be 0 or 1".into()));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Format("non-finite weight".into()));
        }
        Ok(())
    }

    /// `movie_mean + viewer_mean + b_v · w_m`. An unknown viewer (`None` or
    /// out of range) falls back to the movie mean, an unknown movie to the
    /// global train mean.
    pub fn predict(&self, viewer: Option<usize>, movie: Option<usize>, clamp: bool) -> f64 {
        let viewer = viewer.filter(|&v| v < self.num_viewers());
        let movie = movie.filter(|&m| m < self.num_movies());
        let p = match (viewer, movie) {
            (_, None) => self.global_mean,
            (None, Some(m)) => self.movie_means[m],
            (Some(v), Some(m)) => {
                self.movie_means[m]
                    + self.viewer_means[v]
                    + dot_bits(self.viewer_bits(v), self.movie_weights(m))
            }
        };
        if clamp {
            p.clamp(1.0, 5.0)
        } else {
            p
        }
    }
}

pub(crate) fn dot_bits(bits: &[u8], weights: &[f64]) -> f64 {
    bits.iter()
        .zip(weights)
        .filter(|(&b, _)| b != 0)
        .map(|(_, &w)| w)
        .sum()
}

/// Solves, for every movie, the ridge-regularized normal equations
/// `(BᵀB + εI) w = Bᵀr` over that movie's train raters. `bits` is row-major
/// `viewers × d`. Movies without raters get zero weights.
pub fn fit_weights(bits: &[u8], d: usize, centered: &CenteredRatings) -> Result<Vec<f64>> {
    if d == 0 || bits.len() != centered.num_viewers() * d {
        return Err(Error::Dimension(format!(
            "{} bits for {} viewers with d={d}",
            bits.len(),
            centered.num_viewers()
        )));
    }
    let train = centered.train();
    let mut weights = vec![0.0; centered.num_movies() * d];
    weights
        .par_chunks_mut(d)
        .enumerate()
        .for_each(|(m, w)| {
            let raters = centered.movie_edge_indices(m);
            if raters.is_empty() {
                return;
            }
            let rows = raters.iter().map(|&i| {
                let e = &train[i];
                let v = e.viewer as usize;
                (&bits[v * d..(v + 1) * d], e.residual)
            });
            w.copy_from_slice(&solve_movie(rows, d));
        });
    Ok(weights)
}

/// Least squares for one movie given its raters' `(bits, residual)` rows.
pub fn solve_movie<'a>(rows: impl Iterator<Item = (&'a [u8], f64)>, d: usize) -> Vec<f64> {
    let mut a = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    for (b, r) in rows {
        for i in (0..d).filter(|&i| b[i] != 0) {
            rhs[i] += r;
            for j in (0..d).filter(|&j| b[j] != 0) {
                a[i * d + j] += 1.0;
            }
        }
    }
    for i in 0..d {
        a[i * d + i] += RIDGE;
    }
    cholesky_solve(&mut a, &mut rhs, d);
    rhs
}

/// In-place Cholesky solve of a symmetric positive definite system.
fn cholesky_solve(a: &mut [f64], b: &mut [f64], n: usize) {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        let diag = diag.max(f64::MIN_POSITIVE).sqrt();
        a[j * n + j] = diag;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / diag;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
}

/// Σ over the movie's train raters of `(r − b·w)²`, with `weights` the
/// full row-major `movies × d` matrix.
pub fn movie_sse(bits: &[u8], d: usize, weights: &[f64], centered: &CenteredRatings, movie: usize) -> f64 {
    centered
        .movie_edge_indices(movie)
        .iter()
        .map(|&i| {
            let e = &centered.train()[i];
            let v = e.viewer as usize;
            let err = e.residual - dot_bits(&bits[v * d..(v + 1) * d], &weights[movie * d..(movie + 1) * d]);
            err * err
        })
        .sum()
}

/// Packages bits, weights and the dataset's means and ids into a model.
pub fn assemble(
    bits: Vec<u8>,
    d: usize,
    weights: Vec<f64>,
    dataset: &RatingsDataset,
    centered: &CenteredRatings,
    provenance: Provenance,
) -> Result<BarModel> {
    if dataset.num_viewers() != centered.num_viewers() || dataset.num_movies() != centered.num_movies() {
        return Err(Error::Dimension("dataset and centered ratings disagree".into()));
    }
    let model = BarModel {
        d,
        viewer_ids: dataset.viewers().to_vec(),
        movie_ids: dataset.movies().to_vec(),
        titles: dataset.titles().to_vec(),
        bits,
        weights,
        movie_means: centered.movie_means.clone(),
        viewer_means: centered.viewer_means.clone(),
        global_mean: centered.global_mean,
        provenance,
    };
    model.validate()?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub partition: Partition,
    pub edges: usize,
    pub rmse: f64,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "partition,edges,rmse";

    pub fn to_csv_record(&self) -> String {
        format!("{},{},{}", self.partition, self.edges, self.rmse)
    }
}

/// RMSE between predictions and raw stars over one partition. Entities are
/// matched by id, so the dataset need not share the model's index order.
pub fn evaluate(model: &BarModel, dataset: &RatingsDataset, partition: Partition) -> Result<EvalReport> {
    let viewer_of: HashMap<&str, usize> = model
        .viewer_ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let movie_of: HashMap<&str, usize> = model
        .movie_ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let vmap: Vec<Option<usize>> = dataset
        .viewers()
        .iter()
        .map(|id| viewer_of.get(id.as_str()).copied())
        .collect();
    let mmap: Vec<Option<usize>> = dataset
        .movies()
        .iter()
        .map(|id| movie_of.get(id.as_str()).copied())
        .collect();

    let mut sum = 0.0;
    let mut n = 0usize;
    for e in dataset.entries().iter().filter(|e| e.partition == partition) {
        let p = model.predict(vmap[e.viewer as usize], mmap[e.movie as usize], false);
        sum += (e.stars - p) * (e.stars - p);
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty("evaluation partition"));
    }
    Ok(EvalReport {
        partition,
        edges: n,
        rmse: (sum / n as f64).sqrt(),
    })
}

/// The centered-space objective: RMS of `r − b_v·w_m` over `edges`.
pub fn centered_rmse(bits: &[u8], d: usize, weights: &[f64], edges: &[Edge]) -> f64 {
    crate::center::rms(edges.iter().map(|e| {
        let (v, m) = (e.viewer as usize, e.movie as usize);
        e.residual - dot_bits(&bits[v * d..(v + 1) * d], &weights[m * d..(m + 1) * d])
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::center::center;
    use crate::dataset::DatasetBuilder;

    fn centered_from(edges: Vec<Edge>, nv: usize, nm: usize) -> CenteredRatings {
        CenteredRatings::from_parts(vec![0.0; nm], vec![0.0; nv], 0.0, edges, vec![]).unwrap()
    }

    fn edge(v: u32, m: u32, r: f64) -> Edge {
        Edge { viewer: v, movie: m, stars: r, residual: r }
    }

    #[test]
    fn one_bit_least_squares() {
        let c = centered_from(vec![edge(0, 0, 0.8), edge(1, 0, -0.3)], 2, 1);
        let w = fit_weights(&[1, 0], 1, &c).unwrap();
        assert!((w[0] - 0.8 / (1.0 + RIDGE)).abs() < 1e-15);
    }

    #[test]
    fn zero_bits_give_zero_weights() {
        let c = centered_from(vec![edge(0, 0, 0.8), edge(1, 0, -0.3), edge(1, 1, 1.0)], 2, 3);
        let w = fit_weights(&[0, 0, 0, 0], 2, &c).unwrap();
        assert!(w.iter().all(|&x| x == 0.0));
        assert!(fit_weights(&[0, 0, 0], 2, &c).is_err());
    }

    #[test]
    fn rank_deficient_system_stays_bounded() {
        // both bits identical for every rater
        let c = centered_from(vec![edge(0, 0, 1.0), edge(1, 0, 1.0)], 2, 1);
        let w = fit_weights(&[1, 1, 1, 1], 2, &c).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-6 && (w[1] - 0.5).abs() < 1e-6);
    }

    fn small_model() -> (BarModel, RatingsDataset) {
        let mut b = DatasetBuilder::new();
        for (v, m, s) in [("a", "x", 4.0), ("a", "y", 2.0), ("b", "x", 3.0)] {
            b.push(v, m, s, Partition::Train).unwrap();
        }
        b.push("b", "y", 5.0, Partition::Probe).unwrap();
        let ds = b.finish();
        let c = center(&ds).unwrap();
        let model = assemble(vec![1, 0], 1, vec![0.5, -0.25], &ds, &c, Provenance::default()).unwrap();
        (model, ds)
    }

    #[test]
    fn predict_arithmetic_and_fallbacks() {
        let (mut model, _) = small_model();
        model.movie_means = vec![3.0, 2.0];
        model.viewer_means = vec![0.2, -0.1];
        assert!((model.predict(Some(0), Some(0), false) - 3.7).abs() < 1e-15);
        assert_eq!(model.predict(Some(1), Some(0), false), 3.0 - 0.1);
        assert_eq!(model.predict(None, Some(1), false), 2.0);
        assert_eq!(model.predict(Some(9), Some(1), false), 2.0);
        assert_eq!(model.predict(Some(0), None, false), model.global_mean);
        model.weights[0] = 10.0;
        assert_eq!(model.predict(Some(0), Some(0), true), 5.0);
    }

    #[test]
    fn assemble_rejects_bad_shapes() {
        let (model, ds) = small_model();
        let c = center(&ds).unwrap();
        assert!(assemble(vec![1, 0], 2, model.weights.clone(), &ds, &c, Provenance::default()).is_err());
        assert!(assemble(vec![1, 2], 1, model.weights.clone(), &ds, &c, Provenance::default()).is_err());
        let empty = RatingsDataset::default();
        let c0 = CenteredRatings::from_parts(vec![], vec![], 0.0, vec![], vec![]).unwrap();
        assert!(matches!(
            assemble(vec![], 1, vec![], &empty, &c0, Provenance::default()),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn evaluate_partitions() {
        let (model, ds) = small_model();
        let train = evaluate(&model, &ds, Partition::Train).unwrap();
        assert_eq!(train.edges, 3);
        let probe = evaluate(&model, &ds, Partition::Probe).unwrap();
        assert_eq!(probe.edges, 1);
        assert_eq!(train.to_csv_record().split(',').count(), 3);

        let mut b = DatasetBuilder::new();
        b.push("a", "x", 4.0, Partition::Train).unwrap();
        assert!(evaluate(&model, &b.finish(), Partition::Probe).is_err());
    }

    #[test]
    fn zero_bit_model_rmse_is_residual_rms() {
        let (mut model, ds) = small_model();
        model.bits = vec![0, 0];
        let c = center(&ds).unwrap();
        let report = evaluate(&model, &ds, Partition::Train).unwrap();
        assert!((report.rmse - c.residual_rms()).abs() < 1e-12);
    }
}
