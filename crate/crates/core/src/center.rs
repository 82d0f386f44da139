//! Two-stage centering: movie means first, then viewer means of what is left.

use crate::dataset::{Partition, RatingsDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub viewer: u32,
    pub movie: u32,
    pub stars: f64,
    pub residual: f64,
}

/// Residual ratings `r_vm` with the means that were removed from them.
///
/// Means come from the train partition only. Probe edges carry residuals
/// computed with those same means. Train edges are sorted by viewer, then
/// movie.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredRatings {
    pub movie_means: Vec<f64>,
    pub viewer_means: Vec<f64>,
    /// Mean of all train stars, used for movies never seen in training.
    pub global_mean: f64,
    train: Vec<Edge>,
    probe: Vec<Edge>,
    viewer_offsets: Vec<usize>,
    movie_offsets: Vec<usize>,
    movie_edges: Vec<usize>,
}

impl CenteredRatings {
    /// Rebuilds the index structures around stored means and edges.
    pub fn from_parts(
        movie_means: Vec<f64>,
        viewer_means: Vec<f64>,
        global_mean: f64,
        mut train: Vec<Edge>,
        probe: Vec<Edge>,
    ) -> Result<Self> {
        let (nv, nm) = (viewer_means.len(), movie_means.len());
        for e in train.iter().chain(&probe) {
            if e.viewer as usize >= nv || e.movie as usize >= nm {
                return Err(Error::Format("edge index out of range".into()));
            }
        }
        train.sort_by_key(|e| (e.viewer, e.movie));

        let mut viewer_offsets = vec![0usize; nv + 1];
        for e in &train {
            viewer_offsets[e.viewer as usize + 1] += 1;
        }
        for v in 0..nv {
            viewer_offsets[v + 1] += viewer_offsets[v];
        }
        let (movie_offsets, movie_edges) = bucket(nm, train.iter().map(|e| e.movie as usize));

        Ok(CenteredRatings {
            movie_means,
            viewer_means,
            global_mean,
            train,
            probe,
            viewer_offsets,
            movie_offsets,
            movie_edges,
        })
    }

    pub fn num_viewers(&self) -> usize {
        self.viewer_means.len()
    }

    pub fn num_movies(&self) -> usize {
        self.movie_means.len()
    }

    /// Train edge count, the `N` of the RMSE objective.
    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    pub fn train(&self) -> &[Edge] {
        &self.train
    }

    pub fn probe(&self) -> &[Edge] {
        &self.probe
    }

    pub fn edges(&self, partition: Partition) -> &[Edge] {
        match partition {
            Partition::Train => &self.train,
            Partition::Probe => &self.probe,
        }
    }

    pub fn viewer_edges(&self, viewer: usize) -> &[Edge] {
        &self.train[self.viewer_offsets[viewer]..self.viewer_offsets[viewer + 1]]
    }

    /// Indices into [`Self::train`] of the movie's raters.
    pub fn movie_edge_indices(&self, movie: usize) -> &[usize] {
        &self.movie_edges[self.movie_offsets[movie]..self.movie_offsets[movie + 1]]
    }

    pub fn residual_rms(&self) -> f64 {
        rms(self.train.iter().map(|e| e.residual))
    }

    /// View over every movie.
    pub fn full_view(&self) -> Result<TrainingView> {
        let all: Vec<usize> = (0..self.num_movies()).collect();
        self.restrict(&all)
    }

    /// View exposing only train edges whose movie is in `movies`. Means are
    /// not recomputed. Every viewer stays present, possibly with no edges.
    pub fn restrict(&self, movies: &[usize]) -> Result<TrainingView> {
        if movies.is_empty() {
            return Err(Error::Empty("movie subset"));
        }
        let mut subset = movies.to_vec();
        subset.sort_unstable();
        subset.dedup();
        if let Some(&m) = subset.iter().find(|&&m| m >= self.num_movies()) {
            return Err(Error::InvalidArgument(format!(
                "movie index {m} out of range ({} movies)",
                self.num_movies()
            )));
        }
        let mut local = vec![u32::MAX; self.num_movies()];
        for (i, &m) in subset.iter().enumerate() {
            local[m] = i as u32;
        }

        let nv = self.num_viewers();
        let mut edges = Vec::new();
        let mut viewer_offsets = Vec::with_capacity(nv + 1);
        viewer_offsets.push(0);
        for v in 0..nv {
            for e in self.viewer_edges(v) {
                let lm = local[e.movie as usize];
                if lm != u32::MAX {
                    edges.push(ViewEdge {
                        viewer: e.viewer,
                        movie: lm,
                        residual: e.residual,
                    });
                }
            }
            viewer_offsets.push(edges.len());
        }
        let (movie_offsets, movie_edges) =
            bucket(subset.len(), edges.iter().map(|e| e.movie as usize));

        Ok(TrainingView {
            num_viewers: nv,
            movies: subset.into_iter().map(|m| m as u32).collect(),
            edges,
            viewer_offsets,
            movie_offsets,
            movie_edges,
        })
    }
}

/// Counting-sort of item indices into `n` buckets, returned as CSR.
fn bucket(n: usize, keys: impl Iterator<Item = usize> + Clone) -> (Vec<usize>, Vec<usize>) {
    let mut offsets = vec![0usize; n + 1];
    for k in keys.clone() {
        offsets[k + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut items = vec![0usize; offsets[n]];
    for (i, k) in keys.enumerate() {
        items[fill[k]] = i;
        fill[k] += 1;
    }
    (offsets, items)
}

pub(crate) fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewEdge {
    pub viewer: u32,
    /// Position of the movie within [`TrainingView::movies`].
    pub movie: u32,
    pub residual: f64,
}

/// The training edges seen by the solver: all viewers, a subset of movies
/// re-indexed densely. Edges are sorted by viewer, then local movie.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingView {
    num_viewers: usize,
    movies: Vec<u32>,
    edges: Vec<ViewEdge>,
    viewer_offsets: Vec<usize>,
    movie_offsets: Vec<usize>,
    movie_edges: Vec<usize>,
}

impl TrainingView {
    pub fn num_viewers(&self) -> usize {
        self.num_viewers
    }

    pub fn num_movies(&self) -> usize {
        self.movies.len()
    }

    /// Global movie index of each local movie.
    pub fn movies(&self) -> &[u32] {
        &self.movies
    }

    pub fn edges(&self) -> &[ViewEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn viewer_range(&self, viewer: usize) -> std::ops::Range<usize> {
        self.viewer_offsets[viewer]..self.viewer_offsets[viewer + 1]
    }

    pub fn viewer_edges(&self, viewer: usize) -> &[ViewEdge] {
        &self.edges[self.viewer_range(viewer)]
    }

    pub fn movie_edge_indices(&self, movie: usize) -> &[usize] {
        &self.movie_edges[self.movie_offsets[movie]..self.movie_offsets[movie + 1]]
    }

    pub fn residual_rms(&self) -> f64 {
        rms(self.edges.iter().map(|e| e.residual))
    }

    /// Builds a view directly from local edges; mainly for tests and
    /// synthetic problems that never pass through a dataset.
    pub fn from_edges(
        num_viewers: usize,
        num_movies: usize,
        edges: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let train = edges
            .iter()
            .map(|&(v, m, r)| Edge {
                viewer: v as u32,
                movie: m as u32,
                stars: r,
                residual: r,
            })
            .collect();
        let centered = CenteredRatings::from_parts(
            vec![0.0; num_movies],
            vec![0.0; num_viewers],
            0.0,
            train,
            Vec::new(),
        )?;
        centered.full_view()
    }
}

/// Removes each movie's mean rating, then each viewer's mean of the
/// remaining values, over the train partition.
///
/// Movies or viewers without train ratings get mean 0.
pub fn center(dataset: &RatingsDataset) -> Result<CenteredRatings> {
    let nv = dataset.num_viewers();
    let nm = dataset.num_movies();
    let train: Vec<_> = dataset
        .entries()
        .iter()
        .filter(|e| e.partition == Partition::Train)
        .collect();
    if train.is_empty() {
        return Err(Error::Empty("train partition"));
    }

    let mut sums = vec![0.0; nm];
    let mut counts = vec![0usize; nm];
    for e in &train {
        sums[e.movie as usize] += e.stars;
        counts[e.movie as usize] += 1;
    }
    let movie_means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect();

    let mut sums = vec![0.0; nv];
    let mut counts = vec![0usize; nv];
    for e in &train {
        sums[e.viewer as usize] += e.stars - movie_means[e.movie as usize];
        counts[e.viewer as usize] += 1;
    }
    let viewer_means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect();

    let global_mean = train.iter().map(|e| e.stars).sum::<f64>() / train.len() as f64;

    let edge = |e: &crate::dataset::Rating| Edge {
        viewer: e.viewer,
        movie: e.movie,
        stars: e.stars,
        residual: e.stars - movie_means[e.movie as usize] - viewer_means[e.viewer as usize],
    };
    let train_edges = train.iter().map(|e| edge(e)).collect();
    let probe_edges = dataset
        .entries()
        .iter()
        .filter(|e| e.partition == Partition::Probe)
        .map(edge)
        .collect();

    CenteredRatings::from_parts(movie_means, viewer_means, global_mean, train_edges, probe_edges)
}
