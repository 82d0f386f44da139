//! Ranking movies by how much squared error the movie-mean predictor makes
//! on them, and picking the smallest top-ranked set covering a given share.

use crate::center::CenteredRatings;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRanking {
    /// Per movie: Σ over train raters of `(stars − movie_mean)²`.
    pub errors: Vec<f64>,
    /// Movie indices by descending error, ties by ascending index.
    pub order: Vec<usize>,
    /// Running error sum along `order`.
    pub cumulative: Vec<f64>,
    pub total: f64,
}

impl BaselineRanking {
    /// Share of the total error covered by the first `k + 1` ranked movies.
    pub fn fraction(&self, k: usize) -> f64 {
        if self.total > 0.0 {
            self.cumulative[k] / self.total
        } else {
            1.0
        }
    }

    pub fn fractions(&self) -> Vec<f64> {
        (0..self.order.len()).map(|k| self.fraction(k)).collect()
    }

    /// Fraction of the error covered by the first `count` ranked movies.
    pub fn coverage(&self, count: usize) -> f64 {
        match count.min(self.order.len()) {
            0 => 0.0,
            n => self.fraction(n - 1),
        }
    }
}

pub fn rank_baseline(centered: &CenteredRatings) -> BaselineRanking {
    let mut errors = vec![0.0; centered.num_movies()];
    for e in centered.train() {
        let dev = e.stars - centered.movie_means[e.movie as usize];
        errors[e.movie as usize] += dev * dev;
    }
    let mut order: Vec<usize> = (0..errors.len()).collect();
    order.sort_by(|&a, &b| errors[b].total_cmp(&errors[a]).then(a.cmp(&b)));
    let cumulative: Vec<f64> = order
        .iter()
        .scan(0.0, |acc, &m| {
            *acc += errors[m];
            Some(*acc)
        })
        .collect();
    let total = cumulative.last().copied().unwrap_or(0.0);
    BaselineRanking {
        errors,
        order,
        cumulative,
        total,
    }
}

/// Shortest prefix of the ranking whose error reaches `fraction` of the
/// total.
pub fn select_subset(ranking: &BaselineRanking, fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "subset fraction {fraction} outside (0, 1]"
        )));
    }
    let target = fraction * ranking.total;
    let len = ranking
        .cumulative
        .iter()
        .position(|&c| c >= target)
        .map_or(ranking.order.len(), |k| k + 1);
    let len = if ranking.total > 0.0 { len } else { 0 };
    Ok(ranking.order[..len].to_vec())
}
