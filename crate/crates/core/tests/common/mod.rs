//! Independent reference implementations and generators shared by the
//! integration tests. Nothing here calls into the solver internals.

#![allow(dead_code)]

use bar_core::dataset::{DatasetBuilder, Partition, RatingsDataset};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Minimizes `f` from `start` by compass search, halving the step until it
/// drops below `min_step`.
pub fn pattern_search(f: &dyn Fn(&[f64]) -> f64, start: &[f64], step: f64, min_step: f64) -> (Vec<f64>, f64) {
    let mut x = start.to_vec();
    let mut fx = f(&x);
    let mut h = step;
    while h > min_step {
        let mut improved = false;
        for i in 0..x.len() {
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] += sign * h;
                let fy = f(&y);
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (x, fx)
}

/// Visits every point of a regular grid with `n` nodes per axis over
/// `center ± radius`.
fn for_each_grid_point(center: &[f64], radius: f64, n: usize, mut visit: impl FnMut(&[f64])) {
    let d = center.len();
    let mut idx = vec![0usize; d];
    let mut p = vec![0.0; d];
    loop {
        for k in 0..d {
            p[k] = center[k] - radius + 2.0 * radius * idx[k] as f64 / (n - 1) as f64;
        }
        visit(&p);
        let mut k = 0;
        loop {
            if k == d {
                return;
            }
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn grid_nodes(d: usize) -> usize {
    match d {
        1 => 4001,
        2 => 301,
        _ => 51,
    }
}

/// Keeps the `keep` lowest-valued points seen.
struct Best {
    keep: usize,
    items: Vec<(f64, Vec<f64>)>,
}

impl Best {
    fn new(keep: usize) -> Self {
        Best { keep, items: Vec::new() }
    }

    fn offer(&mut self, value: f64, p: &[f64]) {
        if self.items.len() < self.keep || value < self.items.last().unwrap().0 {
            self.items.push((value, p.to_vec()));
            self.items.sort_by(|a, b| a.0.total_cmp(&b.0));
            self.items.truncate(self.keep);
        }
    }
}

/// Squared distance from `(b0, w0)` to the nearest point with
/// `|b·w − r| ≤ 1/2`, by grid search and compass refinement.
///
/// Outside the band the nearest point lies on the boundary `b·w = c` with
/// `c` the violated edge. For a fixed nonzero `u` (either `b` or `w`), the
/// best partner is the orthogonal projection onto the hyperplane
/// `u·x = c`, which leaves a function of `u` alone; both parameterizations
/// are searched and the smaller minimum is returned.
pub fn projection_distance_oracle(b0: &[f64], w0: &[f64], r: f64) -> f64 {
    let p0 = dot(b0, w0);
    if (p0 - r).abs() <= 0.5 {
        return 0.0;
    }
    let c = if p0 > r { r + 0.5 } else { r - 0.5 };

    let reduced = |u0: &'_ [f64], v0: &'_ [f64]| {
        let u0 = u0.to_vec();
        let v0 = v0.to_vec();
        move |u: &[f64]| {
            let nu = dot(u, u);
            if nu < 1e-300 {
                return f64::INFINITY;
            }
            let gap = c - dot(u, &v0);
            sq_dist(u, &u0) + gap * gap / nu
        }
    };

    // An upper bound from a feasible point bounds the search box: the
    // optimum cannot move u further than sqrt(bound) from u0.
    let d = b0.len();
    let mut bound = f64::INFINITY;
    for (u0, v0) in [(b0, w0), (w0, b0)] {
        let g = reduced(u0, v0);
        bound = bound.min(g(u0));
        let root = c.abs().sqrt();
        let mut e = vec![0.0; d];
        e[0] = root;
        bound = bound.min(g(&e));
        e[0] = -root;
        bound = bound.min(g(&e));
    }

    let mut best = f64::INFINITY;
    for (u0, v0) in [(b0, w0), (w0, b0)] {
        let g = reduced(u0, v0);
        let radius = bound.sqrt() * 1.0001 + 1e-9;
        let n = grid_nodes(d);
        let mut top = Best::new(6);
        for_each_grid_point(u0, radius, n, |p| top.offer(g(p), p));
        let step = 2.0 * radius / (n - 1) as f64;
        for (_, start) in top.items {
            let (_, val) = pattern_search(&g, &start, step, 1e-12);
            best = best.min(val);
        }
    }
    best.min(bound)
}

/// Minimizes `Σ (r − b·w)²` over `w` by grid search and compass
/// refinement. Returns the minimizer and the minimum.
pub fn least_squares_oracle(rows: &[(Vec<u8>, f64)], d: usize) -> (Vec<f64>, f64) {
    let f = |w: &[f64]| -> f64 {
        rows.iter()
            .map(|(b, r)| {
                let p: f64 = b.iter().zip(w).map(|(&bi, wi)| f64::from(bi) * wi).sum();
                (r - p) * (r - p)
            })
            .sum()
    };
    let radius = 4.0 * rows.iter().map(|(_, r)| r.abs()).fold(1.0, f64::max);
    let n = match d {
        1 => 801,
        2 => 201,
        _ => 31,
    };
    let mut top = Best::new(4);
    for_each_grid_point(&vec![0.0; d], radius, n, |p| top.offer(f(p), p));
    let step = 2.0 * radius / (n - 1) as f64;
    top.items
        .into_iter()
        .map(|(_, start)| pattern_search(&f, &start, step, 1e-11))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
}

/// A random sparse dataset with integer stars and a random partition.
/// Every viewer and movie is registered even when it ends up unrated.
pub fn random_dataset(seed: u64, max_viewers: usize, max_movies: usize, density: f64, probe: f64) -> RatingsDataset {
    let mut g = rng(seed);
    let nv = g.random_range(1..=max_viewers);
    let nm = g.random_range(1..=max_movies);
    let mut b = DatasetBuilder::new();
    for v in 0..nv {
        b.register_viewer(&format!("u{v}"));
    }
    for m in 0..nm {
        b.register_movie(&format!("f{m}"));
    }
    let mut any_train = false;
    for v in 0..nv {
        for m in 0..nm {
            if g.random_bool(density) {
                let stars = f64::from(g.random_range(1..=5u8));
                let part = if g.random_bool(probe) {
                    Partition::Probe
                } else {
                    any_train = true;
                    Partition::Train
                };
                b.push(&format!("u{v}"), &format!("f{m}"), stars, part).unwrap();
            }
        }
    }
    if !any_train {
        b.push("u0", "f0", 3.0, Partition::Train).ok();
    }
    b.finish()
}

/// Movie and viewer means recomputed from scratch by the two-stage rule.
pub fn reference_means(ds: &RatingsDataset) -> (Vec<f64>, Vec<f64>) {
    let train: Vec<_> = ds.entries().iter().filter(|e| e.partition == Partition::Train).collect();
    let movie_means: Vec<f64> = (0..ds.num_movies())
        .map(|m| {
            let xs: Vec<f64> = train.iter().filter(|e| e.movie as usize == m).map(|e| e.stars).collect();
            if xs.is_empty() {
                0.0
            } else {
                xs.iter().sum::<f64>() / xs.len() as f64
            }
        })
        .collect();
    let viewer_means = (0..ds.num_viewers())
        .map(|v| {
            let xs: Vec<f64> = train
                .iter()
                .filter(|e| e.viewer as usize == v)
                .map(|e| e.stars - movie_means[e.movie as usize])
                .collect();
            if xs.is_empty() {
                0.0
            } else {
                xs.iter().sum::<f64>() / xs.len() as f64
            }
        })
        .collect();
    (movie_means, viewer_means)
}
