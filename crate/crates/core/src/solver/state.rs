//! The divide-and-concur vector `x` and the two projections acting on it.
//!
//! `x` holds, for every viewer-movie pair in the domain, a bit replica
//! `b_vm` and a weight replica `w_vm`, plus one extra bit replica `c_v` per
//! viewer. Set A asks each rated pair to explain its residual within the
//! band and each `c_v` to be binary. Set B asks all replicas of the same
//! variable to agree.

use rand::Rng;
use rayon::prelude::*;

use super::bilinear::project_edge_into;
use super::{Mode, SolverConfig};
use crate::center::TrainingView;
use crate::error::Result;
use crate::rng::{substream, Stream};

/// Which viewer-movie pairs carry replicas, laid out contiguously by
/// viewer.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDomain {
    num_viewers: usize,
    num_movies: usize,
    pair_movie: Vec<u32>,
    /// Residual of each pair, `None` for unrated pairs (dense mode only).
    pair_residual: Vec<Option<f64>>,
    viewer_offsets: Vec<usize>,
    movie_offsets: Vec<usize>,
    movie_pairs: Vec<usize>,
}

impl PairDomain {
    pub fn new(view: &TrainingView, mode: Mode) -> Self {
        let (nv, nm) = (view.num_viewers(), view.num_movies());
        let mut pair_movie = Vec::new();
        let mut pair_residual = Vec::new();
        let mut viewer_offsets = Vec::with_capacity(nv + 1);
        viewer_offsets.push(0);
        for v in 0..nv {
            let edges = view.viewer_edges(v);
            match mode {
                Mode::Dense => {
                    let mut k = 0;
                    for m in 0..nm {
                        let r = match edges.get(k) {
                            Some(e) if e.movie as usize == m => {
                                k += 1;
                                Some(e.residual)
                            }
                            _ => None,
                        };
                        pair_movie.push(m as u32);
                        pair_residual.push(r);
                    }
                }
                Mode::Sparse => {
                    for e in edges {
                        pair_movie.push(e.movie);
                        pair_residual.push(Some(e.residual));
                    }
                }
            }
            viewer_offsets.push(pair_movie.len());
        }

        let mut movie_offsets = vec![0usize; nm + 1];
        for &m in &pair_movie {
            movie_offsets[m as usize + 1] += 1;
        }
        for m in 0..nm {
            movie_offsets[m + 1] += movie_offsets[m];
        }
        let mut fill = movie_offsets.clone();
        let mut movie_pairs = vec![0; pair_movie.len()];
        for (p, &m) in pair_movie.iter().enumerate() {
            movie_pairs[fill[m as usize]] = p;
            fill[m as usize] += 1;
        }

        PairDomain {
            num_viewers: nv,
            num_movies: nm,
            pair_movie,
            pair_residual,
            viewer_offsets,
            movie_offsets,
            movie_pairs,
        }
    }

    pub fn num_viewers(&self) -> usize {
        self.num_viewers
    }

    pub fn num_movies(&self) -> usize {
        self.num_movies
    }

    pub fn num_pairs(&self) -> usize {
        self.pair_movie.len()
    }

    pub fn pair_movie(&self, pair: usize) -> usize {
        self.pair_movie[pair] as usize
    }

    pub fn pair_residual(&self, pair: usize) -> Option<f64> {
        self.pair_residual[pair]
    }

    pub fn viewer_pairs(&self, viewer: usize) -> std::ops::Range<usize> {
        self.viewer_offsets[viewer]..self.viewer_offsets[viewer + 1]
    }

    pub fn movie_pairs(&self, movie: usize) -> &[usize] {
        &self.movie_pairs[self.movie_offsets[movie]..self.movie_offsets[movie + 1]]
    }

    fn viewer_offsets(&self) -> &[usize] {
        &self.viewer_offsets
    }
}

/// The concatenated replica vector `x`. Replica blocks are row-major with
/// `d` components per pair (or per viewer for `c`).
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaState {
    pub d: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl ReplicaState {
    pub fn zeros(domain: &PairDomain, d: usize) -> Self {
        ReplicaState {
            d,
            w: vec![0.0; domain.num_pairs() * d],
            b: vec![0.0; domain.num_pairs() * d],
            c: vec![0.0; domain.num_viewers() * d],
        }
    }

    pub fn len(&self) -> usize {
        self.w.len() + self.b.len() + self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn blocks(&self) -> [&Vec<f64>; 3] {
        [&self.w, &self.b, &self.c]
    }

    fn blocks_mut(&mut self) -> [&mut Vec<f64>; 3] {
        [&mut self.w, &mut self.b, &mut self.c]
    }

    /// `self ← alpha·self + beta·other`, componentwise.
    fn combine(&mut self, alpha: f64, other: &ReplicaState, beta: f64) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            dst.par_iter_mut()
                .zip(src.par_iter())
                .for_each(|(x, &y)| *x = alpha * *x + beta * y);
        }
    }

    /// Root-mean-square componentwise difference.
    pub fn rms_distance(&self, other: &ReplicaState) -> f64 {
        let mut sum = 0.0;
        for (a, b) in self.blocks().into_iter().zip(other.blocks()) {
            sum += a
                .par_chunks(4096)
                .zip(b.par_chunks(4096))
                .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>())
                .collect::<Vec<f64>>()
                .into_iter()
                .sum::<f64>();
        }
        let n = self.len();
        if n == 0 {
            0.0
        } else {
            (sum / n as f64).sqrt()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Fresh random `x`: weights uniform in `[−2/d, 2/d)`, bit replicas uniform
/// in `[0, 1/2)`. `restart` selects the seed sub-stream.
pub fn initialize(config: &SolverConfig, domain: &PairDomain, restart: u64) -> ReplicaState {
    let d = config.d;
    let mut rng = substream(config.seed, Stream::Init, restart);
    let mut state = ReplicaState::zeros(domain, d);
    let span = 2.0 / d as f64;
    state.w.iter_mut().for_each(|x| *x = rng.random_range(-span..span));
    state.b.iter_mut().for_each(|x| *x = rng.random_range(0.0..0.5));
    state.c.iter_mut().for_each(|x| *x = rng.random_range(0.0..0.5));
    state
}

/// Nearest binary value; an exact 0.5 goes to 1.
pub fn round_bit(x: f64) -> f64 {
    if x >= 0.5 {
        1.0
    } else {
        0.0
    }
}

/// Projection to A: the band constraint on every rated pair, rounding on
/// every `c_v`. Unrated pairs pass through.
pub fn project_a(state: &ReplicaState, domain: &PairDomain, config: &SolverConfig) -> Result<ReplicaState> {
    let d = state.d;
    let mut out = ReplicaState::zeros(domain, d);
    let tol = config.root_find_tolerance;
    out.b
        .par_chunks_mut(d)
        .zip(out.w.par_chunks_mut(d))
        .zip(state.b.par_chunks(d).zip(state.w.par_chunks(d)))
        .enumerate()
        .try_for_each(|(p, ((b1, w1), (b0, w0)))| match domain.pair_residual(p) {
            Some(r) => project_edge_into(b0, w0, r, tol, b1, w1),
            None => {
                b1.copy_from_slice(b0);
                w1.copy_from_slice(w0);
                Ok(())
            }
        })?;
    out.c
        .par_iter_mut()
        .zip(state.c.par_iter())
        .for_each(|(y, &x)| *y = round_bit(x));
    Ok(out)
}

/// Mean of equal-length rows, accumulated as deviations from the first row
/// so that identical rows give back that row exactly.
fn accumulate_deviations<'a>(
    rows: impl Iterator<Item = (&'a [f64], f64)>,
    first: &[f64],
    total_weight: f64,
    out: &mut [f64],
) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for (row, weight) in rows {
        for i in 0..out.len() {
            out[i] += weight * (row[i] - first[i]);
        }
    }
    for i in 0..out.len() {
        out[i] = first[i] + out[i] / total_weight;
    }
}

/// Per-movie mean of the weight replicas, row-major `movies × d`. Movies
/// without pairs get zeros.
pub fn concurred_weights(state: &ReplicaState, domain: &PairDomain) -> Vec<f64> {
    let d = state.d;
    let mut means = vec![0.0; domain.num_movies() * d];
    means.par_chunks_mut(d).enumerate().for_each(|(m, out)| {
        let pairs = domain.movie_pairs(m);
        let Some(&first) = pairs.first() else {
            return;
        };
        let first = &state.w[first * d..(first + 1) * d];
        let rows = pairs.iter().map(|&p| (&state.w[p * d..(p + 1) * d], 1.0));
        accumulate_deviations(rows, first, pairs.len() as f64, out);
    });
    means
}

/// Splits a pair-major buffer into one mutable slice per viewer.
fn split_by_viewer<'a>(buf: &'a mut [f64], offsets: &[usize], d: usize) -> Vec<&'a mut [f64]> {
    let mut rest = buf;
    let mut out = Vec::with_capacity(offsets.len().saturating_sub(1));
    for w in offsets.windows(2) {
        let (head, tail) = rest.split_at_mut((w[1] - w[0]) * d);
        out.push(head);
        rest = tail;
    }
    out
}

/// Projection to B: every movie's weight replicas become their mean; every
/// viewer's bit replicas and `c_v` become `(Σ b_vm + γ c_v) / (n_v + γ)`.
pub fn project_b(state: &ReplicaState, domain: &PairDomain, config: &SolverConfig) -> ReplicaState {
    let d = state.d;
    let gamma = config.gamma;
    let mut out = ReplicaState::zeros(domain, d);

    let means = concurred_weights(state, domain);
    out.w
        .par_chunks_mut(d)
        .enumerate()
        .for_each(|(p, w)| {
            let m = domain.pair_movie(p);
            w.copy_from_slice(&means[m * d..(m + 1) * d]);
        });

    let b_rows = split_by_viewer(&mut out.b, domain.viewer_offsets(), d);
    b_rows
        .into_par_iter()
        .zip(out.c.par_chunks_mut(d))
        .enumerate()
        .for_each(|(v, (b_out, c_out))| {
            let range = domain.viewer_pairs(v);
            let c_in = &state.c[v * d..(v + 1) * d];
            let rows = range
                .clone()
                .map(|p| (&state.b[p * d..(p + 1) * d], 1.0))
                .chain(std::iter::once((c_in, gamma)));
            accumulate_deviations(rows, c_in, range.len() as f64 + gamma, c_out);
            for row in b_out.chunks_exact_mut(d) {
                row.copy_from_slice(c_out);
            }
        });
    out
}

/// Pieces of one RRR update kept for monitoring.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub next: ReplicaState,
    /// `P_A(x)` of the input state.
    pub projected_a: ReplicaState,
    pub delta_x: f64,
}

/// One RRR update, `x ← x + β (P_B(2 P_A(x) − x) − P_A(x))`.
///
/// This equals `(1 − β/2) x + (β/2) R_B(R_A(x))` with `R = 2P − 1`; the
/// difference form returns a fixed point bit-for-bit.
pub fn rrr_step(state: &ReplicaState, domain: &PairDomain, config: &SolverConfig) -> Result<StepOutput> {
    let projected_a = project_a(state, domain, config)?;
    let mut reflected = projected_a.clone();
    reflected.combine(2.0, state, -1.0);
    let mut update = project_b(&reflected, domain, config);
    update.combine(1.0, &projected_a, -1.0);
    let mut next = state.clone();
    next.combine(1.0, &update, config.beta);
    let delta_x = next.rms_distance(state);
    Ok(StepOutput {
        next,
        projected_a,
        delta_x,
    })
}

/// Training RMSE of bits `c` (already binary) against per-movie weights,
/// over the rated pairs of the domain.
pub fn monitor_rmse(bits: &[f64], weights: &[f64], domain: &PairDomain, d: usize) -> f64 {
    let partial: Vec<(f64, usize)> = (0..domain.num_viewers())
        .into_par_iter()
        .map(|v| {
            let bv = &bits[v * d..(v + 1) * d];
            let mut sum = 0.0;
            let mut n = 0;
            for p in domain.viewer_pairs(v) {
                if let Some(r) = domain.pair_residual(p) {
                    let m = domain.pair_movie(p);
                    let pred: f64 = bv.iter().zip(&weights[m * d..(m + 1) * d]).map(|(b, w)| b * w).sum();
                    sum += (r - pred) * (r - pred);
                    n += 1;
                }
            }
            (sum, n)
        })
        .collect();
    let (sum, n) = partial.iter().fold((0.0, 0), |(s, n), &(ps, pn)| (s + ps, n + pn));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view() -> TrainingView {
        TrainingView::from_edges(3, 2, &[(0, 0, 1.0), (0, 1, -1.0), (1, 1, 0.5), (2, 0, 2.0)]).unwrap()
    }

    fn config(d: usize) -> SolverConfig {
        SolverConfig { d, ..SolverConfig::default() }
    }

    #[test]
    fn domains() {
        let v = view();
        let dense = PairDomain::new(&v, Mode::Dense);
        assert_eq!(dense.num_pairs(), 6);
        assert_eq!(dense.pair_residual(1), Some(-1.0));
        assert_eq!(dense.pair_residual(2), None);
        assert_eq!(dense.movie_pairs(1), [1, 3, 5]);
        let sparse = PairDomain::new(&v, Mode::Sparse);
        assert_eq!(sparse.num_pairs(), 4);
        assert_eq!(sparse.viewer_pairs(1), 2..3);
        assert_eq!(sparse.movie_pairs(0), [0, 3]);
    }

    #[test]
    fn initialization_ranges() {
        let v = view();
        let domain = PairDomain::new(&v, Mode::Dense);
        let s = initialize(&config(8), &domain, 0);
        assert!(s.w.iter().all(|&x| (-0.25..0.25).contains(&x)));
        assert!(s.b.iter().chain(&s.c).all(|&x| (0.0..0.5).contains(&x)));
        assert_eq!(s, initialize(&config(8), &domain, 0));
        assert_ne!(s, initialize(&config(8), &domain, 1));
        let s1 = initialize(&config(1), &domain, 0);
        assert!(s1.w.iter().all(|&x| (-2.0..2.0).contains(&x)));
    }

    #[test]
    fn rounding_of_c() {
        let v = view();
        let domain = PairDomain::new(&v, Mode::Sparse);
        let mut s = ReplicaState::zeros(&domain, 2);
        s.c[..2].copy_from_slice(&[0.3, 0.6]);
        s.c[2..4].copy_from_slice(&[0.5, -0.2]);
        let a = project_a(&s, &domain, &config(2)).unwrap();
        assert_eq!(&a.c[..4], [0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn concur_arithmetic_mean() {
        // viewer 0 has two rated pairs in sparse mode
        let v = view();
        let domain = PairDomain::new(&v, Mode::Sparse);
        let mut s = ReplicaState::zeros(&domain, 1);
        s.b[0] = 0.2;
        s.b[1] = 0.4;
        s.c[0] = 0.6;
        let out = project_b(&s, &domain, &config(1));
        for x in [out.b[0], out.b[1], out.c[0]] {
            assert!((x - 0.4).abs() < 1e-15);
        }
    }

    #[test]
    fn concur_weighted_mean() {
        let v = view();
        let domain = PairDomain::new(&v, Mode::Sparse);
        let mut s = ReplicaState::zeros(&domain, 1);
        // viewer 1 has one rated pair (pair 2)
        s.b[2] = 0.3;
        s.c[1] = 0.6;
        let cfg = SolverConfig { gamma: 2.0, ..config(1) };
        let out = project_b(&s, &domain, &cfg);
        assert!((out.b[2] - 0.5).abs() < 1e-15);
        assert!((out.c[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn concur_of_agreeing_replicas_is_exact() {
        let v = view();
        let domain = PairDomain::new(&v, Mode::Dense);
        let mut s = ReplicaState::zeros(&domain, 2);
        for p in 0..domain.num_pairs() {
            let m = domain.pair_movie(p);
            s.w[p * 2..p * 2 + 2].copy_from_slice(&[0.1 + m as f64 / 3.0, -0.7]);
        }
        for v in 0..3 {
            let bits = [v as f64 / 7.0, 0.3];
            s.c[v * 2..v * 2 + 2].copy_from_slice(&bits);
            for p in domain.viewer_pairs(v) {
                s.b[p * 2..p * 2 + 2].copy_from_slice(&bits);
            }
        }
        assert_eq!(project_b(&s, &domain, &config(2)), s);
    }

    #[test]
    fn viewer_without_pairs_keeps_c() {
        let v = TrainingView::from_edges(2, 1, &[(0, 0, 1.0)]).unwrap();
        let domain = PairDomain::new(&v, Mode::Sparse);
        let mut s = ReplicaState::zeros(&domain, 1);
        s.c[1] = 0.37;
        let out = project_b(&s, &domain, &config(1));
        assert_eq!(out.c[1], 0.37);
    }
}
