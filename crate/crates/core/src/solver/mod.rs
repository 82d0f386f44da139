//! Divide-and-concur RRR solver for viewer attribute bits.

pub mod bilinear;
pub mod state;

use std::hash::{Hash, Hasher};
use std::io::Write;
use std::path::Path;

use log::{debug, warn};

pub use bilinear::{project_edge, project_edge_into, BAND};
pub use state::{initialize, project_a, project_b, rrr_step, PairDomain, ReplicaState};

use crate::center::TrainingView;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Replicas for every viewer-movie pair of the view.
    Dense,
    /// Replicas only for rated pairs.
    Sparse,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Dense => "dense",
            Mode::Sparse => "sparse",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Mode::Dense),
            "sparse" => Ok(Mode::Sparse),
            _ => Err(Error::InvalidArgument(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Number of attributes.
    pub d: usize,
    pub beta: f64,
    pub max_iterations: usize,
    /// Reinitialize when the monitored RMSE (centered stars) exceeds this.
    pub restart_rmse_threshold: f64,
    pub seed: u64,
    pub mode: Mode,
    /// Weight of `c_v` against the `b_vm` replicas when concurring bits.
    pub gamma: f64,
    pub root_find_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            d: 8,
            beta: 0.5,
            max_iterations: 1000,
            restart_rmse_threshold: 1.1,
            seed: 0,
            mode: Mode::Dense,
            gamma: 1.0,
            root_find_tolerance: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if !(self.beta > 0.0 && self.beta <= 2.0) {
            return bad(format!("beta {} outside (0, 2]", self.beta));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma {} must be positive", self.gamma));
        }
        if self.root_find_tolerance.is_nan() || self.root_find_tolerance <= 0.0 {
            return bad("root-find tolerance must be positive".into());
        }
        if self.restart_rmse_threshold.is_nan() {
            return bad("restart threshold is NaN".into());
        }
        Ok(())
    }

    /// Stable fingerprint for model provenance.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a over the textual form; std's SipHash keys are not stable
        // across releases
        let text = format!(
            "d={};beta={:e};iters={};restart={:e};seed={};mode={};gamma={:e};tol={:e}",
            self.d,
            self.beta,
            self.max_iterations,
            self.restart_rmse_threshold,
            self.seed,
            self.mode.as_str(),
            self.gamma,
            self.root_find_tolerance
        );
        let mut h = Fnv(0xcbf2_9ce4_8422_2325);
        text.hash(&mut h);
        h.finish()
    }
}

struct Fnv(u64);

impl Hasher for Fnv {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x100_0000_01b3);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    pub iteration: usize,
    /// RMS per-component change of `x` in this iteration.
    pub delta_x: f64,
    /// Training RMSE of bits from `P_A(x)` and weights from `P_B(x)`.
    pub rmse: f64,
    /// `x` was reinitialized after this iteration.
    pub restarted: bool,
}

pub const STATS_CSV_HEADER: &str = "iteration,delta_x,rmse,restarted";

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub config: SolverConfig,
    pub num_viewers: usize,
    /// Global indices of the training movies, in local order.
    pub movies: Vec<u32>,
    /// Best bits, row-major `viewers × d`.
    pub bits: Vec<u8>,
    /// Concurred weights at the best iteration, row-major `movies × d`.
    pub weights: Vec<f64>,
    pub best_rmse: f64,
    pub best_iteration: usize,
    pub stats: Vec<IterationStats>,
    pub restarts: usize,
    /// Every iteration ended in a restart.
    pub all_restarted: bool,
}

impl SolveResult {
    pub fn d(&self) -> usize {
        self.config.d
    }

    /// Running minimum of the monitored RMSE.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.stats
            .iter()
            .scan(f64::INFINITY, |best, s| {
                *best = best.min(s.rmse);
                Some(*best)
            })
            .collect()
    }

    pub fn write_stats_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "#schema=1")?;
            writeln!(out, "{STATS_CSV_HEADER}")?;
            for s in &self.stats {
                writeln!(
                    out,
                    "{},{},{},{}",
                    s.iteration,
                    s.delta_x,
                    s.rmse,
                    u8::from(s.restarted)
                )?;
            }
            out.flush()
        };
        write().map_err(io)
    }
}

/// Runs `max_iterations` RRR steps from a random start and keeps the
/// iteration with the lowest training RMSE.
///
/// Each iteration monitors the bits of `P_A(x)` against the concurred
/// weights of `P_B(x)`. When that RMSE exceeds the restart threshold, `x`
/// is redrawn from the next initialization sub-stream; the iteration count
/// keeps running. Parallel work uses the ambient rayon pool, and every
/// reduction has a fixed order, so the result does not depend on the
/// thread count.
pub fn solve(config: &SolverConfig, view: &TrainingView) -> Result<SolveResult> {
    config.validate()?;
    if config.max_iterations == 0 {
        return Err(Error::Empty("iteration series (max_iterations = 0)"));
    }
    if view.is_empty() {
        return Err(Error::Empty("training view"));
    }
    let d = config.d;
    let domain = PairDomain::new(view, config.mode);
    let mut x = initialize(config, &domain, 0);
    let mut restarts = 0usize;

    let mut stats = Vec::with_capacity(config.max_iterations);
    let mut best: Option<(f64, usize, Vec<f64>, Vec<f64>)> = None;

    for it in 0..config.max_iterations {
        let weights = state::concurred_weights(&x, &domain);
        let step = rrr_step(&x, &domain, config)?;
        let bits = &step.projected_a.c;
        let rmse = state::monitor_rmse(bits, &weights, &domain, d);

        if best.as_ref().is_none_or(|b| rmse < b.0) {
            best = Some((rmse, it, bits.clone(), weights));
        }

        let mut next = step.next;
        let mut delta_x = step.delta_x;
        let restarted = rmse > config.restart_rmse_threshold;
        if restarted {
            restarts += 1;
            debug!("iteration {it}: rmse {rmse:.4} above threshold, restart {restarts}");
            next = initialize(config, &domain, restarts as u64);
            delta_x = next.rms_distance(&x);
        }
        if !next.is_finite() {
            return Err(Error::Format(format!("non-finite state at iteration {it}")));
        }
        x = next;
        stats.push(IterationStats {
            iteration: it,
            delta_x,
            rmse,
            restarted,
        });
    }

    let (best_rmse, best_iteration, bits, weights) = best.expect("at least one iteration");
    let all_restarted = stats.iter().all(|s| s.restarted);
    if all_restarted {
        warn!("every iteration restarted; returning the best snapshot seen");
    }
    Ok(SolveResult {
        config: config.clone(),
        num_viewers: view.num_viewers(),
        movies: view.movies().to_vec(),
        bits: bits.iter().map(|&b| u8::from(b >= 0.5)).collect(),
        weights,
        best_rmse,
        best_iteration,
        stats,
        restarts,
        all_restarted,
    })
}
