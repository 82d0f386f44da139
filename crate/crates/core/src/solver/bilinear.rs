//! Projection of a pair `(b, w)` onto the band `|r − b·w| ≤ 0.5`.
//!
//! Outside the band the nearest point lies on the hyperbolic surface
//! `b·w = c` with `c = r ∓ 0.5`. Stationarity gives
//!
//! ```text
//! b = (b0 + λ w0) / (1 − λ²),   w = (w0 + λ b0) / (1 − λ²)
//! ```
//!
//! and with `s = b0 + w0`, `t = b0 − w0` the constraint reads
//!
//! ```text
//! f(λ) = |s|² / (4 (1 − λ)²) − |t|² / (4 (1 + λ)²) − c = 0.
//! ```
//!
//! `f` is strictly increasing on `(−1, 1)`, so there is exactly one
//! stationary point with `|λ| < 1`; that one is the minimizer. When `|s|` or
//! `|t|` vanishes the root can escape to `λ = ±1`, where the minimizers form
//! a family; the limit of the interior formula is used, with the first
//! coordinate axis as the direction when `s` or `t` is exactly zero.

use crate::error::{Error, Result};

/// Half-width of the accepted band around each residual.
pub const BAND: f64 = 0.5;

/// `λ` is confined to `(−1 + LAMBDA_MARGIN, 1 − LAMBDA_MARGIN)`.
const LAMBDA_MARGIN: f64 = 1e-9;
const MAX_ROOT_ITERATIONS: usize = 200;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projects `(b0, w0)` for residual `r`, writing the result into
/// `(b1, w1)`. `tol` bounds `|f(λ)|` at the accepted root.
pub fn project_edge_into(
    b0: &[f64],
    w0: &[f64],
    r: f64,
    tol: f64,
    b1: &mut [f64],
    w1: &mut [f64],
) -> Result<()> {
    debug_assert_eq!(b0.len(), w0.len());
    let p = dot(b0, w0);
    if (r - p).abs() <= BAND {
        b1.copy_from_slice(b0);
        w1.copy_from_slice(w0);
        return Ok(());
    }
    let c = if p < r { r - BAND } else { r + BAND };

    let ss: f64 = b0.iter().zip(w0).map(|(b, w)| (b + w) * (b + w)).sum();
    let tt: f64 = b0.iter().zip(w0).map(|(b, w)| (b - w) * (b - w)).sum();
    let f = |lam: f64| {
        let (a, z) = (1.0 - lam, 1.0 + lam);
        ss / (4.0 * a * a) - tt / (4.0 * z * z) - c
    };

    let mut lo = -1.0 + LAMBDA_MARGIN;
    let mut hi = 1.0 - LAMBDA_MARGIN;
    let (f_lo, f_hi) = (f(lo), f(hi));

    if f_lo >= 0.0 {
        // λ → −1: b + w = s/2, b − w along t with |b − w|² = |s|²/4 − 4c
        let len = (ss / 4.0 - 4.0 * c).max(0.0).sqrt();
        limit_pair(b0, w0, 0.5, len, Sign::Minus, b1, w1);
        return check(b0, w0, r, c, b1, w1);
    }
    if f_hi <= 0.0 {
        // λ → +1: b − w = t/2, b + w along s with |b + w|² = 4c + |t|²/4
        let len = (4.0 * c + tt / 4.0).max(0.0).sqrt();
        limit_pair(b0, w0, 0.5, len, Sign::Plus, b1, w1);
        return check(b0, w0, r, c, b1, w1);
    }

    // safeguarded Newton on the bracket [lo, hi]
    let df = |lam: f64| {
        let (a, z) = (1.0 - lam, 1.0 + lam);
        ss / (2.0 * a * a * a) + tt / (2.0 * z * z * z)
    };
    let mut lam = 0.0;
    let mut converged = false;
    for _ in 0..MAX_ROOT_ITERATIONS {
        let fl = f(lam);
        if fl.abs() <= tol {
            converged = true;
            break;
        }
        if fl < 0.0 {
            lo = lam;
        } else {
            hi = lam;
        }
        let newton = lam - fl / df(lam);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == lam || hi - lo <= 4.0 * f64::EPSILON {
            converged = true;
            break;
        }
        lam = next;
    }

    let scale = 1.0 / ((1.0 - lam) * (1.0 + lam));
    for i in 0..b0.len() {
        b1[i] = (b0[i] + lam * w0[i]) * scale;
        w1[i] = (w0[i] + lam * b0[i]) * scale;
    }
    if !converged {
        return Err(Error::Projection {
            b0: b0.to_vec(),
            w0: w0.to_vec(),
            r,
            residual: f(lam),
        });
    }
    check(b0, w0, r, c, b1, w1)
}

#[derive(Clone, Copy)]
enum Sign {
    Plus,
    Minus,
}

/// Writes the `λ = ±1` limit solution. For `Minus` the fixed part is
/// `b + w = s/2` and the free direction is `t`; for `Plus` the fixed part is
/// `b − w = t/2` and the free direction is `s`.
fn limit_pair(
    b0: &[f64],
    w0: &[f64],
    half: f64,
    len: f64,
    sign: Sign,
    b1: &mut [f64],
    w1: &mut [f64],
) {
    let n = b0.len();
    let (fixed, free): (Vec<f64>, Vec<f64>) = match sign {
        Sign::Minus => (
            (0..n).map(|i| half * (b0[i] + w0[i])).collect(),
            (0..n).map(|i| b0[i] - w0[i]).collect(),
        ),
        Sign::Plus => (
            (0..n).map(|i| half * (b0[i] - w0[i])).collect(),
            (0..n).map(|i| b0[i] + w0[i]).collect(),
        ),
    };
    let norm = dot(&free, &free).sqrt();
    let dir: Vec<f64> = if norm > 0.0 {
        free.iter().map(|x| x / norm).collect()
    } else {
        (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect()
    };
    for i in 0..n {
        let (sum, diff) = match sign {
            Sign::Minus => (fixed[i], len * dir[i]),
            Sign::Plus => (len * dir[i], fixed[i]),
        };
        b1[i] = 0.5 * (sum + diff);
        w1[i] = 0.5 * (sum - diff);
    }
}

/// Refuses to hand back a point that misses the target surface.
fn check(b0: &[f64], w0: &[f64], r: f64, c: f64, b1: &[f64], w1: &[f64]) -> Result<()> {
    let residual = dot(b1, w1) - c;
    let scale = 1.0 + dot(b1, b1).sqrt() * dot(w1, w1).sqrt();
    if residual.is_finite() && residual.abs() <= 1e-10 * scale {
        Ok(())
    } else {
        Err(Error::Projection {
            b0: b0.to_vec(),
            w0: w0.to_vec(),
            r,
            residual,
        })
    }
}

/// Allocating convenience wrapper around [`project_edge_into`].
pub fn project_edge(b0: &[f64], w0: &[f64], r: f64, tol: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut b1 = vec![0.0; b0.len()];
    let mut w1 = vec![0.0; w0.len()];
    project_edge_into(b0, w0, r, tol, &mut b1, &mut w1)?;
    Ok((b1, w1))
}
