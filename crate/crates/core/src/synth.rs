//! Planted-model datasets with known bits and weights, for recovery checks.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{DatasetBuilder, Partition, RatingsDataset};
use crate::error::{Error, Result};
use crate::fit::{BarModel, Provenance};
use crate::rng::{substream, Stream};

/// Attempts at drawing a pair set that covers every viewer and movie.
const MAX_PAIR_DRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub viewers: usize,
    pub movies: usize,
    pub d: usize,
    /// Fraction of the `viewers × movies` pairs that get a rating.
    pub density: f64,
    /// Probability that a planted bit is 1.
    pub bit_probability: f64,
    /// Weights are uniform in `[−scale, +scale]`.
    pub weight_scale: f64,
    /// Standard deviation of the additive Gaussian noise, in stars.
    pub noise_sigma: f64,
    /// Round ratings to whole stars.
    pub quantize: bool,
    /// Probability that a rated pair is tagged probe instead of train.
    pub probe_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            viewers: 300,
            movies: 60,
            d: 4,
            density: 0.3,
            bit_probability: 0.3,
            weight_scale: 2.0,
            noise_sigma: 0.25,
            quantize: true,
            probe_fraction: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.viewers == 0 || self.movies == 0 || self.d == 0 {
            return bad("viewer, movie and attribute counts must be at least 1".into());
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad(format!("density {} outside (0, 1]", self.density));
        }
        if !(self.bit_probability > 0.0 && self.bit_probability <= 1.0) {
            return bad(format!("bit probability {} outside (0, 1]", self.bit_probability));
        }
        if !(self.weight_scale >= 0.0 && self.weight_scale.is_finite()) {
            return bad(format!("weight scale {} must be finite and >= 0", self.weight_scale));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise sigma {} must be finite and >= 0", self.noise_sigma));
        }
        if !(0.0..1.0).contains(&self.probe_fraction) {
            return bad(format!("probe fraction {} outside [0, 1)", self.probe_fraction));
        }
        Ok(())
    }

    pub fn num_pairs(&self) -> usize {
        (self.density * (self.viewers * self.movies) as f64).ceil() as usize
    }
}

/// Draws a planted model and the ratings it generates.
///
/// Bits are Bernoulli(p), weights uniform in `[−scale, scale]`, movie base
/// means uniform in `[2.5, 4]`. Each sampled pair gets
/// `base + b·w + N(0, σ)`, rounded when quantizing, clamped to `[1, 5]`.
/// The returned model carries the base means as movie means and zero
/// viewer means.
pub fn synthesize(spec: &SyntheticSpec) -> Result<(RatingsDataset, BarModel)> {
    spec.validate()?;
    let (nv, nm, d) = (spec.viewers, spec.movies, spec.d);
    let n_pairs = spec.num_pairs();
    if n_pairs < nv.max(nm) {
        return Err(Error::Synthesis(format!(
            "{n_pairs} ratings cannot cover {nv} viewers and {nm} movies"
        )));
    }
    let mut rng = substream(spec.seed, Stream::Synthesis, 0);

    let bits: Vec<u8> = (0..nv * d)
        .map(|_| u8::from(rng.random_bool(spec.bit_probability)))
        .collect();
    let weights: Vec<f64> = (0..nm * d)
        .map(|_| {
            if spec.weight_scale > 0.0 {
                rng.random_range(-spec.weight_scale..=spec.weight_scale)
            } else {
                0.0
            }
        })
        .collect();
    let base: Vec<f64> = (0..nm).map(|_| rng.random_range(2.5..=4.0)).collect();

    let mut pairs = None;
    for _ in 0..MAX_PAIR_DRAWS {
        let mut drawn = index::sample(&mut rng, nv * nm, n_pairs).into_vec();
        drawn.sort_unstable();
        if covers(&drawn, nv, nm) {
            pairs = Some(drawn);
            break;
        }
    }
    let pairs = pairs.ok_or_else(|| {
        Error::Synthesis(format!(
            "density {} leaves some viewer or movie unrated after {MAX_PAIR_DRAWS} draws",
            spec.density
        ))
    })?;

    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Synthesis(e.to_string()))?;
    let mut builder = DatasetBuilder::new();
    let viewer_ids: Vec<String> = (0..nv).map(|v| format!("v{v}")).collect();
    let movie_ids: Vec<String> = (0..nm).map(|m| format!("m{m}")).collect();
    viewer_ids.iter().for_each(|id| {
        builder.register_viewer(id);
    });
    movie_ids.iter().for_each(|id| {
        builder.register_movie(id);
    });

    for p in pairs {
        let (v, m) = (p / nm, p % nm);
        let signal = crate::fit::dot_bits(&bits[v * d..(v + 1) * d], &weights[m * d..(m + 1) * d]);
        let raw = base[m] + signal + noise.sample(&mut rng);
        let stars = if spec.quantize { raw.round() } else { raw }.clamp(1.0, 5.0);
        let partition = if spec.probe_fraction > 0.0 && rng.random_bool(spec.probe_fraction) {
            Partition::Probe
        } else {
            Partition::Train
        };
        builder
            .push(&viewer_ids[v], &movie_ids[m], stars, partition)
            .map_err(Error::Synthesis)?;
    }

    let global_mean = base.iter().sum::<f64>() / nm as f64;
    let planted = BarModel {
        d,
        viewer_ids,
        movie_ids,
        titles: vec![None; nm],
        bits,
        weights,
        movie_means: base,
        viewer_means: vec![0.0; nv],
        global_mean,
        provenance: Provenance::default(),
    };
    Ok((builder.finish(), planted))
}

fn covers(pairs: &[usize], nv: usize, nm: usize) -> bool {
    let mut seen_v = vec![false; nv];
    let mut seen_m = vec![false; nm];
    for &p in pairs {
        seen_v[p / nm] = true;
        seen_m[p % nm] = true;
    }
    seen_v.iter().all(|&s| s) && seen_m.iter().all(|&s| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::center::center;

    #[test]
    fn noiseless_irrelevant_bits_give_zero_residuals() {
        let spec = SyntheticSpec {
            viewers: 20,
            movies: 10,
            weight_scale: 0.0,
            noise_sigma: 0.0,
            quantize: false,
            seed: 3,
            ..SyntheticSpec::default()
        };
        let (ds, planted) = synthesize(&spec).unwrap();
        for e in ds.entries() {
            assert_eq!(e.stars, planted.movie_means[e.movie as usize]);
        }
        let c = center(&ds).unwrap();
        assert!(c.train().iter().all(|e| e.residual.abs() < 1e-12));
    }

    #[test]
    fn same_seed_same_dataset() {
        let spec = SyntheticSpec { seed: 11, probe_fraction: 0.1, ..SyntheticSpec::default() };
        let (a, pa) = synthesize(&spec).unwrap();
        let (b, pb) = synthesize(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(pa, pb);
        let (c, _) = synthesize(&SyntheticSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shape_and_ranges() {
        let spec = SyntheticSpec::default();
        let (ds, planted) = synthesize(&spec).unwrap();
        assert_eq!(ds.entries().len(), spec.num_pairs());
        assert_eq!(ds.num_viewers(), 300);
        assert_eq!(ds.num_movies(), 60);
        assert!(ds.entries().iter().all(|e| e.stars.fract() == 0.0));
        assert!(planted.bits.iter().all(|&b| b <= 1));
        assert!(planted.weights.iter().all(|w| w.abs() <= spec.weight_scale));
        assert!(planted.movie_means.iter().all(|m| (2.5..=4.0).contains(m)));
        planted.validate().unwrap();
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            SyntheticSpec { density: 0.0, ..SyntheticSpec::default() },
            SyntheticSpec { density: 1.5, ..SyntheticSpec::default() },
            SyntheticSpec { bit_probability: 0.0, ..SyntheticSpec::default() },
            SyntheticSpec { viewers: 0, ..SyntheticSpec::default() },
        ] {
            assert!(matches!(synthesize(&spec), Err(Error::InvalidArgument(_))));
        }
        let sparse = SyntheticSpec { viewers: 50, movies: 50, density: 0.01, ..SyntheticSpec::default() };
        assert!(matches!(synthesize(&sparse), Err(Error::Synthesis(_))));
    }
}
