//! Versioned little-endian binary files for solver results and models, and
//! plain-text exports.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::fit::{BarModel, Provenance};
use crate::solver::{Mode, SolveResult, SolverConfig};

pub const SOLVE_MAGIC: &[u8; 4] = b"BARS";
pub const MODEL_MAGIC: &[u8; 4] = b"BARM";
pub const FORMAT_VERSION: u32 = 1;

/// Kind of a model-like file, judged by its magic bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Solve,
    Model,
}

pub fn sniff(path: &Path) -> Result<FileKind> {
    let mut magic = [0u8; 4];
    File::open(path)
        .and_then(|mut f| f.read_exact(&mut magic))
        .map_err(|e| Error::io(path, e))?;
    match &magic {
        m if m == SOLVE_MAGIC => Ok(FileKind::Solve),
        m if m == MODEL_MAGIC => Ok(FileKind::Model),
        _ => Err(Error::Format(format!("{}: unknown file magic", path.display()))),
    }
}

pub(crate) fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LE>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

pub(crate) fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let n = r.read_u32::<LE>().map_err(truncated)? as usize;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf).map_err(truncated)?;
    String::from_utf8(buf).map_err(|_| Error::Format("string is not UTF-8".into()))
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, xs: &[f64]) -> std::io::Result<()> {
    w.write_u64::<LE>(xs.len() as u64)?;
    xs.iter().try_for_each(|&x| w.write_f64::<LE>(x))
}

pub(crate) fn read_f64s<R: Read>(r: &mut R) -> Result<Vec<f64>> {
    let n = read_len(r)?;
    (0..n).map(|_| r.read_f64::<LE>().map_err(truncated)).collect()
}

pub(crate) fn write_u32s<W: Write>(w: &mut W, xs: &[u32]) -> std::io::Result<()> {
    w.write_u64::<LE>(xs.len() as u64)?;
    xs.iter().try_for_each(|&x| w.write_u32::<LE>(x))
}

pub(crate) fn read_u32s<R: Read>(r: &mut R) -> Result<Vec<u32>> {
    let n = read_len(r)?;
    (0..n).map(|_| r.read_u32::<LE>().map_err(truncated)).collect()
}

pub(crate) fn read_len<R: Read>(r: &mut R) -> Result<usize> {
    let n = r.read_u64::<LE>().map_err(truncated)?;
    usize::try_from(n)
        .ok()
        .filter(|&n| n < (1 << 40))
        .ok_or_else(|| Error::Format(format!("implausible length {n}")))
}

pub(crate) fn truncated(e: std::io::Error) -> Error {
    Error::Format(format!("truncated or unreadable file: {e}"))
}

/// Bits packed LSB-first, preceded by the bit count.
fn write_bits<W: Write>(w: &mut W, bits: &[u8]) -> std::io::Result<()> {
    w.write_u64::<LE>(bits.len() as u64)?;
    for chunk in bits.chunks(8) {
        let byte = chunk
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, &b)| acc | ((b & 1) << i));
        w.write_u8(byte)?;
    }
    Ok(())
}

fn read_bits<R: Read>(r: &mut R) -> Result<Vec<u8>> {
    let n = read_len(r)?;
    let mut packed = vec![0u8; n.div_ceil(8)];
    r.read_exact(&mut packed).map_err(truncated)?;
    Ok((0..n).map(|i| (packed[i / 8] >> (i % 8)) & 1).collect())
}

pub(crate) fn read_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut got = [0u8; 4];
    r.read_exact(&mut got).map_err(truncated)?;
    if &got != magic {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&got)
        )));
    }
    let version = r.read_u32::<LE>().map_err(truncated)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?))
}

fn write_config<W: Write>(w: &mut W, c: &SolverConfig) -> std::io::Result<()> {
    w.write_u32::<LE>(c.d as u32)?;
    w.write_f64::<LE>(c.beta)?;
    w.write_u64::<LE>(c.max_iterations as u64)?;
    w.write_f64::<LE>(c.restart_rmse_threshold)?;
    w.write_u64::<LE>(c.seed)?;
    w.write_u8(match c.mode {
        Mode::Dense => 0,
        Mode::Sparse => 1,
    })?;
    w.write_f64::<LE>(c.gamma)?;
    w.write_f64::<LE>(c.root_find_tolerance)
}

fn read_config<R: Read>(r: &mut R) -> Result<SolverConfig> {
    let t = truncated;
    Ok(SolverConfig {
        d: r.read_u32::<LE>().map_err(t)? as usize,
        beta: r.read_f64::<LE>().map_err(t)?,
        max_iterations: r.read_u64::<LE>().map_err(t)? as usize,
        restart_rmse_threshold: r.read_f64::<LE>().map_err(t)?,
        seed: r.read_u64::<LE>().map_err(t)?,
        mode: match r.read_u8().map_err(t)? {
            0 => Mode::Dense,
            1 => Mode::Sparse,
            x => return Err(Error::Format(format!("unknown mode tag {x}"))),
        },
        gamma: r.read_f64::<LE>().map_err(t)?,
        root_find_tolerance: r.read_f64::<LE>().map_err(t)?,
    })
}

/// Writes the trained bits, subset weights, config and best iteration. The
/// per-iteration series is not stored; see
/// [`SolveResult::write_stats_csv`].
pub fn write_solve(result: &SolveResult, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let mut body = || -> std::io::Result<()> {
        w.write_all(SOLVE_MAGIC)?;
        w.write_u32::<LE>(FORMAT_VERSION)?;
        write_config(&mut w, &result.config)?;
        w.write_u64::<LE>(result.num_viewers as u64)?;
        write_u32s(&mut w, &result.movies)?;
        write_bits(&mut w, &result.bits)?;
        write_f64s(&mut w, &result.weights)?;
        w.write_f64::<LE>(result.best_rmse)?;
        w.write_u64::<LE>(result.best_iteration as u64)?;
        w.write_u64::<LE>(result.restarts as u64)?;
        w.write_u8(u8::from(result.all_restarted))?;
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

pub fn read_solve(path: &Path) -> Result<SolveResult> {
    let mut r = open(path)?;
    read_header(&mut r, SOLVE_MAGIC)?;
    let config = read_config(&mut r)?;
    let num_viewers = r.read_u64::<LE>().map_err(truncated)? as usize;
    let movies = read_u32s(&mut r)?;
    let bits = read_bits(&mut r)?;
    let weights = read_f64s(&mut r)?;
    let best_rmse = r.read_f64::<LE>().map_err(truncated)?;
    let best_iteration = r.read_u64::<LE>().map_err(truncated)? as usize;
    let restarts = r.read_u64::<LE>().map_err(truncated)? as usize;
    let all_restarted = r.read_u8().map_err(truncated)? != 0;
    let d = config.d;
    if bits.len() != num_viewers * d || weights.len() != movies.len() * d {
        return Err(Error::Dimension("solve file shapes disagree with d".into()));
    }
    Ok(SolveResult {
        config,
        num_viewers,
        movies,
        bits,
        weights,
        best_rmse,
        best_iteration,
        stats: Vec::new(),
        restarts,
        all_restarted,
    })
}

pub fn write_model(model: &BarModel, path: &Path) -> Result<()> {
    model.validate()?;
    let mut w = create(path)?;
    let mut body = || -> std::io::Result<()> {
        w.write_all(MODEL_MAGIC)?;
        w.write_u32::<LE>(FORMAT_VERSION)?;
        w.write_u32::<LE>(model.d as u32)?;
        w.write_u64::<LE>(model.viewer_ids.len() as u64)?;
        for id in &model.viewer_ids {
            write_str(&mut w, id)?;
        }
        w.write_u64::<LE>(model.movie_ids.len() as u64)?;
        for (id, title) in model.movie_ids.iter().zip(&model.titles) {
            write_str(&mut w, id)?;
            match title {
                Some(t) => {
                    w.write_u8(1)?;
                    write_str(&mut w, t)?;
                }
                None => w.write_u8(0)?,
            }
        }
        write_bits(&mut w, &model.bits)?;
        write_f64s(&mut w, &model.weights)?;
        write_f64s(&mut w, &model.movie_means)?;
        write_f64s(&mut w, &model.viewer_means)?;
        w.write_f64::<LE>(model.global_mean)?;
        write_u32s(&mut w, &model.provenance.training_subset)?;
        w.write_u64::<LE>(model.provenance.config_hash)?;
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<BarModel> {
    let mut r = open(path)?;
    read_header(&mut r, MODEL_MAGIC)?;
    let d = r.read_u32::<LE>().map_err(truncated)? as usize;
    let nv = read_len(&mut r)?;
    let viewer_ids = (0..nv).map(|_| read_str(&mut r)).collect::<Result<_>>()?;
    let nm = read_len(&mut r)?;
    let mut movie_ids = Vec::with_capacity(nm);
    let mut titles = Vec::with_capacity(nm);
    for _ in 0..nm {
        movie_ids.push(read_str(&mut r)?);
        titles.push(match r.read_u8().map_err(truncated)? {
            0 => None,
            _ => Some(read_str(&mut r)?),
        });
    }
    let model = BarModel {
        d,
        viewer_ids,
        movie_ids,
        titles,
        bits: read_bits(&mut r)?,
        weights: read_f64s(&mut r)?,
        movie_means: read_f64s(&mut r)?,
        viewer_means: read_f64s(&mut r)?,
        global_mean: r.read_f64::<LE>().map_err(truncated)?,
        provenance: Provenance {
            training_subset: read_u32s(&mut r)?,
            config_hash: r.read_u64::<LE>().map_err(truncated)?,
        },
    };
    model.validate()?;
    Ok(model)
}

/// `movie_id,attr_0,...,attr_{d-1}`
pub fn export_weights(model: &BarModel, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let mut body = || -> std::io::Result<()> {
        let header: Vec<String> = (0..model.d).map(|k| format!("attr_{k}")).collect();
        writeln!(w, "movie_id,{}", header.join(","))?;
        for (m, id) in model.movie_ids.iter().enumerate() {
            let row: Vec<String> = model.movie_weights(m).iter().map(f64::to_string).collect();
            writeln!(w, "{id},{}", row.join(","))?;
        }
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

/// `viewer_id,bitstring` with attribute 0 first.
pub fn export_bits(model: &BarModel, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "viewer_id,bitstring")?;
        for (v, id) in model.viewer_ids.iter().enumerate() {
            let s: String = model
                .viewer_bits(v)
                .iter()
                .map(|&b| if b == 1 { '1' } else { '0' })
                .collect();
            writeln!(w, "{id},{s}")?;
        }
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> BarModel {
        BarModel {
            d: 3,
            viewer_ids: vec!["a".into(), "b".into(), "c".into()],
            movie_ids: vec!["x".into(), "y".into()],
            titles: vec![Some("Ex, The".into()), None],
            bits: vec![1, 0, 1, 0, 0, 0, 1, 1, 1],
            weights: vec![0.1, -0.2, 1.0 / 3.0, f64::MIN_POSITIVE, -0.0, 7.5],
            movie_means: vec![3.5, 2.25],
            viewer_means: vec![0.1, -0.1, 0.0],
            global_mean: 3.0,
            provenance: Provenance { training_subset: vec![1], config_hash: 42 },
        }
    }

    #[test]
    fn model_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bar");
        let m = model();
        write_model(&m, &p).unwrap();
        let back = read_model(&p).unwrap();
        assert_eq!(back, m);
        for (a, b) in back.weights.iter().zip(&m.weights) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(sniff(&p).unwrap(), FileKind::Model);
    }

    #[test]
    fn rejects_wrong_magic_and_version() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bar");
        write_model(&model(), &p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[4] = 9;
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_model(&p), Err(Error::Format(_))));
        assert!(read_solve(&p).is_err());
        bytes.truncate(20);
        bytes[4] = 1;
        std::fs::write(&p, &bytes).unwrap();
        assert!(read_model(&p).is_err());
    }

    #[test]
    fn text_exports() {
        let dir = tempfile::tempdir().unwrap();
        let m = model();
        export_weights(&m, &dir.path().join("w.csv")).unwrap();
        export_bits(&m, &dir.path().join("b.csv")).unwrap();
        let w = std::fs::read_to_string(dir.path().join("w.csv")).unwrap();
        assert!(w.starts_with("movie_id,attr_0,attr_1,attr_2\nx,0.1,-0.2,"));
        let b = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
        assert_eq!(b, "viewer_id,bitstring\na,101\nb,000\nc,111\n");
    }
}
