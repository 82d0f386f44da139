//! Prepared-data cache: the parsed dataset together with its centering and
//! baseline ranking, in one versioned binary file.
//!
//! Layout (little endian): magic `BARC`, `u32` version, viewer id table,
//! movie id table with optional titles, entry triples, then movie means,
//! viewer means, global mean, centered train and probe edges, and the
//! ranking order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::baseline::{rank_baseline, BaselineRanking};
use crate::center::{center, CenteredRatings, Edge};
use crate::dataset::{Partition, Rating, RatingsDataset};
use crate::error::{Error, Result};
use crate::model_io::{read_f64s, read_header, read_len, read_str, truncated, write_f64s, write_str, FORMAT_VERSION};

pub const CACHE_MAGIC: &[u8; 4] = b"BARC";

#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub dataset: RatingsDataset,
    pub centered: CenteredRatings,
    pub ranking: BaselineRanking,
}

impl Prepared {
    pub fn new(dataset: RatingsDataset) -> Result<Self> {
        let centered = center(&dataset)?;
        let ranking = rank_baseline(&centered);
        Ok(Prepared {
            dataset,
            centered,
            ranking,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let ds = &self.dataset;
        w.write_all(CACHE_MAGIC)?;
        w.write_u32::<LE>(FORMAT_VERSION)?;

        w.write_u64::<LE>(ds.num_viewers() as u64)?;
        for id in ds.viewers() {
            write_str(w, id)?;
        }
        w.write_u64::<LE>(ds.num_movies() as u64)?;
        for (id, title) in ds.movies().iter().zip(ds.titles()) {
            write_str(w, id)?;
            match title {
                Some(t) => {
                    w.write_u8(1)?;
                    write_str(w, t)?;
                }
                None => w.write_u8(0)?,
            }
        }
        w.write_u64::<LE>(ds.entries().len() as u64)?;
        for e in ds.entries() {
            w.write_u32::<LE>(e.viewer)?;
            w.write_u32::<LE>(e.movie)?;
            w.write_f64::<LE>(e.stars)?;
            w.write_u8(partition_tag(e.partition))?;
        }

        let c = &self.centered;
        write_f64s(w, &c.movie_means)?;
        write_f64s(w, &c.viewer_means)?;
        w.write_f64::<LE>(c.global_mean)?;
        for edges in [c.train(), c.probe()] {
            w.write_u64::<LE>(edges.len() as u64)?;
            for e in edges {
                w.write_u32::<LE>(e.viewer)?;
                w.write_u32::<LE>(e.movie)?;
                w.write_f64::<LE>(e.stars)?;
                w.write_f64::<LE>(e.residual)?;
            }
        }

        w.write_u64::<LE>(self.ranking.order.len() as u64)?;
        for &m in &self.ranking.order {
            w.write_u32::<LE>(m as u32)?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        read_header(&mut r, CACHE_MAGIC)?;

        let nv = read_len(&mut r)?;
        let viewers = (0..nv).map(|_| read_str(&mut r)).collect::<Result<Vec<_>>>()?;
        let nm = read_len(&mut r)?;
        let mut movies = Vec::with_capacity(nm);
        let mut titles = Vec::with_capacity(nm);
        for _ in 0..nm {
            movies.push(read_str(&mut r)?);
            titles.push(match r.read_u8().map_err(truncated)? {
                0 => None,
                _ => Some(read_str(&mut r)?),
            });
        }
        let ne = read_len(&mut r)?;
        let mut entries = Vec::with_capacity(ne);
        for _ in 0..ne {
            entries.push(Rating {
                viewer: r.read_u32::<LE>().map_err(truncated)?,
                movie: r.read_u32::<LE>().map_err(truncated)?,
                stars: r.read_f64::<LE>().map_err(truncated)?,
                partition: partition_from_tag(r.read_u8().map_err(truncated)?)?,
            });
        }
        let dataset = RatingsDataset::from_parts(viewers, movies, titles, entries)?;

        let movie_means = read_f64s(&mut r)?;
        let viewer_means = read_f64s(&mut r)?;
        let global_mean = r.read_f64::<LE>().map_err(truncated)?;
        let mut read_edges = || -> Result<Vec<Edge>> {
            let n = read_len(&mut r)?;
            (0..n)
                .map(|_| {
                    Ok(Edge {
                        viewer: r.read_u32::<LE>().map_err(truncated)?,
                        movie: r.read_u32::<LE>().map_err(truncated)?,
                        stars: r.read_f64::<LE>().map_err(truncated)?,
                        residual: r.read_f64::<LE>().map_err(truncated)?,
                    })
                })
                .collect()
        };
        let train = read_edges()?;
        let probe = read_edges()?;
        if movie_means.len() != nm || viewer_means.len() != nv {
            return Err(Error::Format("cache means disagree with id tables".into()));
        }
        let centered = CenteredRatings::from_parts(movie_means, viewer_means, global_mean, train, probe)?;

        let n_order = read_len(&mut r)?;
        let order = (0..n_order)
            .map(|_| r.read_u32::<LE>().map(|m| m as usize).map_err(truncated))
            .collect::<Result<Vec<_>>>()?;
        let ranking = rank_baseline(&centered);
        if ranking.order != order {
            return Err(Error::Format("cached ranking does not match the cached ratings".into()));
        }

        Ok(Prepared {
            dataset,
            centered,
            ranking,
        })
    }
}

fn partition_tag(p: Partition) -> u8 {
    match p {
        Partition::Train => 0,
        Partition::Probe => 1,
    }
}

fn partition_from_tag(tag: u8) -> Result<Partition> {
    match tag {
        0 => Ok(Partition::Train),
        1 => Ok(Partition::Probe),
        x => Err(Error::Format(format!("unknown partition tag {x}"))),
    }
}
