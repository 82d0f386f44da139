//! Raw ratings: sparse `(viewer, movie, stars)` triples with dense index maps.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Partition {
    Train,
    Probe,
}

impl Partition {
    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Probe => "probe",
        }
    }

    pub fn parse(s: &str) -> Option<Partition> {
        match s.trim() {
            "train" => Some(Partition::Train),
            "probe" => Some(Partition::Probe),
            _ => None,
        }
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub viewer: u32,
    pub movie: u32,
    /// Star rating. Loaded files carry integers 1..=5; unquantized synthetic
    /// data may carry any real in `[1, 5]`.
    pub stars: f64,
    pub partition: Partition,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RatingsDataset {
    viewers: Vec<String>,
    movies: Vec<String>,
    titles: Vec<Option<String>>,
    entries: Vec<Rating>,
}

impl RatingsDataset {
    pub fn viewers(&self) -> &[String] {
        &self.viewers
    }

    pub fn movies(&self) -> &[String] {
        &self.movies
    }

    pub fn titles(&self) -> &[Option<String>] {
        &self.titles
    }

    pub fn title(&self, movie: usize) -> Option<&str> {
        self.titles.get(movie).and_then(|t| t.as_deref())
    }

    pub fn entries(&self) -> &[Rating] {
        &self.entries
    }

    pub fn num_viewers(&self) -> usize {
        self.viewers.len()
    }

    pub fn num_movies(&self) -> usize {
        self.movies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, partition: Partition) -> usize {
        self.entries
            .iter()
            .filter(|e| e.partition == partition)
            .count()
    }

    pub fn set_title(&mut self, movie: usize, title: impl Into<String>) {
        self.titles[movie] = Some(title.into());
    }

    /// Assembles a dataset from raw parts, checking every invariant.
    pub fn from_parts(
        viewers: Vec<String>,
        movies: Vec<String>,
        titles: Vec<Option<String>>,
        entries: Vec<Rating>,
    ) -> Result<Self> {
        if titles.len() != movies.len() {
            return Err(Error::Format(format!(
                "{} titles for {} movies",
                titles.len(),
                movies.len()
            )));
        }
        let mut seen = HashSet::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.viewer as usize >= viewers.len() || e.movie as usize >= movies.len() {
                return Err(Error::Format(format!("entry {i} has an index out of range")));
            }
            check_stars(e.stars).map_err(|m| Error::Format(format!("entry {i}: {m}")))?;
            if !seen.insert((e.viewer, e.movie, e.partition)) {
                return Err(Error::Format(format!(
                    "entry {i}: duplicate pair ({}, {})",
                    viewers[e.viewer as usize], movies[e.movie as usize]
                )));
            }
        }
        Ok(RatingsDataset {
            viewers,
            movies,
            titles,
            entries,
        })
    }

    /// Writes `viewer_id,movie_id,rating,partition`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "viewer_id,movie_id,rating,partition")?;
            for e in &self.entries {
                writeln!(
                    out,
                    "{},{},{},{}",
                    self.viewers[e.viewer as usize],
                    self.movies[e.movie as usize],
                    e.stars,
                    e.partition
                )?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

fn check_stars(stars: f64) -> std::result::Result<(), String> {
    if stars.is_finite() && (1.0..=5.0).contains(&stars) {
        Ok(())
    } else {
        Err(format!("rating {stars} outside 1-5"))
    }
}

/// Incremental construction with first-appearance index assignment.
#[derive(Debug, Default)]
pub struct DatasetBuilder {
    viewer_index: HashMap<String, u32>,
    movie_index: HashMap<String, u32>,
    data: RatingsDataset,
    seen: HashSet<(u32, u32, Partition)>,
}

impl DatasetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_viewer(&mut self, id: &str) -> u32 {
        if let Some(&i) = self.viewer_index.get(id) {
            return i;
        }
        let i = self.data.viewers.len() as u32;
        self.data.viewers.push(id.to_owned());
        self.viewer_index.insert(id.to_owned(), i);
        i
    }

    pub fn register_movie(&mut self, id: &str) -> u32 {
        if let Some(&i) = self.movie_index.get(id) {
            return i;
        }
        let i = self.data.movies.len() as u32;
        self.data.movies.push(id.to_owned());
        self.data.titles.push(None);
        self.movie_index.insert(id.to_owned(), i);
        i
    }

    /// Adds one rating. The error string is meant to be wrapped with the
    /// caller's position information.
    pub fn push(
        &mut self,
        viewer: &str,
        movie: &str,
        stars: f64,
        partition: Partition,
    ) -> std::result::Result<(), String> {
        check_stars(stars)?;
        let v = self.register_viewer(viewer);
        let m = self.register_movie(movie);
        if !self.seen.insert((v, m, partition)) {
            return Err(format!(
                "duplicate pair (viewer {viewer}, movie {movie}) in {partition} partition"
            ));
        }
        self.data.entries.push(Rating {
            viewer: v,
            movie: m,
            stars,
            partition,
        });
        Ok(())
    }

    pub fn movie_index(&self, id: &str) -> Option<u32> {
        self.movie_index.get(id).copied()
    }

    pub fn set_title(&mut self, movie: u32, title: String) {
        self.data.titles[movie as usize] = Some(title);
    }

    pub fn finish(self) -> RatingsDataset {
        self.data
    }
}

/// Loads `viewer_id,movie_id,rating[,partition]` with a mandatory header.
pub fn load_csv(path: &Path) -> Result<RatingsDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let columns: Vec<&str> = header.iter().map(str::trim).collect();
    let has_partition = match columns.as_slice() {
        ["viewer_id", "movie_id", "rating"] => false,
        ["viewer_id", "movie_id", "rating", "partition"] => true,
        _ => {
            return Err(Error::parse(
                path,
                1,
                format!(
                    "expected header viewer_id,movie_id,rating[,partition], found {}",
                    columns.join(",")
                ),
            ))
        }
    };
    let width = if has_partition { 4 } else { 3 };

    let mut builder = DatasetBuilder::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != width {
            return Err(Error::parse(
                path,
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let stars: f64 = record[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad rating {:?}", &record[2])))?;
        let partition = if has_partition {
            Partition::parse(&record[3]).ok_or_else(|| {
                Error::parse(path, line, format!("bad partition {:?}", &record[3]))
            })?
        } else {
            Partition::Train
        };
        builder
            .push(record[0].trim(), record[1].trim(), stars, partition)
            .map_err(|m| Error::parse(path, line, m))?;
    }
    Ok(builder.finish())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

struct MovieFile {
    path: PathBuf,
    movie_id: String,
    /// `(customer id, stars, line number)`
    rows: Vec<(String, u8, usize)>,
}

const TITLES_FILE: &str = "movie_titles.txt";
const PROBE_FILE: &str = "probe.txt";
const QUALIFYING_FILE: &str = "qualifying.txt";

/// Loads a directory in the Netflix distribution layout: one file per
/// movie, each starting with `<movieId>:` followed by
/// `<customerId>,<rating>,<YYYY-MM-DD>` lines.
///
/// `movie_titles.txt` (`id,year,title`) and `probe.txt` are picked up when
/// present; probe pairs are moved to the probe partition. Files are read in
/// parallel and merged in file-name order.
pub fn load_netflix(dir: &Path) -> Result<RatingsDataset> {
    let mut paths = Vec::new();
    let mut titles_path = None;
    let mut probe_path = None;
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') {
            continue;
        }
        match name.as_str() {
            TITLES_FILE => titles_path = Some(path),
            PROBE_FILE => probe_path = Some(path),
            QUALIFYING_FILE => {}
            _ => paths.push(path),
        }
    }
    paths.sort();

    let parsed: Vec<MovieFile> = paths
        .par_iter()
        .map(|p| parse_movie_file(p))
        .collect::<Result<_>>()?;

    let mut builder = DatasetBuilder::new();
    for file in &parsed {
        builder.register_movie(&file.movie_id);
        for (customer, stars, line) in &file.rows {
            builder
                .push(customer, &file.movie_id, f64::from(*stars), Partition::Train)
                .map_err(|m| Error::parse(&file.path, *line, m))?;
        }
    }

    if let Some(path) = titles_path {
        apply_titles(&mut builder, &path)?;
    }
    let mut dataset = builder.finish();
    if let Some(path) = probe_path {
        apply_netflix_probe(&mut dataset, &path)?;
    }
    Ok(dataset)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    // the original distribution is Latin-1; titles may not be valid UTF-8
    let text = String::from_utf8_lossy(&bytes);
    Ok(text.lines().map(str::to_owned).collect())
}

fn parse_header(line: &str) -> Option<&str> {
    let id = line.trim().strip_suffix(':')?;
    (!id.is_empty() && id.bytes().all(|b| b.is_ascii_digit())).then_some(id)
}

fn parse_movie_file(path: &Path) -> Result<MovieFile> {
    let lines = read_lines(path)?;
    let mut iter = lines.iter().enumerate();
    let movie_id = match iter.next() {
        Some((_, l)) => parse_header(l)
            .ok_or_else(|| Error::parse(path, 1, format!("malformed header line {l:?}")))?,
        None => return Err(Error::parse(path, 1, "missing header line")),
    }
    .to_owned();

    let mut rows = Vec::with_capacity(lines.len().saturating_sub(1));
    let mut seen = HashSet::with_capacity(lines.len());
    for (i, line) in iter {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (customer, stars) =
            parse_rating_line(line).map_err(|m| Error::parse(path, lineno, m))?;
        if !seen.insert(customer) {
            return Err(Error::parse(
                path,
                lineno,
                format!("duplicate pair (viewer {customer}, movie {movie_id})"),
            ));
        }
        rows.push((customer.to_owned(), stars, lineno));
    }
    Ok(MovieFile {
        path: path.to_owned(),
        movie_id,
        rows,
    })
}

fn parse_rating_line(line: &str) -> std::result::Result<(&str, u8), String> {
    let mut fields = line.split(',');
    let (Some(customer), Some(rating), Some(date), None) =
        (fields.next(), fields.next(), fields.next(), fields.next())
    else {
        return Err(format!("expected customerId,rating,date in {line:?}"));
    };
    let customer = customer.trim();
    if customer.is_empty() || !customer.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("bad customer id {customer:?}"));
    }
    let stars: u8 = rating
        .trim()
        .parse()
        .map_err(|_| format!("bad rating {rating:?}"))?;
    if !(1..=5).contains(&stars) {
        return Err(format!("rating {stars} outside 1-5"));
    }
    check_date(date.trim())?;
    Ok((customer, stars))
}

/// Validates `YYYY-MM-DD`. The date itself is not kept.
fn check_date(date: &str) -> std::result::Result<(), String> {
    let b = date.as_bytes();
    let digits = |r: std::ops::Range<usize>| b[r].iter().all(u8::is_ascii_digit);
    let ok = b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && digits(0..4)
        && digits(5..7)
        && digits(8..10)
        && {
            let month: u32 = date[5..7].parse().unwrap_or(0);
            let day: u32 = date[8..10].parse().unwrap_or(0);
            (1..=12).contains(&month) && (1..=31).contains(&day)
        };
    if ok {
        Ok(())
    } else {
        Err(format!("bad date {date:?}"))
    }
}

fn apply_titles(builder: &mut DatasetBuilder, path: &Path) -> Result<()> {
    for (i, line) in read_lines(path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(3, ',');
        let (Some(id), Some(_year), Some(title)) = (fields.next(), fields.next(), fields.next())
        else {
            return Err(Error::parse(path, i + 1, "expected id,year,title"));
        };
        if let Some(m) = builder.movie_index(id.trim()) {
            builder.set_title(m, title.to_owned());
        }
    }
    Ok(())
}

/// Moves the pairs listed in a Netflix probe file (`<movieId>:` headers
/// followed by one customer id per line) from train to probe.
pub fn apply_netflix_probe(dataset: &mut RatingsDataset, path: &Path) -> Result<()> {
    let movie_index: HashMap<&str, u32> = dataset
        .movies
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i as u32))
        .collect();
    let viewer_index: HashMap<&str, u32> = dataset
        .viewers
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i as u32))
        .collect();
    let entry_index: HashMap<(u32, u32), usize> = dataset
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.partition == Partition::Train)
        .map(|(i, e)| ((e.viewer, e.movie), i))
        .collect();

    let mut to_probe = Vec::new();
    let mut current = None;
    for (i, line) in read_lines(path)?.iter().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(id) = parse_header(line) {
            current = Some(*movie_index.get(id).ok_or_else(|| {
                Error::parse(path, lineno, format!("probe movie {id} not in dataset"))
            })?);
            continue;
        }
        let movie = current.ok_or_else(|| Error::parse(path, lineno, "missing movie header"))?;
        let viewer = *viewer_index.get(line).ok_or_else(|| {
            Error::parse(path, lineno, format!("probe viewer {line} not in dataset"))
        })?;
        let idx = *entry_index.get(&(viewer, movie)).ok_or_else(|| {
            Error::parse(path, lineno, format!("probe pair ({line}) has no rating"))
        })?;
        to_probe.push(idx);
    }
    for idx in to_probe {
        dataset.entries[idx].partition = Partition::Probe;
    }
    Ok(())
}
