//! Reports that make a learned model readable: weight histograms, the
//! movies at either end of each attribute, and how common each bit is.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fit::BarModel;

pub const DEFAULT_BINS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `counts.len() + 1` ascending edges. All bins are half-open except the
    /// last, which includes its upper edge.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedMovie {
    pub movie: usize,
    pub id: String,
    pub title: Option<String>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeReport {
    pub attribute: usize,
    pub histogram: Histogram,
    pub top: Vec<RankedMovie>,
    pub bottom: Vec<RankedMovie>,
    pub prevalence: f64,
}

fn check_attribute(model: &BarModel, attribute: usize) -> Result<()> {
    if attribute >= model.d {
        return Err(Error::InvalidArgument(format!(
            "attribute {attribute} out of range (d = {})",
            model.d
        )));
    }
    Ok(())
}

/// Equal-width histogram of one attribute's weights over `[min, max]`.
/// When every weight is the same there is a single zero-width bin.
pub fn histogram(model: &BarModel, attribute: usize, bins: usize) -> Result<Histogram> {
    check_attribute(model, attribute)?;
    if bins == 0 {
        return Err(Error::InvalidArgument("bin count must be at least 1".into()));
    }
    Ok(histogram_of(&model.attribute_weights(attribute), bins))
}

pub fn histogram_of(values: &[f64], bins: usize) -> Histogram {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        return Histogram { edges: vec![0.0, 0.0], counts: vec![0] };
    }
    if lo == hi {
        return Histogram { edges: vec![lo, hi], counts: vec![values.len()] };
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0usize; bins];
    for &x in values {
        let k = (((x - lo) / width).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    Histogram { edges, counts }
}

/// The `k` highest and `k` lowest weighted movies for one attribute. Top is
/// descending, bottom ascending; equal weights keep movie-index order.
pub fn rank_attribute(
    model: &BarModel,
    attribute: usize,
    k: usize,
) -> Result<(Vec<RankedMovie>, Vec<RankedMovie>)> {
    check_attribute(model, attribute)?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let weights = model.attribute_weights(attribute);
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(a.cmp(&b)));
    let entry = |m: usize| RankedMovie {
        movie: m,
        id: model.movie_ids[m].clone(),
        title: model.titles[m].clone(),
        weight: weights[m],
    };
    let k = k.min(order.len());
    let bottom = order[..k].iter().map(|&m| entry(m)).collect();
    let mut desc = order.clone();
    desc.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let top = desc[..k].iter().map(|&m| entry(m)).collect();
    Ok((top, bottom))
}

/// Fraction of viewers with each bit set.
pub fn bit_prevalence(model: &BarModel) -> Result<Vec<f64>> {
    let nv = model.num_viewers();
    if nv == 0 {
        return Err(Error::Empty("viewer set"));
    }
    let mut counts = vec![0usize; model.d];
    for row in model.bits.chunks_exact(model.d) {
        for (c, &b) in counts.iter_mut().zip(row) {
            *c += usize::from(b);
        }
    }
    Ok(counts.iter().map(|&c| c as f64 / nv as f64).collect())
}

pub fn attribute_reports(model: &BarModel, k: usize, bins: usize) -> Result<Vec<AttributeReport>> {
    let prevalence = bit_prevalence(model)?;
    (0..model.d)
        .map(|a| {
            let (top, bottom) = rank_attribute(model, a, k)?;
            Ok(AttributeReport {
                attribute: a,
                histogram: histogram(model, a, bins)?,
                top,
                bottom,
                prevalence: prevalence[a],
            })
        })
        .collect()
}

/// Pairing of learned attributes with planted ones.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeMatch {
    pub learned: usize,
    pub planted: usize,
    pub correlation: f64,
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Matches learned attributes to planted ones by maximizing the total
/// absolute correlation between weight columns over all permutations.
/// A negative correlation means the learned bit is the complement of the
/// planted one. Intended for small `d` (exhaustive search over `d!`).
pub fn match_attributes(learned: &BarModel, planted: &BarModel) -> Result<Vec<AttributeMatch>> {
    if learned.d != planted.d || learned.num_movies() != planted.num_movies() {
        return Err(Error::Dimension("models differ in d or movie count".into()));
    }
    let d = learned.d;
    if d > 9 {
        return Err(Error::InvalidArgument(format!("exhaustive matching for d = {d} is too slow")));
    }
    let cols_l: Vec<Vec<f64>> = (0..d).map(|a| learned.attribute_weights(a)).collect();
    let cols_p: Vec<Vec<f64>> = (0..d).map(|a| planted.attribute_weights(a)).collect();
    let corr: Vec<Vec<f64>> = cols_l
        .iter()
        .map(|l| cols_p.iter().map(|p| correlation(l, p)).collect())
        .collect();

    let mut perm: Vec<usize> = (0..d).collect();
    let mut best = (f64::NEG_INFINITY, perm.clone());
    permute(&mut perm, 0, &mut |p| {
        let score: f64 = p.iter().enumerate().map(|(l, &q)| corr[l][q].abs()).sum();
        if score > best.0 {
            best = (score, p.to_vec());
        }
    });
    Ok(best
        .1
        .iter()
        .enumerate()
        .map(|(l, &p)| AttributeMatch { learned: l, planted: p, correlation: corr[l][p] })
        .collect())
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// `attr,bin_lo,bin_hi,count`
pub fn write_histograms(reports: &[AttributeReport], path: &Path) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "#schema=1")?;
        writeln!(w, "attr,bin_lo,bin_hi,count")?;
        for r in reports {
            let h = &r.histogram;
            for (i, c) in h.counts.iter().enumerate() {
                writeln!(w, "{},{},{},{}", r.attribute, h.edges[i], h.edges[i + 1], c)?;
            }
        }
        Ok(())
    })
}

/// `attr,rank,movie_id,title,weight,end` for one attribute.
pub fn write_ranking(report: &AttributeReport, path: &Path) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "#schema=1")?;
        writeln!(w, "attr,rank,movie_id,title,weight,end")?;
        for (end, list) in [("top", &report.top), ("bottom", &report.bottom)] {
            for (rank, m) in list.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    report.attribute,
                    rank + 1,
                    csv_field(&m.id),
                    csv_field(m.title.as_deref().unwrap_or("")),
                    m.weight,
                    end
                )?;
            }
        }
        Ok(())
    })
}

/// `attr,prevalence`
pub fn write_prevalence(reports: &[AttributeReport], path: &Path) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "#schema=1")?;
        writeln!(w, "attr,prevalence")?;
        for r in reports {
            writeln!(w, "{},{}", r.attribute, r.prevalence)?;
        }
        Ok(())
    })
}
