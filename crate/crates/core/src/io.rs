//! Plain-text formats: observation triples, MovieLens `u.data`, dense
//! matrices and link-training pairs.

use std::io::{BufRead, Write};

use ndarray::Array2;

use crate::error::{invalid, Error, Result};
use crate::fitting::TrainingPairs;
use crate::sampling::{category_of, validate_labels, Observation, ObservationSet};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Non-blank lines with their 1-based line numbers.
fn content_lines(reader: impl BufRead) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push((n + 1, line));
        }
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(parts: &[&str], idx: usize, line: usize, what: &str) -> Result<T> {
    let raw = parts
        .get(idx)
        .ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    raw.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from {raw:?}")))
}

fn label_category(labels: &[f64], value: f64, line: usize) -> Result<usize> {
    category_of(labels, value)
        .ok_or_else(|| parse_err(line, format!("value {value} is not one of the labels {labels:?}")))
}

/// A raw observation triple as stored on disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelledCell {
    pub row: usize,
    pub col: usize,
    pub label: f64,
}

/// Reads `i<TAB>j<TAB>label` lines (0-based indices).
pub fn read_cells_tsv(reader: impl BufRead) -> Result<Vec<LabelledCell>> {
    content_lines(reader)?
        .into_iter()
        .map(|(n, line)| {
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 3 {
                return Err(parse_err(n, format!("expected 3 tab-separated fields, found {}", parts.len())));
            }
            Ok(LabelledCell {
                row: field(&parts, 0, n, "row index")?,
                col: field(&parts, 1, n, "column index")?,
                label: field(&parts, 2, n, "label")?,
            })
        })
        .collect()
}

/// Builds an observation set from raw cells. Dimensions default to the
/// largest index plus one.
pub fn cells_to_observations(
    cells: &[LabelledCell],
    labels: &[f64],
    dims: Option<(usize, usize)>,
) -> Result<ObservationSet> {
    validate_labels(labels)?;
    if cells.is_empty() {
        return Err(invalid("no observations"));
    }
    let (d1, d2) = match dims {
        Some(d) => d,
        None => (
            cells.iter().map(|c| c.row).max().unwrap_or(0) + 1,
            cells.iter().map(|c| c.col).max().unwrap_or(0) + 1,
        ),
    };
    let entries = cells
        .iter()
        .enumerate()
        .map(|(n, c)| {
            Ok(Observation {
                row: c.row,
                col: c.col,
                category: label_category(labels, c.label, n + 1)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ObservationSet::new(d1, d2, labels.to_vec(), entries)
}

pub fn read_observations_tsv(
    reader: impl BufRead,
    labels: &[f64],
    dims: Option<(usize, usize)>,
) -> Result<ObservationSet> {
    cells_to_observations(&read_cells_tsv(reader)?, labels, dims)
}

pub fn write_observations_tsv(mut w: impl Write, obs: &ObservationSet) -> Result<()> {
    for o in obs.entries() {
        writeln!(w, "{}\t{}\t{}", o.row, o.col, obs.label(o))?;
    }
    Ok(())
}

/// One MovieLens rating with 1-based ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub rating: f64,
}

/// Reads `user<TAB>item<TAB>rating<TAB>timestamp`; the timestamp is ignored.
pub fn read_udata(reader: impl BufRead) -> Result<Vec<Rating>> {
    content_lines(reader)?
        .into_iter()
        .map(|(n, line)| {
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() < 3 {
                return Err(parse_err(n, format!("expected at least 3 tab-separated fields, found {}", parts.len())));
            }
            let r = Rating {
                user: field(&parts, 0, n, "user id")?,
                item: field(&parts, 1, n, "item id")?,
                rating: field(&parts, 2, n, "rating")?,
            };
            if r.user == 0 || r.item == 0 {
                return Err(parse_err(n, "ids are 1-based"));
            }
            Ok(r)
        })
        .collect()
}

/// Writes ratings with a zero timestamp.
pub fn write_udata(mut w: impl Write, ratings: &[Rating]) -> Result<()> {
    for r in ratings {
        writeln!(w, "{}\t{}\t{}\t0", r.user, r.item, r.rating)?;
    }
    Ok(())
}

/// Converts ratings to a 0-based observation set of the given dimensions.
pub fn ratings_to_observations(
    ratings: &[Rating],
    labels: &[f64],
    d1: usize,
    d2: usize,
) -> Result<ObservationSet> {
    let entries = ratings
        .iter()
        .enumerate()
        .map(|(n, r)| {
            Ok(Observation {
                row: r.user - 1,
                col: r.item - 1,
                category: label_category(labels, r.rating, n + 1)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ObservationSet::new(d1, d2, labels.to_vec(), entries)
}

/// Converts an observation set back to 1-based ratings.
pub fn observations_to_ratings(obs: &ObservationSet) -> Vec<Rating> {
    obs.entries()
        .iter()
        .map(|o| Rating {
            user: o.row + 1,
            item: o.col + 1,
            rating: obs.label(o),
        })
        .collect()
}

/// Reads whitespace-separated rows of a dense matrix.
pub fn read_matrix(reader: impl BufRead) -> Result<Array2<f64>> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (n, line) in content_lines(reader)? {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(n, format!("cannot parse number from {t:?}"))))
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(parse_err(n, format!("expected {c} columns, found {}", row.len())));
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| invalid("matrix file is empty"))?;
    Array2::from_shape_vec((rows, cols), values).map_err(|e| invalid(e.to_string()))
}

/// Writes one line per row, entries in shortest round-trip form.
pub fn write_matrix(mut w: impl Write, m: &Array2<f64>) -> Result<()> {
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Reads `x<TAB>k` lines with 1-based category indices.
pub fn read_training_pairs(reader: impl BufRead, k: usize) -> Result<TrainingPairs> {
    let pairs = content_lines(reader)?
        .into_iter()
        .map(|(n, line)| {
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 2 {
                return Err(parse_err(n, format!("expected 2 tab-separated fields, found {}", parts.len())));
            }
            let x: f64 = field(&parts, 0, n, "input")?;
            let c: usize = field(&parts, 1, n, "category")?;
            if c == 0 || c > k {
                return Err(parse_err(n, format!("category {c} is outside 1..={k}")));
            }
            Ok((x, c - 1))
        })
        .collect::<Result<Vec<_>>>()?;
    if pairs.is_empty() {
        return Err(invalid("no training pairs"));
    }
    TrainingPairs::new(k, pairs)
}

pub fn write_training_pairs(mut w: impl Write, data: &TrainingPairs) -> Result<()> {
    for &(x, c) in data.pairs() {
        writeln!(w, "{x}\t{}", c + 1)?;
    }
    Ok(())
}

/// Parses a comma-separated label list such as `1,2,3,4,5`.
pub fn parse_labels(s: &str) -> Result<Vec<f64>> {
    let labels = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| invalid(format!("cannot parse label {t:?}"))))
        .collect::<Result<Vec<_>>>()?;
    validate_labels(&labels)?;
    Ok(labels)
}
