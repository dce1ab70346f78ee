//! Class-level aggregation, scatter fits and retrieval recall.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Metric, ScoreRecord};

/// Mean score of every metric over the records of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    #[serde(rename = "class")]
    pub class_id: String,
    pub count: usize,
    pub as_object: Option<f64>,
    pub as_word: Option<f64>,
    pub gs_object: Option<f64>,
    pub gs_word: Option<f64>,
}

impl ClassScore {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::AsObject => self.as_object,
            Metric::AsWord => self.as_word,
            Metric::GsObject => self.gs_object,
            Metric::GsWord => self.gs_word,
        }
    }
}

/// Total score per metric: the unweighted mean of class means.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Totals {
    pub as_object: Option<f64>,
    pub as_word: Option<f64>,
    pub gs_object: Option<f64>,
    pub gs_word: Option<f64>,
}

impl Totals {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::AsObject => self.as_object,
            Metric::AsWord => self.as_word,
            Metric::GsObject => self.gs_object,
            Metric::GsWord => self.gs_word,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    /// Sorted by class id.
    pub classes: Vec<ClassScore>,
    pub totals: Totals,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Macro average: class means first, then the mean over classes.
pub fn aggregate(records: &[ScoreRecord]) -> Result<Aggregate> {
    if records.is_empty() {
        return Err(Error::Empty("no score records to aggregate".into()));
    }
    let mut by_class: BTreeMap<&str, Vec<&ScoreRecord>> = BTreeMap::new();
    for r in records {
        by_class.entry(r.class_id.as_str()).or_default().push(r);
    }
    let classes: Vec<ClassScore> = by_class
        .into_iter()
        .map(|(class_id, rs)| {
            let m = |metric: Metric| mean(rs.iter().filter_map(|r| r.get(metric)));
            ClassScore {
                class_id: class_id.to_owned(),
                count: rs.len(),
                as_object: m(Metric::AsObject),
                as_word: m(Metric::AsWord),
                gs_object: m(Metric::GsObject),
                gs_word: m(Metric::GsWord),
            }
        })
        .collect();
    let total = |metric: Metric| mean(classes.iter().filter_map(|c| c.get(metric)));
    let totals = Totals {
        as_object: total(Metric::AsObject),
        as_word: total(Metric::AsWord),
        gs_object: total(Metric::GsObject),
        gs_word: total(Metric::GsWord),
    };
    Ok(Aggregate { classes, totals })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariate {
    /// |S_c| / (N_x * N_y).
    ObjectSize,
    /// Word duration in milliseconds.
    WordDuration,
}

impl Covariate {
    pub fn name(self) -> &'static str {
        match self {
            Covariate::ObjectSize => "object_size",
            Covariate::WordDuration => "word_duration",
        }
    }

    fn of(self, r: &ScoreRecord) -> f64 {
        match self {
            Covariate::ObjectSize => r.relative_object_size(),
            Covariate::WordDuration => r.word_duration_ms(),
        }
    }
}

impl std::str::FromStr for Covariate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "object_size" => Ok(Covariate::ObjectSize),
            "word_duration" => Ok(Covariate::WordDuration),
            _ => Err(Error::InvalidArgument(format!("unknown covariate {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares line; `None` when the x values have no spread.
pub fn ols_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx.is_nan() || sxx <= f64::EPSILON * mx.abs().max(1.0) * n {
        return None;
    }
    let slope = sxy / sxx;
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub label: String,
    pub x: f64,
    pub y: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scatter {
    pub covariate: Covariate,
    pub metric: Metric,
    /// One point per class: mean covariate against mean score.
    pub points: Vec<ScatterPoint>,
    /// Equal-width bins over the class points, when requested.
    pub bins: Vec<ScatterPoint>,
    /// Fit over the class points.
    pub fit: Option<LinearFit>,
}

pub fn scatter_data(
    records: &[ScoreRecord],
    covariate: Covariate,
    metric: Metric,
    n_bins: Option<usize>,
) -> Result<Scatter> {
    let mut by_class: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
    for r in records {
        if let Some(score) = r.get(metric) {
            let acc = by_class.entry(r.class_id.as_str()).or_default();
            acc.0 += covariate.of(r);
            acc.1 += score;
            acc.2 += 1;
        }
    }
    if by_class.is_empty() {
        return Err(Error::Empty(format!("no records carry {metric}")));
    }
    let points: Vec<ScatterPoint> = by_class
        .into_iter()
        .map(|(label, (x, y, n))| ScatterPoint {
            label: label.to_owned(),
            x: x / n as f64,
            y: y / n as f64,
            count: n,
        })
        .collect();
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.y)).collect();
    let fit = ols_fit(&xy);
    if fit.is_none() {
        log::warn!("{} has no spread across classes; no linear fit", covariate.name());
    }
    let bins = match n_bins {
        Some(0) => return Err(Error::InvalidArgument("bin count must be at least 1".into())),
        Some(n) => bin_points(&points, n),
        None => Vec::new(),
    };
    Ok(Scatter {
        covariate,
        metric,
        points,
        bins,
        fit,
    })
}

fn bin_points(points: &[ScatterPoint], n_bins: usize) -> Vec<ScatterPoint> {
    let lo = points.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n_bins as f64;
    let mut acc = vec![(0.0, 0.0, 0usize); n_bins];
    for p in points {
        let i = if width > 0.0 {
            (((p.x - lo) / width) as usize).min(n_bins - 1)
        } else {
            0
        };
        acc[i].0 += p.x;
        acc[i].1 += p.y;
        acc[i].2 += 1;
    }
    acc.into_iter()
        .enumerate()
        .filter(|(_, a)| a.2 > 0)
        .map(|(i, (x, y, n))| ScatterPoint {
            label: format!("bin{i}"),
            x: x / n as f64,
            y: y / n as f64,
            count: n,
        })
        .collect()
}

/// Square matrix of speech-to-image similarities; entry `(i, j)` compares
/// speech `i` with image `j` and the true matches are on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || values.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "similarity matrix of size {n} needs {} values, got {}",
                n * n,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("similarity matrix has non-finite values".into()));
        }
        Ok(Self { n, values })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, speech: usize, image: usize) -> f64 {
        self.values[speech * self.n + image]
    }

    /// Parses one row per line, values separated by whitespace, commas or tabs.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut values = Vec::new();
        let mut rows = 0;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let row: Vec<f64> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Record {
                    path: path.to_owned(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
            if rows > 0 && row.len() * rows != values.len() {
                return Err(Error::Record {
                    path: path.to_owned(),
                    line: i + 1,
                    message: format!("row has {} values, previous rows {}", row.len(), values.len() / rows),
                });
            }
            values.extend(row);
            rows += 1;
        }
        if rows * rows != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{}: similarity matrix is {rows} rows by {} columns, not square",
                path.display(),
                values.len().checked_div(rows).unwrap_or(0)
            )));
        }
        Self::new(rows, values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Each speech query ranks all images (rows).
    SpeechToImage,
    /// Each image query ranks all utterances (columns).
    ImageToSpeech,
}

/// Fraction of queries whose true match ranks in the top `k`. Among equal
/// similarities the lower index ranks first.
pub fn recall_at_k(sims: &SimilarityMatrix, k: usize, direction: Direction) -> Result<f64> {
    let n = sims.size();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={n}")));
    }
    let score = |query: usize, candidate: usize| match direction {
        Direction::SpeechToImage => sims.get(query, candidate),
        Direction::ImageToSpeech => sims.get(candidate, query),
    };
    let hits = (0..n)
        .filter(|&q| {
            let target = score(q, q);
            let ahead = (0..n)
                .filter(|&j| {
                    let s = score(q, j);
                    s > target || (s == target && j < q)
                })
                .count();
            ahead < k
        })
        .count();
    Ok(hits as f64 / n as f64)
}
