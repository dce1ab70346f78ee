//! CSV and JSON report emission.
//!
//! CSV numbers use `.` as decimal separator and 9 significant digits; a
//! metric that was not computed is an empty cell.
//!
//! | file | header |
//! |------|--------|
//! | `records.csv` | `sample_id,class,word,as_object,as_word,gs_object,gs_word,object_pixels,word_frames,image_pixels,utterance_frames,frame_ms` |
//! | `classes.csv` | `class,count,as_object,as_word,gs_object,gs_word` |
//! | `confusion.csv` | `sample_id,object_class,word_class,word,metric,score` |
//! | `scatter_<metric>_<covariate>.csv` | `kind,label,x,y,count` |

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregation::{scatter_data, Aggregate, ClassScore, Covariate, LinearFit, Scatter, Totals};
use crate::error::{Error, Result};
use crate::metrics::{Metric, ScoreRecord};
use crate::pipeline::ConfusionRecord;

pub const RECORDS_HEADER: [&str; 12] = [
    "sample_id",
    "class",
    "word",
    "as_object",
    "as_word",
    "gs_object",
    "gs_word",
    "object_pixels",
    "word_frames",
    "image_pixels",
    "utterance_frames",
    "frame_ms",
];

/// Fixed-point rendering with 9 significant digits.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0.00000000".to_owned() } else { v.to_string() };
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // rounding may carry into a new leading digit, e.g. 9.999999999 -> 10.00000000
    let significant = s.chars().filter(char::is_ascii_digit).skip_while(|&c| c == '0').count();
    if significant > 9 && decimals > 0 {
        format!("{v:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_sig9).unwrap_or_default()
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub fn write_records_csv<W: Write>(w: W, records: &[ScoreRecord]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(RECORDS_HEADER)?;
    for r in records {
        out.write_record([
            r.sample_id.clone(),
            r.class_id.clone(),
            r.word.clone(),
            opt(r.as_object),
            opt(r.as_word),
            opt(r.gs_object),
            opt(r.gs_word),
            r.object_pixels.to_string(),
            r.word_frames.to_string(),
            r.image_pixels.to_string(),
            r.utterance_frames.to_string(),
            format_sig9(r.frame_ms),
        ])?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Vec<ScoreRecord>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(RECORDS_HEADER) {
        return Err(Error::Record {
            path: path.to_owned(),
            line: 1,
            message: format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>()),
        });
    }
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let err = |message: String| Error::Record {
            path: path.to_owned(),
            line,
            message,
        };
        let float = |k: usize| -> Result<Option<f64>> {
            let cell = &row[k];
            if cell.is_empty() {
                return Ok(None);
            }
            cell.parse()
                .map(Some)
                .map_err(|_| err(format!("{}: {cell:?} is not a number", RECORDS_HEADER[k])))
        };
        let count = |k: usize| -> Result<usize> {
            row[k]
                .parse()
                .map_err(|_| err(format!("{}: {:?} is not a count", RECORDS_HEADER[k], &row[k])))
        };
        records.push(ScoreRecord {
            sample_id: row[0].to_owned(),
            class_id: row[1].to_owned(),
            word: row[2].to_owned(),
            as_object: float(3)?,
            as_word: float(4)?,
            gs_object: float(5)?,
            gs_word: float(6)?,
            object_pixels: count(7)?,
            word_frames: count(8)?,
            image_pixels: count(9)?,
            utterance_frames: count(10)?,
            frame_ms: float(11)?.ok_or_else(|| err("frame_ms missing".into()))?,
        });
    }
    Ok(records)
}

pub fn write_classes_csv<W: Write>(w: W, classes: &[ClassScore]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["class", "count", "as_object", "as_word", "gs_object", "gs_word"])?;
    for c in classes {
        out.write_record([
            c.class_id.clone(),
            c.count.to_string(),
            opt(c.as_object),
            opt(c.as_word),
            opt(c.gs_object),
            opt(c.gs_word),
        ])?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn write_confusion_csv<W: Write>(w: W, cells: &[ConfusionRecord]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["sample_id", "object_class", "word_class", "word", "metric", "score"])?;
    for r in cells {
        out.write_record([
            r.sample_id.as_str(),
            &r.cell.object_class,
            &r.cell.word_class,
            &r.cell.word,
            r.cell.metric.name(),
            &format_sig9(r.cell.score),
        ])?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn write_scatter_csv<W: Write>(w: W, scatter: &Scatter) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["kind", "label", "x", "y", "count"])?;
    let rows = scatter
        .points
        .iter()
        .map(|p| ("class", p))
        .chain(scatter.bins.iter().map(|p| ("bin", p)));
    for (kind, p) in rows {
        out.write_record([kind, &p.label, &format_sig9(p.x), &format_sig9(p.y), &p.count.to_string()])?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))
}

/// Linear fits of one metric against both covariates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricFits {
    pub object_size: Option<LinearFit>,
    pub word_duration: Option<LinearFit>,
}

pub fn metric_fits(records: &[ScoreRecord], metrics: &[Metric]) -> BTreeMap<String, MetricFits> {
    metrics
        .iter()
        .map(|&m| {
            let fit = |c: Covariate| scatter_data(records, c, m, None).ok().and_then(|s| s.fit);
            (
                m.name().to_owned(),
                MetricFits {
                    object_size: fit(Covariate::ObjectSize),
                    word_duration: fit(Covariate::WordDuration),
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub seed: u64,
    pub totals: Totals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub mode: String,
    pub upsample: String,
    pub softmax: String,
    pub temperature: f32,
    pub threshold: f64,
    pub seed: u64,
    pub metrics: Vec<Metric>,
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub samples_in_ground_truth: usize,
    pub samples_scored: usize,
    pub samples_missing: usize,
    pub samples_failed: usize,
    pub pairs_scored: usize,
    pub pairs_skipped: usize,
    pub pairs_below_threshold: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub settings: RunSettings,
    pub counts: Counts,
    pub totals: Totals,
    pub classes: Vec<ClassScore>,
    /// Classes present in the ground truth with no scored pair.
    pub empty_classes: Vec<String>,
    pub fits: BTreeMap<String, MetricFits>,
    pub baseline: Option<BaselineComparison>,
}

impl Summary {
    pub fn new(
        settings: RunSettings,
        counts: Counts,
        aggregate: Aggregate,
        empty_classes: Vec<String>,
        fits: BTreeMap<String, MetricFits>,
        baseline: Option<BaselineComparison>,
    ) -> Self {
        Self {
            settings,
            counts,
            totals: aggregate.totals,
            classes: aggregate.classes,
            empty_classes,
            fits,
            baseline,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}
