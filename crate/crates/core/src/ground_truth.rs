//! Ground-truth object masks, word spans and word-object concept pairs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default similarity a word-label pair must exceed to form a concept.
pub const DEFAULT_PAIR_THRESHOLD: f64 = 0.5;

/// Binary pixel mask of one object class, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
    class_id: String,
}

impl ObjectMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>, class_id: impl Into<String>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "mask of {width}x{height} needs {} bits, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
            class_id: class_id.into(),
        })
    }

    /// Mask with the pixels for which `f(x, y)` holds.
    pub fn from_fn(
        width: usize,
        height: usize,
        class_id: impl Into<String>,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Self {
        let bits = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self {
            width,
            height,
            bits,
            class_id: class_id.into(),
        }
    }

    /// Axis-aligned rectangle `[x0, x1) x [y0, y1)`.
    pub fn rect(
        width: usize,
        height: usize,
        class_id: impl Into<String>,
        (x0, y0): (usize, usize),
        (x1, y1): (usize, usize),
    ) -> Self {
        Self::from_fn(width, height, class_id, |x, y| (x0..x1).contains(&x) && (y0..y1).contains(&y))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn class_id(&self) -> &str {
        &self.class_id
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// |S_c|: number of set pixels.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn complement(&self) -> ObjectMask {
        ObjectMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
            class_id: self.class_id.clone(),
        }
    }

    /// Run lengths over the row-major bitmap, starting with a (possibly empty)
    /// run of zeros.
    pub fn encode_rle(&self) -> Vec<u64> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u64;
        for &b in &self.bits {
            if b != current {
                runs.push(len);
                current = b;
                len = 0;
            }
            len += 1;
        }
        runs.push(len);
        runs
    }

    pub fn decode_rle(runs: &[u64], width: usize, height: usize, class_id: impl Into<String>) -> Result<Self> {
        let total = runs
            .iter()
            .try_fold(0u64, |acc, &r| acc.checked_add(r))
            .ok_or_else(|| Error::Rle("run lengths overflow".into()))?;
        let expected = (width * height) as u64;
        if total != expected {
            return Err(Error::Rle(format!(
                "runs sum to {total}, mask of {width}x{height} has {expected} pixels"
            )));
        }
        let mut bits = Vec::with_capacity(width * height);
        for (i, &run) in runs.iter().enumerate() {
            bits.extend(std::iter::repeat_n(i % 2 == 1, run as usize));
        }
        Ok(Self {
            width,
            height,
            bits,
            class_id: class_id.into(),
        })
    }
}

/// Pixelwise OR of every mask of `class_id`. Masks of other classes are ignored.
pub fn union_class_masks(masks: &[ObjectMask], class_id: &str) -> Result<ObjectMask> {
    let mut selected = masks.iter().filter(|m| m.class_id == class_id);
    let first = selected
        .next()
        .ok_or_else(|| Error::Empty(format!("no mask of class {class_id:?}")))?;
    let mut out = first.clone();
    for m in selected {
        if (m.width, m.height) != (out.width, out.height) {
            return Err(Error::DimensionMismatch(format!(
                "cannot union {}x{} and {}x{} masks",
                out.width, out.height, m.width, m.height
            )));
        }
        for (o, &b) in out.bits.iter_mut().zip(&m.bits) {
            *o |= b;
        }
    }
    Ok(out)
}

/// Sorted, duplicate-free set of frame indices (T_c).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrameSet(Vec<usize>);

impl FrameSet {
    pub fn new(mut frames: Vec<usize>) -> Self {
        frames.sort_unstable();
        frames.dedup();
        Self(frames)
    }

    pub fn range(range: std::ops::Range<usize>) -> Self {
        Self(range.collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, frame: usize) -> bool {
        self.0.binary_search(&frame).is_ok()
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }
}

/// Timing of one spoken word occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct WordSpan {
    pub class_id: String,
    pub word: String,
    pub onset_ms: f64,
    pub offset_ms: f64,
}

impl WordSpan {
    pub fn new(class_id: impl Into<String>, word: impl Into<String>, onset_ms: f64, offset_ms: f64) -> Result<Self> {
        if !(onset_ms.is_finite() && offset_ms.is_finite() && onset_ms >= 0.0 && onset_ms < offset_ms) {
            return Err(Error::InvalidArgument(format!(
                "word span needs 0 <= onset < offset, got [{onset_ms}, {offset_ms})"
            )));
        }
        Ok(Self {
            class_id: class_id.into(),
            word: word.into(),
            onset_ms,
            offset_ms,
        })
    }

    pub fn duration_ms(&self) -> f64 {
        self.offset_ms - self.onset_ms
    }
}

/// Frames whose start time lies in `[onset_ms, offset_ms)`, clipped to the
/// utterance.
pub fn span_to_frames(span: &WordSpan, frame_ms: f64, total_frames: usize) -> Result<FrameSet> {
    if !(frame_ms.is_finite() && frame_ms > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "frame duration must be positive, got {frame_ms}"
        )));
    }
    let first_at_or_after = |ms: f64| {
        let mut f = (ms / frame_ms).ceil().max(0.0) as usize;
        while f > 0 && (f - 1) as f64 * frame_ms >= ms {
            f -= 1;
        }
        while (f as f64) * frame_ms < ms {
            f += 1;
        }
        f
    };
    let start = first_at_or_after(span.onset_ms).min(total_frames);
    let end = first_at_or_after(span.offset_ms).min(total_frames);
    if start >= end {
        return Err(Error::DegenerateSpan {
            word: span.word.clone(),
            onset_ms: span.onset_ms,
            offset_ms: span.offset_ms,
        });
    }
    Ok(FrameSet::range(start..end))
}

/// A word linked to an object label (a concept).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptPair {
    #[serde(rename = "class")]
    pub class_id: String,
    pub word: String,
    #[serde(rename = "label")]
    pub object_label: String,
    pub similarity: f64,
}

/// Word-to-label similarities, e.g. from word-embedding cosine similarity.
#[derive(Debug, Clone, Default)]
pub struct SimilarityTable {
    entries: HashMap<(String, String), f64>,
}

impl SimilarityTable {
    pub fn insert(&mut self, word: impl Into<String>, label: impl Into<String>, similarity: f64) {
        self.entries.insert((word.into(), label.into()), similarity);
    }

    pub fn get(&self, word: &str, label: &str) -> Option<f64> {
        self.entries.get(&(word.to_owned(), label.to_owned())).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses `word<TAB>label<TAB>similarity` lines. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse_tsv(text: &str, path: &Path) -> Result<Self> {
        let mut table = Self::default();
        for (i, line) in text.lines().enumerate() {
            let record = |message: String| Error::Record {
                path: path.to_owned(),
                line: i + 1,
                message,
            };
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [word, label, sim] = fields[..] else {
                return Err(record(format!("expected 3 tab-separated fields, got {}", fields.len())));
            };
            let sim: f64 = sim
                .trim()
                .parse()
                .map_err(|_| record(format!("similarity {sim:?} is not a number")))?;
            if !(-1.0..=1.0).contains(&sim) {
                return Err(record(format!("similarity {sim} outside [-1, 1]")));
            }
            table.insert(word.trim(), label.trim(), sim);
        }
        Ok(table)
    }

    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text, path)
    }
}

/// Pairs every noun with every label whose similarity is strictly above
/// `threshold`. Output is sorted by label, then noun; missing similarities
/// count as -1.
pub fn pair_concepts(
    nouns: &[String],
    labels: &[String],
    sims: &SimilarityTable,
    threshold: f64,
) -> Result<Vec<ConceptPair>> {
    if !(-1.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!(
            "pairing threshold {threshold} outside [-1, 1]"
        )));
    }
    let nouns: BTreeSet<&str> = nouns.iter().map(String::as_str).collect();
    let labels: BTreeSet<&str> = labels.iter().map(String::as_str).collect();
    let mut pairs = Vec::new();
    for &label in &labels {
        for &noun in &nouns {
            let sim = sims.get(noun, label).unwrap_or_else(|| {
                log::debug!("no similarity for ({noun:?}, {label:?}); treating as -1");
                -1.0
            });
            if sim > threshold {
                pairs.push(ConceptPair {
                    class_id: label.to_owned(),
                    word: noun.to_owned(),
                    object_label: label.to_owned(),
                    similarity: sim,
                });
            }
        }
    }
    Ok(pairs)
}

/// One scored word-object pair of a sample.
#[derive(Debug, Clone)]
pub struct GtEntry {
    pub class_id: String,
    pub word: String,
    pub object_label: String,
    pub similarity: Option<f64>,
    pub span: WordSpan,
    pub frames: FrameSet,
    /// Union of all instance masks of the class in this image.
    pub mask: Arc<ObjectMask>,
}

/// Ground truth of one image-utterance sample.
#[derive(Debug, Clone)]
pub struct SampleGroundTruth {
    pub sample_id: String,
    pub image_width: usize,
    pub image_height: usize,
    pub frames: usize,
    pub frame_ms: f32,
    pub entries: Vec<GtEntry>,
}

impl SampleGroundTruth {
    /// Distinct classes, sorted.
    pub fn classes(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.entries.iter().map(|e| e.class_id.as_str()).collect();
        set.into_iter().collect()
    }
}

/// One JSON-lines ground-truth record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub image_w: usize,
    pub image_h: usize,
    pub frames: usize,
    pub frame_ms: f64,
    pub pairs: Vec<PairRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub class: String,
    pub word: String,
    pub onset_ms: f64,
    pub offset_ms: f64,
    pub mask_rle: Vec<u64>,
    /// Object label; defaults to the class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Abort on the first invalid record instead of skipping it.
    pub strict: bool,
    /// Pairs carrying a similarity at or below this value are dropped.
    pub threshold: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            strict: true,
            threshold: DEFAULT_PAIR_THRESHOLD,
        }
    }
}

#[derive(Debug, Default)]
pub struct GroundTruthSet {
    pub samples: Vec<SampleGroundTruth>,
    /// Records or pairs skipped in lenient mode.
    pub skipped: Vec<Error>,
    /// Pairs dropped by the similarity threshold.
    pub below_threshold: usize,
}

struct RecordContext<'a> {
    path: &'a Path,
    line: usize,
}

impl RecordContext<'_> {
    fn error(&self, message: impl std::fmt::Display) -> Error {
        Error::Record {
            path: self.path.to_path_buf(),
            line: self.line,
            message: message.to_string(),
        }
    }
}

/// Validates one record. Pair-level problems are returned separately so
/// lenient loading can keep the rest of the sample.
fn build_sample(
    record: SampleRecord,
    ctx: &RecordContext<'_>,
    opts: &LoadOptions,
    below_threshold: &mut usize,
) -> Result<(SampleGroundTruth, Vec<Error>)> {
    let SampleRecord {
        sample_id,
        image_w,
        image_h,
        frames,
        frame_ms,
        pairs,
    } = record;
    if sample_id.is_empty() {
        return Err(ctx.error("empty sample_id"));
    }
    if image_w == 0 || image_h == 0 || frames == 0 {
        return Err(ctx.error(format!("sample {sample_id}: dimensions must be at least 1")));
    }
    if !(frame_ms.is_finite() && frame_ms > 0.0) {
        return Err(ctx.error(format!("sample {sample_id}: frame_ms must be positive")));
    }

    let mut pair_errors = Vec::new();
    let mut parsed = Vec::new();
    for (i, pair) in pairs.into_iter().enumerate() {
        let where_ = format!("sample {sample_id} pair {i} ({:?})", pair.word);
        if let Some(sim) = pair.similarity {
            if sim <= opts.threshold {
                *below_threshold += 1;
                continue;
            }
        }
        let result = (|| {
            let mask = ObjectMask::decode_rle(&pair.mask_rle, image_w, image_h, pair.class.clone())?;
            if mask.is_empty() {
                return Err(Error::Rle("mask has no set pixels".into()));
            }
            let span = WordSpan::new(pair.class.clone(), pair.word.clone(), pair.onset_ms, pair.offset_ms)?;
            let frames = span_to_frames(&span, frame_ms, frames)?;
            Ok((pair, mask, span, frames))
        })();
        match result {
            Ok(p) => parsed.push(p),
            Err(e) => pair_errors.push(ctx.error(format!("{where_}: {e}"))),
        }
    }

    let mut by_class: BTreeMap<String, ObjectMask> = BTreeMap::new();
    for (_, mask, _, _) in &parsed {
        match by_class.get_mut(mask.class_id()) {
            Some(acc) => {
                for (o, &b) in acc.bits.iter_mut().zip(mask.bits()) {
                    *o |= b;
                }
            }
            None => {
                by_class.insert(mask.class_id().to_owned(), mask.clone());
            }
        }
    }
    let by_class: HashMap<String, Arc<ObjectMask>> =
        by_class.into_iter().map(|(k, v)| (k, Arc::new(v))).collect();

    let entries = parsed
        .into_iter()
        .map(|(pair, _, span, frames)| GtEntry {
            mask: Arc::clone(&by_class[&pair.class]),
            object_label: pair.label.unwrap_or_else(|| pair.class.clone()),
            class_id: pair.class,
            word: pair.word,
            similarity: pair.similarity,
            span,
            frames,
        })
        .collect();

    Ok((
        SampleGroundTruth {
            sample_id,
            image_width: image_w,
            image_height: image_h,
            frames,
            frame_ms: frame_ms as f32,
            entries,
        },
        pair_errors,
    ))
}

/// Parses JSON-lines ground truth from a reader.
pub fn parse_ground_truth(reader: impl BufRead, path: &Path, opts: &LoadOptions) -> Result<GroundTruthSet> {
    let mut set = GroundTruthSet::default();
    let mut seen = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let ctx = RecordContext { path, line: i + 1 };
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let outcome = serde_json::from_str::<SampleRecord>(&line)
            .map_err(|e| ctx.error(e))
            .and_then(|record| {
                if seen.contains(&record.sample_id) {
                    return Err(ctx.error(format!("duplicate sample_id {:?}", record.sample_id)));
                }
                build_sample(record, &ctx, opts, &mut set.below_threshold)
            });
        match outcome {
            Ok((sample, pair_errors)) => {
                if opts.strict && !pair_errors.is_empty() {
                    return Err(pair_errors.into_iter().next().unwrap());
                }
                seen.insert(sample.sample_id.clone());
                set.skipped.extend(pair_errors);
                set.samples.push(sample);
            }
            Err(e) if opts.strict => return Err(e),
            Err(e) => set.skipped.push(e),
        }
    }
    for e in &set.skipped {
        log::warn!("skipped: {e}");
    }
    Ok(set)
}

pub fn load_ground_truth(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<GroundTruthSet> {
    let path: PathBuf = path.as_ref().to_owned();
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    parse_ground_truth(BufReader::new(file), &path, opts)
}
