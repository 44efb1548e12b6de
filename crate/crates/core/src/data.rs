//! Expression-matrix ingestion, stage labels, and dataset splitting.
//!
//! The on-disk layout is a delimited text matrix with one header row and one
//! id column. Orientation is explicit: samples-as-rows or genes-as-rows; the
//! in-memory form is always samples × genes.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, stream};

/// Binary tumor-stage class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageLabel {
    Early,
    Late,
}

impl StageLabel {
    pub const ALL: [StageLabel; 2] = [StageLabel::Early, StageLabel::Late];

    /// Class index used by classifiers: Early = 0, Late = 1.
    pub fn index(self) -> usize {
        match self {
            StageLabel::Early => 0,
            StageLabel::Late => 1,
        }
    }

    pub fn from_index(index: usize) -> StageLabel {
        if index == 0 {
            StageLabel::Early
        } else {
            StageLabel::Late
        }
    }
}

impl fmt::Display for StageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StageLabel::Early => f.write_str("early"),
            StageLabel::Late => f.write_str("late"),
        }
    }
}

/// Maps a raw T-stage code to its binary class.
///
/// Codes are trimmed and lowercased first. T1/T2 substages are early,
/// T3/T4 substages are late; the canonical class names pass through so
/// label files written by this tool can be read back. Anything else is an
/// error.
pub fn map_stage_label(code: &str) -> Result<StageLabel> {
    let norm = code.trim().to_ascii_lowercase();
    match norm.as_str() {
        "t1a" | "t1b" | "t1c" | "t2" | "t2a" | "t2b" | "t2c" | "early" => Ok(StageLabel::Early),
        "t3a" | "t3b" | "t4" | "late" => Ok(StageLabel::Late),
        _ => Err(Error::UnknownStage { code: code.trim().to_string() }),
    }
}

/// Expression values for a cohort: samples × genes, ids on both axes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    sample_ids: Vec<String>,
    gene_ids: Vec<String>,
    values: Array2<f64>,
}

impl ExpressionMatrix {
    /// Builds a matrix, checking shape agreement, id uniqueness, and that
    /// every value is finite. Sign is not constrained here: parsed input is
    /// checked for negatives at ingestion, while transformed feature spaces
    /// legitimately contain negative values.
    pub fn new(
        sample_ids: Vec<String>,
        gene_ids: Vec<String>,
        values: Array2<f64>,
    ) -> Result<Self> {
        if sample_ids.is_empty() || gene_ids.is_empty() {
            return Err(Error::EmptyInput("matrix with no samples or no genes"));
        }
        let expected = (sample_ids.len(), gene_ids.len());
        let found = (values.nrows(), values.ncols());
        if expected != found {
            return Err(Error::ShapeMismatch { expected, found });
        }
        check_unique("sample", &sample_ids)?;
        check_unique("gene", &gene_ids)?;
        if let Some(((r, c), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row: r + 1, col: c + 1, value: *v });
        }
        Ok(ExpressionMatrix { sample_ids, gene_ids, values })
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    /// Replaces the value block, keeping ids. The new block must keep the
    /// sample count; the feature axis may change (selection, projection).
    pub fn with_values(&self, gene_ids: Vec<String>, values: Array2<f64>) -> Result<Self> {
        ExpressionMatrix::new(self.sample_ids.clone(), gene_ids, values)
    }

    /// Row subset in the given index order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        for &i in indices {
            if i >= self.n_samples() {
                return Err(Error::IndexOutOfRange { index: i, len: self.n_samples() });
            }
        }
        let sample_ids = indices.iter().map(|&i| self.sample_ids[i].clone()).collect();
        let values = self.values.select(Axis(0), indices);
        ExpressionMatrix::new(sample_ids, self.gene_ids.clone(), values)
    }
}

fn check_unique(kind: &'static str, ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId { kind, id: id.clone() });
        }
    }
    Ok(())
}

/// Matrix plus one stage label per sample row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    matrix: ExpressionMatrix,
    labels: Vec<StageLabel>,
}

impl LabeledDataset {
    pub fn new(matrix: ExpressionMatrix, labels: Vec<StageLabel>) -> Result<Self> {
        if matrix.n_samples() != labels.len() {
            return Err(Error::LengthMismatch {
                left: matrix.n_samples(),
                right: labels.len(),
            });
        }
        Ok(LabeledDataset { matrix, labels })
    }

    pub fn matrix(&self) -> &ExpressionMatrix {
        &self.matrix
    }

    pub fn labels(&self) -> &[StageLabel] {
        &self.labels
    }

    pub fn x(&self) -> &Array2<f64> {
        self.matrix.values()
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    /// Per-class sample counts, indexed by `StageLabel::index`.
    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0usize; 2];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    /// Row indices of one class, in original order.
    pub fn class_indices(&self, label: StageLabel) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == label)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let matrix = self.matrix.subset(indices)?;
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        LabeledDataset::new(matrix, labels)
    }
}

/// Which axis of the text file holds samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    SamplesRows,
    GenesRows,
}

/// Parsing knobs for the delimited matrix format.
#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub delimiter: u8,
    pub orientation: Orientation,
    /// Apply log2(x + 1) to every value at ingestion. Off by default.
    pub log_transform: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            delimiter: b'\t',
            orientation: Orientation::SamplesRows,
            log_transform: false,
        }
    }
}

/// Parses a delimited expression matrix.
///
/// The first row is a header of column ids, optionally preceded by a corner
/// label; the first column of every data row is that row's id. Errors carry
/// 1-based file coordinates (line number, field number).
pub fn parse_expression_matrix<R: BufRead>(
    reader: R,
    options: &ParseOptions,
) -> Result<ExpressionMatrix> {
    let delim = options.delimiter as char;
    let mut lines = reader
        .lines()
        .collect::<std::io::Result<Vec<String>>>()
        .map_err(|e| Error::io("<input>", e))?;
    // Drop UTF-8 BOM and skip fully blank lines (common as trailing newline).
    if let Some(first) = lines.first_mut() {
        if let Some(stripped) = first.strip_prefix('\u{feff}') {
            *first = stripped.to_string();
        }
    }
    let numbered: Vec<(usize, &str)> = lines
        .iter()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();

    let Some(&(_, header_line)) = numbered.first() else {
        return Err(Error::EmptyInput("matrix file has no header row"));
    };
    let data_lines = &numbered[1..];
    if data_lines.is_empty() {
        return Err(Error::EmptyInput("matrix file has no data rows"));
    }

    let header: Vec<&str> = header_line.split(delim).collect();
    let first_width = data_lines[0].1.split(delim).count();
    // A corner label makes the header as wide as data rows; without one the
    // header is one field short.
    let col_ids: Vec<String> = if header.len() == first_width {
        header[1..].iter().map(|s| s.trim().to_string()).collect()
    } else if header.len() + 1 == first_width {
        header.iter().map(|s| s.trim().to_string()).collect()
    } else {
        return Err(Error::RaggedRow {
            row: data_lines[0].0,
            expected: header.len() + 1,
            found: first_width,
        });
    };
    if col_ids.is_empty() {
        return Err(Error::EmptyInput("matrix file has no value columns"));
    }

    let width = col_ids.len();
    let mut row_ids = Vec::with_capacity(data_lines.len());
    let mut buf = Vec::with_capacity(data_lines.len() * width);
    for &(line_no, line) in data_lines {
        let fields: Vec<&str> = line.split(delim).collect();
        if fields.len() != width + 1 {
            return Err(Error::RaggedRow {
                row: line_no,
                expected: width + 1,
                found: fields.len(),
            });
        }
        row_ids.push(fields[0].trim().to_string());
        for (j, cell) in fields[1..].iter().enumerate() {
            let text = cell.trim();
            let value: f64 = text.parse().map_err(|_| Error::NonNumericCell {
                row: line_no,
                col: j + 2,
                text: text.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFiniteValue { row: line_no, col: j + 2, value });
            }
            if value < 0.0 {
                return Err(Error::NegativeValue { row: line_no, col: j + 2, value });
            }
            buf.push(if options.log_transform { (value + 1.0).log2() } else { value });
        }
    }

    let values = Array2::from_shape_vec((row_ids.len(), width), buf)
        .expect("row-major buffer matches shape");
    match options.orientation {
        Orientation::SamplesRows => ExpressionMatrix::new(row_ids, col_ids, values),
        Orientation::GenesRows => {
            ExpressionMatrix::new(col_ids, row_ids, values.t().to_owned())
        }
    }
}

/// Opens and parses a matrix file.
pub fn read_expression_matrix(path: &Path, options: &ParseOptions) -> Result<ExpressionMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_expression_matrix(BufReader::new(file), options)
}

/// Writes the canonical on-disk form: tab-delimited, samples as rows,
/// corner label `sample_id`, floats in shortest round-trip notation.
pub fn write_expression_matrix<W: Write>(matrix: &ExpressionMatrix, mut w: W) -> Result<()> {
    let to_io = |e: std::io::Error| Error::io("<output>", e);
    write!(w, "sample_id").map_err(to_io)?;
    for g in matrix.gene_ids() {
        write!(w, "\t{g}").map_err(to_io)?;
    }
    writeln!(w).map_err(to_io)?;
    for (i, s) in matrix.sample_ids().iter().enumerate() {
        write!(w, "{s}").map_err(to_io)?;
        for v in matrix.values().row(i) {
            write!(w, "\t{v}").map_err(to_io)?;
        }
        writeln!(w).map_err(to_io)?;
    }
    Ok(())
}

/// Parses a two-column delimited label file into (sample id, stage code)
/// pairs. A header row is detected by its second field not being a valid
/// stage code and skipped.
pub fn parse_label_pairs<R: BufRead>(reader: R, delimiter: u8) -> Result<Vec<(String, String)>> {
    let delim = delimiter as char;
    let lines = reader
        .lines()
        .collect::<std::io::Result<Vec<String>>>()
        .map_err(|e| Error::io("<labels>", e))?;
    let mut pairs = Vec::new();
    for (idx, raw) in lines.iter().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delim).collect();
        if fields.len() != 2 {
            return Err(Error::RaggedRow { row: idx + 1, expected: 2, found: fields.len() });
        }
        let id = fields[0].trim().to_string();
        let code = fields[1].trim().to_string();
        if pairs.is_empty() && map_stage_label(&code).is_err() {
            continue; // header row
        }
        pairs.push((id, code));
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput("label file has no data rows"));
    }
    Ok(pairs)
}

/// Aligns parsed label pairs to a matrix's sample order.
///
/// Every matrix sample must have a label; extra label entries are ignored;
/// duplicate ids in the label file are an error; unknown stage codes are an
/// error even on ignored entries.
pub fn align_labels(
    pairs: &[(String, String)],
    matrix: &ExpressionMatrix,
) -> Result<Vec<StageLabel>> {
    let mut by_id: HashMap<&str, StageLabel> = HashMap::with_capacity(pairs.len());
    for (id, code) in pairs {
        let label = map_stage_label(code)?;
        if by_id.insert(id.as_str(), label).is_some() {
            return Err(Error::DuplicateId { kind: "label", id: id.clone() });
        }
    }
    matrix
        .sample_ids()
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::MissingLabel { id: id.clone() })
        })
        .collect()
}

/// Reads a label file and aligns it to the matrix.
pub fn read_labels(path: &Path, matrix: &ExpressionMatrix) -> Result<Vec<StageLabel>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let pairs = parse_label_pairs(BufReader::new(file), b'\t')?;
    align_labels(&pairs, matrix)
}

/// A train/test partition and the seed that produced it.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub seed: u64,
}

/// Splits a dataset into train and test parts.
///
/// The test side gets `round(test_fraction * n)` samples. When `stratified`,
/// that total is apportioned across classes by largest remainder, so each
/// class's test count differs from `test_fraction * class_size` by less than
/// one; each class must keep at least one sample on both sides.
pub fn split(
    dataset: &LabeledDataset,
    test_fraction: f64,
    stratified: bool,
    seed: u64,
) -> Result<SplitPair> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidFraction(test_fraction));
    }
    let n = dataset.n_samples();
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::EmptySplit { test: n_test, n });
    }

    let mut rng = rng::rng_from(rng::derive(seed, stream::SPLIT));
    let mut test_idx: Vec<usize>;
    if stratified {
        let per_class: Vec<Vec<usize>> = StageLabel::ALL
            .iter()
            .map(|&l| dataset.class_indices(l))
            .collect();
        if per_class.iter().any(|c| c.is_empty()) {
            return Err(Error::SingleClass("stratified split"));
        }
        let ideals: Vec<f64> = per_class
            .iter()
            .map(|c| test_fraction * c.len() as f64)
            .collect();
        let mut counts: Vec<usize> = ideals.iter().map(|&x| x.floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        if n_test < assigned {
            return Err(Error::StratificationImpossible(format!(
                "test budget {n_test} below per-class floors {assigned}"
            )));
        }
        let mut extras = n_test - assigned;
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&i, &j| {
            let ri = ideals[i] - ideals[i].floor();
            let rj = ideals[j] - ideals[j].floor();
            rj.partial_cmp(&ri).unwrap().then(i.cmp(&j))
        });
        for &c in &order {
            if extras == 0 {
                break;
            }
            counts[c] += 1;
            extras -= 1;
        }
        test_idx = Vec::with_capacity(n_test);
        for (c, class_rows) in per_class.iter().enumerate() {
            let take = counts[c];
            if take == 0 || take >= class_rows.len() {
                return Err(Error::StratificationImpossible(format!(
                    "class {} would keep {} of {} samples in test",
                    StageLabel::from_index(c),
                    take,
                    class_rows.len()
                )));
            }
            let mut shuffled = class_rows.clone();
            shuffled.shuffle(&mut rng);
            test_idx.extend_from_slice(&shuffled[..take]);
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        test_idx = all[..n_test].to_vec();
    }

    test_idx.sort_unstable();
    let in_test: HashSet<usize> = test_idx.iter().copied().collect();
    let train_idx: Vec<usize> = (0..n).filter(|i| !in_test.contains(i)).collect();

    Ok(SplitPair {
        train: dataset.subset(&train_idx)?,
        test: dataset.subset(&test_idx)?,
        seed,
    })
}
