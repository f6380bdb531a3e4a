//! Sparse multi-label datasets.
//!
//! Text format, one sample per line:
//!
//! ```text
//! <label>[:<weight>][,<label>[:<weight>]]* <idx>:<val> <idx>:<val> ...
//! ```
//!
//! Labels are 0-based. Feature indices are 0-based unless
//! [`ParseOptions::one_based`] is set. A line starting with whitespace has
//! no labels. An optional header line of three
//! integers `n p d` (extreme-classification repository style) declares the
//! feature and label ranges; blank lines and lines starting with `#` are
//! skipped.
//!
//! [`RawDataset`] holds parsed values; [`preprocess`] turns it into a
//! [`Dataset`] with label proportions and feature statistics. Standardization
//! is applied lazily by [`StandardizedFeatures`], so sparse features stay
//! sparse and a processed dataset cannot be standardized twice.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::entropy::SIMPLEX_SUM_TOL;
use crate::error::{FyError, Result};

/// Version tag written into every JSON document produced by this module.
pub const FORMAT_VERSION: u32 = 1;

/// Columns whose standard deviation is below this are flagged constant.
pub const CONSTANT_STD_TOL: f64 = 1e-12;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn empty(n_cols: usize) -> Self {
        SparseMatrix {
            n_cols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from per-row `(index, value)` lists. Duplicate indices are
    /// summed; entries are sorted by index.
    pub fn from_rows(n_cols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut m = SparseMatrix::empty(n_cols);
        for row in rows {
            m.push_row(row.clone())?;
        }
        Ok(m)
    }

    pub fn from_dense(x: &Array2<f64>) -> Self {
        let mut m = SparseMatrix::empty(x.ncols());
        for row in x.rows() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    m.indices.push(j);
                    m.values.push(v);
                }
            }
            m.indptr.push(m.indices.len());
        }
        m
    }

    fn push_row(&mut self, mut row: Vec<(usize, f64)>) -> Result<()> {
        row.sort_by_key(|&(j, _)| j);
        let mut last: Option<usize> = None;
        for (j, v) in row {
            if j >= self.n_cols {
                return Err(FyError::DimensionMismatch {
                    expected: self.n_cols,
                    got: j + 1,
                });
            }
            if last == Some(j) {
                *self.values.last_mut().expect("previous entry") += v;
            } else {
                self.indices.push(j);
                self.values.push(v);
                last = Some(j);
            }
        }
        self.indptr.push(self.indices.len());
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(indices, values)` of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows(), self.n_cols));
        for i in 0..self.n_rows() {
            let (idx, val) = self.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                out[[i, j]] = v;
            }
        }
        out
    }

    /// Rows in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let mut m = SparseMatrix::empty(self.n_cols);
        for &i in rows {
            let (idx, val) = self.row(i);
            m.indices.extend_from_slice(idx);
            m.values.extend_from_slice(val);
            m.indptr.push(m.indices.len());
        }
        m
    }

    fn with_n_cols(mut self, n_cols: usize) -> Self {
        self.n_cols = self.n_cols.max(n_cols);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    #[default]
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParseOptions {
    /// Feature indices start at 1.
    pub one_based: bool,
    /// Declared number of features; indices at or beyond it are rejected.
    pub num_features: Option<usize>,
    /// Declared number of labels; labels at or beyond it are rejected.
    pub num_labels: Option<usize>,
}

/// Parsed samples before any filtering or normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDataset {
    pub features: SparseMatrix,
    /// Per-sample `(label, weight)` pairs; weight 1 for plain labels.
    pub labels: Vec<Vec<(usize, f64)>>,
    pub num_labels: usize,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn select(&self, rows: &[usize]) -> RawDataset {
        RawDataset {
            features: self.features.select(rows),
            labels: rows.iter().map(|&i| self.labels[i].clone()).collect(),
            num_labels: self.num_labels,
        }
    }

    /// Seeded shuffle, then contiguous train/validation/test partition.
    pub fn split(&self, fractions: [f64; 3], seed: u64) -> Result<[RawDataset; 3]> {
        let parts = split_indices(self.len(), fractions, seed)?;
        Ok(parts.map(|idx| self.select(&idx)))
    }

    /// Writes the text format. Values use the shortest representation that
    /// round-trips exactly.
    pub fn to_text(&self, one_based: bool) -> String {
        let offset = usize::from(one_based);
        let mut out = String::new();
        for i in 0..self.len() {
            let labels: Vec<String> = self.labels[i]
                .iter()
                .map(|&(l, w)| {
                    if w == 1.0 {
                        format!("{l}")
                    } else {
                        format!("{l}:{w:?}")
                    }
                })
                .collect();
            out.push_str(&labels.join(","));
            let (idx, val) = self.features.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                write!(out, " {}:{v:?}", j + offset).expect("write to string");
            }
            out.push('\n');
        }
        out
    }
}

/// Reads and parses a dataset file.
pub fn parse_multilabel(path: impl AsRef<Path>, opts: &ParseOptions) -> Result<RawDataset> {
    parse_multilabel_str(&fs::read_to_string(path)?, opts)
}

/// Parses the text format from memory.
pub fn parse_multilabel_str(text: &str, opts: &ParseOptions) -> Result<RawDataset> {
    let mut declared_p = opts.num_features;
    let mut declared_d = opts.num_labels;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut seen_data = false;
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !seen_data {
            seen_data = true;
            if let Some((p, d)) = parse_header(trimmed) {
                declared_p = declared_p.or(Some(p));
                declared_d = declared_d.or(Some(d));
                continue;
            }
        }
        let (l, f) = parse_line(line, lineno, opts.one_based, declared_p, declared_d)?;
        labels.push(l);
        rows.push(f);
    }
    let max_feature = rows
        .iter()
        .flatten()
        .map(|&(j, _)| j + 1)
        .max()
        .unwrap_or(0);
    let max_label = labels
        .iter()
        .flatten()
        .map(|&(l, _)| l + 1)
        .max()
        .unwrap_or(0);
    let n_cols = declared_p.unwrap_or(max_feature);
    Ok(RawDataset {
        features: SparseMatrix::from_rows(n_cols, &rows)?,
        labels,
        num_labels: declared_d.unwrap_or(max_label),
    })
}

/// `n p d` header: exactly three unsigned integers.
fn parse_header(line: &str) -> Option<(usize, usize)> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != 3 {
        return None;
    }
    let nums: Vec<usize> = toks.iter().filter_map(|t| t.parse().ok()).collect();
    (nums.len() == 3).then(|| (nums[1], nums[2]))
}

type ParsedLine = (Vec<(usize, f64)>, Vec<(usize, f64)>);

fn parse_line(
    line: &str,
    lineno: usize,
    one_based: bool,
    declared_p: Option<usize>,
    declared_d: Option<usize>,
) -> Result<ParsedLine> {
    let err = |col: usize, reason: String| FyError::Parse {
        line: lineno,
        column: col + 1,
        reason,
    };
    let mut tokens = tokens_with_columns(line);
    let mut labels = Vec::new();

    if !line.starts_with(char::is_whitespace) {
        let (col, tok) = tokens.next().expect("peeked");
        let mut offset = col;
        for part in tok.split(',') {
            if part.is_empty() {
                return Err(err(offset, "empty label".into()));
            }
            let (name, weight) = match part.split_once(':') {
                Some((n, w)) => {
                    let w: f64 = w
                        .parse()
                        .map_err(|_| err(offset, format!("bad label weight {w:?}")))?;
                    if !(w.is_finite() && w >= 0.0) {
                        return Err(err(offset, format!("label weight {w} must be >= 0")));
                    }
                    (n, w)
                }
                None => (part, 1.0),
            };
            let label: usize = name
                .parse()
                .map_err(|_| err(offset, format!("bad label {name:?}")))?;
            if let Some(bound) = declared_d {
                if label >= bound {
                    return Err(FyError::IndexOutOfDeclaredRange {
                        line: lineno,
                        index: label,
                        bound,
                    });
                }
            }
            labels.push((label, weight));
            offset += part.len() + 1;
        }
    }

    let mut features = Vec::new();
    for (col, tok) in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| err(col, format!("expected idx:val, got {tok:?}")))?;
        let raw: usize = idx
            .parse()
            .map_err(|_| err(col, format!("bad feature index {idx:?}")))?;
        let j = if one_based {
            raw.checked_sub(1)
                .ok_or_else(|| err(col, "feature index 0 in a one-based file".into()))?
        } else {
            raw
        };
        let v: f64 = val
            .parse()
            .map_err(|_| err(col + idx.len() + 1, format!("bad feature value {val:?}")))?;
        if !v.is_finite() {
            return Err(err(
                col + idx.len() + 1,
                format!("non-finite value {val:?}"),
            ));
        }
        if let Some(bound) = declared_p {
            if j >= bound {
                return Err(FyError::IndexOutOfDeclaredRange {
                    line: lineno,
                    index: raw,
                    bound,
                });
            }
        }
        features.push((j, v));
    }
    Ok((labels, features))
}

/// Whitespace-separated tokens with their 0-based byte column.
fn tokens_with_columns(line: &str) -> impl Iterator<Item = (usize, &str)> {
    line.split(' ')
        .scan(0usize, |pos, tok| {
            let col = *pos;
            *pos += tok.len() + 1;
            Some((col, tok))
        })
        .flat_map(|(col, tok)| {
            // tabs count as separators too
            tok.split('\t').scan(col, |pos, t| {
                let c = *pos;
                *pos += t.len() + 1;
                Some((c, t))
            })
        })
        .filter(|(_, t)| !t.is_empty())
}

/// Per-feature standardization statistics from a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Columns with zero variance; their standardized value is 0.
    pub constant: Vec<bool>,
}

impl FeatureStats {
    /// Population mean and standard deviation of each column, implicit zeros
    /// included.
    pub fn fit(x: &SparseMatrix) -> Self {
        let n = x.n_rows().max(1) as f64;
        let p = x.n_cols();
        let mut mean = vec![0.0; p];
        for (&j, &v) in x.indices.iter().zip(&x.values) {
            mean[j] += v;
        }
        mean.iter_mut().for_each(|m| *m /= n);
        // sum of squared deviations: explicit entries plus implicit zeros
        let mut ss = vec![0.0; p];
        let mut nnz = vec![0usize; p];
        for (&j, &v) in x.indices.iter().zip(&x.values) {
            ss[j] += (v - mean[j]).powi(2);
            nnz[j] += 1;
        }
        for j in 0..p {
            ss[j] += (x.n_rows() - nnz[j]) as f64 * mean[j] * mean[j];
        }
        let std: Vec<f64> = ss.iter().map(|s| (s / n).sqrt()).collect();
        let constant = std
            .iter()
            .zip(&mean)
            .map(|(&s, &m)| s <= CONSTANT_STD_TOL * m.abs().max(1.0))
            .collect();
        FeatureStats {
            mean,
            std,
            constant,
        }
    }

    pub fn num_features(&self) -> usize {
        self.mean.len()
    }

    /// Multiplier `1 / std` (0 for constant columns).
    pub fn inv_std(&self, j: usize) -> f64 {
        if self.constant[j] {
            0.0
        } else {
            1.0 / self.std[j]
        }
    }
}

/// A preprocessed dataset: label-free rows dropped, labels as proportions,
/// features standardized on access.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: SparseMatrix,
    labels: Array2<f64>,
    stats: FeatureStats,
    pub split: SplitTag,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn num_labels(&self) -> usize {
        self.labels.ncols()
    }

    /// Row-stochastic label matrix `n x d`.
    pub fn labels(&self) -> &Array2<f64> {
        &self.labels
    }

    pub fn stats(&self) -> &FeatureStats {
        &self.stats
    }

    /// Unstandardized sparse features.
    pub fn raw_features(&self) -> &SparseMatrix {
        &self.features
    }

    /// Standardized view of the features.
    pub fn features(&self) -> StandardizedFeatures<'_> {
        StandardizedFeatures {
            x: &self.features,
            stats: &self.stats,
        }
    }

    /// Seeded train/validation/test partition; statistics are carried over.
    pub fn split(&self, fractions: [f64; 3], seed: u64) -> Result<[Dataset; 3]> {
        let parts = split_indices(self.len(), fractions, seed)?;
        let tags = [SplitTag::Train, SplitTag::Validation, SplitTag::Test];
        let mut k = 0;
        Ok(parts.map(|idx| {
            let d = Dataset {
                features: self.features.select(&idx),
                labels: self.labels.select(ndarray::Axis(0), &idx),
                stats: self.stats.clone(),
                split: tags[k],
            };
            k += 1;
            d
        }))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&DatasetDocument {
            format_version: FORMAT_VERSION,
            dataset: self.clone(),
        })
        .map_err(|e| FyError::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DatasetDocument = serde_json::from_str(text).map_err(|e| FyError::Parse {
            line: e.line(),
            column: e.column(),
            reason: e.to_string(),
        })?;
        check_version(doc.format_version)?;
        Ok(doc.dataset)
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetDocument {
    format_version: u32,
    dataset: Dataset,
}

pub(crate) fn check_version(v: u32) -> Result<()> {
    if v == FORMAT_VERSION {
        Ok(())
    } else {
        Err(FyError::InvalidParameter(format!(
            "unsupported format_version {v} (expected {FORMAT_VERSION})"
        )))
    }
}

/// Features standardized as `(x - mean) / std` without densifying.
#[derive(Debug, Clone, Copy)]
pub struct StandardizedFeatures<'a> {
    pub x: &'a SparseMatrix,
    pub stats: &'a FeatureStats,
}

impl StandardizedFeatures<'_> {
    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.x.n_rows(), self.x.n_cols()));
        for ((_, j), v) in out.indexed_iter_mut() {
            *v = -self.stats.mean[j] * self.stats.inv_std(j);
        }
        for i in 0..self.x.n_rows() {
            let (idx, val) = self.x.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                out[[i, j]] = (v - self.stats.mean[j]) * self.stats.inv_std(j);
            }
        }
        out
    }
}

/// Drops label-free rows, converts labels to proportions and standardizes
/// features with `stats` (fitted on the remaining rows when `None`).
pub fn preprocess(raw: RawDataset, stats: Option<&FeatureStats>) -> Result<Dataset> {
    let p = stats.map_or(raw.num_features(), |s| s.num_features());
    if raw.num_features() > p {
        return Err(FyError::DimensionMismatch {
            expected: p,
            got: raw.num_features(),
        });
    }
    let d = raw.num_labels;
    let keep: Vec<usize> = (0..raw.len())
        .filter(|&i| raw.labels[i].iter().any(|&(_, w)| w > 0.0))
        .collect();
    if keep.is_empty() {
        return Err(FyError::EmptyAfterFiltering);
    }
    let mut labels = Array2::zeros((keep.len(), d));
    for (r, &i) in keep.iter().enumerate() {
        let total: f64 = raw.labels[i].iter().map(|&(_, w)| w).sum();
        for &(l, w) in &raw.labels[i] {
            if l >= d {
                return Err(FyError::DimensionMismatch {
                    expected: d,
                    got: l + 1,
                });
            }
            labels[[r, l]] += w / total;
        }
        let s: f64 = labels.row(r).sum();
        if (s - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(FyError::DomainViolation(format!(
                "label row {r} sums to {s}"
            )));
        }
    }
    let features = raw.features.select(&keep).with_n_cols(p);
    let stats = match stats {
        Some(s) => s.clone(),
        None => FeatureStats::fit(&features),
    };
    Ok(Dataset {
        features,
        labels,
        stats,
        split: SplitTag::Train,
    })
}

/// Shuffled row indices partitioned by `fractions` with largest-remainder
/// rounding, so each part is within one of `fraction * n`.
pub fn split_indices(n: usize, fractions: [f64; 3], seed: u64) -> Result<[Vec<usize>; 3]> {
    if fractions.iter().any(|&f| !(f > 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(FyError::InvalidParameter(format!(
            "fractions must be positive and sum to 1, got {fractions:?}"
        )));
    }
    let exact = fractions.map(|f| f * n as f64);
    let mut sizes = exact.map(|e| e.floor() as usize);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let mut left = n - sizes.iter().sum::<usize>();
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[k] += 1;
        left -= 1;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = idx.split_off(sizes[0] + sizes[1]);
    let val = idx.split_off(sizes[0]);
    Ok([idx, val, test])
}

/// Summary comparable to the usual multi-label corpus tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataStats {
    pub n: usize,
    pub p: usize,
    pub d: usize,
    pub avg_labels: f64,
    pub label_free: usize,
}

pub fn stats(raw: &RawDataset) -> DataStats {
    let with_labels: Vec<usize> = raw
        .labels
        .iter()
        .map(|l| l.iter().filter(|&&(_, w)| w > 0.0).count())
        .collect();
    let labelled = with_labels.iter().filter(|&&k| k > 0).count();
    DataStats {
        n: raw.len(),
        p: raw.num_features(),
        d: raw.num_labels,
        avg_labels: if raw.is_empty() {
            0.0
        } else {
            with_labels.iter().sum::<usize>() as f64 / raw.len() as f64
        },
        label_free: raw.len() - labelled,
    }
}
