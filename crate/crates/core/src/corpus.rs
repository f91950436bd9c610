//! Line-aligned parallel text: ingestion, character counting and dataset statistics.
//!
//! Character counts are Unicode scalar values after stripping leading and
//! trailing whitespace. No normalization is applied.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower bound of the isometric compliance band (inclusive).
pub const COMPLIANCE_LOW: f64 = 0.90;
/// Upper bound of the isometric compliance band (inclusive).
pub const COMPLIANCE_HIGH: f64 = 1.10;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line count mismatch: {src} has {src_lines} lines, {tgt} has {tgt_lines}")]
    LineCountMismatch {
        src: PathBuf,
        tgt: PathBuf,
        src_lines: usize,
        tgt_lines: usize,
    },
    #[error("source line {line} is empty after stripping whitespace")]
    EmptySource { line: usize },
    #[error("{path}: invalid UTF-8 on line {line}")]
    InvalidEncoding { path: PathBuf, line: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Number of Unicode scalar values in `text` after stripping surrounding whitespace.
pub fn char_count(text: &str) -> usize {
    text.trim().chars().count()
}

/// `true` iff the ratio lies in the closed band [0.90, 1.10].
#[inline]
pub fn is_compliant(ratio: f64) -> bool {
    (COMPLIANCE_LOW..=COMPLIANCE_HIGH).contains(&ratio)
}

/// Output-to-source character ratio. An empty output yields 0.0.
///
/// The source must have at least one character; callers validate this at ingest.
pub fn length_ratio(source: &str, output: &str) -> f64 {
    let src = char_count(source);
    debug_assert!(src > 0, "length ratio over an empty source");
    char_count(output) as f64 / src as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelSample {
    pub id: usize,
    pub source: String,
    pub target: String,
    pub src_chars: usize,
    pub tgt_chars: usize,
    pub ratio: f64,
}

impl ParallelSample {
    pub fn new(
        id: usize,
        source: impl Into<String>,
        target: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let source = source.into();
        let target = target.into();
        let src_chars = char_count(&source);
        if src_chars == 0 {
            return Err(CorpusError::EmptySource { line: id + 1 });
        }
        let tgt_chars = char_count(&target);
        Ok(Self {
            id,
            source,
            target,
            src_chars,
            tgt_chars,
            ratio: tgt_chars as f64 / src_chars as f64,
        })
    }

    pub fn is_compliant(&self) -> bool {
        is_compliant(self.ratio)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n: usize,
    pub lr_mean: f64,
    pub lr_std: f64,
    /// Percent of samples inside the compliance band.
    pub lc: f64,
}

impl DatasetStats {
    /// Statistics over a sequence of ratios. `None` for an empty input.
    pub fn from_ratios(ratios: &[f64]) -> Option<Self> {
        let (mean, std) = mean_and_population_std(ratios)?;
        let compliant = ratios.iter().filter(|r| is_compliant(**r)).count();
        Some(Self {
            n: ratios.len(),
            lr_mean: mean,
            lr_std: std,
            lc: 100.0 * compliant as f64 / ratios.len() as f64,
        })
    }

    pub fn csv_header() -> &'static str {
        "n,lr_mean,lr_std,lc"
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.n, self.lr_mean, self.lr_std, self.lc)
    }
}

/// Mean and N-divisor standard deviation, summed in input order.
pub fn mean_and_population_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

pub fn dataset_stats(samples: &[ParallelSample]) -> Result<DatasetStats, CorpusError> {
    let ratios: Vec<f64> = samples.iter().map(|s| s.ratio).collect();
    DatasetStats::from_ratios(&ratios).ok_or(CorpusError::EmptyDataset)
}

/// Reads a UTF-8 file as lines. `\r\n` is normalized to `\n`; a trailing
/// newline at EOF does not produce an extra empty line.
pub fn read_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let text = String::from_utf8(bytes).map_err(|e| {
        let valid = e.utf8_error().valid_up_to();
        let line = e.as_bytes()[..valid].iter().filter(|b| **b == b'\n').count() + 1;
        CorpusError::InvalidEncoding {
            path: path.to_path_buf(),
            line,
        }
    })?;
    Ok(split_lines(&text))
}

fn split_lines(text: &str) -> Vec<String> {
    if text.is_empty() {
        return Vec::new();
    }
    let body = text.strip_suffix('\n').unwrap_or(text);
    body.split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l).to_owned())
        .collect()
}

/// Pairs line `i` of the source file with line `i` of the target file.
pub fn load_parallel(src_path: &Path, tgt_path: &Path) -> Result<Vec<ParallelSample>, CorpusError> {
    let src = read_lines(src_path)?;
    let tgt = read_lines(tgt_path)?;
    if src.len() != tgt.len() {
        return Err(CorpusError::LineCountMismatch {
            src: src_path.to_path_buf(),
            tgt: tgt_path.to_path_buf(),
            src_lines: src.len(),
            tgt_lines: tgt.len(),
        });
    }
    src.into_iter()
        .zip(tgt)
        .enumerate()
        .map(|(id, (s, t))| ParallelSample::new(id, s, t))
        .collect()
}

/// Writes source and target sides back out, one sentence per line.
pub fn write_parallel(
    samples: &[ParallelSample],
    mut src: impl Write,
    mut tgt: impl Write,
) -> io::Result<()> {
    for s in samples {
        writeln!(src, "{}", s.source)?;
        writeln!(tgt, "{}", s.target)?;
    }
    src.flush()?;
    tgt.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(id: usize, src_len: usize, tgt_len: usize) -> ParallelSample {
        ParallelSample::new(id, "s".repeat(src_len), "t".repeat(tgt_len)).unwrap()
    }

    #[test]
    fn char_count_examples() {
        assert_eq!(char_count("abc"), 3);
        assert_eq!(char_count("  héllo "), 5);
        assert_eq!(char_count(""), 0);
        assert_eq!(char_count("a b"), 3);
    }

    #[test]
    fn band_endpoints_are_inclusive() {
        assert!(is_compliant(0.90));
        assert!(is_compliant(1.10));
        assert!(is_compliant(9.0 / 10.0));
        assert!(is_compliant(11.0 / 10.0));
        assert!(is_compliant(99.0 / 90.0));
        assert!(!is_compliant(0.8999999));
        assert!(!is_compliant(1.1000001));
    }

    #[test]
    fn stats_examples() {
        let s = dataset_stats(&[sample(0, 4, 4), sample(1, 7, 7)]).unwrap();
        assert_eq!((s.n, s.lr_mean, s.lr_std, s.lc), (2, 1.0, 0.0, 100.0));

        let s = dataset_stats(&[sample(0, 2, 1), sample(1, 2, 3)]).unwrap();
        assert_eq!(s.lr_mean, 1.0);
        assert_eq!(s.lc, 0.0);
        assert!((s.lr_std - 0.5).abs() < 1e-15);

        assert!(matches!(dataset_stats(&[]), Err(CorpusError::EmptyDataset)));
    }

    #[test]
    fn empty_source_is_rejected() {
        assert!(matches!(
            ParallelSample::new(3, "   ", "x"),
            Err(CorpusError::EmptySource { line: 4 })
        ));
    }

    #[test]
    fn line_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        fs::write(&a, "1\n2\n3\n").unwrap();
        fs::write(&b, "1\n2\n3\n4\n").unwrap();
        assert!(matches!(
            load_parallel(&a, &b),
            Err(CorpusError::LineCountMismatch { src_lines: 3, tgt_lines: 4, .. })
        ));
        fs::write(&b, "x\ny\nz\n").unwrap();
        let samples = load_parallel(&a, &b).unwrap();
        assert_eq!(samples.iter().map(|s| s.id).collect::<Vec<_>>(), [0, 1, 2]);
    }

    #[test]
    fn invalid_utf8_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let mut f = fs::File::create(&a).unwrap();
        f.write_all(b"ok\nfine\nbad \xff byte\n").unwrap();
        drop(f);
        match read_lines(&a) {
            Err(CorpusError::InvalidEncoding { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn crlf_is_normalized() {
        assert_eq!(split_lines("a\r\nb\r\n"), ["a", "b"]);
        assert_eq!(split_lines("a\nb"), ["a", "b"]);
        assert!(split_lines("").is_empty());
    }

    proptest! {
        #[test]
        fn char_count_idempotent_under_restrip(t in "\\PC*") {
            prop_assert_eq!(char_count(t.trim()), char_count(&t));
        }

        #[test]
        fn lc_equals_bruteforce(lens in prop::collection::vec((1usize..40, 0usize..60), 1..60)) {
            let samples: Vec<_> = lens.iter().enumerate().map(|(i, (s, t))| sample(i, *s, *t)).collect();
            let stats = dataset_stats(&samples).unwrap();
            // exact integer form of 0.9 <= t/s <= 1.1
            let count = lens.iter().filter(|(s, t)| 10 * t >= 9 * s && 10 * t <= 11 * s).count();
            prop_assert_eq!(stats.lc, 100.0 * count as f64 / lens.len() as f64);
        }

        #[test]
        fn load_then_write_round_trips(lines in prop::collection::vec(("[a-zA-Zäöü .,!?]{0,30}[a-z]", "[a-zA-Zäöü .,!?]{0,30}"), 1..20)) {
            let dir = tempfile::tempdir().unwrap();
            let (sp, tp) = (dir.path().join("s"), dir.path().join("t"));
            let src: String = lines.iter().map(|(s, _)| format!("{s}\n")).collect();
            let tgt: String = lines.iter().map(|(_, t)| format!("{t}\n")).collect();
            fs::write(&sp, &src).unwrap();
            fs::write(&tp, &tgt).unwrap();
            let samples = load_parallel(&sp, &tp).unwrap();
            let (mut so, mut to) = (Vec::new(), Vec::new());
            write_parallel(&samples, &mut so, &mut to).unwrap();
            prop_assert_eq!(String::from_utf8(so).unwrap(), src);
            prop_assert_eq!(String::from_utf8(to).unwrap(), tgt);
        }
    }
}
