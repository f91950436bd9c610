//! CSV and Markdown tables for cell grids and match/mismatch results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AnalysisError, MatchRow};
use crate::metrics::CellReport;
use crate::pools::PoolType;

pub const REPORT_HEADER: &str = "model,pool_type,shots,lr,lc,bleu,qe_score";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            _ => Err(format!("unknown report format {s:?}")),
        }
    }
}

/// One grid cell. `cell` is `None` when the cell could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub pool_type: PoolType,
    pub shots: usize,
    pub cell: Option<CellReport>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv(rows: &[ReportRow]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in rows {
        let c = r.cell.as_ref();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            csv_field(&r.model),
            r.pool_type,
            r.shots,
            opt(c.map(|c| c.lr)),
            opt(c.map(|c| c.lc)),
            opt(c.map(|c| c.bleu)),
            opt(c.and_then(|c| c.qe_score)),
        );
    }
    out
}

/// Index set of rows holding the best value of a column.
fn best_rows(values: &[Option<f64>], better: impl Fn(f64, f64) -> bool) -> Vec<bool> {
    let best = values.iter().flatten().copied().fold(None, |acc: Option<f64>, v| match acc {
        Some(b) if !better(v, b) => Some(b),
        _ => Some(v),
    });
    values.iter().map(|v| v.is_some() && *v == best).collect()
}

fn md_cell(v: Option<f64>, decimals: usize, bold: bool) -> String {
    match v {
        None => String::new(),
        Some(x) if bold => format!("**{x:.decimals$}**"),
        Some(x) => format!("{x:.decimals$}"),
    }
}

fn markdown(rows: &[ReportRow]) -> String {
    let col = |f: &dyn Fn(&CellReport) -> Option<f64>| -> Vec<Option<f64>> {
        rows.iter().map(|r| r.cell.as_ref().and_then(f)).collect()
    };
    let lr = col(&|c| Some(c.lr));
    let lc = col(&|c| Some(c.lc));
    let bleu = col(&|c| Some(c.bleu));
    let qe = col(&|c| c.qe_score);
    let best_lr = best_rows(&lr, |a, b| (a - 1.0).abs() < (b - 1.0).abs());
    let best_lc = best_rows(&lc, |a, b| a > b);
    let best_bleu = best_rows(&bleu, |a, b| a > b);
    let best_qe = best_rows(&qe, |a, b| a > b);

    let mut out = String::from("| model | pool_type | shots | lr | lc | bleu | qe_score |\n");
    out.push_str("|---|---|---:|---:|---:|---:|---:|\n");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} |",
            r.model.replace('|', "\\|"),
            r.pool_type,
            r.shots,
            md_cell(lr[i], 3, best_lr[i]),
            md_cell(lc[i], 1, best_lc[i]),
            md_cell(bleu[i], 2, best_bleu[i]),
            md_cell(qe[i], 4, best_qe[i]),
        );
    }
    out
}

/// Renders a cell grid. Rows keep their given order; missing cells have empty fields.
pub fn emit_report(rows: &[ReportRow], format: ReportFormat) -> Result<String, AnalysisError> {
    if rows.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    Ok(match format {
        ReportFormat::Csv => csv(rows),
        ReportFormat::Markdown => markdown(rows),
    })
}

pub fn emit_match_table(rows: &[MatchRow], format: ReportFormat) -> Result<String, AnalysisError> {
    if rows.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let dropped: usize = rows.iter().map(|r| r.dropped).sum();
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str("model,pool_type,match_lr,mismatch_lr,p_value,significant,n,dropped\n");
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    csv_field(&r.model),
                    r.pool,
                    r.match_lr,
                    r.mismatch_lr,
                    r.p_value,
                    r.significant,
                    r.n,
                    r.dropped
                );
            }
        }
        ReportFormat::Markdown => {
            out.push_str("| model | pool_type | match | mismatch | p |\n|---|---|---:|---:|---:|\n");
            for r in rows {
                let (m, mm) = (format!("{:.3}", r.match_lr), format!("{:.3}", r.mismatch_lr));
                let (m, mm) = if r.significant {
                    (format!("<u>{m}</u>"), format!("<u>{mm}</u>"))
                } else {
                    (m, mm)
                };
                let _ = writeln!(out, "| {} | {} | {m} | {mm} | {:.4} |", r.model.replace('|', "\\|"), r.pool, r.p_value);
            }
            let _ = writeln!(out, "\nSentences dropped for missing records: {dropped}");
        }
    }
    Ok(out)
}

/// Writes `dir/name.<ext>`, creating `dir`.
pub fn write_report(dir: &Path, name: &str, content: &str, format: ReportFormat) -> Result<PathBuf, AnalysisError> {
    let io = |p: &Path, e: std::io::Error| AnalysisError::Io {
        path: p.display().to_string(),
        message: e.to_string(),
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let path = dir.join(format!("{name}.{}", format.extension()));
    fs::write(&path, content).map_err(|e| io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(lr: f64, lc: f64, bleu: f64) -> Option<CellReport> {
        Some(CellReport {
            lr,
            lr_std: 0.1,
            lc,
            bleu,
            n: 10,
            runs: 1,
            qe_score: None,
        })
    }

    fn row(model: &str, pool: PoolType, c: Option<CellReport>) -> ReportRow {
        ReportRow {
            model: model.into(),
            pool_type: pool,
            shots: 5,
            cell: c,
        }
    }

    #[test]
    fn one_cell_is_two_lines() {
        let out = emit_report(&[row("m", PoolType::Tiny, cell(0.9, 50.0, 20.0))], ReportFormat::Csv).unwrap();
        assert_eq!(out, "model,pool_type,shots,lr,lc,bleu,qe_score\nm,Tiny,5,0.9,50,20,\n");
    }

    #[test]
    fn missing_cell_keeps_row() {
        let out = emit_report(
            &[row("m", PoolType::Tiny, cell(0.9, 50.0, 20.0)), row("a,b", PoolType::Same, None)],
            ReportFormat::Csv,
        )
        .unwrap();
        assert_eq!(out.lines().nth(2), Some("\"a,b\",Same,5,,,,"));
    }

    #[test]
    fn markdown_bolds_bests() {
        let rows = [
            row("m", PoolType::Random, cell(1.2, 40.0, 30.0)),
            row("m", PoolType::Tiny, cell(0.97, 60.0, 25.0)),
            row("m", PoolType::Same, cell(1.05, 60.0, 28.0)),
        ];
        let md = emit_report(&rows, ReportFormat::Markdown).unwrap();
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines[2], "| m | Random | 5 | 1.200 | 40.0 | **30.00** |  |");
        assert_eq!(lines[3], "| m | Tiny | 5 | **0.970** | **60.0** | 25.00 |  |");
        assert_eq!(lines[4], "| m | Same | 5 | 1.050 | **60.0** | 28.00 |  |");
    }

    #[test]
    fn empty_grid_rejected() {
        assert_eq!(emit_report(&[], ReportFormat::Csv), Err(AnalysisError::EmptyInput));
    }
}
