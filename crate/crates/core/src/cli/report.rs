//! Comparison report: per-item agreement of both models and the derived statistics.

use crate::error::{Error, Result};
use crate::evalstats::{paired_t_test, simple_regression, PairedTestResult, RegressionResult};

pub const REPORT_HEADER: &str = "item_id\tn_train\tn_test\tnum_labels\tqwk_baseline\tqwk_adapted";
pub const FEATURES_HEADER: &str = "item_id\tavg_response_length\tscientific_word_rate";
pub const FEATURES: [&str; 2] = ["avg_response_length", "scientific_word_rate"];
pub const MODELS: [&str; 2] = ["baseline", "adapted"];

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub item_id: String,
    pub n_train: usize,
    pub n_test: usize,
    pub num_labels: usize,
    /// `None` for skipped items.
    pub qwk_baseline: Option<f64>,
    pub qwk_adapted: Option<f64>,
    pub avg_response_length: f64,
    pub scientific_word_rate: f64,
}

impl ReportRow {
    pub fn feature(&self, name: &str) -> f64 {
        match name {
            "avg_response_length" => self.avg_response_length,
            _ => self.scientific_word_rate,
        }
    }

    pub fn qwk(&self, model: &str) -> Option<f64> {
        match model {
            "baseline" => self.qwk_baseline,
            _ => self.qwk_adapted,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionEntry {
    pub model: String,
    pub feature: String,
    /// The fit, or why it could not be computed.
    pub fit: std::result::Result<RegressionResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<ReportRow>,
    pub mean_qwk_baseline: f64,
    pub mean_qwk_adapted: f64,
    /// Adapted minus baseline.
    pub paired: std::result::Result<PairedTestResult, String>,
    pub regressions: Vec<RegressionEntry>,
    pub warnings: Vec<String>,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("NA".to_string(), |x| x.to_string())
}

impl MetricReport {
    /// Aggregates over the rows that have both scores.
    pub fn from_rows(rows: Vec<ReportRow>, warnings: Vec<String>) -> Self {
        let scored: Vec<&ReportRow> = rows
            .iter()
            .filter(|r| r.qwk_baseline.is_some() && r.qwk_adapted.is_some())
            .collect();
        let b: Vec<f64> = scored.iter().filter_map(|r| r.qwk_baseline).collect();
        let a: Vec<f64> = scored.iter().filter_map(|r| r.qwk_adapted).collect();
        let paired = paired_t_test(&a, &b).map_err(|e| e.to_string());
        let mut regressions = Vec::new();
        for model in MODELS {
            for feature in FEATURES {
                let x: Vec<f64> = scored.iter().map(|r| r.feature(feature)).collect();
                let y: Vec<f64> = scored.iter().filter_map(|r| r.qwk(model)).collect();
                let fit = if x.len() < 3 {
                    Err(format!("needs at least 3 items, have {}", x.len()))
                } else {
                    simple_regression(&x, &y).map_err(|e| e.to_string())
                };
                regressions.push(RegressionEntry {
                    model: model.to_string(),
                    feature: feature.to_string(),
                    fit,
                });
            }
        }
        Self {
            mean_qwk_baseline: mean(&b),
            mean_qwk_adapted: mean(&a),
            rows,
            paired,
            regressions,
            warnings,
        }
    }

    pub fn regression(&self, model: &str, feature: &str) -> Option<&RegressionResult> {
        self.regressions
            .iter()
            .find(|e| e.model == model && e.feature == feature)
            .and_then(|e| e.fit.as_ref().ok())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                r.item_id,
                r.n_train,
                r.n_test,
                r.num_labels,
                fmt_opt(r.qwk_baseline),
                fmt_opt(r.qwk_adapted)
            ));
        }
        out.push_str(&format!("# features\n{FEATURES_HEADER}\n"));
        for r in &self.rows {
            out.push_str(&format!("{}\t{}\t{}\n", r.item_id, r.avg_response_length, r.scientific_word_rate));
        }
        out.push_str("# aggregate\n");
        out.push_str(&format!("mean_qwk_baseline\t{}\n", self.mean_qwk_baseline));
        out.push_str(&format!("mean_qwk_adapted\t{}\n", self.mean_qwk_adapted));
        match &self.paired {
            Ok(t) => {
                out.push_str(&format!("mean_diff\t{}\n", t.mean_diff));
                out.push_str(&format!("sd_diff\t{}\n", t.sd_diff));
                out.push_str(&format!("t\t{}\n", t.t));
                out.push_str(&format!("df\t{}\n", t.df));
                out.push_str(&format!("p\t{}\n", t.p_value));
            }
            Err(e) => out.push_str(&format!("paired_test\tunavailable: {e}\n")),
        }
        for e in &self.regressions {
            out.push_str(&format!("# regression {} {}\n", e.model, e.feature));
            match &e.fit {
                Ok(f) => {
                    for (k, v) in [
                        ("slope", f.slope.to_string()),
                        ("intercept", f.intercept.to_string()),
                        ("r", f.r.to_string()),
                        ("r_squared", f.r_squared.to_string()),
                        ("f", f.f_stat.to_string()),
                        ("df1", f.df1.to_string()),
                        ("df2", f.df2.to_string()),
                        ("p", f.p_value.to_string()),
                        ("n", f.n.to_string()),
                    ] {
                        out.push_str(&format!("{k}\t{v}\n"));
                    }
                }
                Err(msg) => out.push_str(&format!("unavailable\t{msg}\n")),
            }
        }
        if !self.warnings.is_empty() {
            out.push_str("# warnings\n");
            for w in &self.warnings {
                out.push_str(&format!("warning\t{w}\n"));
            }
        }
        out
    }
}

/// Per-item rows (with features) of a report file; aggregates are ignored.
pub fn parse_report_rows(text: &str) -> Result<Vec<ReportRow>> {
    let mut section = "rows";
    let mut rows: Vec<ReportRow> = Vec::new();
    let mut feature_rows = 0;
    for (idx, line) in text.lines().enumerate() {
        let perr = |msg: String| Error::Parse { line: idx + 1, msg };
        if line == REPORT_HEADER || line == FEATURES_HEADER || line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix("# ") {
            section = if h == "features" { "features" } else { "other" };
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let num = |s: &str| s.parse::<usize>().map_err(|_| perr(format!("bad count {s:?}")));
        let real = |s: &str| -> Result<Option<f64>> {
            if s == "NA" {
                Ok(None)
            } else {
                s.parse::<f64>().map(Some).map_err(|_| perr(format!("bad number {s:?}")))
            }
        };
        match section {
            "rows" => {
                if f.len() != 6 {
                    return Err(perr(format!("expected 6 fields, got {}", f.len())));
                }
                rows.push(ReportRow {
                    item_id: f[0].to_string(),
                    n_train: num(f[1])?,
                    n_test: num(f[2])?,
                    num_labels: num(f[3])?,
                    qwk_baseline: real(f[4])?,
                    qwk_adapted: real(f[5])?,
                    avg_response_length: f64::NAN,
                    scientific_word_rate: f64::NAN,
                });
            }
            "features" => {
                if f.len() != 3 {
                    return Err(perr(format!("expected 3 fields, got {}", f.len())));
                }
                let row = rows
                    .iter_mut()
                    .find(|r| r.item_id == f[0])
                    .ok_or_else(|| perr(format!("features for unknown item {}", f[0])))?;
                row.avg_response_length = real(f[1])?.unwrap_or(f64::NAN);
                row.scientific_word_rate = real(f[2])?.unwrap_or(f64::NAN);
                feature_rows += 1;
            }
            _ => {}
        }
    }
    if feature_rows != rows.len() {
        return Err(Error::data(format!("{} report rows but {feature_rows} feature rows", rows.len())));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, b: f64, a: f64, len: f64) -> ReportRow {
        ReportRow {
            item_id: id.into(),
            n_train: 487,
            n_test: 122,
            num_labels: 5,
            qwk_baseline: Some(b),
            qwk_adapted: Some(a),
            avg_response_length: len,
            scientific_word_rate: len / 10.0 + b,
        }
    }

    #[test]
    fn row_format() {
        let rep = MetricReport::from_rows(vec![row("S131Q02", 0.5, 0.75, 10.0)], vec![]);
        let tsv = rep.to_tsv();
        let mut lines = tsv.lines();
        assert_eq!(lines.next(), Some(REPORT_HEADER));
        assert_eq!(lines.next(), Some("S131Q02\t487\t122\t5\t0.5\t0.75"));
        assert!(tsv.contains("# aggregate\n"));
        assert!(tsv.contains("paired_test\tunavailable"));
        assert!(tsv.contains("# regression baseline avg_response_length\nunavailable\t"));
    }

    #[test]
    fn identical_models() {
        let rows: Vec<ReportRow> = (0..4).map(|i| row(&format!("I{i}"), 0.1 * i as f64, 0.1 * i as f64, 5.0 + i as f64)).collect();
        let rep = MetricReport::from_rows(rows, vec![]);
        let t = rep.paired.unwrap();
        assert_eq!((t.t, t.p_value), (0.0, 1.0));
        assert_eq!(rep.mean_qwk_baseline, rep.mean_qwk_adapted);
    }

    #[test]
    fn rows_round_trip() {
        let mut rows: Vec<ReportRow> = (0..5).map(|i| row(&format!("I{i}"), 0.3 + 0.01 * i as f64, 0.5 - 0.02 * (i * i) as f64, 7.5 + i as f64)).collect();
        rows.push(ReportRow {
            qwk_baseline: None,
            qwk_adapted: None,
            ..row("SKIP", 0.0, 0.0, 3.0)
        });
        let rep = MetricReport::from_rows(rows.clone(), vec!["SKIP skipped".into()]);
        let parsed = parse_report_rows(&rep.to_tsv()).unwrap();
        assert_eq!(parsed, rows);
        let again = MetricReport::from_rows(parsed, rep.warnings.clone());
        assert_eq!(again.to_tsv(), rep.to_tsv());
        assert_eq!(rep.paired.as_ref().unwrap().n, 5);
    }
}
