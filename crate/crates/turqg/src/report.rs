//! Tables over metric reports: one row per setting, one column per metric.

use turqg_core::metrics::MetricReport;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("no reports given")]
    Empty,
    #[error("cannot mix QA and QG reports in one table ({first} vs {other} in {setting:?})")]
    MixedKinds {
        first: &'static str,
        other: &'static str,
        setting: String,
    },
}

fn kind(r: &MetricReport) -> &'static str {
    match r {
        MetricReport::Qa(_) => "qa",
        MetricReport::Qg(_) => "qg",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn from_reports(reports: &[(String, MetricReport)]) -> Result<Self, ReportError> {
        let (_, first) = reports.first().ok_or(ReportError::Empty)?;
        let headers: &[&str] = match first {
            MetricReport::Qa(_) => &["Setting", "N", "EM", "F1"],
            MetricReport::Qg(_) => &["Setting", "N", "BLEU-1", "BLEU-2", "ROUGE-L"],
        };
        let mut rows = Vec::with_capacity(reports.len());
        for (setting, report) in reports {
            let cells = match (first, report) {
                (MetricReport::Qa(_), MetricReport::Qa(s)) => vec![s.n.to_string(), fixed(s.em), fixed(s.f1)],
                (MetricReport::Qg(_), MetricReport::Qg(s)) => {
                    vec![s.n.to_string(), fixed(s.bleu1), fixed(s.bleu2), fixed(s.rouge_l)]
                }
                _ => {
                    return Err(ReportError::MixedKinds {
                        first: kind(first),
                        other: kind(report),
                        setting: setting.clone(),
                    })
                }
            };
            rows.push(std::iter::once(setting.clone()).chain(cells).collect());
        }
        Ok(Self {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows,
        })
    }

    /// Left-aligned first column, right-aligned numbers.
    pub fn to_text(&self) -> String {
        let width = |i: usize| {
            self.rows
                .iter()
                .map(|r| r[i].chars().count())
                .chain([self.headers[i].chars().count()])
                .max()
                .unwrap_or(0)
        };
        let widths: Vec<usize> = (0..self.headers.len()).map(width).collect();
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (i, cell) in cells.iter().enumerate() {
                let pad = widths[i] - cell.chars().count();
                if i == 0 {
                    s.push_str(cell);
                    s.push_str(&" ".repeat(pad));
                } else {
                    s.push_str("  ");
                    s.push_str(&" ".repeat(pad));
                    s.push_str(cell);
                }
            }
            s.trim_end().to_owned()
        };
        let mut out = line(&self.headers);
        out.push('\n');
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }
}

fn fixed(v: f64) -> String {
    format!("{v:.2}")
}
