use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::cv::EvalReport;
use super::EvalError;
use crate::inference::{Fusion, InstanceName};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Text,
    Csv,
    Json,
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Text => "text",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(Self::Text),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(format!("unknown format `{s}` (text, csv, json)")),
        }
    }
}

/// `X3D-XS` for a single instance, `XS+S` for an average, `XS∪S` for a concatenation.
pub fn report_label(instances: &[InstanceName], fusion: Fusion) -> String {
    let mut names = instances.to_vec();
    names.sort();
    let joined = |sep: &str| names.iter().map(|n| n.as_str()).collect::<Vec<_>>().join(sep);
    match fusion {
        Fusion::Single => format!("X3D-{}", joined("+")),
        Fusion::Average => joined("+"),
        Fusion::Concat => joined("∪"),
    }
}

struct Row {
    instance: String,
    fusion: Fusion,
    frames: String,
    sampling_rate: String,
    params: String,
    mae: String,
    std: String,
    minutes: String,
    evaluations: usize,
}

fn geometry(report: &EvalReport) -> (String, String) {
    let first = report.instances.first();
    let same = report.instances.iter().all(|s| {
        Some((s.frames_per_clip, s.sampling_rate)) == first.map(|f| (f.frames_per_clip, f.sampling_rate))
    });
    match first {
        Some(f) if same => (f.frames_per_clip.to_string(), f.sampling_rate.to_string()),
        _ => ("Mixed".into(), "Mixed".into()),
    }
}

fn params(count: u64) -> String {
    if count == 0 {
        "-".into()
    } else {
        format!("{:.1}M", count as f64 / 1e6)
    }
}

fn rows(reports: &[EvalReport]) -> Vec<Row> {
    let mut ordered: Vec<&EvalReport> = reports.iter().collect();
    ordered.sort_by(|a, b| {
        let key = |r: &EvalReport| (r.fusion, r.instances.iter().map(|s| s.name).collect::<Vec<_>>());
        key(a).cmp(&key(b)).then_with(|| a.label.cmp(&b.label))
    });
    ordered
        .into_iter()
        .map(|r| {
            let (frames, sampling_rate) = geometry(r);
            Row {
                instance: r.label.clone(),
                fusion: r.fusion,
                frames,
                sampling_rate,
                params: params(r.param_count),
                mae: format!("{:.3}", r.mean_mae),
                std: format!("{:.3}", r.std_mae),
                minutes: format!("{:.1}", r.mean_minutes),
                evaluations: r.fold_maes.len(),
            }
        })
        .collect()
}

/// Renders reports as one table, single instances first, then averages, then
/// concatenations, each by instance size. MAE and its standard deviation get
/// three decimals, minutes one.
pub fn report_table(reports: &[EvalReport], format: ReportFormat) -> Result<String, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    match format {
        ReportFormat::Json => {
            let mut ordered = reports.to_vec();
            ordered.sort_by(|a, b| {
                let key = |r: &EvalReport| (r.fusion, r.instances.iter().map(|s| s.name).collect::<Vec<_>>());
                key(a).cmp(&key(b)).then_with(|| a.label.cmp(&b.label))
            });
            let mut out = serde_json::to_string_pretty(&ordered).map_err(|e| EvalError::InvalidSpec(e.to_string()))?;
            out.push('\n');
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["instance", "fusion", "frames", "sampling_rate", "params", "mae", "std", "minutes", "evaluations"])
                .map_err(|e| EvalError::Io(e.into()))?;
            for r in rows(reports) {
                w.write_record([
                    r.instance,
                    r.fusion.to_string(),
                    r.frames,
                    r.sampling_rate,
                    r.params,
                    r.mae,
                    r.std,
                    r.minutes,
                    r.evaluations.to_string(),
                ])
                .map_err(|e| EvalError::Io(e.into()))?;
            }
            let bytes = w.into_inner().map_err(|e| EvalError::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Text => {
            let header = ["Instance", "#Frames", "SR", "#Params", "MAE", "Std", "Minutes"];
            let body: Vec<[String; 7]> = rows(reports)
                .into_iter()
                .map(|r| [r.instance, r.frames, r.sampling_rate, r.params, r.mae, r.std, r.minutes])
                .collect();
            let mut widths = header.map(|h| h.chars().count());
            for row in &body {
                for (w, cell) in widths.iter_mut().zip(row) {
                    *w = (*w).max(cell.chars().count());
                }
            }
            let line = |cells: Vec<&str>| {
                let padded: Vec<String> = cells
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(i, (c, &w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                    .collect();
                padded.join("  ").trim_end().to_string()
            };
            let mut out = line(header.to_vec());
            out.push('\n');
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            out.push('\n');
            for row in &body {
                out.push_str(&line(row.iter().map(String::as_str).collect()));
                out.push('\n');
            }
            Ok(out)
        }
    }
}
