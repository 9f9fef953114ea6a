use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{l1_distance, pairwise_accuracy, pearson, spearman, DimensionMatrix, MetricsError};
use crate::scoremodel::{EmbeddedExample, ScoreModel};
use crate::util::format_mean_sigma;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pairwise_accuracy: Option<f64>,
    pub spearman: Option<f64>,
    pub pearson: Option<f64>,
    pub l1: Option<f64>,
    pub n_items: usize,
    pub n_pairs: usize,
    pub seed: u64,
}

impl MetricReport {
    /// Metrics of predicted `scores` against `targets`. Correlations that
    /// are undefined (constant input) are left empty.
    pub fn from_scores(
        scores: &[f64],
        targets: &[f64],
        seed: u64,
        max_pairs: usize,
        with_l1: bool,
    ) -> Result<Self, MetricsError> {
        let acc = pairwise_accuracy(scores, targets, seed, max_pairs)?;
        let optional = |r: Result<f64, MetricsError>| match r {
            Ok(v) => Ok(Some(v)),
            Err(MetricsError::ZeroVariance) => Ok(None),
            Err(e) => Err(e),
        };
        Ok(Self {
            pairwise_accuracy: Some(acc.accuracy),
            spearman: optional(spearman(scores, targets))?,
            pearson: optional(pearson(scores, targets))?,
            l1: if with_l1 {
                Some(l1_distance(scores, targets)?)
            } else {
                None
            },
            n_items: scores.len(),
            n_pairs: acc.n_pairs,
            seed,
        })
    }
}

/// Scores `set` with `model` and reports against the stored targets.
pub fn evaluate_model(
    model: &ScoreModel<f32>,
    set: &[EmbeddedExample],
    seed: u64,
    max_pairs: usize,
    with_l1: bool,
) -> Result<MetricReport, MetricsError> {
    let refs: Vec<&EmbeddedExample> = set.iter().collect();
    let scores = model.predict_batch(&refs)?;
    let targets: Vec<f64> = set
        .iter()
        .map(|e| {
            e.target
                .ok_or_else(|| MetricsError::MissingTarget(e.paper_id.clone()))
        })
        .collect::<Result<_, _>>()?;
    MetricReport::from_scores(&scores, &targets, seed, max_pairs, with_l1)
}

/// Left-aligned first column, right-aligned others, columns separated by
/// two spaces.
pub fn text_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut width: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (c, cell) in r.iter().enumerate().take(cols) {
            width[c] = width[c].max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let mut s = String::new();
        for (c, cell) in cells.iter().enumerate() {
            if c > 0 {
                s.push_str("  ");
            }
            let pad = width[c] - cell.chars().count();
            if c == 0 {
                s.push_str(cell);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str(&" ".repeat(pad));
                s.push_str(cell);
            }
        }
        s.trim_end().to_string()
    };
    let mut out = line(headers.to_vec());
    out.push('\n');
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * cols.saturating_sub(1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

/// One row per labelled report: accuracy, ρ_s, L1, ρ, n.
pub fn report_table(rows: &[(String, MetricReport)]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(label, r)| {
            vec![
                label.clone(),
                fmt_opt(r.pairwise_accuracy),
                fmt_opt(r.spearman),
                fmt_opt(r.l1),
                fmt_opt(r.pearson),
                r.n_items.to_string(),
                r.n_pairs.to_string(),
            ]
        })
        .collect();
    text_table(
        &[
            "model", "accuracy", "spearman", "l1", "pearson", "n", "pairs",
        ],
        &body,
    )
}

/// Aggregates multi-seed reports into one `mean (σ)` row.
pub fn summary_row(label: &str, reports: &[MetricReport]) -> Vec<String> {
    let col = |f: fn(&MetricReport) -> Option<f64>| -> String {
        let v: Vec<f64> = reports.iter().filter_map(f).collect();
        if v.is_empty() {
            "-".into()
        } else {
            format_mean_sigma(&v)
        }
    };
    vec![
        label.to_string(),
        col(|r| r.pairwise_accuracy),
        col(|r| r.spearman),
        col(|r| r.l1),
        col(|r| r.pearson),
        reports.len().to_string(),
    ]
}

pub fn summary_table(rows: &[Vec<String>]) -> String {
    text_table(
        &["model", "accuracy", "spearman", "l1", "pearson", "seeds"],
        rows,
    )
}

impl DimensionMatrix {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("dimension");
        for d in &self.dimensions {
            write!(s, ",{d}").unwrap();
        }
        s.push('\n');
        for (i, d) in self.dimensions.iter().enumerate() {
            s.push_str(d.as_str());
            for cell in &self.rho[i] {
                match cell {
                    Some(v) => write!(s, ",{v:.6}").unwrap(),
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut headers = vec![""];
        headers.extend(self.dimensions.iter().map(|d| d.as_str()));
        let rows: Vec<Vec<String>> = self
            .dimensions
            .iter()
            .enumerate()
            .map(|(i, d)| {
                std::iter::once(d.to_string())
                    .chain(self.rho[i].iter().map(|v| fmt_opt(*v)))
                    .collect()
            })
            .collect();
        text_table(&headers, &rows)
    }

    /// Static heat map: blue for −1, white for 0, red for +1, grey where
    /// undefined.
    pub fn to_svg(&self) -> String {
        let labels: Vec<String> = self.dimensions.iter().map(|d| d.to_string()).collect();
        heatmap_svg(&labels, &self.rho)
    }
}

pub fn heatmap_svg(labels: &[String], cells: &[Vec<Option<f64>>]) -> String {
    let k = labels.len();
    let cell = 56;
    let margin = 110;
    let size = margin + k * cell + 10;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    for (i, l) in labels.iter().enumerate() {
        let c = margin + i * cell + cell / 2;
        writeln!(
            s,
            r#"<text x="{}" y="{c}" text-anchor="end" dominant-baseline="middle">{l}</text>"#,
            margin - 6
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{c}" y="{}" text-anchor="start" transform="rotate(-45 {c} {})">{l}</text>"#,
            margin - 6,
            margin - 6
        )
        .unwrap();
    }
    for (i, row) in cells.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let (x, y) = (margin + j * cell, margin + i * cell);
            let (fill, text) = match v {
                Some(v) => (diverging_color(*v), format!("{v:.2}")),
                None => ("#cccccc".to_string(), "-".to_string()),
            };
            writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}" stroke="white"/><text x="{}" y="{}" text-anchor="middle" dominant-baseline="middle">{text}</text>"#,
                x + cell / 2,
                y + cell / 2
            )
            .unwrap();
        }
    }
    s.push_str("</svg>\n");
    s
}

fn diverging_color(v: f64) -> String {
    let t = v.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!(
        "#{:02x}{:02x}{:02x}",
        r.round() as u8,
        g.round() as u8,
        b.round() as u8
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_scores_leave_correlations_empty() {
        let r = MetricReport::from_scores(&[1.0; 4], &[1.0, 2.0, 3.0, 4.0], 0, 100, true).unwrap();
        assert_eq!(r.pairwise_accuracy, Some(0.5));
        assert_eq!(r.spearman, None);
        assert_eq!(r.l1, Some(1.5));
        assert_eq!(r.n_pairs, 6);
    }

    #[test]
    fn tables_align() {
        let t = text_table(
            &["a", "bb"],
            &[
                vec!["long".into(), "1".into()],
                vec!["x".into(), "22".into()],
            ],
        );
        assert_eq!(t, "a     bb\n--------\nlong   1\nx     22\n");
    }

    #[test]
    fn summary_uses_mean_sigma() {
        let mk = |a| MetricReport {
            pairwise_accuracy: Some(a),
            spearman: None,
            pearson: None,
            l1: None,
            n_items: 3,
            n_pairs: 3,
            seed: 0,
        };
        let row = summary_row("m", &[mk(0.66), mk(0.67), mk(0.665)]);
        assert_eq!(row[1], "0.665 (0.005)");
        assert_eq!(row[2], "-");
    }

    #[test]
    fn colors() {
        assert_eq!(diverging_color(1.0), "#ff0000");
        assert_eq!(diverging_color(0.0), "#ffffff");
        assert_eq!(diverging_color(-1.0), "#0000ff");
    }
}
