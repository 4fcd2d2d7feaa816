//! Standalone SVG line charts for learning curves and ROC curves.

use std::fmt::Write as _;

use apnea_core::metrics::RocPoint;
use apnea_core::nn::EpochTrace;

use crate::error::CliError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const TICKS: usize = 5;

pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64)>,
}

pub struct Chart<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub series: Vec<Series<'a>>,
    /// Fixed axis ranges; data ranges are used when absent.
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
    pub note: Option<String>,
    pub diagonal: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn data_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        // a flat or single-point series still gets a visible axis
        let pad = if lo.abs() > 1e-12 { lo.abs() * 0.1 } else { 1.0 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

impl Chart<'_> {
    pub fn to_svg(&self) -> String {
        let all = || self.series.iter().flat_map(|s| s.points.iter().copied());
        let (x0, x1) = self.x_range.unwrap_or_else(|| data_range(all().map(|p| p.0)));
        let (y0, y1) = self.y_range.unwrap_or_else(|| data_range(all().map(|p| p.1)));
        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
        let sy = |y: f64| MARGIN_TOP + plot_h - (y - y0) / (y1 - y0) * plot_h;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
        );
        for i in 0..=TICKS {
            let f = i as f64 / TICKS as f64;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let (px, py) = (sx(xv), sy(yv));
            let _ = writeln!(
                s,
                r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#888"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                MARGIN_TOP + plot_h,
                MARGIN_TOP + plot_h + 5.0,
                MARGIN_TOP + plot_h + 20.0,
                tick_label(xv)
            );
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{py:.2}" x2="{MARGIN_LEFT}" y2="{py:.2}" stroke="#888"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                MARGIN_LEFT - 5.0,
                MARGIN_LEFT - 8.0,
                py + 4.0,
                tick_label(yv)
            );
        }
        let _ = writeln!(
            s,
            r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            HEIGHT - 15.0,
            escape(self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text class="y-label" x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            MARGIN_TOP + plot_h / 2.0,
            MARGIN_TOP + plot_h / 2.0,
            escape(self.y_label)
        );
        if self.diagonal {
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#bbb" stroke-dasharray="4 4"/>"##,
                sx(x0),
                sy(y0),
                sx(x1),
                sy(y1)
            );
        }
        for (i, series) in self.series.iter().enumerate() {
            let pts: Vec<String> = series
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
                series.color,
                pts.join(" ")
            );
            if series.points.len() == 1 {
                let (x, y) = series.points[0];
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#, sx(x), sy(y), series.color);
            }
            let ly = MARGIN_TOP + 16.0 + 16.0 * i as f64;
            let lx = WIDTH - MARGIN_RIGHT - 150.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                lx + 20.0,
                series.color,
                lx + 26.0,
                ly + 4.0,
                escape(series.name)
            );
        }
        if let Some(note) = &self.note {
            let _ = writeln!(
                s,
                r#"<text class="note" x="{:.2}" y="{:.2}" text-anchor="end" font-size="14">{}</text>"#,
                WIDTH - MARGIN_RIGHT - 10.0,
                MARGIN_TOP + plot_h - 12.0,
                escape(note)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 100.0 || v.fract().abs() < 1e-9 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn epochs_of(trace: &EpochTrace, f: impl Fn(&apnea_core::nn::EpochRecord) -> f64) -> Vec<(f64, f64)> {
    trace.records.iter().map(|r| (r.epoch as f64, f(r))).collect()
}

/// Accuracy and loss charts, training and validation overlaid.
pub fn learning_curves(trace: &EpochTrace) -> Result<(String, String), CliError> {
    if trace.is_empty() {
        return Err(CliError::EmptyInput("epoch trace has no records".into()));
    }
    let accuracy = Chart {
        title: "Model accuracy",
        x_label: "Epoch",
        y_label: "Accuracy",
        series: vec![
            Series { name: "Training", color: "#1f77b4", points: epochs_of(trace, |r| r.train_accuracy) },
            Series { name: "Validation", color: "#ff7f0e", points: epochs_of(trace, |r| r.validation_accuracy) },
        ],
        x_range: None,
        y_range: None,
        note: None,
        diagonal: false,
    };
    let loss = Chart {
        title: "Model loss",
        x_label: "Epoch",
        y_label: "Loss",
        series: vec![
            Series { name: "Training", color: "#1f77b4", points: epochs_of(trace, |r| r.train_loss) },
            Series { name: "Validation", color: "#ff7f0e", points: epochs_of(trace, |r| r.validation_loss) },
        ],
        x_range: None,
        y_range: None,
        note: None,
        diagonal: false,
    };
    Ok((accuracy.to_svg(), loss.to_svg()))
}

pub fn roc_chart(points: &[RocPoint], auc: f64) -> Result<String, CliError> {
    if points.is_empty() {
        return Err(CliError::EmptyInput("ROC curve has no points".into()));
    }
    Ok(Chart {
        title: "ROC curve",
        x_label: "False positive rate",
        y_label: "True positive rate",
        series: vec![Series {
            name: "ROC",
            color: "#d62728",
            points: points.iter().map(|p| (p.fpr, p.tpr)).collect(),
        }],
        x_range: Some((0.0, 1.0)),
        y_range: Some((0.0, 1.0)),
        note: Some(format!("AUC = {auc:.4}")),
        diagonal: true,
    }
    .to_svg())
}

/// Parses a two-column `fpr,tpr` CSV as written by the metrics report.
pub fn parse_roc_csv(text: &str) -> Result<Vec<RocPoint>, CliError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || CliError::Data(format!("ROC CSV line {}: {line:?}", n + 1));
        let (a, b) = line.split_once(',').ok_or_else(bad)?;
        out.push(RocPoint {
            fpr: a.trim().parse().map_err(|_| bad())?,
            tpr: b.trim().parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

/// Trapezoidal area under a parsed ROC curve.
pub fn roc_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use apnea_core::nn::EpochRecord;

    fn trace(n: usize) -> EpochTrace {
        EpochTrace {
            records: (1..=n)
                .map(|e| EpochRecord {
                    epoch: e,
                    train_loss: 1.0 / e as f64,
                    train_accuracy: 0.5 + 0.4 * (e as f64 / n as f64),
                    validation_loss: 1.1 / e as f64,
                    validation_accuracy: 0.5 + 0.35 * (e as f64 / n as f64),
                })
                .collect(),
            seconds: vec![0.1; n],
        }
    }

    #[test]
    fn fifty_epoch_charts_have_two_polylines_and_labels() {
        let (acc, loss) = learning_curves(&trace(50)).unwrap();
        for svg in [&acc, &loss] {
            assert_eq!(svg.matches("<polyline").count(), 2);
            assert!(svg.contains("class=\"x-label\"") && svg.contains(">Epoch<"));
            assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
            assert!(!svg.contains("NaN") && !svg.contains("inf"));
        }
        assert!(acc.contains(">Accuracy<"));
        assert!(loss.contains(">Loss<"));
    }

    #[test]
    fn single_epoch_is_drawn() {
        let (acc, _) = learning_curves(&trace(1)).unwrap();
        assert_eq!(acc.matches("<circle").count(), 2);
        assert!(!acc.contains("NaN"));
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(matches!(learning_curves(&EpochTrace::default()), Err(CliError::EmptyInput(_))));
        assert!(matches!(roc_chart(&[], 0.5), Err(CliError::EmptyInput(_))));
    }

    #[test]
    fn roc_chart_has_auc_note() {
        let pts = [
            RocPoint { fpr: 0.0, tpr: 0.0 },
            RocPoint { fpr: 0.0, tpr: 1.0 },
            RocPoint { fpr: 1.0, tpr: 1.0 },
        ];
        let svg = roc_chart(&pts, 1.0).unwrap();
        assert!(svg.contains("AUC = 1.0000"));
        let csv = "fpr,tpr\n0,0\n0,1\n1,1\n";
        assert_eq!(parse_roc_csv(csv).unwrap(), pts);
        assert_eq!(roc_area(&pts), 1.0);
    }
}
