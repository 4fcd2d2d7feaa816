//! Binary classification metrics with apnoea (label 1) as the positive class.
//!
//! Metrics whose denominator is zero are reported as `None` rather than 0.

use std::fmt;

use thiserror::Error;

pub const LOG_LOSS_EPSILON: f64 = 1e-15;
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} labels vs {1} predictions")]
    Shape(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("{0} is undefined for this input")]
    UndefinedMetric(&'static str),
    #[error("invalid value: {0}")]
    InvalidValue(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn sensitivity(&self) -> Result<f64, MetricsError> {
        ratio(self.tp, self.tp + self.fn_).ok_or(MetricsError::UndefinedMetric("sensitivity"))
    }

    pub fn specificity(&self) -> Result<f64, MetricsError> {
        ratio(self.tn, self.tn + self.fp).ok_or(MetricsError::UndefinedMetric("specificity"))
    }

    pub fn precision(&self) -> Result<f64, MetricsError> {
        ratio(self.tp, self.tp + self.fp).ok_or(MetricsError::UndefinedMetric("precision"))
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn check_lengths<A, B>(a: &[A], b: &[B]) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::Shape(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}

fn check_binary(v: &[u8]) -> Result<(), MetricsError> {
    match v.iter().find(|&&x| x > 1) {
        Some(x) => Err(MetricsError::InvalidValue(format!("label {x} is not 0 or 1"))),
        None => Ok(()),
    }
}

pub fn confusion(labels: &[u8], predictions: &[u8]) -> Result<ConfusionMatrix, MetricsError> {
    check_lengths(labels, predictions)?;
    check_binary(labels)?;
    check_binary(predictions)?;
    let mut cm = ConfusionMatrix::default();
    for (&y, &p) in labels.iter().zip(predictions) {
        match (y, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (0, 0) => cm.tn += 1,
            _ => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// TP / (TP + FN)
pub fn sensitivity(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    cm.sensitivity()
}

/// TN / (TN + FP), i.e. 1 - FPR
pub fn specificity(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    cm.specificity()
}

/// Harmonic mean of precision and recall.
pub fn f1_score(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let p = cm.precision()?;
    let r = cm.sensitivity()?;
    if p + r == 0.0 {
        return Err(MetricsError::UndefinedMetric("F1 score"));
    }
    Ok(2.0 * p * r / (p + r))
}

/// Cohen's kappa from observed agreement and chance agreement of the
/// marginals.
pub fn kappa_score(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let n = cm.total() as f64;
    if n == 0.0 {
        return Err(MetricsError::EmptyInput);
    }
    let (tp, fp, tn, fn_) = (cm.tp as f64, cm.fp as f64, cm.tn as f64, cm.fn_ as f64);
    let observed = (tp + tn) / n;
    let chance = ((tp + fp) * (tp + fn_) + (tn + fn_) * (tn + fp)) / (n * n);
    if chance == 1.0 {
        return Err(MetricsError::UndefinedMetric("kappa"));
    }
    Ok(((observed - chance) / (1.0 - chance)).clamp(-1.0, 1.0))
}

/// Mean binary cross-entropy with probabilities clipped to `[eps, 1 - eps]`.
pub fn log_loss(labels: &[u8], probabilities: &[f64], eps: f64) -> Result<f64, MetricsError> {
    check_lengths(labels, probabilities)?;
    check_binary(labels)?;
    if let Some(p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(MetricsError::InvalidValue(format!("probability {p} outside [0, 1]")));
    }
    let sum: f64 = labels
        .iter()
        .zip(probabilities)
        .map(|(&y, &p)| {
            let p = p.clamp(eps, 1.0 - eps);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(sum / labels.len() as f64)
}

/// One point of the ROC curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve over every distinct score threshold and its trapezoidal area.
///
/// The curve starts at (0, 0) (threshold +inf) and ends at (1, 1); tied
/// scores move both rates in one step, which gives ties half credit.
pub fn roc_auc(labels: &[u8], scores: &[f64]) -> Result<(f64, Vec<RocPoint>), MetricsError> {
    check_lengths(labels, scores)?;
    check_binary(labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(MetricsError::InvalidValue("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(MetricsError::UndefinedMetric("ROC AUC"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg,
            tpr: tp as f64 / pos,
        });
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Ok((auc, points))
}

/// Full metric suite over one evaluation set. `None` marks an undefined
/// metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub n_rows: usize,
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub kappa: Option<f64>,
    pub log_loss: f64,
    pub roc_auc: Option<f64>,
    pub confusion: ConfusionMatrix,
    pub roc_points: Vec<RocPoint>,
}

/// Hard labels at 0.5 (ties to class 0) feed the confusion-based metrics;
/// probabilities feed log loss and ROC AUC.
pub fn full_report(labels: &[u8], probabilities: &[f64]) -> Result<MetricsReport, MetricsError> {
    check_lengths(labels, probabilities)?;
    let preds: Vec<u8> = probabilities
        .iter()
        .map(|&p| (p > DECISION_THRESHOLD) as u8)
        .collect();
    let cm = confusion(labels, &preds)?;
    let log_loss = log_loss(labels, probabilities, LOG_LOSS_EPSILON)?;
    let (roc_auc, roc_points) = match roc_auc(labels, probabilities) {
        Ok((a, pts)) => (Some(a), pts),
        Err(MetricsError::UndefinedMetric(_)) => (None, Vec::new()),
        Err(e) => return Err(e),
    };
    Ok(MetricsReport {
        n_rows: labels.len(),
        accuracy: cm.accuracy().unwrap_or(0.0),
        sensitivity: cm.sensitivity().ok(),
        specificity: cm.specificity().ok(),
        precision: cm.precision().ok(),
        f1: f1_score(&cm).ok(),
        kappa: kappa_score(&cm).ok(),
        log_loss,
        roc_auc,
        confusion: cm,
        roc_points,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "absent".to_string(), |x| format!("{x:.6}"))
}

impl MetricsReport {
    /// `(name, value)` rows in report order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("Rows", self.n_rows.to_string()),
            ("Accuracy", format!("{:.6}", self.accuracy)),
            ("Sensitivity (Recall)", opt(self.sensitivity)),
            ("Specificity", opt(self.specificity)),
            ("Precision", opt(self.precision)),
            ("F1_Score", opt(self.f1)),
            ("Kappa_Score", opt(self.kappa)),
            ("Log_Loss", format!("{:.6}", self.log_loss)),
            ("ROCAUC", opt(self.roc_auc)),
            ("TP", self.confusion.tp.to_string()),
            ("FP", self.confusion.fp.to_string()),
            ("TN", self.confusion.tn.to_string()),
            ("FN", self.confusion.fn_.to_string()),
        ]
    }

    pub fn roc_csv(&self) -> String {
        let mut s = String::from("fpr,tpr\n");
        for p in &self.roc_points {
            s.push_str(&format!("{},{}\n", p.fpr, p.tpr));
        }
        s
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.entries() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
