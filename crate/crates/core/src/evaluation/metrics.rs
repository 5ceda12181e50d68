use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary confusion counts. The positive class is the lower one
/// (`score <= high_cut`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// True `<= cut`, predicted `<= cut`.
    pub tp: usize,
    /// True `> cut`, predicted `<= cut`.
    pub fp: usize,
    /// True `<= cut`, predicted `> cut`.
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// True `> cut`, predicted `> cut`.
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn new(tp: usize, fn_: usize, fp: usize, tn: usize) -> Self {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    /// Records one observation, `true_low`/`predicted_low` meaning the
    /// positive (lower) class.
    pub fn record(&mut self, true_low: bool, predicted_low: bool) {
        match (true_low, predicted_low) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(self, other: ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
        }
    }
}

/// Classification metrics. `None` means undefined (zero denominator).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Metrics from counts alone; `auc` is left unset.
pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let sensitivity = ratio(cm.tp, cm.tp + cm.fn_);
    let ppv = ratio(cm.tp, cm.tp + cm.fp);
    let f1 = match (ppv, sensitivity) {
        (Some(p), Some(s)) if p + s > 0.0 => Some(2.0 * p * s / (p + s)),
        _ => None,
    };
    MetricsReport {
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        sensitivity,
        specificity: ratio(cm.tn, cm.fp + cm.tn),
        ppv,
        npv: ratio(cm.tn, cm.fn_ + cm.tn),
        f1,
        auc: None,
    }
}

/// Area under the ROC curve in the Mann–Whitney form: the fraction of
/// (positive, negative) pairs where the positive scores higher, ties
/// counting one half. Computed from mid-ranks.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidConfig(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidConfig("NaN score".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut positive_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // 1-based mid-rank of the tie block
        let mid_rank = (start + end + 1) as f64 / 2.0;
        let tied_positives = order[start..end].iter().filter(|&&i| labels[i]).count();
        positive_rank_sum += mid_rank * tied_positives as f64;
        start = end;
    }
    let (p, n) = (positives as f64, negatives as f64);
    Ok((positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}
