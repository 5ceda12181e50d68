//! Text reports printed by the CLI.

use std::fmt::Write as _;

use distforest::evaluation::{ConfusionMatrix, EvaluationReport, MetricsReport, Observation};
use distforest::RiskClasses;

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{:.1}%", 100.0 * v))
}

fn ratio(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.3}"))
}

/// Confusion matrix and metrics, laid out one metric per line.
pub fn metrics_block(cm: &ConfusionMatrix, m: &MetricsReport, classes: &RiskClasses) -> String {
    let cut = classes.high_cut;
    let le = format!("<={cut}");
    let gt = format!(">{cut}");
    let mut out = String::new();
    let _ = writeln!(out, "Confusion matrix (positive class: score {le})");
    let _ = writeln!(
        out,
        "{:<14}{:>16}{:>16}",
        "",
        format!("predicted {le}"),
        format!("predicted {gt}")
    );
    let _ = writeln!(out, "{:<14}{:>16}{:>16}", format!("true {le}"), cm.tp, cm.fn_);
    let _ = writeln!(out, "{:<14}{:>16}{:>16}", format!("true {gt}"), cm.fp, cm.tn);
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<14}{:>10}", "Accuracy", percent(m.accuracy));
    let _ = writeln!(out, "{:<14}{:>10}", "Sensitivity", percent(m.sensitivity));
    let _ = writeln!(out, "{:<14}{:>10}", "Specificity", percent(m.specificity));
    let _ = writeln!(out, "{:<14}{:>10}", "PPV", percent(m.ppv));
    let _ = writeln!(out, "{:<14}{:>10}", "NPV", percent(m.npv));
    let _ = writeln!(out, "{:<14}{:>10}", "F1-score", ratio(m.f1));
    let _ = writeln!(out, "{:<14}{:>10}", "AUC", ratio(m.auc));
    out
}

fn class_label(high: bool, classes: &RiskClasses) -> String {
    if high {
        format!(">{}", classes.high_cut)
    } else {
        format!("<={}", classes.high_cut)
    }
}

/// Tab-separated, one row per scored observation.
pub fn observation_table(report: &EvaluationReport, classes: &RiskClasses) -> String {
    let mut out = String::from("id\ttrue_score\tcrps\tp_low\tpredicted_class\tcorrect\n");
    for o in &report.crps.per_observation {
        let _ = writeln!(
            out,
            "{}\t{}\t{:.6}\t{:.6}\t{}\t{}",
            o.id,
            o.true_score,
            o.crps,
            o.prob_low,
            class_label(o.predicted_high, classes),
            !o.misclassified
        );
    }
    out
}

fn triage_line(tag: &str, o: &Observation, classes: &RiskClasses) -> String {
    format!(
        "{tag:<8}{:<12} score {:>6} crps {:>8.3} median {:>6} P(<={}) {:.3}{}",
        o.id,
        o.true_score,
        o.crps,
        o.median,
        classes.high_cut,
        o.prob_low,
        if o.misclassified { "  misclassified" } else { "" }
    )
}

/// Rows ordered by CRPS with the best, median and worst called out first.
pub fn crps_listing(report: &EvaluationReport, classes: &RiskClasses, limit: usize) -> String {
    let crps = &report.crps;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Mean CRPS {:.4} over {} rows",
        crps.mean_crps(),
        crps.per_observation.len()
    );
    if let Some([best, median, worst]) = crps.best_median_worst() {
        let _ = writeln!(out, "{}", triage_line("best", best, classes));
        let _ = writeln!(out, "{}", triage_line("median", median, classes));
        let _ = writeln!(out, "{}", triage_line("worst", worst, classes));
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "By CRPS (ascending):");
    for (rank, &i) in crps.sorted_view.iter().take(limit).enumerate() {
        let _ = writeln!(
            out,
            "{}",
            triage_line(&format!("{}", rank + 1), &crps.per_observation[i], classes)
        );
    }
    if crps.sorted_view.len() > limit {
        let _ = writeln!(out, "... {} more", crps.sorted_view.len() - limit);
    }
    out
}
