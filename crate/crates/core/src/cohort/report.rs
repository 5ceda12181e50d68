//! Cohort description: each feature category cross-tabulated against the
//! three score bands.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::cohort::synth::CohortMarginals;
use crate::data::{Dataset, Feature};
use crate::distribution::{RiskBand, RiskClasses};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub feature: Feature,
    pub label: String,
    /// Patient counts per score band: low, intermediate, high.
    pub by_band: [usize; 3],
}

impl CategoryRow {
    pub fn total(&self) -> usize {
        self.by_band.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub rows: Vec<CategoryRow>,
    /// Patients per score band.
    pub band_totals: [usize; 3],
    pub n: usize,
}

fn band_slot(band: RiskBand) -> usize {
    match band {
        RiskBand::Low => 0,
        RiskBand::Intermediate => 1,
        RiskBand::High => 2,
    }
}

/// Cross-tabulates `data` using the category bands in `marginals`.
/// Values outside every band are not counted.
pub fn describe_cohort(data: &Dataset, marginals: &CohortMarginals, classes: &RiskClasses) -> CohortReport {
    let mut band_totals = [0; 3];
    for &y in data.responses() {
        band_totals[band_slot(classes.band(y))] += 1;
    }
    let mut rows = Vec::new();
    for feature in Feature::ALL {
        let Some(marginal) = marginals.marginal(feature) else {
            continue;
        };
        let mut counts = vec![[0usize; 3]; marginal.bands.len()];
        for (x, &y) in data.features().iter().zip(data.responses()) {
            if let Some(b) = marginal.band_of(x.get(feature)) {
                counts[b][band_slot(classes.band(y))] += 1;
            }
        }
        for (band, by_band) in marginal.bands.iter().zip(counts) {
            rows.push(CategoryRow {
                feature,
                label: band.label.clone(),
                by_band,
            });
        }
    }
    CohortReport {
        rows,
        band_totals,
        n: data.len(),
    }
}

impl CohortReport {
    /// Share of all patients in a category, in percent.
    pub fn percent(&self, feature: Feature, label: &str) -> Option<f64> {
        let row = self.rows.iter().find(|r| r.feature == feature && r.label == label)?;
        (self.n > 0).then(|| 100.0 * row.total() as f64 / self.n as f64)
    }
}

fn pct(count: usize, of: usize) -> String {
    if of == 0 {
        "-".into()
    } else {
        format!("{:.2}", 100.0 * count as f64 / of as f64)
    }
}

impl fmt::Display for CohortReport {
    /// Column percentages within each score band, then the overall share.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [lo, mid, hi] = self.band_totals;
        let mut out = String::new();
        writeln!(
            out,
            "{:<16} {:<18} {:>10} {:>10} {:>10} {:>10}",
            "feature", "category", "low", "interm.", "high", "total"
        )?;
        writeln!(
            out,
            "{:<16} {:<18} {:>10} {:>10} {:>10} {:>10}",
            "",
            "",
            format!("n={lo}"),
            format!("n={mid}"),
            format!("n={hi}"),
            format!("n={}", self.n)
        )?;
        let mut last = None;
        for row in &self.rows {
            let name = if last == Some(row.feature) {
                ""
            } else {
                row.feature.name()
            };
            last = Some(row.feature);
            writeln!(
                out,
                "{:<16} {:<18} {:>10} {:>10} {:>10} {:>10}",
                name,
                row.label,
                pct(row.by_band[0], lo),
                pct(row.by_band[1], mid),
                pct(row.by_band[2], hi),
                pct(row.total(), self.n)
            )?;
        }
        writeln!(
            out,
            "{:<16} {:<18} {:>10} {:>10} {:>10} {:>10}",
            "score band",
            "",
            pct(lo, self.n),
            pct(mid, self.n),
            pct(hi, self.n),
            "100.00"
        )?;
        f.write_str(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureVector;

    #[test]
    fn counts_by_category_and_band() {
        let young = FeatureVector::new([40.0, 1.5, 5.0, 2.0, 2.0, 90.0, 50.0, 15.0, 0.0]).unwrap();
        let old = young.with(Feature::Age, 70.0);
        let data = Dataset::with_row_ids(vec![young, old, old], vec![10.0, 20.0, 30.0]).unwrap();
        let report = describe_cohort(&data, &CohortMarginals::reference(), &RiskClasses::default());
        assert_eq!(report.band_totals, [1, 1, 1]);
        let age: Vec<_> = report.rows.iter().filter(|r| r.feature == Feature::Age).collect();
        assert_eq!(age[0].by_band, [1, 0, 0]);
        assert_eq!(age[1].by_band, [0, 1, 1]);
        let share = report.percent(Feature::Age, "<=50 yr").unwrap();
        assert!((share - 100.0 / 3.0).abs() < 1e-12);

        let text = report.to_string();
        assert!(text.contains("<=50 yr"));
        assert!(text.contains("n=3"));
    }
}
