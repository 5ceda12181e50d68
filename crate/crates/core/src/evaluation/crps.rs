use crate::distribution::PredictiveDistribution;
use crate::error::{Error, Result};

/// Continuous ranked probability score of `dist` against outcome `y`, via
/// the weighted-sample closed form
/// `sum_i w_i |y_i - y| - sum_{i<j} w_i w_j |y_i - y_j|`.
///
/// Atoms are sorted, so the pair term is accumulated in one pass with
/// running prefix sums.
pub fn crps(dist: &PredictiveDistribution, y: f64) -> f64 {
    let mut calibration = 0.0;
    let mut sharpness = 0.0;
    let mut mass_before = 0.0;
    let mut moment_before = 0.0;
    for &(v, w) in dist.atoms() {
        calibration += w * (v - y).abs();
        sharpness += w * (v * mass_before - moment_before);
        mass_before += w;
        moment_before += w * v;
    }
    (calibration - sharpness).max(0.0)
}

/// CRPS from its integral definition, `int (F(z) - 1{y <= z})^2 dz`.
///
/// The integrand is a step function with breaks at the atom values and at
/// `y`, so each piece is integrated by midpoint evaluation on a grid of
/// spacing at most `grid_step`; the result is exact up to rounding. It
/// only touches the distribution through [`PredictiveDistribution::cdf`].
pub fn crps_integral(dist: &PredictiveDistribution, y: f64, grid_step: f64) -> Result<f64> {
    if grid_step.is_nan() || grid_step <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "grid step must be positive, got {grid_step}"
        )));
    }
    let mut breaks: Vec<f64> = dist.atoms().iter().map(|a| a.0).collect();
    breaks.push(y);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut total = 0.0;
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let pieces = ((b - a) / grid_step).ceil().max(1.0) as usize;
        let h = (b - a) / pieces as f64;
        for k in 0..pieces {
            let z = a + (k as f64 + 0.5) * h;
            let step = if y <= z { 1.0 } else { 0.0 };
            total += (dist.cdf(z) - step).powi(2) * h;
        }
    }
    Ok(total)
}
