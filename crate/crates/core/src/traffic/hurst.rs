//! Variance-time Hurst parameter estimation.
//!
//! For a long-range-dependent series the variance of m-block means decays as
//! m^(2H-2); fitting log(variance) against log(m) over a geometric ladder of
//! aggregation levels gives H = 1 + slope/2. Short-range-dependent input
//! decays as 1/m (slope -1, H = 0.5).

use super::{TrafficError, UtilizationSeries};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstEstimate {
    /// Estimated Hurst parameter, clipped to (0, 1).
    pub h: f64,
    /// Log-log fit slope before clipping (slower decay than 1/m means
    /// slope > -1, the operational mark of burstiness at all timescales).
    pub slope: f64,
    /// Root-mean-square residual of the least-squares fit in log space.
    pub residual: f64,
}

/// Estimate H from the variance decay of m-block means.
///
/// Aggregation levels form the geometric ladder m = min_agg, 2*min_agg, ...
/// capped at max_agg. Requires at least ten blocks at the coarsest level.
pub fn estimate_hurst(
    series: &UtilizationSeries,
    min_agg: usize,
    max_agg: usize,
) -> Result<HurstEstimate, TrafficError> {
    if min_agg < 1 || min_agg >= max_agg {
        return Err(TrafficError::Parameter(format!(
            "aggregation ladder invalid: min_agg {min_agg}, max_agg {max_agg}"
        )));
    }
    if series.values.len() < 10 * max_agg {
        return Err(TrafficError::Parameter(format!(
            "series length {} below 10 x max_agg {}",
            series.values.len(),
            max_agg
        )));
    }

    let mut log_m = Vec::new();
    let mut log_var = Vec::new();
    let mut m = min_agg;
    while m <= max_agg {
        let var = block_mean_variance(&series.values, m);
        if var <= 0.0 {
            return Err(TrafficError::DegenerateSeries { level: m });
        }
        log_m.push((m as f64).ln());
        log_var.push(var.ln());
        m *= 2;
    }

    let (slope, intercept) = least_squares(&log_m, &log_var);
    let n = log_m.len() as f64;
    let residual = (log_m
        .iter()
        .zip(&log_var)
        .map(|(&x, &y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum::<f64>()
        / n)
        .sqrt();

    let h = (1.0 + slope / 2.0).clamp(1e-6, 1.0 - 1e-6);
    Ok(HurstEstimate { h, slope, residual })
}

fn block_mean_variance(values: &[f64], m: usize) -> f64 {
    let n_blocks = values.len() / m;
    let mut means = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let s: f64 = values[b * m..(b + 1) * m].iter().sum();
        means.push(s / m as f64);
    }
    let grand = means.iter().sum::<f64>() / n_blocks as f64;
    means.iter().map(|x| (x - grand) * (x - grand)).sum::<f64>() / n_blocks as f64
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}
