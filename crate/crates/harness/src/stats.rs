//! Per-group summary statistics of raw replication rows.

use serde::{Deserialize, Serialize};

use crate::experiment::RawRow;
use crate::oracle::Oracle;

/// Statistics of one `(cell, scheme pair, function)` group.
///
/// `variance` divides by the number of successful replications so that
/// `mse = bias^2 + variance` holds exactly; `std_error` is the usual
/// standard error of the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub config_hash: String,
    pub cell: usize,
    pub within: String,
    pub across: String,
    #[serde(rename = "N1")]
    pub n1: usize,
    #[serde(rename = "N2")]
    pub n2: usize,
    pub function: String,
    pub replications: usize,
    pub failures: usize,
    pub oracle: Option<f64>,
    pub oracle_std_error: Option<f64>,
    pub mean: f64,
    pub bias: Option<f64>,
    pub variance: f64,
    pub mse: Option<f64>,
    pub std_error: f64,
    /// Mean and standard error of `gamma_hat(1) / gamma(1)`.
    pub gamma_ratio_mean: Option<f64>,
    pub gamma_ratio_std_error: Option<f64>,
    pub mean_interactions: f64,
    pub mean_island_resamples: f64,
    pub mean_particle_resamples: f64,
    pub mean_millis: f64,
}

/// Mean, population variance and standard error of the mean.
pub fn moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let se = if xs.len() > 1 { (var / (n - 1.0)).sqrt() } else { f64::NAN };
    (mean, var, se)
}

fn average(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Group consecutive rows by `(cell, within, across, function)` in order of
/// first appearance.
pub fn summarize(raw: &[RawRow], oracle: Option<&Oracle>) -> Vec<SummaryRow> {
    let mut keys: Vec<(usize, &str, &str, &str)> = Vec::new();
    for r in raw {
        let k = (r.cell, r.within.as_str(), r.across.as_str(), r.function.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(cell, within, across, function)| {
            let rows: Vec<&RawRow> = raw
                .iter()
                .filter(|r| r.cell == cell && r.within == within && r.across == across && r.function == function)
                .collect();
            let ok: Vec<&RawRow> = rows.iter().copied().filter(|r| r.estimate.is_some()).collect();
            let estimates: Vec<f64> = ok.iter().filter_map(|r| r.estimate).collect();
            let (mean, variance, std_error) = moments(&estimates);
            let reference = oracle.and_then(|o| o.function(function));
            let bias = reference.map(|o| mean - o.value);
            let (gamma_ratio_mean, gamma_ratio_std_error) = match oracle.and_then(|o| o.log_gamma) {
                Some(lg) => {
                    let ratios: Vec<f64> = ok.iter().filter_map(|r| r.log_gamma1).map(|l| (l - lg).exp()).collect();
                    let (m, _, se) = moments(&ratios);
                    (Some(m), Some(se))
                }
                None => (None, None),
            };
            SummaryRow {
                config_hash: rows[0].config_hash.clone(),
                cell,
                within: within.to_string(),
                across: across.to_string(),
                n1: rows[0].n1,
                n2: rows[0].n2,
                function: function.to_string(),
                replications: estimates.len(),
                failures: rows.len() - estimates.len(),
                oracle: reference.map(|o| o.value),
                oracle_std_error: reference.and_then(|o| o.std_error),
                mean,
                bias,
                variance,
                mse: bias.map(|b| b * b + variance),
                std_error,
                gamma_ratio_mean,
                gamma_ratio_std_error,
                mean_interactions: average(ok.iter().filter_map(|r| r.interactions).map(|v| v as f64)),
                mean_island_resamples: average(ok.iter().filter_map(|r| r.island_resamples).map(|v| v as f64)),
                mean_particle_resamples: average(ok.iter().filter_map(|r| r.particle_resamples).map(|v| v as f64)),
                mean_millis: average(ok.iter().map(|r| r.millis as f64)),
            }
        })
        .collect()
}
