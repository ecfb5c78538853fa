//! Interaction-count and variance-gain tables built from summary rows.

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::stats::SummaryRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRow {
    pub within: String,
    pub across: String,
    #[serde(rename = "N1")]
    pub n1: usize,
    #[serde(rename = "N2")]
    pub n2: usize,
    pub mean_interactions: f64,
    /// `n * N2`, the count of the bootstrap across-island scheme.
    pub bootstrap_count: usize,
}

/// Mean interaction counts per `(cell, scheme pair)`; counts do not depend on
/// the test function so the first function's row is used.
pub fn interaction_table(summary: &[SummaryRow], horizon: usize) -> Vec<InteractionRow> {
    let mut out: Vec<InteractionRow> = Vec::new();
    let mut seen: Vec<(usize, &str, &str)> = Vec::new();
    for s in summary {
        let key = (s.cell, s.within.as_str(), s.across.as_str());
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        out.push(InteractionRow {
            within: s.within.clone(),
            across: s.across.clone(),
            n1: s.n1,
            n2: s.n2,
            mean_interactions: s.mean_interactions,
            bootstrap_count: horizon * s.n2,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub within: String,
    pub across: String,
    pub function: String,
    #[serde(rename = "N1")]
    pub n1: usize,
    #[serde(rename = "N2")]
    pub n2: usize,
    /// `100 (1 - Var_alt / Var_bootstrap)`.
    pub gain_percent: f64,
}

pub fn variance_gain(var_alt: f64, var_bootstrap: f64) -> f64 {
    100.0 * (1.0 - var_alt / var_bootstrap)
}

/// Gain of across scheme `alt` over bootstrap across islands, for the rows
/// with within scheme `within`.
pub fn variance_gain_table(summary: &[SummaryRow], within: &str, alt: &str) -> Result<Vec<GainRow>> {
    summary
        .iter()
        .filter(|s| s.within == within && s.across == alt)
        .map(|s| {
            let base = summary
                .iter()
                .find(|b| b.within == within && b.across == "bootstrap" && b.cell == s.cell && b.function == s.function)
                .ok_or_else(|| {
                    HarnessError::MissingCell(format!(
                        "{within}/bootstrap at N1={} N2={} for {}",
                        s.n1, s.n2, s.function
                    ))
                })?;
            Ok(GainRow {
                within: within.to_string(),
                across: alt.to_string(),
                function: s.function.clone(),
                n1: s.n1,
                n2: s.n2,
                gain_percent: variance_gain(s.variance, base.variance),
            })
        })
        .collect()
}

/// Gain tables for every interacting across scheme that has a bootstrap
/// baseline with the same within scheme.
pub fn gain_tables(summary: &[SummaryRow]) -> Result<Vec<GainRow>> {
    let mut pairs: Vec<(&str, &str)> = Vec::new();
    for s in summary {
        let pair = (s.within.as_str(), s.across.as_str());
        let interacting = s.across != "bootstrap" && s.across != "independent";
        let has_base = summary.iter().any(|b| b.within == s.within && b.across == "bootstrap");
        if interacting && has_base && !pairs.contains(&pair) {
            pairs.push(pair);
        }
    }
    let mut out = Vec::new();
    for (within, alt) in pairs {
        out.extend(variance_gain_table(summary, within, alt)?);
    }
    Ok(out)
}
