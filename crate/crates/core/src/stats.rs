// Copyright 2026 The ballot-noise Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Error-rate estimation and ballot forensics.
//!
//! Confidence intervals are exact two-sided Clopper-Pearson intervals at the
//! 95% level. Their endpoints are Beta quantiles, found by bisection on the
//! regularized incomplete beta function (continued-fraction evaluation from
//! `statrs`) to an absolute tolerance of 1e-12.

use crate::ballot::{MarkSheet, Style};
use crate::error::{Error, Result};
use serde::Serialize;
use statrs::function::beta::beta_reg;

const ALPHA: f64 = 0.05;
const QUANTILE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateEstimate {
    pub errors: u64,
    pub trials: u64,
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl RateEstimate {
    /// `point% (low%, high%)` with `decimals` places after the point.
    pub fn percent_string(&self, decimals: usize) -> String {
        format!(
            "{:.d$}% ({:.d$}%, {:.d$}%)",
            100.0 * self.point,
            100.0 * self.ci_low,
            100.0 * self.ci_high,
            d = decimals
        )
    }
}

/// Smallest `x` in `[0, 1]` with `I_x(a, b) >= q`.
fn beta_quantile(q: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > QUANTILE_TOL {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Point estimate `k / n` with its exact 95% interval.
pub fn binomial_estimate(errors: u64, trials: u64) -> Result<RateEstimate> {
    if trials == 0 {
        return Err(Error::Config("an error rate needs at least one trial".into()));
    }
    if errors > trials {
        return Err(Error::Config(format!("{errors} errors in only {trials} trials")));
    }
    let (k, n) = (errors as f64, trials as f64);
    let ci_low = if errors == 0 {
        0.0
    } else {
        beta_quantile(ALPHA / 2.0, k, n - k + 1.0)
    };
    let ci_high = if errors == trials {
        1.0
    } else {
        beta_quantile(1.0 - ALPHA / 2.0, k + 1.0, n - k)
    };
    let point = k / n;
    Ok(RateEstimate {
        errors,
        trials,
        point,
        ci_low: ci_low.min(point),
        ci_high: ci_high.max(point),
    })
}

/// Digits written on a sheet numbered 1..=`prefs_marked`.
pub fn digit_budget(candidates: u64, prefs_marked: u64) -> Result<u64> {
    if prefs_marked == 0 || prefs_marked > candidates {
        return Err(Error::Config(format!(
            "cannot mark {prefs_marked} preferences with {candidates} candidates"
        )));
    }
    let mut total = 0;
    let mut width = 1u64;
    let mut start = 1u64;
    while start <= prefs_marked {
        let end = (start * 10 - 1).min(prefs_marked);
        total += (end - start + 1) * width;
        start *= 10;
        width += 1;
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ForensicsRow {
    pub preference: u64,
    /// Sheets with this number written in two or more boxes.
    pub repeated: u64,
    /// Sheets missing this number although the next one (and, above 1, the
    /// previous one) is present.
    pub skipped: u64,
}

/// Counts repeated and skipped preference numbers in one section of the raw
/// marks, weighted by multiplicity.
pub fn repeated_and_skipped_table(sheets: &[MarkSheet], style: Style, max_pref: u64) -> Result<Vec<ForensicsRow>> {
    if max_pref == 0 {
        return Err(Error::Config("max preference must be at least 1".into()));
    }
    let mut rows: Vec<ForensicsRow> = (1..=max_pref)
        .map(|preference| ForensicsRow {
            preference,
            repeated: 0,
            skipped: 0,
        })
        .collect();
    // occurrences[v] for v in 0..=max_pref + 1
    let mut occurrences = vec![0u32; max_pref as usize + 2];
    for sheet in sheets {
        occurrences.iter_mut().for_each(|o| *o = 0);
        let values: Vec<u64> = match style {
            Style::Atl => sheet.atl().iter().map(|(_, m)| m.value()).collect(),
            Style::Btl => sheet.btl().iter().map(|(_, m)| m.value()).collect(),
        };
        for v in values {
            if v <= max_pref + 1 {
                occurrences[v as usize] += 1;
            }
        }
        for row in rows.iter_mut() {
            let p = row.preference as usize;
            if occurrences[p] >= 2 {
                row.repeated += sheet.multiplicity();
            }
            if occurrences[p] == 0 && occurrences[p + 1] >= 1 && (p == 1 || occurrences[p - 1] >= 1) {
                row.skipped += sheet.multiplicity();
            }
        }
    }
    Ok(rows)
}

pub fn write_forensics_csv<W: std::io::Write>(rows: &[ForensicsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["preference", "repeated", "skipped"])?;
    for r in rows {
        w.write_record([r.preference.to_string(), r.repeated.to_string(), r.skipped.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
