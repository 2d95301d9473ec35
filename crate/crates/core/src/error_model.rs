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

//! The three stochastic models of digitisation error.
//!
//! * [`ErrorModel::Truncation`] works on preference lists: each preference,
//!   in rank order, independently fires with probability `rate`, and the
//!   first one to fire is dropped together with everything after it.
//! * [`ErrorModel::UniformDigit`] works on the written marks: each digit is
//!   independently replaced with probability `rate` by a digit drawn
//!   uniformly from 0-9 (possibly itself).
//! * [`ErrorModel::Confusion`] resamples every digit from the column of a
//!   10x10 recognition table for the actual digit.
//!
//! The digit models never add or remove marks; they only rewrite numerals.

use crate::ballot::{classify_formality, Formality, FormalityRules, MarkSheet, Preferences};
use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Recognition probabilities for handwritten digits, indexed
/// `[actual][predicted]`; every column sums to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionMatrix {
    probs: Box<[[f64; 10]; 10]>,
    cumulative: Box<[[f64; 10]; 10]>,
}

const PAIRWISE_DIGIT_RATES: &str = include_str!("../data/pairwise_digit_rates.txt");

impl ConfusionMatrix {
    /// Builds a matrix from non-negative weights indexed `[actual][predicted]`,
    /// normalising each actual digit's weights to sum to 1.
    pub fn from_weights(weights: [[f64; 10]; 10]) -> Result<Self> {
        let mut probs = [[0.0; 10]; 10];
        let mut cumulative = [[0.0; 10]; 10];
        for actual in 0..10 {
            let col = &weights[actual];
            if col.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(Error::Config(format!("negative or non-finite rate for digit {actual}")));
            }
            let sum: f64 = col.iter().sum();
            if sum <= 0.0 {
                return Err(Error::Config(format!("no recognition mass for digit {actual}")));
            }
            let mut acc = 0.0;
            for predicted in 0..10 {
                probs[actual][predicted] = col[predicted] / sum;
                acc += probs[actual][predicted];
                cumulative[actual][predicted] = acc;
            }
            cumulative[actual][9] = 1.0;
        }
        Ok(ConfusionMatrix {
            probs: Box::new(probs),
            cumulative: Box::new(cumulative),
        })
    }

    pub fn identity() -> Self {
        let mut w = [[0.0; 10]; 10];
        for (d, row) in w.iter_mut().enumerate() {
            row[d] = 1.0;
        }
        Self::from_weights(w).expect("identity is valid")
    }

    /// Parses a plain-text table: ten rows (predicted digit 0-9) of ten
    /// whitespace-separated entries (actual digit 0-9). `-` reads as 0.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<[f64; 10]> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cells: Vec<&str> = line.split_whitespace().collect();
            if cells.len() != 10 {
                return Err(Error::Config(format!(
                    "confusion table line {}: expected 10 entries, found {}",
                    lineno + 1,
                    cells.len()
                )));
            }
            let mut row = [0.0; 10];
            for (slot, cell) in row.iter_mut().zip(&cells) {
                *slot = if *cell == "-" {
                    0.0
                } else {
                    cell.parse().map_err(|_| {
                        Error::Config(format!("confusion table line {}: bad entry {cell:?}", lineno + 1))
                    })?
                };
            }
            rows.push(row);
        }
        if rows.len() != 10 {
            return Err(Error::Config(format!(
                "confusion table needs 10 rows, found {}",
                rows.len()
            )));
        }
        let mut by_actual = [[0.0; 10]; 10];
        for (predicted, row) in rows.iter().enumerate() {
            for (actual, v) in row.iter().enumerate() {
                by_actual[actual][predicted] = *v;
            }
        }
        Self::from_weights(by_actual)
    }

    /// The shipped table of pairwise digit recognition rates.
    pub fn pairwise_digit_rates() -> Self {
        Self::parse(PAIRWISE_DIGIT_RATES).expect("shipped table parses")
    }

    pub fn probability(&self, actual: u8, predicted: u8) -> f64 {
        self.probs[actual as usize][predicted as usize]
    }

    /// Chance that `actual` is read as some other digit.
    pub fn change_rate(&self, actual: u8) -> f64 {
        1.0 - self.probs[actual as usize][actual as usize]
    }

    /// Change rate averaged over the ten digits.
    pub fn mean_change_rate(&self) -> f64 {
        (0..10).map(|d| self.change_rate(d)).sum::<f64>() / 10.0
    }

    pub fn is_identity(&self) -> bool {
        (0..10).all(|d| self.probs[d][d] == 1.0)
    }

    fn sample(&self, actual: u8, u: f64) -> u8 {
        let cdf = &self.cumulative[actual as usize];
        cdf.iter().position(|&c| u < c).unwrap_or(9) as u8
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ErrorModel {
    Truncation { rate: f64 },
    UniformDigit { rate: f64 },
    Confusion(ConfusionMatrix),
}

impl ErrorModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            ErrorModel::Truncation { rate } | ErrorModel::UniformDigit { rate } => {
                if !(0.0..=1.0).contains(rate) {
                    return Err(Error::Config(format!("error rate {rate} is outside [0, 1]")));
                }
            }
            ErrorModel::Confusion(_) => {}
        }
        Ok(())
    }

    /// True when the model can never change a ballot.
    pub fn is_identity(&self) -> bool {
        match self {
            ErrorModel::Truncation { rate } | ErrorModel::UniformDigit { rate } => *rate == 0.0,
            ErrorModel::Confusion(m) => m.is_identity(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            ErrorModel::Truncation { .. } => "truncation",
            ErrorModel::UniformDigit { .. } => "digit",
            ErrorModel::Confusion(_) => "confusion",
        }
    }
}

/// Drops the first preference whose Bernoulli(`rate`) trial fires, and every
/// later one. Returns `None` when nothing survives.
pub fn apply_truncation_model(prefs: &Preferences, rate: f64, rng: &mut RandomStream) -> Option<Preferences> {
    let keep = (0..prefs.len()).find(|_| rng.bernoulli(rate)).unwrap_or(prefs.len());
    (keep > 0).then(|| prefs.truncated(keep))
}

/// Rewrites digits in place; returns whether any digit changed.
fn mutate_digits(sheet: &mut MarkSheet, mut rewrite: impl FnMut(u8) -> u8) -> bool {
    let mut changed = false;
    for mark in sheet.marks_mut() {
        for d in mark.digits_mut() {
            let new = b'0' + rewrite(*d - b'0');
            changed |= new != *d;
            *d = new;
        }
    }
    changed
}

fn uniform_digit(rate: f64, rng: &mut RandomStream) -> impl FnMut(u8) -> u8 + '_ {
    move |d| if rng.bernoulli(rate) { rng.below(10) as u8 } else { d }
}

fn confused_digit<'a>(matrix: &'a ConfusionMatrix, rng: &'a mut RandomStream) -> impl FnMut(u8) -> u8 + 'a {
    move |d| matrix.sample(d, rng.uniform())
}

/// Each digit, with probability `rate`, becomes a uniformly drawn digit.
pub fn apply_digit_model(sheet: &MarkSheet, rate: f64, rng: &mut RandomStream) -> MarkSheet {
    let mut out = sheet.clone();
    mutate_digits(&mut out, uniform_digit(rate, rng));
    out
}

/// Each digit is resampled from the matrix column for that digit.
pub fn apply_confusion_model(sheet: &MarkSheet, matrix: &ConfusionMatrix, rng: &mut RandomStream) -> MarkSheet {
    let mut out = sheet.clone();
    mutate_digits(&mut out, confused_digit(matrix, rng));
    out
}

/// Applies `model` to a formal preference list and re-checks formality.
///
/// The digit models write ranks 1..k into the ranked boxes, mutate the
/// digits and read the sheet back. `prefs` must be formal under `rules`; a
/// sheet whose digits all survive is returned as `prefs` unchanged.
pub fn perturb_ballot(
    prefs: &Preferences,
    model: &ErrorModel,
    rules: &FormalityRules,
    rng: &mut RandomStream,
) -> Formality {
    let mut sheet = match model {
        ErrorModel::Truncation { rate } => {
            return match apply_truncation_model(prefs, *rate, rng) {
                Some(p) if p.len() == prefs.len() => Formality::Formal(p),
                Some(p) => classify_formality(&p.to_mark_sheet(1), rules),
                None => Formality::Informal,
            }
        }
        _ => prefs.to_mark_sheet(1),
    };
    let changed = match model {
        ErrorModel::UniformDigit { rate } => mutate_digits(&mut sheet, uniform_digit(*rate, rng)),
        ErrorModel::Confusion(m) => mutate_digits(&mut sheet, confused_digit(m, rng)),
        ErrorModel::Truncation { .. } => unreachable!(),
    };
    if changed {
        classify_formality(&sheet, rules)
    } else {
        Formality::Formal(prefs.clone())
    }
}
