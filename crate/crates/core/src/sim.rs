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

//! Monte Carlo sweeps of the error models over an election.
//!
//! A sweep visits every grid point (error rate) and every formality variant
//! (BTL preferences required). At each cell it runs `runs_per_point`
//! independent simulated elections: every physical ballot that is formal in
//! the original data is perturbed with its own random substream, the
//! survivors are counted, and integer counters are accumulated. Counters are
//! merged by addition, so the report does not depend on thread scheduling.
//!
//! Substreams are keyed by `(base_seed, point, run, ballot)` where `ballot`
//! is the physical ballot's position in the file. Formality variants at the
//! same point share substreams; different points do not.

use crate::ballot::{
    classify_formality, expand_to_candidates, CandidateId, Formality, FormalityRules, Preferences, Style,
};
use crate::count::{count_stv, CountRules};
use crate::error::{Error, Result};
use crate::error_model::{perturb_ballot, ConfusionMatrix, ErrorModel};
use crate::format::ElectionFile;
use crate::rng::RandomStream;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;

/// The family of error model a sweep varies.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelFamily {
    Truncation,
    UniformDigit,
    /// A fixed digit confusion table. Its grid is the error-free baseline and
    /// the table itself; the rate grid is ignored.
    Confusion(ConfusionMatrix),
}

impl ModelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::Truncation => "truncation",
            ModelFamily::UniformDigit => "digit",
            ModelFamily::Confusion(_) => "confusion",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub base_seed: u64,
    pub runs_per_point: u64,
    pub family: ModelFamily,
    pub rates: Vec<f64>,
    /// BTL preferences required for formality, one variant per value.
    pub btl_required: Vec<u32>,
    pub count_rules: CountRules,
    /// Candidates whose preference-position histograms are reported.
    pub histogram_candidates: Vec<CandidateId>,
}

impl SimConfig {
    pub fn new(family: ModelFamily, rates: Vec<f64>) -> Self {
        SimConfig {
            base_seed: 0,
            runs_per_point: 1000,
            family,
            rates,
            btl_required: vec![FormalityRules::default().btl_required_prefs],
            count_rules: CountRules::default(),
            histogram_candidates: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs_per_point == 0 {
            return Err(Error::Config("runs per point must be at least 1".into()));
        }
        if let Some(r) = self.rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Config(format!("error rate {r} is outside [0, 1]")));
        }
        if self.btl_required.is_empty() {
            return Err(Error::Config("at least one formality variant is needed".into()));
        }
        for &r in &self.btl_required {
            FormalityRules::with_btl_required(r)?;
        }
        Ok(())
    }

    /// Grid points in sweep order. The error-free baseline is always first.
    pub fn grid(&self) -> Vec<GridPoint> {
        let models: Vec<(f64, ErrorModel)> = match &self.family {
            ModelFamily::Confusion(m) => vec![
                (0.0, ErrorModel::Confusion(ConfusionMatrix::identity())),
                (m.mean_change_rate(), ErrorModel::Confusion(m.clone())),
            ],
            family => {
                let mut rates = self.rates.clone();
                rates.push(0.0);
                rates.sort_by(f64::total_cmp);
                rates.dedup();
                rates
                    .into_iter()
                    .map(|rate| {
                        let model = match family {
                            ModelFamily::Truncation => ErrorModel::Truncation { rate },
                            _ => ErrorModel::UniformDigit { rate },
                        };
                        (rate, model)
                    })
                    .collect()
            }
        };
        models
            .into_iter()
            .enumerate()
            .map(|(index, (rate, model))| GridPoint { index, rate, model })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    /// The error rate, or the mean digit change rate for a confusion table.
    pub rate: f64,
    pub model: ErrorModel,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WinnerSetFrequency {
    pub candidates: Vec<String>,
    pub runs: u64,
    pub frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateFrequency {
    pub candidate: String,
    pub elected_runs: u64,
    pub frequency: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SheetFormality {
    pub style: Style,
    pub multiplicity: u64,
    pub rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TruncationBucket {
    pub style: Style,
    pub original_prefs: usize,
    /// Physical ballots in the bucket.
    pub ballots: u64,
    /// Mean preferences still counted after errors, 0 for informal ballots.
    pub mean_surviving: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FormalityRates {
    /// Indexed like the election's sheets; `None` for sheets informal to
    /// begin with.
    pub per_sheet: Vec<Option<SheetFormality>>,
    pub atl_mean: Option<f64>,
    pub btl_mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellReport {
    pub point: usize,
    pub rate: f64,
    pub btl_required: u32,
    pub runs: u64,
    pub no_result_runs: u64,
    pub no_result_frequency: f64,
    /// Most frequent first.
    pub winner_sets: Vec<WinnerSetFrequency>,
    pub candidates: Vec<CandidateFrequency>,
    pub formality: FormalityRates,
    pub truncation: Vec<TruncationBucket>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramReport {
    pub btl_required: u32,
    pub candidate: String,
    pub histogram: PositionHistogram,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimReport {
    pub election: String,
    pub model: String,
    pub base_seed: u64,
    pub runs_per_point: u64,
    pub candidates: Vec<String>,
    pub cells: Vec<CellReport>,
    pub histograms: Vec<HistogramReport>,
}

/// Integer counters for one cell, summed over runs.
#[derive(Clone, Debug, Default)]
struct Counters {
    runs: u64,
    no_result: u64,
    winner_sets: BTreeMap<Vec<CandidateId>, u64>,
    elected: Vec<u64>,
    sheet_formal: Vec<u64>,
    style_formal: [u64; 2],
    surviving: BTreeMap<(Style, usize), u64>,
}

impl Counters {
    fn empty(candidates: usize, sheets: usize) -> Self {
        Counters {
            elected: vec![0; candidates],
            sheet_formal: vec![0; sheets],
            ..Counters::default()
        }
    }

    fn merge(mut self, other: Counters) -> Counters {
        self.runs += other.runs;
        self.no_result += other.no_result;
        for (set, n) in other.winner_sets {
            *self.winner_sets.entry(set).or_default() += n;
        }
        add_into(&mut self.elected, &other.elected);
        add_into(&mut self.sheet_formal, &other.sheet_formal);
        self.style_formal[0] += other.style_formal[0];
        self.style_formal[1] += other.style_formal[1];
        for (k, n) in other.surviving {
            *self.surviving.entry(k).or_default() += n;
        }
        self
    }

    fn scaled(mut self, k: u64) -> Counters {
        self.runs *= k;
        self.no_result *= k;
        self.winner_sets.values_mut().for_each(|n| *n *= k);
        self.elected.iter_mut().for_each(|n| *n *= k);
        self.sheet_formal.iter_mut().for_each(|n| *n *= k);
        self.style_formal.iter_mut().for_each(|n| *n *= k);
        self.surviving.values_mut().for_each(|n| *n *= k);
        self
    }
}

fn add_into(acc: &mut [u64], other: &[u64]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a += b;
    }
}

fn style_slot(style: Style) -> usize {
    match style {
        Style::Atl => 0,
        Style::Btl => 1,
    }
}

/// One cell of the sweep: a model, a rule set and the original formal
/// preferences of every sheet under those rules.
struct Cell<'a> {
    election: &'a ElectionFile,
    model: &'a ErrorModel,
    rules: FormalityRules,
    originals: Vec<Option<Preferences>>,
    base_seed: u64,
    point: u64,
    count_rules: Option<&'a CountRules>,
}

impl<'a> Cell<'a> {
    fn new(
        election: &'a ElectionFile,
        model: &'a ErrorModel,
        rules: FormalityRules,
        base_seed: u64,
        point: u64,
        count_rules: Option<&'a CountRules>,
    ) -> Self {
        let originals = election
            .sheets
            .iter()
            .map(|s| match classify_formality(s, &rules) {
                Formality::Formal(p) => Some(p),
                Formality::Informal => None,
            })
            .collect();
        Cell {
            election,
            model,
            rules,
            originals,
            base_seed,
            point,
            count_rules,
        }
    }

    fn run(&self, run: u64) -> Result<Counters> {
        let meta = &self.election.meta;
        let mut c = Counters::empty(meta.num_candidates(), self.election.sheets.len());
        c.runs = 1;
        let identity = self.model.is_identity();
        let mut formal: BTreeMap<Preferences, u64> = BTreeMap::new();
        let mut offset = 0u64;
        for (i, (sheet, original)) in self.election.sheets.iter().zip(&self.originals).enumerate() {
            let copies = sheet.multiplicity();
            if let Some(prefs) = original {
                let key = (prefs.style(), prefs.len());
                for j in 0..copies {
                    let outcome = if identity {
                        Formality::Formal(prefs.clone())
                    } else {
                        let mut rng = RandomStream::for_ballot(self.base_seed, self.point, run, offset + j);
                        perturb_ballot(prefs, self.model, &self.rules, &mut rng)
                    };
                    if let Formality::Formal(p) = outcome {
                        c.sheet_formal[i] += 1;
                        c.style_formal[style_slot(key.0)] += 1;
                        *c.surviving.entry(key).or_default() += p.len() as u64;
                        *formal.entry(p).or_default() += 1;
                    } else {
                        c.surviving.entry(key).or_default();
                    }
                }
            }
            offset += copies;
        }
        if let Some(rules) = self.count_rules {
            let ballots: Vec<(Preferences, u64)> = formal.into_iter().collect();
            match count_stv(&ballots, meta, rules) {
                Ok(outcome) => {
                    let mut winners = outcome.elected;
                    winners.sort_unstable();
                    for w in &winners {
                        c.elected[w.index()] += 1;
                    }
                    c.winner_sets.insert(winners, 1);
                }
                Err(Error::NoBallots) => c.no_result = 1,
                Err(e) => return Err(e),
            }
        }
        Ok(c)
    }

    fn simulate(&self, runs: u64) -> Result<Counters> {
        if self.model.is_identity() {
            return Ok(self.run(0)?.scaled(runs));
        }
        let empty = || Counters::empty(self.election.meta.num_candidates(), self.election.sheets.len());
        (0..runs)
            .into_par_iter()
            .map(|r| self.run(r))
            .try_reduce(empty, |a, b| Ok(a.merge(b)))
    }

    fn formality(&self, c: &Counters) -> FormalityRates {
        let mut style_total = [0u64; 2];
        let per_sheet = self
            .election
            .sheets
            .iter()
            .zip(&self.originals)
            .zip(&c.sheet_formal)
            .map(|((sheet, original), &formal)| {
                original.as_ref().map(|p| {
                    style_total[style_slot(p.style())] += sheet.multiplicity();
                    SheetFormality {
                        style: p.style(),
                        multiplicity: sheet.multiplicity(),
                        rate: formal as f64 / (sheet.multiplicity() * c.runs) as f64,
                    }
                })
            })
            .collect();
        let mean = |slot: usize| {
            (style_total[slot] > 0).then(|| c.style_formal[slot] as f64 / (style_total[slot] * c.runs) as f64)
        };
        FormalityRates {
            per_sheet,
            atl_mean: mean(0),
            btl_mean: mean(1),
        }
    }

    fn truncation(&self, c: &Counters) -> Vec<TruncationBucket> {
        let mut sizes: BTreeMap<(Style, usize), u64> = BTreeMap::new();
        for (sheet, original) in self.election.sheets.iter().zip(&self.originals) {
            if let Some(p) = original {
                *sizes.entry((p.style(), p.len())).or_default() += sheet.multiplicity();
            }
        }
        sizes
            .into_iter()
            .map(|((style, original_prefs), ballots)| TruncationBucket {
                style,
                original_prefs,
                ballots,
                mean_surviving: c.surviving.get(&(style, original_prefs)).copied().unwrap_or(0) as f64
                    / (ballots * c.runs) as f64,
            })
            .collect()
    }
}

fn candidate_code(election: &ElectionFile, id: CandidateId) -> String {
    election.meta.candidates()[id.index()].code.clone()
}

/// Runs every grid point and formality variant of `config` over `election`.
pub fn run_sweep(election: &ElectionFile, config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let meta = &election.meta;
    if let Some(c) = config
        .histogram_candidates
        .iter()
        .find(|c| c.index() >= meta.num_candidates())
    {
        return Err(Error::Config(format!("unknown histogram candidate index {}", c.0)));
    }
    let mut cells = Vec::new();
    for point in config.grid() {
        for &btl_required in &config.btl_required {
            let rules = FormalityRules::with_btl_required(btl_required)?;
            let cell = Cell::new(
                election,
                &point.model,
                rules,
                config.base_seed,
                point.index as u64,
                Some(&config.count_rules),
            );
            let counters = cell.simulate(config.runs_per_point)?;
            let runs = counters.runs as f64;
            let mut winner_sets: Vec<WinnerSetFrequency> = counters
                .winner_sets
                .iter()
                .map(|(set, &n)| WinnerSetFrequency {
                    candidates: set.iter().map(|&c| candidate_code(election, c)).collect(),
                    runs: n,
                    frequency: n as f64 / runs,
                })
                .collect();
            winner_sets.sort_by_key(|s| std::cmp::Reverse(s.runs));
            let candidates = counters
                .elected
                .iter()
                .enumerate()
                .map(|(i, &n)| CandidateFrequency {
                    candidate: meta.candidates()[i].code.clone(),
                    elected_runs: n,
                    frequency: n as f64 / runs,
                })
                .collect();
            cells.push(CellReport {
                point: point.index,
                rate: point.rate,
                btl_required,
                runs: counters.runs,
                no_result_runs: counters.no_result,
                no_result_frequency: counters.no_result as f64 / runs,
                winner_sets,
                candidates,
                formality: cell.formality(&counters),
                truncation: cell.truncation(&counters),
            });
        }
    }
    let mut histograms = Vec::new();
    for &btl_required in &config.btl_required {
        let rules = FormalityRules::with_btl_required(btl_required)?;
        for &c in &config.histogram_candidates {
            histograms.push(HistogramReport {
                btl_required,
                candidate: candidate_code(election, c),
                histogram: preference_position_histogram(election, c, &rules)?,
            });
        }
    }
    Ok(SimReport {
        election: meta.name().to_string(),
        model: config.family.name().to_string(),
        base_seed: config.base_seed,
        runs_per_point: config.runs_per_point,
        candidates: meta.candidates().iter().map(|c| c.code.clone()).collect(),
        cells,
        histograms,
    })
}

/// Per-ballot formality rates: the share of `runs` simulations in which each
/// originally formal ballot stays formal. Substreams use grid point 0.
pub fn formality_rate_report(
    election: &ElectionFile,
    model: &ErrorModel,
    rules: &FormalityRules,
    runs: u64,
    base_seed: u64,
) -> Result<FormalityRates> {
    model.validate()?;
    rules.validate()?;
    if runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    let cell = Cell::new(election, model, *rules, base_seed, 0, None);
    let c = cell.simulate(runs)?;
    Ok(cell.formality(&c))
}

/// Mean number of counted preferences after errors, bucketed by ballot style
/// and original preference count. Substreams use grid point 0.
pub fn truncation_stats(
    election: &ElectionFile,
    model: &ErrorModel,
    rules: &FormalityRules,
    runs: u64,
    base_seed: u64,
) -> Result<Vec<TruncationBucket>> {
    model.validate()?;
    rules.validate()?;
    if runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    let cell = Cell::new(election, model, *rules, base_seed, 0, None);
    let c = cell.simulate(runs)?;
    Ok(cell.truncation(&c))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PartitionRow {
    pub prefers_a: u64,
    pub prefers_b: u64,
    pub neither: u64,
}

impl PartitionRow {
    pub fn total(&self) -> u64 {
        self.prefers_a + self.prefers_b + self.neither
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PartitionTable {
    pub atl: PartitionRow,
    pub btl: PartitionRow,
}

/// Splits the formal ballots by which of `a` and `b` is ranked higher. ATL
/// ballots are read through their group expansion, so they compare the two
/// candidates' groups.
pub fn partition_by_preference(
    election: &ElectionFile,
    a: CandidateId,
    b: CandidateId,
    rules: &FormalityRules,
) -> Result<PartitionTable> {
    let meta = &election.meta;
    if a == b {
        return Err(Error::Config("partition needs two different candidates".into()));
    }
    if a.index() >= meta.num_candidates() || b.index() >= meta.num_candidates() {
        return Err(Error::Config("partition candidate not in the election".into()));
    }
    let mut table = PartitionTable::default();
    for sheet in &election.sheets {
        let Formality::Formal(prefs) = classify_formality(sheet, rules) else {
            continue;
        };
        let order = expand_to_candidates(&prefs, meta)?;
        let pos = |c: CandidateId| order.iter().position(|&x| x == c);
        let row = match prefs.style() {
            Style::Atl => &mut table.atl,
            Style::Btl => &mut table.btl,
        };
        let cell = match (pos(a), pos(b)) {
            (Some(i), Some(j)) if i < j => &mut row.prefers_a,
            (Some(_), None) => &mut row.prefers_a,
            (Some(_), Some(_)) | (None, Some(_)) => &mut row.prefers_b,
            (None, None) => &mut row.neither,
        };
        *cell += sheet.multiplicity();
    }
    Ok(table)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PositionHistogram {
    /// Rank of the candidate's group on ATL ballots.
    pub atl: BTreeMap<u32, u64>,
    /// Rank of the candidate on BTL ballots.
    pub btl: BTreeMap<u32, u64>,
}

/// Where `candidate` appears on formal ballots, weighted by multiplicity.
pub fn preference_position_histogram(
    election: &ElectionFile,
    candidate: CandidateId,
    rules: &FormalityRules,
) -> Result<PositionHistogram> {
    let meta = &election.meta;
    let Some(info) = meta.candidate(candidate) else {
        return Err(Error::Config(format!("unknown candidate index {}", candidate.0)));
    };
    let mut hist = PositionHistogram::default();
    for sheet in &election.sheets {
        let (slot, rank) = match classify_formality(sheet, rules) {
            Formality::Formal(Preferences::Btl(r)) => (&mut hist.btl, r.iter().position(|&c| c == candidate)),
            Formality::Formal(Preferences::Atl(r)) => {
                (&mut hist.atl, info.group.and_then(|g| r.iter().position(|&x| x == g)))
            }
            Formality::Informal => continue,
        };
        if let Some(rank) = rank {
            *slot.entry(rank as u32 + 1).or_default() += sheet.multiplicity();
        }
    }
    Ok(hist)
}

impl SimReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// One row per grid point, formality variant and candidate.
    pub fn write_points_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "point",
            "model",
            "rate",
            "btl_required",
            "runs",
            "no_result_frequency",
            "atl_formal_mean",
            "btl_formal_mean",
            "candidate",
            "elected_runs",
            "elected_frequency",
        ])?;
        for cell in &self.cells {
            for c in &cell.candidates {
                w.write_record([
                    cell.point.to_string(),
                    self.model.clone(),
                    cell.rate.to_string(),
                    cell.btl_required.to_string(),
                    cell.runs.to_string(),
                    cell.no_result_frequency.to_string(),
                    opt(cell.formality.atl_mean),
                    opt(cell.formality.btl_mean),
                    c.candidate.clone(),
                    c.elected_runs.to_string(),
                    c.frequency.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_winner_sets_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["point", "rate", "btl_required", "winners", "runs", "frequency"])?;
        for cell in &self.cells {
            for set in &cell.winner_sets {
                w.write_record([
                    cell.point.to_string(),
                    cell.rate.to_string(),
                    cell.btl_required.to_string(),
                    set.candidates.join(" "),
                    set.runs.to_string(),
                    set.frequency.to_string(),
                ])?;
            }
            if cell.no_result_runs > 0 {
                w.write_record([
                    cell.point.to_string(),
                    cell.rate.to_string(),
                    cell.btl_required.to_string(),
                    "no result".to_string(),
                    cell.no_result_runs.to_string(),
                    cell.no_result_frequency.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_formality_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "point",
            "rate",
            "btl_required",
            "sheet",
            "style",
            "multiplicity",
            "formality_rate",
        ])?;
        for cell in &self.cells {
            for (i, s) in cell.formality.per_sheet.iter().enumerate() {
                if let Some(s) = s {
                    w.write_record([
                        cell.point.to_string(),
                        cell.rate.to_string(),
                        cell.btl_required.to_string(),
                        i.to_string(),
                        s.style.to_string(),
                        s.multiplicity.to_string(),
                        s.rate.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_truncation_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "point",
            "rate",
            "btl_required",
            "style",
            "original_prefs",
            "ballots",
            "mean_surviving",
        ])?;
        for cell in &self.cells {
            for b in &cell.truncation {
                w.write_record([
                    cell.point.to_string(),
                    cell.rate.to_string(),
                    cell.btl_required.to_string(),
                    b.style.to_string(),
                    b.original_prefs.to_string(),
                    b.ballots.to_string(),
                    b.mean_surviving.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_histograms_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["btl_required", "candidate", "style", "rank", "ballots"])?;
        for h in &self.histograms {
            for (style, bins) in [(Style::Atl, &h.histogram.atl), (Style::Btl, &h.histogram.btl)] {
                for (rank, n) in bins {
                    w.write_record([
                        h.btl_required.to_string(),
                        h.candidate.clone(),
                        style.to_string(),
                        rank.to_string(),
                        n.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ballot::fixtures::{abc_meta, marks};
    use crate::ballot::{GroupId, MarkSheet};

    fn cid(i: u32) -> CandidateId {
        CandidateId(i)
    }

    fn atl(pairs: &[(u32, u32)], mult: u64) -> MarkSheet {
        let p: Vec<(GroupId, u32)> = pairs.iter().map(|&(g, v)| (GroupId(g), v)).collect();
        MarkSheet::new(marks(&p), vec![], mult).unwrap()
    }

    fn btl(pairs: &[(u32, u32)], mult: u64) -> MarkSheet {
        let p: Vec<(CandidateId, u32)> = pairs.iter().map(|&(c, v)| (cid(c), v)).collect();
        MarkSheet::new(vec![], marks(&p), mult).unwrap()
    }

    fn btl_ranked(n: u32, mult: u64) -> MarkSheet {
        let p: Vec<(u32, u32)> = (0..n).map(|i| (i, i + 1)).collect();
        btl(&p, mult)
    }

    fn election(sheets: Vec<MarkSheet>) -> ElectionFile {
        ElectionFile::new(abc_meta(), sheets, "test").unwrap()
    }

    fn mixed() -> ElectionFile {
        election(vec![
            atl(&[(0, 1), (1, 2)], 30),
            atl(&[(1, 1)], 25),
            atl(&[(2, 1), (0, 2)], 12),
            btl_ranked(6, 9),
            btl(&[(3, 1), (4, 2), (5, 3), (6, 4), (0, 5), (1, 6)], 8),
        ])
    }

    fn config(family: ModelFamily, rates: Vec<f64>, runs: u64) -> SimConfig {
        SimConfig {
            runs_per_point: runs,
            base_seed: 42,
            ..SimConfig::new(family, rates)
        }
    }

    fn within_3_sigma(observed: f64, expected: f64, trials: f64) {
        let sigma = (expected * (1.0 - expected) / trials).sqrt();
        assert!(
            (observed - expected).abs() <= 3.0 * sigma + 1e-12,
            "observed {observed}, expected {expected} +/- {}",
            3.0 * sigma
        );
    }

    #[test]
    fn baseline_always_elects_the_same_set() {
        let report = run_sweep(&mixed(), &config(ModelFamily::UniformDigit, vec![0.0], 7)).unwrap();
        assert_eq!(report.cells.len(), 1);
        let cell = &report.cells[0];
        assert_eq!(cell.runs, 7);
        assert_eq!(cell.winner_sets.len(), 1);
        assert_eq!(cell.winner_sets[0].frequency, 1.0);
        assert_eq!(cell.formality.atl_mean, Some(1.0));
        assert_eq!(cell.formality.btl_mean, Some(1.0));
    }

    #[test]
    fn grid_shape_and_baseline() {
        let mut cfg = config(ModelFamily::UniformDigit, vec![1.0, 0.0], 3);
        cfg.btl_required = vec![6, 1];
        let report = run_sweep(&mixed(), &cfg).unwrap();
        assert_eq!(report.cells.len(), 4);
        let keys: Vec<(f64, u32)> = report.cells.iter().map(|c| (c.rate, c.btl_required)).collect();
        assert_eq!(keys, vec![(0.0, 6), (0.0, 1), (1.0, 6), (1.0, 1)]);

        let grid = config(ModelFamily::Truncation, vec![0.3, 0.1, 0.3], 1).grid();
        assert_eq!(grid.iter().map(|p| p.rate).collect::<Vec<_>>(), vec![0.0, 0.1, 0.3]);

        let table = ConfusionMatrix::pairwise_digit_rates();
        let grid = config(ModelFamily::Confusion(table.clone()), vec![0.5], 1).grid();
        assert_eq!(grid.len(), 2);
        assert!(grid[0].model.is_identity());
        assert_eq!(grid[1].rate, table.mean_change_rate());
    }

    #[test]
    fn frequencies_and_no_results_sum_to_one() {
        let report = run_sweep(&mixed(), &config(ModelFamily::UniformDigit, vec![0.3, 0.9], 40)).unwrap();
        for cell in &report.cells {
            let runs: u64 = cell.winner_sets.iter().map(|s| s.runs).sum::<u64>() + cell.no_result_runs;
            assert_eq!(runs, cell.runs);
            let freq: f64 = cell.winner_sets.iter().map(|s| s.frequency).sum::<f64>() + cell.no_result_frequency;
            assert!((freq - 1.0).abs() < 1e-12);
            let seats: u64 = cell.candidates.iter().map(|c| c.elected_runs).sum();
            assert!(seats <= 2 * cell.runs);
        }
    }

    #[test]
    fn all_informal_runs_are_no_result() {
        let report = run_sweep(&mixed(), &config(ModelFamily::Truncation, vec![1.0], 5)).unwrap();
        let cell = &report.cells[1];
        assert_eq!(cell.no_result_runs, 5);
        assert!(cell.winner_sets.is_empty());
        assert_eq!(cell.formality.atl_mean, Some(0.0));
        assert!(cell.truncation.iter().all(|b| b.mean_surviving == 0.0));
    }

    #[test]
    fn zero_rate_keeps_every_ballot() {
        let e = mixed();
        let model = ErrorModel::UniformDigit { rate: 0.0 };
        let rates = formality_rate_report(&e, &model, &FormalityRules::default(), 10, 1).unwrap();
        assert!(rates.per_sheet.iter().all(|s| s.unwrap().rate == 1.0));
        let buckets = truncation_stats(&e, &model, &FormalityRules::default(), 10, 1).unwrap();
        assert_eq!(buckets.len(), 3);
        for b in buckets {
            assert_eq!(b.mean_surviving, b.original_prefs as f64);
        }
    }

    #[test]
    fn single_atl_digit_survives_at_one_minus_nine_tenths_rate() {
        let eps = 0.1;
        let e = election(vec![atl(&[(0, 1)], 4000)]);
        let model = ErrorModel::UniformDigit { rate: eps };
        let rates = formality_rate_report(&e, &model, &FormalityRules::default(), 5, 7).unwrap();
        within_3_sigma(rates.atl_mean.unwrap(), 1.0 - 0.9 * eps, 20_000.0);
    }

    /// Probability that six boxes marked 1..6 still read as a permutation of
    /// 1..6 when each digit is independently redrawn uniformly with
    /// probability `eps`, by summing over all 720 target permutations.
    fn six_digit_formality_oracle(eps: f64) -> f64 {
        fn perms(prefix: &mut Vec<u32>, left: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if left.is_empty() {
                out.push(prefix.clone());
                return;
            }
            for i in 0..left.len() {
                let v = left.remove(i);
                prefix.push(v);
                perms(prefix, left, out);
                prefix.pop();
                left.insert(i, v);
            }
        }
        let mut all = Vec::new();
        perms(&mut Vec::new(), &mut (1..=6).collect(), &mut all);
        let digit = |from: u32, to: u32| if from == to { 1.0 - eps + eps / 10.0 } else { eps / 10.0 };
        all.iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .map(|(i, &to)| digit(i as u32 + 1, to))
                    .product::<f64>()
            })
            .sum()
    }

    #[test]
    fn six_digit_btl_matches_enumeration() {
        let eps = 0.1;
        let exact = six_digit_formality_oracle(eps);
        let lower = (1.0 - 0.9 * eps).powi(6);
        assert!(exact > lower && exact < (1.0 - 0.9 * eps).powi(5));
        let e = election(vec![btl_ranked(6, 4000)]);
        let model = ErrorModel::UniformDigit { rate: eps };
        let rates = formality_rate_report(&e, &model, &FormalityRules::default(), 5, 3).unwrap();
        let observed = rates.btl_mean.unwrap();
        within_3_sigma(observed, exact, 20_000.0);
        let slack = 3.0 * (exact * (1.0 - exact) / 20_000.0).sqrt();
        assert!(observed >= lower - slack && observed <= (1.0 - 0.9 * eps).powi(5) + slack);
    }

    #[test]
    fn atl_outlasts_btl_under_default_rules() {
        let e = election(vec![atl(&[(0, 1), (1, 2)], 3000), btl_ranked(6, 3000)]);
        for eps in [0.01, 0.05, 0.2] {
            let model = ErrorModel::UniformDigit { rate: eps };
            let r = formality_rate_report(&e, &model, &FormalityRules::default(), 4, 11).unwrap();
            let (a, b) = (r.atl_mean.unwrap(), r.btl_mean.unwrap());
            let n = 12_000.0;
            let sigma = (a * (1.0 - a) / n + b * (1.0 - b) / n).sqrt();
            assert!(a - b >= -3.0 * sigma, "eps {eps}: ATL {a} BTL {b}");
            assert!(a > b);
        }
    }

    #[test]
    fn single_preference_styles_match_when_one_btl_pref_suffices() {
        let e = election(vec![atl(&[(0, 1)], 5000), btl(&[(3, 1)], 5000)]);
        let rules = FormalityRules::with_btl_required(1).unwrap();
        let model = ErrorModel::UniformDigit { rate: 0.2 };
        let r = formality_rate_report(&e, &model, &rules, 4, 5).unwrap();
        let (a, b) = (r.atl_mean.unwrap(), r.btl_mean.unwrap());
        let p: f64 = 1.0 - 0.9 * 0.2;
        let sigma = (2.0 * p * (1.0 - p) / 20_000.0).sqrt();
        assert!((a - b).abs() <= 3.0 * sigma, "ATL {a} BTL {b}");
    }

    #[test]
    fn reports_do_not_depend_on_thread_count() {
        let mut cfg = config(ModelFamily::UniformDigit, vec![0.05, 0.2], 30);
        cfg.btl_required = vec![6, 1];
        cfg.histogram_candidates = vec![cid(0), cid(4)];
        let e = mixed();
        let json = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run_sweep(&e, &cfg).unwrap().to_json().unwrap())
        };
        let one = json(1);
        assert_eq!(one, json(4));
        cfg.base_seed += 1;
        let other = rayon::ThreadPoolBuilder::new()
            .num_threads(2)
            .build()
            .unwrap()
            .install(|| run_sweep(&e, &cfg).unwrap().to_json().unwrap());
        assert_ne!(one, other);
    }

    #[test]
    fn truncation_model_shortens_rankings() {
        let e = election(vec![btl_ranked(7, 2000)]);
        let rules = FormalityRules::with_btl_required(1).unwrap();
        let model = ErrorModel::Truncation { rate: 0.5 };
        let b = truncation_stats(&e, &model, &rules, 5, 9).unwrap();
        assert_eq!(b.len(), 1);
        // k preferences survive with probability 2^-(k+1) for k < 7, all 7 with 2^-7.
        let expected: f64 = (1..7).map(|k| 0.5f64.powi(k + 1) * k as f64).sum::<f64>() + 7.0 * 0.5f64.powi(7);
        assert!(
            (b[0].mean_surviving - expected).abs() < 0.05,
            "{} vs {expected}",
            b[0].mean_surviving
        );
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let e = mixed();
        assert!(run_sweep(&e, &config(ModelFamily::UniformDigit, vec![1.5], 1)).is_err());
        assert!(run_sweep(&e, &config(ModelFamily::UniformDigit, vec![0.1], 0)).is_err());
        let mut cfg = config(ModelFamily::UniformDigit, vec![0.1], 1);
        cfg.btl_required = vec![0];
        assert!(run_sweep(&e, &cfg).is_err());
        cfg.btl_required = vec![];
        assert!(run_sweep(&e, &cfg).is_err());
        let mut cfg = config(ModelFamily::UniformDigit, vec![0.1], 1);
        cfg.histogram_candidates = vec![cid(99)];
        assert!(run_sweep(&e, &cfg).is_err());
    }

    #[test]
    fn partition_cells() {
        let e = mixed();
        let t = partition_by_preference(&e, cid(0), cid(3), &FormalityRules::default()).unwrap();
        // Groups A = {a1 a2 a3}, B = {b1 b2}, C = {c1 c2}; a1 is 0 and b1 is 3.
        assert_eq!(
            t.atl,
            PartitionRow {
                prefers_a: 30 + 12,
                prefers_b: 25,
                neither: 0
            }
        );
        assert_eq!(
            t.btl,
            PartitionRow {
                prefers_a: 9,
                prefers_b: 8,
                neither: 0
            }
        );
        let t = partition_by_preference(&e, cid(6), cid(5), &FormalityRules::default()).unwrap();
        assert_eq!(
            t.atl,
            PartitionRow {
                prefers_a: 0,
                prefers_b: 12,
                neither: 55
            }
        );
        assert_eq!(t.atl.total() + t.btl.total(), e.total_ballots());
        assert!(partition_by_preference(&e, cid(1), cid(1), &FormalityRules::default()).is_err());
    }

    #[test]
    fn position_histograms() {
        let rules = FormalityRules::with_btl_required(1).unwrap();
        let e = election(vec![
            btl(&[(0, 1)], 1),
            btl(&[(0, 1), (1, 2)], 1),
            btl(&[(1, 1), (0, 2)], 1),
            btl(&[(1, 1), (2, 2), (3, 3), (4, 4), (0, 5)], 1),
        ]);
        let h = preference_position_histogram(&e, cid(0), &rules).unwrap();
        assert_eq!(h.btl, BTreeMap::from([(1, 2), (2, 1), (5, 1)]));
        assert!(h.atl.is_empty());
        assert!(preference_position_histogram(&e, cid(6), &rules)
            .unwrap()
            .btl
            .is_empty());

        let e = election(vec![btl(&[(2, 1)], 4), atl(&[(1, 1), (0, 2)], 3)]);
        let h = preference_position_histogram(&e, cid(2), &rules).unwrap();
        assert_eq!(h.btl, BTreeMap::from([(1, 4)]));
        assert_eq!(h.atl, BTreeMap::from([(2, 3)]));
    }

    #[test]
    fn csv_outputs_have_one_row_per_candidate() {
        let mut cfg = config(ModelFamily::UniformDigit, vec![0.1], 4);
        cfg.histogram_candidates = vec![cid(0)];
        let report = run_sweep(&mixed(), &cfg).unwrap();
        let mut buf = Vec::new();
        report.write_points_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 7);
        assert!(text.starts_with("point,model,rate,btl_required,"));
        let rows = |write: &dyn Fn(&mut Vec<u8>) -> Result<()>| {
            let mut buf = Vec::new();
            write(&mut buf).unwrap();
            String::from_utf8(buf).unwrap().lines().count()
        };
        assert!(rows(&|b| report.write_winner_sets_csv(b)) > 1);
        assert!(rows(&|b| report.write_formality_csv(b)) > 1);
        assert!(rows(&|b| report.write_truncation_csv(b)) > 1);
        assert!(rows(&|b| report.write_histograms_csv(b)) > 1);
    }
}
