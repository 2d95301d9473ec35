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

//! Subcommand implementations. Inputs are read and validated in full before
//! any output is written.

use crate::config::to_config_toml;
use crate::manifest::{sidecar, RunManifest};
use crate::meta::{read_meta, with_seats};
use crate::{
    usage, CountArgs, EstimateArgs, ForensicsArgs, HistogramArgs, IngestArgs, ModelArg, PartitionArgs, RoundingArg,
    SimulateArgs, StyleArg, SurplusArg,
};
use anyhow::{Context, Result};
use ballot_noise::count::ElectionReason;
use ballot_noise::{
    binomial_estimate, classify_formality, count_stv, parse_preference_csv, partition_by_preference,
    preference_position_histogram, read_election_file, repeated_and_skipped_table, run_sweep, stats,
    write_election_file, CandidateId, ColumnMap, ColumnRef, ConfusionMatrix, CountRules, ElectionFile, ElectionMeta,
    Formality, FormalityRules, ModelFamily, Preferences, SimConfig, Style, SurplusMethod, TallyRounding,
};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

const DEFAULT_RUNS: u64 = 1000;

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| usage(format!("missing --{flag}")))
}

fn load_election(path: &Path) -> Result<ElectionFile> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_election_file(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn formality_rules(btl_required: Option<u32>) -> Result<FormalityRules> {
    let n = btl_required.unwrap_or(FormalityRules::default().btl_required_prefs);
    FormalityRules::with_btl_required(n).map_err(|e| usage(e.to_string()))
}

fn count_rules(surplus: Option<SurplusArg>, rounding: Option<RoundingArg>) -> CountRules {
    CountRules {
        surplus_method: match surplus.unwrap_or(SurplusArg::Weighted) {
            SurplusArg::Weighted => SurplusMethod::WeightedInclusiveGregory,
            SurplusArg::Unweighted => SurplusMethod::UnweightedInclusiveGregory,
        },
        tally_rounding: match rounding.unwrap_or(RoundingArg::Truncate) {
            RoundingArg::Truncate => TallyRounding::TruncateToInteger,
            RoundingArg::Exact => TallyRounding::Exact,
        },
        ..CountRules::default()
    }
}

fn find_candidate(meta: &ElectionMeta, key: &str) -> Result<CandidateId> {
    meta.find_candidate(key)
        .ok_or_else(|| usage(format!("no candidate matches {key:?}")))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Writes a table to `out`, with a manifest beside it, or to stdout.
fn emit<T: Serialize>(
    out: Option<&Path>,
    command: &str,
    args: &T,
    inputs: &[&Path],
    write: impl FnOnce(&mut dyn Write) -> ballot_noise::Result<()>,
) -> Result<()> {
    match out {
        Some(path) => {
            let manifest = RunManifest::new(command, args, None, inputs)?;
            let mut w = create(path)?;
            write(&mut w)?;
            w.flush()?;
            manifest.write(&sidecar(path))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            Ok(())
        }
    }
}

pub fn ingest(a: IngestArgs) -> Result<()> {
    let csv = required(a.csv.as_deref(), "csv")?;
    let meta_path = required(a.meta.as_deref(), "meta")?;
    let out = required(a.out.as_deref(), "out")?;
    let meta = read_meta(meta_path)?;
    let mut columns = ColumnMap {
        has_headers: !a.no_headers,
        ..ColumnMap::default()
    };
    if let Some(c) = &a.column {
        columns.preferences = c.parse::<ColumnRef>().unwrap_or_else(|never| match never {});
    }
    let input = File::open(csv).with_context(|| format!("opening {}", csv.display()))?;
    let (election, report) = parse_preference_csv(BufReader::new(input), &meta, &columns)
        .with_context(|| format!("reading {}", csv.display()))?;
    let manifest = RunManifest::new("ingest", &a, None, &[csv, meta_path])?;

    let mut w = create(out)?;
    write_election_file(&election, &mut w)?;
    w.flush()?;
    let report_path = a.report.clone().unwrap_or_else(|| {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".errors.csv");
        out.with_file_name(name)
    });
    let mut w = create(&report_path)?;
    report.write_csv(&mut w)?;
    w.flush()?;
    manifest.write(&sidecar(out))?;
    eprintln!(
        "{} rows read, {} accepted, {} rejected; {} distinct sheets, {} ballots",
        report.rows_read,
        report.rows_accepted,
        report.errors.len(),
        election.sheets.len(),
        election.total_ballots()
    );
    Ok(())
}

/// Formal ballots under `rules`, merged by preference list.
fn formal_ballots(election: &ElectionFile, rules: &FormalityRules) -> Vec<(Preferences, u64)> {
    let mut merged: BTreeMap<Preferences, u64> = BTreeMap::new();
    for sheet in &election.sheets {
        if let Formality::Formal(p) = classify_formality(sheet, rules) {
            *merged.entry(p).or_default() += sheet.multiplicity();
        }
    }
    merged.into_iter().collect()
}

#[derive(Serialize)]
struct CountSummary {
    seats: u32,
    ballots: u64,
    formal_ballots: u64,
    quota: u64,
    elected: Vec<String>,
    rounding_loss: String,
    final_two_margin: Option<String>,
}

pub fn count(a: CountArgs) -> Result<()> {
    let path = required(a.election.as_deref(), "election")?;
    let mut election = load_election(path)?;
    if let Some(seats) = a.seats {
        election.meta = with_seats(&election.meta, seats)?;
    }
    let rules = formality_rules(a.btl_required)?;
    let meta = &election.meta;
    let outcome = count_stv(
        &formal_ballots(&election, &rules),
        meta,
        &count_rules(a.surplus, a.rounding),
    )?;
    let t = &outcome.transcript;
    let summary = CountSummary {
        seats: meta.seats(),
        ballots: election.total_ballots(),
        formal_ballots: t.formal_ballots,
        quota: t.quota,
        elected: outcome
            .elected
            .iter()
            .map(|&c| meta.candidates()[c.index()].code.clone())
            .collect(),
        rounding_loss: t.rounding_loss().to_string(),
        final_two_margin: t.final_two_margin().map(|m| m.to_string()),
    };

    let mut winners = String::from("order,round,code,name,tally,reason\n");
    let mut order = 0;
    for r in &t.rounds {
        for e in &r.elected {
            order += 1;
            let c = &meta.candidates()[e.candidate.index()];
            let reason = match e.reason {
                ElectionReason::Quota => "quota",
                ElectionReason::RemainingSeats => "remaining_seats",
            };
            println!("{order:>3}. {} ({}) round {} {reason}", c.name, c.code, r.round);
            winners.push_str(&format!(
                "{order},{},{},\"{}\",{},{reason}\n",
                r.round,
                c.code,
                c.name.replace('"', "\"\""),
                e.tally
            ));
        }
    }
    println!(
        "quota {}, formal ballots {}, rounding loss {}, final-two margin {}",
        summary.quota,
        summary.formal_ballots,
        summary.rounding_loss,
        summary.final_two_margin.as_deref().unwrap_or("n/a")
    );

    if let Some(dir) = a.out_dir.as_deref() {
        let manifest = RunManifest::new("count", &a, None, &[path])?;
        out_dir(dir)?;
        let mut w = create(&dir.join("transcript.jsonl"))?;
        t.write_jsonl(&mut w)?;
        w.flush()?;
        std::fs::write(dir.join("winners.csv"), winners)?;
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
        std::fs::write(dir.join("config.toml"), to_config_toml("count", &a)?)?;
        manifest.write(&dir.join("manifest.json"))?;
    }
    Ok(())
}

pub fn simulate(mut a: SimulateArgs) -> Result<()> {
    let path = required(a.election.clone(), "election")?;
    let election = load_election(&path)?;
    let meta = &election.meta;
    let model = *a.model.get_or_insert(ModelArg::Digit);
    let family = match model {
        ModelArg::Truncation => ModelFamily::Truncation,
        ModelArg::Digit => ModelFamily::UniformDigit,
        ModelArg::Confusion => ModelFamily::Confusion(match &a.matrix {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                ConfusionMatrix::parse(&text).with_context(|| format!("in {}", p.display()))?
            }
            None => ConfusionMatrix::pairwise_digit_rates(),
        }),
    };
    let rates = match (&family, &a.rates) {
        (ModelFamily::Confusion(_), r) => r.clone().unwrap_or_default(),
        (_, Some(r)) => r.clone(),
        (_, None) => return Err(usage("missing --rates")),
    };
    let histogram_candidates = a
        .histogram
        .iter()
        .flatten()
        .map(|k| find_candidate(meta, k))
        .collect::<Result<Vec<_>>>()?;
    let config = SimConfig {
        base_seed: *a.seed.get_or_insert(0),
        runs_per_point: *a.runs.get_or_insert(DEFAULT_RUNS),
        family,
        rates,
        btl_required: a
            .btl_required
            .get_or_insert_with(|| vec![FormalityRules::default().btl_required_prefs])
            .clone(),
        count_rules: count_rules(a.surplus, a.rounding),
        histogram_candidates,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let report = run_sweep(&election, &config)?;

    if let ModelFamily::Confusion(m) = &config.family {
        println!(
            "confusion table mean per-digit change rate {:.2}%",
            100.0 * m.mean_change_rate()
        );
    }
    for cell in &report.cells {
        let top = cell
            .winner_sets
            .first()
            .map(|s| format!("{} ({:.3})", s.candidates.join(" "), s.frequency))
            .unwrap_or_else(|| "none".into());
        println!(
            "rate {:.4} btl-required {}: top winner set {top}, no result {:.3}",
            cell.rate, cell.btl_required, cell.no_result_frequency
        );
    }

    if let Some(dir) = a.out_dir.clone() {
        let mut inputs: Vec<&Path> = vec![&path];
        if let Some(m) = a.matrix.as_deref() {
            inputs.push(m);
        }
        let manifest = RunManifest::new("simulate", &a, Some(config.base_seed), &inputs)?;
        out_dir(&dir)?;
        type Writer = fn(&ballot_noise::SimReport, &mut BufWriter<File>) -> ballot_noise::Result<()>;
        let tables: [(&str, Writer); 5] = [
            ("points.csv", |r, w| r.write_points_csv(w)),
            ("winner_sets.csv", |r, w| r.write_winner_sets_csv(w)),
            ("formality.csv", |r, w| r.write_formality_csv(w)),
            ("truncation.csv", |r, w| r.write_truncation_csv(w)),
            ("histograms.csv", |r, w| r.write_histograms_csv(w)),
        ];
        for (name, write) in tables {
            let mut w = create(&dir.join(name))?;
            write(&report, &mut w)?;
            w.flush()?;
        }
        std::fs::write(dir.join("report.json"), report.to_json()? + "\n")?;
        std::fs::write(dir.join("config.toml"), to_config_toml("simulate", &a)?)?;
        manifest.write(&dir.join("manifest.json"))?;
    }
    Ok(())
}

pub fn partition(a: PartitionArgs) -> Result<()> {
    let path: PathBuf = required(a.election.clone(), "election")?;
    let election = load_election(&path)?;
    let meta = &election.meta;
    let ca = find_candidate(meta, required(a.a.as_deref(), "a")?)?;
    let cb = find_candidate(meta, required(a.b.as_deref(), "b")?)?;
    if ca == cb {
        return Err(usage("--a and --b name the same candidate"));
    }
    let table = partition_by_preference(&election, ca, cb, &formality_rules(a.btl_required)?)?;
    let (code_a, code_b) = (&meta.candidates()[ca.index()].code, &meta.candidates()[cb.index()].code);
    emit(a.out.as_deref(), "analyze partition", &a, &[&path], |w| {
        writeln!(w, "style,prefers_{code_a},prefers_{code_b},neither")?;
        for (style, row) in [(Style::Atl, table.atl), (Style::Btl, table.btl)] {
            writeln!(w, "{style},{},{},{}", row.prefers_a, row.prefers_b, row.neither)?;
        }
        Ok(())
    })
}

pub fn forensics(a: ForensicsArgs) -> Result<()> {
    let path: PathBuf = required(a.election.clone(), "election")?;
    let election = load_election(&path)?;
    let style = match a.style.unwrap_or(StyleArg::Btl) {
        StyleArg::Atl => Style::Atl,
        StyleArg::Btl => Style::Btl,
    };
    let boxes = match style {
        Style::Atl => election.meta.num_groups(),
        Style::Btl => election.meta.num_candidates(),
    } as u64;
    let max_pref = a.max_pref.unwrap_or(boxes);
    let rows = repeated_and_skipped_table(&election.sheets, style, max_pref).map_err(|e| usage(e.to_string()))?;
    emit(a.out.as_deref(), "analyze forensics", &a, &[&path], |w| {
        stats::write_forensics_csv(&rows, w)
    })
}

pub fn histogram(a: HistogramArgs) -> Result<()> {
    let path: PathBuf = required(a.election.clone(), "election")?;
    let election = load_election(&path)?;
    let c = find_candidate(&election.meta, required(a.candidate.as_deref(), "candidate")?)?;
    let h = preference_position_histogram(&election, c, &formality_rules(a.btl_required)?)?;
    emit(a.out.as_deref(), "analyze histogram", &a, &[&path], |w| {
        writeln!(w, "style,rank,ballots")?;
        for (style, bins) in [(Style::Atl, &h.atl), (Style::Btl, &h.btl)] {
            for (rank, n) in bins {
                writeln!(w, "{style},{rank},{n}")?;
            }
        }
        Ok(())
    })
}

pub fn estimate_rate(a: EstimateArgs) -> Result<()> {
    let errors = required(a.errors, "errors")?;
    let trials = required(a.trials, "trials")?;
    let e = binomial_estimate(errors, trials).map_err(|e| usage(e.to_string()))?;
    println!("{}", e.percent_string(a.decimals.unwrap_or(2)));
    Ok(())
}
