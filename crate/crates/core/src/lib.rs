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

//! Single Transferable Vote counting for Senate-style ballots, together with
//! stochastic models of digitisation error and a Monte Carlo harness that
//! measures how those errors shift election outcomes.

pub mod ballot;
pub mod count;
pub mod error;
pub mod error_model;
pub mod format;
pub mod ingest;
pub mod rng;
pub mod sim;
pub mod stats;

pub use ballot::{
    classify_formality, expand_to_candidates, interpret_marks, Candidate, CandidateId, ElectionMeta, Formality,
    FormalityRules, Group, GroupId, Mark, MarkSheet, Preferences, Style,
};
pub use count::{
    count_expanded, count_stv, droop_quota, CountOutcome, CountRules, CountTranscript, SurplusMethod, Tally,
    TallyRounding,
};
pub use error::{Error, Result};
pub use error_model::{
    apply_confusion_model, apply_digit_model, apply_truncation_model, perturb_ballot, ConfusionMatrix, ErrorModel,
};
pub use format::{read_election_file, write_election_file, ElectionFile};
pub use ingest::{parse_preference_csv, ColumnMap, ColumnRef, ParseReport};
pub use rng::RandomStream;
pub use sim::{
    formality_rate_report, partition_by_preference, preference_position_histogram, run_sweep, truncation_stats,
    FormalityRates, ModelFamily, PartitionTable, PositionHistogram, SimConfig, SimReport, TruncationBucket,
};
pub use stats::{binomial_estimate, digit_budget, repeated_and_skipped_table, ForensicsRow, RateEstimate};
