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

//! Deterministic STV tabulation with an auditable round-by-round transcript.
//!
//! Ballot weights are exact rationals. Ballots sit in *parcels* (ballots that
//! share a weight) grouped into *bundles* (everything one candidate received
//! in one transfer). Under [`TallyRounding::TruncateToInteger`] each bundle is
//! credited to its recipient rounded down, and the fractional remainder is
//! booked as rounding loss; when a bundle moves again, each part of it is
//! rounded down separately, so the loss only ever grows.
//!
//! Each round performs one action (the initial distribution, one surplus
//! transfer, or one exclusion), followed by the election of every continuing
//! candidate that has reached the quota.

use crate::ballot::{expand_to_candidates, CandidateId, ElectionMeta, Preferences};
use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize, Serializer};
use std::cmp::Ordering;
use std::collections::{BTreeMap, VecDeque};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurplusMethod {
    /// Every ballot's weight is multiplied by surplus / pile weight.
    WeightedInclusiveGregory,
    /// Every ballot's weight becomes surplus / number of papers.
    UnweightedInclusiveGregory,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TallyRounding {
    /// Each credited transfer is rounded down to a whole vote.
    TruncateToInteger,
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieBreak {
    /// Compare tallies at the most recent earlier round where they differ;
    /// failing that, the lower candidate index is excluded first and elected
    /// first.
    CountbackThenIndex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurplusOrder {
    /// Candidates elected together have their surpluses transferred largest
    /// tally first.
    DescendingTally,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRules {
    pub surplus_method: SurplusMethod,
    pub tally_rounding: TallyRounding,
    pub tie_break: TieBreak,
    pub simultaneous_surplus_order: SurplusOrder,
}

impl Default for CountRules {
    fn default() -> Self {
        CountRules {
            surplus_method: SurplusMethod::WeightedInclusiveGregory,
            tally_rounding: TallyRounding::TruncateToInteger,
            tie_break: TieBreak::CountbackThenIndex,
            simultaneous_surplus_order: SurplusOrder::DescendingTally,
        }
    }
}

impl CountRules {
    pub fn exact() -> Self {
        CountRules {
            tally_rounding: TallyRounding::Exact,
            ..Default::default()
        }
    }
}

/// The Droop quota: `floor(ballots / (seats + 1)) + 1`.
pub fn droop_quota(formal_ballots: u64, seats: u32) -> u64 {
    formal_ballots / (u64::from(seats) + 1) + 1
}

/// An exact vote amount. Serialized as `"n"` or `"p/q"`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tally(pub BigRational);

impl Tally {
    pub fn zero() -> Self {
        Tally(BigRational::zero())
    }

    pub fn from_integer(n: u64) -> Self {
        Tally(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }
}

impl fmt::Display for Tally {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl Serialize for Tally {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RoundAction {
    InitialDistribution,
    Surplus {
        candidate: CandidateId,
        surplus: Tally,
        transfer_value: Tally,
    },
    Exclusion {
        candidate: CandidateId,
        tally: Tally,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ElectionReason {
    Quota,
    /// Elected because the continuing candidates exactly filled the
    /// remaining seats.
    RemainingSeats,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ElectionEvent {
    pub candidate: CandidateId,
    pub tally: Tally,
    /// Tally minus quota (zero when elected without a quota).
    pub surplus: Tally,
    pub reason: ElectionReason,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TieKind {
    Exclusion,
    ElectionOrder,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TieBreakRecord {
    pub kind: TieKind,
    /// Candidates with equal current tallies, in the order decided.
    pub order: Vec<CandidateId>,
    /// Earlier round whose tallies separated them, if any; `None` means the
    /// candidate index decided.
    pub resolved_at_round: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    pub round: u32,
    pub action: RoundAction,
    /// Tally of every candidate after the action (a candidate elected with a
    /// distributed surplus holds exactly the quota).
    pub tallies: Vec<Tally>,
    pub continuing: Vec<CandidateId>,
    pub elected: Vec<ElectionEvent>,
    pub exhausted: Tally,
    pub rounding_loss: Tally,
    pub tie_breaks: Vec<TieBreakRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CountTranscript {
    pub seats: u32,
    pub formal_ballots: u64,
    pub quota: u64,
    pub rules: CountRules,
    pub candidates: Vec<String>,
    pub rounds: Vec<RoundRecord>,
    pub elected: Vec<CandidateId>,
}

impl CountTranscript {
    /// Writes one JSON object per line: a header, then one per round.
    pub fn write_jsonl<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            seats: u32,
            formal_ballots: u64,
            quota: u64,
            rules: &'a CountRules,
            candidates: &'a [String],
            elected: &'a [CandidateId],
        }
        let header = Header {
            seats: self.seats,
            formal_ballots: self.formal_ballots,
            quota: self.quota,
            rules: &self.rules,
            candidates: &self.candidates,
            elected: &self.elected,
        };
        serde_json::to_writer(&mut out, &header)?;
        writeln!(out)?;
        for r in &self.rounds {
            serde_json::to_writer(&mut out, r)?;
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn final_round(&self) -> &RoundRecord {
        self.rounds.last().expect("a transcript always has the initial round")
    }

    pub fn rounding_loss(&self) -> &Tally {
        &self.final_round().rounding_loss
    }

    /// Gap between the last two continuing candidates, taken from the last
    /// round in which exactly two remained.
    pub fn final_two_margin(&self) -> Option<Tally> {
        let r = self.rounds.iter().rev().find(|r| r.continuing.len() == 2)?;
        let a = &r.tallies[r.continuing[0].index()].0;
        let b = &r.tallies[r.continuing[1].index()].0;
        Some(Tally((a - b).abs()))
    }

    /// Checks `sum(tallies) + exhausted + loss == formal ballots` on every
    /// round, exactly.
    pub fn check_conservation(&self) -> std::result::Result<(), String> {
        let total = BigRational::from_integer(BigInt::from(self.formal_ballots));
        for r in &self.rounds {
            let sum =
                r.tallies.iter().fold(BigRational::zero(), |acc, t| acc + &t.0) + &r.exhausted.0 + &r.rounding_loss.0;
            if sum != total {
                return Err(format!(
                    "round {}: tallies + exhausted + loss = {} but {} ballots were counted",
                    r.round,
                    Tally(sum),
                    self.formal_ballots
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountOutcome {
    pub elected: Vec<CandidateId>,
    pub transcript: CountTranscript,
}

/// Counts formal preference lists (with multiplicities) under `rules`.
pub fn count_stv(ballots: &[(Preferences, u64)], meta: &ElectionMeta, rules: &CountRules) -> Result<CountOutcome> {
    let expanded = ballots
        .iter()
        .map(|(p, n)| Ok((expand_to_candidates(p, meta)?, *n)))
        .collect::<Result<Vec<_>>>()?;
    count_expanded(&expanded, meta, rules)
}

/// Counts ballots already expanded to candidate orderings.
pub fn count_expanded(
    ballots: &[(Vec<CandidateId>, u64)],
    meta: &ElectionMeta,
    rules: &CountRules,
) -> Result<CountOutcome> {
    let n = meta.num_candidates();
    let mut total = 0u64;
    for (ranking, papers) in ballots {
        if ranking.is_empty() || *papers == 0 {
            return Err(Error::DataIntegrity("ballot with no preferences or no papers".into()));
        }
        let mut seen = vec![false; n];
        for c in ranking {
            let i = c.index();
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::DataIntegrity(format!(
                    "ranking {ranking:?} has an unknown or repeated candidate"
                )));
            }
        }
        total += papers;
    }
    if total == 0 {
        return Err(Error::NoBallots);
    }
    let mut counter = Counter::new(ballots, meta, rules, total);
    counter.run()?;
    let elected = counter.elected.clone();
    Ok(CountOutcome {
        elected: elected.clone(),
        transcript: CountTranscript {
            seats: meta.seats(),
            formal_ballots: total,
            quota: counter.quota_int,
            rules: *rules,
            candidates: meta.candidates().iter().map(|c| c.code.clone()).collect(),
            rounds: counter.records,
            elected,
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Continuing,
    Elected,
    Excluded,
}

struct Entry {
    ballot: u32,
    /// Index into the ballot's ranking of the candidate currently holding it.
    pos: u32,
    papers: u64,
}

struct Parcel {
    weight: BigRational,
    entries: Vec<Entry>,
}

impl Parcel {
    fn papers(&self) -> u64 {
        self.entries.iter().map(|e| e.papers).sum()
    }

    fn value(&self) -> BigRational {
        &self.weight * BigRational::from_integer(BigInt::from(self.papers()))
    }
}

struct Bundle {
    parcels: Vec<Parcel>,
    /// Amount added to the holder's tally when the bundle arrived.
    credited: BigRational,
}

impl Bundle {
    fn value(&self) -> BigRational {
        self.parcels
            .iter()
            .map(Parcel::value)
            .fold(BigRational::zero(), |a, b| a + b)
    }
}

/// Where a routed parcel ends up: a candidate or the exhausted pile.
type Destination = Option<CandidateId>;

struct Counter<'a> {
    ballots: &'a [(Vec<CandidateId>, u64)],
    rules: CountRules,
    seats: usize,
    total: u64,
    quota_int: u64,
    quota: BigRational,
    status: Vec<Status>,
    piles: Vec<Vec<Bundle>>,
    tallies: Vec<BigRational>,
    exhausted: BigRational,
    loss: BigRational,
    elected: Vec<CandidateId>,
    pending: VecDeque<CandidateId>,
    records: Vec<RoundRecord>,
}

impl<'a> Counter<'a> {
    fn new(ballots: &'a [(Vec<CandidateId>, u64)], meta: &ElectionMeta, rules: &CountRules, total: u64) -> Self {
        let n = meta.num_candidates();
        let quota_int = droop_quota(total, meta.seats());
        Counter {
            ballots,
            rules: *rules,
            seats: meta.seats() as usize,
            total,
            quota_int,
            quota: BigRational::from_integer(BigInt::from(quota_int)),
            status: vec![Status::Continuing; n],
            piles: (0..n).map(|_| Vec::new()).collect(),
            tallies: vec![BigRational::zero(); n],
            exhausted: BigRational::zero(),
            loss: BigRational::zero(),
            elected: Vec::new(),
            pending: VecDeque::new(),
            records: Vec::new(),
        }
    }

    fn continuing(&self) -> Vec<CandidateId> {
        (0..self.status.len())
            .filter(|&i| self.status[i] == Status::Continuing)
            .map(|i| CandidateId(i as u32))
            .collect()
    }

    fn run(&mut self) -> Result<()> {
        self.initial_distribution();
        self.finish_round(RoundAction::InitialDistribution, Vec::new())?;

        loop {
            if self.elected.len() == self.seats {
                break;
            }
            let continuing = self.continuing();
            let remaining = self.seats - self.elected.len();
            if continuing.len() <= remaining {
                let (order, ties) = self.ranked(&continuing, TieKind::ElectionOrder);
                let last = self.records.last_mut().expect("initial round recorded");
                last.tie_breaks.extend(ties);
                for c in order {
                    self.status[c.index()] = Status::Elected;
                    self.elected.push(c);
                    last.elected.push(ElectionEvent {
                        candidate: c,
                        tally: Tally(self.tallies[c.index()].clone()),
                        surplus: Tally::zero(),
                        reason: ElectionReason::RemainingSeats,
                    });
                }
                last.continuing.clear();
                break;
            }
            if let Some(c) = self.pending.pop_front() {
                let surplus = &self.tallies[c.index()] - &self.quota;
                if surplus.is_positive() {
                    let action = self.transfer_surplus(c, surplus)?;
                    self.finish_round(action, Vec::new())?;
                }
                continue;
            }
            let (order, ties) = self.ranked(&continuing, TieKind::Exclusion);
            let action = self.exclude(order[0]);
            self.finish_round(action, ties)?;
        }
        Ok(())
    }

    fn initial_distribution(&mut self) {
        let mut firsts: BTreeMap<CandidateId, Vec<Entry>> = BTreeMap::new();
        for (i, (ranking, papers)) in self.ballots.iter().enumerate() {
            firsts.entry(ranking[0]).or_default().push(Entry {
                ballot: i as u32,
                pos: 0,
                papers: *papers,
            });
        }
        for (c, entries) in firsts {
            let parcel = Parcel {
                weight: BigRational::one(),
                entries,
            };
            let value = parcel.value();
            self.tallies[c.index()] += &value;
            self.piles[c.index()].push(Bundle {
                parcels: vec![parcel],
                credited: value,
            });
        }
    }

    /// The next continuing candidate on `entry`'s ballot after its current
    /// holder, as a new position.
    fn next_position(&self, entry: &Entry) -> Option<u32> {
        let ranking = &self.ballots[entry.ballot as usize].0;
        (entry.pos as usize + 1..ranking.len())
            .find(|&p| self.status[ranking[p].index()] == Status::Continuing)
            .map(|p| p as u32)
    }

    /// Splits parcels by destination, keeping each parcel's weight.
    fn route(&self, parcels: Vec<Parcel>) -> BTreeMap<Destination, Vec<Parcel>> {
        let mut out: BTreeMap<Destination, Vec<Parcel>> = BTreeMap::new();
        for parcel in parcels {
            let mut split: BTreeMap<Destination, Vec<Entry>> = BTreeMap::new();
            for entry in parcel.entries {
                match self.next_position(&entry) {
                    Some(pos) => {
                        let dest = self.ballots[entry.ballot as usize].0[pos as usize];
                        split.entry(Some(dest)).or_default().push(Entry { pos, ..entry });
                    }
                    None => split.entry(None).or_default().push(entry),
                }
            }
            for (dest, entries) in split {
                out.entry(dest).or_default().push(Parcel {
                    weight: parcel.weight.clone(),
                    entries,
                });
            }
        }
        out
    }

    fn round_down(&self, value: &BigRational) -> BigRational {
        match self.rules.tally_rounding {
            TallyRounding::Exact => value.clone(),
            TallyRounding::TruncateToInteger => value.floor(),
        }
    }

    /// Credits routed parcels to their destinations as one bundle each and
    /// returns the total amount credited.
    fn credit(&mut self, routed: BTreeMap<Destination, Vec<Parcel>>) -> BigRational {
        let mut credited_total = BigRational::zero();
        for (dest, parcels) in routed {
            let bundle_value = parcels
                .iter()
                .map(Parcel::value)
                .fold(BigRational::zero(), |a, b| a + b);
            let credited = self.round_down(&bundle_value);
            credited_total += &credited;
            match dest {
                Some(c) => {
                    self.tallies[c.index()] += &credited;
                    self.piles[c.index()].push(Bundle { parcels, credited });
                }
                None => self.exhausted += credited,
            }
        }
        credited_total
    }

    fn transfer_surplus(&mut self, c: CandidateId, surplus: BigRational) -> Result<RoundAction> {
        let bundles = std::mem::take(&mut self.piles[c.index()]);
        let pile_value = bundles
            .iter()
            .map(Bundle::value)
            .fold(BigRational::zero(), |a, b| a + b);
        let papers: u64 = bundles.iter().flat_map(|b| &b.parcels).map(Parcel::papers).sum();
        let parcels: Vec<Parcel> = bundles.into_iter().flat_map(|b| b.parcels).collect();

        let (transfer_value, reweighted) = match self.rules.surplus_method {
            SurplusMethod::WeightedInclusiveGregory => {
                let tv = &surplus / &pile_value;
                let parcels = parcels
                    .into_iter()
                    .map(|p| Parcel {
                        weight: &p.weight * &tv,
                        entries: p.entries,
                    })
                    .collect();
                (tv, parcels)
            }
            SurplusMethod::UnweightedInclusiveGregory => {
                let tv = &surplus / BigRational::from_integer(BigInt::from(papers));
                let entries = parcels.into_iter().flat_map(|p| p.entries).collect();
                let parcel = Parcel {
                    weight: tv.clone(),
                    entries,
                };
                (tv, vec![parcel])
            }
        };
        if transfer_value.is_negative() || transfer_value > BigRational::one() {
            return Err(self.invariant(format!("transfer value {} outside [0, 1]", Tally(transfer_value))));
        }

        let routed = self.route(reweighted);
        let credited = self.credit(routed);
        self.loss += &surplus - credited;
        self.tallies[c.index()] = self.quota.clone();
        Ok(RoundAction::Surplus {
            candidate: c,
            surplus: Tally(surplus),
            transfer_value: Tally(transfer_value),
        })
    }

    fn exclude(&mut self, c: CandidateId) -> RoundAction {
        self.status[c.index()] = Status::Excluded;
        let tally = std::mem::replace(&mut self.tallies[c.index()], BigRational::zero());
        let bundles = std::mem::take(&mut self.piles[c.index()]);
        for bundle in bundles {
            let routed = self.route(bundle.parcels);
            let credited = self.credit(routed);
            self.loss += bundle.credited - credited;
        }
        RoundAction::Exclusion {
            candidate: c,
            tally: Tally(tally),
        }
    }

    /// Orders `candidates` for exclusion (lowest first) or election (highest
    /// first), breaking ties by countback and then index.
    fn ranked(&self, candidates: &[CandidateId], kind: TieKind) -> (Vec<CandidateId>, Vec<TieBreakRecord>) {
        let dir = |ord: Ordering| match kind {
            TieKind::Exclusion => ord,
            TieKind::ElectionOrder => ord.reverse(),
        };
        let history = |a: CandidateId, b: CandidateId| -> Ordering {
            self.records
                .iter()
                .rev()
                .map(|r| dir(r.tallies[a.index()].cmp(&r.tallies[b.index()])))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        };
        let mut order = candidates.to_vec();
        order.sort_by(|&a, &b| {
            dir(self.tallies[a.index()].cmp(&self.tallies[b.index()]))
                .then_with(|| history(a, b))
                .then_with(|| a.cmp(&b))
        });

        let mut ties = Vec::new();
        let mut start = 0;
        while start < order.len() {
            let t = &self.tallies[order[start].index()];
            let end = start
                + order[start..]
                    .iter()
                    .take_while(|c| &self.tallies[c.index()] == t)
                    .count();
            // Only the first group matters for an exclusion.
            if end - start > 1 && (kind == TieKind::ElectionOrder || start == 0) {
                let group = &order[start..end];
                let resolved_at_round = self.records.iter().rev().find_map(|r| {
                    let first = &r.tallies[group[0].index()];
                    group.iter().any(|c| &r.tallies[c.index()] != first).then_some(r.round)
                });
                ties.push(TieBreakRecord {
                    kind,
                    order: group.to_vec(),
                    resolved_at_round,
                });
            }
            start = end;
        }
        (order, ties)
    }

    /// Records the round and elects every continuing candidate at or above
    /// the quota.
    fn finish_round(&mut self, action: RoundAction, mut tie_breaks: Vec<TieBreakRecord>) -> Result<()> {
        let reached: Vec<CandidateId> = self
            .continuing()
            .into_iter()
            .filter(|c| self.tallies[c.index()] >= self.quota)
            .collect();
        let mut events = Vec::new();
        if !reached.is_empty() {
            let (order, ties) = self.ranked(&reached, TieKind::ElectionOrder);
            tie_breaks.extend(ties);
            for c in order {
                if self.elected.len() == self.seats {
                    break;
                }
                self.status[c.index()] = Status::Elected;
                self.elected.push(c);
                self.pending.push_back(c);
                let tally = self.tallies[c.index()].clone();
                events.push(ElectionEvent {
                    candidate: c,
                    surplus: Tally(&tally - &self.quota),
                    tally: Tally(tally),
                    reason: ElectionReason::Quota,
                });
            }
        }
        let record = RoundRecord {
            round: self.records.len() as u32,
            action,
            tallies: self.tallies.iter().cloned().map(Tally).collect(),
            continuing: self.continuing(),
            elected: events,
            exhausted: Tally(self.exhausted.clone()),
            rounding_loss: Tally(self.loss.clone()),
            tie_breaks,
        };
        self.records.push(record);

        let sum = self.tallies.iter().fold(BigRational::zero(), |a, t| a + t) + &self.exhausted + &self.loss;
        if sum != BigRational::from_integer(BigInt::from(self.total)) {
            return Err(self.invariant(format!("votes not conserved: {} != {}", Tally(sum), self.total)));
        }
        if self.loss.is_negative() {
            return Err(self.invariant("negative rounding loss".into()));
        }
        Ok(())
    }

    fn invariant(&self, message: String) -> Error {
        let transcript = serde_json::to_string(&self.records).unwrap_or_default();
        Error::Invariant { message, transcript }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ballot::{Candidate, Group, GroupId};

    /// `n` ungrouped candidates named A, B, C, ...
    pub(crate) fn plain_meta(n: u32, seats: u32) -> ElectionMeta {
        let candidates = (0..n)
            .map(|i| Candidate {
                code: ((b'A' + i as u8) as char).to_string(),
                name: format!("Candidate {i}"),
                group: None,
                position: i + 1,
            })
            .collect();
        ElectionMeta::new("plain", seats, Vec::<Group>::new(), candidates).unwrap()
    }

    fn ballots(rows: &[(&[u32], u64)]) -> Vec<(Vec<CandidateId>, u64)> {
        rows.iter()
            .map(|(r, n)| (r.iter().map(|&c| CandidateId(c)).collect(), *n))
            .collect()
    }

    fn int(n: i64) -> Tally {
        Tally(BigRational::from_integer(BigInt::from(n)))
    }

    #[test]
    fn droop_quota_examples() {
        assert_eq!(droop_quota(100, 1), 51);
        assert_eq!(droop_quota(10, 2), 4);
        assert_eq!(droop_quota(339_159, 12), 26_090);
        assert_eq!(droop_quota(0, 1), 1);
    }

    #[test]
    fn majority_wins_in_first_round() {
        let meta = plain_meta(2, 1);
        let out = count_expanded(&ballots(&[(&[0], 60), (&[1], 40)]), &meta, &CountRules::default()).unwrap();
        assert_eq!(out.elected, vec![CandidateId(0)]);
        assert_eq!(out.transcript.quota, 51);
        assert_eq!(out.transcript.rounds.len(), 1);
        assert_eq!(out.transcript.rounds[0].elected[0].reason, ElectionReason::Quota);
    }

    #[test]
    fn surplus_then_quota_both_methods() {
        // 60 x [A, B], 40 x [C]; two seats, Q = 34. A's surplus of 26 moves
        // to B; C then reaches the quota.
        let meta = plain_meta(3, 2);
        let input = ballots(&[(&[0, 1], 60), (&[2], 40)]);
        for method in [
            SurplusMethod::WeightedInclusiveGregory,
            SurplusMethod::UnweightedInclusiveGregory,
        ] {
            for rounding in [TallyRounding::TruncateToInteger, TallyRounding::Exact] {
                let rules = CountRules {
                    surplus_method: method,
                    tally_rounding: rounding,
                    ..Default::default()
                };
                let out = count_expanded(&input, &meta, &rules).unwrap();
                let t = &out.transcript;
                assert_eq!(t.quota, 34);
                assert_eq!(out.elected, vec![CandidateId(0), CandidateId(2)]);
                assert_eq!(t.rounds[0].elected.len(), 2, "A and C both reach the quota at once");
                assert_eq!(t.rounds[0].elected[0].surplus, int(26));
                // C is elected before the surplus moves, so the count ends.
                assert_eq!(t.rounds.len(), 1);
            }
        }
    }

    #[test]
    fn surplus_flows_to_next_preference() {
        // 60 x [A, B], 20 x [C], 19 x [D]; two seats, Q = 34. A's surplus of
        // 26 gives B 26, then D (19) is excluded before C (20).
        let meta = plain_meta(4, 2);
        let input = ballots(&[(&[0, 1], 60), (&[2], 20), (&[3], 19)]);
        let out = count_expanded(&input, &meta, &CountRules::default()).unwrap();
        let t = &out.transcript;
        assert_eq!(t.quota, 34);
        match &t.rounds[1].action {
            RoundAction::Surplus {
                candidate,
                surplus,
                transfer_value,
            } => {
                assert_eq!(*candidate, CandidateId(0));
                assert_eq!(*surplus, int(26));
                assert_eq!(transfer_value.to_string(), "13/30");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(t.rounds[1].tallies[1], int(26));
        assert_eq!(t.rounds[1].tallies[0], int(34));
        assert!(matches!(
            t.rounds[2].action,
            RoundAction::Exclusion {
                candidate: CandidateId(3),
                ..
            }
        ));
        // D's ballots exhaust; B (26) and C (20) remain for one seat.
        assert_eq!(t.rounds[2].exhausted, int(19));
        assert_eq!(out.elected, vec![CandidateId(0), CandidateId(1)]);
        assert_eq!(t.final_round().elected[0].reason, ElectionReason::RemainingSeats);
    }

    #[test]
    fn exclusion_transfers_at_current_weight() {
        // A:40, B:35, C:25 with C's ballots going to B; Q = 51.
        let meta = plain_meta(3, 1);
        let input = ballots(&[(&[0], 40), (&[1], 35), (&[2, 1], 25)]);
        let out = count_expanded(&input, &meta, &CountRules::default()).unwrap();
        assert_eq!(out.transcript.quota, 51);
        assert!(matches!(
            out.transcript.rounds[1].action,
            RoundAction::Exclusion {
                candidate: CandidateId(2),
                ..
            }
        ));
        assert_eq!(out.transcript.rounds[1].tallies[1], int(60));
        assert_eq!(out.elected, vec![CandidateId(1)]);
    }

    #[test]
    fn truncation_loses_fractions_and_reports_them() {
        // Two seats, 100 ballots, Q = 34. A has 70: surplus 36 over 70
        // papers. 35 go on to B and 35 to C: each receives 18 exactly. With
        // a 3-way split of 70 papers (24/23/23) the shares are fractional.
        let meta = plain_meta(5, 2);
        let input = ballots(&[(&[0, 1], 24), (&[0, 2], 23), (&[0, 3], 23), (&[4], 30)]);
        let out = count_expanded(&input, &meta, &CountRules::default()).unwrap();
        let t = &out.transcript;
        // 36/70 * 24 = 12.34.., 36/70 * 23 = 11.83.. twice.
        assert_eq!(t.rounds[1].tallies[1], int(12));
        assert_eq!(t.rounds[1].tallies[2], int(11));
        assert_eq!(t.rounds[1].tallies[3], int(11));
        assert_eq!(t.rounds[1].rounding_loss, int(2));
        t.check_conservation().unwrap();

        let exact = count_expanded(&input, &meta, &CountRules::exact()).unwrap();
        assert_eq!(exact.transcript.rounds[1].tallies[1].to_string(), "432/35");
        assert!(exact.transcript.rounding_loss().0.is_zero());
        exact.transcript.check_conservation().unwrap();
    }

    #[test]
    fn exclusion_tie_uses_countback_then_index() {
        // B and C tie at 10 after D's exclusion, but C was ahead earlier.
        let meta = plain_meta(4, 1);
        let input = ballots(&[(&[0], 12), (&[1], 7), (&[3, 1], 3), (&[2], 10)]);
        let out = count_expanded(&input, &meta, &CountRules::default()).unwrap();
        let t = &out.transcript;
        // Round 1 excludes D (3). Round 2: B = 10, C = 10; countback to round
        // 0 where B had 7 < C 10, so B goes.
        assert!(matches!(
            t.rounds[1].action,
            RoundAction::Exclusion {
                candidate: CandidateId(3),
                ..
            }
        ));
        assert!(matches!(
            t.rounds[2].action,
            RoundAction::Exclusion {
                candidate: CandidateId(1),
                ..
            }
        ));
        assert_eq!(t.rounds[2].tie_breaks[0].resolved_at_round, Some(0));

        // A pure tie from the start falls back to the lower index.
        let meta = plain_meta(3, 1);
        let input = ballots(&[(&[0], 10), (&[1], 5), (&[2], 5)]);
        let out = count_expanded(&input, &meta, &CountRules::default()).unwrap();
        assert!(matches!(
            out.transcript.rounds[1].action,
            RoundAction::Exclusion {
                candidate: CandidateId(1),
                ..
            }
        ));
        assert_eq!(out.transcript.rounds[1].tie_breaks[0].resolved_at_round, None);
    }

    #[test]
    fn atl_ballots_count_for_group_members_in_order() {
        let meta = crate::ballot::fixtures::abc_meta();
        let prefs = vec![
            (Preferences::Atl(vec![GroupId(0), GroupId(2)]), 50),
            (Preferences::Btl(vec![CandidateId(3)]), 20),
            (Preferences::Btl(vec![CandidateId(5)]), 15),
        ];
        let out = count_stv(&prefs, &meta, &CountRules::default()).unwrap();
        // Q = 29; a1 holds 50 and passes 21 to a2.
        assert_eq!(out.transcript.quota, 29);
        assert_eq!(out.transcript.rounds[1].tallies[1], int(21));
        assert_eq!(out.elected[0], CandidateId(0));
        out.transcript.check_conservation().unwrap();
    }

    #[test]
    fn empty_input_is_an_error() {
        let meta = plain_meta(3, 1);
        assert!(matches!(
            count_expanded(&[], &meta, &CountRules::default()),
            Err(Error::NoBallots)
        ));
        assert!(count_expanded(&ballots(&[(&[0, 0], 1)]), &meta, &CountRules::default()).is_err());
        assert!(count_expanded(&ballots(&[(&[7], 1)]), &meta, &CountRules::default()).is_err());
    }

    #[test]
    fn final_two_margin_and_jsonl() {
        let meta = plain_meta(3, 1);
        let input = ballots(&[(&[0], 40), (&[1], 35), (&[2], 25)]);
        let out = count_expanded(&input, &meta, &CountRules::default()).unwrap();
        assert_eq!(out.transcript.final_two_margin(), Some(int(5)));
        let mut buf = Vec::new();
        out.transcript.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + out.transcript.rounds.len());
        assert!(text.lines().nth(1).unwrap().contains("\"initial_distribution\""));
    }
}
