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

//! Elections, ballot marks, and the rules that turn raw marks into countable
//! preference lists.
//!
//! Boxes are identified by index: [`GroupId`] indexes the above-the-line
//! boxes (one per group, in ballot-paper order) and [`CandidateId`] indexes
//! the below-the-line boxes (one per candidate, in ballot-paper order).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use std::fmt;

/// Index of a group (party or ticket) and of its above-the-line box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupId(pub u32);

/// Index of a candidate and of their below-the-line box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CandidateId(pub u32);

impl GroupId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl CandidateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    /// Short identifier, e.g. the ballot-paper column letter.
    pub code: String,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    /// Short unique identifier.
    pub code: String,
    pub name: String,
    /// `None` for ungrouped candidates, who have no above-the-line box.
    pub group: Option<GroupId>,
    /// 1-based position within the group (or within the ungrouped block).
    pub position: u32,
}

/// Static description of an election: seats, groups and candidates in
/// ballot-paper order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ElectionMeta {
    name: String,
    seats: u32,
    groups: Vec<Group>,
    candidates: Vec<Candidate>,
    /// Candidates of each group, ordered by position.
    members: Vec<Vec<CandidateId>>,
}

impl ElectionMeta {
    /// Builds and validates election metadata.
    pub fn new(name: impl Into<String>, seats: u32, groups: Vec<Group>, candidates: Vec<Candidate>) -> Result<Self> {
        let name = name.into();
        if seats == 0 {
            return Err(Error::InvalidMeta("seats must be at least 1".into()));
        }
        if seats as usize >= candidates.len() {
            return Err(Error::InvalidMeta(format!(
                "{} seats need more than {} candidates",
                seats,
                candidates.len()
            )));
        }
        if candidates.len() > u32::MAX as usize || groups.len() > u32::MAX as usize {
            return Err(Error::InvalidMeta("too many boxes".into()));
        }
        check_unique_codes(groups.iter().map(|g| g.code.as_str()), "group")?;
        check_unique_codes(candidates.iter().map(|c| c.code.as_str()), "candidate")?;

        let mut members: Vec<Vec<CandidateId>> = vec![Vec::new(); groups.len()];
        let mut ungrouped: Vec<CandidateId> = Vec::new();
        for (i, c) in candidates.iter().enumerate() {
            let id = CandidateId(i as u32);
            match c.group {
                Some(g) if g.index() < groups.len() => members[g.index()].push(id),
                Some(g) => {
                    return Err(Error::InvalidMeta(format!(
                        "candidate {} refers to unknown group index {}",
                        c.code, g.0
                    )))
                }
                None => ungrouped.push(id),
            }
        }
        let by_position = |list: &mut Vec<CandidateId>, label: &str| -> Result<()> {
            list.sort_by_key(|c| candidates[c.index()].position);
            for (expected, c) in (1u32..).zip(list.iter()) {
                let got = candidates[c.index()].position;
                if got != expected {
                    return Err(Error::InvalidMeta(format!(
                        "positions in {label} must run 1..{} without gaps or repeats (found {got} where {expected} was expected)",
                        list.len()
                    )));
                }
            }
            Ok(())
        };
        for (g, list) in members.iter_mut().enumerate() {
            by_position(list, &format!("group {}", groups[g].code))?;
        }
        by_position(&mut ungrouped, "the ungrouped block")?;

        Ok(ElectionMeta {
            name,
            seats,
            groups,
            candidates,
            members,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn seats(&self) -> u32 {
        self.seats
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_candidates(&self) -> usize {
        self.candidates.len()
    }

    pub fn group(&self, id: GroupId) -> Option<&Group> {
        self.groups.get(id.index())
    }

    pub fn candidate(&self, id: CandidateId) -> Option<&Candidate> {
        self.candidates.get(id.index())
    }

    /// Candidates of `group`, in position order.
    pub fn members(&self, group: GroupId) -> Option<&[CandidateId]> {
        self.members.get(group.index()).map(Vec::as_slice)
    }

    pub fn group_by_code(&self, code: &str) -> Option<GroupId> {
        self.groups
            .iter()
            .position(|g| g.code == code)
            .map(|i| GroupId(i as u32))
    }

    pub fn candidate_by_code(&self, code: &str) -> Option<CandidateId> {
        self.candidates
            .iter()
            .position(|c| c.code == code)
            .map(|i| CandidateId(i as u32))
    }

    /// Looks a candidate up by code, falling back to a case-insensitive match
    /// on the name (or on its surname, the part before the first comma).
    pub fn find_candidate(&self, key: &str) -> Option<CandidateId> {
        if let Some(id) = self.candidate_by_code(key) {
            return Some(id);
        }
        let key = key.to_lowercase();
        let hits: Vec<usize> = self
            .candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| {
                let name = c.name.to_lowercase();
                name == key || name.split(',').next().map(str::trim) == Some(key.as_str())
            })
            .map(|(i, _)| i)
            .collect();
        match hits.as_slice() {
            [i] => Some(CandidateId(*i as u32)),
            _ => None,
        }
    }
}

fn check_unique_codes<'a>(codes: impl Iterator<Item = &'a str>, what: &str) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for code in codes {
        if code.is_empty() || code == "-" {
            return Err(Error::InvalidMeta(format!("{what} code {code:?} is reserved")));
        }
        if code.chars().any(|ch| ch.is_whitespace() || ch == '=') {
            return Err(Error::InvalidMeta(format!(
                "{what} code {code:?} may not contain whitespace or '='"
            )));
        }
        if !seen.insert(code) {
            return Err(Error::InvalidMeta(format!("duplicate {what} code {code:?}")));
        }
    }
    Ok(())
}

/// A numeral written in a box: a non-empty string of decimal digits.
///
/// The string is kept verbatim (including leading zeros) because the error
/// models operate on individual digits.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mark(SmallVec<[u8; 6]>);

impl Mark {
    /// Parses a digit string. Returns `None` for anything that is not a
    /// non-empty run of ASCII digits.
    pub fn parse(s: &str) -> Option<Mark> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        Some(Mark(SmallVec::from_slice(s.as_bytes())))
    }

    /// The decimal rendering of `rank`.
    pub fn from_rank(rank: u32) -> Mark {
        let mut buf = itoa_u32(rank);
        Mark(buf.drain(..).collect())
    }

    pub fn as_str(&self) -> &str {
        // Only ever constructed from ASCII digits.
        std::str::from_utf8(&self.0).expect("marks are ASCII digits")
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub(crate) fn digits_mut(&mut self) -> &mut [u8] {
        &mut self.0
    }

    pub fn num_digits(&self) -> usize {
        self.0.len()
    }

    /// Numeric value with leading zeros ignored; saturates instead of
    /// overflowing. A value of 0 means the box counts as unmarked.
    pub fn value(&self) -> u64 {
        self.0.iter().fold(0u64, |acc, &d| {
            acc.saturating_mul(10).saturating_add(u64::from(d - b'0'))
        })
    }
}

fn itoa_u32(mut n: u32) -> SmallVec<[u8; 10]> {
    let mut out: SmallVec<[u8; 10]> = SmallVec::new();
    loop {
        out.push(b'0' + (n % 10) as u8);
        n /= 10;
        if n == 0 {
            break;
        }
    }
    out.reverse();
    out
}

impl fmt::Debug for Mark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.as_str())
    }
}

impl fmt::Display for Mark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The raw marks of one ballot paper (or of `multiplicity` identical ones).
///
/// Both sides are sparse and sorted by box index; a box that is absent is
/// unmarked.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MarkSheet {
    atl: Vec<(GroupId, Mark)>,
    btl: Vec<(CandidateId, Mark)>,
    multiplicity: u64,
}

impl MarkSheet {
    /// Builds a sheet, sorting the marks by box. Fails on a repeated box or a
    /// zero multiplicity.
    pub fn new(mut atl: Vec<(GroupId, Mark)>, mut btl: Vec<(CandidateId, Mark)>, multiplicity: u64) -> Result<Self> {
        if multiplicity == 0 {
            return Err(Error::DataIntegrity("sheet multiplicity must be at least 1".into()));
        }
        atl.sort_by_key(|(g, _)| *g);
        btl.sort_by_key(|(c, _)| *c);
        if atl.windows(2).any(|w| w[0].0 == w[1].0) || btl.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::DataIntegrity("box marked twice on one sheet".into()));
        }
        Ok(MarkSheet { atl, btl, multiplicity })
    }

    pub fn atl(&self) -> &[(GroupId, Mark)] {
        &self.atl
    }

    pub fn btl(&self) -> &[(CandidateId, Mark)] {
        &self.btl
    }

    pub fn multiplicity(&self) -> u64 {
        self.multiplicity
    }

    pub fn with_multiplicity(mut self, multiplicity: u64) -> Self {
        assert!(multiplicity >= 1);
        self.multiplicity = multiplicity;
        self
    }

    /// Total number of digits written on the sheet.
    pub fn num_digits(&self) -> usize {
        self.atl.iter().map(|(_, m)| m.num_digits()).sum::<usize>()
            + self.btl.iter().map(|(_, m)| m.num_digits()).sum::<usize>()
    }

    pub(crate) fn marks_mut(&mut self) -> impl Iterator<Item = &mut Mark> {
        self.atl
            .iter_mut()
            .map(|(_, m)| m)
            .chain(self.btl.iter_mut().map(|(_, m)| m))
    }

    /// Checks every box against `meta`.
    pub fn validate(&self, meta: &ElectionMeta) -> Result<()> {
        if let Some((g, _)) = self.atl.iter().find(|(g, _)| g.index() >= meta.num_groups()) {
            return Err(Error::DataIntegrity(format!("unknown group index {}", g.0)));
        }
        if let Some((c, _)) = self.btl.iter().find(|(c, _)| c.index() >= meta.num_candidates()) {
            return Err(Error::DataIntegrity(format!("unknown candidate index {}", c.0)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Style {
    #[serde(rename = "ATL")]
    Atl,
    #[serde(rename = "BTL")]
    Btl,
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Style::Atl => "ATL",
            Style::Btl => "BTL",
        })
    }
}

/// A canonical, strictly ranked preference list of one style.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Preferences {
    Atl(Vec<GroupId>),
    Btl(Vec<CandidateId>),
}

impl Preferences {
    pub fn style(&self) -> Style {
        match self {
            Preferences::Atl(_) => Style::Atl,
            Preferences::Btl(_) => Style::Btl,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Preferences::Atl(r) => r.len(),
            Preferences::Btl(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Box indices in rank order, regardless of style.
    pub fn boxes(&self) -> impl Iterator<Item = u32> + '_ {
        let (a, b) = match self {
            Preferences::Atl(r) => (Some(r.iter().map(|g| g.0)), None),
            Preferences::Btl(r) => (None, Some(r.iter().map(|c| c.0))),
        };
        a.into_iter().flatten().chain(b.into_iter().flatten())
    }

    /// Keeps the first `len` preferences.
    pub fn truncated(&self, len: usize) -> Preferences {
        match self {
            Preferences::Atl(r) => Preferences::Atl(r[..len.min(r.len())].to_vec()),
            Preferences::Btl(r) => Preferences::Btl(r[..len.min(r.len())].to_vec()),
        }
    }

    /// Writes ranks 1..k into the ranked boxes; every other box is unmarked.
    pub fn to_mark_sheet(&self, multiplicity: u64) -> MarkSheet {
        let mut atl = Vec::new();
        let mut btl = Vec::new();
        match self {
            Preferences::Atl(r) => atl = (1u32..).zip(r).map(|(k, g)| (*g, Mark::from_rank(k))).collect(),
            Preferences::Btl(r) => btl = (1u32..).zip(r).map(|(k, c)| (*c, Mark::from_rank(k))).collect(),
        }
        MarkSheet::new(atl, btl, multiplicity).expect("canonical preferences have distinct boxes")
    }

    /// Checks that every box exists and none repeats.
    pub fn validate(&self, meta: &ElectionMeta) -> Result<()> {
        let limit = match self {
            Preferences::Atl(_) => meta.num_groups(),
            Preferences::Btl(_) => meta.num_candidates(),
        };
        let mut seen = vec![false; limit];
        for b in self.boxes() {
            let i = b as usize;
            if i >= limit {
                return Err(Error::DataIntegrity(format!(
                    "{} preference refers to unknown box {}",
                    self.style(),
                    b
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::DataIntegrity(format!("box {b} ranked twice")));
            }
        }
        Ok(())
    }
}

/// Minimum preference counts that make a ballot formal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormalityRules {
    pub btl_required_prefs: u32,
    pub atl_required_prefs: u32,
    /// When both sections are formal, count the BTL one.
    pub btl_takes_precedence: bool,
}

impl Default for FormalityRules {
    fn default() -> Self {
        FormalityRules {
            btl_required_prefs: 6,
            atl_required_prefs: 1,
            btl_takes_precedence: true,
        }
    }
}

impl FormalityRules {
    pub const MAX_BTL_REQUIRED: u32 = 9;

    /// Default rules with a different BTL threshold.
    pub fn with_btl_required(btl_required_prefs: u32) -> Result<Self> {
        let rules = FormalityRules {
            btl_required_prefs,
            ..Default::default()
        };
        rules.validate()?;
        Ok(rules)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=Self::MAX_BTL_REQUIRED).contains(&self.btl_required_prefs) {
            return Err(Error::Config(format!(
                "BTL required preferences must be in 1..={}, got {}",
                Self::MAX_BTL_REQUIRED,
                self.btl_required_prefs
            )));
        }
        if self.atl_required_prefs == 0 {
            return Err(Error::Config("ATL required preferences must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of applying the formality rules to a sheet.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formality {
    Formal(Preferences),
    Informal,
}

impl Formality {
    pub fn is_formal(&self) -> bool {
        matches!(self, Formality::Formal(_))
    }

    pub fn preferences(&self) -> Option<&Preferences> {
        match self {
            Formality::Formal(p) => Some(p),
            Formality::Informal => None,
        }
    }
}

/// Reads the canonical ranking off a set of `(box, value)` marks.
///
/// Starting from 1, the box holding each successive number is appended until
/// a number is found on no box or on more than one box; that number and
/// everything after it is disregarded. Values of 0 are unmarked.
pub fn interpret_marks<B: Copy>(marks: impl IntoIterator<Item = (B, u64)>) -> Vec<B> {
    let mut by_value: SmallVec<[(u64, B); 16]> =
        marks.into_iter().filter(|(_, v)| *v > 0).map(|(b, v)| (v, b)).collect();
    by_value.sort_unstable_by_key(|(v, _)| *v);
    let mut out = Vec::new();
    let mut i = 0;
    let mut want = 1u64;
    while i < by_value.len() && by_value[i].0 == want {
        if i + 1 < by_value.len() && by_value[i + 1].0 == want {
            break;
        }
        out.push(by_value[i].1);
        i += 1;
        want += 1;
    }
    out
}

/// Interprets the ATL and BTL sections of `sheet` and decides which (if any)
/// is counted.
pub fn classify_formality(sheet: &MarkSheet, rules: &FormalityRules) -> Formality {
    let btl = interpret_marks(sheet.btl().iter().map(|(c, m)| (*c, m.value())));
    let atl = interpret_marks(sheet.atl().iter().map(|(g, m)| (*g, m.value())));
    let btl_ok = btl.len() >= rules.btl_required_prefs as usize;
    let atl_ok = atl.len() >= rules.atl_required_prefs as usize;
    match (btl_ok, atl_ok) {
        (true, false) => Formality::Formal(Preferences::Btl(btl)),
        (false, true) => Formality::Formal(Preferences::Atl(atl)),
        (true, true) if rules.btl_takes_precedence => Formality::Formal(Preferences::Btl(btl)),
        (true, true) => Formality::Formal(Preferences::Atl(atl)),
        (false, false) => Formality::Informal,
    }
}

/// The candidate order a ballot is counted in. An ATL ranking expands to each
/// ranked group's candidates in position order.
pub fn expand_to_candidates(prefs: &Preferences, meta: &ElectionMeta) -> Result<Vec<CandidateId>> {
    match prefs {
        Preferences::Btl(r) => {
            if let Some(c) = r.iter().find(|c| c.index() >= meta.num_candidates()) {
                return Err(Error::DataIntegrity(format!("unknown candidate index {}", c.0)));
            }
            Ok(r.clone())
        }
        Preferences::Atl(r) => {
            let mut out = Vec::new();
            for g in r {
                let members = meta
                    .members(*g)
                    .ok_or_else(|| Error::DataIntegrity(format!("unknown group index {}", g.0)))?;
                out.extend_from_slice(members);
            }
            Ok(out)
        }
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    fn btl_sheet(ranks: &[(u32, u32)]) -> MarkSheet {
        let btl = ranks
            .iter()
            .map(|(c, r)| (CandidateId(*c), Mark::from_rank(*r)))
            .collect();
        MarkSheet::new(vec![], btl, 1).unwrap()
    }

    #[test]
    fn interpret_permutation() {
        assert_eq!(
            interpret_marks([("b1", 2), ("b2", 1), ("b3", 3)]),
            vec!["b2", "b1", "b3"]
        );
    }

    #[test]
    fn interpret_missing_number_truncates() {
        assert_eq!(interpret_marks([("b1", 1), ("b2", 3), ("b3", 3)]), vec!["b1"]);
    }

    #[test]
    fn interpret_repeated_number_truncates() {
        assert_eq!(
            interpret_marks([("b1", 1), ("b2", 2), ("b3", 2), ("b4", 4)]),
            vec!["b1"]
        );
    }

    #[test]
    fn interpret_zero_is_unmarked_and_may_be_empty() {
        assert_eq!(interpret_marks([("b1", 0), ("b2", 1)]), vec!["b2"]);
        assert!(interpret_marks([("b1", 2)]).is_empty());
        assert!(interpret_marks::<u8>([]).is_empty());
    }

    #[test]
    fn mark_values_ignore_leading_zeros() {
        assert_eq!(Mark::parse("07").unwrap().value(), 7);
        assert_eq!(Mark::parse("00").unwrap().value(), 0);
        assert_eq!(Mark::parse("07").unwrap().as_str(), "07");
        assert!(Mark::parse("").is_none());
        assert!(Mark::parse("1a").is_none());
        assert_eq!(Mark::from_rank(120).as_str(), "120");
        assert_eq!(Mark::parse("99999999999999999999999").unwrap().value(), u64::MAX);
    }

    #[test]
    fn formal_btl_with_six_preferences() {
        let sheet = btl_sheet(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6)]);
        match classify_formality(&sheet, &FormalityRules::default()) {
            Formality::Formal(Preferences::Btl(r)) => assert_eq!(r.len(), 6),
            other => panic!("expected formal BTL, got {other:?}"),
        }
    }

    #[test]
    fn short_btl_falls_back_to_atl() {
        let btl = marks(&[
            (CandidateId(0), 1),
            (CandidateId(1), 2),
            (CandidateId(2), 3),
            (CandidateId(3), 4),
            (CandidateId(4), 5),
        ]);
        let sheet = MarkSheet::new(vec![(GroupId(1), Mark::from_rank(1))], btl, 1).unwrap();
        assert_eq!(
            classify_formality(&sheet, &FormalityRules::default()),
            Formality::Formal(Preferences::Atl(vec![GroupId(1)]))
        );
    }

    #[test]
    fn short_btl_without_atl_is_informal() {
        let sheet = btl_sheet(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]);
        assert_eq!(
            classify_formality(&sheet, &FormalityRules::default()),
            Formality::Informal
        );
    }

    #[test]
    fn duplicate_atl_first_preference_is_informal() {
        let atl = marks(&[(GroupId(0), 1), (GroupId(2), 1)]);
        let sheet = MarkSheet::new(atl, vec![], 1).unwrap();
        assert_eq!(
            classify_formality(&sheet, &FormalityRules::default()),
            Formality::Informal
        );
    }

    #[test]
    fn precedence_flag_prefers_atl_when_cleared() {
        let btl = marks(&[(CandidateId(3), 1)]);
        let atl = marks(&[(GroupId(0), 1)]);
        let sheet = MarkSheet::new(atl, btl, 1).unwrap();
        let mut rules = FormalityRules::with_btl_required(1).unwrap();
        assert_eq!(
            classify_formality(&sheet, &rules),
            Formality::Formal(Preferences::Btl(vec![CandidateId(3)]))
        );
        rules.btl_takes_precedence = false;
        assert_eq!(
            classify_formality(&sheet, &rules),
            Formality::Formal(Preferences::Atl(vec![GroupId(0)]))
        );
    }

    #[test]
    fn expand_atl_walks_groups_in_rank_order() {
        let meta = abc_meta();
        let got = expand_to_candidates(&Preferences::Atl(vec![GroupId(0), GroupId(2)]), &meta).unwrap();
        let codes: Vec<_> = got.iter().map(|c| meta.candidate(*c).unwrap().code.as_str()).collect();
        assert_eq!(codes, ["a1", "a2", "a3", "c1", "c2"]);

        let got = expand_to_candidates(&Preferences::Atl(vec![GroupId(2)]), &meta).unwrap();
        assert_eq!(got, vec![CandidateId(5), CandidateId(6)]);
    }

    #[test]
    fn expand_btl_is_identity() {
        let meta = abc_meta();
        let prefs = Preferences::Btl(vec![CandidateId(4), CandidateId(3)]);
        assert_eq!(
            expand_to_candidates(&prefs, &meta).unwrap(),
            vec![CandidateId(4), CandidateId(3)]
        );
    }

    #[test]
    fn expand_rejects_unknown_boxes() {
        let meta = abc_meta();
        assert!(expand_to_candidates(&Preferences::Atl(vec![GroupId(9)]), &meta).is_err());
        assert!(expand_to_candidates(&Preferences::Btl(vec![CandidateId(7)]), &meta).is_err());
    }

    #[test]
    fn meta_rejects_position_gaps_and_too_few_candidates() {
        let groups = vec![Group {
            code: "A".into(),
            name: "A".into(),
        }];
        let cand = |code: &str, pos| Candidate {
            code: code.into(),
            name: code.into(),
            group: Some(GroupId(0)),
            position: pos,
        };
        assert!(ElectionMeta::new("x", 1, groups.clone(), vec![cand("a", 1), cand("b", 3)]).is_err());
        assert!(ElectionMeta::new("x", 2, groups.clone(), vec![cand("a", 1), cand("b", 2)]).is_err());
        assert!(ElectionMeta::new("x", 0, groups.clone(), vec![cand("a", 1), cand("b", 2)]).is_err());
        assert!(ElectionMeta::new("x", 1, groups.clone(), vec![cand("a", 1), cand("a", 2)]).is_err());
        let mut ug = cand("u", 1);
        ug.group = None;
        assert!(ElectionMeta::new("x", 1, groups, vec![cand("a", 1), ug]).is_ok());
    }

    #[test]
    fn find_candidate_by_surname() {
        let groups = vec![Group {
            code: "A".into(),
            name: "A".into(),
        }];
        let candidates = vec![
            Candidate {
                code: "1".into(),
                name: "McKIM, Nick".into(),
                group: Some(GroupId(0)),
                position: 1,
            },
            Candidate {
                code: "2".into(),
                name: "SMITH, Jo".into(),
                group: Some(GroupId(0)),
                position: 2,
            },
        ];
        let meta = ElectionMeta::new("x", 1, groups, candidates).unwrap();
        assert_eq!(meta.find_candidate("mckim"), Some(CandidateId(0)));
        assert_eq!(meta.find_candidate("2"), Some(CandidateId(1)));
        assert_eq!(meta.find_candidate("nobody"), None);
    }

    fn arb_marks() -> impl Strategy<Value = Vec<(u32, u64)>> {
        prop::collection::vec(0u64..12, 0..10)
            .prop_map(|vals| vals.into_iter().enumerate().map(|(i, v)| (i as u32, v)).collect())
    }

    fn arb_sheet() -> impl Strategy<Value = MarkSheet> {
        (
            prop::collection::vec(prop::option::of(0u32..12), 7),
            prop::collection::vec(prop::option::of(0u32..12), 3),
        )
            .prop_map(|(btl, atl)| {
                let btl = btl
                    .into_iter()
                    .enumerate()
                    .filter_map(|(i, v)| v.map(|v| (CandidateId(i as u32), Mark::from_rank(v))))
                    .collect();
                let atl = atl
                    .into_iter()
                    .enumerate()
                    .filter_map(|(i, v)| v.map(|v| (GroupId(i as u32), Mark::from_rank(v))))
                    .collect();
                MarkSheet::new(atl, btl, 1).unwrap()
            })
    }

    proptest! {
        #[test]
        fn interpret_is_idempotent_on_its_own_output(marks in arb_marks()) {
            let ranking = interpret_marks(marks);
            let rewritten: Vec<(u32, u64)> = ranking.iter().enumerate().map(|(k, b)| (*b, k as u64 + 1)).collect();
            prop_assert_eq!(interpret_marks(rewritten), ranking);
        }

        #[test]
        fn btl_formality_is_monotone_in_threshold(sheet in arb_sheet(), r in 1u32..=9) {
            let rules = FormalityRules::with_btl_required(r).unwrap();
            if let Formality::Formal(Preferences::Btl(_)) = classify_formality(&sheet, &rules) {
                for lower in 1..=r {
                    let rules = FormalityRules::with_btl_required(lower).unwrap();
                    let got = classify_formality(&sheet, &rules);
                    prop_assert!(matches!(got, Formality::Formal(Preferences::Btl(_))));
                }
            }
        }

        #[test]
        fn classification_matches_thresholds(sheet in arb_sheet()) {
            let rules = FormalityRules::default();
            let btl_len = interpret_marks(sheet.btl().iter().map(|(c, m)| (*c, m.value()))).len();
            let atl_len = interpret_marks(sheet.atl().iter().map(|(g, m)| (*g, m.value()))).len();
            let got = classify_formality(&sheet, &rules);
            match got {
                Formality::Formal(Preferences::Btl(_)) => prop_assert!(btl_len >= 6),
                Formality::Formal(Preferences::Atl(_)) => prop_assert!(btl_len < 6 && atl_len >= 1),
                Formality::Informal => prop_assert!(btl_len < 6 && atl_len == 0),
            }
        }

        #[test]
        fn expansion_never_repeats_a_candidate(order in Just(vec![0u32, 1, 2]).prop_shuffle(), k in 1usize..=3) {
            let meta = abc_meta();
            let prefs = Preferences::Atl(order[..k].iter().map(|g| GroupId(*g)).collect());
            let out = expand_to_candidates(&prefs, &meta).unwrap();
            let mut sorted = out.clone();
            sorted.sort();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), out.len());
        }
    }
}
