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

//! Test-only helpers: random election generators and a brute-force
//! instant-runoff oracle written independently of the counting engine.

#![allow(dead_code)]

use ballot_noise::{Candidate, CandidateId, ElectionFile, ElectionMeta, Group, GroupId, Mark, MarkSheet};
use rand::seq::SliceRandom;
use rand::Rng;

/// `n` ungrouped candidates with codes A, B, C, ...
pub fn plain_meta(n: u32, seats: u32) -> ElectionMeta {
    let candidates = (0..n)
        .map(|i| Candidate {
            code: ((b'A' + i as u8) as char).to_string(),
            name: format!("Candidate {i}"),
            group: None,
            position: i + 1,
        })
        .collect();
    ElectionMeta::new("random", seats, Vec::<Group>::new(), candidates).unwrap()
}

/// Random partial rankings over `n` candidates with small multiplicities.
pub fn random_ballots<R: Rng>(rng: &mut R, n: u32, max_papers: u64) -> Vec<(Vec<CandidateId>, u64)> {
    let mut out = Vec::new();
    let mut papers = 0;
    let target = rng.random_range(1..=max_papers);
    while papers < target {
        let mut order: Vec<u32> = (0..n).collect();
        order.shuffle(rng);
        let len = rng.random_range(1..=n as usize);
        let mult = rng.random_range(1..=(target - papers).min(5));
        out.push((order[..len].iter().map(|&c| CandidateId(c)).collect(), mult));
        papers += mult;
    }
    out
}

/// Single-winner instant runoff: count first remaining preferences, elect a
/// candidate holding more than half of all ballots, otherwise drop the
/// weakest. Ties on the weakest are settled by looking back through earlier
/// rounds, most recent first, and finally by dropping the lowest index.
pub fn irv_winner(n: u32, ballots: &[(Vec<CandidateId>, u64)]) -> u32 {
    let total: u64 = ballots.iter().map(|(_, m)| m).sum();
    let majority = total / 2 + 1;
    let mut remaining: Vec<bool> = vec![true; n as usize];
    let mut history: Vec<Vec<u64>> = Vec::new();
    loop {
        let mut counts = vec![0u64; n as usize];
        for (ranking, mult) in ballots {
            if let Some(c) = ranking.iter().find(|c| remaining[c.0 as usize]) {
                counts[c.0 as usize] += mult;
            }
        }
        history.push(counts.clone());
        let alive: Vec<u32> = (0..n).filter(|&c| remaining[c as usize]).collect();
        if let Some(&w) = alive.iter().find(|&&c| counts[c as usize] >= majority) {
            return w;
        }
        if alive.len() == 1 {
            return alive[0];
        }
        let mut tied = alive;
        for round in history.iter().rev() {
            let low = tied.iter().map(|&c| round[c as usize]).min().unwrap();
            tied.retain(|&c| round[c as usize] == low);
            if tied.len() == 1 {
                break;
            }
        }
        remaining[tied[0] as usize] = false;
    }
}

fn btl_sheet(order: &[u32], copies: u64) -> MarkSheet {
    let marks = order
        .iter()
        .enumerate()
        .map(|(rank, &c)| (CandidateId(c), Mark::from_rank(rank as u32 + 1)))
        .collect();
    MarkSheet::new(vec![], marks, copies).unwrap()
}

fn atl_sheet(group: u32, copies: u64) -> MarkSheet {
    MarkSheet::new(vec![(GroupId(group), Mark::from_rank(1))], vec![], copies).unwrap()
}

/// One seat, two groups of three: A = {X, A2, A3} and B = {Y, B2, B3}.
///
/// X holds 4,800 first preferences (4,500 ATL, 300 BTL) and Y holds 4,830
/// (2,820 ATL, 2,010 six-preference BTL). With 9,630 ballots the quota is
/// 4,816, so Y is elected on first preferences. Losing about 5.3% of the
/// BTL ballots at a 1% digit error rate costs Y far more than the 30-vote
/// lead, while with one BTL preference required both styles lose about
/// 0.9% and Y stays ahead.
pub fn bias_fixture() -> ElectionFile {
    let groups = vec![
        Group {
            code: "A".into(),
            name: "Group A".into(),
        },
        Group {
            code: "B".into(),
            name: "Group B".into(),
        },
    ];
    let names = ["X", "A2", "A3", "Y", "B2", "B3"];
    let candidates = names
        .iter()
        .enumerate()
        .map(|(i, code)| Candidate {
            code: code.to_string(),
            name: format!("Candidate {code}"),
            group: Some(GroupId(i as u32 / 3)),
            position: i as u32 % 3 + 1,
        })
        .collect();
    let meta = ElectionMeta::new("bias fixture", 1, groups, candidates).unwrap();
    let sheets = vec![
        atl_sheet(0, 4500),
        btl_sheet(&[0, 1, 2, 3, 4, 5], 300),
        atl_sheet(1, 2820),
        btl_sheet(&[3, 4, 5, 0, 1, 2], 2010),
    ];
    ElectionFile::new(meta, sheets, "synthetic").unwrap()
}

/// Ungrouped candidates C01, C02, ... and BTL ballots numbered 1..len for
/// each `(len, copies)` pair, each ballot starting at a different candidate.
pub fn ranking_fixture(candidates: u32, ballots: &[(u32, u64)]) -> ElectionFile {
    let list = (0..candidates)
        .map(|i| Candidate {
            code: format!("C{:02}", i + 1),
            name: format!("Candidate {}", i + 1),
            group: None,
            position: i + 1,
        })
        .collect();
    let meta = ElectionMeta::new("ranking fixture", 1, Vec::<Group>::new(), list).unwrap();
    let sheets = ballots
        .iter()
        .enumerate()
        .map(|(k, &(len, copies))| {
            let order: Vec<u32> = (0..len).map(|r| (r + k as u32) % candidates).collect();
            btl_sheet(&order, copies)
        })
        .collect();
    ElectionFile::new(meta, sheets, "synthetic").unwrap()
}
