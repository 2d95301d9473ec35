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

//! Election meta files.
//!
//! ```toml
//! name = "Example"
//! seats = 2
//!
//! [[groups]]
//! code = "A"
//! name = "Party A"
//!
//! [[candidates]]
//! code = "a1"
//! name = "SMITH, Jo"
//! group = "A"        # omit for ungrouped candidates
//! ```
//!
//! Candidates take their ballot positions from the order they are listed
//! in, within their group.

use crate::usage;
use anyhow::Context;
use ballot_noise::{Candidate, ElectionMeta, Group, GroupId};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaFile {
    name: String,
    seats: u32,
    #[serde(default)]
    groups: Vec<GroupEntry>,
    candidates: Vec<CandidateEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupEntry {
    code: String,
    name: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidateEntry {
    code: String,
    name: String,
    group: Option<String>,
}

pub fn parse_meta(text: &str) -> anyhow::Result<ElectionMeta> {
    let file: MetaFile = toml::from_str(text).map_err(|e| ballot_noise::Error::InvalidMeta(e.to_string()))?;
    let groups: Vec<Group> = file
        .groups
        .into_iter()
        .map(|g| Group {
            code: g.code,
            name: g.name,
        })
        .collect();
    let mut next_position: BTreeMap<Option<u32>, u32> = BTreeMap::new();
    let mut candidates = Vec::new();
    for c in file.candidates {
        let group = match &c.group {
            Some(code) => Some(
                groups
                    .iter()
                    .position(|g| &g.code == code)
                    .map(|i| GroupId(i as u32))
                    .ok_or_else(|| {
                        ballot_noise::Error::InvalidMeta(format!("candidate {}: unknown group {code}", c.code))
                    })?,
            ),
            None => None,
        };
        let slot = next_position.entry(group.map(|g| g.0)).or_insert(0);
        *slot += 1;
        candidates.push(Candidate {
            code: c.code,
            name: c.name,
            group,
            position: *slot,
        });
    }
    Ok(ElectionMeta::new(file.name, file.seats, groups, candidates)?)
}

pub fn read_meta(path: &Path) -> anyhow::Result<ElectionMeta> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_meta(&text).with_context(|| format!("in {}", path.display()))
}

/// `meta` with a different seat count; an impossible count is a usage error.
pub fn with_seats(meta: &ElectionMeta, seats: u32) -> anyhow::Result<ElectionMeta> {
    ElectionMeta::new(meta.name(), seats, meta.groups().to_vec(), meta.candidates().to_vec())
        .map_err(|e| usage(format!("--seats {seats}: {e}")))
}
