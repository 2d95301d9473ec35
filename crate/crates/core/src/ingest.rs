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

//! Ingestion of published preference CSV files.
//!
//! Each row carries one ballot paper as a comma-separated preference string
//! whose i-th token is the mark in the i-th box: ATL boxes in group order,
//! then BTL boxes in candidate order.

use crate::ballot::{CandidateId, ElectionMeta, GroupId, Mark, MarkSheet};
use crate::error::{Error, Result};
use crate::format::ElectionFile;
use indexmap::IndexMap;
use serde::Serialize;
use std::io::Read;

/// Where to find the preference string in each CSV record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl std::str::FromStr for ColumnRef {
    type Err = std::convert::Infallible;

    /// Plain non-negative integers are 0-based indices; anything else is a
    /// header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        })
    }
}

#[derive(Clone, Debug)]
pub struct ColumnMap {
    pub preferences: ColumnRef,
    /// Whether the first record is a header row.
    pub has_headers: bool,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            preferences: ColumnRef::Name("Preferences".into()),
            has_headers: true,
        }
    }
}

/// A data row that was rejected.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RowError {
    /// 1-based index among data records (the header is not counted).
    pub row: u64,
    /// 1-based physical line in the input.
    pub line: u64,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    pub rows_read: u64,
    pub rows_accepted: u64,
    pub errors: Vec<RowError>,
}

impl ParseReport {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "line", "reason"])?;
        for e in &self.errors {
            w.write_record([e.row.to_string(), e.line.to_string(), e.reason.clone()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads one token of a preference string. Ticks and crosses count as a 1;
/// other non-numeric content leaves the box unmarked.
fn read_token(token: &str) -> Option<Mark> {
    match token.trim() {
        "/" | "*" => Mark::parse("1"),
        t => Mark::parse(t),
    }
}

/// Parses a preference CSV into an [`ElectionFile`], merging identical sheets
/// (first-seen order). Rows with the wrong number of tokens are reported and
/// skipped; an unreadable stream is a hard error.
pub fn parse_preference_csv<R: Read>(
    input: R,
    meta: &ElectionMeta,
    columns: &ColumnMap,
) -> Result<(ElectionFile, ParseReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(columns.has_headers)
        .flexible(true)
        .from_reader(input);
    let col = match &columns.preferences {
        ColumnRef::Index(i) => *i,
        ColumnRef::Name(name) => {
            if !columns.has_headers {
                return Err(Error::Config(format!(
                    "column {name:?} given by name but the input has no header row"
                )));
            }
            reader
                .headers()?
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Config(format!("no column named {name:?}")))?
        }
    };

    let n_atl = meta.num_groups();
    let n_boxes = n_atl + meta.num_candidates();
    let mut report = ParseReport::default();
    let mut merged: IndexMap<MarkSheet, u64> = IndexMap::new();
    let mut record = csv::StringRecord::new();
    let mut row = 0u64;
    loop {
        let line = reader.position().line() + 1;
        if !reader.read_record(&mut record)? {
            break;
        }
        row += 1;
        report.rows_read += 1;
        let line = record.position().map_or(line, |p| p.line());
        let Some(field) = record.get(col) else {
            report.errors.push(RowError {
                row,
                line,
                reason: format!("record has no column {col}"),
            });
            continue;
        };
        // Published files follow the header with a row of dashes.
        if field.starts_with("---") {
            report.rows_read -= 1;
            row -= 1;
            continue;
        }
        let tokens: Vec<&str> = field.split(',').collect();
        if tokens.len() != n_boxes {
            report.errors.push(RowError {
                row,
                line,
                reason: format!("expected {n_boxes} preference tokens, found {}", tokens.len()),
            });
            continue;
        }
        let mut atl = Vec::new();
        let mut btl = Vec::new();
        for (i, tok) in tokens.iter().enumerate() {
            if let Some(mark) = read_token(tok) {
                if i < n_atl {
                    atl.push((GroupId(i as u32), mark));
                } else {
                    btl.push((CandidateId((i - n_atl) as u32), mark));
                }
            }
        }
        let sheet = MarkSheet::new(atl, btl, 1)?;
        *merged.entry(sheet).or_insert(0) += 1;
        report.rows_accepted += 1;
    }

    let sheets = merged
        .into_iter()
        .map(|(sheet, n)| sheet.with_multiplicity(n))
        .collect();
    let file = ElectionFile::new(
        meta.clone(),
        sheets,
        format!("{} preference rows", report.rows_accepted),
    )?;
    Ok((file, report))
}
