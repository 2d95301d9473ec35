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

//! The canonical election file: a versioned, line-oriented text document.
//!
//! ```text
//! ballot-noise-election 1
//! name<TAB>Tasmania 2016
//! seats<TAB>12
//! provenance<TAB>free text
//! groups<TAB>2
//! A<TAB>Party A
//! B<TAB>Party B
//! candidates<TAB>3
//! a1<TAB>A<TAB>1<TAB>SMITH, Ann
//! a2<TAB>A<TAB>2<TAB>JONES, Bob
//! u1<TAB>-<TAB>1<TAB>BROWN, Cy
//! sheets<TAB>2
//! 40<TAB>A=1 B=2<TAB>
//! 3<TAB><TAB>a2=1 a1=2 u1=3
//! ```
//!
//! Every line is a tab-separated record. Free-text fields escape `\`, tab,
//! newline and carriage return as `\\`, `\t`, `\n` and `\r`. A candidate's
//! group is `-` when ungrouped. Each sheet line carries the multiplicity, then
//! the ATL marks and the BTL marks as space-separated `code=digits` pairs (an
//! empty field means no marks in that section). Marks are kept verbatim, so
//! `07` stays `07`. Sheets appear in the order they were first seen.

use crate::ballot::{Candidate, CandidateId, ElectionMeta, Group, GroupId, Mark, MarkSheet};
use crate::error::{Error, Result};
use std::io::{BufRead, Write};

pub const FORMAT_MAGIC: &str = "ballot-noise-election";
pub const FORMAT_VERSION: u32 = 1;

/// An election together with its (multiplicity-compressed) ballot papers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ElectionFile {
    pub meta: ElectionMeta,
    pub sheets: Vec<MarkSheet>,
    pub provenance: String,
}

impl ElectionFile {
    pub fn new(meta: ElectionMeta, sheets: Vec<MarkSheet>, provenance: impl Into<String>) -> Result<Self> {
        for sheet in &sheets {
            sheet.validate(&meta)?;
        }
        Ok(ElectionFile {
            meta,
            sheets,
            provenance: provenance.into(),
        })
    }

    /// Number of physical ballot papers.
    pub fn total_ballots(&self) -> u64 {
        self.sheets.iter().map(MarkSheet::multiplicity).sum()
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str, line: usize) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => {
                return Err(Error::Format {
                    line,
                    message: format!("bad escape sequence \\{}", other.map(String::from).unwrap_or_default()),
                })
            }
        }
    }
    Ok(out)
}

pub fn write_election_file<W: Write>(file: &ElectionFile, mut out: W) -> Result<()> {
    let meta = &file.meta;
    writeln!(out, "{FORMAT_MAGIC} {FORMAT_VERSION}")?;
    writeln!(out, "name\t{}", escape(meta.name()))?;
    writeln!(out, "seats\t{}", meta.seats())?;
    writeln!(out, "provenance\t{}", escape(&file.provenance))?;
    writeln!(out, "groups\t{}", meta.num_groups())?;
    for g in meta.groups() {
        writeln!(out, "{}\t{}", g.code, escape(&g.name))?;
    }
    writeln!(out, "candidates\t{}", meta.num_candidates())?;
    for c in meta.candidates() {
        let group = c.group.and_then(|g| meta.group(g)).map_or("-", |g| g.code.as_str());
        writeln!(out, "{}\t{}\t{}\t{}", c.code, group, c.position, escape(&c.name))?;
    }
    writeln!(out, "sheets\t{}", file.sheets.len())?;
    for sheet in &file.sheets {
        sheet.validate(meta)?;
        let atl: Vec<String> = sheet
            .atl()
            .iter()
            .map(|(g, m)| format!("{}={}", meta.groups()[g.index()].code, m))
            .collect();
        let btl: Vec<String> = sheet
            .btl()
            .iter()
            .map(|(c, m)| format!("{}={}", meta.candidates()[c.index()].code, m))
            .collect();
        writeln!(out, "{}\t{}\t{}", sheet.multiplicity(), atl.join(" "), btl.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Format {
            line: self.line,
            message: message.into(),
        }
    }

    fn fields(&mut self, expected: usize) -> Result<Vec<String>> {
        let l = self.next_line()?;
        let fields: Vec<String> = l.split('\t').map(str::to_owned).collect();
        if fields.len() != expected {
            return Err(self.err(format!(
                "expected {expected} tab-separated fields, found {}",
                fields.len()
            )));
        }
        Ok(fields)
    }

    fn keyed(&mut self, key: &str) -> Result<String> {
        let mut f = self.fields(2)?;
        if f[0] != key {
            return Err(self.err(format!("expected `{key}` record, found `{}`", f[0])));
        }
        Ok(f.pop().unwrap())
    }

    fn keyed_count(&mut self, key: &str) -> Result<usize> {
        let v = self.keyed(key)?;
        v.parse()
            .map_err(|_| self.err(format!("`{key}` count is not a number: {v:?}")))
    }
}

pub fn read_election_file<R: BufRead>(input: R) -> Result<ElectionFile> {
    let mut lines = Lines {
        inner: input.lines(),
        line: 0,
    };
    let header = lines.next_line()?;
    let version = header
        .strip_prefix(FORMAT_MAGIC)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| lines.err(format!("missing `{FORMAT_MAGIC}` header")))?;
    if version != FORMAT_VERSION.to_string() {
        return Err(Error::Version {
            found: version.to_string(),
            expected: FORMAT_VERSION,
        });
    }

    let name = unescape(&lines.keyed("name")?, lines.line)?;
    let seats_text = lines.keyed("seats")?;
    let seats: u32 = seats_text
        .parse()
        .map_err(|_| lines.err(format!("bad seat count {seats_text:?}")))?;
    let provenance = unescape(&lines.keyed("provenance")?, lines.line)?;

    let n_groups = lines.keyed_count("groups")?;
    let mut groups = Vec::with_capacity(n_groups);
    for _ in 0..n_groups {
        let f = lines.fields(2)?;
        groups.push(Group {
            code: f[0].clone(),
            name: unescape(&f[1], lines.line)?,
        });
    }

    let n_candidates = lines.keyed_count("candidates")?;
    let mut candidates = Vec::with_capacity(n_candidates);
    for _ in 0..n_candidates {
        let f = lines.fields(4)?;
        let group = if f[1] == "-" {
            None
        } else {
            let idx = groups
                .iter()
                .position(|g| g.code == f[1])
                .ok_or_else(|| lines.err(format!("candidate {} names unknown group {:?}", f[0], f[1])))?;
            Some(GroupId(idx as u32))
        };
        let position = f[2]
            .parse()
            .map_err(|_| lines.err(format!("bad position {:?}", f[2])))?;
        candidates.push(Candidate {
            code: f[0].clone(),
            name: unescape(&f[3], lines.line)?,
            group,
            position,
        });
    }
    let meta_line = lines.line;
    let meta = ElectionMeta::new(name, seats, groups, candidates).map_err(|e| Error::Format {
        line: meta_line,
        message: e.to_string(),
    })?;

    let group_index: std::collections::HashMap<&str, GroupId> = meta
        .groups()
        .iter()
        .enumerate()
        .map(|(i, g)| (g.code.as_str(), GroupId(i as u32)))
        .collect();
    let cand_index: std::collections::HashMap<&str, CandidateId> = meta
        .candidates()
        .iter()
        .enumerate()
        .map(|(i, c)| (c.code.as_str(), CandidateId(i as u32)))
        .collect();

    let n_sheets = lines.keyed_count("sheets")?;
    let mut sheets = Vec::with_capacity(n_sheets);
    for _ in 0..n_sheets {
        let f = lines.fields(3)?;
        let multiplicity: u64 = f[0]
            .parse()
            .ok()
            .filter(|m| *m >= 1)
            .ok_or_else(|| lines.err(format!("bad multiplicity {:?}", f[0])))?;
        let atl = parse_pairs(&f[1], &group_index, "group", &lines)?;
        let btl = parse_pairs(&f[2], &cand_index, "candidate", &lines)?;
        let sheet = MarkSheet::new(atl, btl, multiplicity).map_err(|e| lines.err(e.to_string()))?;
        sheets.push(sheet);
    }
    // Anything after the declared sheets is a schema violation.
    lines.line += 1;
    if let Some(extra) = lines.inner.next() {
        if !extra?.is_empty() || lines.inner.next().is_some() {
            return Err(lines.err("trailing data after the last sheet"));
        }
    }

    Ok(ElectionFile {
        meta,
        sheets,
        provenance,
    })
}

fn parse_pairs<Id: Copy, R: BufRead>(
    field: &str,
    index: &std::collections::HashMap<&str, Id>,
    what: &str,
    lines: &Lines<R>,
) -> Result<Vec<(Id, Mark)>> {
    field
        .split(' ')
        .filter(|p| !p.is_empty())
        .map(|pair| {
            let (code, mark) = pair
                .split_once('=')
                .ok_or_else(|| lines.err(format!("expected code=mark, found {pair:?}")))?;
            let id = *index
                .get(code)
                .ok_or_else(|| lines.err(format!("unknown {what} {code:?}")))?;
            let mark = Mark::parse(mark).ok_or_else(|| lines.err(format!("mark {mark:?} is not a digit string")))?;
            Ok((id, mark))
        })
        .collect()
}
