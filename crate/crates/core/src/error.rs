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

//! Error type shared by every module of the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Election metadata violates one of its structural invariants.
    #[error("invalid election metadata: {0}")]
    InvalidMeta(String),

    /// A ballot, preference list or sheet refers to something that does not
    /// exist in the election, or is otherwise inconsistent with it.
    #[error("data integrity error: {0}")]
    DataIntegrity(String),

    /// The canonical election file could not be parsed.
    #[error("election file, line {line}: {message}")]
    Format { line: usize, message: String },

    /// The canonical election file declares a version we cannot read.
    #[error("unsupported election file version {found:?} (expected {expected})")]
    Version { found: String, expected: u32 },

    /// Input stream could not be read as CSV at all.
    #[error("malformed CSV input: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// There were no formal ballots to count.
    #[error("no formal ballots to count")]
    NoBallots,

    /// The counting engine detected a broken internal invariant. The
    /// transcript up to the failure is attached as JSON.
    #[error("internal invariant violated: {message}")]
    Invariant { message: String, transcript: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
