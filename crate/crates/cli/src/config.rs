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

//! Configuration files: one TOML table per command, keyed like the long
//! flags. Flags given on the command line win.

use crate::usage;
use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use std::path::Path;

const SECTIONS: [&str; 7] = [
    "ingest",
    "count",
    "simulate",
    "partition",
    "forensics",
    "histogram",
    "estimate-rate",
];

#[derive(Debug, Default)]
pub struct ConfigFile {
    table: toml::Table,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let table: toml::Table = text.parse().map_err(|e| usage(format!("{}: {e}", path.display())))?;
        if let Some(k) = table.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return Err(usage(format!("{}: unknown section [{k}]", path.display())));
        }
        Ok(ConfigFile { table })
    }

    /// Overlays the flags that were set onto the file's `[section]`.
    pub fn resolve<T: Serialize + DeserializeOwned>(&self, section: &str, flags: &T) -> anyhow::Result<T> {
        let mut merged = match self.table.get(section) {
            Some(v) => serde_json::to_value(v)?,
            None => Value::Object(Default::default()),
        };
        let Value::Object(base) = &mut merged else {
            return Err(usage(format!("[{section}] must be a table")));
        };
        if let Value::Object(set) = serde_json::to_value(flags)? {
            for (k, v) in set {
                if !(v.is_null() || v == Value::Bool(false)) {
                    base.insert(k, v);
                }
            }
        }
        serde_json::from_value(merged).map_err(|e| usage(format!("[{section}]: {e}")))
    }
}

/// The resolved settings as a config file that reproduces the run.
pub fn to_config_toml<T: Serialize>(section: &str, args: &T) -> anyhow::Result<String> {
    let mut table = toml::Table::new();
    table.insert(section.to_string(), toml::Value::try_from(args)?);
    Ok(toml::to_string(&table)?)
}
