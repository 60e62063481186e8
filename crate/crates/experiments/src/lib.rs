// Copyright 2026 The dicke-metrology Developers
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except
// in compliance with the License. You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software distributed under the License
// is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express
// or implied. See the License for the specific language governing permissions and limitations under
// the License.

//! Figure and sweep reproduction on top of `dicke-core`, plus the `dicke-metrology` binary.

pub mod config;
pub mod output;
pub mod scenarios;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(dicke_core::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<dicke_core::Error> for RunError {
    fn from(e: dicke_core::Error) -> Self {
        match e {
            dicke_core::Error::Numerical { .. } => RunError::Numerical(e),
            other => RunError::Config(other.to_string()),
        }
    }
}

impl RunError {
    /// 2 for invalid configurations, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}
