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

use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation (odd `N` where even is required,
    /// loss count too large, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A structural precondition of the caller was violated (dimension mismatch, non-commuting
    /// generators on a path that requires commuting ones, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A factorization or consistency check did not reach its tolerance.
    #[error("numerical failure in {context}: residual {residual:e}")]
    Numerical {
        context: &'static str,
        residual: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
