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

//! Optimal-estimation numerics for Mach-Zehnder interferometry with Dicke probes.
//!
//! The crate is organised bottom-up:
//!
//! - [`spin_algebra`]: spin-`N/2` operators in the Dicke basis, rotations through a cached
//!   eigendecomposition, parity, the quadratic readout observables and the `J_y` phase basis.
//! - [`states`]: Dicke / twin Fock, one-axis-twisted and phase-diffused probes, plus
//!   Dicke-diagonal mixtures.
//! - [`loss`]: the particle-loss channel as a Markov chain on Dicke weights, two-mode and
//!   four-mode.
//! - [`metrology`]: quantum and classical Fisher information, method-of-moments errors and the
//!   generalized signal-to-noise matrix.
//! - [`multimode`]: four-mode probes for two local interferometers, lossy QFI matrices by
//!   block decomposition and the gradiometry closed forms.
//!
//! Dicke basis convention used throughout: index `n` is the occupation of mode `b`, so the
//! `J_z` eigenvalue at index `n` is `N/2 - n`.

pub mod error;
pub mod loss;
pub mod metrology;
pub mod multimode;
pub mod spin_algebra;
pub mod states;

pub use error::{Error, Result};
pub use spin_algebra::{Basis, HermitianOperator, LinearAction, SpinObservable, SpinSector};
pub use states::{DickeMixture, Imbalance, PureState};

/// Complex scalar used by every matrix in the crate.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
