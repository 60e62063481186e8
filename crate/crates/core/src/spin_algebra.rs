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

//! Spin-`N/2` operators in the Dicke basis.
//!
//! A sector of `N` particles has the `N + 1` Dicke vectors `|N - n, n>` as its basis, ordered by
//! the occupation `n` of mode `b`. All operators here are dense.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DVector;

use crate::error::{contract, Error, Result};
use crate::states::PureState;
use crate::{CMatrix, CVector, C64};

/// Max-norm tolerance for Hermiticity, relative to the largest entry (floored at one).
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Max-norm tolerance on `U^dagger U - I` for cached eigenvector matrices.
pub const UNITARITY_TOL: f64 = 1e-12;
/// Max-norm tolerance on `U diag(lambda) U^dagger - G`, relative to the largest entry of `G`.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;

/// The symmetric (spin-`N/2`) sector of `N` two-mode bosons.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinSector {
    n_particles: usize,
}

impl SpinSector {
    pub fn new(n_particles: usize) -> Self {
        Self { n_particles }
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    /// Hilbert space dimension, `N + 1`.
    pub fn dim(&self) -> usize {
        self.n_particles + 1
    }

    /// `2j = N`, kept as an integer so odd `N` carries no rounding.
    pub fn twice_spin(&self) -> usize {
        self.n_particles
    }

    pub fn spin_j(&self) -> f64 {
        self.n_particles as f64 / 2.0
    }

    /// `J_z` eigenvalue `N/2 - n` of the Dicke vector with index `n`.
    pub fn jz_eigenvalue(&self, index: usize) -> f64 {
        (self.n_particles as f64 - 2.0 * index as f64) / 2.0
    }

    /// `<n-1| J_+ |n>` = `sqrt(n (N - n + 1))`, i.e. `sqrt(j(j+1) - m(m+1))` with `m = j - n`.
    pub fn raising_element(&self, index: usize) -> f64 {
        debug_assert!(index >= 1 && index <= self.n_particles);
        ((index * (self.n_particles - index + 1)) as f64).sqrt()
    }

    /// `|<n| J_y |n+1>|^2`, the only nonzero couplings of `J_y`.
    pub fn jy_coupling_sq(&self, index: usize) -> f64 {
        let n = index + 1;
        (n * (self.n_particles - n + 1)) as f64 / 4.0
    }
}

/// Which basis an operator or state is expressed in.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Basis {
    Dicke(SpinSector),
    /// Four-mode occupation basis with `particles` bosons, lexicographically ordered.
    FourMode {
        particles: usize,
    },
}

impl Basis {
    pub fn dim(&self) -> usize {
        match self {
            Basis::Dicke(sector) => sector.dim(),
            Basis::FourMode { particles } => {
                let m = *particles;
                (m + 1) * (m + 2) * (m + 3) / 6
            }
        }
    }
}

/// Anything that can act on a state vector: dense Hermitian operators here and the sparse
/// four-mode operators of `multimode`.
pub trait LinearAction {
    fn dim(&self) -> usize;

    fn apply(&self, v: &CVector) -> CVector;

    /// Largest entry of `[self, other]` in max-norm.
    fn commutator_norm(&self, other: &Self) -> f64
    where
        Self: Sized;
}

/// Cached eigendecomposition `G = U diag(lambda) U^dagger` of a Hermitian generator.
#[derive(Clone, Debug)]
pub struct UnitaryFactor {
    eigenvalues: DVector<f64>,
    eigenvectors: CMatrix,
}

impl UnitaryFactor {
    pub fn new(generator: &CMatrix) -> Result<Self> {
        let eigen = generator.clone().symmetric_eigen();
        let factor = Self {
            eigenvalues: eigen.eigenvalues,
            eigenvectors: eigen.eigenvectors,
        };

        let dim = generator.nrows();
        let gram = factor.eigenvectors.adjoint() * &factor.eigenvectors;
        let unitarity = max_abs(&(gram - CMatrix::identity(dim, dim)));
        if unitarity > UNITARITY_TOL {
            return Err(Error::Numerical {
                context: "eigenvector unitarity",
                residual: unitarity,
            });
        }
        let scale = max_abs(generator).max(1.0);
        let rebuilt = factor.reconstruct();
        let reconstruction = max_abs(&(rebuilt - generator)) / scale;
        if reconstruction > RECONSTRUCTION_TOL {
            return Err(Error::Numerical {
                context: "generator reconstruction",
                residual: reconstruction,
            });
        }
        Ok(factor)
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    fn reconstruct(&self) -> CMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= C64::new(self.eigenvalues[j], 0.0);
        }
        scaled * self.eigenvectors.adjoint()
    }

    /// `exp(-i angle G)`.
    pub fn unitary(&self, angle: f64) -> CMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= C64::from_polar(1.0, -angle * self.eigenvalues[j]);
        }
        scaled * self.eigenvectors.adjoint()
    }

    /// `exp(-i angle G) v` without forming the unitary.
    pub fn apply(&self, angle: f64, v: &CVector) -> CVector {
        let mut coeffs = self.eigenvectors.adjoint() * v;
        for (j, c) in coeffs.iter_mut().enumerate() {
            *c *= C64::from_polar(1.0, -angle * self.eigenvalues[j]);
        }
        &self.eigenvectors * coeffs
    }
}

/// Dense Hermitian matrix tagged with its basis. The eigendecomposition used for rotations is
/// computed on first use and then shared.
#[derive(Clone, Debug)]
pub struct HermitianOperator {
    basis: Basis,
    matrix: CMatrix,
    factor: OnceLock<UnitaryFactor>,
}

impl HermitianOperator {
    /// Validates shape and Hermiticity once; the operator is trusted afterwards.
    pub fn new(basis: Basis, matrix: CMatrix) -> Result<Self> {
        let dim = basis.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(contract(format!(
                "operator is {}x{} but basis has dimension {dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let deviation = hermiticity_defect(&matrix);
        if deviation > HERMITICITY_TOL {
            return Err(contract(format!(
                "matrix is not Hermitian (relative defect {deviation:e})"
            )));
        }
        Ok(Self::trusted(basis, matrix))
    }

    /// Skips validation; for matrices Hermitian by construction.
    pub(crate) fn trusted(basis: Basis, matrix: CMatrix) -> Self {
        Self {
            basis,
            matrix,
            factor: OnceLock::new(),
        }
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// `<psi| A |psi>` for a (not necessarily normalized) vector.
    pub fn expectation(&self, psi: &CVector) -> f64 {
        psi.dotc(&(&self.matrix * psi)).re
    }

    pub fn factor(&self) -> Result<&UnitaryFactor> {
        if let Some(f) = self.factor.get() {
            return Ok(f);
        }
        let computed = UnitaryFactor::new(&self.matrix)?;
        // A concurrent initializer computes the same factorization; either copy is fine.
        let _ = self.factor.set(computed);
        Ok(self.factor.get().expect("factor initialized above"))
    }

    /// `exp(-i angle A)`.
    pub fn rotation(&self, angle: f64) -> Result<CMatrix> {
        Ok(self.factor()?.unitary(angle))
    }

    pub fn commutator(&self, other: &HermitianOperator) -> CMatrix {
        &self.matrix * &other.matrix - &other.matrix * &self.matrix
    }
}

impl LinearAction for HermitianOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }

    fn commutator_norm(&self, other: &Self) -> f64 {
        max_abs(&self.commutator(other))
    }
}

/// `exp(-i angle G)` through the generator's cached eigendecomposition.
pub fn rotation(generator: &HermitianOperator, angle: f64) -> Result<CMatrix> {
    generator.rotation(angle)
}

/// Spin operators of one sector. The ladder operators are not Hermitian and stay bare matrices.
#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub jx: HermitianOperator,
    pub jy: HermitianOperator,
    pub jz: HermitianOperator,
    pub jplus: CMatrix,
    pub jminus: CMatrix,
}

pub fn build_spin_operators(sector: SpinSector) -> SpinOperators {
    let jplus = raising_matrix(sector);
    let jminus = jplus.adjoint();
    let basis = Basis::Dicke(sector);
    SpinOperators {
        jx: SpinObservable::Jx.operator(sector),
        jy: SpinObservable::Jy.operator(sector),
        jz: HermitianOperator::trusted(basis, SpinObservable::Jz.matrix(sector)),
        jplus,
        jminus,
    }
}

/// Named observables that can be built in any sector. Used wherever the same readout must be
/// evaluated across several particle numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpinObservable {
    Jx,
    Jy,
    Jz,
    /// `J_z^2`.
    JzSquared,
    /// `(J_+^2 + J_-^2) / 2`.
    RaiseSquared,
    /// `(J_z J_+ + J_- J_z) / 2`.
    JzRaise,
    /// `(-1)^{b^dagger b}`.
    Parity,
}

impl SpinObservable {
    pub fn matrix(&self, sector: SpinSector) -> CMatrix {
        let dim = sector.dim();
        let n_max = sector.n_particles();
        let mut m = CMatrix::zeros(dim, dim);
        match self {
            SpinObservable::Jx | SpinObservable::Jy => {
                for n in 1..=n_max {
                    let c = sector.raising_element(n) / 2.0;
                    // J_+ has <n-1|J_+|n> = c'; Jx = (J+ + J-)/2, Jy = (J+ - J-)/(2i).
                    let (upper, lower) = match self {
                        SpinObservable::Jx => (C64::new(c, 0.0), C64::new(c, 0.0)),
                        _ => (C64::new(0.0, -c), C64::new(0.0, c)),
                    };
                    m[(n - 1, n)] = upper;
                    m[(n, n - 1)] = lower;
                }
            }
            SpinObservable::Jz => {
                for n in 0..dim {
                    m[(n, n)] = C64::new(sector.jz_eigenvalue(n), 0.0);
                }
            }
            SpinObservable::JzSquared => {
                for n in 0..dim {
                    let jz = sector.jz_eigenvalue(n);
                    m[(n, n)] = C64::new(jz * jz, 0.0);
                }
            }
            SpinObservable::RaiseSquared => {
                for n in 2..=n_max {
                    let v = sector.raising_element(n) * sector.raising_element(n - 1) / 2.0;
                    m[(n - 2, n)] = C64::new(v, 0.0);
                    m[(n, n - 2)] = C64::new(v, 0.0);
                }
            }
            SpinObservable::JzRaise => {
                for n in 1..=n_max {
                    let v = sector.jz_eigenvalue(n - 1) * sector.raising_element(n) / 2.0;
                    m[(n - 1, n)] = C64::new(v, 0.0);
                    m[(n, n - 1)] = C64::new(v, 0.0);
                }
            }
            SpinObservable::Parity => {
                for n in 0..dim {
                    m[(n, n)] = C64::new(if n % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
                }
            }
        }
        m
    }

    pub fn operator(&self, sector: SpinSector) -> HermitianOperator {
        HermitianOperator::trusted(Basis::Dicke(sector), self.matrix(sector))
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpinObservable::Jx => "Jx",
            SpinObservable::Jy => "Jy",
            SpinObservable::Jz => "Jz",
            SpinObservable::JzSquared => "Jz^2",
            SpinObservable::RaiseSquared => "(J+^2+h.c.)/2",
            SpinObservable::JzRaise => "(JzJ+ + h.c.)/2",
            SpinObservable::Parity => "parity",
        }
    }
}

/// `J_+` with `<n-1|J_+|n> = sqrt(n (N - n + 1))`.
pub fn raising_matrix(sector: SpinSector) -> CMatrix {
    let dim = sector.dim();
    let mut m = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new(sector.raising_element(n), 0.0);
    }
    m
}

pub fn parity_operator(sector: SpinSector) -> HermitianOperator {
    SpinObservable::Parity.operator(sector)
}

/// The readout list `{J_z^2, (J_+^2 + h.c.)/2, (J_z J_+ + h.c.)/2, J_x}` in that order.
pub fn quadratic_observables(sector: SpinSector) -> [HermitianOperator; 4] {
    [
        SpinObservable::JzSquared.operator(sector),
        SpinObservable::RaiseSquared.operator(sector),
        SpinObservable::JzRaise.operator(sector),
        SpinObservable::Jx.operator(sector),
    ]
}

/// Cyclic shift `C|N-n, n> = |N-n-1, n+1>`, wrapping `n = N` to `0`.
pub fn cyclic_shift(sector: SpinSector) -> CMatrix {
    let dim = sector.dim();
    let mut c = CMatrix::zeros(dim, dim);
    for n in 0..dim {
        c[((n + 1) % dim, n)] = C64::new(1.0, 0.0);
    }
    c
}

/// Unrotated Fourier vectors `(N+1)^{-1/2} sum_n exp(2 pi i n k / (N+1)) |N-n, n>`; the `k`-th
/// one is an eigenvector of [`cyclic_shift`] with eigenvalue `exp(-2 pi i k / (N+1))`.
pub fn fourier_vectors(sector: SpinSector) -> Vec<CVector> {
    let dim = sector.dim();
    let norm = (dim as f64).sqrt().recip();
    (0..dim)
        .map(|k| {
            CVector::from_iterator(
                dim,
                (0..dim).map(|n| {
                    let phase = 2.0 * PI * ((n * k) % dim) as f64 / dim as f64;
                    C64::from_polar(norm, phase)
                }),
            )
        })
        .collect()
}

/// Phase basis `|k~> = exp(i pi/2 J_x) f_k`, `k = 0..N`, with `f_k` the Fourier vectors.
pub fn phase_basis(sector: SpinSector) -> Result<Vec<PureState>> {
    let jx = SpinObservable::Jx.operator(sector);
    let factor = jx.factor()?;
    fourier_vectors(sector)
        .into_iter()
        .map(|f| PureState::new(Basis::Dicke(sector), factor.apply(-PI / 2.0, &f)))
        .collect()
}

pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `max |A - A^dagger|` relative to `max(1, max |A|)`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let scale = max_abs(m).max(1.0);
    max_abs(&(m - m.adjoint())) / scale
}
