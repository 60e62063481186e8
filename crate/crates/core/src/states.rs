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

//! Probe states: Dicke and twin Fock vectors, one-axis-twisted and phase-diffused states, and
//! Dicke-diagonal mixtures.

use std::f64::consts::PI;

use crate::error::{contract, domain, Result};
use crate::spin_algebra::{Basis, HermitianOperator, SpinObservable, SpinSector};
use crate::{CMatrix, CVector, C64};

/// Allowed deviation of a state's 2-norm (or a mixture's total weight) from one.
pub const NORM_TOL: f64 = 1e-12;

/// Unit vector in a Dicke or four-mode occupation basis.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    basis: Basis,
    amplitudes: CVector,
}

impl PureState {
    pub fn new(basis: Basis, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(contract(format!(
                "{} amplitudes for a basis of dimension {}",
                amplitudes.len(),
                basis.dim()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL * amplitudes.len().max(1) as f64 {
            return Err(contract(format!("state has norm {norm}, expected 1")));
        }
        Ok(Self { basis, amplitudes })
    }

    /// Rescales to unit norm; fails on the zero vector.
    pub fn normalized(basis: Basis, amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(contract("cannot normalize a zero or non-finite vector"));
        }
        Self::new(basis, amplitudes.unscale(norm))
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &PureState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn density_matrix(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    /// `exp(-i angle G)|self>`.
    pub fn evolve(&self, generator: &HermitianOperator, angle: f64) -> Result<PureState> {
        if generator.basis() != &self.basis {
            return Err(contract("generator and state live in different bases"));
        }
        let amplitudes = generator.factor()?.apply(angle, &self.amplitudes);
        Ok(Self {
            basis: self.basis.clone(),
            amplitudes,
        })
    }
}

/// `J_z` eigenvalue `m` of a Dicke vector, stored as `2m` so half-integer values are exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Imbalance {
    twice: i64,
}

impl Imbalance {
    pub fn new(m: i64) -> Self {
        Self { twice: 2 * m }
    }

    pub fn from_twice(twice_m: i64) -> Self {
        Self { twice: twice_m }
    }

    pub fn twice(&self) -> i64 {
        self.twice
    }

    pub fn value(&self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// Dicke index `n = N/2 - m`, if it exists in the sector.
    pub fn dicke_index(&self, sector: SpinSector) -> Result<usize> {
        let twice_n = sector.twice_spin() as i64 - self.twice;
        if twice_n < 0 || twice_n > 2 * sector.twice_spin() as i64 || twice_n % 2 != 0 {
            return Err(domain(format!(
                "imbalance m = {} is not a J_z eigenvalue for N = {}",
                self.value(),
                sector.n_particles()
            )));
        }
        Ok((twice_n / 2) as usize)
    }
}

/// Dicke vector with `J_z = m`, i.e. amplitude one at index `N/2 - m`.
pub fn dicke_state(sector: SpinSector, m: Imbalance) -> Result<PureState> {
    let index = m.dicke_index(sector)?;
    dicke_index_state(sector, index)
}

/// Dicke vector `|N - n, n>` addressed by the occupation `n` of mode `b`.
pub fn dicke_index_state(sector: SpinSector, index: usize) -> Result<PureState> {
    if index >= sector.dim() {
        return Err(domain(format!(
            "Dicke index {index} outside 0..={}",
            sector.n_particles()
        )));
    }
    let mut amplitudes = CVector::zeros(sector.dim());
    amplitudes[index] = C64::new(1.0, 0.0);
    Ok(PureState {
        basis: Basis::Dicke(sector),
        amplitudes,
    })
}

/// Twin Fock state `|N/2, N/2>`.
pub fn twin_fock(sector: SpinSector) -> Result<PureState> {
    if !sector.n_particles().is_multiple_of(2) {
        return Err(domain(format!(
            "twin Fock state needs even N, got {}",
            sector.n_particles()
        )));
    }
    dicke_index_state(sector, sector.n_particles() / 2)
}

/// `|+>^{otimes N}`: binomial amplitudes `sqrt(C(N, n)) / 2^{N/2}`.
pub fn coherent_x(sector: SpinSector) -> PureState {
    let n_particles = sector.n_particles();
    let ln_half_power = -(n_particles as f64) * std::f64::consts::LN_2 / 2.0;
    let amplitudes = CVector::from_iterator(
        sector.dim(),
        (0..sector.dim()).map(|n| {
            C64::new(
                (0.5 * ln_binomial(n_particles, n) + ln_half_power).exp(),
                0.0,
            )
        }),
    );
    PureState {
        basis: Basis::Dicke(sector),
        amplitudes,
    }
}

/// One-axis-twisted state `exp(-i t J_z^2)|+>^{otimes N}`.
pub fn oat_state(sector: SpinSector, t: f64) -> PureState {
    let mut state = coherent_x(sector);
    apply_twist(sector, t, &mut state.amplitudes);
    state
}

/// Phase-diffused probe `exp(-i chi J_z^2) exp(-i pi/2 J_y)|N/2, N/2>`.
pub fn phase_diffused(sector: SpinSector, chi: f64) -> Result<PureState> {
    if !sector.n_particles().is_multiple_of(2) {
        return Err(domain(format!(
            "phase-diffused probe needs even N, got {}",
            sector.n_particles()
        )));
    }
    let jy = SpinObservable::Jy.operator(sector);
    let mut state = twin_fock(sector)?.evolve(&jy, PI / 2.0)?;
    apply_twist(sector, chi, &mut state.amplitudes);
    Ok(state)
}

fn apply_twist(sector: SpinSector, t: f64, amplitudes: &mut CVector) {
    for (n, a) in amplitudes.iter_mut().enumerate() {
        let m = sector.jz_eigenvalue(n);
        *a *= C64::from_polar(1.0, -t * m * m);
    }
}

pub(crate) fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k)
        .map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum()
}

/// Diagonal mixed state `sum_n w_n |N-n, n><N-n, n|` in one sector.
#[derive(Clone, Debug, PartialEq)]
pub struct DickeMixture {
    sector: SpinSector,
    weights: Vec<f64>,
}

impl DickeMixture {
    /// Weights must be non-negative, one per Dicke index, and sum to one within [`NORM_TOL`].
    pub fn new(sector: SpinSector, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != sector.dim() {
            return Err(contract(format!(
                "{} weights for a sector of dimension {}",
                weights.len(),
                sector.dim()
            )));
        }
        if let Some(w) = weights.iter().find(|w| **w < 0.0 || !w.is_finite()) {
            return Err(domain(format!("negative or non-finite weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(domain(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { sector, weights })
    }

    pub fn point_mass(sector: SpinSector, index: usize) -> Result<Self> {
        if index >= sector.dim() {
            return Err(domain(format!("Dicke index {index} outside sector")));
        }
        let mut weights = vec![0.0; sector.dim()];
        weights[index] = 1.0;
        Ok(Self { sector, weights })
    }

    pub fn sector(&self) -> SpinSector {
        self.sector
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn density_matrix(&self) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(
            self.weights.len(),
            self.weights.iter().map(|w| C64::new(*w, 0.0)),
        ))
    }

    /// `<J_z>` of the mixture.
    pub fn mean_jz(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(n, w)| w * self.sector.jz_eigenvalue(n))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrology::qfi_pure;

    #[test]
    fn twin_fock_of_four_particles() {
        let s = dicke_state(SpinSector::new(4), Imbalance::new(0)).unwrap();
        let expected: Vec<f64> = vec![0.0, 0.0, 1.0, 0.0, 0.0];
        let got: Vec<f64> = s.amplitudes().iter().map(|a| a.re).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn dicke_state_is_jz_eigenvector() {
        let sector = SpinSector::new(9);
        let jz = SpinObservable::Jz.operator(sector);
        for twice in (-9..=9).step_by(2) {
            let s = dicke_state(sector, Imbalance::from_twice(twice)).unwrap();
            assert_eq!(jz.expectation(s.amplitudes()), twice as f64 / 2.0);
        }
    }

    #[test]
    fn imbalance_out_of_range_is_a_domain_error() {
        let sector = SpinSector::new(4);
        assert!(matches!(
            dicke_state(sector, Imbalance::new(3)),
            Err(crate::Error::Domain(_))
        ));
        // half-integer imbalance in an even sector
        assert!(dicke_state(sector, Imbalance::from_twice(1)).is_err());
    }

    #[test]
    fn distinct_dicke_states_are_orthogonal() {
        let sector = SpinSector::new(6);
        for a in -3..=3 {
            for b in -3..=3 {
                let sa = dicke_state(sector, Imbalance::new(a)).unwrap();
                let sb = dicke_state(sector, Imbalance::new(b)).unwrap();
                let expected = if a == b { 1.0 } else { 0.0 };
                assert_eq!(sa.overlap(&sb), C64::new(expected, 0.0));
            }
        }
    }

    #[test]
    fn coherent_state_has_binomial_jz_variance() {
        for n in [1usize, 10, 40, 300] {
            let sector = SpinSector::new(n);
            let s = oat_state(sector, 0.0);
            assert!((s.amplitudes().norm() - 1.0).abs() < 1e-12);
            let jz = SpinObservable::Jz.operator(sector);
            let jz2 = SpinObservable::JzSquared.operator(sector);
            let var = jz2.expectation(s.amplitudes()) - jz.expectation(s.amplitudes()).powi(2);
            assert!((var - n as f64 / 4.0).abs() < 1e-9 * n as f64);
        }
    }

    #[test]
    fn twisted_states_keep_unit_norm() {
        let sector = SpinSector::new(25);
        for t in [0.1, 0.7, 3.0, -12.5] {
            assert!((oat_state(sector, t).amplitudes().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oat_and_phase_diffused_builders_differ() {
        let sector = SpinSector::new(40);
        let oat = oat_state(sector, PI / 4.0);
        let diffused = phase_diffused(sector, PI / 4.0).unwrap();
        assert!(oat.overlap(&diffused).norm() < 1.0 - 1e-6);
    }

    #[test]
    fn phase_diffused_needs_even_n() {
        assert!(matches!(
            phase_diffused(SpinSector::new(5), 0.1),
            Err(crate::Error::Domain(_))
        ));
    }

    #[test]
    fn phase_diffused_mean_jz_vanishes() {
        let sector = SpinSector::new(40);
        let jz = SpinObservable::Jz.operator(sector);
        for k in 0..=20 {
            let chi = k as f64 * 0.05;
            let s = phase_diffused(sector, chi).unwrap();
            assert!((s.amplitudes().norm() - 1.0).abs() < 1e-12);
            assert!(jz.expectation(s.amplitudes()).abs() < 1e-10);
        }
    }

    #[test]
    fn phase_diffusion_is_two_pi_periodic() {
        let sector = SpinSector::new(24);
        for chi in [0.0, 0.3, 1.1] {
            let a = phase_diffused(sector, chi).unwrap();
            let b = phase_diffused(sector, chi + 2.0 * PI).unwrap();
            assert!((a.overlap(&b).norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn phase_diffusion_at_quarter_pi_kills_jy_sensitivity() {
        let sector = SpinSector::new(40);
        let s = phase_diffused(sector, PI / 4.0).unwrap();
        let jy = SpinObservable::Jy.operator(sector);
        assert!(qfi_pure(&s, &jy) < 1e-8);
    }

    #[test]
    fn mixture_validation() {
        let sector = SpinSector::new(2);
        assert!(DickeMixture::new(sector, vec![0.5, 0.5]).is_err());
        assert!(DickeMixture::new(sector, vec![0.5, 0.6, -0.1]).is_err());
        assert!(DickeMixture::new(sector, vec![0.5, 0.25, 0.3]).is_err());
        let m = DickeMixture::new(sector, vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(m.mean_jz(), 0.0);
    }
}
