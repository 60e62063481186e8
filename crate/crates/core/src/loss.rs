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

//! Particle loss on Dicke-diagonal states.
//!
//! Tracing out one particle of `|N - n, n>` leaves `|N - 1 - n, n>` with probability `1 - n/N`
//! and `|N - n, n - 1>` with probability `n/N`. Iterating gives a time-inhomogeneous Markov
//! chain on the Dicke index; the four-mode version removes one particle from mode `j` with
//! probability `l_j / |l|_1`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{domain, Result};
use crate::spin_algebra::SpinSector;
use crate::states::DickeMixture;

/// Occupation numbers `(n_a1, n_b1, n_a2, n_b2)`.
pub type Occupation = [usize; 4];

/// Step matrix `Q_k` of size `(m+1) x (m+1)` for a system currently holding `n_k` particles.
///
/// Column `i` (Dicke index `i`) keeps `1 - i/n_k` on the diagonal and sends `i/n_k` to index
/// `i - 1`. Columns sum to one; rows in general do not.
pub fn loss_step_matrix(n_k: usize, m: usize) -> Result<DMatrix<f64>> {
    if n_k == 0 {
        return Err(domain("cannot lose a particle from the vacuum"));
    }
    if m > n_k {
        return Err(domain(format!(
            "Dicke index {m} exceeds the particle number {n_k}"
        )));
    }
    let n = n_k as f64;
    let mut q = DMatrix::zeros(m + 1, m + 1);
    for i in 0..=m {
        q[(i, i)] = 1.0 - i as f64 / n;
        if i > 0 {
            q[(i - 1, i)] = i as f64 / n;
        }
    }
    Ok(q)
}

/// Loss Markov chain started from the Dicke vector with index `start_index` in a sector of
/// `n_particles`. The weight vector keeps length `start_index + 1` since loss never increases
/// the index.
#[derive(Clone, Debug)]
pub struct LossChain {
    n_particles: usize,
    start_index: usize,
    lost: usize,
    weights: Vec<f64>,
}

impl LossChain {
    pub fn new(n_particles: usize, start_index: usize) -> Result<Self> {
        if start_index > n_particles {
            return Err(domain(format!(
                "Dicke index {start_index} outside 0..={n_particles}"
            )));
        }
        let mut weights = vec![0.0; start_index + 1];
        weights[start_index] = 1.0;
        Ok(Self {
            n_particles,
            start_index,
            lost: 0,
            weights,
        })
    }

    pub fn lost(&self) -> usize {
        self.lost
    }

    pub fn remaining(&self) -> usize {
        self.n_particles - self.lost
    }

    /// Largest admissible loss count, `N - m - 1`.
    pub fn max_loss(&self) -> usize {
        (self.n_particles - self.start_index).saturating_sub(1)
    }

    /// Weights over Dicke indices `0..=start_index`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Applies `Q_k` with `k` the number of particles lost so far.
    pub fn step(&mut self) -> Result<()> {
        if self.lost >= self.max_loss() {
            return Err(domain(format!(
                "loss count must stay below N - m = {}",
                self.n_particles - self.start_index
            )));
        }
        let n_k = self.remaining() as f64;
        let len = self.weights.len();
        for i in 0..len {
            let stay = self.weights[i] * (1.0 - i as f64 / n_k);
            let incoming = if i + 1 < len {
                self.weights[i + 1] * (i + 1) as f64 / n_k
            } else {
                0.0
            };
            self.weights[i] = stay + incoming;
        }
        self.lost += 1;
        Ok(())
    }

    /// Current state as a mixture over the full sector of `N - k` particles.
    pub fn mixture(&self) -> Result<DickeMixture> {
        let sector = SpinSector::new(self.remaining());
        let mut padded = vec![0.0; sector.dim()];
        padded[..self.weights.len()].copy_from_slice(&self.weights);
        DickeMixture::new(sector, padded)
    }
}

/// `E_K(|N - m, m><N - m, m|)` with `m` the Dicke index (occupation of mode `b`); needs `K < N - m`.
pub fn apply_loss(n_particles: usize, start_index: usize, losses: usize) -> Result<DickeMixture> {
    let mut chain = LossChain::new(n_particles, start_index)?;
    if losses > chain.max_loss() {
        return Err(domain(format!(
            "K = {losses} violates K < N - m = {}",
            n_particles - start_index
        )));
    }
    for _ in 0..losses {
        chain.step()?;
    }
    chain.mixture()
}

/// Sparse probability map over four-mode occupations of equal total particle number.
#[derive(Clone, Debug, PartialEq)]
pub struct FourModeWeights {
    particles: usize,
    weights: BTreeMap<Occupation, f64>,
}

impl FourModeWeights {
    pub fn point_mass(start: Occupation) -> Self {
        Self {
            particles: start.iter().sum(),
            weights: BTreeMap::from([(start, 1.0)]),
        }
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn weights(&self) -> &BTreeMap<Occupation, f64> {
        &self.weights
    }

    pub fn get(&self, occupation: &Occupation) -> f64 {
        self.weights.get(occupation).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    /// Distribution of the pair particle numbers `(n_a1 + n_b1, n_a2 + n_b2)`.
    pub fn pair_marginal(&self) -> BTreeMap<(usize, usize), f64> {
        let mut out = BTreeMap::new();
        for (l, p) in &self.weights {
            *out.entry((l[0] + l[1], l[2] + l[3])).or_insert(0.0) += p;
        }
        out
    }

    /// One application of the four-index loss tensor.
    pub fn lose_one(&self) -> Result<Self> {
        if self.particles == 0 {
            return Err(domain("cannot lose a particle from the vacuum"));
        }
        let total = self.particles as f64;
        let mut next: BTreeMap<Occupation, f64> = BTreeMap::new();
        for (l, p) in &self.weights {
            for j in 0..4 {
                if l[j] == 0 {
                    continue;
                }
                let mut target = *l;
                target[j] -= 1;
                *next.entry(target).or_insert(0.0) += p * l[j] as f64 / total;
            }
        }
        Ok(Self {
            particles: self.particles - 1,
            weights: next,
        })
    }
}

/// Weights after losing `losses` particles from the four-mode Dicke state `start`.
pub fn four_mode_loss(start: Occupation, losses: usize) -> Result<FourModeWeights> {
    let total: usize = start.iter().sum();
    if losses >= total {
        return Err(domain(format!(
            "cannot lose {losses} of {total} particles (need K < |l|_1)"
        )));
    }
    let mut w = FourModeWeights::point_mass(start);
    for _ in 0..losses {
        w = w.lose_one()?;
    }
    Ok(w)
}
