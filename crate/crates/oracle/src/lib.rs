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

//! Brute-force first-quantized reference for permutation-symmetric bosonic states.
//!
//! An `N`-particle state over `d` modes lives in `(C^d)^{⊗N}`; slot 0 is the most significant
//! digit of the basis index. Mixed states are kept as an ensemble `rho = sum_v v v^dagger`
//! of unnormalized vectors, which keeps the partial trace explicit without materializing a
//! `d^N x d^N` matrix. Everything here is deliberately naive and capped in size.

use num_complex::Complex64 as C64;
use thiserror::Error;

/// Largest particle number accepted for two-mode states.
pub const MAX_TWO_MODE: usize = 10;
/// Largest particle number accepted for four-mode states.
pub const MAX_FOUR_MODE: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{modes}-mode oracle is capped at {cap} particles, got {requested}")]
    SizeCap {
        modes: usize,
        cap: usize,
        requested: usize,
    },
    #[error("invalid oracle input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, OracleError>;

fn check_cap(modes: usize, particles: usize) -> Result<()> {
    let cap = match modes {
        2 => MAX_TWO_MODE,
        4 => MAX_FOUR_MODE,
        _ => {
            return Err(OracleError::Invalid(format!(
                "unsupported mode count {modes}"
            )))
        }
    };
    if particles > cap {
        return Err(OracleError::SizeCap {
            modes,
            cap,
            requested: particles,
        });
    }
    Ok(())
}

/// Mode of each slot of basis string `index`.
fn digits(index: usize, modes: usize, particles: usize) -> Vec<usize> {
    let mut out = vec![0; particles];
    let mut x = index;
    for slot in (0..particles).rev() {
        out[slot] = x % modes;
        x /= modes;
    }
    out
}

fn counts(index: usize, modes: usize, particles: usize) -> Vec<usize> {
    let mut c = vec![0; modes];
    for m in digits(index, modes, particles) {
        c[m] += 1;
    }
    c
}

/// All occupation tuples of `particles` bosons in `modes` modes, lexicographic.
pub fn occupations(modes: usize, particles: usize) -> Vec<Vec<usize>> {
    fn rec(modes: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == modes {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(modes, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(modes, particles, &mut Vec::new(), &mut out);
    out
}

#[derive(Clone, Debug)]
pub struct FirstQuantizedState {
    modes: usize,
    particles: usize,
    ensemble: Vec<Vec<C64>>,
}

/// Uniform superposition over all strings with mode counts `occupation`.
fn symmetric_vector(occupation: &[usize]) -> Vec<C64> {
    let modes = occupation.len();
    let particles: usize = occupation.iter().sum();
    let dim = modes.pow(particles as u32);
    let hits: Vec<usize> = (0..dim)
        .filter(|&i| counts(i, modes, particles) == occupation)
        .collect();
    let amp = C64::new((hits.len() as f64).sqrt().recip(), 0.0);
    let mut v = vec![C64::new(0.0, 0.0); dim];
    for i in hits {
        v[i] = amp;
    }
    v
}

/// Two-mode Dicke state with `n_b` particles in the second mode.
pub fn symmetrize_dicke(particles: usize, n_b: usize) -> Result<FirstQuantizedState> {
    check_cap(2, particles)?;
    if n_b > particles {
        return Err(OracleError::Invalid(format!(
            "n = {n_b} exceeds N = {particles}"
        )));
    }
    symmetrize_occupation(&[particles - n_b, n_b])
}

/// Symmetric state with the given mode occupations (two or four modes).
pub fn symmetrize_occupation(occupation: &[usize]) -> Result<FirstQuantizedState> {
    let particles = occupation.iter().sum();
    check_cap(occupation.len(), particles)?;
    Ok(FirstQuantizedState {
        modes: occupation.len(),
        particles,
        ensemble: vec![symmetric_vector(occupation)],
    })
}

/// Pure symmetric state `sum_l c_l |D_l>` from second-quantized amplitudes.
pub fn from_occupation_amplitudes(
    modes: usize,
    particles: usize,
    amplitudes: &[(Vec<usize>, C64)],
) -> Result<FirstQuantizedState> {
    check_cap(modes, particles)?;
    let dim = modes.pow(particles as u32);
    let mut v = vec![C64::new(0.0, 0.0); dim];
    for (occ, c) in amplitudes {
        if occ.len() != modes || occ.iter().sum::<usize>() != particles {
            return Err(OracleError::Invalid(format!(
                "occupation {occ:?} does not match the state"
            )));
        }
        for (x, s) in v.iter_mut().zip(symmetric_vector(occ)) {
            *x += c * s;
        }
    }
    Ok(FirstQuantizedState {
        modes,
        particles,
        ensemble: vec![v],
    })
}

/// `exp(-i angle sigma_y / 2)` on one particle with slot value 0 = mode a, 1 = mode b.
pub fn spin_half_rotation(angle: f64) -> Vec<Vec<C64>> {
    let (s, c) = (0.5 * angle).sin_cos();
    vec![
        vec![C64::new(c, 0.0), C64::new(-s, 0.0)],
        vec![C64::new(s, 0.0), C64::new(c, 0.0)],
    ]
}

/// Occupation-basis density matrix of the projection onto the symmetric subspace.
#[derive(Clone, Debug)]
pub struct SymmetricProjection {
    pub occupations: Vec<Vec<usize>>,
    pub matrix: Vec<Vec<C64>>,
}

impl SymmetricProjection {
    pub fn weights(&self) -> Vec<f64> {
        (0..self.matrix.len())
            .map(|i| self.matrix[i][i].re)
            .collect()
    }

    pub fn weight_of(&self, occupation: &[usize]) -> f64 {
        self.occupations
            .iter()
            .position(|o| o == occupation)
            .map_or(0.0, |i| self.matrix[i][i].re)
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (i, row) in self.matrix.iter().enumerate() {
            for (j, z) in row.iter().enumerate() {
                if i != j {
                    worst = worst.max(z.norm());
                }
            }
        }
        worst
    }
}

impl FirstQuantizedState {
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn ensemble_len(&self) -> usize {
        self.ensemble.len()
    }

    pub fn trace(&self) -> f64 {
        self.ensemble
            .iter()
            .map(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// Traces out the last `k` particle slots.
    pub fn trace_out_particles(&self, k: usize) -> Result<FirstQuantizedState> {
        if k > 0 && k >= self.particles {
            return Err(OracleError::Invalid(format!(
                "cannot trace out {k} of {} particles",
                self.particles
            )));
        }
        let mut out = self.clone();
        for _ in 0..k {
            out = out.trace_out_slot();
        }
        Ok(out)
    }

    /// Partial trace over the last slot: each vector splits into `d` vectors, one per value of
    /// the traced digit.
    fn trace_out_slot(&self) -> FirstQuantizedState {
        let d = self.modes;
        let rest = d.pow(self.particles as u32 - 1);
        let mut ensemble = Vec::with_capacity(self.ensemble.len() * d);
        for v in &self.ensemble {
            for j in 0..d {
                let w: Vec<C64> = (0..rest).map(|i| v[i * d + j]).collect();
                if w.iter().any(|z| z.norm_sqr() > 0.0) {
                    ensemble.push(w);
                }
            }
        }
        FirstQuantizedState {
            modes: d,
            particles: self.particles - 1,
            ensemble,
        }
    }

    /// `u^{⊗N}` for a single-particle unitary `u` (d x d, row-major).
    pub fn apply_single_particle(&self, u: &[Vec<C64>]) -> Result<FirstQuantizedState> {
        let d = self.modes;
        if u.len() != d || u.iter().any(|r| r.len() != d) {
            return Err(OracleError::Invalid(
                "single-particle unitary has the wrong shape".into(),
            ));
        }
        let ensemble = self
            .ensemble
            .iter()
            .map(|v| {
                let mut cur = v.clone();
                for slot in 0..self.particles {
                    let stride = d.pow((self.particles - 1 - slot) as u32);
                    let mut next = vec![C64::new(0.0, 0.0); cur.len()];
                    for (i, z) in cur.iter().enumerate() {
                        if z.norm_sqr() == 0.0 {
                            continue;
                        }
                        let digit = (i / stride) % d;
                        let base = i - digit * stride;
                        for (row, urow) in u.iter().enumerate() {
                            next[base + row * stride] += urow[digit] * z;
                        }
                    }
                    cur = next;
                }
                cur
            })
            .collect();
        Ok(FirstQuantizedState {
            modes: d,
            particles: self.particles,
            ensemble,
        })
    }

    /// Largest change of any ensemble vector under a transposition of neighbouring slots.
    pub fn symmetry_defect(&self) -> f64 {
        let d = self.modes;
        let n = self.particles;
        let mut worst = 0.0_f64;
        for v in &self.ensemble {
            for slot in 0..n.saturating_sub(1) {
                let hi = d.pow((n - 1 - slot) as u32);
                let lo = hi / d;
                for (i, z) in v.iter().enumerate() {
                    let a = (i / hi) % d;
                    let b = (i / lo) % d;
                    let j = i - a * hi - b * lo + b * hi + a * lo;
                    worst = worst.max((z - v[j]).norm());
                }
            }
        }
        worst
    }

    /// `<D_l| rho |D_l'>` over all occupation tuples `l, l'`.
    pub fn project_symmetric(&self) -> SymmetricProjection {
        let occs = occupations(self.modes, self.particles);
        let vectors: Vec<Vec<C64>> = occs.iter().map(|o| symmetric_vector(o)).collect();
        let overlaps: Vec<Vec<C64>> = self
            .ensemble
            .iter()
            .map(|v| {
                vectors
                    .iter()
                    .map(|s| s.iter().zip(v).map(|(a, b)| a.conj() * b).sum())
                    .collect()
            })
            .collect();
        let k = occs.len();
        let mut matrix = vec![vec![C64::new(0.0, 0.0); k]; k];
        for ov in &overlaps {
            for i in 0..k {
                for j in 0..k {
                    matrix[i][j] += ov[i] * ov[j].conj();
                }
            }
        }
        SymmetricProjection {
            occupations: occs,
            matrix,
        }
    }

    /// Reduced density matrix of one particle.
    pub fn one_particle_reduced(&self) -> Result<Vec<Vec<C64>>> {
        let reduced = self.trace_out_particles(self.particles - 1)?;
        let d = self.modes;
        let mut m = vec![vec![C64::new(0.0, 0.0); d]; d];
        for v in &reduced.ensemble {
            for i in 0..d {
                for j in 0..d {
                    m[i][j] += v[i] * v[j].conj();
                }
            }
        }
        Ok(m)
    }
}
