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

//! Two interferometers fed by one four-mode probe.
//!
//! Occupations are ordered `(n_a1, n_b1, n_a2, n_b2)`; pair `p` consists of modes `a_p, b_p` and
//! its Dicke index is `n_bp`. Local operators conserve each pair's particle number, so lossy
//! states split into blocks labelled by the pair particle numbers `(M1, M2)`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, Matrix2};

use crate::error::{contract, domain, Result};
use crate::loss::{four_mode_loss, FourModeWeights, Occupation};
use crate::metrology::{jy_spectral_sum, qfi_matrix, MomentMatrixResult, MomentSums};
use crate::spin_algebra::{
    build_spin_operators, max_abs, Basis, LinearAction, SpinObservable, SpinSector, UnitaryFactor,
};
use crate::states::{ln_binomial, PureState};
use crate::{CMatrix, CVector, C64};

/// Tolerance of the operator identity checked by [`sequential_identity_check`].
pub const SEQUENTIAL_TOL: f64 = 1e-10;

/// Lexicographically ordered occupation basis of `particles` bosons in four modes.
#[derive(Clone, Debug)]
pub struct FourModeBasis {
    particles: usize,
    states: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
}

impl FourModeBasis {
    pub fn new(particles: usize) -> Self {
        let mut states = Vec::with_capacity(Basis::FourMode { particles }.dim());
        for a1 in 0..=particles {
            for b1 in 0..=(particles - a1) {
                for a2 in 0..=(particles - a1 - b1) {
                    states.push([a1, b1, a2, particles - a1 - b1 - a2]);
                }
            }
        }
        let index = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        Self {
            particles,
            states,
            index,
        }
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Occupation] {
        &self.states
    }

    pub fn index_of(&self, occupation: &Occupation) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    pub fn basis(&self) -> Basis {
        Basis::FourMode {
            particles: self.particles,
        }
    }
}

/// Row-compressed complex matrix over a [`FourModeBasis`].
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    rows: Vec<Vec<(usize, C64)>>,
}

impl SparseOperator {
    fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let mut maps: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); dim];
        for (r, c, v) in triplets {
            *maps[r].entry(c).or_insert(C64::new(0.0, 0.0)) += v;
        }
        let rows = maps
            .into_iter()
            .map(|m| {
                m.into_iter()
                    .filter(|(_, v)| *v != C64::new(0.0, 0.0))
                    .collect()
            })
            .collect();
        Self { dim, rows }
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                m[(r, c)] = v;
            }
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    fn product_rows(&self, other: &SparseOperator) -> Vec<BTreeMap<usize, C64>> {
        self.rows
            .iter()
            .map(|row| {
                let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
                for &(k, a) in row {
                    for &(c, b) in &other.rows[k] {
                        *acc.entry(c).or_insert(C64::new(0.0, 0.0)) += a * b;
                    }
                }
                acc
            })
            .collect()
    }
}

impl LinearAction for SparseOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &CVector) -> CVector {
        CVector::from_iterator(
            self.dim,
            self.rows
                .iter()
                .map(|row| row.iter().map(|&(c, a)| a * v[c]).sum::<C64>()),
        )
    }

    fn commutator_norm(&self, other: &Self) -> f64 {
        let ab = self.product_rows(other);
        let ba = other.product_rows(self);
        let mut worst = 0.0_f64;
        for (x, y) in ab.iter().zip(&ba) {
            for (c, v) in x {
                worst = worst.max((v - y.get(c).copied().unwrap_or_default()).norm());
            }
            for (c, v) in y {
                if !x.contains_key(c) {
                    worst = worst.max(v.norm());
                }
            }
        }
        worst
    }
}

/// Embeds a two-mode observable on pair `pair` (0 or 1) into the four-mode basis.
pub fn pair_operator(
    basis: &FourModeBasis,
    pair: usize,
    observable: SpinObservable,
) -> SparseOperator {
    assert!(pair < 2, "pair index must be 0 or 1");
    let (ia, ib) = (2 * pair, 2 * pair + 1);
    let mut cache: HashMap<usize, CMatrix> = HashMap::new();
    let mut triplets = Vec::new();
    for (col, occ) in basis.states().iter().enumerate() {
        let m_pair = occ[ia] + occ[ib];
        let local = cache
            .entry(m_pair)
            .or_insert_with(|| observable.matrix(SpinSector::new(m_pair)));
        let n = occ[ib];
        for n_out in 0..=m_pair {
            let v = local[(n_out, n)];
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            let mut target = *occ;
            target[ia] = m_pair - n_out;
            target[ib] = n_out;
            let row = basis
                .index_of(&target)
                .expect("pair operator stays in the basis");
            triplets.push((row, col, v));
        }
    }
    SparseOperator::from_triplets(basis.dim(), triplets)
}

/// Local operators of one pair.
#[derive(Clone, Debug)]
pub struct PairOperators {
    pub jx: SparseOperator,
    pub jy: SparseOperator,
    pub jz: SparseOperator,
    pub jz_sq: SparseOperator,
    pub raise_sq: SparseOperator,
    pub jz_raise: SparseOperator,
}

impl PairOperators {
    pub fn new(basis: &FourModeBasis, pair: usize) -> Self {
        Self {
            jx: pair_operator(basis, pair, SpinObservable::Jx),
            jy: pair_operator(basis, pair, SpinObservable::Jy),
            jz: pair_operator(basis, pair, SpinObservable::Jz),
            jz_sq: pair_operator(basis, pair, SpinObservable::JzSquared),
            raise_sq: pair_operator(basis, pair, SpinObservable::RaiseSquared),
            jz_raise: pair_operator(basis, pair, SpinObservable::JzRaise),
        }
    }
}

pub fn local_generators(basis: &FourModeBasis) -> [PairOperators; 2] {
    [PairOperators::new(basis, 0), PairOperators::new(basis, 1)]
}

/// Each half of the particles enters one port of the two interferometers in equal
/// superposition: `((a1^dag + a2^dag)/sqrt 2)^{N/2} ((b1^dag + b2^dag)/sqrt 2)^{N/2} |0>`.
pub fn split_state(n_particles: usize) -> Result<PureState> {
    if !n_particles.is_multiple_of(2) {
        return Err(domain(format!(
            "split state needs even N, got {n_particles}"
        )));
    }
    let half = n_particles / 2;
    let basis = FourModeBasis::new(n_particles);
    let mut amps = CVector::zeros(basis.dim());
    let ln_norm = half as f64 * std::f64::consts::LN_2;
    for i in 0..=half {
        for k in 0..=half {
            let idx = basis
                .index_of(&[i, k, half - i, half - k])
                .expect("split occupation in basis");
            let ln = 0.5 * (ln_binomial(half, i) + ln_binomial(half, k)) - ln_norm;
            amps[idx] = C64::new(ln.exp(), 0.0);
        }
    }
    PureState::new(basis.basis(), amps)
}

/// Point mass on `(N/4, N/4, N/4, N/4)`.
pub fn doubled_tf(n_particles: usize) -> Result<PureState> {
    if !n_particles.is_multiple_of(4) {
        return Err(domain(format!(
            "doubled twin-Fock state needs N divisible by 4, got {n_particles}"
        )));
    }
    let q = n_particles / 4;
    let basis = FourModeBasis::new(n_particles);
    let mut amps = CVector::zeros(basis.dim());
    amps[basis
        .index_of(&[q, q, q, q])
        .expect("doubled occupation in basis")] = C64::new(1.0, 0.0);
    PureState::new(basis.basis(), amps)
}

/// `exp(-i angle Jy_pair)` applied to a four-mode state, one pair-number block at a time.
pub fn rotate_pair(state: &PureState, pair: usize, angle: f64) -> Result<PureState> {
    let particles = match state.basis() {
        Basis::FourMode { particles } => *particles,
        other => {
            return Err(contract(format!(
                "expected a four-mode state, got {other:?}"
            )))
        }
    };
    if pair > 1 {
        return Err(contract("pair index must be 0 or 1"));
    }
    let basis = FourModeBasis::new(particles);
    let (ia, ib) = (2 * pair, 2 * pair + 1);
    let psi = state.amplitudes();
    let mut out = CVector::zeros(psi.len());
    let mut factors: HashMap<usize, UnitaryFactor> = HashMap::new();
    let mut done = vec![false; psi.len()];
    for (start, occ) in basis.states().iter().enumerate() {
        if done[start] {
            continue;
        }
        let m_pair = occ[ia] + occ[ib];
        let slot: Vec<usize> = (0..=m_pair)
            .map(|n| {
                let mut t = *occ;
                t[ia] = m_pair - n;
                t[ib] = n;
                basis.index_of(&t).expect("pair orbit in basis")
            })
            .collect();
        for &i in &slot {
            done[i] = true;
        }
        let local = CVector::from_iterator(slot.len(), slot.iter().map(|&i| psi[i]));
        if local.iter().all(|z| *z == C64::new(0.0, 0.0)) {
            continue;
        }
        let factor = match factors.entry(m_pair) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => {
                let jy = SpinObservable::Jy.matrix(SpinSector::new(m_pair));
                e.insert(UnitaryFactor::new(&jy)?)
            }
        };
        let rotated = factor.apply(angle, &local);
        for (k, &i) in slot.iter().enumerate() {
            out[i] = rotated[k];
        }
    }
    PureState::new(state.basis().clone(), out)
}

/// `exp(-i theta1 Jy1 - i theta2 Jy2)` on a four-mode state.
pub fn rotate_local(state: &PureState, theta1: f64, theta2: f64) -> Result<PureState> {
    rotate_pair(&rotate_pair(state, 0, theta1)?, 1, theta2)
}

/// QFI matrix of a pure four-mode probe under the local `Jy` generators.
pub fn local_qfi_matrix(state: &PureState) -> Result<DMatrix<f64>> {
    let particles = match state.basis() {
        Basis::FourMode { particles } => *particles,
        other => {
            return Err(contract(format!(
                "expected a four-mode state, got {other:?}"
            )))
        }
    };
    let basis = FourModeBasis::new(particles);
    let jy1 = pair_operator(&basis, 0, SpinObservable::Jy);
    let jy2 = pair_operator(&basis, 1, SpinObservable::Jy);
    qfi_matrix(state, &[&jy1, &jy2])
}

/// Diagonal weights of a lossy four-mode state restricted to fixed pair particle numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct PairBlock {
    pub m1: usize,
    pub m2: usize,
    /// Keyed by `(n_b1, n_b2)`.
    pub weights: BTreeMap<(usize, usize), f64>,
}

impl PairBlock {
    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    /// Unnormalized `Jy` spectral sum on pair `pair`; the block contributes this directly to
    /// the QFI of the full mixture.
    pub fn jy_sum(&self, pair: usize) -> f64 {
        let (m_rot, m_other) = if pair == 0 {
            (self.m1, self.m2)
        } else {
            (self.m2, self.m1)
        };
        let sector = SpinSector::new(m_rot);
        let mut total = 0.0;
        for other in 0..=m_other {
            let slice: Vec<f64> = (0..=m_rot)
                .map(|n| {
                    let key = if pair == 0 { (n, other) } else { (other, n) };
                    self.weights.get(&key).copied().unwrap_or(0.0)
                })
                .collect();
            if slice.iter().any(|&w| w > 0.0) {
                total += jy_spectral_sum(sector, &slice, 0.0);
            }
        }
        total
    }

    /// Marginal weights over the Dicke index of pair 1.
    pub fn pair1_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m1 + 1];
        for (&(n1, _), w) in &self.weights {
            out[n1] += w;
        }
        out
    }
}

pub fn pair_blocks(weights: &FourModeWeights) -> Vec<PairBlock> {
    let mut blocks: BTreeMap<(usize, usize), PairBlock> = BTreeMap::new();
    for (occ, &w) in weights.weights() {
        let key = (occ[0] + occ[1], occ[2] + occ[3]);
        blocks
            .entry(key)
            .or_insert_with(|| PairBlock {
                m1: key.0,
                m2: key.1,
                weights: BTreeMap::new(),
            })
            .weights
            .insert((occ[1], occ[3]), w);
    }
    blocks.into_values().collect()
}

fn doubled_loss(n_particles: usize, losses: usize) -> Result<FourModeWeights> {
    if !n_particles.is_multiple_of(4) {
        return Err(domain(format!(
            "doubled twin-Fock state needs N divisible by 4, got {n_particles}"
        )));
    }
    if losses >= n_particles {
        return Err(domain(format!(
            "cannot lose {losses} of {n_particles} particles"
        )));
    }
    let q = n_particles / 4;
    four_mode_loss([q, q, q, q], losses)
}

/// QFI matrix of the lossy doubled twin-Fock state under the local `Jy` generators. The state
/// is diagonal in the occupation basis and `Jy1`, `Jy2` never connect the same pair of
/// occupations, so the off-diagonal entry vanishes identically.
pub fn lossy_doubled_qfi_matrix(n_particles: usize, losses: usize) -> Result<Matrix2<f64>> {
    let weights = doubled_loss(n_particles, losses)?;
    let blocks = pair_blocks(&weights);
    let f11: f64 = blocks.iter().map(|b| b.jy_sum(0)).sum();
    let f22: f64 = blocks.iter().map(|b| b.jy_sum(1)).sum();
    Ok(Matrix2::new(f11, 0.0, 0.0, f22))
}

pub fn lossy_doubled_qfi11(n_particles: usize, losses: usize) -> Result<f64> {
    let f = lossy_doubled_qfi_matrix(n_particles, losses)?;
    let scale = f[(0, 0)].abs().max(1.0);
    if (f[(0, 0)] - f[(1, 1)]).abs() > 1e-10 * scale {
        return Err(crate::Error::Numerical {
            context: "pair exchange symmetry of the lossy doubled state",
            residual: (f[(0, 0)] - f[(1, 1)]).abs() / scale,
        });
    }
    Ok(f[(0, 0)])
}

/// Generalized SNR for `theta1` from the local readouts `{Jx, Jz^2, (J+^2 + h.c.)/2,
/// (Jz J+ + h.c.)/2}` of pair 1 on the lossy doubled twin-Fock state. These observables see
/// only the pair-1 marginal, a mixture over `M1` of Dicke-diagonal states.
pub fn local_readout_snr(
    n_particles: usize,
    losses: usize,
    theta1: f64,
) -> Result<MomentMatrixResult> {
    let weights = doubled_loss(n_particles, losses)?;
    let mut marginals: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for block in pair_blocks(&weights) {
        let m = block.pair1_marginal();
        let entry = marginals
            .entry(block.m1)
            .or_insert_with(|| vec![0.0; m.len()]);
        for (e, w) in entry.iter_mut().zip(m) {
            *e += w;
        }
    }
    let readouts = [
        SpinObservable::Jx,
        SpinObservable::JzSquared,
        SpinObservable::RaiseSquared,
        SpinObservable::JzRaise,
    ];
    let mut sums = MomentSums::zeros(1, readouts.len());
    for (m1, w) in marginals {
        let block_weight: f64 = w.iter().sum();
        if block_weight <= 0.0 {
            continue;
        }
        let sector = SpinSector::new(m1);
        let ops = build_spin_operators(sector);
        let u = ops.jy.rotation(theta1)?;
        let mut rho = CMatrix::zeros(m1 + 1, m1 + 1);
        for (i, wi) in w.iter().enumerate() {
            rho[(i, i)] = C64::new(wi / block_weight, 0.0);
        }
        let rho = &u * rho * u.adjoint();
        let mats: Vec<CMatrix> = readouts.iter().map(|o| o.matrix(sector)).collect();
        let obs: Vec<&CMatrix> = mats.iter().collect();
        let block = MomentSums::from_state(
            &crate::metrology::EvolvedState::Mixed(rho),
            &[ops.jy.matrix()],
            &obs,
        );
        sums.add_scaled(&block, block_weight);
    }
    Ok(sums.finish())
}

/// Closed-form gradiometry quantities for the doubled twin-Fock probe read out with
/// `{Jz1^2, (J+1^2 + h.c.)/2, Jz2^2, (J+2^2 + h.c.)/2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradiometry {
    pub t: f64,
    pub g: f64,
    pub h: f64,
    /// `d<O_1>/dtheta1 = -d<O_2>/dtheta1`.
    pub derivative: f64,
    /// Upper-left block of the covariance.
    pub covariance: Matrix2<f64>,
    pub determinant: f64,
    /// `C11 + C22 + 2 C12`.
    pub pair_sum: f64,
    pub m11: f64,
    /// `sin 2 theta1 = 0`: `m11` is the limit value, not the ratio.
    pub limit: bool,
}

pub fn gradiometry_moment_matrix(n_particles: usize, theta1: f64) -> Result<Gradiometry> {
    if !n_particles.is_multiple_of(4) || n_particles == 0 {
        return Err(domain(format!(
            "gradiometry needs N > 0 divisible by 4, got {n_particles}"
        )));
    }
    let q = n_particles as f64 / 4.0;
    let t = 0.5 * q * (q + 1.0);
    let g = (3.0 * q.powi(4) + 6.0 * q.powi(3) + q * q - 2.0 * q) / 8.0;
    let h = (q.powi(4) + 2.0 * q.powi(3) + 3.0 * q * q + 2.0 * q) / 8.0;
    let (s, c) = theta1.sin_cos();
    let (s2, c2) = (s * s, c * c);
    let c11 = s2 * s2 * g + t * c2 * s2 - t * t * s2 * s2;
    let c22 = (1.0 + c2 * c2) * g + t * c2 * s2 - 2.0 * h * c2 - t * t * s2 * s2;
    let c12 = c2 * s2 * (g - t) - h * s2 + t * t * s2 * s2;
    let covariance = Matrix2::new(c11, c12, c12, c22);

    let nf = n_particles as f64;
    let sin2 = (2.0 * theta1).sin();
    let derivative = nf / 8.0 * (q + 1.0) * sin2;
    let determinant = sin2 * sin2 / 16.0 * q * q * (q + 1.0).powi(2) * (q + 2.0) * (q - 1.0);
    let pair_sum = 0.5 * q * (q + 2.0) * (q + 1.0) * (q - 1.0);
    let limit_value = nf / 8.0 * (nf + 4.0);
    let limit = sin2.abs() < 1e-12;
    let m11 = if limit {
        limit_value
    } else {
        (nf / 8.0 * (q + 1.0)).powi(2) * sin2 * sin2 * pair_sum / determinant
    };
    Ok(Gradiometry {
        t,
        g,
        h,
        derivative,
        covariance,
        determinant,
        pair_sum,
        m11,
        limit,
    })
}

/// The same moment matrix from explicit matrix elements of the four-mode operators on the
/// rotated doubled twin-Fock state.
pub fn gradiometry_direct(
    n_particles: usize,
    theta1: f64,
    theta2: f64,
) -> Result<MomentMatrixResult> {
    let probe = doubled_tf(n_particles)?;
    let state = rotate_local(&probe, theta1, theta2)?;
    let basis = FourModeBasis::new(n_particles);
    let [p1, p2] = local_generators(&basis);
    let observables: [&dyn LinearAction; 4] = [&p1.jz_sq, &p1.raise_sq, &p2.jz_sq, &p2.raise_sq];
    let generators: [&dyn LinearAction; 2] = [&p1.jy, &p2.jy];
    Ok(MomentSums::from_pure_actions(state.amplitudes(), &generators, &observables).finish())
}

/// Checks `e^{-i pi/2 Jx} e^{-i t2 Jz} e^{i pi/2 Jx} e^{i pi/2 Jx} e^{-i t1 Jz} e^{-i pi/2 Jx}
/// = e^{-i (t1 - t2) Jy}` in the two-mode sector of `n_particles`.
pub fn sequential_identity_check(n_particles: usize, theta1: f64, theta2: f64) -> Result<bool> {
    Ok(sequential_identity_residual(n_particles, theta1, theta2)? <= SEQUENTIAL_TOL)
}

pub fn sequential_identity_residual(n_particles: usize, theta1: f64, theta2: f64) -> Result<f64> {
    use std::f64::consts::FRAC_PI_2;
    let ops = build_spin_operators(SpinSector::new(n_particles));
    let x_fwd = ops.jx.rotation(FRAC_PI_2)?;
    let x_back = ops.jx.rotation(-FRAC_PI_2)?;
    let z1 = ops.jz.rotation(theta1)?;
    let z2 = ops.jz.rotation(theta2)?;
    let lhs = &x_fwd * z2 * &x_back * &x_back * z1 * &x_fwd;
    let rhs = ops.jy.rotation(theta1 - theta2)?;
    Ok(max_abs(&(lhs - rhs)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrology::qfi_pure;

    #[test]
    fn basis_dimension_and_order() {
        for m in 0..8 {
            let b = FourModeBasis::new(m);
            assert_eq!(b.dim(), (m + 1) * (m + 2) * (m + 3) / 6);
            assert!(b.states().windows(2).all(|w| w[0] < w[1]));
            for (i, s) in b.states().iter().enumerate() {
                assert_eq!(b.index_of(s), Some(i));
            }
        }
    }

    #[test]
    fn split_state_small_case() {
        let s = split_state(2).unwrap();
        let b = FourModeBasis::new(2);
        for occ in [[1, 1, 0, 0], [1, 0, 0, 1], [0, 1, 1, 0], [0, 0, 1, 1]] {
            let a = s.amplitudes()[b.index_of(&occ).unwrap()];
            assert!((a.re - 0.5).abs() < 1e-15 && a.im == 0.0);
        }
        assert!(split_state(3).is_err());
    }

    #[test]
    fn split_state_norm() {
        for n in [8, 16, 32, 64] {
            assert!((split_state(n).unwrap().amplitudes().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn doubled_tf_point_mass() {
        let s = doubled_tf(4).unwrap();
        assert_eq!(s.dim(), 35);
        let b = FourModeBasis::new(4);
        assert_eq!(
            s.amplitudes()[b.index_of(&[1, 1, 1, 1]).unwrap()],
            C64::new(1.0, 0.0)
        );
        assert!(doubled_tf(6).is_err());
    }

    #[test]
    fn local_generators_commute_and_embed() {
        let basis = FourModeBasis::new(8);
        let [p1, p2] = local_generators(&basis);
        assert!(p1.jy.commutator_norm(&p2.jy) < 1e-12);
        assert!(p1.jz_sq.commutator_norm(&p2.raise_sq) < 1e-12);

        let dense = p1.jy.to_dense();
        let two_mode = SpinObservable::Jy.matrix(SpinSector::new(5));
        // Pair 2 holds (a2, b2) = (2, 1), pair 1 sweeps its Dicke index.
        let idx: Vec<usize> = (0..=5)
            .map(|n| basis.index_of(&[5 - n, n, 2, 1]).unwrap())
            .collect();
        for (i, &r) in idx.iter().enumerate() {
            for (j, &c) in idx.iter().enumerate() {
                assert!((dense[(r, c)] - two_mode[(i, j)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn doubled_tf_qfi_matrix() {
        for n in [8usize, 16, 32] {
            let expected = (n * n + 4 * n) as f64 / 8.0;
            let f = local_qfi_matrix(&doubled_tf(n).unwrap()).unwrap();
            assert!((f[(0, 0)] - expected).abs() < 1e-9 * expected);
            assert!((f[(1, 1)] - expected).abs() < 1e-9 * expected);
            assert!(f[(0, 1)].abs() < 1e-10);
        }
        let basis = FourModeBasis::new(8);
        let [p1, _] = local_generators(&basis);
        assert!(qfi_pure(&doubled_tf(8).unwrap(), &p1.jz) < 1e-12);
    }

    #[test]
    fn lossless_doubled_qfi11() {
        assert!((lossy_doubled_qfi11(64, 0).unwrap() - 544.0).abs() < 1e-9);
        let k1 = lossy_doubled_qfi11(64, 1).unwrap();
        assert!(k1 > 32.0 && k1 < 544.0);
        assert!(lossy_doubled_qfi11(8, 8).is_err());
        assert!(lossy_doubled_qfi11(10, 1).is_err());
    }

    #[test]
    fn lossy_doubled_matrix_is_scalar() {
        for k in 0..=6 {
            let f = lossy_doubled_qfi_matrix(32, k).unwrap();
            assert!((f[(0, 0)] - f[(1, 1)]).abs() < 1e-10 * f[(0, 0)]);
            assert_eq!(f[(0, 1)], 0.0);
        }
    }

    #[test]
    fn block_weights_sum_to_one() {
        let w = doubled_loss(16, 5).unwrap();
        let total: f64 = pair_blocks(&w).iter().map(PairBlock::total).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradiometry_closed_forms() {
        let r = gradiometry_moment_matrix(64, 0.3).unwrap();
        assert!((r.m11 - 544.0).abs() < 1e-9 * 544.0);
        let c = r.covariance;
        assert!((c.determinant() - r.determinant).abs() < 1e-9 * r.determinant.abs());
        let sum = c[(0, 0)] + c[(1, 1)] + 2.0 * c[(0, 1)];
        assert!((sum - r.pair_sum).abs() < 1e-9 * r.pair_sum);
        let at_zero = gradiometry_moment_matrix(64, 0.0).unwrap();
        assert!(at_zero.limit && at_zero.m11 == 544.0);
    }

    #[test]
    fn gradiometry_matches_matrix_elements() {
        for n in [8usize, 16] {
            for theta in [0.2, 0.9] {
                let closed = gradiometry_moment_matrix(n, theta).unwrap();
                let direct = gradiometry_direct(n, theta, 0.0).unwrap();
                for (i, j) in [(0, 0), (0, 1), (1, 1)] {
                    let a = closed.covariance[(i, j)];
                    let b = direct.covariance[(i, j)];
                    assert!(
                        (a - b).abs() < 1e-8 * a.abs().max(1.0),
                        "N={n} θ={theta} ({i},{j}): {a} vs {b}"
                    );
                }
                assert!(
                    (direct.derivatives[(0, 0)] - closed.derivative).abs()
                        < 1e-8 * closed.derivative.abs()
                );
                assert!(
                    (direct.derivatives[(0, 1)] + closed.derivative).abs()
                        < 1e-8 * closed.derivative.abs()
                );
                assert!((direct.snr[(0, 0)] - closed.m11).abs() < 1e-8 * closed.m11);
            }
        }
    }

    #[test]
    fn sequential_identity() {
        assert!(sequential_identity_check(8, 0.5, 0.1).unwrap());
        assert!(sequential_identity_check(16, 1.7, -0.4).unwrap());
        assert!(sequential_identity_residual(8, 0.3, 0.3).unwrap() < 1e-10);
    }

    #[test]
    fn rotate_pair_preserves_norm_and_matches_dense() {
        let s = split_state(6).unwrap();
        let r = rotate_local(&s, 0.4, -1.1).unwrap();
        assert!((r.amplitudes().norm() - 1.0).abs() < 1e-12);
        let basis = FourModeBasis::new(6);
        let [p1, p2] = local_generators(&basis);
        let g = p1.jy.to_dense() * C64::new(0.4, 0.0) + p2.jy.to_dense() * C64::new(-1.1, 0.0);
        let u = UnitaryFactor::new(&g).unwrap().unitary(1.0);
        let expected = u * s.amplitudes();
        assert!((expected - r.amplitudes()).norm() < 1e-11);
    }
}
