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

//! Quantum and classical Fisher information, method-of-moments errors and moment matrices.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{contract, domain, Result};
use crate::spin_algebra::{
    max_abs, Basis, HermitianOperator, LinearAction, SpinObservable, SpinSector,
};
use crate::states::{phase_diffused, DickeMixture, PureState};
use crate::{CMatrix, CVector, C64};

/// Pairs of eigenvalues whose sum is below this are treated as outside the support.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Commutators larger than this reject a multi-parameter QFI request.
pub const COMMUTATION_TOL: f64 = 1e-10;
/// Outcomes with smaller probability are dropped from the classical Fisher sum.
pub const OUTCOME_FLOOR: f64 = 1e-14;
/// Step of the central difference used for classical Fisher information.
pub const FD_STEP: f64 = 1e-5;
/// Measurement completeness tolerance.
pub const COMPLETENESS_TOL: f64 = 1e-10;
/// Covariance eigenvalues below this fraction of the largest are discarded.
pub const PINV_RTOL: f64 = 1e-10;
/// Base step of the Richardson limit at points where the signal vanishes.
pub const LIMIT_STEP: f64 = 1e-4;

const ZERO_SIGNAL_TOL: f64 = 1e-12;
/// Relative change between the `h` and `2h` averages beyond which a limit is treated as a pole.
const POLE_RTOL: f64 = 0.1;

/// Initial state of a parametrized family.
#[derive(Clone, Debug)]
pub enum Probe {
    Pure(PureState),
    Mixed(DickeMixture),
}

impl Probe {
    pub fn basis(&self) -> Basis {
        match self {
            Probe::Pure(s) => s.basis().clone(),
            Probe::Mixed(m) => Basis::Dicke(m.sector()),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis().dim()
    }
}

impl From<PureState> for Probe {
    fn from(s: PureState) -> Self {
        Probe::Pure(s)
    }
}

impl From<DickeMixture> for Probe {
    fn from(m: DickeMixture) -> Self {
        Probe::Mixed(m)
    }
}

/// State after evolution; mixtures become dense density matrices once rotated.
#[derive(Clone, Debug)]
pub enum EvolvedState {
    Pure(CVector),
    Mixed(CMatrix),
}

impl EvolvedState {
    /// `Tr(rho A B)`.
    pub fn correlator(&self, a: &CMatrix, b: &CMatrix) -> C64 {
        match self {
            EvolvedState::Pure(psi) => (a * psi).dotc(&(b * psi)),
            EvolvedState::Mixed(rho) => trace_product(&(rho * a), b),
        }
    }

    pub fn expectation(&self, a: &CMatrix) -> f64 {
        match self {
            EvolvedState::Pure(psi) => psi.dotc(&(a * psi)).re,
            EvolvedState::Mixed(rho) => trace_product(rho, a).re,
        }
    }

    /// `<(A - <A>)^2>`, computed in centered form.
    pub fn variance(&self, a: &CMatrix) -> f64 {
        let mean = self.expectation(a);
        let mut centered = a.clone();
        for i in 0..centered.nrows() {
            centered[(i, i)] -= C64::new(mean, 0.0);
        }
        match self {
            EvolvedState::Pure(psi) => (&centered * psi).norm_squared(),
            EvolvedState::Mixed(rho) => trace_product(&(rho * &centered), &centered).re,
        }
    }

    /// `<b|rho|b>`.
    pub fn probability(&self, b: &CVector) -> f64 {
        match self {
            EvolvedState::Pure(psi) => b.dotc(psi).norm_sqr(),
            EvolvedState::Mixed(rho) => b.dotc(&(rho * b)).re,
        }
    }

    /// Diagonal of the state in its own basis.
    pub fn populations(&self) -> Vec<f64> {
        match self {
            EvolvedState::Pure(psi) => psi.iter().map(|a| a.norm_sqr()).collect(),
            EvolvedState::Mixed(rho) => (0..rho.nrows()).map(|i| rho[(i, i)].re).collect(),
        }
    }
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Probe together with one generator per phase; `theta` acts as `prod_k exp(-i theta_k G_k)`.
#[derive(Clone, Debug)]
pub struct ParametrizedFamily {
    probe: Probe,
    generators: Vec<HermitianOperator>,
}

impl ParametrizedFamily {
    pub fn new(probe: impl Into<Probe>, generators: Vec<HermitianOperator>) -> Result<Self> {
        let probe = probe.into();
        if generators.is_empty() {
            return Err(contract("a family needs at least one generator"));
        }
        let basis = probe.basis();
        if let Some(g) = generators.iter().find(|g| *g.basis() != basis) {
            return Err(contract(format!(
                "generator basis {:?} differs from probe basis {basis:?}",
                g.basis()
            )));
        }
        Ok(Self { probe, generators })
    }

    pub fn single(probe: impl Into<Probe>, generator: HermitianOperator) -> Result<Self> {
        Self::new(probe, vec![generator])
    }

    /// Probe evolved under `exp(-i theta Jy)` in its own Dicke sector.
    pub fn jy_rotation(probe: impl Into<Probe>) -> Result<Self> {
        let probe = probe.into();
        let sector = match probe.basis() {
            Basis::Dicke(sector) => sector,
            other => {
                return Err(contract(format!(
                    "Jy rotation needs a Dicke basis, got {other:?}"
                )))
            }
        };
        Self::single(probe, SpinObservable::Jy.operator(sector))
    }

    pub fn probe(&self) -> &Probe {
        &self.probe
    }

    pub fn generators(&self) -> &[HermitianOperator] {
        &self.generators
    }

    pub fn n_params(&self) -> usize {
        self.generators.len()
    }

    pub fn evolved(&self, angles: &[f64]) -> Result<EvolvedState> {
        if angles.len() != self.generators.len() {
            return Err(contract(format!(
                "{} angles for {} generators",
                angles.len(),
                self.generators.len()
            )));
        }
        match &self.probe {
            Probe::Pure(s) => {
                let mut psi = s.amplitudes().clone();
                for (g, &angle) in self.generators.iter().zip(angles) {
                    psi = g.factor()?.apply(angle, &psi);
                }
                Ok(EvolvedState::Pure(psi))
            }
            Probe::Mixed(m) => {
                let mut rho = m.density_matrix();
                for (g, &angle) in self.generators.iter().zip(angles) {
                    let u = g.factor()?.unitary(angle);
                    rho = &u * rho * u.adjoint();
                }
                Ok(EvolvedState::Mixed(rho))
            }
        }
    }
}

/// `4 Var(G)` for a pure state.
///
/// # Panics
/// If the generator and state dimensions differ.
pub fn qfi_pure<G: LinearAction + ?Sized>(state: &PureState, generator: &G) -> f64 {
    assert_eq!(
        state.dim(),
        generator.dim(),
        "state and generator dimensions differ"
    );
    let psi = state.amplitudes();
    let g_psi = generator.apply(psi);
    let mean = psi.dotc(&g_psi).re;
    4.0 * (g_psi.norm_squared() - mean * mean).max(0.0)
}

/// Spectral QFI sum for a state diagonal in the Dicke basis. The weights need not be
/// normalized; the sum is homogeneous of degree one in them.
pub(crate) fn diagonal_spectral_sum(weights: &[f64], generator: &CMatrix, support_tol: f64) -> f64 {
    let d = weights.len();
    let mut total = 0.0;
    for j in 0..d {
        for k in (j + 1)..d {
            let s = weights[j] + weights[k];
            if s <= support_tol {
                continue;
            }
            let diff = weights[j] - weights[k];
            if diff == 0.0 {
                continue;
            }
            total += diff * diff / s * generator[(j, k)].norm_sqr();
        }
    }
    4.0 * total
}

/// Same sum specialized to `Jy`, which only couples neighbouring Dicke states.
pub(crate) fn jy_spectral_sum(sector: SpinSector, weights: &[f64], support_tol: f64) -> f64 {
    let mut total = 0.0;
    for n in 0..weights.len().saturating_sub(1) {
        let s = weights[n] + weights[n + 1];
        if s <= support_tol {
            continue;
        }
        let diff = weights[n] - weights[n + 1];
        total += diff * diff / s * sector.jy_coupling_sq(n);
    }
    4.0 * total
}

/// QFI of a Dicke-diagonal mixture for an arbitrary generator in the same sector.
pub fn qfi_mixed(
    mixture: &DickeMixture,
    generator: &HermitianOperator,
    support_tol: f64,
) -> Result<f64> {
    if *generator.basis() != Basis::Dicke(mixture.sector()) {
        return Err(contract("generator basis differs from mixture sector"));
    }
    Ok(diagonal_spectral_sum(
        mixture.weights(),
        generator.matrix(),
        support_tol,
    ))
}

/// QFI of raw Dicke weights; rejects weights that are not a probability vector.
pub fn qfi_diagonal(
    sector: SpinSector,
    weights: &[f64],
    generator: &HermitianOperator,
    support_tol: f64,
) -> Result<f64> {
    let mixture = DickeMixture::new(sector, weights.to_vec())?;
    qfi_mixed(&mixture, generator, support_tol)
}

/// QFI of a Dicke-diagonal mixture under `Jy` in linear time.
pub fn qfi_mixed_jy(mixture: &DickeMixture, support_tol: f64) -> f64 {
    jy_spectral_sum(mixture.sector(), mixture.weights(), support_tol)
}

/// QFI matrix of a general density matrix from its eigendecomposition.
pub fn qfi_spectral_matrix(
    rho: &CMatrix,
    generators: &[&CMatrix],
    support_tol: f64,
) -> Result<DMatrix<f64>> {
    let d = rho.nrows();
    if rho.ncols() != d || generators.iter().any(|g| g.nrows() != d || g.ncols() != d) {
        return Err(contract(
            "density matrix and generators must be square of equal size",
        ));
    }
    let eigen = rho.clone().symmetric_eigen();
    let lambda: Vec<f64> = eigen.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let v = eigen.eigenvectors;
    let rotated: Vec<CMatrix> = generators.iter().map(|g| v.adjoint() * *g * &v).collect();

    let p = generators.len();
    let mut out = DMatrix::zeros(p, p);
    for j in 0..d {
        for k in 0..d {
            let s = lambda[j] + lambda[k];
            if s <= support_tol {
                continue;
            }
            let diff = lambda[j] - lambda[k];
            let c = 2.0 * diff * diff / s;
            if c == 0.0 {
                continue;
            }
            for a in 0..p {
                for b in a..p {
                    out[(a, b)] += c * (rotated[a][(j, k)] * rotated[b][(k, j)]).re;
                }
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            out[(a, b)] = out[(b, a)];
        }
    }
    Ok(out)
}

pub fn qfi_spectral(rho: &CMatrix, generator: &CMatrix, support_tol: f64) -> Result<f64> {
    Ok(qfi_spectral_matrix(rho, &[generator], support_tol)?[(0, 0)])
}

/// Multi-parameter QFI of a pure state, `4 Re Cov(G_a, G_b)`, for commuting generators.
pub fn qfi_matrix<G: LinearAction>(state: &PureState, generators: &[&G]) -> Result<DMatrix<f64>> {
    for (a, ga) in generators.iter().enumerate() {
        if ga.dim() != state.dim() {
            return Err(contract("generator and state dimensions differ"));
        }
        for gb in &generators[a + 1..] {
            let norm = ga.commutator_norm(gb);
            if norm > COMMUTATION_TOL {
                return Err(contract(format!(
                    "generators do not commute (|[Ga, Gb]| = {norm:e})"
                )));
            }
        }
    }
    let psi = state.amplitudes();
    let applied: Vec<CVector> = generators.iter().map(|g| g.apply(psi)).collect();
    let means: Vec<f64> = applied.iter().map(|w| psi.dotc(w).re).collect();
    let p = generators.len();
    let mut out = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let value = 4.0 * (applied[a].dotc(&applied[b]).re - means[a] * means[b]);
            out[(a, b)] = value;
            out[(b, a)] = value;
        }
    }
    Ok(out)
}

/// Projective measurement.
#[derive(Clone, Debug)]
pub enum Measurement {
    /// Rank-one projectors onto the given orthonormal vectors.
    Basis(Vec<CVector>),
    /// Occupation numbers, i.e. the basis the state is written in.
    Occupation,
}

impl Measurement {
    /// Checks that the projectors resolve the identity.
    pub fn basis(vectors: Vec<CVector>) -> Result<Self> {
        let dim = vectors.first().map_or(0, |v| v.len());
        if vectors.len() != dim || vectors.iter().any(|v| v.len() != dim) {
            return Err(contract("measurement needs one vector per basis dimension"));
        }
        let mut sum = CMatrix::zeros(dim, dim);
        for v in &vectors {
            sum += v * v.adjoint();
        }
        let defect = max_abs(&(sum - CMatrix::identity(dim, dim)));
        if defect > COMPLETENESS_TOL {
            return Err(contract(format!(
                "projectors are not complete (defect {defect:e})"
            )));
        }
        Ok(Measurement::Basis(vectors))
    }

    pub fn probabilities(&self, state: &EvolvedState) -> Vec<f64> {
        match self {
            Measurement::Basis(vectors) => vectors.iter().map(|b| state.probability(b)).collect(),
            Measurement::Occupation => state.populations(),
        }
    }
}

/// Classical Fisher information of a one-parameter family, by central differences.
pub fn classical_fisher(
    family: &ParametrizedFamily,
    measurement: &Measurement,
    theta: f64,
) -> Result<f64> {
    if family.n_params() != 1 {
        return Err(contract(
            "classical Fisher information needs a one-parameter family",
        ));
    }
    if let Measurement::Basis(vectors) = measurement {
        if vectors.len() != family.probe().dim() {
            return Err(contract("measurement dimension differs from the family"));
        }
    }
    let q = measurement.probabilities(&family.evolved(&[theta])?);
    let plus = measurement.probabilities(&family.evolved(&[theta + FD_STEP])?);
    let minus = measurement.probabilities(&family.evolved(&[theta - FD_STEP])?);
    let mut total = 0.0;
    for i in 0..q.len() {
        if q[i] < OUTCOME_FLOOR {
            continue;
        }
        let dq = (plus[i] - minus[i]) / (2.0 * FD_STEP);
        total += dq * dq / q[i];
    }
    Ok(total)
}

/// Method-of-moments error; `ZeroSignal` where `d<A>/dtheta` vanishes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MomError {
    Finite(f64),
    ZeroSignal,
}

impl MomError {
    pub fn value(&self) -> f64 {
        match self {
            MomError::Finite(v) => *v,
            MomError::ZeroSignal => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, MomError::Finite(_))
    }
}

/// `i <[G, A]>`.
pub fn signal_derivative(state: &EvolvedState, generator: &CMatrix, observable: &CMatrix) -> f64 {
    -2.0 * state.correlator(generator, observable).im
}

/// `Var(A) / (d<A>/dtheta)^2` at `theta`.
pub fn mom_error(
    family: &ParametrizedFamily,
    observable: &HermitianOperator,
    theta: f64,
) -> Result<MomError> {
    check_single(family, observable)?;
    let state = family.evolved(&[theta])?;
    let g = family.generators()[0].matrix();
    let derivative = signal_derivative(&state, g, observable.matrix());
    let scale = (max_abs(g) * max_abs(observable.matrix())).max(1.0);
    if derivative.abs() <= ZERO_SIGNAL_TOL * scale {
        return Ok(MomError::ZeroSignal);
    }
    Ok(MomError::Finite(
        state.variance(observable.matrix()) / (derivative * derivative),
    ))
}

/// Limit of the moment error at a point where the signal vanishes: symmetric averages at
/// `h` and `2h` combined by one Richardson step. Returns infinity when, at every step, the
/// signal also vanishes at a neighbouring point or the averages grow like a pole.
pub fn mom_error_limit(
    family: &ParametrizedFamily,
    observable: &HermitianOperator,
    theta: f64,
) -> Result<f64> {
    let limit = symmetric_limit(theta, |t| {
        Ok(match mom_error(family, observable, t)? {
            MomError::Finite(v) => Some(v),
            MomError::ZeroSignal => None,
        })
    })?;
    Ok(limit.unwrap_or(f64::INFINITY))
}

/// Moment error, falling back to the limit where the signal vanishes.
pub fn mom_error_or_limit(
    family: &ParametrizedFamily,
    observable: &HermitianOperator,
    theta: f64,
) -> Result<f64> {
    match mom_error(family, observable, theta)? {
        MomError::Finite(v) => Ok(v),
        MomError::ZeroSignal => mom_error_limit(family, observable, theta),
    }
}

/// Symmetric averages `((g(x+h) + g(x-h))/2, (g(x+2h) + g(x-2h))/2)`; `None` as soon as `g`
/// does.
fn symmetric_averages<F>(x: f64, h: f64, g: &mut F) -> Result<Option<(f64, f64)>>
where
    F: FnMut(f64) -> Result<Option<f64>>,
{
    let mut values = [0.0; 4];
    for (v, t) in values
        .iter_mut()
        .zip([x + h, x - h, x + 2.0 * h, x - 2.0 * h])
    {
        match g(t)? {
            Some(value) => *v = value,
            None => return Ok(None),
        }
    }
    Ok(Some((
        0.5 * (values[0] + values[1]),
        0.5 * (values[2] + values[3]),
    )))
}

fn richardson(near: f64, far: f64) -> f64 {
    (4.0 * near - far) / 3.0
}

/// Richardson limit of `g` at `x` from the first step in `LIMIT_STEP * {1, 10, 100}` whose
/// samples are all defined and whose averages agree to `POLE_RTOL`. Larger steps are needed
/// when the covariance is degenerate to below the pseudo-inverse cutoff close to `x`. `None`
/// if no step qualifies.
fn symmetric_limit<F>(x: f64, mut g: F) -> Result<Option<f64>>
where
    F: FnMut(f64) -> Result<Option<f64>>,
{
    for scale in [1.0, 10.0, 100.0] {
        match symmetric_averages(x, scale * LIMIT_STEP, &mut g)? {
            Some((near, far)) if (near - far).abs() <= POLE_RTOL * near.abs().max(far.abs()) => {
                return Ok(Some(richardson(near, far)));
            }
            _ => continue,
        }
    }
    Ok(None)
}

fn check_single(family: &ParametrizedFamily, observable: &HermitianOperator) -> Result<()> {
    if family.n_params() != 1 {
        return Err(contract("expected a one-parameter family"));
    }
    if *observable.basis() != family.probe().basis() {
        return Err(contract("observable basis differs from the family"));
    }
    Ok(())
}

/// Closed forms for a Dicke probe read out with `Jz^2`, at `theta -> 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jz2ReadoutLimit {
    /// `lim (Delta theta)^2`, infinite when the signal curvature vanishes.
    pub error_at_zero: f64,
    /// `1 / (error_at_zero F)` with `F = 2 (N^2/4 - m^2 + N/2)`.
    pub ratio_to_qfi: f64,
    /// `(1 - 2 m^2 / E)^2 / (4 m^2 + 1)` with `E = N^2/4 - m^2 + N/2`.
    pub ratio_approximation: f64,
    pub degenerate: bool,
}

pub fn theorem1_closed_forms(n_particles: usize, m: i64) -> Result<Jz2ReadoutLimit> {
    if n_particles == 0 || !n_particles.is_multiple_of(2) {
        return Err(domain(format!(
            "closed forms need even N > 0, got {n_particles}"
        )));
    }
    let half = (n_particles / 2) as f64;
    let mf = m as f64;
    if mf.abs() > half {
        return Err(domain(format!("|m| = {} exceeds N/2 = {half}", m.abs())));
    }
    let e = half * half + half - mf * mf;
    let d = e - 2.0 * mf * mf;
    let s: f64 = [1.0, -1.0]
        .iter()
        .map(|&u| (1.0 + 2.0 * u * mf).powi(2) * (half + u * mf + 1.0) * (half - u * mf))
        .sum();
    let ratio_approximation = (d / e).powi(2) / (4.0 * mf * mf + 1.0);
    if d == 0.0 {
        return Ok(Jz2ReadoutLimit {
            error_at_zero: f64::INFINITY,
            ratio_to_qfi: 0.0,
            ratio_approximation,
            degenerate: true,
        });
    }
    let error_at_zero = s / (4.0 * d * d);
    Ok(Jz2ReadoutLimit {
        error_at_zero,
        ratio_to_qfi: 1.0 / (error_at_zero * 2.0 * e),
        ratio_approximation,
        degenerate: false,
    })
}

/// Additive first and second moments of a set of observables together with the signal
/// derivatives. Sums over orthogonal blocks of a mixture are formed with `add`.
#[derive(Clone, Debug)]
pub struct MomentSums {
    means: DVector<f64>,
    /// Jordan moments `Re <O_i O_j>`.
    second: DMatrix<f64>,
    /// `derivatives[(k, i)] = i <[G_k, O_i]>`.
    derivatives: DMatrix<f64>,
}

impl MomentSums {
    pub fn zeros(n_params: usize, n_observables: usize) -> Self {
        Self {
            means: DVector::zeros(n_observables),
            second: DMatrix::zeros(n_observables, n_observables),
            derivatives: DMatrix::zeros(n_params, n_observables),
        }
    }

    pub fn from_state(
        state: &EvolvedState,
        generators: &[&CMatrix],
        observables: &[&CMatrix],
    ) -> Self {
        let p = generators.len();
        let q = observables.len();
        let mut sums = Self::zeros(p, q);
        match state {
            EvolvedState::Pure(psi) => {
                let applied: Vec<CVector> = observables.iter().map(|o| *o * psi).collect();
                let gen_applied: Vec<CVector> = generators.iter().map(|g| *g * psi).collect();
                sums.fill(
                    |i| psi.dotc(&applied[i]).re,
                    |i, j| applied[i].dotc(&applied[j]).re,
                    |k, i| -2.0 * gen_applied[k].dotc(&applied[i]).im,
                );
            }
            EvolvedState::Mixed(rho) => {
                let rho_o: Vec<CMatrix> = observables.iter().map(|o| rho * *o).collect();
                let rho_g: Vec<CMatrix> = generators.iter().map(|g| rho * *g).collect();
                sums.fill(
                    |i| trace_product(rho, observables[i]).re,
                    |i, j| trace_product(&rho_o[i], observables[j]).re,
                    |k, i| -2.0 * trace_product(&rho_g[k], observables[i]).im,
                );
            }
        }
        sums
    }

    /// Moments of a pure state from operators that only expose their action on vectors.
    pub fn from_pure_actions(
        psi: &CVector,
        generators: &[&dyn LinearAction],
        observables: &[&dyn LinearAction],
    ) -> Self {
        let applied: Vec<CVector> = observables.iter().map(|o| o.apply(psi)).collect();
        let gen_applied: Vec<CVector> = generators.iter().map(|g| g.apply(psi)).collect();
        let mut sums = Self::zeros(generators.len(), observables.len());
        sums.fill(
            |i| psi.dotc(&applied[i]).re,
            |i, j| applied[i].dotc(&applied[j]).re,
            |k, i| -2.0 * gen_applied[k].dotc(&applied[i]).im,
        );
        sums
    }

    fn fill(
        &mut self,
        mean: impl Fn(usize) -> f64,
        second: impl Fn(usize, usize) -> f64,
        derivative: impl Fn(usize, usize) -> f64,
    ) {
        let q = self.means.len();
        for i in 0..q {
            self.means[i] = mean(i);
            for j in i..q {
                let v = second(i, j);
                self.second[(i, j)] = v;
                self.second[(j, i)] = v;
            }
        }
        for k in 0..self.derivatives.nrows() {
            for i in 0..q {
                self.derivatives[(k, i)] = derivative(k, i);
            }
        }
    }

    /// `self += weight * other`.
    pub fn add_scaled(&mut self, other: &MomentSums, weight: f64) {
        self.means += &other.means * weight;
        self.second += &other.second * weight;
        self.derivatives += &other.derivatives * weight;
    }

    pub fn finish(self) -> MomentMatrixResult {
        let q = self.means.len();
        let mut covariance = &self.second - &self.means * self.means.transpose();
        covariance = (&covariance + covariance.transpose()) * 0.5;

        let eigen = covariance.clone().symmetric_eigen();
        let largest = eigen.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let scale = (0..q)
            .map(|i| self.second[(i, i)].abs())
            .fold(0.0_f64, f64::max);
        let cut = if largest <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
            f64::INFINITY
        } else {
            PINV_RTOL * largest
        };

        let mut pinv = DMatrix::zeros(q, q);
        let mut null = DMatrix::zeros(q, q);
        let mut retained_rank = 0;
        for (j, &l) in eigen.eigenvalues.iter().enumerate() {
            let v = eigen.eigenvectors.column(j);
            if l > cut {
                pinv += v * v.transpose() / l;
                retained_rank += 1;
            } else {
                null += v * v.transpose();
            }
        }
        let snr = &self.derivatives * &pinv * self.derivatives.transpose();

        let mut signal_outside_range = false;
        for k in 0..self.derivatives.nrows() {
            let row = self.derivatives.row(k).transpose();
            let norm = row.norm();
            if norm > 0.0 && (&null * &row).norm() > 1e-8 * norm {
                signal_outside_range = true;
            }
        }

        MomentMatrixResult {
            means: self.means,
            derivatives: self.derivatives,
            covariance,
            snr,
            retained_rank,
            signal_outside_range,
        }
    }
}

/// Generalized signal-to-noise matrix `D C^+ D^T`.
#[derive(Clone, Debug)]
pub struct MomentMatrixResult {
    pub means: DVector<f64>,
    pub derivatives: DMatrix<f64>,
    pub covariance: DMatrix<f64>,
    pub snr: DMatrix<f64>,
    pub retained_rank: usize,
    /// Some signal direction lies in the covariance kernel and was dropped by the
    /// pseudo-inverse.
    pub signal_outside_range: bool,
}

impl MomentMatrixResult {
    pub fn scalar(&self) -> f64 {
        self.snr[(0, 0)]
    }

    /// `1 / SNR`, infinite for a vanishing signal.
    pub fn error(&self) -> f64 {
        1.0 / self.scalar()
    }
}

pub fn moment_matrix(
    family: &ParametrizedFamily,
    observables: &[&HermitianOperator],
    angles: &[f64],
) -> Result<MomentMatrixResult> {
    if observables.is_empty() {
        return Err(contract("moment matrix needs at least one observable"));
    }
    let basis = family.probe().basis();
    if observables.iter().any(|o| *o.basis() != basis) {
        return Err(contract("observable basis differs from the family"));
    }
    let state = family.evolved(angles)?;
    let gens: Vec<&CMatrix> = family.generators().iter().map(|g| g.matrix()).collect();
    let obs: Vec<&CMatrix> = observables.iter().map(|o| o.matrix()).collect();
    Ok(MomentSums::from_state(&state, &gens, &obs).finish())
}

/// Scalar generalized SNR of a one-parameter family.
pub fn generalized_snr(
    family: &ParametrizedFamily,
    observables: &[&HermitianOperator],
    theta: f64,
) -> Result<MomentMatrixResult> {
    if family.n_params() != 1 {
        return Err(contract("expected a one-parameter family"));
    }
    moment_matrix(family, observables, &[theta])
}

/// SNR, replaced by its symmetric limit where every signal vanishes or the covariance loses
/// rank. A vanishing signal without a convergent limit gives 0.
pub fn generalized_snr_or_limit(
    family: &ParametrizedFamily,
    observables: &[&HermitianOperator],
    theta: f64,
) -> Result<f64> {
    let direct = generalized_snr(family, observables, theta)?;
    let signal = direct.derivatives.amax();
    let scale = max_abs(family.generators()[0].matrix())
        * observables
            .iter()
            .map(|o| max_abs(o.matrix()))
            .fold(1.0_f64, f64::max);
    let vanishing = signal <= ZERO_SIGNAL_TOL * scale.max(1.0);
    if !vanishing && direct.retained_rank == observables.len() {
        return Ok(direct.scalar());
    }
    let limit = symmetric_limit(theta, |t| {
        let r = generalized_snr(family, observables, t)?;
        Ok((r.retained_rank == observables.len()).then(|| r.scalar()))
    })?;
    Ok(match limit {
        Some(v) => v.max(0.0),
        None if vanishing => 0.0,
        None => direct.scalar(),
    })
}

/// `exp(-i pi/2 Jy)` applied to the twin-Fock state, the reference of the phase-diffusion
/// likelihood.
fn rotated_reference(sector: SpinSector) -> Result<PureState> {
    phase_diffused(sector, 0.0)
}

/// Posterior density on `grid` after one projection onto the rotated twin-Fock reference,
/// normalized by the trapezoid rule.
pub fn bayes_posterior(
    n_particles: usize,
    chi: f64,
    theta_true: f64,
    grid: &[f64],
    prior: &[f64],
) -> Result<Vec<f64>> {
    if grid.len() < 2 {
        return Err(domain("posterior grid needs at least two points"));
    }
    if prior.len() != grid.len() {
        return Err(contract("prior and grid lengths differ"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("posterior grid must be strictly increasing"));
    }
    if prior.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(domain("prior must be finite and non-negative"));
    }
    let sector = SpinSector::new(n_particles);
    let probe = phase_diffused(sector, chi)?;
    let reference = rotated_reference(sector)?;
    let jy = SpinObservable::Jy.operator(sector);
    let factor = jy.factor()?;
    let v = factor.eigenvectors();
    let a = v.adjoint() * reference.amplitudes();
    let b = v.adjoint() * probe.amplitudes();
    let lambda = factor.eigenvalues();

    let likelihood = |theta: f64| -> f64 {
        let phi = theta - theta_true;
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..a.len() {
            acc += a[k].conj() * C64::from_polar(1.0, -phi * lambda[k]) * b[k];
        }
        acc.norm_sqr()
    };
    let unnormalized: Vec<f64> = grid
        .iter()
        .zip(prior)
        .map(|(&t, &p)| p * likelihood(t))
        .collect();
    let z = trapezoid(grid, &unnormalized);
    if z.is_nan() || z <= 0.0 {
        return Err(domain("posterior vanishes on the grid"));
    }
    Ok(unnormalized.into_iter().map(|f| f / z).collect())
}

/// Flat prior on `[-pi/2, pi/2]`.
pub fn uniform_prior(grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&t| {
            if (-PI / 2.0..=PI / 2.0).contains(&t) {
                1.0 / PI
            } else {
                0.0
            }
        })
        .collect()
}

pub fn trapezoid(x: &[f64], f: &[f64]) -> f64 {
    x.windows(2)
        .zip(f.windows(2))
        .map(|(xs, fs)| 0.5 * (xs[1] - xs[0]) * (fs[0] + fs[1]))
        .sum()
}

/// QFI under `Jy` of the phase-diffused probe for each `chi`.
pub fn qfi_vs_chi(n_particles: usize, chis: &[f64]) -> Result<Vec<f64>> {
    let sector = SpinSector::new(n_particles);
    let jy = SpinObservable::Jy.operator(sector);
    chis.iter()
        .map(|&chi| Ok(qfi_pure(&phase_diffused(sector, chi)?, &jy)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::apply_loss;
    use crate::spin_algebra::{parity_operator, phase_basis, quadratic_observables};
    use crate::states::{coherent_x, dicke_state, twin_fock, Imbalance};
    use crate::Error;
    use proptest::prelude::*;

    fn jy(sector: SpinSector) -> HermitianOperator {
        SpinObservable::Jy.operator(sector)
    }

    #[test]
    fn twin_fock_and_dicke_qfi() {
        let s40 = SpinSector::new(40);
        assert!((qfi_pure(&twin_fock(s40).unwrap(), &jy(s40)) - 840.0).abs() < 1e-9);
        let m1 = dicke_state(s40, Imbalance::new(1)).unwrap();
        assert!((qfi_pure(&m1, &jy(s40)) - 838.0).abs() < 1e-9);
    }

    #[test]
    fn coherent_state_is_shot_noise_limited() {
        let s = SpinSector::new(30);
        let f = qfi_pure(&coherent_x(s), &SpinObservable::Jz.operator(s));
        assert!((f - 30.0).abs() < 1e-9);
    }

    #[test]
    fn lossy_twin_fock_values() {
        let cases = [(40, 0, 840.0), (40, 1, 399.0), (90, 1, 2024.0)];
        for (n, k, expected) in cases {
            let mix = apply_loss(n, n / 2, k).unwrap();
            let f = qfi_mixed_jy(&mix, SUPPORT_TOL);
            assert!((f - expected).abs() < 1e-8 * expected, "N={n} K={k}: {f}");
        }
    }

    #[test]
    fn jy_path_matches_dense_paths() {
        let mix = apply_loss(12, 6, 3).unwrap();
        let sector = mix.sector();
        let fast = qfi_mixed_jy(&mix, SUPPORT_TOL);
        let diag = qfi_mixed(&mix, &jy(sector), SUPPORT_TOL).unwrap();
        let dense = qfi_spectral(&mix.density_matrix(), jy(sector).matrix(), SUPPORT_TOL).unwrap();
        assert!((fast - diag).abs() < 1e-10 * fast);
        assert!((fast - dense).abs() < 1e-9 * fast);
    }

    #[test]
    fn non_normalized_weights_are_rejected() {
        let s = SpinSector::new(2);
        let err = qfi_diagonal(s, &[0.5, 0.2, 0.2], &jy(s), SUPPORT_TOL).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn non_commuting_generators_are_rejected() {
        let s = SpinSector::new(4);
        let tf = twin_fock(s).unwrap();
        let jx = SpinObservable::Jx.operator(s);
        let jy = jy(s);
        assert!(matches!(
            qfi_matrix(&tf, &[&jx, &jy]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn qfi_matrix_diagonal_is_pure_qfi() {
        let s = SpinSector::new(6);
        let state = dicke_state(s, Imbalance::new(1)).unwrap();
        let jz = SpinObservable::Jz.operator(s);
        let jz2 = SpinObservable::JzSquared.operator(s);
        let m = qfi_matrix(&state, &[&jz, &jz2]).unwrap();
        assert!(m.amax() < 1e-12);
    }

    #[test]
    fn phase_basis_cfi_saturates_qfi() {
        let s = SpinSector::new(16);
        let family = ParametrizedFamily::jy_rotation(twin_fock(s).unwrap()).unwrap();
        let vectors = phase_basis(s)
            .unwrap()
            .into_iter()
            .map(|p| p.amplitudes().clone())
            .collect();
        let measurement = Measurement::basis(vectors).unwrap();
        for theta in [0.1, 0.7, 1.3] {
            let f = classical_fisher(&family, &measurement, theta).unwrap();
            assert!((f - 144.0).abs() < 1e-6 * 144.0, "theta={theta}: {f}");
        }
    }

    #[test]
    fn occupation_cfi_bounded_by_qfi() {
        let mix = apply_loss(20, 10, 2).unwrap();
        let bound = qfi_mixed_jy(&mix, SUPPORT_TOL);
        let family = ParametrizedFamily::jy_rotation(mix).unwrap();
        for theta in [0.0, 0.2, 0.9] {
            let f = classical_fisher(&family, &Measurement::Occupation, theta).unwrap();
            assert!(f <= bound * (1.0 + 1e-6), "theta={theta}: {f} > {bound}");
        }
        assert!(classical_fisher(&family, &Measurement::Occupation, 0.0).unwrap() < 1e-6);
    }

    #[test]
    fn incomplete_measurement_is_rejected() {
        let v = vec![CVector::from_element(2, C64::new(1.0, 0.0)); 2];
        assert!(Measurement::basis(v).is_err());
    }

    #[test]
    fn parity_zero_signal_and_limit() {
        let s = SpinSector::new(64);
        let family = ParametrizedFamily::jy_rotation(twin_fock(s).unwrap()).unwrap();
        let parity = parity_operator(s);
        assert_eq!(
            mom_error(&family, &parity, 0.0).unwrap(),
            MomError::ZeroSignal
        );
        let limit = mom_error_limit(&family, &parity, 0.0).unwrap();
        let bound = 1.0 / 2112.0;
        assert!((limit - bound).abs() < 1e-4 * bound, "{limit}");
    }

    #[test]
    fn jz2_limit_matches_numerics() {
        for (n, m) in [(40usize, 0i64), (40, 2), (64, 4)] {
            let s = SpinSector::new(n);
            let family =
                ParametrizedFamily::jy_rotation(dicke_state(s, Imbalance::new(m)).unwrap())
                    .unwrap();
            let jz2 = SpinObservable::JzSquared.operator(s);
            let numeric = mom_error_limit(&family, &jz2, 0.0).unwrap();
            let closed = theorem1_closed_forms(n, m).unwrap();
            assert!((numeric - closed.error_at_zero).abs() < 1e-6 * closed.error_at_zero);
        }
        let t0 = theorem1_closed_forms(40, 0).unwrap();
        assert!((t0.ratio_to_qfi - t0.ratio_approximation).abs() < 1e-14);
    }

    #[test]
    fn jz2_limit_domain() {
        assert!(theorem1_closed_forms(7, 0).is_err());
        assert!(theorem1_closed_forms(8, 5).is_err());
    }

    #[test]
    fn noiseless_quadratic_pair_saturates() {
        let s = SpinSector::new(32);
        let family = ParametrizedFamily::jy_rotation(twin_fock(s).unwrap()).unwrap();
        let q = quadratic_observables(s);
        for theta in [0.3, 1.1, -2.0] {
            let r = generalized_snr(&family, &[&q[0], &q[1]], theta).unwrap();
            assert!(
                (r.scalar() - 544.0).abs() < 1e-8 * 544.0,
                "theta={theta}: {}",
                r.scalar()
            );
        }
    }

    #[test]
    fn singular_covariance_is_flagged() {
        let s = SpinSector::new(4);
        let family = ParametrizedFamily::jy_rotation(twin_fock(s).unwrap()).unwrap();
        let jz2 = SpinObservable::JzSquared.operator(s);
        let r = generalized_snr(&family, &[&jz2, &jz2], 0.4).unwrap();
        assert_eq!(r.retained_rank, 1);
        let single = generalized_snr(&family, &[&jz2], 0.4).unwrap();
        assert!((r.scalar() - single.scalar()).abs() < 1e-9 * single.scalar());
    }

    #[test]
    fn posterior_normalizes_and_peaks_for_sharp_probe() {
        let grid: Vec<f64> = (0..401)
            .map(|i| -PI / 2.0 + PI * i as f64 / 400.0)
            .collect();
        let prior = uniform_prior(&grid);
        let post = bayes_posterior(40, 0.0, 0.3, &grid, &prior).unwrap();
        assert!((trapezoid(&grid, &post) - 1.0).abs() < 1e-10);
        let peak = grid[post
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0];
        assert!((peak.abs() - 0.3).abs() < 0.02, "peak at {peak}");
    }

    #[test]
    fn posterior_rejects_empty_grid() {
        assert!(matches!(
            bayes_posterior(40, 0.1, 0.0, &[], &[]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn dephased_probe_has_lower_qfi() {
        let f = qfi_vs_chi(40, &[0.0, 0.2, 0.39]).unwrap();
        assert!((f[0] - 840.0).abs() < 1e-8);
        assert!(f[1] < f[0] && f[2] < f[1]);
    }

    proptest! {
        #[test]
        fn signal_derivative_matches_finite_difference(theta in -3.0f64..3.0, m in -3i64..=3) {
            let s = SpinSector::new(8);
            let family = ParametrizedFamily::jy_rotation(dicke_state(s, Imbalance::new(m)).unwrap()).unwrap();
            let a = SpinObservable::JzRaise.operator(s);
            let state = family.evolved(&[theta]).unwrap();
            let d = signal_derivative(&state, family.generators()[0].matrix(), a.matrix());
            let h = 1e-5;
            let up = family.evolved(&[theta + h]).unwrap().expectation(a.matrix());
            let down = family.evolved(&[theta - h]).unwrap().expectation(a.matrix());
            let fd = (up - down) / (2.0 * h);
            prop_assert!((d - fd).abs() < 1e-6 * (1.0 + d.abs()));
        }
    }
}
