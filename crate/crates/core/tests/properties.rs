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

use dicke_core::loss::{apply_loss, four_mode_loss, LossChain};
use dicke_core::metrology::{
    classical_fisher, generalized_snr, qfi_mixed_jy, qfi_pure, qfi_spectral, Measurement,
    ParametrizedFamily, SUPPORT_TOL,
};
use dicke_core::multimode::sequential_identity_residual;
use dicke_core::spin_algebra::{build_spin_operators, parity_operator};
use dicke_core::states::{dicke_state, Imbalance};
use dicke_core::{CMatrix, SpinObservable, SpinSector, C64};
use proptest::prelude::*;

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |a, z| a.max(z.norm()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn su2_algebra_and_casimir(n in 1usize..=40) {
        let ops = build_spin_operators(SpinSector::new(n));
        let (x, y, z) = (ops.jx.matrix(), ops.jy.matrix(), ops.jz.matrix());
        let i = C64::new(0.0, 1.0);
        prop_assert!(max_abs(&(x * y - y * x - z * i)) < 1e-10);
        prop_assert!(max_abs(&(y * z - z * y - x * i)) < 1e-10);
        prop_assert!(max_abs(&(z * x - x * z - y * i)) < 1e-10);
        let j = n as f64 / 2.0;
        let casimir = x * x + y * y + z * z - CMatrix::identity(n + 1, n + 1) * C64::new(j * (j + 1.0), 0.0);
        prop_assert!(max_abs(&casimir) < 1e-9 * (1.0 + j * j));
    }

    #[test]
    fn rotations_are_unitary(n in 1usize..=60, angle in -6.3f64..6.3) {
        let u = SpinObservable::Jy.operator(SpinSector::new(n)).rotation(angle).unwrap();
        let defect = max_abs(&(u.adjoint() * &u - CMatrix::identity(n + 1, n + 1)));
        prop_assert!(defect < 1e-12);
    }

    #[test]
    fn loss_conserves_probability(n in 1usize..=80, frac in 0.0f64..1.0, kfrac in 0.0f64..1.0) {
        let m = ((n as f64) * frac) as usize;
        let mut chain = LossChain::new(n, m).unwrap();
        let steps = ((chain.max_loss() as f64) * kfrac) as usize;
        for _ in 0..steps {
            chain.step().unwrap();
            let total: f64 = chain.weights().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(chain.weights().iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn four_mode_loss_conserves_probability(a in 0usize..4, b in 0usize..4, c in 0usize..4, d in 1usize..4, k in 0usize..6) {
        let total = a + b + c + d;
        let k = k.min(total - 1);
        let w = four_mode_loss([a, b, c, d], k).unwrap();
        prop_assert!((w.total() - 1.0).abs() < 1e-12);
        prop_assert!(w.weights().keys().all(|o| o.iter().sum::<usize>() == total - k));
    }

    #[test]
    fn qfi_decreases_with_loss(half in 2usize..=30) {
        let n = 2 * half;
        let mut previous = f64::INFINITY;
        for k in 0..=(n / 4) {
            let f = qfi_mixed_jy(&apply_loss(n, half, k).unwrap(), SUPPORT_TOL);
            prop_assert!(f <= previous * (1.0 + 1e-12));
            previous = f;
        }
    }

    #[test]
    fn qfi_is_rotation_invariant(half in 4usize..=12, k in 0usize..4, angle in -3.1f64..3.1) {
        let n = 2 * half;
        let mixture = apply_loss(n, half, k).unwrap();
        let reference = qfi_mixed_jy(&mixture, SUPPORT_TOL);
        let jy = SpinObservable::Jy.operator(mixture.sector());
        let u = jy.rotation(angle).unwrap();
        let rho = &u * mixture.density_matrix() * u.adjoint();
        let rotated = qfi_spectral(&rho, jy.matrix(), SUPPORT_TOL).unwrap();
        prop_assert!((rotated - reference).abs() < 1e-8 * reference.max(1.0));
    }

    #[test]
    fn cramer_rao_ordering(half in 4usize..=10, k in 0usize..4, theta in 0.05f64..1.5) {
        let n = 2 * half;
        let mixture = apply_loss(n, half, k).unwrap();
        let qfi = qfi_mixed_jy(&mixture, SUPPORT_TOL);
        let sector = mixture.sector();
        let family = ParametrizedFamily::jy_rotation(mixture).unwrap();
        let cfi = classical_fisher(&family, &Measurement::Occupation, theta).unwrap();
        let jz2 = SpinObservable::JzSquared.operator(sector);
        let parity = parity_operator(sector);
        let snr = generalized_snr(&family, &[&jz2, &parity], theta).unwrap().scalar();
        prop_assert!(snr <= cfi * (1.0 + 1e-6) + 1e-9, "snr {} cfi {}", snr, cfi);
        prop_assert!(cfi <= qfi * (1.0 + 1e-6) + 1e-9, "cfi {} qfi {}", cfi, qfi);
    }

    #[test]
    fn dicke_qfi_closed_form(half in 1usize..=64, mfrac in -1.0f64..=1.0) {
        let n = 2 * half;
        let m = (mfrac * half as f64).round() as i64;
        let sector = SpinSector::new(n);
        let f = qfi_pure(&dicke_state(sector, Imbalance::new(m)).unwrap(), &SpinObservable::Jy.operator(sector));
        let nf = n as f64;
        let expected = nf * nf / 2.0 - 2.0 * (m * m) as f64 + nf;
        prop_assert!((f - expected).abs() < 1e-9 * expected.max(1.0));
    }

    #[test]
    fn sequential_identity_holds(n in 1usize..=16, t1 in -3.2f64..3.2, t2 in -3.2f64..3.2) {
        prop_assert!(sequential_identity_residual(n, t1, t2).unwrap() < 1e-10);
    }
}
