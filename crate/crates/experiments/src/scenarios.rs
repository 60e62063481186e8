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

//! One function per scenario. Each returns a [`Report`] whose rows are in a fixed order
//! regardless of how the sweep points were scheduled.

use rayon::prelude::*;

use dicke_core::loss::{apply_loss, LossChain};
use dicke_core::metrology::{
    bayes_posterior, generalized_snr, generalized_snr_or_limit, mom_error_or_limit, qfi_mixed_jy,
    qfi_pure, qfi_vs_chi, uniform_prior, ParametrizedFamily, SUPPORT_TOL,
};
use dicke_core::multimode::{local_readout_snr, lossy_doubled_qfi11};
use dicke_core::spin_algebra::{parity_operator, quadratic_observables};
use dicke_core::states::{dicke_state, Imbalance};
use dicke_core::{HermitianOperator, SpinObservable, SpinSector};

use crate::config::{RunConfig, Scenario};
use crate::output::{Report, Table};
use crate::RunError;

pub fn run(cfg: &RunConfig) -> Result<Report, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| RunError::Config(format!("worker pool: {e}")))?;
    pool.install(|| match cfg.scenario {
        Scenario::Fig1a => run_fig1a(cfg),
        Scenario::Fig1bc => run_fig1bc(cfg),
        Scenario::Fig2a => run_fig2a(cfg),
        Scenario::Fig2b => run_fig2b(cfg),
        Scenario::Fig2c => run_fig2c(cfg),
        Scenario::Fig2d => run_fig2d(cfg),
        Scenario::Qfi => run_qfi(cfg),
        Scenario::Mom => run_mom(cfg),
        Scenario::Snr => run_snr(cfg),
    })
}

/// Evaluates `f` on every point in parallel and returns the results in input order.
fn par_rows<P, F>(points: &[P], f: F) -> Result<Vec<Vec<f64>>, RunError>
where
    P: Sync,
    F: Fn(&P) -> Result<Vec<f64>, RunError> + Sync + Send,
{
    points.par_iter().map(f).collect()
}

fn dicke_family(n: usize, m: i64) -> Result<ParametrizedFamily, RunError> {
    let sector = SpinSector::new(n);
    Ok(ParametrizedFamily::jy_rotation(dicke_state(
        sector,
        Imbalance::new(m),
    )?)?)
}

fn db_over(value: f64, sql: f64) -> f64 {
    10.0 * (value / sql).log10()
}

/// Least-squares `y = a + b x`; returns `(b, a)`.
pub fn affine_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Parity and `{parity, Jz^2}` moment errors for pure Dicke probes; points with vanishing
/// signal report the limit value.
pub fn run_fig1a(cfg: &RunConfig) -> Result<Report, RunError> {
    let mut table = Table::new(
        "fig1a",
        &[
            "m",
            "theta",
            "mom_error_parity",
            "mom_error_combined",
            "inv_qfi",
        ],
    );
    let thetas = cfg.theta_grid.values();
    for &n in &cfg.n {
        let sector = SpinSector::new(n);
        let parity = parity_operator(sector);
        let jz2 = SpinObservable::JzSquared.operator(sector);
        for &m in &cfg.m {
            let family = dicke_family(n, m)?;
            let inv_qfi = 1.0
                / qfi_pure(
                    &dicke_state(sector, Imbalance::new(m))?,
                    &family.generators()[0],
                );
            let rows = par_rows(&thetas, |&theta| {
                let parity_err = mom_error_or_limit(&family, &parity, theta)?;
                let combined = 1.0 / generalized_snr_or_limit(&family, &[&parity, &jz2], theta)?;
                Ok(vec![m as f64, theta, parity_err, combined, inv_qfi])
            })?;
            rows.into_iter().for_each(|r| table.push(r));
        }
    }
    Ok(Report {
        tables: vec![table],
        summary: Vec::new(),
    })
}

/// Posterior densities and QFI of the phase-diffused probe.
pub fn run_fig1bc(cfg: &RunConfig) -> Result<Report, RunError> {
    let grid = cfg.theta_grid.values();
    let prior = uniform_prior(&grid);
    let mut posterior = Table::new("posterior", &["N", "chi", "theta", "posterior"]);
    let mut qfi = Table::new("qfi", &["N", "chi", "qfi"]);
    for &n in &cfg.n {
        let densities: Vec<Vec<f64>> = cfg
            .chi
            .par_iter()
            .map(|&chi| bayes_posterior(n, chi, cfg.theta0, &grid, &prior).map_err(RunError::from))
            .collect::<Result<_, _>>()?;
        for (chi, density) in cfg.chi.iter().zip(densities) {
            for (theta, p) in grid.iter().zip(density) {
                posterior.push(vec![n as f64, *chi, *theta, p]);
            }
        }
        for (chi, f) in cfg.chi.iter().zip(qfi_vs_chi(n, &cfg.chi)?) {
            qfi.push(vec![n as f64, *chi, f]);
        }
    }
    Ok(Report {
        tables: vec![posterior, qfi],
        summary: Vec::new(),
    })
}

fn check_anchor(value: f64, expected: f64) -> Result<(), RunError> {
    let residual = (value - expected).abs() / expected.abs().max(1.0);
    if residual > 1e-9 {
        return Err(RunError::Numerical(dicke_core::Error::Numerical {
            context: "lossy twin-Fock closed-form anchor",
            residual,
        }));
    }
    Ok(())
}

/// QFI of the lossy twin-Fock state for `K = 0..=k_max`, one loss chain per `N`.
pub fn lossy_tf_qfi_curve(n: usize, k_max: usize) -> Result<Vec<f64>, RunError> {
    let mut chain = LossChain::new(n, n / 2)?;
    let mut out = Vec::with_capacity(k_max + 1);
    loop {
        out.push(qfi_mixed_jy(&chain.mixture()?, SUPPORT_TOL));
        if chain.lost() == k_max {
            return Ok(out);
        }
        chain.step()?;
    }
}

pub fn run_fig2a(cfg: &RunConfig) -> Result<Report, RunError> {
    let mut table = Table::new("fig2a", &["N", "K", "qfi"]);
    let curves = par_rows(&cfg.n, |&n| {
        let k_max = cfg.k_max.unwrap_or(n / 4);
        let curve = lossy_tf_qfi_curve(n, k_max)?;
        let nf = n as f64;
        check_anchor(curve[0], nf * nf / 2.0 + nf)?;
        if curve.len() > 1 {
            check_anchor(curve[1], (nf / 2.0).powi(2) - 1.0)?;
        }
        Ok(curve)
    })?;
    for (&n, curve) in cfg.n.iter().zip(curves) {
        for (k, f) in curve.into_iter().enumerate() {
            table.push(vec![n as f64, k as f64, f]);
        }
    }
    Ok(Report {
        tables: vec![table],
        summary: Vec::new(),
    })
}

/// Largest `K` with `F(rho_{N,K}) > N`.
pub fn k_sql(n: usize) -> Result<usize, RunError> {
    let mut chain = LossChain::new(n, n / 2)?;
    let mut best = 0;
    while chain.lost() < chain.max_loss() {
        chain.step()?;
        if qfi_mixed_jy(&chain.mixture()?, SUPPORT_TOL) > n as f64 {
            best = chain.lost();
        } else {
            break;
        }
    }
    Ok(best)
}

pub fn run_fig2b(cfg: &RunConfig) -> Result<Report, RunError> {
    let mut table = Table::new("fig2b", &["N", "K_SQL"]);
    let rows = par_rows(&cfg.n, |&n| Ok(vec![n as f64, k_sql(n)? as f64]))?;
    rows.into_iter().for_each(|r| table.push(r));
    let n: Vec<f64> = table.column("N").expect("column");
    let k: Vec<f64> = table.column("K_SQL").expect("column");
    let mut summary = Vec::new();
    if n.len() >= 2 {
        let (slope, intercept) = affine_fit(&n, &k);
        summary.push(("fit_slope".to_string(), slope));
        summary.push(("fit_intercept".to_string(), intercept));
    }
    Ok(Report {
        tables: vec![table],
        summary,
    })
}

pub fn run_fig2c(cfg: &RunConfig) -> Result<Report, RunError> {
    let mut table = Table::new("fig2c", &["N", "K", "qfi"]);
    let rows = par_rows(&cfg.n, |&n| {
        let k = (n as f64).sqrt().floor() as usize;
        let f = qfi_mixed_jy(&apply_loss(n, n / 2, k)?, SUPPORT_TOL);
        Ok(vec![n as f64, k as f64, f])
    })?;
    rows.into_iter().for_each(|r| table.push(r));

    let n = table.column("N").expect("column");
    let f = table.column("qfi").expect("column");
    let (lo, hi) = n
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let mid = 0.5 * (lo + hi);
    let (x, y): (Vec<f64>, Vec<f64>) = n
        .iter()
        .zip(&f)
        .filter(|(&n, _)| n >= mid)
        .map(|(&n, &f)| (n.ln(), f.ln()))
        .unzip();
    let mut summary = Vec::new();
    if x.len() >= 2 {
        summary.push(("exponent".to_string(), affine_fit(&x, &y).0));
    }
    Ok(Report {
        tables: vec![table],
        summary,
    })
}

/// Gains in dB over the per-interferometer shot-noise limit `N/2`.
pub fn run_fig2d(cfg: &RunConfig) -> Result<Report, RunError> {
    let mut table = Table::new(
        "fig2d",
        &["N", "K", "qfi11_doubled", "snr_local_readout", "qfi_tf"],
    );
    for &n in &cfg.n {
        let k_max = cfg.k_max.unwrap_or(14);
        let ks: Vec<usize> = (0..=k_max).collect();
        let sql = n as f64 / 2.0;
        let rows = par_rows(&ks, |&k| {
            let doubled = lossy_doubled_qfi11(n, k)?;
            let snr = local_readout_snr(n, k, cfg.theta0)?.scalar();
            let tf = qfi_mixed_jy(&apply_loss(n / 2, n / 4, k)?, SUPPORT_TOL);
            Ok(vec![
                n as f64,
                k as f64,
                db_over(doubled, sql),
                db_over(snr, sql),
                db_over(tf, sql),
            ])
        })?;
        rows.into_iter().for_each(|r| table.push(r));
    }
    Ok(Report {
        tables: vec![table],
        summary: Vec::new(),
    })
}

/// QFI of lossy Dicke probes, `K = 0..=k_max`.
pub fn run_qfi(cfg: &RunConfig) -> Result<Report, RunError> {
    let mut table = Table::new("qfi", &["N", "m", "K", "qfi", "qfi_over_sql"]);
    let mut points = Vec::new();
    for &n in &cfg.n {
        for &m in &cfg.m {
            for k in 0..=cfg.k_max.unwrap_or(0) {
                points.push((n, m, k));
            }
        }
    }
    let rows = par_rows(&points, |&(n, m, k)| {
        let start = (n as i64 / 2 - m) as usize;
        let f = qfi_mixed_jy(&apply_loss(n, start, k)?, SUPPORT_TOL);
        Ok(vec![n as f64, m as f64, k as f64, f, f / (n - k) as f64])
    })?;
    rows.into_iter().for_each(|r| table.push(r));
    Ok(Report {
        tables: vec![table],
        summary: Vec::new(),
    })
}

/// Single-observable moment errors of pure Dicke probes over the theta grid.
pub fn run_mom(cfg: &RunConfig) -> Result<Report, RunError> {
    let mut table = Table::new(
        "mom",
        &[
            "N",
            "m",
            "theta",
            "mom_error_jz2",
            "mom_error_parity",
            "inv_qfi",
        ],
    );
    let thetas = cfg.theta_grid.values();
    for &n in &cfg.n {
        let sector = SpinSector::new(n);
        let parity = parity_operator(sector);
        let jz2 = SpinObservable::JzSquared.operator(sector);
        for &m in &cfg.m {
            let family = dicke_family(n, m)?;
            let inv_qfi = 1.0
                / qfi_pure(
                    &dicke_state(sector, Imbalance::new(m))?,
                    &family.generators()[0],
                );
            let rows = par_rows(&thetas, |&theta| {
                Ok(vec![
                    n as f64,
                    m as f64,
                    theta,
                    mom_error_or_limit(&family, &jz2, theta)?,
                    mom_error_or_limit(&family, &parity, theta)?,
                    inv_qfi,
                ])
            })?;
            rows.into_iter().for_each(|r| table.push(r));
        }
    }
    Ok(Report {
        tables: vec![table],
        summary: Vec::new(),
    })
}

/// Generalized SNR of `{Jz^2, (J+^2 + h.c.)/2, (Jz J+ + h.c.)/2, Jx}` on lossy twin-Fock
/// probes against their QFI.
pub fn run_snr(cfg: &RunConfig) -> Result<Report, RunError> {
    let mut table = Table::new("snr", &["N", "K", "theta", "snr", "qfi", "ratio"]);
    let thetas = cfg.theta_grid.values();
    for &n in &cfg.n {
        for k in 0..=cfg.k_max.unwrap_or(0) {
            let mixture = apply_loss(n, n / 2, k)?;
            let qfi = qfi_mixed_jy(&mixture, SUPPORT_TOL);
            let observables = quadratic_observables(mixture.sector());
            let refs: Vec<&HermitianOperator> = observables.iter().collect();
            let family = ParametrizedFamily::jy_rotation(mixture)?;
            let rows = par_rows(&thetas, |&theta| {
                let snr = generalized_snr(&family, &refs, theta)?.scalar();
                Ok(vec![n as f64, k as f64, theta, snr, qfi, snr / qfi])
            })?;
            rows.into_iter().for_each(|r| table.push(r));
        }
    }
    Ok(Report {
        tables: vec![table],
        summary: Vec::new(),
    })
}
