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

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use dicke_experiments::config::{Format, Overrides, RunConfig, Scenario};
use dicke_experiments::output::write_report;
use dicke_experiments::scenarios::run;
use dicke_experiments::RunError;

/// Reproduces estimation-theoretic sweeps for twin-Fock and Dicke interferometry.
#[derive(Debug, Parser)]
#[command(name = "dicke-metrology", version)]
struct Cli {
    scenario: Scenario,
    /// Particle numbers, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Largest number of lost particles.
    #[arg(long)]
    k_max: Option<usize>,
    /// Dicke imbalances, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    m: Option<Vec<i64>>,
    /// `min:max:points`, angles may use `pi`.
    #[arg(long, allow_hyphen_values = true)]
    theta_grid: Option<String>,
    /// Phase-diffusion strengths, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    chi: Option<Vec<String>>,
    /// True phase of the posterior or operating point of the four-mode readout.
    #[arg(long, allow_hyphen_values = true)]
    theta0: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format, csv by default.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// TOML file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn execute(cli: Cli) -> Result<(), RunError> {
    let file = match &cli.config {
        Some(path) => Overrides::from_toml_file(path)?,
        None => Overrides::default(),
    };
    let flags = Overrides {
        scenario: Some(cli.scenario),
        n: cli.n,
        k_max: cli.k_max,
        m: cli.m,
        theta_grid: cli.theta_grid,
        chi: cli.chi,
        theta0: cli.theta0,
        out: cli.out,
        format: cli.format,
        workers: cli.workers,
    };
    let cfg = RunConfig::resolve(file.merged_with(flags))?;
    let report = run(&cfg)?;
    for path in write_report(&cfg, &report)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
