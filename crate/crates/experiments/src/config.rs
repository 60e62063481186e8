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

//! Run configuration: scenario defaults, an optional TOML file and command-line overrides.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Fig1a,
    Fig1bc,
    Fig2a,
    Fig2b,
    Fig2c,
    Fig2d,
    Qfi,
    Mom,
    Snr,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Fig1a => "fig1a",
            Scenario::Fig1bc => "fig1bc",
            Scenario::Fig2a => "fig2a",
            Scenario::Fig2b => "fig2b",
            Scenario::Fig2c => "fig2c",
            Scenario::Fig2d => "fig2d",
            Scenario::Qfi => "qfi",
            Scenario::Mom => "mom",
            Scenario::Snr => "snr",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Parses `1.2`, `pi`, `-pi/2`, `3pi/4`, `0.5pi`.
pub fn parse_angle(text: &str) -> Result<f64, String> {
    let t = text.trim();
    let Some(pos) = t.find("pi") else {
        return t
            .parse::<f64>()
            .map_err(|e| format!("bad angle {text:?}: {e}"));
    };
    let (head, tail) = (&t[..pos], &t[pos + 2..]);
    let coefficient = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h
            .trim_end_matches('*')
            .parse::<f64>()
            .map_err(|e| format!("bad angle {text:?}: {e}"))?,
    };
    let divisor = match tail {
        "" => 1.0,
        d if d.starts_with('/') => d[1..]
            .parse::<f64>()
            .map_err(|e| format!("bad angle {text:?}: {e}"))?,
        _ => return Err(format!("bad angle {text:?}")),
    };
    Ok(coefficient * PI / divisor)
}

/// Inclusive grid `min:max:points`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl ThetaGrid {
    pub fn new(min: f64, max: f64, points: usize) -> Self {
        Self { min, max, points }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let span = self.max - self.min;
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.max
                } else {
                    self.min + span * i as f64 / last
                }
            })
            .collect()
    }
}

impl FromStr for ThetaGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("theta grid must be min:max:points, got {s:?}"));
        }
        let points = parts[2]
            .trim()
            .parse::<usize>()
            .map_err(|e| format!("bad point count in {s:?}: {e}"))?;
        Ok(Self::new(
            parse_angle(parts[0])?,
            parse_angle(parts[1])?,
            points,
        ))
    }
}

impl fmt::Display for ThetaGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.max, self.points)
    }
}

/// Every field optional; used for the config file and for command-line overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub scenario: Option<Scenario>,
    pub n: Option<Vec<usize>>,
    pub k_max: Option<usize>,
    pub m: Option<Vec<i64>>,
    pub theta_grid: Option<String>,
    pub chi: Option<Vec<String>>,
    pub theta0: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub workers: Option<usize>,
}

impl Overrides {
    pub fn from_toml_file(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `other` win.
    pub fn merged_with(self, other: Overrides) -> Overrides {
        Overrides {
            scenario: other.scenario.or(self.scenario),
            n: other.n.or(self.n),
            k_max: other.k_max.or(self.k_max),
            m: other.m.or(self.m),
            theta_grid: other.theta_grid.or(self.theta_grid),
            chi: other.chi.or(self.chi),
            theta0: other.theta0.or(self.theta0),
            out: other.out.or(self.out),
            format: other.format.or(self.format),
            workers: other.workers.or(self.workers),
        }
    }
}

/// Fully resolved and validated run configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub n: Vec<usize>,
    /// Largest loss count; `None` means the per-N scenario default.
    pub k_max: Option<usize>,
    pub m: Vec<i64>,
    pub theta_grid: ThetaGrid,
    pub chi: Vec<f64>,
    /// True phase for the posterior, operating point of the four-mode readout.
    pub theta0: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub workers: usize,
}

fn sweep(start: usize, stop: usize, step: usize) -> Vec<usize> {
    (start..=stop).step_by(step).collect()
}

impl RunConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        let half_pi = ThetaGrid::new(-PI / 2.0, PI / 2.0, 101);
        let full = ThetaGrid::new(-PI + 2.0 * PI / 25.0, PI, 25);
        let (n, k_max, m, theta_grid, theta0) = match scenario {
            Scenario::Fig1a => (vec![64], None, vec![0, 4, 8, 16], half_pi, 0.0),
            Scenario::Fig1bc => (
                vec![40],
                None,
                vec![0],
                ThetaGrid::new(-PI / 2.0, PI / 2.0, 201),
                0.0,
            ),
            Scenario::Fig2a => (vec![40, 90, 120, 160], None, vec![0], half_pi, 0.0),
            Scenario::Fig2b | Scenario::Fig2c => {
                (sweep(16, 1216, 100), None, vec![0], half_pi, 0.0)
            }
            Scenario::Fig2d => (vec![64], Some(14), vec![0], half_pi, 0.3),
            Scenario::Qfi => (vec![40], Some(0), vec![0], half_pi, 0.0),
            Scenario::Mom => (vec![64], None, vec![0], half_pi, 0.0),
            Scenario::Snr => (vec![32], Some(3), vec![0], full, 0.0),
        };
        Self {
            scenario,
            n,
            k_max,
            m,
            theta_grid,
            chi: vec![0.0, 0.20, 0.39, 0.59, PI / 4.0],
            theta0,
            out: None,
            format: Format::Csv,
            workers: std::thread::available_parallelism().map_or(1, |p| p.get()),
        }
    }

    pub fn resolve(overrides: Overrides) -> Result<Self, RunError> {
        let scenario = overrides
            .scenario
            .ok_or_else(|| RunError::Config("no scenario given".into()))?;
        let mut cfg = Self::defaults(scenario);
        if let Some(n) = overrides.n {
            cfg.n = n;
        }
        if overrides.k_max.is_some() {
            cfg.k_max = overrides.k_max;
        }
        if let Some(m) = overrides.m {
            cfg.m = m;
        }
        if let Some(g) = overrides.theta_grid {
            cfg.theta_grid = g.parse().map_err(RunError::Config)?;
        }
        if let Some(chi) = overrides.chi {
            cfg.chi = chi
                .iter()
                .map(|c| parse_angle(c))
                .collect::<Result<_, _>>()
                .map_err(RunError::Config)?;
        }
        if let Some(t) = overrides.theta0 {
            cfg.theta0 = parse_angle(&t).map_err(RunError::Config)?;
        }
        cfg.out = overrides.out.or(cfg.out);
        if let Some(f) = overrides.format {
            cfg.format = f;
        }
        if let Some(w) = overrides.workers {
            cfg.workers = w;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let fail = |msg: String| Err(RunError::Config(msg));
        if self.n.is_empty() {
            return fail("N list is empty".into());
        }
        if self.workers == 0 {
            return fail("worker count must be positive".into());
        }
        let g = &self.theta_grid;
        if g.points == 0 || !(g.min.is_finite() && g.max.is_finite()) || g.min > g.max {
            return fail(format!("invalid theta grid {g}"));
        }
        if g.points > 1 && g.min == g.max {
            return fail(format!("theta grid {g} has repeated points"));
        }
        if !self.theta0.is_finite() || self.chi.iter().any(|c| !c.is_finite()) {
            return fail("angles must be finite".into());
        }
        let needs_even = !matches!(self.scenario, Scenario::Fig2d);
        for &n in &self.n {
            if n == 0 {
                return fail("N must be positive".into());
            }
            if needs_even && n % 2 != 0 {
                return fail(format!("{} needs even N, got {n}", self.scenario.name()));
            }
            if self.scenario == Scenario::Fig2d && n % 4 != 0 {
                return fail(format!("fig2d needs N divisible by 4, got {n}"));
            }
        }
        match self.scenario {
            Scenario::Fig1a | Scenario::Mom | Scenario::Qfi => {
                if self.m.is_empty() {
                    return fail("m list is empty".into());
                }
                for &n in &self.n {
                    for &m in &self.m {
                        if m.unsigned_abs() as usize > n / 2 {
                            return fail(format!("|m| = {} exceeds N/2 = {}", m.abs(), n / 2));
                        }
                        if let Some(k) = self.k_max {
                            let start = (n as i64 / 2 - m) as usize;
                            if self.scenario == Scenario::Qfi && k >= n - start {
                                return fail(format!(
                                    "K = {k} violates K < N - (N/2 - m) for N = {n}, m = {m}"
                                ));
                            }
                        }
                    }
                }
            }
            Scenario::Fig1bc => {
                if self.chi.is_empty() {
                    return fail("chi list is empty".into());
                }
                if g.points < 2 {
                    return fail("posterior grid needs at least two points".into());
                }
            }
            Scenario::Fig2a | Scenario::Snr => {
                if let Some(k) = self.k_max {
                    if let Some(&n) = self.n.iter().find(|&&n| k >= n / 2) {
                        return fail(format!("K = {k} violates K < N/2 for N = {n}"));
                    }
                }
            }
            Scenario::Fig2d => {
                let k = self.k_max.unwrap_or(0);
                if let Some(&n) = self.n.iter().find(|&&n| k >= n / 4) {
                    return fail(format!(
                        "K = {k} violates K < N/4 for N = {n} (twin-Fock reference)"
                    ));
                }
            }
            Scenario::Fig2b | Scenario::Fig2c => {
                if let Some(&n) = self.n.iter().find(|&&n| n < 4) {
                    return fail(format!("N = {n} is too small for a loss sweep"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_with_pi() {
        assert_eq!(parse_angle("pi").unwrap(), PI);
        assert_eq!(parse_angle("-pi/2").unwrap(), -PI / 2.0);
        assert_eq!(parse_angle("3pi/4").unwrap(), 3.0 * PI / 4.0);
        assert_eq!(parse_angle("0.25").unwrap(), 0.25);
        assert!(parse_angle("pie").is_err());
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let g: ThetaGrid = "-pi:pi:5".parse().unwrap();
        let v = g.values();
        assert_eq!(v.len(), 5);
        assert_eq!(v[0], -PI);
        assert_eq!(v[4], PI);
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn flags_override_file() {
        let file = Overrides {
            scenario: Some(Scenario::Fig2a),
            n: Some(vec![40]),
            workers: Some(2),
            ..Default::default()
        };
        let flags = Overrides {
            n: Some(vec![90]),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(file.merged_with(flags)).unwrap();
        assert_eq!(cfg.n, vec![90]);
        assert_eq!(cfg.workers, 2);
    }

    #[test]
    fn odd_particle_number_is_rejected() {
        let o = Overrides {
            scenario: Some(Scenario::Fig2a),
            n: Some(vec![41]),
            ..Default::default()
        };
        assert!(matches!(RunConfig::resolve(o), Err(RunError::Config(_))));
    }

    #[test]
    fn fig2d_needs_multiple_of_four() {
        let o = Overrides {
            scenario: Some(Scenario::Fig2d),
            n: Some(vec![62]),
            ..Default::default()
        };
        assert!(matches!(RunConfig::resolve(o), Err(RunError::Config(_))));
    }

    #[test]
    fn toml_file_round_trip() {
        let text = "scenario = \"fig1bc\"\nn = [20]\nchi = [\"0\", \"pi/4\"]\nformat = \"json\"\n";
        let o: Overrides = toml::from_str(text).unwrap();
        let cfg = RunConfig::resolve(o).unwrap();
        assert_eq!(cfg.chi, vec![0.0, PI / 4.0]);
        assert_eq!(cfg.format, Format::Json);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Overrides>("bogus = 1").is_err());
    }
}
