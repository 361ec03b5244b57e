use std::path::Path;

use annihilate_core::harness::{sample_particles, ExperimentSpec, InitialDatum, PropertySuiteConfig};
use annihilate_core::hjsolver::SchemeConfig;
use annihilate_core::{IntegratorConfig, ParticleState};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// The whole run configuration. Every section is optional and every field has
/// a default; unknown keys are rejected.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Seed for the randomized property suite; `--seed` overrides it.
    pub seed: Option<u64>,
    pub integrator: IntegratorConfig,
    pub scheme: SchemeConfig,
    pub experiment: ExperimentSpec,
    pub initial: Option<InitialSection>,
    pub hj: HjSection,
    pub suite: PropertySuiteConfig,
    pub measure: MeasureSection,
}

/// Initial particles, either listed explicitly or sampled from a datum.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub positions: Option<Vec<f64>>,
    pub charges: Option<Vec<i8>>,
    /// Defaults to `1/n`.
    pub coupling: Option<f64>,
    pub datum: Option<InitialDatum>,
    pub n: Option<usize>,
    pub offset: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HjSection {
    pub datum: InitialDatum,
    /// Extra halvings of `h` for the self-convergence table; 0 skips it.
    pub refinement_levels: usize,
}

impl Default for HjSection {
    fn default() -> Self {
        HjSection { datum: InitialDatum::Sigmoid, refinement_levels: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureFamily {
    /// `delta_{1/n} - delta_0`.
    Dipole,
    /// Crossings of `datum` with weights `1/n`.
    Sampled,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureSection {
    pub family: MeasureFamily,
    pub datum: InitialDatum,
    pub sizes: Vec<usize>,
    /// Slope of the linear modulus `omega(r) = omega_lipschitz * r`.
    pub omega_lipschitz: f64,
    pub threshold: f64,
    /// Dyadic levels of the test dictionary.
    pub levels: u32,
}

impl Default for MeasureSection {
    fn default() -> Self {
        MeasureSection {
            family: MeasureFamily::Dipole,
            datum: InitialDatum::Sigmoid,
            sizes: vec![8, 16, 32, 64, 128, 256],
            omega_lipschitz: 1.0,
            threshold: 0.05,
            levels: 6,
        }
    }
}

pub struct LoadedConfig {
    pub config: Config,
    /// Hex SHA-256 of the file contents.
    pub hash: String,
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config: Config = toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    config.validate()?;
    Ok(LoadedConfig { config, hash: hex::encode(Sha256::digest(text.as_bytes())) })
}

impl Config {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |e: String| CliError::Config(e);
        self.integrator.validate().map_err(|e| bad(e.to_string()))?;
        self.scheme.validate().map_err(|e| bad(e.to_string()))?;
        self.experiment.validate().map_err(|e| bad(e.to_string()))?;
        if self.suite.sizes.is_empty() || self.suite.sizes.iter().any(|&n| n < 2) {
            return Err(bad("suite.sizes must be a nonempty list of sizes >= 2".into()));
        }
        if !(0.0..=1.0).contains(&self.suite.neutral_fraction) {
            return Err(bad("suite.neutral_fraction must lie in [0, 1]".into()));
        }
        if !(self.suite.max_horizon > 0.0 && self.suite.max_horizon.is_finite()) {
            return Err(bad("suite.max_horizon must be positive".into()));
        }
        if self.measure.sizes.is_empty() || self.measure.sizes.contains(&0) {
            return Err(bad("measure.sizes must be a nonempty list of positive sizes".into()));
        }
        if !(self.measure.omega_lipschitz >= 0.0) || !(self.measure.threshold >= 0.0) {
            return Err(bad("measure.omega_lipschitz and measure.threshold must be >= 0".into()));
        }
        if let Some(init) = &self.initial {
            init.state().map_err(|e| match e {
                CliError::Simulation(m) => CliError::Config(m),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<(ParticleState, f64), CliError> {
        self.initial.as_ref().ok_or_else(|| CliError::Config("missing [initial] section".into()))?.state()
    }
}

impl InitialSection {
    /// The particles and the value of their step function at `-inf`.
    pub fn state(&self) -> Result<(ParticleState, f64), CliError> {
        let bad = |m: String| CliError::Config(format!("[initial]: {m}"));
        match (&self.positions, &self.charges, self.datum) {
            (Some(x), Some(b), None) => {
                if self.n.is_some() || self.offset.is_some() {
                    return Err(bad("n and offset only apply to a sampled datum".into()));
                }
                let s = match self.coupling {
                    Some(c) => ParticleState::with_coupling(x.clone(), b.clone(), c),
                    None => ParticleState::new(x.clone(), b.clone()),
                }
                .map_err(|e| bad(e.to_string()))?;
                if let Err(v) = annihilate_core::particles::validate_state(&s) {
                    return Err(bad(format!("{v:?}")));
                }
                Ok((s, 0.0))
            }
            (None, None, Some(datum)) => {
                if self.coupling.is_some() {
                    return Err(bad("a sampled datum always uses coupling 1/n".into()));
                }
                let n = self.n.ok_or_else(|| bad("datum needs n".into()))?;
                let eps = 1.0 / n.max(1) as f64;
                let sampled = sample_particles(&|x| datum.eval(x, eps), n, self.offset.unwrap_or(0.5), datum.window())
                    .map_err(|e| bad(e.to_string()))?;
                Ok((sampled.state, sampled.base))
            }
            _ => Err(bad("give either positions and charges, or datum and n".into())),
        }
    }
}
