use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_TOML: &str = include_str!("../../constants.toml");

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncrementConstants {
    pub chain_ratio: f64,
    pub chain_ratio_floor: f64,
    pub chain_work: f64,
    pub many_patterns_fraction: f64,
    pub main_term_floor: f64,
    pub large_norm_fraction: f64,
    pub untwist_kappa: f64,
    pub kappa_relaxations: u32,
    pub inverse_c: f64,
    pub increment_c: f64,
    pub radius_exponent: f64,
    pub step_budget: f64,
    pub max_steps: usize,
    pub case1_exponent: f64,
    pub inverse_radii: Vec<f64>,
    pub translate_samples: usize,
    pub top_frequencies: usize,
    pub norm_work: f64,
    pub oracle_budget: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferenceConstants {
    pub spectral_threshold: f64,
    pub bohr_radius: f64,
    pub degree_budget: usize,
    pub level_fraction: f64,
    pub c_log: f64,
    pub eta: f64,
    pub bad_box_k: f64,
}

/// The constants table; defaults are the checked-in `constants.toml`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    pub increment: IncrementConstants,
    pub transference: TransferenceConstants,
}

impl Default for Constants {
    fn default() -> Self {
        Self::parse(DEFAULT_TOML).expect("bundled constants.toml is valid")
    }
}

impl Constants {
    pub fn parse(src: &str) -> Result<Self> {
        let c: Constants = toml::from_str(src).map_err(|e| Error::Parse {
            line: e
                .span()
                .map(|s| src[..s.start].lines().count().max(1))
                .unwrap_or(0),
            msg: e.message().to_string(),
        })?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        let i = &self.increment;
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::Validation(format!(
                    "{name} = {v} must lie in (0, 1]"
                )))
            }
        };
        unit("chain_ratio", i.chain_ratio)?;
        unit("chain_ratio_floor", i.chain_ratio_floor)?;
        unit("many_patterns_fraction", i.many_patterns_fraction)?;
        unit("main_term_floor", i.main_term_floor)?;
        unit("large_norm_fraction", i.large_norm_fraction)?;
        unit("untwist_kappa", i.untwist_kappa)?;
        for &r in &i.inverse_radii {
            unit("inverse_radii", r)?;
        }
        if i.inverse_radii.is_empty() {
            return Err(Error::Validation("inverse_radii is empty".into()));
        }
        let t = &self.transference;
        unit("spectral_threshold", t.spectral_threshold)?;
        unit("bohr_radius", t.bohr_radius)?;
        unit("level_fraction", t.level_fraction)?;
        if !(t.eta > 0.0 && t.eta <= 0.5) {
            return Err(Error::Validation(
                "transference.eta must lie in (0, 1/2]".into(),
            ));
        }
        Ok(())
    }
}
