//! Versioned human-readable configuration carrying every pipeline constant.
//!
//! ```toml
//! format = 1
//! [align]    window = 96, threshold = 0.20
//! [shape]    alpha = [1.0, 0.2, 0.2, 1.0, 1.0], neighborhood = 2
//! [embed]    epsilon = 1e-6
//! [score]    lambda_s = 0.70, lambda_f = 0.10, lambda_p = 0.20
//! [filter]   exact = [...], prefixes = [...]
//! [eval]     min_bytes = 16, min_instructions = 4
//! [patch]    epsilon = 1e-6, boundary = "1.34.0"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::align::AlignConfig;
use crate::corpus::AnalysisFilter;
use crate::error::{Error, Result};
use crate::index::IndexSettings;
use crate::retrieve::ScoreWeights;
use crate::shape::{ShapeScale, DEFAULT_NEIGHBORHOOD};

pub const CONFIG_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeSection {
    pub alpha: ShapeScale,
    pub neighborhood: usize,
}

impl Default for ShapeSection {
    fn default() -> Self {
        ShapeSection {
            alpha: ShapeScale::default(),
            neighborhood: DEFAULT_NEIGHBORHOOD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedSection {
    pub epsilon: f64,
}

impl Default for EmbedSection {
    fn default() -> Self {
        EmbedSection {
            epsilon: crate::embed::DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub min_bytes: u64,
    pub min_instructions: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            min_bytes: 16,
            min_instructions: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatchSection {
    pub epsilon: f64,
    pub boundary: String,
}

impl Default for PatchSection {
    fn default() -> Self {
        PatchSection {
            epsilon: 1e-6,
            boundary: "1.34.0".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub format: u32,
    pub align: AlignConfig,
    pub shape: ShapeSection,
    pub embed: EmbedSection,
    pub score: ScoreWeights,
    pub filter: AnalysisFilter,
    pub eval: EvalSection,
    pub patch: PatchSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            format: CONFIG_FORMAT,
            align: AlignConfig::default(),
            shape: ShapeSection::default(),
            embed: EmbedSection::default(),
            score: ScoreWeights::default(),
            filter: AnalysisFilter::default(),
            eval: EvalSection::default(),
            patch: PatchSection::default(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text).map_err(|e| Error::parse(path, e))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != CONFIG_FORMAT {
            return Err(Error::InvalidConfig(format!(
                "config format {} is not supported (expected {CONFIG_FORMAT})",
                self.format
            )));
        }
        self.align.validate()?;
        self.score.validate()?;
        if !(self.embed.epsilon > 0.0 && self.patch.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon values must be positive".into()));
        }
        crate::corpus::Version::parse(&self.patch.boundary)?;
        Ok(())
    }

    pub fn index_settings(&self) -> IndexSettings {
        IndexSettings {
            shape_scale: self.shape.alpha,
            neighborhood: self.shape.neighborhood,
            epsilon: self.embed.epsilon,
        }
    }
}
