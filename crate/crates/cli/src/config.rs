//! Run configuration loaded from a JSON file.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    PerMap,
    WeightFunction,
}

/// A measure candidate: either the string `"lifted"` (the stationary
/// measure of the normalized system, lifted to symbol space) or a
/// periodic-tail orbit description.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CandidateSpec {
    Keyword(String),
    Orbit {
        x0: f64,
        #[serde(default)]
        preperiod: Vec<u8>,
        period: Vec<u8>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Branch maps as expressions in `x`.
    pub maps: Vec<String>,
    pub weight_mode: WeightMode,
    /// Per-map weight expressions (`per_map` mode).
    #[serde(default)]
    pub u: Option<Vec<String>>,
    /// Weight-function expression (`weight_function` mode).
    #[serde(default)]
    pub phi: Option<String>,
    /// Grid cells; must be even. Default 1024.
    #[serde(default)]
    pub grid_n: Option<usize>,
    /// Power-iteration tolerance. Default 1e-10.
    #[serde(default)]
    pub tol: Option<f64>,
    /// Power-iteration cap. Default 100000.
    #[serde(default)]
    pub max_iter: Option<usize>,
    /// Random seed for simulation. Default 0.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Measure candidates. Default `["lifted"]`.
    #[serde(default)]
    pub candidates: Option<Vec<CandidateSpec>>,
    /// Reference function for the entropy descent. Default `1`.
    #[serde(default)]
    pub psi: Option<String>,
    /// Inverse temperatures for `beta-sweep`. Default `[1,2,4,8,16]`.
    #[serde(default)]
    pub betas: Option<Vec<f64>>,
    /// Chaos-game steps. Default 100000.
    #[serde(default)]
    pub steps: Option<usize>,
    /// States discarded before averaging. Default `steps / 100`.
    #[serde(default)]
    pub burn_in: Option<usize>,
    /// Histogram cells for the empirical measure. Default 256.
    #[serde(default)]
    pub bins: Option<usize>,
    /// Simulation start point. Default 0.5.
    #[serde(default)]
    pub x0: Option<f64>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Config = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.maps.is_empty() {
            bail!("config needs at least one map");
        }
        match self.weight_mode {
            WeightMode::PerMap => {
                let u = self
                    .u
                    .as_ref()
                    .context("per_map mode needs the `u` weight list")?;
                if u.len() != self.maps.len() {
                    bail!(
                        "got {} weights for {} maps; one weight per map",
                        u.len(),
                        self.maps.len()
                    );
                }
            }
            WeightMode::WeightFunction => {
                if self.phi.is_none() {
                    bail!("weight_function mode needs `phi`");
                }
            }
        }
        if let Some(candidates) = &self.candidates {
            for (idx, c) in candidates.iter().enumerate() {
                match c {
                    CandidateSpec::Keyword(k) if k == "lifted" => {}
                    CandidateSpec::Keyword(k) => {
                        bail!("candidate {idx}: unknown keyword {k:?}; expected \"lifted\"")
                    }
                    CandidateSpec::Orbit { period, .. } => {
                        if period.is_empty() {
                            bail!("candidate {idx}: period must be nonempty");
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
