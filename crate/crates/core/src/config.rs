//! Run configuration: a sectioned plain-text key/value format (TOML)
//! validated into typed pipeline inputs before any computation starts.
//!
//! A filter run config looks like:
//!
//! ```toml
//! seed = 7
//!
//! [model]
//! type = "ising"      # ising | xxz | free_field
//! n = 8
//! j = 1.0
//! g = 1.05
//! h = 0.5
//!
//! [state]
//! kind = "plus"       # plus | zero | random_product | custom
//! # amplitudes = [[0.6, 0.0], [0.8, 0.0]]   (custom: one [re, im] per level)
//!
//! [filter]
//! m = 64              # or: target_delta = 1.0
//! y = "auto"          # or a number
//! epsilon_total = 1e-9
//! e_center = "auto"   # or a number
//!
//! [truncation]
//! max_bond = 0        # 0 = unbounded
//! threshold = 1e-12
//!
//! [output]
//! directory = "out"
//! ```
//!
//! Sweep plans reuse the model/truncation tables:
//!
//! ```toml
//! mode = "dense"       # dense | mps | both
//! m_grid = [64, 128, 256]
//! y = "auto"
//! seeds = [1]
//! state = "plus"
//! epsilon_total = 1e-8
//!
//! [[models]]
//! type = "ising"
//! n = 10
//! j = 1.0
//! g = 1.05
//! h = 0.5
//!
//! [[truncations]]
//! max_bond = 0
//! threshold = 1e-12
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{StateKind, SweepMode, SweepPlan, YRule};
use crate::error::{Error, Result};
use crate::filter::FilterParams;
use crate::hamiltonian::HamiltonianSpec;
use crate::mps::MpsState;
use crate::tensor::TruncationPolicy;

fn cfg_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

/// A value that is either a number or the keyword "auto".
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOrValue {
    Value(f64),
    Keyword(String),
}

impl AutoOrValue {
    fn resolve(&self, field: &str) -> Result<Option<f64>> {
        match self {
            AutoOrValue::Value(v) => Ok(Some(*v)),
            AutoOrValue::Keyword(k) if k == "auto" => Ok(None),
            AutoOrValue::Keyword(k) => Err(cfg_err(field, format!("expected a number or \"auto\", got \"{k}\""))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSection {
    #[serde(rename = "type")]
    pub kind: String,
    pub n: usize,
    #[serde(default)]
    pub j: Option<f64>,
    #[serde(default)]
    pub g: Option<f64>,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub jx: Option<f64>,
    #[serde(default)]
    pub jz: Option<f64>,
}

impl ModelSection {
    pub fn build(&self) -> Result<HamiltonianSpec> {
        match self.kind.as_str() {
            "ising" => HamiltonianSpec::ising(
                self.n,
                self.j.unwrap_or(1.0),
                self.g.unwrap_or(0.0),
                self.h.unwrap_or(0.0),
            ),
            "xxz" => HamiltonianSpec::xxz(
                self.n,
                self.jx.unwrap_or(1.0),
                self.jz.unwrap_or(1.0),
                self.h.unwrap_or(0.0),
            ),
            "free_field" => HamiltonianSpec::free_field(self.n),
            other => Err(cfg_err("model.type", format!("unsupported model \"{other}\""))),
        }
        .map_err(|e| match e {
            Error::Config { .. } => e,
            other => cfg_err("model", other.to_string()),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateSection {
    pub kind: String,
    /// Uniform local vector for `kind = "custom"`, one `[re, im]` per level.
    #[serde(default)]
    pub amplitudes: Option<Vec<[f64; 2]>>,
    /// Per-site local vectors for `kind = "per_site"`.
    #[serde(default)]
    pub site_amplitudes: Option<Vec<Vec<[f64; 2]>>>,
}

impl Default for StateSection {
    fn default() -> Self {
        Self {
            kind: "plus".into(),
            amplitudes: None,
            site_amplitudes: None,
        }
    }
}

fn normalized_local(field: &str, amps: &[[f64; 2]]) -> Result<Vec<Complex64>> {
    let local: Vec<Complex64> = amps.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
    let nrm = local.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if nrm == 0.0 {
        return Err(cfg_err(field, "zero amplitude vector"));
    }
    Ok(local.into_iter().map(|z| z / nrm).collect())
}

impl StateSection {
    pub fn build(&self, n: usize, seed: u64) -> Result<MpsState> {
        match self.kind.as_str() {
            "plus" => MpsState::all_plus(n),
            "zero" => MpsState::all_zero(n),
            "random_product" => StateKind::RandomProduct.build(n, seed),
            "custom" => {
                let amps = self.amplitudes.as_ref().ok_or_else(|| {
                    cfg_err("state.amplitudes", "custom state needs amplitudes")
                })?;
                let local = normalized_local("state.amplitudes", amps)?;
                MpsState::uniform_product(n, &local)
            }
            "per_site" => {
                let sites = self.site_amplitudes.as_ref().ok_or_else(|| {
                    cfg_err("state.site_amplitudes", "per_site state needs site_amplitudes")
                })?;
                if sites.len() != n {
                    return Err(cfg_err(
                        "state.site_amplitudes",
                        format!("expected {n} local vectors, got {}", sites.len()),
                    ));
                }
                let locals = sites
                    .iter()
                    .map(|amps| normalized_local("state.site_amplitudes", amps))
                    .collect::<Result<Vec<_>>>()?;
                MpsState::product_state(&locals)
            }
            other => Err(cfg_err("state.kind", format!("unsupported state kind \"{other}\""))),
        }
        .map_err(|e| match e {
            Error::Config { .. } => e,
            other => cfg_err("state", other.to_string()),
        })
    }

    pub fn sweep_kind(&self) -> Result<StateKind> {
        match self.kind.as_str() {
            "plus" => Ok(StateKind::Plus),
            "zero" => Ok(StateKind::Zero),
            "random_product" => Ok(StateKind::RandomProduct),
            other => Err(cfg_err("state.kind", format!("unsupported sweep state \"{other}\""))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FilterSection {
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub target_delta: Option<f64>,
    #[serde(default)]
    pub y: Option<AutoOrValue>,
    #[serde(default = "default_epsilon")]
    pub epsilon_total: f64,
    #[serde(default)]
    pub e_center: Option<AutoOrValue>,
}

fn default_epsilon() -> f64 {
    1e-9
}

impl FilterSection {
    /// Resolves M, y and the epsilon budget; `e_center` resolution needs
    /// the state and is returned separately.
    pub fn resolve(&self, n: usize) -> Result<(usize, f64, f64)> {
        let m = match (self.m, self.target_delta) {
            (Some(m), None) => {
                if m < 2 || m % 2 != 0 {
                    return Err(cfg_err("filter.m", format!("must be even and >= 2, got {m}")));
                }
                m
            }
            (None, Some(delta)) => {
                if !(delta > 0.0) {
                    return Err(cfg_err("filter.target_delta", "must be positive"));
                }
                crate::filter::suggest_params(n, delta, None)
                    .map_err(|e| cfg_err("filter.target_delta", e.to_string()))?
                    .m
            }
            (Some(_), Some(_)) => {
                return Err(cfg_err("filter", "give either m or target_delta, not both"));
            }
            (None, None) => {
                return Err(cfg_err("filter", "either m or target_delta is required"));
            }
        };
        let y = match &self.y {
            None => FilterParams::auto_y(m),
            Some(v) => match v.resolve("filter.y")? {
                None => FilterParams::auto_y(m),
                Some(y) => {
                    if !(y > 0.0) {
                        return Err(cfg_err("filter.y", "must be positive"));
                    }
                    y
                }
            },
        };
        if !(self.epsilon_total > 0.0 && self.epsilon_total <= 1.0) {
            return Err(cfg_err("filter.epsilon_total", "must lie in (0, 1]"));
        }
        Ok((m, y, self.epsilon_total))
    }

    pub fn e_center_override(&self) -> Result<Option<f64>> {
        match &self.e_center {
            None => Ok(None),
            Some(v) => v.resolve("filter.e_center"),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TruncationSection {
    #[serde(default)]
    pub max_bond: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    1e-12
}

impl Default for TruncationSection {
    fn default() -> Self {
        Self {
            max_bond: 0,
            threshold: default_threshold(),
        }
    }
}

impl TruncationSection {
    pub fn build(&self) -> Result<TruncationPolicy> {
        let cap = if self.max_bond == 0 {
            None
        } else {
            Some(self.max_bond)
        };
        TruncationPolicy::new(cap, self.threshold)
            .map_err(|e| cfg_err("truncation", e.to_string()))
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct OutputSection {
    #[serde(default)]
    pub directory: Option<String>,
    /// Report formats; json and csv are always produced where they apply.
    #[serde(default)]
    pub formats: Option<Vec<String>>,
}

impl OutputSection {
    pub fn validate(&self) -> Result<()> {
        if let Some(formats) = &self.formats {
            for f in formats {
                if f != "json" && f != "csv" {
                    return Err(cfg_err(
                        "output.formats",
                        format!("unsupported format \"{f}\" (json, csv)"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct OracleSection {
    /// Number of characteristic-function grid points over [0, sigma/2].
    #[serde(default = "default_phi_points")]
    pub phi_points: usize,
    #[serde(default = "default_s_floor")]
    pub s_ratio_floor: f64,
}

fn default_phi_points() -> usize {
    65
}

fn default_s_floor() -> f64 {
    crate::oracle::DEFAULT_S_RATIO_FLOOR
}

/// Top-level config for `filter` and `oracle` runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSection,
    #[serde(default)]
    pub state: StateSection,
    #[serde(default)]
    pub filter: Option<FilterSection>,
    #[serde(default)]
    pub truncation: TruncationSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub oracle: Option<OracleSection>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| cfg_err("<config>", e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }
}

/// Top-level config for `sweep` runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(default)]
    pub mode: Option<String>,
    pub m_grid: Vec<usize>,
    #[serde(default)]
    pub y: Option<AutoOrValue>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_state")]
    pub state: String,
    #[serde(default = "default_epsilon")]
    pub epsilon_total: f64,
    pub models: Vec<ModelSection>,
    #[serde(default)]
    pub truncations: Vec<TruncationSection>,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_state() -> String {
    "plus".into()
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| cfg_err("<plan>", e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn build_plan(&self) -> Result<SweepPlan> {
        let mode = match self.mode.as_deref().unwrap_or("both") {
            "dense" => SweepMode::Dense,
            "mps" => SweepMode::Mps,
            "both" => SweepMode::Both,
            other => return Err(cfg_err("mode", format!("unsupported mode \"{other}\""))),
        };
        let models = self
            .models
            .iter()
            .map(|m| m.build())
            .collect::<Result<Vec<_>>>()?;
        let truncations = if self.truncations.is_empty() {
            vec![TruncationSection::default()]
        } else {
            self.truncations.clone()
        };
        let policies = truncations
            .iter()
            .map(|t| t.build())
            .collect::<Result<Vec<_>>>()?;
        let y_rule = match &self.y {
            None => YRule::Auto,
            Some(v) => match v.resolve("y")? {
                None => YRule::Auto,
                Some(y) => YRule::Fixed(y),
            },
        };
        let state = StateSection {
            kind: self.state.clone(),
            amplitudes: None,
            site_amplitudes: None,
        }
        .sweep_kind()?;
        if self.m_grid.is_empty() {
            return Err(cfg_err("m_grid", "must be nonempty"));
        }
        Ok(SweepPlan {
            models,
            m_grid: self.m_grid.clone(),
            y_rule,
            policies,
            seeds: self.seeds.clone(),
            state,
            mode,
            epsilon_total: self.epsilon_total,
        })
    }
}
