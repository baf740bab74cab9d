use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::fuser::FuserConfig;
use crate::hierarchy::HierarchyConfig;
use crate::predictors::{
    ExternalConfig, ExternalPredictor, KinematicMixtureConfig, KinematicSurrogate, Predictor, RhConfig,
    RuleHierarchyPredictor,
};
use crate::rules::RuleParams;
use crate::scenario::SuiteConfig;
use crate::tree::TreeConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    Surrogate,
    Rh,
    External,
}

impl PredictorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Surrogate => "surrogate",
            Self::Rh => "rh",
            Self::External => "external",
        }
    }
}

/// Everything a run needs. Field names double as dotted override keys,
/// e.g. `fuser.eta` or `suite.counts.fork`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset file; when absent the synthetic suite is generated instead.
    pub dataset: Option<PathBuf>,
    pub suite: SuiteConfig,
    /// Learned slot first, rule-based slot second.
    pub predictors: [PredictorKind; 2],
    /// Samples per predictor and scene.
    pub n: usize,
    /// Prediction horizon, steps.
    pub horizon: u32,
    /// Observed history, steps.
    pub history: u32,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub fuser: FuserConfig,
    pub rules: RuleParams,
    pub hierarchy: HierarchyConfig,
    pub tree: TreeConfig,
    pub surrogate: KinematicMixtureConfig,
    pub external: ExternalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            suite: SuiteConfig::default(),
            predictors: [PredictorKind::Surrogate, PredictorKind::Rh],
            n: 20,
            horizon: 8,
            history: 4,
            seed: 0,
            out: None,
            workers: 0,
            fuser: FuserConfig::default(),
            rules: RuleParams::default(),
            hierarchy: HierarchyConfig::default(),
            tree: TreeConfig::default(),
            surrogate: KinematicMixtureConfig::default(),
            external: ExternalConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a TOML document, then applies `key=value` overrides with dotted keys.
    ///
    /// Override values are read as TOML literals when they parse as one and as
    /// plain strings otherwise, so `fuser.eta=0.4` is a number and
    /// `out=runs/a` a string.
    pub fn from_toml(text: &str, overrides: &[(String, String)]) -> Result<Self, HarnessError> {
        let mut root: toml::Table = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        for (key, value) in overrides {
            set_dotted(&mut root, key, parse_literal(value))?;
        }
        let cfg: RunConfig =
            toml::Value::Table(root).try_into().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run configuration serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        for check in [
            self.fuser.validate(),
            self.rules.validate(),
            self.hierarchy.validate(),
            self.tree.validate(),
            self.surrogate.validate(),
        ] {
            check.map_err(HarnessError::Config)?;
        }
        if self.predictors.contains(&PredictorKind::External) {
            if self.external.command.is_empty() {
                return bad("external.command must name a program when the external predictor is selected".into());
            }
            if !(self.external.timeout_secs.is_finite() && self.external.timeout_secs > 0.0) {
                return bad(format!("external.timeout_secs must be positive, got {}", self.external.timeout_secs));
            }
        }
        if self.dataset.is_none() {
            self.suite.params.validate()?;
        }
        Ok(())
    }

    pub fn rh_config(&self) -> RhConfig {
        RhConfig { tree: self.tree.clone(), rules: self.rules.clone(), hierarchy: self.hierarchy.clone() }
    }

    /// Display labels of the two slots; equal kinds get `.l` and `.r` suffixes.
    pub fn labels(&self) -> [String; 2] {
        let [l, r] = self.predictors.map(PredictorKind::name);
        if l == r {
            [format!("{l}.l"), format!("{r}.r")]
        } else {
            [l.to_owned(), r.to_owned()]
        }
    }

    /// The learned and rule-based predictors.
    pub fn build_predictors(&self) -> [Box<dyn Predictor>; 2] {
        let labels = self.labels();
        let build = |kind: PredictorKind, label: &str| -> Box<dyn Predictor> {
            match kind {
                PredictorKind::Surrogate => Box::new(KinematicSurrogate::with_label(label, self.surrogate.clone())),
                PredictorKind::Rh => Box::new(RuleHierarchyPredictor::with_label(label, self.rh_config())),
                PredictorKind::External => Box::new(ExternalPredictor::new(label, self.external.clone())),
            }
        };
        [build(self.predictors[0], &labels[0]), build(self.predictors[1], &labels[1])]
    }
}

fn parse_literal(value: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_owned()))
}

fn set_dotted(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), HarnessError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(HarnessError::Config(format!("malformed override key `{key}`")));
    }
    let (last, path) = parts.split_last().expect("split yields at least one part");
    let mut table = root;
    for part in path {
        let entry = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| HarnessError::Config(format!("override `{key}`: `{part}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}
