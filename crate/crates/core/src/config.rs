//! Run configuration: a JSON document with a versioned schema.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "model": { "kind": "burgers", "nu": 0.0001, "n_cells": 30 },
//!   "lanczos": { "nev": 3 },
//!   "seed": 0
//! }
//! ```
//!
//! Every key other than `schema_version` and `model.kind` has a default.
//! Unknown keys are rejected with their path.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::eigensolver::LanczosParams;
use crate::error::{Error, Result};
use crate::models::{
    burgers_model, cahn_hilliard_model, gross_pitaevskii_model, heat_model, identity_model, scalar_ode_model,
    BurgersParams, CahnHilliardParams, GrossPitaevskiiParams, HeatParams, IdentityParams, ModelSpec, ScalarOdeParams,
};
use crate::solvers::NewtonParams;
use crate::verification::SuiteSettings;

pub const SCHEMA_VERSION: u32 = 1;

pub const MODEL_KINDS: [&str; 6] = [
    "burgers",
    "gross_pitaevskii",
    "cahn_hilliard",
    "heat",
    "identity",
    "scalar_ode",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Burgers(BurgersParams),
    GrossPitaevskii(GrossPitaevskiiParams),
    CahnHilliard(CahnHilliardParams),
    Heat(HeatParams),
    Identity(IdentityParams),
    ScalarOde(ScalarOdeParams),
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Burgers(BurgersParams::default())
    }
}

impl ModelConfig {
    /// Default parameters for a model name.
    pub fn by_name(kind: &str) -> Result<Self> {
        Ok(match kind {
            "burgers" => ModelConfig::Burgers(Default::default()),
            "gross_pitaevskii" => ModelConfig::GrossPitaevskii(Default::default()),
            "cahn_hilliard" => ModelConfig::CahnHilliard(Default::default()),
            "heat" => ModelConfig::Heat(Default::default()),
            "identity" => ModelConfig::Identity(Default::default()),
            "scalar_ode" => ModelConfig::ScalarOde(Default::default()),
            other => return Err(Error::UnknownModel(other.to_string())),
        })
    }

    pub fn build(&self) -> Result<ModelSpec> {
        match self {
            ModelConfig::Burgers(p) => burgers_model(p),
            ModelConfig::GrossPitaevskii(p) => gross_pitaevskii_model(p),
            ModelConfig::CahnHilliard(p) => cahn_hilliard_model(p),
            ModelConfig::Heat(p) => heat_model(p),
            ModelConfig::Identity(p) => identity_model(p),
            ModelConfig::ScalarOde(p) => scalar_ode_model(p),
        }
    }
}

/// Settings of the `growth` subcommand and of the optional growth curve
/// written by `gst`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthConfig {
    /// Perturbation size; `null` means `1e-7 ||m_0||` in the input norm.
    pub amplitude: Option<f64>,
    /// Length of the curve in steps; `null` means the model's `n_steps`.
    pub n_steps: Option<usize>,
    /// Also write `growth_curve.csv` after `gst`.
    pub after_gst: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "NewtonParams::strict")]
    pub newton: NewtonParams,
    #[serde(default)]
    pub lanczos: LanczosParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub verify: SuiteSettings,
    #[serde(default)]
    pub growth: GrowthConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model: ModelConfig::default(),
            newton: NewtonParams::strict(),
            lanczos: LanczosParams::default(),
            seed: 0,
            verify: SuiteSettings::default(),
            growth: GrowthConfig::default(),
        }
    }
}

impl Config {
    /// Parse and validate. Errors name the offending key.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("not valid JSON: {e}")))?;
        match value.get("schema_version") {
            None => return Err(Error::Config("missing key `schema_version`".into())),
            Some(v) if v.as_u64() != Some(SCHEMA_VERSION as u64) => {
                return Err(Error::Config(format!(
                    "`schema_version`: expected {SCHEMA_VERSION}, got {v}"
                )))
            }
            _ => {}
        }
        if let Some(kind) = value.get("model").and_then(|m| m.get("kind")) {
            let kind = kind
                .as_str()
                .ok_or_else(|| Error::Config("`model.kind` must be a string".into()))?;
            if !MODEL_KINDS.contains(&kind) {
                return Err(Error::UnknownModel(kind.to_string()));
            }
        }
        if let Some(e) = model_body_error(&value) {
            return Err(e);
        }
        let config: Config = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("`{path}`: {}", e.into_inner()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let named = |key: &str, e: Error| match e {
            Error::InvalidParams(m) => Error::Config(format!("`{key}`: {m}")),
            other => other,
        };
        self.newton.validate().map_err(|e| named("newton", e))?;
        self.lanczos.validate().map_err(|e| named("lanczos", e))?;
        if !(self.verify.taylor_h0 > 0.0) || self.verify.taylor_levels < 2 {
            return Err(Error::Config(
                "`verify`: taylor_h0 must be positive and taylor_levels at least 2".into(),
            ));
        }
        if !(self.verify.oracle_tol > 0.0) {
            return Err(Error::Config("`verify.oracle_tol` must be positive".into()));
        }
        if let Some(a) = self.growth.amplitude {
            if !(a > 0.0) {
                return Err(Error::Config("`growth.amplitude` must be positive".into()));
            }
        }
        self.model.build().map(|_| ())
    }

    /// The model with the configured Newton settings.
    pub fn model_spec(&self) -> Result<ModelSpec> {
        Ok(self.model.build()?.with_newton(self.newton))
    }

    /// Eigensolver settings. The top-level `seed` replaces `lanczos.seed`.
    pub fn lanczos_params(&self) -> LanczosParams {
        LanczosParams {
            seed: self.seed,
            ..self.lanczos.clone()
        }
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// SHA-256 of the compact serialisation, in hex.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// The tagged `model` enum buffers its body, which hides the failing key
/// from the path tracker. Parsing the body as the concrete parameter type
/// recovers it.
fn model_body_error(value: &serde_json::Value) -> Option<Error> {
    let mut body = value.get("model")?.as_object()?.clone();
    let kind = body.remove("kind")?;
    let body = serde_json::Value::Object(body);
    fn check<T: serde::de::DeserializeOwned>(body: serde_json::Value) -> Option<Error> {
        serde_path_to_error::deserialize::<_, T>(body).err().map(|e| {
            let path = e.path().to_string();
            let key = if path == "." { "model".to_string() } else { format!("model.{path}") };
            Error::Config(format!("`{key}`: {}", e.into_inner()))
        })
    }
    match kind.as_str()? {
        "burgers" => check::<BurgersParams>(body),
        "gross_pitaevskii" => check::<GrossPitaevskiiParams>(body),
        "cahn_hilliard" => check::<CahnHilliardParams>(body),
        "heat" => check::<HeatParams>(body),
        "identity" => check::<IdentityParams>(body),
        "scalar_ode" => check::<ScalarOdeParams>(body),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = Config::from_json(r#"{"schema_version": 1}"#).unwrap();
        assert_eq!(c, Config::default());
    }

    #[test]
    fn round_trip_preserves_everything() {
        let c = Config {
            model: ModelConfig::by_name("cahn_hilliard").unwrap(),
            seed: 9,
            ..Default::default()
        };
        let back = Config::from_json(&c.to_pretty_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = Config::from_json(r#"{"schema_version": 1, "model": {"kind": "burgers", "viscosity": 1}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Config(_)));
        assert!(msg.contains("viscosity"), "{msg}");
    }

    #[test]
    fn wrong_type_inside_model_reports_path() {
        let err = Config::from_json(r#"{"schema_version": 1, "model": {"kind": "heat", "n_cells": "ten"}}"#).unwrap_err();
        assert!(err.to_string().contains("`model.n_cells`"), "{err}");
    }

    #[test]
    fn wrong_type_reports_path() {
        let err = Config::from_json(r#"{"schema_version": 1, "lanczos": {"nev": "three"}}"#).unwrap_err();
        assert!(err.to_string().contains("lanczos.nev"), "{err}");
    }

    #[test]
    fn unknown_model_is_distinct() {
        let err = Config::from_json(r#"{"schema_version": 1, "model": {"kind": "navier_stokes"}}"#).unwrap_err();
        assert!(matches!(err, Error::UnknownModel(k) if k == "navier_stokes"));
    }

    #[test]
    fn schema_version_is_required() {
        assert!(matches!(Config::from_json("{}"), Err(Error::Config(_))));
        assert!(matches!(Config::from_json(r#"{"schema_version": 2}"#), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_physics_is_a_config_error() {
        let err = Config::from_json(r#"{"schema_version": 1, "model": {"kind": "burgers", "nu": -1}}"#).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
