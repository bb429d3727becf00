//! JSON design configuration: parsing, semantic validation, and canonical
//! re-serialization.
//!
//! The raw serde structs mirror the file format exactly and round-trip
//! through `dump` unchanged, so a dumped config reproduces the same solves
//! byte for byte. Semantic validation happens in a second step that builds
//! the typed design objects.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::commensurate::{BasketDesign, SubtrialDesign, WeightMatrix};
use crate::error::{Error, Result};
use crate::sim::{Allocation, ScenarioConfig};
use crate::solver::DecisionSpec;
use crate::stats::GammaMixtureHyper;

/// One subtrial section of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubtrialEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub sigma2: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub m0: f64,
    pub s02: f64,
}

/// Weight specification: an explicit symmetric matrix, or arm-level summary
/// statistics from which Hellinger distances are computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightsEntry {
    Matrix(Vec<Vec<f64>>),
    Summaries {
        mode: String,
        arm_means: Vec<f64>,
        arm_sds: Vec<f64>,
    },
}

/// Gamma-mixture hyperparameter section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperEntry {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

/// Futility thresholds: one shared value or one per subtrial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZetaEntry {
    Scalar(f64),
    PerSubtrial(Vec<f64>),
}

/// Decision-rule section of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionEntry {
    pub eta: f64,
    pub zeta: ZetaEntry,
    pub delta: f64,
    pub direction: String,
}

/// Optional simulation section. `mu_C` defaults to all zeros, `n` to sizes
/// solved on the fly, and `allocation` to fixed arm splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationEntry {
    #[serde(rename = "mu_E")]
    pub mu_e: Vec<f64>,
    #[serde(rename = "mu_C", default, skip_serializing_if = "Option::is_none")]
    pub mu_c: Option<Vec<f64>>,
    pub replicates: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<String>,
}

/// Raw design configuration file, structurally one-to-one with the JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub subtrials: Vec<SubtrialEntry>,
    pub weights: WeightsEntry,
    pub hyper: HyperEntry,
    pub c0: f64,
    pub decision: DecisionEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationEntry>,
}

/// Validated simulation settings ready to pair with planned sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub mu_e: Vec<f64>,
    pub mu_c: Vec<f64>,
    pub replicates: u64,
    pub seed: u64,
    pub n: Option<Vec<u64>>,
    pub allocation: Allocation,
}

/// A parsed and semantically validated configuration.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub raw: DesignConfigFile,
    pub design: BasketDesign,
    pub spec: DecisionSpec,
    pub sim: Option<SimSettings>,
}

impl LoadedConfig {
    /// Display label of the whole design, for report headers.
    pub fn label(&self) -> &str {
        self.raw.label.as_deref().unwrap_or("design")
    }

    /// Display labels of the subtrials, filling in S1, S2, ... where the
    /// config gives none.
    pub fn subtrial_labels(&self) -> Vec<String> {
        self.raw
            .subtrials
            .iter()
            .enumerate()
            .map(|(i, sub)| sub.label.clone().unwrap_or_else(|| format!("S{}", i + 1)))
            .collect()
    }

    /// Builds the simulation scenario at the given planned sizes. The truth
    /// uses the design's sigma2 and R in every subtrial.
    pub fn scenario(&self, n: Vec<u64>) -> Result<ScenarioConfig> {
        let sim = self
            .sim
            .as_ref()
            .ok_or_else(|| Error::Config("simulation: section required for this command".into()))?;
        let sigma2 = self.design.subtrials().iter().map(|s| s.sigma2).collect();
        let r = self.design.subtrials().iter().map(|s| s.r).collect();
        ScenarioConfig::new(
            sim.mu_e.clone(),
            sim.mu_c.clone(),
            sigma2,
            n,
            r,
            sim.replicates,
            sim.seed,
            sim.allocation,
        )
    }
}

/// Parses a JSON configuration document and validates it semantically.
pub fn parse(text: &str) -> Result<LoadedConfig> {
    let raw: DesignConfigFile =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
    validate(raw)
}

/// Reads and parses a configuration file.
pub fn load(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("config: cannot read {}: {e}", path.display())))?;
    parse(&text)
}

/// Canonical serialization of a raw config, newline terminated. Parsing the
/// output reproduces the same raw struct, so solves repeat byte for byte.
pub fn dump(raw: &DesignConfigFile) -> String {
    let mut text = serde_json::to_string_pretty(raw).expect("config structs always serialize");
    text.push('\n');
    text
}

fn validate(raw: DesignConfigFile) -> Result<LoadedConfig> {
    let k = raw.subtrials.len();
    if k < 2 {
        return Err(Error::Config("subtrials: at least 2 required".into()));
    }
    let subtrials = raw
        .subtrials
        .iter()
        .map(|sub| SubtrialDesign::new(sub.sigma2, sub.r, sub.m0, sub.s02))
        .collect::<Result<Vec<_>>>()?;
    let weights = match &raw.weights {
        WeightsEntry::Matrix(rows) => WeightMatrix::new(rows.clone())?,
        WeightsEntry::Summaries { mode, arm_means, arm_sds } => {
            if mode != "hellinger" {
                return Err(Error::Config(format!(
                    "weights.mode: expected \"hellinger\", got \"{mode}\""
                )));
            }
            for (name, len) in [("arm_means", arm_means.len()), ("arm_sds", arm_sds.len())] {
                if len != k {
                    return Err(Error::Config(format!(
                        "weights.{name}: expected {k} entries, got {len}"
                    )));
                }
            }
            WeightMatrix::from_hellinger(arm_means, arm_sds)?
        }
    };
    let hyper = GammaMixtureHyper::new(raw.hyper.a1, raw.hyper.b1, raw.hyper.a2, raw.hyper.b2)?;
    let design = BasketDesign::new(subtrials, weights, hyper, raw.c0)?;
    let zetas = match &raw.decision.zeta {
        ZetaEntry::Scalar(z) => vec![*z; k],
        ZetaEntry::PerSubtrial(zs) if zs.len() == 1 => vec![zs[0]; k],
        ZetaEntry::PerSubtrial(zs) => zs.clone(),
    };
    let spec = DecisionSpec::new(
        raw.decision.eta,
        zetas,
        raw.decision.delta,
        raw.decision.direction.parse()?,
    )?;
    spec.check_len(k)?;
    let sim = match &raw.simulation {
        None => None,
        Some(entry) => {
            if entry.mu_e.len() != k {
                return Err(Error::Config(format!(
                    "simulation.mu_E: expected {k} entries, got {}",
                    entry.mu_e.len()
                )));
            }
            let mu_c = match &entry.mu_c {
                None => vec![0.0; k],
                Some(mu_c) => {
                    if mu_c.len() != k {
                        return Err(Error::Config(format!(
                            "simulation.mu_C: expected {k} entries, got {}",
                            mu_c.len()
                        )));
                    }
                    mu_c.clone()
                }
            };
            if let Some(n) = &entry.n {
                if n.len() != k {
                    return Err(Error::Config(format!(
                        "simulation.n: expected {k} entries, got {}",
                        n.len()
                    )));
                }
            }
            let allocation = match &entry.allocation {
                None => Allocation::Fixed,
                Some(text) => text.parse()?,
            };
            Some(SimSettings {
                mu_e: entry.mu_e.clone(),
                mu_c,
                replicates: entry.replicates,
                seed: entry.seed,
                n: entry.n.clone(),
                allocation,
            })
        }
    };
    Ok(LoadedConfig { raw, design, spec, sim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn three_arm_config() -> String {
        r#"{
            "label": "triple",
            "subtrials": [
                {"label": "A", "sigma2": 21.29, "R": 0.5, "m0": 0.0, "s02": 100.0},
                {"sigma2": 22.5, "R": 0.5, "m0": 0.0, "s02": 100.0},
                {"sigma2": 22.5, "R": 0.5, "m0": 0.0, "s02": 100.0}
            ],
            "weights": [
                [0.0, 0.1, 0.3],
                [0.1, 0.0, 0.2],
                [0.3, 0.2, 0.0]
            ],
            "hyper": {"a1": 1.1, "b1": 1.1, "a2": 54.0, "b2": 3.0},
            "c0": 0.05,
            "decision": {
                "eta": 0.95,
                "zeta": [0.90, 0.80, 0.80],
                "delta": 2.3,
                "direction": "greater_is_better"
            },
            "simulation": {
                "mu_E": [2.3, 2.3, 2.3],
                "replicates": 500,
                "seed": 7
            }
        }"#
        .to_string()
    }

    #[test]
    fn parses_a_complete_design() {
        let loaded = parse(&three_arm_config()).unwrap();
        assert_eq!(loaded.design.k(), 3);
        assert_eq!(loaded.label(), "triple");
        assert_eq!(loaded.subtrial_labels(), vec!["A", "S2", "S3"]);
        assert_abs_diff_eq!(loaded.design.subtrial(0).sigma2, 21.29);
        assert_abs_diff_eq!(loaded.design.weights().get(0, 2), 0.3);
        assert_abs_diff_eq!(loaded.spec.zeta(0), 0.90);
        assert_abs_diff_eq!(loaded.spec.zeta(2), 0.80);
        let sim = loaded.sim.as_ref().unwrap();
        assert_eq!(sim.mu_c, vec![0.0; 3]);
        assert_eq!(sim.allocation, Allocation::Fixed);
        assert!(sim.n.is_none());
        let scenario = loaded.scenario(vec![34, 12, 19]).unwrap();
        assert_eq!(scenario.n, vec![34, 12, 19]);
        assert_abs_diff_eq!(scenario.sigma2[0], 21.29);
    }

    #[test]
    fn scalar_zeta_broadcasts_to_all_subtrials() {
        let text = three_arm_config().replace("[0.90, 0.80, 0.80]", "0.85");
        let loaded = parse(&text).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(loaded.spec.zeta(i), 0.85);
        }
    }

    #[test]
    fn zeta_length_mismatch_names_the_field() {
        let text = three_arm_config().replace("[0.90, 0.80, 0.80]", "[0.90, 0.80]");
        let err = parse(&text).unwrap_err();
        assert_eq!(err.to_string(), "decision.zeta: expected 1 or 3 thresholds, got 2");
    }

    #[test]
    fn summary_mode_weights_match_direct_hellinger_computation() {
        let text = r#"{
            "subtrials": [
                {"sigma2": 0.34, "R": 0.5, "m0": 0.0, "s02": 100.0},
                {"sigma2": 0.12, "R": 0.5, "m0": 0.0, "s02": 100.0}
            ],
            "weights": {
                "mode": "hellinger",
                "arm_means": [-0.489, 0.226],
                "arm_sds": [0.587, 0.345]
            },
            "hyper": {"a1": 1.1, "b1": 1.1, "a2": 54.0, "b2": 3.0},
            "c0": 0.05,
            "decision": {"eta": 0.95, "zeta": 0.80, "delta": -0.4, "direction": "smaller_is_better"}
        }"#;
        let loaded = parse(text).unwrap();
        let direct = WeightMatrix::from_hellinger(&[-0.489, 0.226], &[0.587, 0.345]).unwrap();
        assert_eq!(loaded.design.weights().get(0, 1), direct.get(0, 1));
        assert!(loaded.sim.is_none());
    }

    #[test]
    fn empty_subtrial_list_reports_the_required_minimum() {
        let text = r#"{
            "subtrials": [],
            "weights": [],
            "hyper": {"a1": 1.1, "b1": 1.1, "a2": 54.0, "b2": 3.0},
            "c0": 0.05,
            "decision": {"eta": 0.95, "zeta": 0.80, "delta": 2.3, "direction": "greater_is_better"}
        }"#;
        let err = parse(text).unwrap_err();
        assert_eq!(err.to_string(), "subtrials: at least 2 required");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn unknown_and_missing_fields_are_named() {
        let unknown = three_arm_config().replace("\"c0\": 0.05", "\"c0\": 0.05, \"cO\": 1");
        let err = parse(&unknown).unwrap_err();
        assert!(err.to_string().contains("cO"), "message was: {err}");
        let missing = three_arm_config().replace("\"c0\": 0.05,", "");
        let err = parse(&missing).unwrap_err();
        assert!(err.to_string().contains("c0"), "message was: {err}");
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let text = three_arm_config().replace("[0.1, 0.0, 0.2]", "[0.15, 0.0, 0.2]");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("symmetric"), "message was: {err}");
    }

    #[test]
    fn wrong_direction_string_is_rejected() {
        let text = three_arm_config().replace("greater_is_better", "upwards");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("upwards"), "message was: {err}");
    }

    #[test]
    fn dump_round_trips_the_raw_structure() {
        let loaded = parse(&three_arm_config()).unwrap();
        let dumped = dump(&loaded.raw);
        assert!(dumped.ends_with('\n'));
        let reloaded = parse(&dumped).unwrap();
        assert_eq!(loaded.raw, reloaded.raw);
        assert_eq!(dump(&reloaded.raw), dumped);
    }

    #[test]
    fn simulation_overrides_are_honoured() {
        let text = three_arm_config().replace(
            "\"seed\": 7",
            "\"seed\": 7, \"n\": [34, 12, 19], \"allocation\": \"randomised\", \"mu_C\": [0.1, 0.2, 0.3]",
        );
        let loaded = parse(&text).unwrap();
        let sim = loaded.sim.as_ref().unwrap();
        assert_eq!(sim.n.as_deref(), Some(&[34, 12, 19][..]));
        assert_eq!(sim.allocation, Allocation::Randomised);
        assert_eq!(sim.mu_c, vec![0.1, 0.2, 0.3]);
    }
}
