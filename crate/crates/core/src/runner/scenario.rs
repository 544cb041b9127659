use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::learning::{
    FeedbackChannel, LearningParams, Preference, ScriptedOracle, UserOracle,
};
use crate::planner::{plan_for, validate_rules, PlanRule, PlanStep};
use crate::world::{build_state_space, ActionRecord, ActionVocabulary, DeviceSpec, JointState, StateSpace};

pub const DEFAULT_FEEDBACK_TIMEOUT_MS: u64 = 30_000;

fn default_timeout_ms() -> u64 {
    DEFAULT_FEEDBACK_TIMEOUT_MS
}

/// On-disk scenario, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(with = "device_map")]
    pub devices: Vec<DeviceSpec>,
    #[serde(default)]
    pub rules: Vec<PlanRule>,
    pub oracle: OracleSpec,
    pub initial_state: BTreeMap<String, String>,
    pub steps_per_episode: u32,
    pub episodes: u32,
    #[serde(default)]
    pub params: LearningParams,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terminal_states: Vec<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceSpec {
    #[serde(rename = "match", default)]
    pub when: BTreeMap<String, String>,
    pub action: String,
}

/// `actions` lists extra vocabulary entries the oracle may pick beyond what
/// the rules induce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    Scripted {
        #[serde(default)]
        preferences: Vec<PreferenceSpec>,
        #[serde(default)]
        default_to_plan: bool,
        #[serde(default)]
        actions: Vec<String>,
    },
    Greedy {
        #[serde(default)]
        actions: Vec<String>,
    },
    Random {
        #[serde(default)]
        actions: Vec<String>,
    },
    Collaborative {
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default)]
        actions: Vec<String>,
    },
}

impl OracleSpec {
    fn extra_actions(&self) -> &[String] {
        match self {
            OracleSpec::Scripted { actions, .. }
            | OracleSpec::Greedy { actions }
            | OracleSpec::Random { actions }
            | OracleSpec::Collaborative { actions, .. } => actions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleConfig {
    Scripted(ScriptedOracle),
    Greedy,
    Random,
    Collaborative { timeout: Duration },
}

/// Validated scenario with a closed action vocabulary.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub space: Arc<StateSpace>,
    pub vocab: Arc<ActionVocabulary>,
    pub rules: Vec<PlanRule>,
    pub oracle: OracleConfig,
    pub initial_state: JointState,
    pub steps_per_episode: u32,
    pub episodes: u32,
    pub params: LearningParams,
    pub seed: u64,
    pub terminal: Vec<usize>,
    file: ScenarioFile,
}

pub fn read_scenario_file(path: impl AsRef<Path>) -> Result<ScenarioFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    Scenario::from_file(read_scenario_file(path)?)
}

fn parse_action(space: &StateSpace, name: &str) -> std::result::Result<ActionRecord, String> {
    let a = ActionRecord::parse(name).map_err(|e| e.to_string())?;
    space.check_action(&a).map_err(|e| e.to_string())?;
    Ok(a)
}

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> Result<Scenario> {
        let space = build_state_space(file.devices.iter().cloned())
            .map_err(|e| Error::Validation(vec![e.to_string()]))?;
        let mut problems = Vec::new();
        if file.steps_per_episode == 0 {
            problems.push("steps_per_episode must be at least 1".to_owned());
        }
        if file.episodes == 0 {
            problems.push("episodes must be at least 1".to_owned());
        }
        if let Err(e) = file.params.validate() {
            problems.push(e.to_string());
        }

        let mut vocab = ActionVocabulary::new();
        let report = validate_rules(&file.rules, &space, &mut vocab);
        problems.extend(report.findings.iter().map(ToString::to_string));

        let initial_state = JointState::new(file.initial_state.clone());
        if let Err(e) = space.check_state(&initial_state) {
            problems.push(format!("initial_state: {e}"));
        }

        for name in file.oracle.extra_actions() {
            match parse_action(&space, name) {
                Ok(a) => {
                    vocab.register(a);
                }
                Err(e) => problems.push(format!("oracle action `{name}`: {e}")),
            }
        }
        let oracle = match &file.oracle {
            OracleSpec::Scripted {
                preferences,
                default_to_plan,
                ..
            } => {
                let mut resolved = Vec::new();
                for (i, p) in preferences.iter().enumerate() {
                    if let Err(e) = space.check_partial(&p.when) {
                        problems.push(format!("preference {i}: {e}"));
                    }
                    match parse_action(&space, &p.action) {
                        Ok(action) => {
                            vocab.register(action.clone());
                            resolved.push(Preference {
                                when: p.when.clone(),
                                action,
                            });
                        }
                        Err(e) => problems.push(format!("preference {i} action `{}`: {e}", p.action)),
                    }
                }
                OracleConfig::Scripted(ScriptedOracle {
                    preferences: resolved,
                    default_to_plan: *default_to_plan,
                })
            }
            OracleSpec::Greedy { .. } => OracleConfig::Greedy,
            OracleSpec::Random { .. } => OracleConfig::Random,
            OracleSpec::Collaborative { timeout_ms, .. } => OracleConfig::Collaborative {
                timeout: Duration::from_millis(*timeout_ms),
            },
        };

        let mut terminal = Vec::new();
        for (i, t) in file.terminal_states.iter().enumerate() {
            match space.encode_state(&JointState::new(t.clone())) {
                Ok(idx) => terminal.push(idx),
                Err(e) => problems.push(format!("terminal_states[{i}]: {e}")),
            }
        }
        if let Ok(idx) = space.encode_state(&initial_state) {
            if terminal.contains(&idx) {
                problems.push("initial_state is terminal".to_owned());
            }
        }

        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        terminal.sort_unstable();
        terminal.dedup();
        Ok(Scenario {
            name: file.name.clone(),
            space: Arc::new(space),
            vocab: Arc::new(vocab),
            rules: file.rules.clone(),
            oracle,
            initial_state,
            steps_per_episode: file.steps_per_episode,
            episodes: file.episodes,
            params: file.params,
            seed: file.seed,
            terminal,
            file,
        })
    }

    pub fn file(&self) -> &ScenarioFile {
        &self.file
    }

    pub fn plan_for(&self, state: &JointState) -> Result<PlanStep> {
        plan_for(&self.space, state, &self.rules)
    }

    /// Builds the runtime oracle. Collaborative scenarios need `channel`;
    /// the others ignore it.
    pub fn build_oracle(&self, channel: Option<Box<dyn FeedbackChannel>>) -> Result<UserOracle> {
        Ok(match &self.oracle {
            OracleConfig::Scripted(s) => UserOracle::Scripted(s.clone()),
            OracleConfig::Greedy => UserOracle::GreedyFromQ,
            OracleConfig::Random => UserOracle::UniformRandom,
            OracleConfig::Collaborative { timeout } => UserOracle::Collaborative {
                channel: channel.ok_or_else(|| {
                    Error::OracleConfig("collaborative oracle needs a feedback channel".into())
                })?,
                timeout: *timeout,
            },
        })
    }

    /// The scripted user's preferred action at `state`, if the oracle is
    /// scripted.
    pub fn preference(&self, state: &JointState) -> Result<Option<ActionRecord>> {
        match &self.oracle {
            OracleConfig::Scripted(s) => {
                let plan = self.plan_for(state)?;
                s.preference(state, &plan.action).map(Some)
            }
            _ => Ok(None),
        }
    }
}

/// `devices` is a JSON object from id to label list. Duplicate ids are an
/// error rather than silently collapsing.
mod device_map {
    use super::*;

    pub fn serialize<S: Serializer>(devices: &[DeviceSpec], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(devices.len()))?;
        for d in devices {
            map.serialize_entry(&d.id, &d.states)?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<DeviceSpec>, D::Error> {
        struct DeviceMap;

        impl<'de> Visitor<'de> for DeviceMap {
            type Value = Vec<DeviceSpec>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map from device id to a list of state labels")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> std::result::Result<Self::Value, A::Error> {
                let mut out: Vec<DeviceSpec> = Vec::new();
                while let Some((id, states)) = access.next_entry::<String, Vec<String>>()? {
                    if out.iter().any(|d| d.id == id) {
                        return Err(serde::de::Error::custom(format!("duplicate device id `{id}`")));
                    }
                    out.push(DeviceSpec { id, states });
                }
                Ok(out)
            }
        }

        d.deserialize_map(DeviceMap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "minimal",
        "devices": {"lamp": ["off", "on"]},
        "oracle": {"type": "greedy"},
        "initial_state": {"lamp": "off"},
        "steps_per_episode": 1,
        "episodes": 1
    }"#;

    fn parse(text: &str) -> ScenarioFile {
        serde_json::from_str(text).unwrap()
    }

    #[test]
    fn minimal_file_loads_with_defaults() {
        let s = Scenario::from_file(parse(MINIMAL)).unwrap();
        assert_eq!(s.vocab.names(), ["noop"]);
        assert_eq!(s.params, LearningParams::default());
        assert_eq!(s.seed, 0);
        assert_eq!(s.oracle, OracleConfig::Greedy);
    }

    #[test]
    fn duplicate_device_keys_are_rejected() {
        let text = MINIMAL.replace(r#"{"lamp": ["off", "on"]}"#, r#"{"lamp": ["off"], "lamp": ["on"]}"#);
        let err = serde_json::from_str::<ScenarioFile>(&text).unwrap_err();
        assert!(err.to_string().contains("duplicate device id"));
    }

    #[test]
    fn zero_episodes_rejected() {
        let mut f = parse(MINIMAL);
        f.episodes = 0;
        let err = Scenario::from_file(f).unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("episodes must be at least 1"));
    }

    #[test]
    fn unknown_rule_label_names_rule_and_label() {
        let mut f = parse(MINIMAL);
        f.rules.push(PlanRule {
            when: [("lamp".to_string(), "off".to_string())].into(),
            next: [("lamp".to_string(), "blue".to_string())].into(),
            priority: 0,
        });
        let msg = Scenario::from_file(f).unwrap_err().to_string();
        assert!(msg.contains("rule 0") && msg.contains("`blue`"), "{msg}");
    }

    #[test]
    fn oracle_variants_parse() {
        let o: OracleSpec = serde_json::from_str(r#"{"type":"collaborative"}"#).unwrap();
        assert_eq!(
            o,
            OracleSpec::Collaborative {
                timeout_ms: 30_000,
                actions: vec![]
            }
        );
        let o: OracleSpec = serde_json::from_str(r#"{"type":"random","actions":["lamp:on"]}"#).unwrap();
        assert_eq!(o.extra_actions(), ["lamp:on"]);
        assert!(serde_json::from_str::<OracleSpec>(r#"{"type":"psychic"}"#).is_err());
        assert!(serde_json::from_str::<OracleSpec>(r#"{"type":"greedy","bogus":1}"#).is_err());
    }

    #[test]
    fn oracle_actions_join_vocabulary() {
        let mut f = parse(MINIMAL);
        f.oracle = OracleSpec::Scripted {
            preferences: vec![PreferenceSpec {
                when: BTreeMap::new(),
                action: "lamp:on".into(),
            }],
            default_to_plan: false,
            actions: vec!["lamp:off".into()],
        };
        let s = Scenario::from_file(f).unwrap();
        assert_eq!(s.vocab.names(), ["noop", "lamp:off", "lamp:on"]);
        let pref = s.preference(&s.initial_state).unwrap().unwrap();
        assert_eq!(pref.name(), "lamp:on");
    }

    #[test]
    fn collaborative_needs_channel() {
        let mut f = parse(MINIMAL);
        f.oracle = OracleSpec::Collaborative {
            timeout_ms: 5,
            actions: vec![],
        };
        let s = Scenario::from_file(f).unwrap();
        assert!(matches!(s.build_oracle(None), Err(Error::OracleConfig(_))));
    }

    #[test]
    fn terminal_initial_state_rejected() {
        let mut f = parse(MINIMAL);
        f.terminal_states.push(f.initial_state.clone());
        let msg = Scenario::from_file(f).unwrap_err().to_string();
        assert!(msg.contains("initial_state is terminal"));
    }

    #[test]
    fn file_round_trips_through_json() {
        let f = parse(MINIMAL);
        let text = serde_json::to_string(&f).unwrap();
        assert_eq!(parse(&text), f);
    }
}
