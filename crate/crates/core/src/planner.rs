//! Rule-based stand-in for the value-aligned planning layer.
//!
//! Each rule pairs a partial state condition with partial target labels. At a
//! decision point the highest-priority matching rule supplies the plan step;
//! states no rule matches get a `noop` step.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{derive_action, ActionRecord, ActionVocabulary, JointState, StateSpace};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRule {
    #[serde(rename = "match", default)]
    pub when: BTreeMap<String, String>,
    pub next: BTreeMap<String, String>,
    #[serde(default)]
    pub priority: i64,
}

impl PlanRule {
    pub fn matches(&self, state: &JointState) -> bool {
        state.satisfies(&self.when)
    }
}

/// One value-aligned transition: `next_state = apply(state, action)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub state: JointState,
    pub action: ActionRecord,
    pub next_state: JointState,
}

impl PlanStep {
    pub fn noop(state: JointState) -> Self {
        PlanStep {
            next_state: state.clone(),
            state,
            action: ActionRecord::noop(),
        }
    }
}

/// Indices of the matching rules that share the top priority.
fn top_matches(state: &JointState, rules: &[PlanRule]) -> Vec<usize> {
    let mut best: Option<i64> = None;
    let mut top = Vec::new();
    for (i, rule) in rules.iter().enumerate().filter(|(_, r)| r.matches(state)) {
        match best {
            Some(p) if rule.priority < p => {}
            Some(p) if rule.priority == p => top.push(i),
            _ => {
                best = Some(rule.priority);
                top.clear();
                top.push(i);
            }
        }
    }
    top
}

pub fn plan_for(space: &StateSpace, state: &JointState, rules: &[PlanRule]) -> Result<PlanStep> {
    let top = top_matches(state, rules);
    match top.as_slice() {
        [] => {
            space.check_state(state)?;
            Ok(PlanStep::noop(state.clone()))
        }
        [i] => {
            let targets = ActionRecord::from_targets(rules[*i].next.clone());
            let next_state = space.apply_action(state, &targets)?;
            let action = derive_action(state, &next_state)?;
            Ok(PlanStep {
                state: state.clone(),
                action,
                next_state,
            })
        }
        _ => Err(Error::AmbiguousPlan {
            state: state.key(),
            rules: top,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Finding {
    UnknownDevice {
        rule: usize,
        device: String,
    },
    UnknownLabel {
        rule: usize,
        device: String,
        label: String,
    },
    Ambiguous {
        rules: Vec<usize>,
        priority: i64,
        witness: String,
    },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::UnknownDevice { rule, device } => {
                write!(f, "rule {rule}: unknown device `{device}`")
            }
            Finding::UnknownLabel {
                rule,
                device,
                label,
            } => write!(f, "rule {rule}: unknown label `{label}` for device `{device}`"),
            Finding::Ambiguous {
                rules,
                priority,
                witness,
            } => write!(
                f,
                "rules {rules:?} are ambiguous: all match {witness} at priority {priority}"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Checks rules against the space and registers every action the planner can
/// emit into `vocab`.
///
/// Ambiguity is checked by scanning every joint state, which is fine at the
/// sizes this engine targets. Each distinct ambiguous rule set is reported
/// once, with the first state that exhibits it.
pub fn validate_rules(
    rules: &[PlanRule],
    space: &StateSpace,
    vocab: &mut ActionVocabulary,
) -> ValidationReport {
    let mut findings = Vec::new();
    for (i, rule) in rules.iter().enumerate() {
        for (d, l) in rule.when.iter().chain(&rule.next) {
            match space.device(d) {
                None => findings.push(Finding::UnknownDevice {
                    rule: i,
                    device: d.clone(),
                }),
                Some(spec) if spec.position(l).is_none() => findings.push(Finding::UnknownLabel {
                    rule: i,
                    device: d.clone(),
                    label: l.clone(),
                }),
                Some(_) => {}
            }
        }
    }
    if !findings.is_empty() {
        return ValidationReport { findings };
    }

    let mut seen: Vec<Vec<usize>> = Vec::new();
    for state in space.states() {
        let top = top_matches(&state, rules);
        if top.len() > 1 {
            if !seen.contains(&top) {
                findings.push(Finding::Ambiguous {
                    priority: rules[top[0]].priority,
                    rules: top.clone(),
                    witness: state.key(),
                });
                seen.push(top);
            }
            continue;
        }
        if let Ok(step) = plan_for(space, &state, rules) {
            vocab.register(step.action);
        }
    }
    ValidationReport { findings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{build_state_space, DeviceSpec};

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    fn rule(when: &[(&str, &str)], next: &[(&str, &str)], priority: i64) -> PlanRule {
        PlanRule {
            when: map(when),
            next: map(next),
            priority,
        }
    }

    fn phone_space() -> StateSpace {
        build_state_space([
            DeviceSpec::new("phone", ["idle", "ringing", "accepted", "declined"]),
            DeviceSpec::new("user", ["home", "on_vacation"]),
        ])
        .unwrap()
    }

    #[test]
    fn no_match_yields_noop() {
        let space = phone_space();
        let s = JointState::from_pairs([("phone", "idle"), ("user", "home")]);
        let step = plan_for(&space, &s, &[]).unwrap();
        assert!(step.action.is_noop());
        assert_eq!(step.next_state, s);
    }

    #[test]
    fn vacation_call_is_declined() {
        let space = phone_space();
        let rules = [rule(
            &[("phone", "ringing"), ("user", "on_vacation")],
            &[("phone", "declined")],
            1,
        )];
        let s = JointState::from_pairs([("phone", "ringing"), ("user", "on_vacation")]);
        let step = plan_for(&space, &s, &rules).unwrap();
        assert_eq!(step.action.name(), "phone:declined");
        assert_eq!(
            step.next_state,
            JointState::from_pairs([("phone", "declined"), ("user", "on_vacation")])
        );
        assert_eq!(space.apply_action(&step.state, &step.action).unwrap(), step.next_state);
    }

    #[test]
    fn higher_priority_wins() {
        let space = phone_space();
        let rules = [
            rule(&[("phone", "ringing")], &[("phone", "accepted")], 1),
            rule(&[("phone", "ringing")], &[("phone", "declined")], 2),
        ];
        let s = JointState::from_pairs([("phone", "ringing"), ("user", "home")]);
        assert_eq!(plan_for(&space, &s, &rules).unwrap().action.name(), "phone:declined");
    }

    #[test]
    fn equal_priority_overlap_is_ambiguous() {
        let space = phone_space();
        let rules = [
            rule(&[("phone", "ringing")], &[("phone", "accepted")], 1),
            rule(&[("user", "home")], &[("phone", "idle")], 1),
        ];
        let s = JointState::from_pairs([("phone", "ringing"), ("user", "home")]);
        assert!(matches!(
            plan_for(&space, &s, &rules),
            Err(Error::AmbiguousPlan { rules, .. }) if rules == vec![0, 1]
        ));
    }

    #[test]
    fn targets_already_in_place_collapse() {
        let space = phone_space();
        let rules = [rule(&[], &[("phone", "idle")], 0)];
        let s = JointState::from_pairs([("phone", "idle"), ("user", "home")]);
        assert!(plan_for(&space, &s, &rules).unwrap().action.is_noop());
    }

    #[test]
    fn validate_reports_unknown_names() {
        let space = phone_space();
        let mut vocab = ActionVocabulary::new();
        let rules = [
            rule(&[("fan", "on")], &[("phone", "idle")], 0),
            rule(&[("phone", "ringing")], &[("phone", "blue")], 0),
        ];
        let report = validate_rules(&rules, &space, &mut vocab);
        assert_eq!(
            report.findings,
            vec![
                Finding::UnknownDevice {
                    rule: 0,
                    device: "fan".into()
                },
                Finding::UnknownLabel {
                    rule: 1,
                    device: "phone".into(),
                    label: "blue".into()
                },
            ]
        );
        assert!(report.findings[0].to_string().contains("unknown device"));
    }

    #[test]
    fn validate_finds_ambiguity_by_scanning() {
        let space = build_state_space([
            DeviceSpec::new("lamp", ["off", "on"]),
            DeviceSpec::new("tv", ["off", "on"]),
        ])
        .unwrap();
        let rules = [
            rule(&[("lamp", "off")], &[("lamp", "on")], 3),
            rule(&[("tv", "on")], &[("tv", "off")], 3),
        ];
        // brute force: states where both rules match
        let overlapping: Vec<_> = space
            .states()
            .filter(|s| rules.iter().all(|r| r.matches(s)))
            .collect();
        assert_eq!(overlapping.len(), 1);
        let report = validate_rules(&rules, &space, &mut ActionVocabulary::new());
        assert_eq!(report.findings.len(), 1);
        match &report.findings[0] {
            Finding::Ambiguous { rules, witness, .. } => {
                assert_eq!(rules, &vec![0, 1]);
                assert_eq!(witness, &overlapping[0].key());
            }
            other => panic!("unexpected finding {other:?}"),
        }
        assert!(report.findings[0].to_string().contains("ambiguous"));
    }

    #[test]
    fn validate_registers_induced_actions() {
        let space = phone_space();
        let mut vocab = ActionVocabulary::new();
        let rules = [
            rule(&[("phone", "ringing"), ("user", "on_vacation")], &[("phone", "declined")], 2),
            rule(&[("phone", "ringing")], &[("phone", "accepted")], 1),
            rule(&[("phone", "accepted")], &[("phone", "idle")], 1),
        ];
        let report = validate_rules(&rules, &space, &mut vocab);
        assert!(report.is_clean());
        assert_eq!(
            vocab.names(),
            ["noop", "phone:accepted", "phone:declined", "phone:idle"]
        );
    }

    #[test]
    fn plan_is_pure() {
        let space = phone_space();
        let rules = [rule(&[("phone", "ringing")], &[("phone", "accepted")], 1)];
        for s in space.states() {
            let a = plan_for(&space, &s, &rules).unwrap();
            let b = plan_for(&space, &s, &rules).unwrap();
            assert_eq!(a, b);
            assert_eq!(space.apply_action(&a.state, &a.action).unwrap(), a.next_state);
            assert_eq!(derive_action(&a.state, &a.next_state).unwrap(), a.action);
        }
    }
}
