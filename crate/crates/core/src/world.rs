//! Devices, joint states, actions, and the integer codecs that lay them out
//! as Q-table rows and columns.
//!
//! A joint state assigns every registered device one of its labels. States
//! are encoded mixed-radix over the devices in id order, so the first device
//! is the most significant digit. Actions are idempotent target assignments
//! for a subset of devices; the empty assignment is `noop`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NOOP: &str = "noop";

const RESERVED: &[char] = &[':', '+', '=', ','];

fn check_name(what: &'static str, name: &str) -> Result<()> {
    if name.is_empty() || name.chars().any(|c| c.is_whitespace() || RESERVED.contains(&c)) {
        return Err(Error::InvalidName {
            what,
            name: name.to_owned(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub id: String,
    pub states: Vec<String>,
}

impl DeviceSpec {
    pub fn new<I, S>(id: impl Into<String>, states: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        DeviceSpec {
            id: id.into(),
            states: states.into_iter().map(Into::into).collect(),
        }
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|l| l == label)
    }

    fn validate(&self) -> Result<()> {
        check_name("device id", &self.id)?;
        if self.states.is_empty() {
            return Err(Error::EmptyDevice(self.id.clone()));
        }
        for (i, label) in self.states.iter().enumerate() {
            check_name("state label", label)?;
            if self.states[..i].contains(label) {
                return Err(Error::DuplicateLabel {
                    device: self.id.clone(),
                    label: label.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Assignment of device ids to state labels.
///
/// Totality over a particular space is checked by [`StateSpace::check_state`];
/// a bare `JointState` is just the map.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointState(BTreeMap<String, String>);

impl JointState {
    pub fn new(assignment: BTreeMap<String, String>) -> Self {
        JointState(assignment)
    }

    pub fn from_pairs<I, K, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        JointState(pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }

    pub fn get(&self, device: &str) -> Option<&str> {
        self.0.get(device).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn assignment(&self) -> &BTreeMap<String, String> {
        &self.0
    }

    /// True when every pair of `partial` appears in this state.
    pub fn satisfies(&self, partial: &BTreeMap<String, String>) -> bool {
        partial.iter().all(|(d, l)| self.0.get(d) == Some(l))
    }

    /// Stable `device=label,...` rendering in device-id order.
    pub fn key(&self) -> String {
        let mut out = String::new();
        for (i, (d, l)) in self.0.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(d);
            out.push('=');
            out.push_str(l);
        }
        out
    }
}

impl fmt::Display for JointState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl FromStr for JointState {
    type Err = Error;

    /// Parses the `device=label,...` form produced by [`JointState::key`].
    fn from_str(s: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for token in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (d, l) = token
                .split_once('=')
                .ok_or_else(|| Error::MalformedState(s.to_owned()))?;
            map.insert(d.trim().to_owned(), l.trim().to_owned());
        }
        Ok(JointState(map))
    }
}

/// Target-state assignment for a subset of devices.
///
/// Identity is the canonical name: `deviceId:label` tokens sorted by device
/// id and joined with `+`, or `noop` for the empty assignment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ActionRecord {
    targets: BTreeMap<String, String>,
    name: String,
}

impl ActionRecord {
    pub fn noop() -> Self {
        ActionRecord {
            targets: BTreeMap::new(),
            name: NOOP.to_owned(),
        }
    }

    pub fn from_targets(targets: BTreeMap<String, String>) -> Self {
        let name = if targets.is_empty() {
            NOOP.to_owned()
        } else {
            targets
                .iter()
                .map(|(d, l)| format!("{d}:{l}"))
                .collect::<Vec<_>>()
                .join("+")
        };
        ActionRecord { targets, name }
    }

    /// Parses a canonical name. Tokens may come in any order; the result is
    /// re-canonicalized.
    pub fn parse(name: &str) -> Result<Self> {
        if name == NOOP {
            return Ok(ActionRecord::noop());
        }
        let mut targets = BTreeMap::new();
        for token in name.split('+') {
            let (d, l) = token
                .split_once(':')
                .ok_or_else(|| Error::MalformedAction(name.to_owned()))?;
            if check_name("device id", d).is_err()
                || check_name("state label", l).is_err()
                || targets.insert(d.to_owned(), l.to_owned()).is_some()
            {
                return Err(Error::MalformedAction(name.to_owned()));
            }
        }
        Ok(ActionRecord::from_targets(targets))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn targets(&self) -> &BTreeMap<String, String> {
        &self.targets
    }

    pub fn is_noop(&self) -> bool {
        self.targets.is_empty()
    }
}

impl PartialEq for ActionRecord {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

impl Eq for ActionRecord {}

impl std::hash::Hash for ActionRecord {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.name.hash(state)
    }
}

impl fmt::Display for ActionRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl TryFrom<String> for ActionRecord {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        ActionRecord::parse(&s)
    }
}

impl From<ActionRecord> for String {
    fn from(a: ActionRecord) -> String {
        a.name
    }
}

/// Action that moves `current` to `next`: the devices whose labels differ,
/// targeted at their labels in `next`.
pub fn derive_action(current: &JointState, next: &JointState) -> Result<ActionRecord> {
    if current.len() != next.len() || current.0.keys().ne(next.0.keys()) {
        return Err(Error::SpaceMismatch);
    }
    let targets = current
        .0
        .iter()
        .zip(next.0.values())
        .filter(|((_, from), to)| from != to)
        .map(|((d, _), to)| (d.clone(), to.clone()))
        .collect();
    Ok(ActionRecord::from_targets(targets))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    devices: Vec<DeviceSpec>,
    cardinality: usize,
}

/// Validates device specs and orders them by id.
pub fn build_state_space<I>(specs: I) -> Result<StateSpace>
where
    I: IntoIterator<Item = DeviceSpec>,
{
    let mut devices: Vec<DeviceSpec> = specs.into_iter().collect();
    if devices.is_empty() {
        return Err(Error::NoDevices);
    }
    for d in &devices {
        d.validate()?;
    }
    devices.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = devices.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::DuplicateDevice(w[0].id.clone()));
    }
    let cardinality = devices
        .iter()
        .try_fold(1usize, |acc, d| acc.checked_mul(d.states.len()))
        .ok_or(Error::SpaceTooLarge)?;
    Ok(StateSpace {
        devices,
        cardinality,
    })
}

impl StateSpace {
    pub fn devices(&self) -> &[DeviceSpec] {
        &self.devices
    }

    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    pub fn device(&self, id: &str) -> Option<&DeviceSpec> {
        self.devices
            .binary_search_by(|d| d.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.devices[i])
    }

    fn label_position(&self, device: &str, label: &str) -> Result<usize> {
        let spec = self
            .device(device)
            .ok_or_else(|| Error::UnknownDevice(device.to_owned()))?;
        spec.position(label).ok_or_else(|| Error::UnknownLabel {
            device: device.to_owned(),
            label: label.to_owned(),
        })
    }

    /// Checks a partial assignment: known devices, known labels.
    pub fn check_partial(&self, partial: &BTreeMap<String, String>) -> Result<()> {
        for (d, l) in partial {
            self.label_position(d, l)?;
        }
        Ok(())
    }

    pub fn check_state(&self, s: &JointState) -> Result<()> {
        self.check_partial(&s.0)?;
        if let Some(missing) = self.devices.iter().find(|d| !s.0.contains_key(&d.id)) {
            return Err(Error::MissingDevice(missing.id.clone()));
        }
        Ok(())
    }

    pub fn check_action(&self, a: &ActionRecord) -> Result<()> {
        self.check_partial(&a.targets)
    }

    pub fn encode_state(&self, s: &JointState) -> Result<usize> {
        for d in s.0.keys() {
            if self.device(d).is_none() {
                return Err(Error::UnknownDevice(d.clone()));
            }
        }
        let mut index = 0usize;
        for spec in &self.devices {
            let label = s
                .0
                .get(&spec.id)
                .ok_or_else(|| Error::MissingDevice(spec.id.clone()))?;
            let digit = self.label_position(&spec.id, label)?;
            index = index * spec.states.len() + digit;
        }
        Ok(index)
    }

    pub fn decode_state(&self, index: usize) -> Result<JointState> {
        if index >= self.cardinality {
            return Err(Error::StateIndexOutOfRange {
                index,
                cardinality: self.cardinality,
            });
        }
        let mut rest = index;
        let mut map = BTreeMap::new();
        for spec in self.devices.iter().rev() {
            let radix = spec.states.len();
            map.insert(spec.id.clone(), spec.states[rest % radix].clone());
            rest /= radix;
        }
        Ok(JointState(map))
    }

    /// All states in index order.
    pub fn states(&self) -> impl Iterator<Item = JointState> + '_ {
        (0..self.cardinality).map(|i| self.decode_state(i).expect("index in range"))
    }

    /// State with every device at its first label.
    pub fn first_state(&self) -> JointState {
        JointState(
            self.devices
                .iter()
                .map(|d| (d.id.clone(), d.states[0].clone()))
                .collect(),
        )
    }

    pub fn apply_action(&self, s: &JointState, a: &ActionRecord) -> Result<JointState> {
        self.check_state(s)?;
        self.check_action(a)?;
        let mut next = s.clone();
        for (d, l) in &a.targets {
            next.0.insert(d.clone(), l.clone());
        }
        Ok(next)
    }
}

/// Q-table column layout: `noop` at index 0, every other action sorted by
/// canonical name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionVocabulary {
    actions: Vec<ActionRecord>,
}

impl Default for ActionVocabulary {
    fn default() -> Self {
        ActionVocabulary {
            actions: vec![ActionRecord::noop()],
        }
    }
}

impl ActionVocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_actions<I: IntoIterator<Item = ActionRecord>>(actions: I) -> Self {
        let mut vocab = Self::new();
        for a in actions {
            vocab.register(a);
        }
        vocab
    }

    /// Adds `a` unless already present. Indices of actions sorting after `a`
    /// shift by one, so register everything before encoding anything.
    pub fn register(&mut self, a: ActionRecord) -> bool {
        if a.is_noop() {
            return false;
        }
        match self.search(a.name()) {
            Ok(_) => false,
            Err(pos) => {
                self.actions.insert(pos, a);
                true
            }
        }
    }

    fn search(&self, name: &str) -> std::result::Result<usize, usize> {
        self.actions[1..]
            .binary_search_by(|x| x.name().cmp(name))
            .map(|i| i + 1)
            .map_err(|i| i + 1)
    }

    pub fn encode_name(&self, name: &str) -> Result<usize> {
        if name == NOOP {
            return Ok(0);
        }
        self.search(name)
            .map_err(|_| Error::UnknownAction(name.to_owned()))
    }

    pub fn encode(&self, a: &ActionRecord) -> Result<usize> {
        self.encode_name(a.name())
    }

    pub fn decode(&self, index: usize) -> Result<&ActionRecord> {
        self.actions.get(index).ok_or(Error::ActionIndexOutOfRange {
            index,
            len: self.actions.len(),
        })
    }

    pub fn get(&self, name: &str) -> Option<&ActionRecord> {
        self.encode_name(name).ok().map(|i| &self.actions[i])
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    /// Never true: `noop` is always present.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = &ActionRecord> {
        self.actions.iter()
    }

    pub fn names(&self) -> Vec<String> {
        self.actions.iter().map(|a| a.name().to_owned()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lamp_tv() -> StateSpace {
        build_state_space([
            DeviceSpec::new("tv", ["off", "on", "mute"]),
            DeviceSpec::new("lamp", ["off", "on"]),
        ])
        .unwrap()
    }

    fn st(pairs: &[(&str, &str)]) -> JointState {
        JointState::from_pairs(pairs.iter().copied())
    }

    /// Enumerates assignments with nested loops, first device outermost.
    fn enumerate(space: &StateSpace) -> Vec<JointState> {
        let mut out = vec![BTreeMap::new()];
        for d in space.devices() {
            let mut next = Vec::new();
            for partial in &out {
                for l in &d.states {
                    let mut m: BTreeMap<String, String> = partial.clone();
                    m.insert(d.id.clone(), l.clone());
                    next.push(m);
                }
            }
            out = next;
        }
        out.into_iter().map(JointState::new).collect()
    }

    #[test]
    fn cardinality_and_canonical_order() {
        let space = lamp_tv();
        assert_eq!(space.cardinality(), 6);
        let ids: Vec<_> = space.devices().iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["lamp", "tv"]);

        let single = build_state_space([DeviceSpec::new("a", ["x"])]).unwrap();
        assert_eq!(single.cardinality(), 1);
    }

    #[test]
    fn build_rejects_bad_specs() {
        let dup = build_state_space([DeviceSpec::new("a", ["x"]), DeviceSpec::new("a", ["y"])]);
        assert!(matches!(dup, Err(Error::DuplicateDevice(id)) if id == "a"));
        let empty = build_state_space([DeviceSpec::new("a", Vec::<String>::new())]);
        assert!(matches!(empty, Err(Error::EmptyDevice(_))));
        let twice = build_state_space([DeviceSpec::new("a", ["x", "x"])]);
        assert!(matches!(twice, Err(Error::DuplicateLabel { .. })));
        assert!(matches!(build_state_space([]), Err(Error::NoDevices)));
        let reserved = build_state_space([DeviceSpec::new("a:b", ["x"])]);
        assert!(matches!(reserved, Err(Error::InvalidName { .. })));
    }

    #[test]
    fn encode_matches_enumeration_order() {
        let space = lamp_tv();
        let all = enumerate(&space);
        assert_eq!(all.len(), 6);
        for (i, s) in all.iter().enumerate() {
            assert_eq!(space.encode_state(s).unwrap(), i);
            assert_eq!(&space.decode_state(i).unwrap(), s);
        }
        assert_eq!(space.encode_state(&st(&[("lamp", "off"), ("tv", "off")])).unwrap(), 0);
        assert_eq!(space.encode_state(&st(&[("lamp", "on"), ("tv", "mute")])).unwrap(), 5);
        assert_eq!(space.decode_state(5).unwrap(), st(&[("lamp", "on"), ("tv", "mute")]));
    }

    #[test]
    fn codec_errors() {
        let space = lamp_tv();
        let unknown = st(&[("lamp", "on"), ("tv", "off"), ("fan", "on")]);
        assert!(matches!(space.encode_state(&unknown), Err(Error::UnknownDevice(d)) if d == "fan"));
        let bad_label = st(&[("lamp", "dim"), ("tv", "off")]);
        assert!(matches!(space.encode_state(&bad_label), Err(Error::UnknownLabel { .. })));
        let partial = st(&[("lamp", "on")]);
        assert!(matches!(space.encode_state(&partial), Err(Error::MissingDevice(d)) if d == "tv"));
        assert!(matches!(
            space.decode_state(6),
            Err(Error::StateIndexOutOfRange { index: 6, cardinality: 6 })
        ));
    }

    #[test]
    fn derive_action_cases() {
        let off = st(&[("lamp", "off"), ("tv", "off")]);
        assert!(derive_action(&off, &off).unwrap().is_noop());
        let a = derive_action(&off, &st(&[("lamp", "on"), ("tv", "off")])).unwrap();
        assert_eq!(a.name(), "lamp:on");
        assert_eq!(a.targets().len(), 1);
        let b = derive_action(&off, &st(&[("lamp", "on"), ("tv", "mute")])).unwrap();
        assert_eq!(b.name(), "lamp:on+tv:mute");
        let other = st(&[("lamp", "on")]);
        assert!(matches!(derive_action(&off, &other), Err(Error::SpaceMismatch)));
    }

    #[test]
    fn apply_action_cases() {
        let space = lamp_tv();
        let s = st(&[("lamp", "off"), ("tv", "on")]);
        assert_eq!(space.apply_action(&s, &ActionRecord::noop()).unwrap(), s);
        let lamp_on = ActionRecord::parse("lamp:on").unwrap();
        assert_eq!(
            space.apply_action(&s, &lamp_on).unwrap(),
            st(&[("lamp", "on"), ("tv", "on")])
        );
        let fan = ActionRecord::parse("fan:on").unwrap();
        assert!(matches!(space.apply_action(&s, &fan), Err(Error::UnknownDevice(_))));
        let dim = ActionRecord::parse("lamp:dim").unwrap();
        assert!(matches!(space.apply_action(&s, &dim), Err(Error::UnknownLabel { .. })));
    }

    #[test]
    fn derive_of_apply_is_restriction_exhaustively() {
        let space = lamp_tv();
        // every partial assignment over the two devices
        let mut actions = vec![BTreeMap::new()];
        for d in space.devices() {
            let mut next = Vec::new();
            for partial in &actions {
                next.push(partial.clone());
                for l in &d.states {
                    let mut m: BTreeMap<String, String> = partial.clone();
                    m.insert(d.id.clone(), l.clone());
                    next.push(m);
                }
            }
            actions = next;
        }
        assert_eq!(actions.len(), 3 * 4);
        for s in space.states() {
            for targets in &actions {
                let a = ActionRecord::from_targets(targets.clone());
                let after = space.apply_action(&s, &a).unwrap();
                assert_eq!(space.apply_action(&after, &a).unwrap(), after);
                let derived = derive_action(&s, &after).unwrap();
                let expected: BTreeMap<_, _> = targets
                    .iter()
                    .filter(|(d, l)| s.get(d) != Some(l.as_str()))
                    .map(|(d, l)| (d.clone(), l.clone()))
                    .collect();
                assert_eq!(derived.targets(), &expected);
                assert!(derived.targets().iter().all(|(d, l)| targets.get(d) == Some(l)));
            }
        }
    }

    #[test]
    fn action_names_are_canonical() {
        let a = ActionRecord::parse("tv:mute+lamp:on").unwrap();
        assert_eq!(a.name(), "lamp:on+tv:mute");
        assert_eq!(a, ActionRecord::parse("lamp:on+tv:mute").unwrap());
        assert!(ActionRecord::parse("noop").unwrap().is_noop());
        assert!(ActionRecord::parse("lamp").is_err());
        assert!(ActionRecord::parse("lamp:on+lamp:off").is_err());
        assert!(ActionRecord::parse("").is_err());
    }

    #[test]
    fn vocabulary_ordering() {
        let mut v = ActionVocabulary::new();
        assert_eq!(v.encode(&ActionRecord::noop()).unwrap(), 0);
        for n in ["tv:on", "lamp:on", "lamp:off"] {
            assert!(v.register(ActionRecord::parse(n).unwrap()));
        }
        assert!(!v.register(ActionRecord::parse("lamp:on").unwrap()));
        assert!(!v.register(ActionRecord::noop()));
        assert_eq!(v.names(), ["noop", "lamp:off", "lamp:on", "tv:on"]);
        assert!(matches!(v.encode_name("fan:on"), Err(Error::UnknownAction(_))));
        assert!(v.decode(4).is_err());
    }

    #[test]
    fn noop_stays_first_even_when_it_would_sort_later() {
        let v = ActionVocabulary::with_actions(
            ["zz:a", "aa:b", "nz:c"].map(|n| ActionRecord::parse(n).unwrap()),
        );
        assert_eq!(v.names(), ["noop", "aa:b", "nz:c", "zz:a"]);
    }

    #[test]
    fn state_key_round_trip() {
        let s = st(&[("tv", "on"), ("lamp", "off")]);
        assert_eq!(s.key(), "lamp=off,tv=on");
        assert_eq!(s.key().parse::<JointState>().unwrap(), s);
    }
}
