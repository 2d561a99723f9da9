//! Finite Kripke structures M = (S, R, L).
//!
//! Two representations share the [`Kripke`] trait: [`ExplicitKripke`] stores
//! successor and predecessor lists, [`ImplicitKripke`] factors each state into
//! a deterministic core and a free environment input so that large models
//! with dense transition relations need no edge storage.

mod bitset;
mod explicit;
mod implicit;
pub mod kmv;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub use bitset::SatSet;
pub use explicit::{ExplicitBuilder, ExplicitKripke};
pub use implicit::{ImplicitKripke, LabelRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(u32);

impl StateId {
    pub fn new(index: usize) -> Self {
        StateId(u32::try_from(index).expect("state index exceeds u32"))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PropId(u32);

impl PropId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Atomic propositions of a model, with unique names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PropRegistry {
    names: Vec<String>,
    by_name: HashMap<String, PropId>,
}

impl PropRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `name`, returning the existing id if already present.
    pub fn intern(&mut self, name: &str) -> PropId {
        if let Some(&id) = self.by_name.get(name) {
            return id;
        }
        let id = PropId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.by_name.insert(name.to_string(), id);
        id
    }

    pub fn lookup(&self, name: &str) -> Option<PropId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: PropId) -> &str {
        &self.names[id.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PropId, &str)> {
        self.names.iter().enumerate().map(|(i, n)| (PropId(i as u32), n.as_str()))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KripkeError {
    #[error("line {line}: duplicate state `{id}`")]
    DuplicateState { line: usize, id: String },
    #[error("line {line}: reference to undeclared state `{id}`")]
    UndeclaredState { line: usize, id: String },
    #[error("no initial state")]
    NoInitialState,
    #[error("state `{id}` has no successor (use --allow-deadlock-selfloop to add self-loops)")]
    Deadlock { id: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unregistered proposition `{0}`")]
    UnknownProp(String),
    #[error("model too large to materialize: {0} states")]
    TooLarge(usize),
}

/// Read-only view of a total Kripke structure with dense state ids.
///
/// States are partitioned into predecessor classes (states sharing one
/// predecessor set) and successor classes (states sharing one successor set).
/// Explicit models use singleton classes; factored models use them to avoid
/// repeating work per environment input.
pub trait Kripke {
    fn state_count(&self) -> usize;

    fn initial_states(&self) -> &[StateId];

    fn props(&self) -> &PropRegistry;

    fn for_each_successor(&self, s: StateId, f: &mut dyn FnMut(StateId));

    fn label(&self, s: StateId, p: PropId) -> bool;

    fn pred_class(&self, s: StateId) -> usize;

    fn pred_class_count(&self) -> usize;

    /// Calls `f` on every predecessor of any state of class `class`.
    fn for_each_class_predecessor(&self, class: usize, f: &mut dyn FnMut(StateId));

    fn succ_class(&self, s: StateId) -> usize;

    fn succ_class_count(&self) -> usize;

    /// Human-readable state name.
    fn state_name(&self, s: StateId) -> String {
        format!("s{}", s.index())
    }

    /// Sorted successor set.
    fn successors(&self, s: StateId) -> Vec<StateId> {
        let mut out = Vec::new();
        self.for_each_successor(s, &mut |t| out.push(t));
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Sorted predecessor set.
    fn predecessors(&self, s: StateId) -> Vec<StateId> {
        let mut out = Vec::new();
        self.for_each_class_predecessor(self.pred_class(s), &mut |t| out.push(t));
        out.sort_unstable();
        out.dedup();
        out
    }

    fn has_edge(&self, s: StateId, t: StateId) -> bool {
        let mut found = false;
        self.for_each_successor(s, &mut |u| found |= u == t);
        found
    }

    fn initial_set(&self) -> SatSet {
        SatSet::from_states(self.state_count(), self.initial_states().iter().copied())
    }

    fn label_set(&self, p: PropId) -> SatSet {
        let n = self.state_count();
        let mut out = SatSet::empty(n);
        for i in 0..n {
            let s = StateId::new(i);
            if self.label(s, p) {
                out.insert(s);
            }
        }
        out
    }

    /// Names of the propositions holding in `s`, in registry order.
    fn label_names(&self, s: StateId) -> Vec<String> {
        self.props().iter().filter(|&(p, _)| self.label(s, p)).map(|(_, name)| name.to_string()).collect()
    }

    /// Existential pre-image: states with at least one successor in `z`.
    fn pre_image(&self, z: &SatSet) -> SatSet {
        let n = self.state_count();
        let mut touched = vec![false; self.pred_class_count()];
        let mut out = SatSet::empty(n);
        for s in z.iter() {
            let c = self.pred_class(s);
            if !touched[c] {
                touched[c] = true;
                self.for_each_class_predecessor(c, &mut |p| {
                    out.insert(p);
                });
            }
        }
        out
    }
}

/// Copies any model into stored-edge form, keeping state ids.
pub fn materialize<K: Kripke + ?Sized>(model: &K, max_states: usize) -> Result<ExplicitKripke, KripkeError> {
    let n = model.state_count();
    if n > max_states {
        return Err(KripkeError::TooLarge(n));
    }
    let mut b = ExplicitBuilder::new();
    for (_, name) in model.props().iter() {
        b.declare_prop(name);
    }
    for i in 0..n {
        let s = StateId::new(i);
        let props = model.label_names(s);
        b.add_state(&model.state_name(s), props.iter().map(String::as_str)).expect("model state names are unique");
    }
    for &s in model.initial_states() {
        b.add_initial(s);
    }
    for i in 0..n {
        let s = StateId::new(i);
        model.for_each_successor(s, &mut |t| b.add_edge(s, t));
    }
    b.build(false)
}
