use serde::{Deserialize, Serialize};

use crate::kripke::{Kripke, StateId};

/// Finite path through a model, optionally closed into a lasso by an edge
/// from the last state back to `states[lasso_start]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub states: Vec<StateId>,
    pub lasso_start: Option<usize>,
    /// Proposition names holding in each state, snapshot at extraction time.
    pub labels: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub index: usize,
    pub state_code: usize,
    pub props: Vec<String>,
}

/// Serialized trace document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceDoc {
    pub steps: Vec<TraceStep>,
    pub lasso_start: Option<usize>,
}

impl Trace {
    pub fn new<K: Kripke + ?Sized>(model: &K, states: Vec<StateId>, lasso_start: Option<usize>) -> Self {
        let labels = states.iter().map(|&s| model.label_names(s)).collect();
        Trace { states, lasso_start, labels }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> Option<StateId> {
        self.states.last().copied()
    }

    /// Checks that consecutive states are related by R and that the lasso
    /// back-edge exists.
    pub fn check_path<K: Kripke + ?Sized>(&self, model: &K) -> Result<(), String> {
        if self.states.is_empty() {
            return Err("empty trace".into());
        }
        if let Some(&s) = self.states.iter().find(|s| s.index() >= model.state_count()) {
            return Err(format!("state {s} outside model"));
        }
        for (k, w) in self.states.windows(2).enumerate() {
            if !model.has_edge(w[0], w[1]) {
                return Err(format!("step {k}: no edge {} -> {}", w[0], w[1]));
            }
        }
        if let Some(start) = self.lasso_start {
            let Some(&target) = self.states.get(start) else {
                return Err(format!("lasso start {start} past end of trace"));
            };
            let last = *self.states.last().unwrap();
            if !model.has_edge(last, target) {
                return Err(format!("lasso: no edge {last} -> {target}"));
            }
        }
        Ok(())
    }

    pub fn to_doc(&self) -> TraceDoc {
        TraceDoc {
            steps: self
                .states
                .iter()
                .zip(&self.labels)
                .enumerate()
                .map(|(index, (s, props))| TraceStep { index, state_code: s.index(), props: props.clone() })
                .collect(),
            lasso_start: self.lasso_start,
        }
    }

    pub fn from_doc(doc: &TraceDoc) -> Self {
        Trace {
            states: doc.steps.iter().map(|s| StateId::new(s.state_code)).collect(),
            lasso_start: doc.lasso_start,
            labels: doc.steps.iter().map(|s| s.props.clone()).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("trace serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let doc: TraceDoc = serde_json::from_str(text)?;
        Ok(Self::from_doc(&doc))
    }
}
