use std::collections::HashMap;

use super::{Kripke, KripkeError, PropId, PropRegistry, StateId};

/// Kripke structure with stored adjacency in compressed-row form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitKripke {
    names: Vec<String>,
    props: PropRegistry,
    initial: Vec<StateId>,
    succ_offsets: Vec<usize>,
    succ: Vec<StateId>,
    pred_offsets: Vec<usize>,
    pred: Vec<StateId>,
    label_words: usize,
    labels: Vec<u64>,
}

impl ExplicitKripke {
    pub fn name(&self, s: StateId) -> &str {
        &self.names[s.index()]
    }

    pub fn lookup_state(&self, name: &str) -> Option<StateId> {
        self.names.iter().position(|n| n == name).map(StateId::new)
    }

    pub fn successor_slice(&self, s: StateId) -> &[StateId] {
        &self.succ[self.succ_offsets[s.index()]..self.succ_offsets[s.index() + 1]]
    }

    pub fn predecessor_slice(&self, s: StateId) -> &[StateId] {
        &self.pred[self.pred_offsets[s.index()]..self.pred_offsets[s.index() + 1]]
    }

    pub fn edge_count(&self) -> usize {
        self.succ.len()
    }
}

impl Kripke for ExplicitKripke {
    fn state_count(&self) -> usize {
        self.names.len()
    }

    fn initial_states(&self) -> &[StateId] {
        &self.initial
    }

    fn props(&self) -> &PropRegistry {
        &self.props
    }

    fn for_each_successor(&self, s: StateId, f: &mut dyn FnMut(StateId)) {
        self.successor_slice(s).iter().for_each(|&t| f(t));
    }

    fn label(&self, s: StateId, p: PropId) -> bool {
        let i = p.index();
        self.labels[s.index() * self.label_words + i / 64] >> (i % 64) & 1 == 1
    }

    fn pred_class(&self, s: StateId) -> usize {
        s.index()
    }

    fn pred_class_count(&self) -> usize {
        self.names.len()
    }

    fn for_each_class_predecessor(&self, class: usize, f: &mut dyn FnMut(StateId)) {
        self.predecessor_slice(StateId::new(class)).iter().for_each(|&t| f(t));
    }

    fn succ_class(&self, s: StateId) -> usize {
        s.index()
    }

    fn succ_class_count(&self) -> usize {
        self.names.len()
    }

    fn state_name(&self, s: StateId) -> String {
        self.names[s.index()].clone()
    }

    fn successors(&self, s: StateId) -> Vec<StateId> {
        self.successor_slice(s).to_vec()
    }

    fn predecessors(&self, s: StateId) -> Vec<StateId> {
        self.predecessor_slice(s).to_vec()
    }

    fn has_edge(&self, s: StateId, t: StateId) -> bool {
        self.successor_slice(s).binary_search(&t).is_ok()
    }
}

/// Incremental construction of an [`ExplicitKripke`]; validation happens in
/// [`ExplicitBuilder::build`].
#[derive(Debug, Default)]
pub struct ExplicitBuilder {
    names: Vec<String>,
    by_name: HashMap<String, StateId>,
    props: PropRegistry,
    state_props: Vec<Vec<PropId>>,
    initial: Vec<StateId>,
    succ: Vec<Vec<StateId>>,
}

impl ExplicitBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare_prop(&mut self, name: &str) -> PropId {
        self.props.intern(name)
    }

    pub fn add_state<'a>(
        &mut self,
        name: &str,
        props: impl IntoIterator<Item = &'a str>,
    ) -> Result<StateId, KripkeError> {
        if self.by_name.contains_key(name) {
            return Err(KripkeError::DuplicateState { line: 0, id: name.to_string() });
        }
        let id = StateId::new(self.names.len());
        self.names.push(name.to_string());
        self.by_name.insert(name.to_string(), id);
        let props = props.into_iter().map(|p| self.props.intern(p)).collect();
        self.state_props.push(props);
        self.succ.push(Vec::new());
        Ok(id)
    }

    pub fn state(&self, name: &str) -> Option<StateId> {
        self.by_name.get(name).copied()
    }

    pub fn state_count(&self) -> usize {
        self.names.len()
    }

    pub fn add_initial(&mut self, s: StateId) {
        self.initial.push(s);
    }

    pub fn add_edge(&mut self, from: StateId, to: StateId) {
        assert!(to.index() < self.names.len(), "edge to unknown state {to}");
        self.succ[from.index()].push(to);
    }

    /// Validates totality and initial states. With `allow_deadlock_selfloop`,
    /// successor-free states get a self-loop instead of being rejected.
    pub fn build(mut self, allow_deadlock_selfloop: bool) -> Result<ExplicitKripke, KripkeError> {
        if self.initial.is_empty() {
            return Err(KripkeError::NoInitialState);
        }
        self.initial.sort_unstable();
        self.initial.dedup();
        let n = self.names.len();
        for (i, out) in self.succ.iter_mut().enumerate() {
            if out.is_empty() {
                if !allow_deadlock_selfloop {
                    return Err(KripkeError::Deadlock { id: self.names[i].clone() });
                }
                out.push(StateId::new(i));
            }
            out.sort_unstable();
            out.dedup();
        }

        let mut succ_offsets = Vec::with_capacity(n + 1);
        succ_offsets.push(0);
        let mut in_degree = vec![0usize; n];
        for out in &self.succ {
            for t in out {
                in_degree[t.index()] += 1;
            }
            succ_offsets.push(succ_offsets.last().unwrap() + out.len());
        }
        let mut pred_offsets = Vec::with_capacity(n + 1);
        pred_offsets.push(0);
        for d in &in_degree {
            pred_offsets.push(pred_offsets.last().unwrap() + d);
        }
        let mut cursor = pred_offsets[..n].to_vec();
        let mut pred = vec![StateId(0); *pred_offsets.last().unwrap()];
        // sources are visited in ascending order, so each predecessor list comes out sorted
        for (s, out) in self.succ.iter().enumerate() {
            for t in out {
                pred[cursor[t.index()]] = StateId::new(s);
                cursor[t.index()] += 1;
            }
        }
        let succ: Vec<StateId> = self.succ.into_iter().flatten().collect();

        let label_words = self.props.len().div_ceil(64).max(1);
        let mut labels = vec![0u64; n * label_words];
        for (s, props) in self.state_props.iter().enumerate() {
            for p in props {
                labels[s * label_words + p.index() / 64] |= 1 << (p.index() % 64);
            }
        }

        Ok(ExplicitKripke {
            names: self.names,
            props: self.props,
            initial: self.initial,
            succ_offsets,
            succ,
            pred_offsets,
            pred,
            label_words,
            labels,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> ExplicitKripke {
        let mut b = ExplicitBuilder::new();
        let s0 = b.add_state("s0", ["p"]).unwrap();
        let s1 = b.add_state("s1", ["q"]).unwrap();
        b.add_initial(s0);
        b.add_edge(s0, s1);
        b.add_edge(s1, s1);
        b.build(false).unwrap()
    }

    #[test]
    fn chain_successors_and_predecessors() {
        let m = chain();
        let (s0, s1) = (StateId::new(0), StateId::new(1));
        assert_eq!(m.successors(s0), vec![s1]);
        assert_eq!(m.predecessors(s1), vec![s0, s1]);
        assert!(m.predecessors(s0).is_empty());
        assert!(m.has_edge(s1, s1));
        assert!(!m.has_edge(s1, s0));
    }

    #[test]
    fn labels_and_registry() {
        let m = chain();
        let p = m.props().lookup("p").unwrap();
        assert!(m.label(StateId::new(0), p));
        assert!(!m.label(StateId::new(1), p));
        assert!(m.props().lookup("r").is_none());
    }

    #[test]
    fn deadlock_rejected_or_looped() {
        let mut b = ExplicitBuilder::new();
        let s0 = b.add_state("s0", []).unwrap();
        b.add_initial(s0);
        assert_eq!(b.build(false).unwrap_err(), KripkeError::Deadlock { id: "s0".into() });

        let mut b = ExplicitBuilder::new();
        let s0 = b.add_state("s0", []).unwrap();
        b.add_initial(s0);
        let m = b.build(true).unwrap();
        assert_eq!(m.successors(s0), vec![s0]);
    }

    #[test]
    fn requires_initial_state() {
        let mut b = ExplicitBuilder::new();
        let s0 = b.add_state("s0", []).unwrap();
        b.add_edge(s0, s0);
        assert_eq!(b.build(false).unwrap_err(), KripkeError::NoInitialState);
    }
}
