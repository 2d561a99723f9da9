use super::{Kripke, PropId, PropRegistry, SatSet, StateId};

/// Kripke structure over `cores × inputs` with a memoryless free input.
///
/// State `(c, i)` has code `c * input_count + i`. Its successors are
/// `(step(c, i), i')` for every input `i'`, so the predecessor set of
/// `(c', i')` depends only on `c'` and is cached per core.
#[derive(Debug, Clone)]
pub struct ImplicitKripke {
    core_count: usize,
    input_count: usize,
    step: Vec<u32>,
    props: PropRegistry,
    label_words: usize,
    labels: Vec<u64>,
    initial: Vec<StateId>,
    pred_offsets: Vec<usize>,
    pred: Vec<StateId>,
}

/// Label bits of one state, filled by the labeling callback.
pub struct LabelRow<'a> {
    words: &'a mut [u64],
}

impl LabelRow<'_> {
    pub fn set(&mut self, p: PropId) {
        self.words[p.index() / 64] |= 1 << (p.index() % 64);
    }
}

impl ImplicitKripke {
    /// Tabulates `step` and `label` over every (core, input) pair and builds
    /// the per-core predecessor cache in one forward sweep.
    pub fn new(
        core_count: usize,
        input_count: usize,
        props: PropRegistry,
        initial: impl IntoIterator<Item = (usize, usize)>,
        step: impl Fn(usize, usize) -> usize,
        label: impl Fn(usize, usize, &mut LabelRow),
    ) -> Self {
        assert!(core_count > 0 && input_count > 0);
        let n = core_count * input_count;
        assert!(n <= u32::MAX as usize);
        let label_words = props.len().div_ceil(64).max(1);
        let mut table = Vec::with_capacity(n);
        let mut labels = vec![0u64; n * label_words];
        let mut in_degree = vec![0usize; core_count];
        for c in 0..core_count {
            for i in 0..input_count {
                let next = step(c, i);
                assert!(next < core_count, "step({c}, {i}) = {next} is not a core");
                in_degree[next] += 1;
                table.push(next as u32);
                let code = c * input_count + i;
                let mut row = LabelRow { words: &mut labels[code * label_words..(code + 1) * label_words] };
                label(c, i, &mut row);
            }
        }
        let mut pred_offsets = Vec::with_capacity(core_count + 1);
        pred_offsets.push(0);
        for d in &in_degree {
            pred_offsets.push(pred_offsets.last().unwrap() + d);
        }
        let mut cursor = pred_offsets[..core_count].to_vec();
        let mut pred = vec![StateId::new(0); n];
        for (code, &next) in table.iter().enumerate() {
            let slot = &mut cursor[next as usize];
            pred[*slot] = StateId::new(code);
            *slot += 1;
        }
        let mut initial: Vec<StateId> = initial
            .into_iter()
            .map(|(c, i)| {
                assert!(c < core_count && i < input_count);
                StateId::new(c * input_count + i)
            })
            .collect();
        initial.sort_unstable();
        initial.dedup();
        assert!(!initial.is_empty(), "implicit model needs an initial state");
        ImplicitKripke { core_count, input_count, step: table, props, label_words, labels, initial, pred_offsets, pred }
    }

    pub fn core_count(&self) -> usize {
        self.core_count
    }

    pub fn input_count(&self) -> usize {
        self.input_count
    }

    pub fn encode(&self, core: usize, input: usize) -> StateId {
        debug_assert!(core < self.core_count && input < self.input_count);
        StateId::new(core * self.input_count + input)
    }

    /// Splits a state id into `(core, input)`.
    pub fn decode(&self, s: StateId) -> (usize, usize) {
        (s.index() / self.input_count, s.index() % self.input_count)
    }

    /// Deterministic core successor of `s`.
    pub fn next_core(&self, s: StateId) -> usize {
        self.step[s.index()] as usize
    }
}

impl Kripke for ImplicitKripke {
    fn state_count(&self) -> usize {
        self.step.len()
    }

    fn initial_states(&self) -> &[StateId] {
        &self.initial
    }

    fn props(&self) -> &PropRegistry {
        &self.props
    }

    fn for_each_successor(&self, s: StateId, f: &mut dyn FnMut(StateId)) {
        let base = self.next_core(s) * self.input_count;
        (base..base + self.input_count).for_each(|t| f(StateId::new(t)));
    }

    fn label(&self, s: StateId, p: PropId) -> bool {
        let i = p.index();
        self.labels[s.index() * self.label_words + i / 64] >> (i % 64) & 1 == 1
    }

    fn pred_class(&self, s: StateId) -> usize {
        s.index() / self.input_count
    }

    fn pred_class_count(&self) -> usize {
        self.core_count
    }

    fn for_each_class_predecessor(&self, class: usize, f: &mut dyn FnMut(StateId)) {
        self.pred[self.pred_offsets[class]..self.pred_offsets[class + 1]].iter().for_each(|&t| f(t));
    }

    fn succ_class(&self, s: StateId) -> usize {
        self.next_core(s)
    }

    fn succ_class_count(&self) -> usize {
        self.core_count
    }

    fn has_edge(&self, s: StateId, t: StateId) -> bool {
        t.index() < self.step.len() && self.next_core(s) == t.index() / self.input_count
    }

    fn predecessors(&self, s: StateId) -> Vec<StateId> {
        // cached lists are filled in ascending code order
        let c = self.pred_class(s);
        self.pred[self.pred_offsets[c]..self.pred_offsets[c + 1]].to_vec()
    }

    fn pre_image(&self, z: &SatSet) -> SatSet {
        let mut out = SatSet::empty(self.state_count());
        for c in 0..self.core_count {
            let start = c * self.input_count;
            if z.any_in_range(start, start + self.input_count) {
                self.for_each_class_predecessor(c, &mut |p| {
                    out.insert(p);
                });
            }
        }
        out
    }
}
