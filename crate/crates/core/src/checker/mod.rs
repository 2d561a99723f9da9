//! CTL satisfaction sets by fixpoint labeling over the existential normal
//! form, plus witness and counterexample extraction.

mod trace;

use std::collections::HashMap;

use thiserror::Error;

use crate::ctl::{to_existential_normal_form, Formula};
use crate::kripke::{Kripke, SatSet, StateId};

pub use trace::{Trace, TraceDoc, TraceStep};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckError {
    #[error("unregistered atom `{0}`")]
    UnknownAtom(String),
    #[error("internal error: extracted trace failed validation: {0}")]
    InvalidTrace(String),
}

/// Outcome of checking one formula against a model.
#[derive(Debug, Clone)]
pub struct Verdict {
    /// Every initial state satisfies the formula.
    pub holds: bool,
    pub sat: SatSet,
    pub trace: Option<Trace>,
    /// Initial states violating the formula, ascending.
    pub failing_initial: Vec<StateId>,
}

/// Longest fixpoint runs observed by a [`Checker`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FixpointStats {
    pub max_eu_iterations: usize,
    pub max_eg_iterations: usize,
}

/// Evaluates formulas against one model, memoizing Sat-sets of ENF
/// subformulas.
pub struct Checker<'m, K: Kripke + ?Sized> {
    model: &'m K,
    cache: HashMap<Formula, SatSet>,
    stats: FixpointStats,
}

impl<'m, K: Kripke + ?Sized> Checker<'m, K> {
    pub fn new(model: &'m K) -> Self {
        Checker { model, cache: HashMap::new(), stats: FixpointStats::default() }
    }

    pub fn stats(&self) -> FixpointStats {
        self.stats
    }

    fn check_atoms(&self, f: &Formula) -> Result<(), CheckError> {
        match f.atoms().into_iter().find(|a| self.model.props().lookup(a).is_none()) {
            Some(a) => Err(CheckError::UnknownAtom(a.to_string())),
            None => Ok(()),
        }
    }

    /// Satisfaction set of an arbitrary CTL formula.
    pub fn sat(&mut self, f: &Formula) -> Result<SatSet, CheckError> {
        self.check_atoms(f)?;
        let enf = to_existential_normal_form(f);
        Ok(self.sat_enf(&enf))
    }

    fn sat_enf(&mut self, f: &Formula) -> SatSet {
        if let Some(s) = self.cache.get(f) {
            return s.clone();
        }
        let n = self.model.state_count();
        let out = match f {
            Formula::Bottom => SatSet::empty(n),
            Formula::Top => SatSet::full(n),
            Formula::Atom(name) => {
                let p = self.model.props().lookup(name).expect("atoms checked before evaluation");
                self.model.label_set(p)
            }
            Formula::Not(g) => self.sat_enf(g).complement(),
            Formula::And(g, h) => {
                let mut s = self.sat_enf(g);
                s.intersect_with(&self.sat_enf(h));
                s
            }
            Formula::EX(g) => {
                let s = self.sat_enf(g);
                self.model.pre_image(&s)
            }
            Formula::EU(g, h) => {
                let hold = self.sat_enf(g);
                let goal = self.sat_enf(h);
                self.exists_until(&hold, &goal)
            }
            Formula::EG(g) => {
                let s = self.sat_enf(g);
                self.exists_globally(&s)
            }
            other => unreachable!("not in existential normal form: {other:?}"),
        };
        self.cache.insert(f.clone(), out.clone());
        out
    }

    /// Least fixpoint Z = goal ∪ (hold ∩ pre∃ Z), expanding only the
    /// newly added frontier; each predecessor class is expanded once.
    fn exists_until(&mut self, hold: &SatSet, goal: &SatSet) -> SatSet {
        let n = self.model.state_count();
        let mut z = goal.clone();
        let mut frontier: Vec<StateId> = goal.iter().collect();
        let mut expanded = vec![false; self.model.pred_class_count()];
        let mut iterations = 0;
        while !frontier.is_empty() {
            iterations += 1;
            assert!(iterations <= n, "EU fixpoint exceeded |S| iterations");
            let mut next = Vec::new();
            for s in frontier {
                let c = self.model.pred_class(s);
                if expanded[c] {
                    continue;
                }
                expanded[c] = true;
                self.model.for_each_class_predecessor(c, &mut |p| {
                    if hold.contains(p) && z.insert(p) {
                        next.push(p);
                    }
                });
            }
            frontier = next;
        }
        self.stats.max_eu_iterations = self.stats.max_eu_iterations.max(iterations);
        z
    }

    /// Greatest fixpoint Z = hold ∩ pre∃ Z.
    fn exists_globally(&mut self, hold: &SatSet) -> SatSet {
        let n = self.model.state_count();
        let mut z = hold.clone();
        let mut iterations = 0;
        loop {
            iterations += 1;
            assert!(iterations <= n + 1, "EG fixpoint exceeded |S| iterations");
            let mut next = self.model.pre_image(&z);
            next.intersect_with(hold);
            debug_assert!(next.is_subset(&z));
            if next == z {
                break;
            }
            z = next;
        }
        self.stats.max_eg_iterations = self.stats.max_eg_iterations.max(iterations);
        z
    }

    /// Checks `f` on every initial state and extracts a counterexample when
    /// the negation has an existential witness.
    pub fn verify(&mut self, f: &Formula) -> Result<Verdict, CheckError> {
        let sat = self.sat(f)?;
        let failing_initial: Vec<StateId> =
            self.model.initial_states().iter().copied().filter(|&s| !sat.contains(s)).collect();
        let holds = failing_initial.is_empty();
        let mut trace = None;
        if !holds {
            let negation = to_existential_normal_form(f).not();
            if let Some(t) = self.witness(&failing_initial, &negation) {
                self.validate_witness(&t, &negation)?;
                trace = Some(t);
            }
        }
        Ok(Verdict { holds, sat, trace, failing_initial })
    }

    /// Builds a witness path for `g` from one of `sources`, all of which
    /// satisfy `g`. Supported shapes: propositional, EX, EU, EG, and
    /// disjunctions of those (written ¬(¬a ∧ ¬b) in ENF).
    fn witness(&mut self, sources: &[StateId], g: &Formula) -> Option<Trace> {
        let g = strip_double_negation(g);
        let first = *sources.first()?;
        if g.is_propositional() {
            return Some(Trace::new(self.model, vec![first], None));
        }
        match g {
            Formula::EX(h) => {
                let target = self.sat_enf(h);
                let next = self.model.successors(first).into_iter().find(|&t| target.contains(t))?;
                Some(Trace::new(self.model, vec![first, next], None))
            }
            Formula::EU(a, b) => {
                let hold = self.sat_enf(a);
                let goal = self.sat_enf(b);
                let path = self.shortest_path(sources, &hold, &goal)?;
                Some(Trace::new(self.model, path, None))
            }
            Formula::EG(a) => {
                let region = self.sat_enf(&Formula::EG(a.clone()));
                let (path, start) = self.lasso_within(first, &region)?;
                Some(Trace::new(self.model, path, Some(start)))
            }
            Formula::Not(inner) => match inner.as_ref() {
                Formula::And(x, y) => {
                    let sx = self.sat_enf(x);
                    let left: Vec<StateId> = sources.iter().copied().filter(|&s| !sx.contains(s)).collect();
                    if !left.is_empty() {
                        self.witness(&left, &x.as_ref().clone().not())
                    } else {
                        self.witness(sources, &y.as_ref().clone().not())
                    }
                }
                _ => None,
            },
            _ => None,
        }
    }

    /// Level-synchronous BFS from `sources` through `hold` states to the
    /// nearest `goal` state; ties go to the smallest state id.
    fn shortest_path(&self, sources: &[StateId], hold: &SatSet, goal: &SatSet) -> Option<Vec<StateId>> {
        const NONE: u32 = u32::MAX;
        let n = self.model.state_count();
        let mut parent = vec![NONE; n];
        let mut seen = SatSet::empty(n);
        let mut expanded = vec![false; self.model.succ_class_count()];
        let mut level: Vec<StateId> = sources.to_vec();
        level.sort_unstable();
        level.dedup();
        for &s in &level {
            seen.insert(s);
        }
        while !level.is_empty() {
            if let Some(&hit) = level.iter().find(|&&s| goal.contains(s)) {
                let mut path = vec![hit];
                let mut cur = hit;
                while parent[cur.index()] != NONE {
                    cur = StateId::new(parent[cur.index()] as usize);
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            let mut next = Vec::new();
            for &s in &level {
                if !hold.contains(s) {
                    continue;
                }
                let c = self.model.succ_class(s);
                if expanded[c] {
                    continue;
                }
                expanded[c] = true;
                self.model.for_each_successor(s, &mut |t| {
                    if (hold.contains(t) || goal.contains(t)) && seen.insert(t) {
                        parent[t.index()] = s.index() as u32;
                        next.push(t);
                    }
                });
            }
            next.sort_unstable();
            level = next;
        }
        None
    }

    /// Deterministic walk inside `region` (every member has a successor in
    /// it) following the smallest successor until a state repeats.
    fn lasso_within(&self, start: StateId, region: &SatSet) -> Option<(Vec<StateId>, usize)> {
        let mut path = vec![start];
        let mut pos = HashMap::from([(start, 0usize)]);
        let mut cur = start;
        loop {
            let next = self.model.successors(cur).into_iter().find(|&t| region.contains(t))?;
            if let Some(&k) = pos.get(&next) {
                return Some((path, k));
            }
            pos.insert(next, path.len());
            path.push(next);
            cur = next;
        }
    }

    fn validate_witness(&mut self, trace: &Trace, negation: &Formula) -> Result<(), CheckError> {
        trace.check_path(self.model).map_err(CheckError::InvalidTrace)?;
        let first = trace.states[0];
        if !self.model.initial_states().contains(&first) {
            return Err(CheckError::InvalidTrace(format!("trace starts at non-initial state {first}")));
        }
        // the first state must satisfy the negated property
        if !self.sat_enf(negation).contains(first) {
            return Err(CheckError::InvalidTrace("first state does not violate the property".into()));
        }
        if let Formula::EU(a, b) = strip_double_negation(negation) {
            let hold = self.sat_enf(a);
            let goal = self.sat_enf(b);
            let (last, prefix) = trace.states.split_last().unwrap();
            if !goal.contains(*last) || prefix.iter().any(|&s| !hold.contains(s)) {
                return Err(CheckError::InvalidTrace("path leaves the until region".into()));
            }
        }
        Ok(())
    }
}

fn strip_double_negation(mut f: &Formula) -> &Formula {
    while let Formula::Not(inner) = f {
        match inner.as_ref() {
            Formula::Not(g) => f = g,
            _ => break,
        }
    }
    f
}

pub fn sat<K: Kripke + ?Sized>(model: &K, f: &Formula) -> Result<SatSet, CheckError> {
    Checker::new(model).sat(f)
}

pub fn verify<K: Kripke + ?Sized>(model: &K, f: &Formula) -> Result<Verdict, CheckError> {
    Checker::new(model).verify(f)
}
