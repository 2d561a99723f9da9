mod common;

use std::sync::OnceLock;

use proptest::prelude::*;
use uavcheck::checker::{sat, verify};
use uavcheck::kripke::{materialize, ExplicitBuilder, ExplicitKripke, Kripke, StateId};
use uavcheck::mission::smv::{emit_smv, load_smv};
use uavcheck::mission::{
    build_mission_kripke, builtin_specs, decide_next_cell, destination, Cell, CellChoice, EnvValuation, GridConfig,
    Heading, MissionConfig, MissionModel, MissionState, UavState, PROPOSITIONS,
};

use common::{oracle_decide, oracle_move};

#[test]
fn decision_rule_matches_oracle_exhaustively() {
    for n in 1..=5usize {
        let grid = GridConfig::with_cells(n);
        for cell in grid.cells() {
            for heading in [Heading::Deg90, Heading::Deg270] {
                for env in EnvValuation::all() {
                    let u = UavState { cell, heading, env };
                    let got = decide_next_cell(&u, &grid);
                    let north = heading == Heading::Deg90;
                    let want = oracle_decide(n as i64, cell.ix, cell.iy, north, env.bits());
                    assert_eq!(got.number().unwrap_or(0), want, "n={n} {cell} {heading:?} env={:#x}", env.bits());
                    if want > 0 {
                        let (c, h) = destination(&u, got, &grid).unwrap();
                        let (x, y, hn) = oracle_move(cell.ix, cell.iy, north, want);
                        assert_eq!((c.ix, c.iy, h == Heading::Deg90), (x, y, hn));
                    }
                }
            }
        }
    }
}

/// Builds the N-by-N mission model state by state from the oracle rule.
fn hand_built(n: usize) -> ExplicitKripke {
    let n_i = n as i64;
    let sink = 2 * n * n;
    let code = |core: usize, env: usize| core * 1024 + env;
    let mut b = ExplicitBuilder::new();
    for p in PROPOSITIONS {
        b.declare_prop(p);
    }
    let mut next = vec![0usize; (sink + 1) * 1024];
    for core in 0..=sink {
        for env in 0..1024usize {
            let mut props: Vec<String> = Vec::new();
            for k in 1..=5 {
                if env >> (k - 1) & 1 == 1 {
                    props.push(format!("threat_in_cell{k}"));
                }
                if env >> (4 + k) & 1 == 1 {
                    props.push(format!("other_uav_selected_cell{k}"));
                }
            }
            if core == sink {
                props.extend(["heading_90", "north_cell", "choice_no_free_cell", "at_sink"].map(String::from));
                next[code(core, env)] = sink;
            } else {
                let (pos, north) = (core / 2, core % 2 == 0);
                let (ix, iy) = ((pos % n) as i64, (pos / n) as i64);
                props.push(if north { "heading_90" } else { "heading_270" }.into());
                if iy == n_i - 1 {
                    props.push("north_cell".into());
                }
                if iy == 0 {
                    props.push("south_cell".into());
                }
                let k = oracle_decide(n_i, ix, iy, north, env as u16);
                if k == 0 {
                    props.push("choice_no_free_cell".into());
                    next[code(core, env)] = sink;
                } else {
                    props.push(format!("choice_cell{k}"));
                    let (x, y, h) = oracle_move(ix, iy, north, k);
                    next[code(core, env)] = ((y * n_i + x) * 2) as usize + usize::from(!h);
                }
            }
            b.add_state(&format!("s{}", code(core, env)), props.iter().map(String::as_str)).unwrap();
        }
    }
    for env in 0..1024 {
        b.add_initial(StateId::new(env));
    }
    for (s, &core) in next.iter().enumerate() {
        for env in 0..1024 {
            b.add_edge(StateId::new(s), StateId::new(code(core, env)));
        }
    }
    b.build(false).unwrap()
}

fn same_structure(a: &impl Kripke, b: &impl Kripke) {
    assert_eq!(a.state_count(), b.state_count());
    assert_eq!(a.initial_states(), b.initial_states());
    for i in 0..a.state_count() {
        let s = StateId::new(i);
        let (mut la, mut lb) = (a.label_names(s), b.label_names(s));
        la.sort();
        lb.sort();
        assert_eq!(la, lb, "labels of {s}");
        assert_eq!(a.successors(s), b.successors(s), "successors of {s}");
    }
}

#[test]
fn hand_built_model_matches_implicit() {
    let model = build_mission_kripke(&MissionConfig::with_cells(2)).unwrap();
    let explicit = materialize(model.kripke(), 1 << 20).unwrap();
    let hand = hand_built(2);
    same_structure(&hand, &explicit);
    for spec in builtin_specs() {
        let a = sat(model.kripke(), &spec.formula).unwrap();
        let b = sat(&explicit, &spec.formula).unwrap();
        let c = sat(&hand, &spec.formula).unwrap();
        assert_eq!(a, b, "{}", spec.id);
        assert_eq!(a, c, "{}", spec.id);
    }
}

#[test]
fn builtin_verdicts_on_small_grids() {
    for n in 2..=4 {
        let model = build_mission_kripke(&MissionConfig::with_cells(n)).unwrap();
        for spec in builtin_specs() {
            let v = verify(model.kripke(), &spec.formula).unwrap();
            assert_eq!(Some(v.holds), spec.expected, "N={n} {}", spec.id);
        }
    }
}

#[test]
fn deadlock_counterexample_is_a_blocked_state() {
    let model = build_mission_kripke(&MissionConfig::with_cells(4)).unwrap();
    let s5 = builtin_specs().into_iter().find(|s| s.id == "S5").unwrap();
    let v = verify(model.kripke(), &s5.formula).unwrap();
    let trace = v.trace.expect("S5 fails with a trace");
    trace.check_path(model.kripke()).unwrap();
    let grid = model.config().grid;
    match model.decode(trace.last().unwrap()).unwrap() {
        MissionState::Uav(u) => {
            assert_eq!(decide_next_cell(&u, &grid), CellChoice::NoFreeCell);
            for k in 1..=5 {
                let inside = uavcheck::mission::neighbour_cell(&grid, u.cell, u.heading, k).is_some();
                assert!(!inside || u.env.blocked(k), "neighbour {k} is free");
            }
        }
        MissionState::DeadlockSink { .. } => panic!("trace should end at the blocked UAV"),
    }
}

#[test]
fn emitted_smv_gives_same_verdicts() {
    for n in 2..=3 {
        let cfg = MissionConfig::with_cells(n);
        let smv = load_smv(&emit_smv(&cfg).unwrap(), 1 << 16).unwrap();
        let native = build_mission_kripke(&cfg).unwrap();
        assert_eq!(smv.specs.len(), builtin_specs().len());
        for spec in &smv.specs {
            let a = verify(smv.kripke(), &spec.formula).unwrap().holds;
            let b = verify(native.kripke(), &spec.formula).unwrap().holds;
            assert_eq!(a, b, "N={n} {}", spec.id);
            assert_eq!(Some(a), spec.expected, "N={n} {}", spec.id);
        }
    }
}

fn small_models() -> &'static [MissionModel] {
    static MODELS: OnceLock<Vec<MissionModel>> = OnceLock::new();
    MODELS.get_or_init(|| (2..8).map(|n| build_mission_kripke(&MissionConfig::with_cells(n)).unwrap()).collect())
}

fn heading() -> impl Strategy<Value = Heading> {
    prop_oneof![Just(Heading::Deg90), Just(Heading::Deg270)]
}

proptest! {
    #[test]
    fn decision_invariants(n in 1..25usize, x in 0..25i64, y in 0..25i64, h in heading(), bits in 0..1024u16) {
        let grid = GridConfig::with_cells(n);
        let cell = Cell::new(x % n as i64, y % n as i64);
        let env = EnvValuation::from_bits(bits);
        let u = UavState { cell, heading: h, env };
        let choice = decide_next_cell(&u, &grid);
        match choice.number() {
            Some(k) => {
                // never a blocked or outside cell
                prop_assert!(!env.blocked(k));
                let (c, nh) = destination(&u, choice, &grid).unwrap();
                prop_assert!(grid.contains(c));
                prop_assert_eq!(nh == h, choice.keeps_heading());
                // a free straight-ahead cell always wins
                if let Some(ahead) = uavcheck::mission::neighbour_cell(&grid, cell, h, 1) {
                    if !env.blocked(1) {
                        prop_assert_eq!(c, ahead);
                    }
                }
            }
            None => {
                for k in 1..=5 {
                    let inside = uavcheck::mission::neighbour_cell(&grid, cell, h, k).is_some();
                    prop_assert!(!inside || env.blocked(k));
                }
            }
        }
    }

    #[test]
    fn encoding_roundtrips(n in 2..8usize, code in 0usize..(8 * 8 * 2 + 1) * 1024) {
        let model = &small_models()[n - 2];
        let s = StateId::new(code % model.state_count());
        let st = model.decode(s).unwrap();
        prop_assert_eq!(model.encode(&st), s);
        let succ = model.successors(s);
        prop_assert_eq!(succ.len(), 1024);
    }
}
