//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::TAU;

use rand::Rng;
use uavcheck::ctl::Formula;
use uavcheck::kripke::{ExplicitBuilder, ExplicitKripke, Kripke, StateId};
use uavcheck::mission::{Cell, GridConfig};
use uavcheck::sim::SimResult;

// ------------------------------------------------------------------ CTL

pub const ATOMS: [&str; 3] = ["p", "q", "r"];

/// Random total model with up to `max_states` states over [`ATOMS`].
pub fn random_model(rng: &mut impl Rng, max_states: usize) -> ExplicitKripke {
    let n = rng.gen_range(1..=max_states);
    let mut b = ExplicitBuilder::new();
    for a in ATOMS {
        b.declare_prop(a);
    }
    for i in 0..n {
        let props: Vec<&str> = ATOMS.iter().copied().filter(|_| rng.gen_bool(0.45)).collect();
        b.add_state(&format!("s{i}"), props).unwrap();
    }
    for i in 0..n {
        let out = rng.gen_range(1..=n.min(3));
        for _ in 0..out {
            b.add_edge(StateId::new(i), StateId::new(rng.gen_range(0..n)));
        }
    }
    for i in 0..n {
        if i == 0 || rng.gen_bool(0.3) {
            b.add_initial(StateId::new(i));
        }
    }
    b.build(false).unwrap()
}

/// Random formula of depth at most `depth` over [`ATOMS`].
pub fn random_formula(rng: &mut impl Rng, depth: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.2) {
        return match rng.gen_range(0..8) {
            0 => Formula::Top,
            1 => Formula::Bottom,
            k => Formula::atom(ATOMS[k % 3]),
        };
    }
    let sub = |rng: &mut _| random_formula(rng, depth - 1);
    match rng.gen_range(0..14) {
        0 => sub(rng).not(),
        1 => sub(rng).and(sub(rng)),
        2 => sub(rng).or(sub(rng)),
        3 => sub(rng).implies(sub(rng)),
        4 => sub(rng).ax(),
        5 => sub(rng).ex(),
        6 => sub(rng).af(),
        7 => sub(rng).ef(),
        8 => sub(rng).ag(),
        9 => sub(rng).eg(),
        10 | 11 => sub(rng).au(sub(rng)),
        _ => sub(rng).eu(sub(rng)),
    }
}

fn succ(m: &ExplicitKripke) -> Vec<Vec<usize>> {
    (0..m.state_count()).map(|i| m.successors(StateId::new(i)).iter().map(|s| s.index()).collect()).collect()
}

/// States from which some path stays inside `region` forever.
fn can_stay_forever(succ: &[Vec<usize>], region: &[bool]) -> Vec<bool> {
    let n = succ.len();
    // a state of the region lies on a cycle inside the region iff it can
    // reach itself through region states
    let reach_inside = |from: usize| -> Vec<bool> {
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = succ[from].iter().copied().filter(|&t| region[t]).collect();
        while let Some(u) = stack.pop() {
            if !seen[u] {
                seen[u] = true;
                stack.extend(succ[u].iter().copied().filter(|&t| region[t]));
            }
        }
        seen
    };
    let on_cycle: Vec<bool> = (0..n).map(|s| region[s] && reach_inside(s)[s]).collect();
    (0..n).map(|s| region[s] && (on_cycle[s] || reach_inside(s).iter().zip(&on_cycle).any(|(&r, &c)| r && c))).collect()
}

/// States from which some path through `through` states reaches `target`
/// (a `target` state itself counts).
fn can_reach(succ: &[Vec<usize>], through: &[bool], target: &[bool]) -> Vec<bool> {
    let n = succ.len();
    (0..n)
        .map(|s| {
            let mut seen = vec![false; n];
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                if seen[u] {
                    continue;
                }
                seen[u] = true;
                if target[u] {
                    return true;
                }
                if through[u] {
                    stack.extend(succ[u].iter().copied());
                }
            }
            false
        })
        .collect()
}

/// Direct semantic evaluation by graph search, one operator at a time and
/// with no rewriting between operators.
pub fn brute_sat(m: &ExplicitKripke, f: &Formula) -> Vec<bool> {
    let n = m.state_count();
    let sx = succ(m);
    let all = |v: &[bool], s: usize| sx[s].iter().all(|&t| v[t]);
    let any = |v: &[bool], s: usize| sx[s].iter().any(|&t| v[t]);
    match f {
        Formula::Top => vec![true; n],
        Formula::Bottom => vec![false; n],
        Formula::Atom(a) => {
            let p = m.props().lookup(a).expect("known atom");
            (0..n).map(|s| m.label(StateId::new(s), p)).collect()
        }
        Formula::Not(a) => brute_sat(m, a).into_iter().map(|b| !b).collect(),
        Formula::And(a, b) => brute_sat(m, a).into_iter().zip(brute_sat(m, b)).map(|(x, y)| x && y).collect(),
        Formula::Or(a, b) => brute_sat(m, a).into_iter().zip(brute_sat(m, b)).map(|(x, y)| x || y).collect(),
        Formula::Implies(a, b) => brute_sat(m, a).into_iter().zip(brute_sat(m, b)).map(|(x, y)| !x || y).collect(),
        Formula::EX(a) => {
            let v = brute_sat(m, a);
            (0..n).map(|s| any(&v, s)).collect()
        }
        Formula::AX(a) => {
            let v = brute_sat(m, a);
            (0..n).map(|s| all(&v, s)).collect()
        }
        Formula::EF(a) => can_reach(&sx, &vec![true; n], &brute_sat(m, a)),
        Formula::EU(a, b) => can_reach(&sx, &brute_sat(m, a), &brute_sat(m, b)),
        Formula::EG(a) => can_stay_forever(&sx, &brute_sat(m, a)),
        Formula::AG(a) => {
            // no path reaches a violating state
            let bad: Vec<bool> = brute_sat(m, a).into_iter().map(|b| !b).collect();
            can_reach(&sx, &vec![true; n], &bad).into_iter().map(|b| !b).collect()
        }
        Formula::AF(a) => {
            let v = brute_sat(m, a);
            let avoid: Vec<bool> = v.iter().map(|b| !b).collect();
            can_stay_forever(&sx, &avoid).into_iter().map(|b| !b).collect()
        }
        Formula::AU(a, b) => {
            let (va, vb) = (brute_sat(m, a), brute_sat(m, b));
            // a failing path either waits in a∧¬b forever or leaves it
            // through a state with ¬a∧¬b before any b
            let waiting: Vec<bool> = (0..n).map(|s| va[s] && !vb[s]).collect();
            let stuck: Vec<bool> = (0..n).map(|s| !va[s] && !vb[s]).collect();
            let forever = can_stay_forever(&sx, &waiting);
            let escape = can_reach(&sx, &waiting, &stuck);
            (0..n).map(|s| !(forever[s] || escape[s])).collect()
        }
    }
}

// ------------------------------------------------------------------ Dubins

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P {
    pub x: f64,
    pub y: f64,
    pub th: f64,
}

pub fn wrap(a: f64) -> f64 {
    a.rem_euclid(TAU)
}

/// Signed angular difference in (-π, π].
pub fn ang(a: f64, b: f64) -> f64 {
    let d = wrap(a - b);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

/// Moves along an arc (`turn` = +1 left, -1 right) or a straight (`turn` = 0).
pub fn step(p: P, turn: i32, len: f64, r: f64) -> P {
    if turn == 0 {
        return P { x: p.x + len * p.th.cos(), y: p.y + len * p.th.sin(), th: p.th };
    }
    let s = turn as f64;
    let (cx, cy) = (p.x - s * r * p.th.sin(), p.y + s * r * p.th.cos());
    let th = p.th + s * len / r;
    P { x: cx + s * r * th.sin(), y: cy - s * r * th.cos(), th }
}

fn centre(p: P, turn: i32, r: f64) -> (f64, f64) {
    let s = turn as f64;
    (p.x - s * r * p.th.sin(), p.y + s * r * p.th.cos())
}

/// A path found by the search oracle: word as three turn codes and
/// segment lengths in metres.
#[derive(Debug, Clone, Copy)]
pub struct OraclePath {
    pub word: [i32; 3],
    pub lens: [f64; 3],
}

impl OraclePath {
    pub fn length(&self) -> f64 {
        self.lens.iter().sum()
    }

    pub fn end(&self, start: P, r: f64) -> P {
        (0..3).fold(start, |p, k| step(p, self.word[k], self.lens[k], r))
    }
}

fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Roots of `f` on [0, 2π) found by dense sampling and bisection.
fn roots(f: &dyn Fn(f64) -> f64, samples: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let h = TAU / samples as f64;
    let mut prev = f(0.0);
    if prev.abs() < 1e-12 {
        out.push(0.0);
    }
    for i in 1..=samples {
        let t = i as f64 * h;
        let cur = f(t);
        if cur.abs() < 1e-12 {
            out.push(t);
        } else if prev.abs() >= 1e-12 && (prev > 0.0) != (cur > 0.0) {
            out.push(bisect(f, t - h, t));
        }
        prev = cur;
    }
    out
}

/// Shortest path found by sweeping the first arc angle of each word and
/// solving the remaining tangency condition numerically.
pub fn search_oracle(start: P, goal: P, r: f64, words: &[[i32; 3]], samples: usize) -> Option<OraclePath> {
    let mut best: Option<OraclePath> = None;
    let mut consider = |c: OraclePath| {
        let e = c.end(start, r);
        let ok = (e.x - goal.x).hypot(e.y - goal.y) < 1e-6 && ang(e.th, goal.th).abs() < 1e-6;
        if ok && best.is_none_or(|b| c.length() < b.length()) {
            best = Some(c);
        }
    };
    for &w in words {
        let (a, b) = (w[0], w[2]);
        let last = centre(goal, b, r);
        if w[1] == 0 {
            // first arc, straight, tangent into the goal circle
            let tangent = |t: f64| -> (f64, f64, P) {
                let p = step(start, a, r * t, r);
                let s = b as f64;
                let (tx, ty) = (last.0 + s * r * p.th.sin(), last.1 - s * r * p.th.cos());
                let (ux, uy) = (p.th.cos(), p.th.sin());
                let (dx, dy) = (tx - p.x, ty - p.y);
                (ux * dy - uy * dx, ux * dx + uy * dy, p)
            };
            for t in roots(&|t| tangent(t).0, samples) {
                let (_, along, p) = tangent(t);
                if along < -1e-9 {
                    continue;
                }
                let q = wrap(b as f64 * (goal.th - p.th));
                consider(OraclePath { word: w, lens: [r * t, along.max(0.0), r * q] });
            }
        } else {
            // middle circle must touch the goal circle
            let gap = |t: f64| {
                let p = step(start, a, r * t, r);
                let m = centre(p, w[1], r);
                (m.0 - last.0).hypot(m.1 - last.1) - 2.0 * r
            };
            for t in roots(&gap, samples) {
                let p = step(start, a, r * t, r);
                let m = centre(p, w[1], r);
                let (mx, my) = (0.5 * (m.0 + last.0), 0.5 * (m.1 + last.1));
                // heading at the touching point on the middle circle
                let s = w[1] as f64;
                let th_m = (s * (mx - m.0)).atan2(-s * (my - m.1));
                let mid = wrap(s * (th_m - p.th));
                let q = wrap(b as f64 * (goal.th - th_m));
                consider(OraclePath { word: w, lens: [r * t, r * mid, r * q] });
            }
        }
    }
    best
}

pub const WORDS6: [[i32; 3]; 6] = [[1, 0, 1], [-1, 0, -1], [1, 0, -1], [-1, 0, 1], [1, -1, 1], [-1, 1, -1]];

// ------------------------------------------------------------------ mission

/// Independent restatement of the cell-selection rule on raw integers.
/// Returns the chosen neighbour 1..=5, or 0 for no free cell.
pub fn oracle_decide(n: i64, ix: i64, iy: i64, north: bool, env: u16) -> usize {
    let s = if north { 1 } else { -1 };
    let offs = [(0, s), (-s, s), (s, s), (-s, 0), (s, 0)];
    let order: [usize; 5] = if !north && iy == 0 { [1, 3, 4, 2, 5] } else { [1, 3, 5, 2, 4] };
    for k in order {
        let (dx, dy) = offs[k - 1];
        let (x, y) = (ix + dx, iy + dy);
        let inside = (0..n).contains(&x) && (0..n).contains(&y);
        let blocked = env >> (k - 1) & 1 == 1 || env >> (4 + k) & 1 == 1;
        if inside && !blocked {
            return k;
        }
    }
    0
}

/// Cell and heading after choosing neighbour `k`.
pub fn oracle_move(ix: i64, iy: i64, north: bool, k: usize) -> (i64, i64, bool) {
    let s = if north { 1 } else { -1 };
    let offs = [(0, s), (-s, s), (s, s), (-s, 0), (s, 0)];
    let (dx, dy) = offs[k - 1];
    (ix + dx, iy + dy, if k >= 4 { !north } else { north })
}

// ------------------------------------------------------------------ sim

/// Column sweep from the south-west corner: up even columns, down odd ones.
pub fn boustrophedon(n: i64) -> Vec<Cell> {
    (0..n).flat_map(|x| (0..n).map(move |k| Cell::new(x, if x % 2 == 0 { k } else { n - 1 - k }))).collect()
}

/// Samples lying strictly inside a threat cell, shrunk by `margin`.
pub fn threat_incursions(r: &SimResult, grid: &GridConfig, margin: f64) -> usize {
    let half = grid.cell_size as f64 / 2.0 - margin;
    r.tracks
        .iter()
        .flat_map(|t| &t.samples)
        .filter(|s| {
            r.threats.iter().any(|&c| {
                let (cx, cy) = grid.centre_f64(c);
                (s.x - cx).abs() < half && (s.y - cy).abs() < half
            })
        })
        .count()
}

/// Pairs of UAVs holding overlapping claims on the same destination cell.
pub fn claim_conflicts(r: &SimResult) -> usize {
    let mut claims: Vec<(Cell, usize, f64, f64)> = Vec::new();
    for t in &r.tracks {
        for d in &t.decisions {
            if let (Some(c), Some(a)) = (d.destination, d.arrival) {
                claims.push((c, t.uav, d.t, a));
            }
        }
    }
    let mut n = 0;
    for (i, a) in claims.iter().enumerate() {
        for b in &claims[i + 1..] {
            if a.0 == b.0 && a.1 != b.1 && a.2 < b.3 && b.2 < a.3 {
                n += 1;
            }
        }
    }
    n
}
