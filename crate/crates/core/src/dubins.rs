//! Shortest curvature-bounded paths between planar poses.
//!
//! Closed forms follow the usual normalization: translate and rotate so the
//! start sits at the origin and the goal on the positive x axis, scale by the
//! turn radius, then solve each of the six words independently.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const WRAP_EPS: f64 = 1e-12;

/// Angle reduced to `[0, 2π)`; values within 1e-12 of either end snap to 0.
pub fn mod2pi(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r < WRAP_EPS || TAU - r < WRAP_EPS {
        0.0
    } else {
        r
    }
}

/// Signed smallest difference `a - b`, in `(-π, π]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DubinsError {
    #[error("turn radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("pose has a non-finite component")]
    NonFinite,
    #[error("sampling step must be positive, got {0}")]
    BadStep(f64),
    #[error("no feasible path word")]
    NoPath,
    #[error("cannot parse pose `{0}`: expected x,y,theta")]
    BadPose(String),
    #[error("unknown word set `{0}`: expected all or four")]
    BadWords(String),
}

/// Position in metres and heading in radians counter-clockwise from east.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose { x, y, theta: mod2pi(theta) }
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// Reflection about the x axis.
    pub fn mirrored(&self) -> Self {
        Pose::new(self.x, -self.y, -self.theta)
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl FromStr for Pose {
    type Err = DubinsError;

    /// Parses `x,y,theta`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| DubinsError::BadPose(s.to_string()))?;
        match parts.as_slice() {
            [x, y, t] if x.is_finite() && y.is_finite() && t.is_finite() => Ok(Pose::new(*x, *y, *t)),
            _ => Err(DubinsError::BadPose(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Word {
    LSL,
    RSR,
    LSR,
    RSL,
    LRL,
    RLR,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Left,
    Straight,
    Right,
}

impl Word {
    /// Tie-break order.
    pub const ALL: [Word; 6] = [Word::LSL, Word::RSR, Word::LSR, Word::RSL, Word::LRL, Word::RLR];
    pub const FOUR: [Word; 4] = [Word::RSR, Word::LSR, Word::RSL, Word::LRL];

    pub fn segments(self) -> [Segment; 3] {
        use Segment::*;
        match self {
            Word::LSL => [Left, Straight, Left],
            Word::RSR => [Right, Straight, Right],
            Word::LSR => [Left, Straight, Right],
            Word::RSL => [Right, Straight, Left],
            Word::LRL => [Left, Right, Left],
            Word::RLR => [Right, Left, Right],
        }
    }

    /// The same word with left and right swapped.
    pub fn mirrored(self) -> Word {
        match self {
            Word::LSL => Word::RSR,
            Word::RSR => Word::LSL,
            Word::LSR => Word::RSL,
            Word::RSL => Word::LSR,
            Word::LRL => Word::RLR,
            Word::RLR => Word::LRL,
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Which words the planner may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Words {
    #[default]
    All,
    /// LRL, RSR, RSL and LSR only.
    Four,
}

impl Words {
    pub fn list(self) -> &'static [Word] {
        match self {
            Words::All => &Word::ALL,
            Words::Four => &Word::FOUR,
        }
    }
}

impl FromStr for Words {
    type Err = DubinsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(Words::All),
            "four" => Ok(Words::Four),
            other => Err(DubinsError::BadWords(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DubinsPath {
    pub word: Word,
    /// Arc angles in radians; a straight middle segment is in metres.
    pub params: [f64; 3],
    pub radius: f64,
    pub start: Pose,
}

/// A pose along a path together with its arclength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub s: f64,
    pub pose: Pose,
}

fn advance(p: Pose, seg: Segment, len: f64, r: f64) -> Pose {
    match seg {
        Segment::Straight => Pose::new(p.x + len * p.theta.cos(), p.y + len * p.theta.sin(), p.theta),
        Segment::Left => {
            let phi = len / r;
            let th = p.theta + phi;
            Pose::new(p.x + r * (th.sin() - p.theta.sin()), p.y - r * (th.cos() - p.theta.cos()), th)
        }
        Segment::Right => {
            let phi = len / r;
            let th = p.theta - phi;
            Pose::new(p.x - r * (th.sin() - p.theta.sin()), p.y + r * (th.cos() - p.theta.cos()), th)
        }
    }
}

impl DubinsPath {
    /// Length of each segment in metres.
    pub fn segment_lengths(&self) -> [f64; 3] {
        let segs = self.word.segments();
        let mut out = [0.0; 3];
        for k in 0..3 {
            out[k] = if segs[k] == Segment::Straight { self.params[k] } else { self.params[k] * self.radius };
        }
        out
    }

    pub fn length(&self) -> f64 {
        self.segment_lengths().iter().sum()
    }

    /// Pose at arclength `s`, clamped to the path.
    pub fn pose_at(&self, s: f64) -> Pose {
        let mut rest = s.clamp(0.0, self.length());
        let mut p = self.start;
        for (seg, len) in self.word.segments().into_iter().zip(self.segment_lengths()) {
            let take = rest.min(len);
            p = advance(p, seg, take, self.radius);
            rest -= take;
            if rest <= 0.0 {
                break;
            }
        }
        p
    }

    pub fn end_pose(&self) -> Pose {
        let mut p = self.start;
        for (seg, len) in self.word.segments().into_iter().zip(self.segment_lengths()) {
            p = advance(p, seg, len, self.radius);
        }
        p
    }

    /// Signed curvature at arclength `s` (positive turning left).
    pub fn curvature_at(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for (seg, len) in self.word.segments().into_iter().zip(self.segment_lengths()) {
            acc += len;
            if s <= acc {
                return match seg {
                    Segment::Left => 1.0 / self.radius,
                    Segment::Right => -1.0 / self.radius,
                    Segment::Straight => 0.0,
                };
            }
        }
        0.0
    }

    /// Poses at arclength 0, step, 2·step, ... with the exact end pose last.
    pub fn sample(&self, step: f64) -> Result<Vec<PathSample>, DubinsError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(DubinsError::BadStep(step));
        }
        let len = self.length();
        let mut out = Vec::new();
        let mut k = 0u64;
        loop {
            let s = k as f64 * step;
            if s >= len - 1e-9 {
                break;
            }
            out.push(PathSample { s, pose: self.pose_at(s) });
            k += 1;
        }
        out.push(PathSample { s: len, pose: self.end_pose() });
        Ok(out)
    }
}

struct Normalized {
    alpha: f64,
    beta: f64,
    d: f64,
}

impl Normalized {
    fn new(start: &Pose, goal: &Pose, r: f64) -> Self {
        let (dx, dy) = (goal.x - start.x, goal.y - start.y);
        let d = dx.hypot(dy) / r;
        let theta = if d > 0.0 { mod2pi(dy.atan2(dx)) } else { 0.0 };
        Normalized { alpha: mod2pi(start.theta - theta), beta: mod2pi(goal.theta - theta), d }
    }
}

/// Normalized `(t, p, q)` for one word: arc angles in radians and, for the
/// middle straight, a length in radii.
fn word_params(w: Word, n: &Normalized) -> Option<[f64; 3]> {
    let (a, b, d) = (n.alpha, n.beta, n.d);
    let (sa, ca, sb, cb) = (a.sin(), a.cos(), b.sin(), b.cos());
    let cab = (a - b).cos();
    match w {
        Word::LSL => {
            let p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sa - sb);
            if p2 < 0.0 {
                return None;
            }
            let tmp = (cb - ca).atan2(d + sa - sb);
            Some([mod2pi(tmp - a), p2.sqrt(), mod2pi(b - tmp)])
        }
        Word::RSR => {
            let p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sb - sa);
            if p2 < 0.0 {
                return None;
            }
            let tmp = (ca - cb).atan2(d - sa + sb);
            Some([mod2pi(a - tmp), p2.sqrt(), mod2pi(tmp - b)])
        }
        Word::LSR => {
            let p2 = -2.0 + d * d + 2.0 * cab + 2.0 * d * (sa + sb);
            if p2 < 0.0 {
                return None;
            }
            let p = p2.sqrt();
            let tmp = (-ca - cb).atan2(d + sa + sb) - (-2.0f64).atan2(p);
            Some([mod2pi(tmp - a), p, mod2pi(tmp - b)])
        }
        Word::RSL => {
            let p2 = d * d - 2.0 + 2.0 * cab - 2.0 * d * (sa + sb);
            if p2 < 0.0 {
                return None;
            }
            let p = p2.sqrt();
            let tmp = (ca + cb).atan2(d - sa - sb) - 2.0f64.atan2(p);
            Some([mod2pi(a - tmp), p, mod2pi(b - tmp)])
        }
        Word::RLR => {
            let c = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sa - sb)) / 8.0;
            if c.abs() > 1.0 {
                return None;
            }
            let p = mod2pi(TAU - c.acos());
            let t = mod2pi(a - (ca - cb).atan2(d - sa + sb) + p / 2.0);
            Some([t, p, mod2pi(a - b - t + p)])
        }
        Word::LRL => {
            let c = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sb - sa)) / 8.0;
            if c.abs() > 1.0 {
                return None;
            }
            let p = mod2pi(TAU - c.acos());
            let t = mod2pi(-a - (ca - cb).atan2(d + sa - sb) + p / 2.0);
            Some([t, p, mod2pi(b - a - t + p)])
        }
    }
}

fn check_inputs(start: &Pose, goal: &Pose, radius: f64) -> Result<(), DubinsError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(DubinsError::BadRadius(radius));
    }
    if !start.is_finite() || !goal.is_finite() {
        return Err(DubinsError::NonFinite);
    }
    Ok(())
}

/// Closed-form candidate for a single word, if that word is feasible.
pub fn candidate(start: Pose, goal: Pose, radius: f64, word: Word) -> Result<Option<DubinsPath>, DubinsError> {
    check_inputs(&start, &goal, radius)?;
    let start = Pose::new(start.x, start.y, start.theta);
    let n = Normalized::new(&start, &Pose::new(goal.x, goal.y, goal.theta), radius);
    Ok(word_params(word, &n).map(|[t, p, q]| {
        let mut params = [t, p, q];
        if word.segments()[1] == Segment::Straight {
            params[1] = p * radius;
        }
        DubinsPath { word, params, radius, start }
    }))
}

/// Shortest path over the given words. Earlier words win ties.
pub fn plan_with(start: Pose, goal: Pose, radius: f64, words: Words) -> Result<DubinsPath, DubinsError> {
    check_inputs(&start, &goal, radius)?;
    let start = Pose::new(start.x, start.y, start.theta);
    let goal = Pose::new(goal.x, goal.y, goal.theta);
    if start == goal {
        let word = words.list()[0];
        return Ok(DubinsPath { word, params: [0.0; 3], radius, start });
    }
    let mut best: Option<DubinsPath> = None;
    for &w in words.list() {
        if let Some(c) = candidate(start, goal, radius, w)? {
            if best.as_ref().is_none_or(|b| c.length() < b.length() - 1e-9) {
                best = Some(c);
            }
        }
    }
    best.ok_or(DubinsError::NoPath)
}

/// Shortest path over all six words.
pub fn plan(start: Pose, goal: Pose, radius: f64) -> Result<DubinsPath, DubinsError> {
    plan_with(start, goal, radius, Words::All)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn straight_ahead() {
        let p = plan(Pose::new(0.0, 0.0, FRAC_PI_2), Pose::new(0.0, 100.0, FRAC_PI_2), 25.0).unwrap();
        assert!((p.length() - 100.0).abs() < 1e-9);
        assert_eq!(p.word, Word::LSL);
    }

    #[test]
    fn lateral_reversal() {
        let p = plan(Pose::new(0.0, 0.0, FRAC_PI_2), Pose::new(100.0, 0.0, 3.0 * FRAC_PI_2), 25.0).unwrap();
        assert_eq!(p.word, Word::RSR);
        assert!((p.length() - (25.0 * PI + 50.0)).abs() < 1e-9);
        let e = p.end_pose();
        assert!((e.x - 100.0).abs() < 1e-9 && e.y.abs() < 1e-9);
    }

    #[test]
    fn identity() {
        let s = Pose::new(3.0, 4.0, 1.0);
        let p = plan(s, s, 25.0).unwrap();
        assert_eq!(p.length(), 0.0);
        assert_eq!(p.sample(1.0).unwrap().len(), 1);
    }

    #[test]
    fn sampling() {
        let p = plan(Pose::new(0.0, 0.0, FRAC_PI_2), Pose::new(0.0, 100.0, FRAC_PI_2), 25.0).unwrap();
        let s = p.sample(25.0).unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.iter().all(|x| x.pose.x.abs() < 1e-12));
        assert!(p.sample(0.0).is_err());
    }

    #[test]
    fn errors() {
        let s = Pose::new(0.0, 0.0, 0.0);
        assert_eq!(plan(s, s, 0.0), Err(DubinsError::BadRadius(0.0)));
        assert_eq!(plan(s, Pose { x: f64::NAN, y: 0.0, theta: 0.0 }, 1.0), Err(DubinsError::NonFinite));
        assert!("1,2".parse::<Pose>().is_err());
        assert!("1,2,x".parse::<Pose>().is_err());
        assert_eq!("1, 2, 0.5".parse::<Pose>().unwrap(), Pose::new(1.0, 2.0, 0.5));
    }

    #[test]
    fn wrap() {
        assert_eq!(mod2pi(TAU), 0.0);
        assert_eq!(mod2pi(-1e-13), 0.0);
        assert!((mod2pi(-FRAC_PI_2) - 3.0 * FRAC_PI_2).abs() < 1e-15);
        assert!((angle_diff(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
    }
}
