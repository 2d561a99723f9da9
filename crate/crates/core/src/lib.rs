//! Explicit-state CTL model checking of a cooperative multi-UAV search
//! behaviour, with a Dubins path planner and an event-driven simulator that
//! replays counterexamples as flight trajectories.

pub mod checker;
pub mod ctl;
pub mod dubins;
pub mod kripke;
pub mod mission;
pub mod sim;
