//! Exact solvers for bilevel surgeon scheduling and surgery planning.
//!
//! A surgeon head (leader) assigns operating-room blocks to surgeons and
//! proposes a patient plan; each surgeon (follower) then plans its own
//! patients inside the granted blocks. A plan is bilevel feasible when no
//! surgeon can raise its own priority sum on the same blocks.
//!
//! * [`domain`]: instance data, block catalogue, objectives, feasibility.
//! * [`instgen`]: synthetic instances and the JSON format.
//! * [`follower`]: the surgeon problem and the bilevel check.
//! * [`cuts`]: linkage variables, lazy cuts, remembered-cut store.
//! * [`compact`]: leader MIP with a lazy-cut callback.
//! * [`bnp`]: branch-and-price over bilevel-feasible surgeon patterns.
//! * [`inith`]: constructive initial heuristic.
//! * [`analysis`]: centralized/decentralized references, PoS and PoD.
//! * [`solution`]: solution files.

pub mod analysis;
pub mod bnp;
pub mod compact;
pub mod cuts;
pub mod domain;
pub mod follower;
pub mod inith;
pub mod instgen;
mod leader_model;
pub mod outcome;
pub mod ratio;
pub mod solution;

pub use domain::{Assignment, Instance, Rational};
pub use outcome::{SolveError, SolveOutcome, SolveStats, SolveStatus};
