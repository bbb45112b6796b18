//! Solution files: a solver result expressed in instance ids.
//!
//! `y` holds `(surgeon id, block id)`, `x` holds `(patient id, block id)` and
//! `f` holds `(surgeon id, follower value)`. Block ids are catalogue indices.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{follower_objective, leader_objective, Assignment, Instance, Rational};
use crate::outcome::{SolveOutcome, SolveStatus};
use crate::ratio::{format_rational, serde_rational};

#[derive(Debug, thiserror::Error)]
pub enum SolutionError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed solution: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("solution references unknown {kind} id {id}")]
    UnknownId { kind: &'static str, id: u64 },
    #[error("solution records {what} = {recorded} but the assignment scores {actual}")]
    Mismatch { what: String, recorded: String, actual: String },
    #[error("solution has status {0} but no objective value while listing assignments")]
    MissingValue(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct RationalValue(#[serde(with = "serde_rational")] Rational);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SolutionDoc {
    instance_id: String,
    status: String,
    #[serde(rename = "F")]
    value: Option<RationalValue>,
    bound: Option<f64>,
    y: Vec<(u32, usize)>,
    x: Vec<(u32, usize)>,
    f: Vec<(u32, i64)>,
}

/// A solved (or partially solved) instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFile {
    pub instance_id: String,
    pub status: SolveStatus,
    /// Leader objective of the assignment; `None` when nothing was found.
    pub value: Option<Rational>,
    /// Proven lower bound; `None` when not finite.
    pub bound: Option<f64>,
    pub y: Vec<(u32, usize)>,
    pub x: Vec<(u32, usize)>,
    /// Follower value per surgeon id.
    pub f: Vec<(u32, i64)>,
}

fn parse_status(s: &str) -> Option<SolveStatus> {
    [SolveStatus::Optimal, SolveStatus::TimeLimit].into_iter().find(|st| st.as_str() == s)
}

impl SolutionFile {
    pub fn new(
        inst: &Instance,
        instance_id: impl Into<String>,
        status: SolveStatus,
        assignment: Option<&Assignment>,
        bound: f64,
    ) -> Self {
        let (y, x, f, value) = match assignment {
            Some(a) => (
                a.y.iter().map(|&(s, b)| (inst.surgeons[s].id, b)).collect(),
                a.x.iter().map(|&(p, b)| (inst.patients[p].id, b)).collect(),
                (0..inst.surgeons.len()).map(|s| (inst.surgeons[s].id, follower_objective(inst, s, a))).collect(),
                Some(leader_objective(inst, a)),
            ),
            None => (Vec::new(), Vec::new(), Vec::new(), None),
        };
        SolutionFile {
            instance_id: instance_id.into(),
            status,
            value,
            bound: bound.is_finite().then_some(bound),
            y,
            x,
            f,
        }
    }

    pub fn from_outcome(inst: &Instance, instance_id: impl Into<String>, out: &SolveOutcome) -> Self {
        Self::new(inst, instance_id, out.status, out.assignment.as_ref(), out.bound)
    }

    /// Index-based assignment, or `None` when the file records no solution.
    pub fn to_assignment(&self, inst: &Instance) -> Result<Option<Assignment>, SolutionError> {
        if self.value.is_none() {
            if !self.y.is_empty() || !self.x.is_empty() {
                return Err(SolutionError::MissingValue(self.status.as_str()));
            }
            return Ok(None);
        }
        let block = |b: usize| {
            if b < inst.blocks.len() {
                Ok(b)
            } else {
                Err(SolutionError::UnknownId { kind: "block", id: b as u64 })
            }
        };
        let mut asg = Assignment::new();
        for &(sid, b) in &self.y {
            let s = inst.surgeon_index(sid).ok_or(SolutionError::UnknownId { kind: "surgeon", id: sid.into() })?;
            asg.y.insert((s, block(b)?));
        }
        for &(pid, b) in &self.x {
            let p = inst.patient_index(pid).ok_or(SolutionError::UnknownId { kind: "patient", id: pid.into() })?;
            asg.x.insert((p, block(b)?));
        }
        Ok(Some(asg))
    }

    /// Re-scores the assignment and compares with the recorded `F` and `f`.
    pub fn validate(&self, inst: &Instance) -> Result<Option<Assignment>, SolutionError> {
        let Some(asg) = self.to_assignment(inst)? else {
            return Ok(None);
        };
        let actual = leader_objective(inst, &asg);
        let recorded = self.value.expect("checked by to_assignment");
        if actual != recorded {
            return Err(SolutionError::Mismatch {
                what: "F".into(),
                recorded: format_rational(&recorded),
                actual: format_rational(&actual),
            });
        }
        for &(sid, v) in &self.f {
            let s = inst.surgeon_index(sid).ok_or(SolutionError::UnknownId { kind: "surgeon", id: sid.into() })?;
            let got = follower_objective(inst, s, &asg);
            if got != v {
                return Err(SolutionError::Mismatch {
                    what: format!("f[{sid}]"),
                    recorded: v.to_string(),
                    actual: got.to_string(),
                });
            }
        }
        Ok(Some(asg))
    }

    pub fn to_json(&self) -> String {
        let doc = SolutionDoc {
            instance_id: self.instance_id.clone(),
            status: self.status.as_str().into(),
            value: self.value.map(RationalValue),
            bound: self.bound,
            y: self.y.clone(),
            x: self.x.clone(),
            f: self.f.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("solution serializes")
    }
}

/// Parses a solution document without reference to an instance.
pub fn parse_solution(text: &str) -> Result<SolutionFile, SolutionError> {
    let doc: SolutionDoc = serde_json::from_str(text)?;
    let status = parse_status(&doc.status)
        .ok_or_else(|| SolutionError::Parse(serde::de::Error::custom(format!("unknown status {:?}", doc.status))))?;
    Ok(SolutionFile {
        instance_id: doc.instance_id,
        status,
        value: doc.value.map(|v| v.0),
        bound: doc.bound,
        y: doc.y,
        x: doc.x,
        f: doc.f,
    })
}

pub fn load_solution(path: impl AsRef<Path>) -> Result<SolutionFile, SolutionError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SolutionError::Io { path: path.into(), source })?;
    parse_solution(&text)
}

pub fn save_solution(sol: &SolutionFile, path: impl AsRef<Path>) -> Result<(), SolutionError> {
    let path = path.as_ref();
    fs::write(path, sol.to_json() + "\n").map_err(|source| SolutionError::Io { path: path.into(), source })
}
