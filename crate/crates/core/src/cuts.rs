//! Block-count linkage variables, the two lazy-cut families and the
//! per-surgeon store of remembered cuts.

use std::collections::HashSet;
use std::fmt;
use std::io::{self, Write};
use std::sync::RwLock;

use optkern::{Constraint, MipProblem, VarId};

use crate::domain::Instance;
use crate::follower::follower_big_m;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CutKind {
    /// Objective-based: the surgeon's value must reach the follower optimum.
    Olc,
    /// Assignment-based: the follower's patient set is enforced.
    Alc,
}

impl fmt::Display for CutKind {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(match self {
            CutKind::Olc => "O_LC",
            CutKind::Alc => "A_LC",
        })
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum CutError {
    #[error("profile count {count} for length index {length} exceeds the maximum {max}")]
    ProfileOutOfRange { length: usize, count: u32, max: u32 },
    #[error("profile has {got} entries, expected {expected}")]
    ProfileShape { got: usize, expected: usize },
}

/// Number of blocks of each length (indexed like [`Instance::lengths`]) held by one surgeon.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockCountProfile(pub Vec<u32>);

impl BlockCountProfile {
    pub fn of_blocks(inst: &Instance, blocks: &[usize]) -> Self {
        let mut counts = vec![0; inst.lengths.len()];
        for &b in blocks {
            counts[inst.length_index(b)] += 1;
        }
        BlockCountProfile(counts)
    }
}

/// Largest number of blocks of length index `l` one surgeon can hold.
pub fn w_max(inst: &Instance, l: usize) -> u32 {
    let of_length = inst.blocks.iter().filter(|b| b.length == inst.lengths[l]).count() as u64;
    let per_days = inst.v_day as u64 * inst.days as u64;
    (inst.v_horizon as u64).min(per_days).min(of_length) as u32
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LazyCut {
    pub kind: CutKind,
    pub surgeon: usize,
    pub profile: BlockCountProfile,
    /// Patients the follower schedules (assignment-based cuts).
    pub pa_set: Vec<usize>,
    /// Optimal follower value (objective-based cuts).
    pub f_c: i64,
    pub counter: usize,
}

impl LazyCut {
    pub fn olc(surgeon: usize, profile: BlockCountProfile, f_c: i64) -> Self {
        LazyCut { kind: CutKind::Olc, surgeon, profile, pa_set: Vec::new(), f_c, counter: 0 }
    }

    pub fn alc(surgeon: usize, profile: BlockCountProfile, mut pa_set: Vec<usize>) -> Self {
        pa_set.sort_unstable();
        pa_set.dedup();
        LazyCut { kind: CutKind::Alc, surgeon, profile, pa_set, f_c: 0, counter: 0 }
    }

    fn key(&self) -> (CutKind, BlockCountProfile, Vec<usize>, i64) {
        (self.kind, self.profile.clone(), self.pa_set.clone(), self.f_c)
    }

    /// Left- and right-hand side of the cut at a concrete plan of its surgeon,
    /// evaluated in integers with the linkage variables implied by `blocks`.
    pub fn evaluate(&self, inst: &Instance, blocks: &[usize], patients: &[usize]) -> (i64, i64) {
        let m = follower_big_m(inst, self.surgeon);
        let mismatched = self.mismatch(inst, blocks);
        let own: Vec<usize> = patients.iter().copied().filter(|&p| inst.patients[p].surgeon == self.surgeon).collect();
        match self.kind {
            CutKind::Olc => {
                let f: i64 = own.iter().map(|&p| inst.patients[p].prio_follower as i64).sum();
                (f + m * mismatched, self.f_c)
            }
            CutKind::Alc => {
                let inside = own.iter().filter(|p| self.pa_set.binary_search(p).is_ok()).count() as i64;
                let outside = own.len() as i64 - inside;
                (inside - outside + m * mismatched, self.pa_set.len() as i64)
            }
        }
    }

    /// Number of lengths whose count differs from the profile (`|L| − Σ_l q_{l, n_l}`).
    pub fn mismatch(&self, inst: &Instance, blocks: &[usize]) -> i64 {
        let actual = BlockCountProfile::of_blocks(inst, blocks);
        actual.0.iter().zip(&self.profile.0).filter(|(a, b)| a != b).count() as i64
    }

    pub fn is_satisfied_by(&self, inst: &Instance, blocks: &[usize], patients: &[usize]) -> bool {
        let (lhs, rhs) = self.evaluate(inst, blocks, patients);
        lhs >= rhs
    }
}

impl fmt::Display for LazyCut {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        write!(f, "{} surgeon={} profile={:?}", self.kind, self.surgeon, self.profile.0)?;
        match self.kind {
            CutKind::Olc => write!(f, " f={}", self.f_c),
            CutKind::Alc => write!(f, " pa={:?}", self.pa_set),
        }
    }
}

/// Linkage variables `q[l][w]` of one surgeon: `q[l][w] = 1` iff the surgeon holds `w` blocks of length `l`.
#[derive(Debug, Clone)]
pub struct QLink {
    pub q: Vec<Vec<VarId>>,
}

/// Adds `q` binaries and, per length, `Σ_w w q_lw = Σ_{b: Γ_b = l} y_b` and `Σ_w q_lw = 1`.
///
/// `y_vars` lists the surgeon's block variables as (block, var).
pub fn build_q_link(mip: &mut MipProblem, inst: &Instance, s: usize, y_vars: &[(usize, VarId)]) -> QLink {
    let mut q = Vec::with_capacity(inst.lengths.len());
    for l in 0..inst.lengths.len() {
        let vars: Vec<VarId> = (0..=w_max(inst, l)).map(|w| mip.add_binary(format!("q_{s}_{l}_{w}"), 0.0)).collect();
        let mut count: Vec<(VarId, f64)> = vars.iter().enumerate().map(|(w, &v)| (v, w as f64)).collect();
        count.extend(y_vars.iter().filter(|&&(b, _)| inst.length_index(b) == l).map(|&(_, v)| (v, -1.0)));
        mip.lp.add_constraint(Constraint::eq(count, 0.0));
        mip.lp.add_constraint(Constraint::eq(vars.iter().map(|&v| (v, 1.0)).collect(), 1.0));
        q.push(vars);
    }
    QLink { q }
}

fn indicator_terms(cut: &LazyCut, inst: &Instance, link: &QLink, m: f64) -> Result<Vec<(VarId, f64)>, CutError> {
    if cut.profile.0.len() != inst.lengths.len() {
        return Err(CutError::ProfileShape { got: cut.profile.0.len(), expected: inst.lengths.len() });
    }
    cut.profile
        .0
        .iter()
        .enumerate()
        .map(|(l, &n)| {
            link.q[l].get(n as usize).map(|&v| (v, -m)).ok_or(CutError::ProfileOutOfRange {
                length: l,
                count: n,
                max: link.q[l].len() as u32 - 1,
            })
        })
        .collect()
}

/// `Σ_{p ∈ P_s} π_p^FP Σ_b x_pb + M (|L| − Σ_l q_{l, n_l}) ≥ f^c`.
///
/// `x_vars[k]` holds the block variables of the surgeon's `k`-th patient.
pub fn build_olc(inst: &Instance, cut: &LazyCut, link: &QLink, x_vars: &[Vec<VarId>]) -> Result<Constraint, CutError> {
    let m = follower_big_m(inst, cut.surgeon) as f64;
    let mut row = indicator_terms(cut, inst, link, m)?;
    for (k, &p) in inst.surgeons[cut.surgeon].patients.iter().enumerate() {
        let w = inst.patients[p].prio_follower as f64;
        row.extend(x_vars[k].iter().map(|&v| (v, w)));
    }
    Ok(Constraint::ge(row, cut.f_c as f64 - m * inst.lengths.len() as f64))
}

/// `Σ_{p ∈ PA} Σ_b x_pb − Σ_{p ∉ PA} Σ_b x_pb + M (|L| − Σ_l q_{l, n_l}) ≥ |PA|`.
pub fn build_alc(inst: &Instance, cut: &LazyCut, link: &QLink, x_vars: &[Vec<VarId>]) -> Result<Constraint, CutError> {
    let m = follower_big_m(inst, cut.surgeon) as f64;
    let mut row = indicator_terms(cut, inst, link, m)?;
    for (k, p) in inst.surgeons[cut.surgeon].patients.iter().enumerate() {
        let sign = if cut.pa_set.binary_search(p).is_ok() { 1.0 } else { -1.0 };
        row.extend(x_vars[k].iter().map(|&v| (v, sign)));
    }
    Ok(Constraint::ge(row, cut.pa_set.len() as f64 - m * inst.lengths.len() as f64))
}

pub fn build_cut(inst: &Instance, cut: &LazyCut, link: &QLink, x_vars: &[Vec<VarId>]) -> Result<Constraint, CutError> {
    match cut.kind {
        CutKind::Olc => build_olc(inst, cut, link, x_vars),
        CutKind::Alc => build_alc(inst, cut, link, x_vars),
    }
}

/// A generated cut together with the plan of its surgeon that triggered it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutEvent {
    pub cut: LazyCut,
    pub trigger_blocks: Vec<usize>,
    pub trigger_patients: Vec<usize>,
}

#[derive(Debug, Default)]
struct SurgeonLog {
    cuts: Vec<LazyCut>,
    keys: HashSet<(CutKind, BlockCountProfile, Vec<usize>, i64)>,
}

/// Append-only, deduplicated per-surgeon cut store shared across pricing runs.
#[derive(Debug)]
pub struct LcrStore {
    logs: RwLock<Vec<SurgeonLog>>,
}

impl LcrStore {
    pub fn new(num_surgeons: usize) -> Self {
        LcrStore { logs: RwLock::new((0..num_surgeons).map(|_| SurgeonLog::default()).collect()) }
    }

    /// Stores the cut unless an identical one (ignoring the counter) is already known.
    pub fn record(&self, cut: LazyCut) -> bool {
        let mut logs = self.logs.write().expect("cut store poisoned");
        let log = &mut logs[cut.surgeon];
        if log.keys.insert(cut.key()) {
            log.cuts.push(cut);
            true
        } else {
            false
        }
    }

    /// Snapshot of every cut recorded for `s`, in insertion order.
    pub fn retrieve(&self, s: usize) -> Vec<LazyCut> {
        self.logs.read().expect("cut store poisoned")[s].cuts.clone()
    }

    pub fn len(&self) -> usize {
        self.logs.read().expect("cut store poisoned").iter().map(|l| l.cuts.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One line per cut: kind, surgeon, profile, payload.
    pub fn dump(&self, mut out: impl Write) -> io::Result<()> {
        for log in self.logs.read().expect("cut store poisoned").iter() {
            for cut in &log.cuts {
                writeln!(out, "{cut}")?;
            }
        }
        Ok(())
    }
}
