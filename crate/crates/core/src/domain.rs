//! Problem data, block catalogue, objectives and single-level feasibility.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use num_traits::Zero;
use serde_json::Value;

/// Exact arithmetic type for objective values and weights.
pub type Rational = Ratio<i128>;

/// Upper bounds applied when validating untrusted instance data.
pub const MAX_DAYS: usize = 366;
pub const MAX_SLOTS_PER_DAY: u32 = 1440;
pub const MAX_ROOMS: u32 = 1000;
pub const MAX_PATIENTS: usize = 100_000;
pub const MAX_PRIORITY: u32 = 1_000_000;
pub const MAX_DURATION: u32 = 1_000_000;
pub const MAX_WEIGHT_PART: i128 = 1_000_000;
const MAX_BLOCKS: usize = 100_000;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("block catalogue is empty: no (start, length) pair fits in {slots} slots")]
    EmptyCatalogue { slots: u32 },
    #[error("assignment references unknown {kind} {index}")]
    UnknownIndex { kind: &'static str, index: usize },
}

/// An operational block: a day, a start slot and a length in slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Block {
    pub id: usize,
    pub day: usize,
    pub start: u32,
    pub length: u32,
}

impl Block {
    pub fn covers(&self, day: usize, t: u32) -> bool {
        self.day == day && self.start <= t && t < self.start + self.length
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patient {
    pub id: u32,
    /// Index into [`Instance::surgeons`].
    pub surgeon: usize,
    pub duration: u32,
    pub prio_leader: u32,
    pub prio_follower: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Surgeon {
    pub id: u32,
    /// Indices into [`Instance::patients`], in input order.
    pub patients: Vec<usize>,
}

/// Raw patient data as supplied by a caller or an instance file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatientSpec {
    pub id: u32,
    pub duration: u32,
    pub prio_leader: u32,
    pub prio_follower: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurgeonSpec {
    pub id: u32,
    pub patients: Vec<PatientSpec>,
}

/// Everything needed to build an [`Instance`]; blocks and overlap sets are derived.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub days: usize,
    pub rooms: u32,
    pub slots_per_day: u32,
    pub lengths: Vec<u32>,
    pub starts: Vec<u32>,
    pub v_day: u32,
    pub v_horizon: u32,
    pub alpha: Rational,
    pub beta: Rational,
    /// Overrides the default capacity `slots_per_day * rooms * days`.
    pub capacity: Option<u64>,
    /// (surgeon id, block index) pairs.
    pub unavailability: Vec<(u32, usize)>,
    pub surgeons: Vec<SurgeonSpec>,
    pub seed: Option<u64>,
    pub params: Option<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub days: usize,
    pub rooms: u32,
    pub slots_per_day: u32,
    /// Allowed block lengths, ascending.
    pub lengths: Vec<u32>,
    /// Allowed start slots, ascending; also the grid of overlap check points.
    pub starts: Vec<u32>,
    pub blocks: Vec<Block>,
    pub surgeons: Vec<Surgeon>,
    pub patients: Vec<Patient>,
    /// (surgeon index, block index) pairs a surgeon cannot take.
    pub unavailable: BTreeSet<(usize, usize)>,
    pub v_day: u32,
    pub v_horizon: u32,
    pub capacity: u64,
    pub alpha: Rational,
    pub beta: Rational,
    pub seed: Option<u64>,
    pub params: Option<Value>,
    capacity_overridden: bool,
    /// Block ids per grid point `day * starts.len() + start index`.
    overlap: Vec<Vec<usize>>,
    /// Grid points covered by each block.
    block_points: Vec<Vec<usize>>,
    length_index: Vec<usize>,
}

/// Every (day, start, length) with `start + length <= slots_per_day`, ordered by (day, start, length).
pub fn enumerate_blocks(days: usize, slots_per_day: u32, lengths: &[u32], starts: &[u32]) -> Vec<Block> {
    let lengths: BTreeSet<u32> = lengths.iter().copied().filter(|&l| l > 0).collect();
    let starts: BTreeSet<u32> = starts.iter().copied().collect();
    let mut blocks = Vec::new();
    for day in 0..days {
        for &start in &starts {
            for &length in &lengths {
                if start.checked_add(length).is_some_and(|end| end <= slots_per_day) {
                    blocks.push(Block { id: blocks.len(), day, start, length });
                }
            }
        }
    }
    blocks
}

/// Blocks in progress at each (day, t) for t in `starts`.
pub fn build_overlap_sets(blocks: &[Block], starts: &[u32]) -> BTreeMap<(usize, u32), BTreeSet<usize>> {
    let days: BTreeSet<usize> = blocks.iter().map(|b| b.day).collect();
    let mut sets = BTreeMap::new();
    for &d in &days {
        for &t in starts {
            let set = blocks.iter().filter(|b| b.covers(d, t)).map(|b| b.id).collect();
            sets.insert((d, t), set);
        }
    }
    sets
}

fn invalid(msg: impl Into<String>) -> DomainError {
    DomainError::Invalid(msg.into())
}

impl Instance {
    pub fn new(spec: InstanceSpec) -> Result<Self, DomainError> {
        if spec.days == 0 || spec.days > MAX_DAYS {
            return Err(invalid(format!("days must be in 1..={MAX_DAYS}")));
        }
        if spec.rooms > MAX_ROOMS {
            return Err(invalid(format!("rooms must be at most {MAX_ROOMS}")));
        }
        if spec.slots_per_day == 0 || spec.slots_per_day > MAX_SLOTS_PER_DAY {
            return Err(invalid(format!("slots_per_day must be in 1..={MAX_SLOTS_PER_DAY}")));
        }
        if spec.lengths.is_empty() || spec.lengths.contains(&0) {
            return Err(invalid("lengths must be a non-empty set of positive slot counts"));
        }
        if spec.starts.is_empty() || spec.starts.iter().any(|&t| t >= spec.slots_per_day) {
            return Err(invalid("starts must be a non-empty set of slots inside the day"));
        }
        for (name, w) in [("alpha", spec.alpha), ("beta", spec.beta)] {
            if w < Rational::zero() || w.numer().abs() > MAX_WEIGHT_PART || *w.denom() > MAX_WEIGHT_PART {
                return Err(invalid(format!(
                    "{name} must be a non-negative rational with parts up to {MAX_WEIGHT_PART}"
                )));
            }
        }
        let lengths: Vec<u32> = spec.lengths.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let starts: Vec<u32> = spec.starts.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        if spec.days * starts.len() * lengths.len() > MAX_BLOCKS {
            return Err(invalid("block catalogue too large"));
        }
        let blocks = enumerate_blocks(spec.days, spec.slots_per_day, &lengths, &starts);
        if blocks.is_empty() {
            return Err(DomainError::EmptyCatalogue { slots: spec.slots_per_day });
        }

        let mut surgeons = Vec::with_capacity(spec.surgeons.len());
        let mut patients = Vec::new();
        let mut surgeon_ids = BTreeMap::new();
        let mut patient_ids = BTreeSet::new();
        for (si, s) in spec.surgeons.iter().enumerate() {
            if surgeon_ids.insert(s.id, si).is_some() {
                return Err(invalid(format!("duplicate surgeon id {}", s.id)));
            }
            let mut list = Vec::with_capacity(s.patients.len());
            for p in &s.patients {
                if !patient_ids.insert(p.id) {
                    return Err(invalid(format!("duplicate patient id {}", p.id)));
                }
                if p.duration == 0 || p.duration > MAX_DURATION {
                    return Err(invalid(format!("patient {}: duration must be in 1..={MAX_DURATION}", p.id)));
                }
                for (name, v) in [("prio_leader", p.prio_leader), ("prio_follower", p.prio_follower)] {
                    if v == 0 || v > MAX_PRIORITY {
                        return Err(invalid(format!("patient {}: {name} must be in 1..={MAX_PRIORITY}", p.id)));
                    }
                }
                if patients.len() >= MAX_PATIENTS {
                    return Err(invalid(format!("more than {MAX_PATIENTS} patients")));
                }
                list.push(patients.len());
                patients.push(Patient {
                    id: p.id,
                    surgeon: si,
                    duration: p.duration,
                    prio_leader: p.prio_leader,
                    prio_follower: p.prio_follower,
                });
            }
            surgeons.push(Surgeon { id: s.id, patients: list });
        }

        let mut unavailable = BTreeSet::new();
        for &(sid, b) in &spec.unavailability {
            let s =
                *surgeon_ids.get(&sid).ok_or_else(|| invalid(format!("unavailability names unknown surgeon {sid}")))?;
            if b >= blocks.len() {
                return Err(invalid(format!("unavailability names unknown block {b}")));
            }
            unavailable.insert((s, b));
        }

        let default_capacity = spec.slots_per_day as u64 * spec.rooms as u64 * spec.days as u64;
        let capacity = spec.capacity.unwrap_or(default_capacity);
        if capacity > default_capacity.max(1) * 1000 {
            return Err(invalid("capacity is implausibly large"));
        }

        let npts = starts.len();
        let mut overlap = vec![Vec::new(); spec.days * npts];
        let mut block_points = vec![Vec::new(); blocks.len()];
        for b in &blocks {
            for (ti, &t) in starts.iter().enumerate() {
                if b.covers(b.day, t) {
                    let pt = b.day * npts + ti;
                    overlap[pt].push(b.id);
                    block_points[b.id].push(pt);
                }
            }
        }
        let length_index = blocks.iter().map(|b| lengths.binary_search(&b.length).expect("catalogue length")).collect();

        Ok(Instance {
            days: spec.days,
            rooms: spec.rooms,
            slots_per_day: spec.slots_per_day,
            lengths,
            starts,
            blocks,
            surgeons,
            patients,
            unavailable,
            v_day: spec.v_day,
            v_horizon: spec.v_horizon,
            capacity,
            alpha: spec.alpha,
            beta: spec.beta,
            seed: spec.seed,
            params: spec.params,
            capacity_overridden: spec.capacity.is_some_and(|c| c != default_capacity),
            overlap,
            block_points,
            length_index,
        })
    }

    /// Inverse of [`Instance::new`].
    pub fn to_spec(&self) -> InstanceSpec {
        InstanceSpec {
            days: self.days,
            rooms: self.rooms,
            slots_per_day: self.slots_per_day,
            lengths: self.lengths.clone(),
            starts: self.starts.clone(),
            v_day: self.v_day,
            v_horizon: self.v_horizon,
            alpha: self.alpha,
            beta: self.beta,
            capacity: self.capacity_overridden.then_some(self.capacity),
            unavailability: self.unavailable.iter().map(|&(s, b)| (self.surgeons[s].id, b)).collect(),
            surgeons: self
                .surgeons
                .iter()
                .map(|s| SurgeonSpec {
                    id: s.id,
                    patients: s
                        .patients
                        .iter()
                        .map(|&p| {
                            let p = &self.patients[p];
                            PatientSpec {
                                id: p.id,
                                duration: p.duration,
                                prio_leader: p.prio_leader,
                                prio_follower: p.prio_follower,
                            }
                        })
                        .collect(),
                })
                .collect(),
            seed: self.seed,
            params: self.params.clone(),
        }
    }

    pub fn num_points(&self) -> usize {
        self.overlap.len()
    }

    /// (day, t) of a grid point index.
    pub fn point(&self, pt: usize) -> (usize, u32) {
        (pt / self.starts.len(), self.starts[pt % self.starts.len()])
    }

    /// Blocks in progress at grid point `pt` (the set O_dt).
    pub fn overlap_at(&self, pt: usize) -> &[usize] {
        &self.overlap[pt]
    }

    /// Grid points at which block `b` is in progress.
    pub fn block_points(&self, b: usize) -> &[usize] {
        &self.block_points[b]
    }

    /// The overlap sets keyed by (day, t).
    pub fn overlap_sets(&self) -> BTreeMap<(usize, u32), BTreeSet<usize>> {
        (0..self.num_points()).map(|pt| (self.point(pt), self.overlap[pt].iter().copied().collect())).collect()
    }

    /// Position of the block's length in [`Instance::lengths`].
    pub fn length_index(&self, b: usize) -> usize {
        self.length_index[b]
    }

    pub fn is_unavailable(&self, s: usize, b: usize) -> bool {
        self.unavailable.contains(&(s, b))
    }

    pub fn surgeon_index(&self, id: u32) -> Option<usize> {
        self.surgeons.iter().position(|s| s.id == id)
    }

    pub fn patient_index(&self, id: u32) -> Option<usize> {
        self.patients.iter().position(|p| p.id == id)
    }

    /// Leader gain of scheduling patient `p`: `α δ_p + β π_p^LP`.
    pub fn leader_gain(&self, p: usize) -> Rational {
        let p = &self.patients[p];
        self.alpha * Rational::from(p.duration as i128) + self.beta * Rational::from(p.prio_leader as i128)
    }

    /// Σ π^LP over the given patients.
    pub fn leader_priority_sum(&self, patients: impl IntoIterator<Item = usize>) -> i64 {
        patients.into_iter().map(|p| self.patients[p].prio_leader as i64).sum()
    }

    /// `F` of the empty assignment: `α C + β Σ_p π_p^LP`.
    pub fn objective_constant(&self) -> Rational {
        self.alpha * Rational::from(self.capacity as i128)
            + self.beta * Rational::from(self.leader_priority_sum(0..self.patients.len()) as i128)
    }

    /// Least common denominator of α and β; every `F` is a multiple of its inverse.
    pub fn weight_denominator(&self) -> i128 {
        let (a, b) = (*self.alpha.denom(), *self.beta.denom());
        a / gcd(a, b) * b
    }
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

/// Surgeon-block incidences `y` and patient-block incidences `x`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Assignment {
    /// (surgeon index, block index).
    pub y: BTreeSet<(usize, usize)>,
    /// (patient index, block index).
    pub x: BTreeSet<(usize, usize)>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn blocks_of(&self, s: usize) -> Vec<usize> {
        self.y.iter().filter(|&&(t, _)| t == s).map(|&(_, b)| b).collect()
    }

    /// (patient, block) pairs of surgeon `s`'s patients.
    pub fn patients_of(&self, inst: &Instance, s: usize) -> Vec<(usize, usize)> {
        self.x.iter().filter(|&&(p, _)| inst.patients[p].surgeon == s).copied().collect()
    }

    pub fn check_indices(&self, inst: &Instance) -> Result<(), DomainError> {
        for &(s, b) in &self.y {
            if s >= inst.surgeons.len() {
                return Err(DomainError::UnknownIndex { kind: "surgeon", index: s });
            }
            if b >= inst.blocks.len() {
                return Err(DomainError::UnknownIndex { kind: "block", index: b });
            }
        }
        for &(p, b) in &self.x {
            if p >= inst.patients.len() {
                return Err(DomainError::UnknownIndex { kind: "patient", index: p });
            }
            if b >= inst.blocks.len() {
                return Err(DomainError::UnknownIndex { kind: "block", index: b });
            }
        }
        Ok(())
    }

    pub fn leader_value(&self, inst: &Instance) -> Rational {
        leader_objective(inst, self)
    }

    pub fn follower_value(&self, inst: &Instance, s: usize) -> i64 {
        follower_objective(inst, s, self)
    }

    /// Σ δ_p over scheduled patients.
    pub fn scheduled_duration(&self, inst: &Instance) -> i64 {
        self.x.iter().map(|&(p, _)| inst.patients[p].duration as i64).sum()
    }

    /// Σ π_p^LP over scheduled patients.
    pub fn scheduled_leader_priority(&self, inst: &Instance) -> i64 {
        self.x.iter().map(|&(p, _)| inst.patients[p].prio_leader as i64).sum()
    }
}

/// `F = α (C − Σ δ_p x_pb) + β Σ_p π_p^LP (1 − Σ_b x_pb)`, exactly.
pub fn leader_objective(inst: &Instance, asg: &Assignment) -> Rational {
    let mut times = vec![0i128; inst.patients.len()];
    let mut used = 0i128;
    for &(p, _) in &asg.x {
        times[p] += 1;
        used += inst.patients[p].duration as i128;
    }
    let waiting: i128 = inst.patients.iter().zip(&times).map(|(p, &k)| p.prio_leader as i128 * (1 - k)).sum();
    inst.alpha * Rational::from(inst.capacity as i128 - used) + inst.beta * Rational::from(waiting)
}

/// `f_s = Σ_{p ∈ P_s} π_p^FP Σ_b x_pb`.
pub fn follower_objective(inst: &Instance, s: usize, asg: &Assignment) -> i64 {
    asg.x
        .iter()
        .filter(|&&(p, _)| inst.patients[p].surgeon == s)
        .map(|&(p, _)| inst.patients[p].prio_follower as i64)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationTag {
    /// More blocks in progress than rooms; indices (day, t).
    Rooms,
    /// Per-day block limit; indices (surgeon, day).
    VDay,
    /// Horizon block limit; indices (surgeon).
    VHor,
    /// Unavailable block taken; indices (surgeon, block).
    Unavail,
    /// Patient scheduled more than once; indices (patient).
    Once,
    /// Block capacity exceeded or block not held by the patient's surgeon; indices (surgeon, block).
    Cap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub tag: ViolationTag,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, tag: ViolationTag) -> bool {
        self.violations.iter().any(|v| v.tag == tag)
    }
}

/// Checks rooms, per-day and horizon limits, unavailability, single
/// scheduling and block capacity, reporting every violation.
pub fn check_single_level_feasibility(inst: &Instance, asg: &Assignment) -> FeasibilityReport {
    let mut violations = Vec::new();
    let mut push = |tag, indices: Vec<usize>| violations.push(Violation { tag, indices });

    let mut in_progress = vec![0u64; inst.num_points()];
    let mut per_day: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut per_surgeon: BTreeMap<usize, u64> = BTreeMap::new();
    for &(s, b) in &asg.y {
        for &pt in inst.block_points(b) {
            in_progress[pt] += 1;
        }
        *per_day.entry((s, inst.blocks[b].day)).or_default() += 1;
        *per_surgeon.entry(s).or_default() += 1;
    }
    for (pt, &n) in in_progress.iter().enumerate() {
        if n > inst.rooms as u64 {
            let (d, t) = inst.point(pt);
            push(ViolationTag::Rooms, vec![d, t as usize]);
        }
    }
    for (&(s, d), &n) in &per_day {
        if n > inst.v_day as u64 {
            push(ViolationTag::VDay, vec![s, d]);
        }
    }
    for (&s, &n) in &per_surgeon {
        if n > inst.v_horizon as u64 {
            push(ViolationTag::VHor, vec![s]);
        }
    }
    for &(s, b) in &asg.y {
        if inst.is_unavailable(s, b) {
            push(ViolationTag::Unavail, vec![s, b]);
        }
    }
    let mut times: BTreeMap<usize, u32> = BTreeMap::new();
    let mut load: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for &(p, b) in &asg.x {
        *times.entry(p).or_default() += 1;
        *load.entry((inst.patients[p].surgeon, b)).or_default() += inst.patients[p].duration as u64;
    }
    for (&p, &k) in &times {
        if k > 1 {
            push(ViolationTag::Once, vec![p]);
        }
    }
    for (&(s, b), &used) in &load {
        let cap = if asg.y.contains(&(s, b)) { inst.blocks[b].length as u64 } else { 0 };
        if used > cap {
            push(ViolationTag::Cap, vec![s, b]);
        }
    }
    FeasibilityReport { violations }
}
