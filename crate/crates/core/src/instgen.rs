//! Synthetic instance generation and the instance JSON format.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{DomainError, Instance, InstanceSpec, PatientSpec, Rational, SurgeonSpec};
use crate::ratio::serde_rational;

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("load window [{lo}, {hi}] not reached after {rounds} rejected draws")]
    WindowUnreachable { lo: u64, hi: u64, rounds: usize },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, thiserror::Error)]
pub enum InstanceIoError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed instance{}: {source}", context.as_deref().map(|c| format!(" in {c}")).unwrap_or_default())]
    Parse { context: Option<String>, source: serde_json::Error },
    #[error(transparent)]
    Invalid(#[from] DomainError),
}

/// Shifted lognormal in slots: `shift + exp(N(mu, sigma²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationDist {
    pub sigma: f64,
    pub mu: f64,
    pub shift: f64,
}

impl Default for DurationDist {
    fn default() -> Self {
        Self { sigma: 0.75, mu: 1.60, shift: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub surgeons: usize,
    pub rooms: u32,
    pub days: usize,
    pub load_factor: f64,
    pub lf_tolerance: f64,
    pub duration_dist: DurationDist,
    pub duration_bounds: (u32, u32),
    pub prio_range: (u32, u32),
    pub seed: u64,
    pub slots_per_day: u32,
    pub lengths: Vec<u32>,
    pub starts: Vec<u32>,
    pub v_day: u32,
    /// Defaults to `days`.
    pub v_horizon: Option<u32>,
    #[serde(with = "serde_rational")]
    pub alpha: Rational,
    #[serde(with = "serde_rational")]
    pub beta: Rational,
    /// Rejected duration draws tolerated before giving up.
    pub max_rounds: usize,
}

impl GenParams {
    pub fn new(surgeons: usize, rooms: u32, load_factor: f64, seed: u64) -> Self {
        Self {
            surgeons,
            rooms,
            days: 5,
            load_factor,
            lf_tolerance: 0.025,
            duration_dist: DurationDist::default(),
            duration_bounds: (1, 30),
            prio_range: (1, 4),
            seed,
            slots_per_day: 32,
            lengths: vec![8, 16, 24, 32],
            starts: vec![0, 8, 16, 24],
            v_day: 1,
            v_horizon: None,
            alpha: Rational::from(1),
            beta: Rational::from(1),
            max_rounds: 1000,
        }
    }

    pub fn capacity(&self) -> u64 {
        self.slots_per_day as u64 * self.rooms as u64 * self.days as u64
    }

    /// Inclusive bounds on the total duration: `[(lf − tol) C, (lf + tol) C]` rounded inwards.
    pub fn load_window(&self) -> (u64, u64) {
        let c = self.capacity() as f64;
        let lo = ((self.load_factor - self.lf_tolerance) * c - 1e-9).ceil().max(0.0);
        let hi = ((self.load_factor + self.lf_tolerance) * c + 1e-9).floor().max(0.0);
        (lo as u64, hi as u64)
    }

    fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidParams(m.into()));
        if self.surgeons == 0 {
            return bad("at least one surgeon is required");
        }
        if !(self.load_factor > 0.0 && self.load_factor.is_finite()) {
            return bad("load_factor must be positive");
        }
        if !(self.lf_tolerance >= 0.0 && self.lf_tolerance.is_finite()) {
            return bad("lf_tolerance must be non-negative");
        }
        let (lo, hi) = self.duration_bounds;
        if lo < 1 || hi < lo {
            return bad("duration bounds must satisfy 1 <= low <= high");
        }
        let (plo, phi) = self.prio_range;
        if plo < 1 || phi < plo {
            return bad("priority range must satisfy 1 <= low <= high");
        }
        let d = self.duration_dist;
        if !(d.sigma > 0.0 && d.sigma.is_finite() && d.mu.is_finite() && d.shift.is_finite()) {
            return bad("duration distribution parameters must be finite with sigma > 0");
        }
        if self.load_window().0 > 10_000_000 {
            return bad("load window too large");
        }
        Ok(())
    }
}

/// Draws durations until the total lands in the load window, assigns each
/// patient to a uniform surgeon and draws both priorities uniformly.
pub fn generate_instance(params: &GenParams) -> Result<Instance, GenError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (lo, hi) = params.load_window();
    if lo > hi {
        return Err(GenError::WindowUnreachable { lo, hi, rounds: 0 });
    }
    let dist = LogNormal::new(params.duration_dist.mu, params.duration_dist.sigma)
        .map_err(|e| GenError::InvalidParams(e.to_string()))?;
    let (dmin, dmax) = params.duration_bounds;
    let mut durations = Vec::new();
    let mut total = 0u64;
    let mut rejected = 0usize;
    while total < lo {
        let raw = params.duration_dist.shift + dist.sample(&mut rng);
        let d = (raw.round().clamp(dmin as f64, dmax as f64)) as u32;
        if total + d as u64 > hi {
            rejected += 1;
            if rejected > params.max_rounds {
                return Err(GenError::WindowUnreachable { lo, hi, rounds: rejected - 1 });
            }
            continue;
        }
        total += d as u64;
        durations.push(d);
    }

    let mut surgeons: Vec<SurgeonSpec> =
        (0..params.surgeons).map(|s| SurgeonSpec { id: s as u32, patients: Vec::new() }).collect();
    let (plo, phi) = params.prio_range;
    for (i, &duration) in durations.iter().enumerate() {
        let s = rng.random_range(0..params.surgeons);
        let prio_leader = rng.random_range(plo..=phi);
        let prio_follower = rng.random_range(plo..=phi);
        surgeons[s].patients.push(PatientSpec { id: i as u32, duration, prio_leader, prio_follower });
    }

    let spec = InstanceSpec {
        days: params.days,
        rooms: params.rooms,
        slots_per_day: params.slots_per_day,
        lengths: params.lengths.clone(),
        starts: params.starts.clone(),
        v_day: params.v_day,
        v_horizon: params.v_horizon.unwrap_or(params.days as u32),
        alpha: params.alpha,
        beta: params.beta,
        capacity: None,
        unavailability: Vec::new(),
        surgeons,
        seed: Some(params.seed),
        params: Some(serde_json::to_value(params).expect("parameters serialize")),
    };
    Ok(Instance::new(spec)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct MetaFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HorizonFile {
    days: usize,
    rooms: u32,
    slots_per_day: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    capacity: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BlocksFile {
    lengths: Vec<u32>,
    starts: Vec<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LimitsFile {
    v_day: u32,
    v_horizon: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightsFile {
    #[serde(with = "serde_rational")]
    alpha: Rational,
    #[serde(with = "serde_rational")]
    beta: Rational,
}

#[derive(Debug, Serialize, Deserialize)]
struct PatientFile {
    id: u32,
    duration: u32,
    prio_leader: u32,
    prio_follower: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct SurgeonFile {
    id: u32,
    patients: Vec<PatientFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    #[serde(default = "empty_meta")]
    meta: MetaFile,
    horizon: HorizonFile,
    blocks: BlocksFile,
    limits: LimitsFile,
    weights: WeightsFile,
    #[serde(default)]
    unavailability: Vec<(u32, usize)>,
    surgeons: Vec<SurgeonFile>,
}

fn empty_meta() -> MetaFile {
    MetaFile { seed: None, params: None }
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        let spec = inst.to_spec();
        InstanceFile {
            meta: MetaFile { seed: spec.seed, params: spec.params },
            horizon: HorizonFile {
                days: spec.days,
                rooms: spec.rooms,
                slots_per_day: spec.slots_per_day,
                capacity: spec.capacity,
            },
            blocks: BlocksFile { lengths: spec.lengths, starts: spec.starts },
            limits: LimitsFile { v_day: spec.v_day, v_horizon: spec.v_horizon },
            weights: WeightsFile { alpha: spec.alpha, beta: spec.beta },
            unavailability: spec.unavailability,
            surgeons: spec
                .surgeons
                .into_iter()
                .map(|s| SurgeonFile {
                    id: s.id,
                    patients: s
                        .patients
                        .into_iter()
                        .map(|p| PatientFile {
                            id: p.id,
                            duration: p.duration,
                            prio_leader: p.prio_leader,
                            prio_follower: p.prio_follower,
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl InstanceFile {
    fn into_spec(self) -> InstanceSpec {
        InstanceSpec {
            days: self.horizon.days,
            rooms: self.horizon.rooms,
            slots_per_day: self.horizon.slots_per_day,
            lengths: self.blocks.lengths,
            starts: self.blocks.starts,
            v_day: self.limits.v_day,
            v_horizon: self.limits.v_horizon,
            alpha: self.weights.alpha,
            beta: self.weights.beta,
            capacity: self.horizon.capacity,
            unavailability: self.unavailability,
            surgeons: self
                .surgeons
                .into_iter()
                .map(|s| SurgeonSpec {
                    id: s.id,
                    patients: s
                        .patients
                        .into_iter()
                        .map(|p| PatientSpec {
                            id: p.id,
                            duration: p.duration,
                            prio_leader: p.prio_leader,
                            prio_follower: p.prio_follower,
                        })
                        .collect(),
                })
                .collect(),
            seed: self.meta.seed,
            params: self.meta.params,
        }
    }
}

/// Pretty-printed JSON document for an instance.
pub fn instance_to_json(inst: &Instance) -> String {
    serde_json::to_string_pretty(&InstanceFile::from(inst)).expect("instance serializes")
}

/// Parses and validates an instance JSON document.
pub fn parse_instance(text: &str) -> Result<Instance, InstanceIoError> {
    let file: InstanceFile =
        serde_json::from_str(text).map_err(|source| InstanceIoError::Parse { context: None, source })?;
    Ok(Instance::new(file.into_spec())?)
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, InstanceIoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| InstanceIoError::Io { path: path.into(), source })?;
    parse_instance(&text).map_err(|e| match e {
        InstanceIoError::Parse { source, .. } => {
            InstanceIoError::Parse { context: Some(path.display().to_string()), source }
        }
        other => other,
    })
}

pub fn save_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<(), InstanceIoError> {
    let path = path.as_ref();
    fs::write(path, instance_to_json(inst) + "\n").map_err(|source| InstanceIoError::Io { path: path.into(), source })
}
