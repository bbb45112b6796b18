//! The single-level leader formulation over `y_sb` and `x_pb`, shared by the
//! compact solver and the centralized/decentralized reference models.

use optkern::{Constraint, LinearProgram, MipProblem, Sense, VarId};

use crate::cuts::{build_q_link, QLink};
use crate::domain::{Assignment, Instance};
use crate::ratio::to_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LeaderObjective {
    /// Minimise `F` (constant term dropped).
    LeaderMin,
    /// Maximise `Σ_s f_s`.
    FollowerSumMax,
}

pub(crate) struct LeaderModel {
    pub mip: MipProblem,
    /// (surgeon, block, var).
    pub y: Vec<(usize, usize, VarId)>,
    /// (patient, block, var).
    pub x: Vec<(usize, usize, VarId)>,
    /// Per surgeon, per patient position, the patient's `x` variables.
    pub x_by_surgeon: Vec<Vec<Vec<VarId>>>,
    pub qlinks: Vec<QLink>,
}

impl LeaderModel {
    /// Builds rooms, per-day and horizon limits, unavailability, single
    /// scheduling and capacity rows; optionally the `q` linkage.
    pub fn build(inst: &Instance, objective: LeaderObjective, with_q: bool) -> Self {
        let sense = match objective {
            LeaderObjective::LeaderMin => Sense::Minimize,
            LeaderObjective::FollowerSumMax => Sense::Maximize,
        };
        let mut mip = MipProblem::new(LinearProgram::new(sense));
        let ns = inst.surgeons.len();
        let mut y = Vec::new();
        let mut y_by_surgeon = vec![Vec::new(); ns];
        let mut y_of = vec![vec![None; inst.blocks.len()]; ns];
        for (s, row) in y_of.iter_mut().enumerate() {
            for (b, slot) in row.iter_mut().enumerate() {
                if inst.is_unavailable(s, b) {
                    continue;
                }
                let v = mip.add_binary(format!("y_{s}_{b}"), 0.0);
                y.push((s, b, v));
                y_by_surgeon[s].push((b, v));
                *slot = Some(v);
            }
        }
        let mut x = Vec::new();
        let mut x_by_surgeon: Vec<Vec<Vec<VarId>>> =
            inst.surgeons.iter().map(|sg| vec![Vec::new(); sg.patients.len()]).collect();
        let mut cap_rows: Vec<Vec<Vec<(VarId, f64)>>> = vec![vec![Vec::new(); inst.blocks.len()]; ns];
        for (s, sg) in inst.surgeons.iter().enumerate() {
            for (k, &p) in sg.patients.iter().enumerate() {
                let pt = &inst.patients[p];
                let obj = match objective {
                    LeaderObjective::LeaderMin => -to_f64(&inst.leader_gain(p)),
                    LeaderObjective::FollowerSumMax => pt.prio_follower as f64,
                };
                for (b, blk) in inst.blocks.iter().enumerate() {
                    if y_of[s][b].is_none() || pt.duration > blk.length {
                        continue;
                    }
                    let v = mip.add_binary(format!("x_{p}_{b}"), obj);
                    x.push((p, b, v));
                    x_by_surgeon[s][k].push(v);
                    cap_rows[s][b].push((v, pt.duration as f64));
                }
            }
        }

        for pt in 0..inst.num_points() {
            let row: Vec<(VarId, f64)> = inst
                .overlap_at(pt)
                .iter()
                .flat_map(|&b| (0..ns).map(move |s| (s, b)))
                .filter_map(|(s, b)| y_of[s][b].map(|v| (v, 1.0)))
                .collect();
            if row.len() > inst.rooms as usize {
                mip.lp.add_constraint(Constraint::le(row, inst.rooms as f64));
            }
        }
        for s in 0..ns {
            for d in 0..inst.days {
                let row: Vec<(VarId, f64)> =
                    y_by_surgeon[s].iter().filter(|&&(b, _)| inst.blocks[b].day == d).map(|&(_, v)| (v, 1.0)).collect();
                if row.len() > inst.v_day as usize {
                    mip.lp.add_constraint(Constraint::le(row, inst.v_day as f64));
                }
            }
            let row: Vec<(VarId, f64)> = y_by_surgeon[s].iter().map(|&(_, v)| (v, 1.0)).collect();
            if row.len() > inst.v_horizon as usize {
                mip.lp.add_constraint(Constraint::le(row, inst.v_horizon as f64));
            }
            for vars in &x_by_surgeon[s] {
                if vars.len() > 1 {
                    mip.lp.add_constraint(Constraint::le(vars.iter().map(|&v| (v, 1.0)).collect(), 1.0));
                }
            }
            for (b, row) in cap_rows[s].iter_mut().enumerate() {
                if row.is_empty() {
                    continue;
                }
                let yv = y_of[s][b].expect("x only exists on available blocks");
                let mut row = std::mem::take(row);
                row.push((yv, -(inst.blocks[b].length as f64)));
                mip.lp.add_constraint(Constraint::le(row, 0.0));
            }
        }
        let qlinks = if with_q {
            (0..ns).map(|s| build_q_link(&mut mip, inst, s, &y_by_surgeon[s])).collect()
        } else {
            Vec::new()
        };
        LeaderModel { mip, y, x, x_by_surgeon, qlinks }
    }

    pub fn decode(&self, values: &[f64]) -> Assignment {
        let mut asg = Assignment::new();
        for &(s, b, v) in &self.y {
            if values[v.0] > 0.5 {
                asg.y.insert((s, b));
            }
        }
        for &(p, b, v) in &self.x {
            if values[v.0] > 0.5 {
                asg.x.insert((p, b));
            }
        }
        asg
    }
}
