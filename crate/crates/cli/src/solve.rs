use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use surgsched::bnp::{solve_bnp, BnpOptions, PricingEngine};
use surgsched::compact::{solve_compact, CompactOptions, CutScope};
use surgsched::cuts::CutKind;
use surgsched::domain::check_single_level_feasibility;
use surgsched::follower::{check_bilevel_feasibility, is_bilevel_feasible};
use surgsched::instgen::load_instance;
use surgsched::ratio::{format_rational, to_f64};
use surgsched::solution::{load_solution, save_solution, SolutionFile};
use surgsched::{Instance, SolveOutcome};

use crate::error::CliError;
use crate::{create_dir, instance_id, time_limit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Bnp,
    Compact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CutsArg {
    Olc,
    Alc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PricingArg {
    Mip,
    Profiles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    First,
    All,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance files.
    #[arg(required = true)]
    pub instances: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = SolverArg::Bnp)]
    pub solver: SolverArg,
    #[arg(long, value_enum, default_value_t = CutsArg::Alc)]
    pub cuts: CutsArg,
    /// Branch-and-price pricing engine.
    #[arg(long, value_enum, default_value_t = PricingArg::Mip)]
    pub pricing: PricingArg,
    /// Compact solver: cut every violated surgeon or only the first.
    #[arg(long, value_enum, default_value_t = ScopeArg::All)]
    pub cut_scope: ScopeArg,
    #[arg(long)]
    pub no_multi_pattern: bool,
    #[arg(long)]
    pub no_lcr: bool,
    #[arg(long)]
    pub no_heuristic: bool,
    /// Seconds per instance.
    #[arg(long, default_value_t = 1200.0)]
    pub time_limit: f64,
    /// Re-check bilevel feasibility and the written file; fail on any violation.
    #[arg(long)]
    pub verify: bool,
    /// Solution file (single instance only).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Directory for `<id>.solution.json` files (default: beside each instance).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// CSV file to append one stats row per instance to.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub instance: PathBuf,
    pub solution: PathBuf,
}

/// One row of the stats CSV; times in seconds.
#[derive(Debug, Serialize)]
struct StatsRow {
    instance_id: String,
    #[serde(rename = "F")]
    f: Option<f64>,
    #[serde(rename = "F_lpr")]
    f_lpr: Option<f64>,
    gap_pct: Option<f64>,
    opt: bool,
    feas: bool,
    n_cgi: usize,
    n_cols: usize,
    n_lcs: usize,
    n_cbs: usize,
    n_nodes: usize,
    t_cb: f64,
    t_sp: f64,
    t_mp: f64,
    t_total: f64,
}

const STATS_HEADER: [&str; 15] = [
    "instance_id",
    "F",
    "F_lpr",
    "gap_pct",
    "opt",
    "feas",
    "n_cgi",
    "n_cols",
    "n_lcs",
    "n_cbs",
    "n_nodes",
    "t_cb",
    "t_sp",
    "t_mp",
    "t_total",
];

impl StatsRow {
    fn new(id: &str, out: &SolveOutcome) -> Self {
        let s = &out.stats;
        StatsRow {
            instance_id: id.to_owned(),
            f: out.value.as_ref().map(to_f64),
            f_lpr: s.f_lpr_root,
            gap_pct: out.gap_root_pct(),
            opt: out.is_optimal(),
            feas: out.feasible_found(),
            n_cgi: s.n_cgi,
            n_cols: s.n_cols,
            n_lcs: s.n_lcs,
            n_cbs: s.n_cbs,
            n_nodes: s.n_nodes,
            t_cb: s.t_cb.as_secs_f64(),
            t_sp: s.t_sp.as_secs_f64(),
            t_mp: s.t_mp.as_secs_f64(),
            t_total: s.t_total.as_secs_f64(),
        }
    }
}

fn solve_one(inst: &Instance, args: &SolveArgs) -> Result<SolveOutcome, CliError> {
    let kind = match args.cuts {
        CutsArg::Olc => CutKind::Olc,
        CutsArg::Alc => CutKind::Alc,
    };
    let limit = time_limit(Some(args.time_limit))?;
    let out = match args.solver {
        SolverArg::Compact => {
            let scope = match args.cut_scope {
                ScopeArg::First => CutScope::FirstViolated,
                ScopeArg::All => CutScope::AllViolated,
            };
            solve_compact(
                inst,
                &CompactOptions { cut_kind: kind, cut_scope: scope, time_limit: limit, ..Default::default() },
            )?
        }
        SolverArg::Bnp => {
            let pricing = match args.pricing {
                PricingArg::Mip => PricingEngine::Mip,
                PricingArg::Profiles => PricingEngine::Profiles,
            };
            let opts = BnpOptions {
                cut_kind: kind,
                pricing,
                multi_pattern: !args.no_multi_pattern,
                use_lcr: !args.no_lcr,
                use_initial_heuristic: !args.no_heuristic,
                time_limit: limit,
                ..Default::default()
            };
            solve_bnp(inst, &opts)?
        }
    };
    Ok(out)
}

fn solution_path(args: &SolveArgs, instance: &Path, id: &str) -> PathBuf {
    if let Some(p) = &args.output {
        return p.clone();
    }
    let dir = match &args.out_dir {
        Some(d) => d.clone(),
        None => instance.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    dir.join(format!("{id}.solution.json"))
}

fn check_solution(inst: &Instance, sol: &SolutionFile) -> Result<(), CliError> {
    let Some(asg) = sol.validate(inst)? else {
        return Ok(());
    };
    let report = check_single_level_feasibility(inst, &asg);
    if !report.ok() {
        let tags: Vec<String> = report.violations.iter().map(|v| format!("{:?}{:?}", v.tag, v.indices)).collect();
        return Err(CliError::Verification(format!("single-level violations: {}", tags.join(", "))));
    }
    if !is_bilevel_feasible(inst, &asg) {
        let bad: Vec<String> = check_bilevel_feasibility(inst, &asg)
            .into_iter()
            .filter(|c| !c.feasible)
            .map(|c| format!("surgeon {} has f = {} but can reach {}", inst.surgeons[c.surgeon].id, c.f, c.f_opt))
            .collect();
        return Err(CliError::Verification(bad.join("; ")));
    }
    Ok(())
}

fn append_stats(path: &Path, rows: &[StatsRow]) -> Result<(), CliError> {
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| CliError::io(path, e))?;
    let empty = file.metadata().map_err(|e| CliError::io(path, e))?.len() == 0;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if empty {
        w.write_record(STATS_HEADER)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn run(args: &SolveArgs) -> Result<(), CliError> {
    if args.output.is_some() && args.instances.len() > 1 {
        return Err(CliError::Usage("--output needs exactly one instance; use --out-dir for batches".into()));
    }
    if args.output.is_some() && args.out_dir.is_some() {
        return Err(CliError::Usage("--output and --out-dir are exclusive".into()));
    }
    time_limit(Some(args.time_limit))?;
    if let Some(dir) = &args.out_dir {
        create_dir(dir)?;
    }
    let loaded: Vec<(String, &PathBuf, Instance)> =
        args.instances.iter().map(|p| Ok((instance_id(p), p, load_instance(p)?))).collect::<Result<_, CliError>>()?;
    let results: Vec<(StatsRow, SolveOutcome, String)> = loaded
        .par_iter()
        .map(|(id, path, inst)| {
            let out = solve_one(inst, args)?;
            let sol = SolutionFile::from_outcome(inst, id.clone(), &out);
            let target = solution_path(args, path, id);
            save_solution(&sol, &target)?;
            if args.verify {
                if let Some(asg) = &out.assignment {
                    if !is_bilevel_feasible(inst, asg) {
                        return Err(CliError::Verification(format!("{id}: solver returned an infeasible plan")));
                    }
                }
                let reread = load_solution(&target)?;
                if reread != sol {
                    return Err(CliError::Verification(format!("{id}: solution file does not round-trip")));
                }
                check_solution(inst, &reread)?;
            }
            Ok((StatsRow::new(id, &out), out, target.display().to_string()))
        })
        .collect::<Result<_, CliError>>()?;
    for (row, out, target) in &results {
        let value = out.value.as_ref().map(format_rational).unwrap_or_else(|| "-".into());
        println!("{}: {} F={} bound={:.6} -> {}", row.instance_id, out.status.as_str(), value, out.bound, target);
    }
    if let Some(path) = &args.stats {
        let rows: Vec<StatsRow> = results.into_iter().map(|(r, _, _)| r).collect();
        append_stats(path, &rows)?;
    }
    Ok(())
}

pub fn verify(args: &VerifyArgs) -> Result<(), CliError> {
    let inst = load_instance(&args.instance)?;
    let sol = load_solution(&args.solution)?;
    check_solution(&inst, &sol)?;
    match sol.value {
        Some(v) => println!("ok: {} F={} bilevel feasible", sol.instance_id, format_rational(&v)),
        None => println!("ok: {} records no assignment", sol.instance_id),
    }
    Ok(())
}
