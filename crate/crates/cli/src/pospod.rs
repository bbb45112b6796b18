use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use surgsched::analysis::{run_scenarios, EquilibriumReport, PriceValue, ScenarioSpec, Tiebreak};
use surgsched::instgen::load_instance;
use surgsched::ratio::{format_rational, parse_rational};
use surgsched::{Instance, Rational};

use crate::error::CliError;
use crate::{create_dir, instance_id, time_limit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TiebreakArg {
    Solver,
    Best,
    Worst,
}

#[derive(Debug, Args)]
pub struct PospodArgs {
    /// Instance files (may be empty).
    pub instances: Vec<PathBuf>,
    /// Weight setting `alpha,beta`; repeatable. Default: the standard sweep.
    #[arg(long)]
    pub weights: Vec<String>,
    /// Scenario id 1..=5; repeatable.
    #[arg(long)]
    pub scenario: Vec<u8>,
    /// Choice among decentralized optima.
    #[arg(long, value_enum, default_value_t = TiebreakArg::Best)]
    pub tiebreak: TiebreakArg,
    /// Base seed for priority draws.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seconds per member solve.
    #[arg(long, default_value_t = 1200.0)]
    pub time_limit: f64,
    /// Analysis CSV.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Directory for per-weight bar-chart data files.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

const HEADER: [&str; 21] = [
    "instance_id",
    "scenario",
    "alpha",
    "beta",
    "F_eq",
    "PL_eq",
    "U_eq",
    "sumf_eq",
    "t_eq",
    "F_dec",
    "PL_dec",
    "U_dec",
    "sumf_dec",
    "t_dec",
    "F_cen",
    "PL_cen",
    "U_cen",
    "sumf_cen",
    "t_cen",
    "PoS",
    "PoD",
];

fn parse_weights(text: &str) -> Result<(Rational, Rational), CliError> {
    let bad = || CliError::Usage(format!("weights must look like `alpha,beta`, got {text:?}"));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    let a = parse_rational(a.trim()).map_err(|_| bad())?;
    let b = parse_rational(b.trim()).map_err(|_| bad())?;
    if a < Rational::from(0) || b < Rational::from(0) {
        return Err(bad());
    }
    Ok((a, b))
}

fn scenarios(args: &PospodArgs) -> Result<Vec<ScenarioSpec>, CliError> {
    if args.weights.is_empty() && args.scenario.is_empty() {
        return Ok(ScenarioSpec::standard_sweep());
    }
    let weights: Vec<(Rational, Rational)> = if args.weights.is_empty() {
        [(1, 0), (0, 1), (1, 1)].into_iter().map(|(a, b)| (Rational::from(a), Rational::from(b))).collect()
    } else {
        args.weights.iter().map(|w| parse_weights(w)).collect::<Result<_, _>>()?
    };
    let ids: Vec<u8> = if args.scenario.is_empty() { (1..=5).collect() } else { args.scenario.clone() };
    let mut out = Vec::new();
    for &(a, b) in &weights {
        for &id in &ids {
            out.push(ScenarioSpec::new(id, a, b).ok_or_else(|| CliError::Usage(format!("unknown scenario {id}")))?);
        }
    }
    Ok(out)
}

fn file_token(r: &Rational) -> String {
    format_rational(r).replace('/', "-")
}

/// One file per weight setting: per scenario, mean finite PoS/PoD and utilisations.
fn write_plot_data(dir: &PathBuf, reports: &[EquilibriumReport]) -> Result<(), CliError> {
    create_dir(dir)?;
    let mut groups: BTreeMap<(Rational, Rational), BTreeMap<u8, Vec<&EquilibriumReport>>> = BTreeMap::new();
    for r in reports {
        groups.entry((r.scenario.alpha, r.scenario.beta)).or_default().entry(r.scenario.id).or_default().push(r);
    }
    for ((a, b), by_scenario) in groups {
        let path = dir.join(format!("pospod_a{}_b{}.dat", file_token(&a), file_token(&b)));
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| CliError::io(&path, e);
        writeln!(w, "# scenario n PoS PoD n_inf U_eq U_dec U_cen").map_err(io)?;
        for (id, rows) in by_scenario {
            let mean = |xs: Vec<f64>| if xs.is_empty() { f64::NAN } else { xs.iter().sum::<f64>() / xs.len() as f64 };
            let finite = |v: PriceValue| match v {
                PriceValue::Finite(_) => Some(v.to_f64()),
                PriceValue::Infinite => None,
            };
            let pos = mean(rows.iter().filter_map(|r| finite(r.pos)).collect());
            let pod = mean(rows.iter().filter_map(|r| finite(r.pod)).collect());
            let n_inf = rows.iter().filter(|r| r.pos == PriceValue::Infinite || r.pod == PriceValue::Infinite).count();
            let u_eq = mean(rows.iter().map(|r| r.eq.u).collect());
            let u_dec = mean(rows.iter().map(|r| r.dec.u).collect());
            let u_cen = mean(rows.iter().map(|r| r.cen.u).collect());
            writeln!(w, "{id} {} {pos:.6} {pod:.6} {n_inf} {u_eq:.6} {u_dec:.6} {u_cen:.6}", rows.len()).map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    Ok(())
}

pub fn run(args: &PospodArgs) -> Result<(), CliError> {
    let scen = scenarios(args)?;
    let limit = time_limit(Some(args.time_limit))?;
    let tiebreak = match args.tiebreak {
        TiebreakArg::Solver => Tiebreak::Solver,
        TiebreakArg::Best => Tiebreak::LeaderBest,
        TiebreakArg::Worst => Tiebreak::LeaderWorst,
    };
    let instances: Vec<(String, Instance)> =
        args.instances.iter().map(|p| Ok((instance_id(p), load_instance(p)?))).collect::<Result<_, CliError>>()?;
    let file = File::create(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(HEADER)?;
    w.flush().map_err(|e| CliError::io(&args.out, e))?;
    let mut all = Vec::new();
    for (i, cell) in instances.iter().enumerate() {
        let seed = args.seed.wrapping_add((i * scen.len()) as u64);
        let reports = run_scenarios(std::slice::from_ref(cell), &scen, tiebreak, seed, limit)?;
        for r in &reports {
            if !r.all_optimal() {
                log::warn!("{} scenario {}: a member solve hit the time limit", r.instance_id, r.scenario.id);
            }
            w.serialize(r.to_row())?;
        }
        w.flush().map_err(|e| CliError::io(&args.out, e))?;
        all.extend(reports);
    }
    if let Some(dir) = &args.plot_data {
        write_plot_data(dir, &all)?;
    }
    println!("{} rows -> {}", all.len(), args.out.display());
    Ok(())
}
