//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero on any failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use surgsched::analysis::{
    apply_scenario, price_of_decentralisation, price_of_stability, PriceValue, ScenarioSpec, Tiebreak,
};
use surgsched::bnp::{solve_bnp, BnpOptions};
use surgsched::compact::{solve_compact, CompactOptions, CutScope};
use surgsched::cuts::{CutEvent, CutKind};
use surgsched::domain::{leader_objective, Instance, Rational};
use surgsched::follower::check_bilevel_feasibility;
use surgsched::instgen::{generate_instance, GenParams};
use surgsched::ratio::to_f64;
use surgsched::SolveOutcome;

const KINDS: [CutKind; 2] = [CutKind::Olc, CutKind::Alc];
const BOUND_TOL: f64 = 1e-6;

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bnp(kind: CutKind) -> BnpOptions {
    BnpOptions { cut_kind: kind, ..Default::default() }
}

fn compact(kind: CutKind) -> CompactOptions {
    CompactOptions { cut_kind: kind, ..Default::default() }
}

/// Every reported incumbent, and the final assignment, is bilevel feasible and scored correctly.
fn incumbents_ok(inst: &Instance, out: &SolveOutcome) -> Result<usize, String> {
    let mut n = 0;
    let last = out.value.zip(out.assignment.clone());
    for (v, a) in out.incumbents.iter().cloned().chain(last) {
        for c in check_bilevel_feasibility(inst, &a) {
            ensure(c.feasible, || format!("surgeon {} has f = {} < f' = {}", c.surgeon, c.f, c.f_opt))?;
        }
        ensure(leader_objective(inst, &a) == v, || "incumbent value does not match its assignment".into())?;
        n += 1;
    }
    Ok(n)
}

fn cuts_ok(inst: &Instance, log: &[CutEvent]) -> Result<(), String> {
    let plans: Vec<Vec<(Vec<usize>, Vec<usize>)>> =
        (0..inst.surgeons.len()).map(|s| bilevel_feasible_plans(inst, s)).collect();
    for ev in log {
        ensure(!ev.cut.is_satisfied_by(inst, &ev.trigger_blocks, &ev.trigger_patients), || {
            format!("{} does not separate its trigger", ev.cut)
        })?;
        for (blocks, patients) in &plans[ev.cut.surgeon] {
            ensure(ev.cut.is_satisfied_by(inst, blocks, patients), || {
                format!("{} removes bilevel-feasible plan {blocks:?}/{patients:?}", ev.cut)
            })?;
        }
    }
    Ok(())
}

fn oracle_exactness(suite: &[Instance]) -> Check {
    for (i, inst) in suite.iter().enumerate() {
        let want = oracle_optimum(inst);
        for kind in KINDS {
            let b = solve_bnp(inst, &bnp(kind)).map_err(|e| e.to_string())?;
            let c = solve_compact(inst, &compact(kind)).map_err(|e| e.to_string())?;
            for (name, out) in [("bnp", &b), ("compact", &c)] {
                ensure(out.is_optimal() && out.value == Some(want), || {
                    format!("instance {i} {name}/{kind}: {:?} vs oracle {want}", out.value)
                })?;
            }
        }
    }
    Ok(format!("{} instances, 4 solver configurations each, exact match", suite.len()))
}

fn bilevel_feasibility(suite: &[Instance]) -> Check {
    let mut n = 0;
    let mut runs = 0;
    for inst in suite.iter().chain([t1(), t2(), t2_conflict()].iter()) {
        for kind in KINDS {
            for opts in [
                bnp(kind),
                BnpOptions { multi_pattern: false, ..bnp(kind) },
                BnpOptions { use_initial_heuristic: false, ..bnp(kind) },
            ] {
                n += incumbents_ok(inst, &solve_bnp(inst, &opts).map_err(|e| e.to_string())?)?;
                runs += 1;
            }
            for scope in [CutScope::AllViolated, CutScope::FirstViolated] {
                let out = solve_compact(inst, &CompactOptions { cut_scope: scope, ..compact(kind) })
                    .map_err(|e| e.to_string())?;
                n += incumbents_ok(inst, &out)?;
                runs += 1;
            }
        }
    }
    Ok(format!("{n} incumbents over {runs} runs, 0 violations"))
}

fn bound_dominance(suite: &[Instance]) -> Check {
    let mut strict = 0;
    for (i, inst) in suite.iter().enumerate() {
        let c = solve_compact(inst, &CompactOptions::default()).map_err(|e| e.to_string())?;
        let b = solve_bnp(inst, &BnpOptions::default()).map_err(|e| e.to_string())?;
        let (rb, rc) = (b.stats.f_lpr_root.unwrap(), c.stats.f_lpr_root.unwrap());
        ensure(rb >= rc - BOUND_TOL, || format!("instance {i}: bnp root {rb} < compact root {rc}"))?;
        if rb > rc + BOUND_TOL {
            strict += 1;
        }
    }
    let inst = t2_conflict();
    let c = solve_compact(&inst, &CompactOptions::default()).map_err(|e| e.to_string())?;
    let b = solve_bnp(&inst, &BnpOptions { use_initial_heuristic: false, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let (rb, rc) = (b.stats.f_lpr_root.unwrap(), c.stats.f_lpr_root.unwrap());
    ensure(rb > rc + BOUND_TOL, || format!("conflict instance: bnp root {rb} not above compact root {rc}"))?;
    Ok(format!(
        "bnp root >= compact root on all {}, strict on {strict}; conflict instance {rb:.3} > {rc:.3}",
        suite.len()
    ))
}

fn cut_validity() -> Check {
    let mut n = 0;
    for inst in [t1(), t2()] {
        for kind in KINDS {
            for heuristic in [true, false] {
                for multi in [true, false] {
                    let opts = BnpOptions { use_initial_heuristic: heuristic, multi_pattern: multi, ..bnp(kind) };
                    let out = solve_bnp(&inst, &opts).map_err(|e| e.to_string())?;
                    cuts_ok(&inst, &out.cut_log)?;
                    n += out.cut_log.len();
                }
            }
            for scope in [CutScope::AllViolated, CutScope::FirstViolated] {
                let out = solve_compact(&inst, &CompactOptions { cut_scope: scope, ..compact(kind) })
                    .map_err(|e| e.to_string())?;
                cuts_ok(&inst, &out.cut_log)?;
                n += out.cut_log.len();
            }
        }
    }
    ensure(n > 0, || "no cuts were generated".into())?;
    Ok(format!("{n} cuts checked against every bilevel-feasible plan of T1 and T2"))
}

fn ablation(suite: &[Instance]) -> Check {
    for (i, inst) in suite.iter().enumerate() {
        let base = solve_bnp(inst, &BnpOptions::default()).map_err(|e| e.to_string())?.value;
        for (name, opts) in [
            ("multi_pattern", BnpOptions { multi_pattern: false, ..Default::default() }),
            ("lcr", BnpOptions { use_lcr: false, ..Default::default() }),
            ("initial_heuristic", BnpOptions { use_initial_heuristic: false, ..Default::default() }),
        ] {
            let v = solve_bnp(inst, &opts).map_err(|e| e.to_string())?.value;
            ensure(v == base, || format!("instance {i}: disabling {name} gives {v:?}, default {base:?}"))?;
        }
    }
    let mut p = GenParams::new(12, 1, 2.0, 6);
    p.days = 5;
    let inst = generate_instance(&p).map_err(|e| e.to_string())?;
    let on = solve_bnp(&inst, &BnpOptions::default()).map_err(|e| e.to_string())?;
    let off = solve_bnp(&inst, &BnpOptions { use_lcr: false, ..Default::default() }).map_err(|e| e.to_string())?;
    ensure(on.is_optimal() && off.is_optimal() && on.value == off.value, || {
        format!("12-surgeon instance: LCR on {:?}, off {:?}", on.value, off.value)
    })?;
    let (a, b) = (on.stats.n_cbs as f64, off.stats.n_cbs as f64);
    let reduction = 1.0 - a / b;
    ensure(reduction >= 0.10, || format!("LCR callbacks {a} vs {b}: reduction {:.1}% < 10%", 100.0 * reduction))?;
    Ok(format!(
        "no F change on {} instances x 3 toggles; 12-surgeon seed 6 callbacks {a} vs {b} (-{:.1}%)",
        suite.len(),
        100.0 * reduction
    ))
}

fn price_laws(suite: &[Instance]) -> Check {
    let zero = Rational::from(0);
    let sweep = ScenarioSpec::standard_sweep();
    let mut checked = 0;
    for (i, inst) in suite.iter().take(8).enumerate() {
        for (j, scen) in sweep.iter().enumerate() {
            let inst = apply_scenario(inst, scen, (i * sweep.len() + j) as u64);
            let pos = price_of_stability(&inst, None).map_err(|e| e.to_string())?;
            let pod = price_of_decentralisation(&inst, Tiebreak::LeaderBest, None).map_err(|e| e.to_string())?;
            if pos.optimal && pod.optimal && pos.denominator > zero {
                ensure(pos.value.to_f64() >= 1.0 && pod.value.to_f64() >= 1.0, || {
                    format!("instance {i} scenario {}: PoS {} PoD {}", scen.id, pos.value, pod.value)
                })?;
                checked += 1;
            }
        }
    }
    let unit = PriceValue::Finite(Rational::from(1));
    let mut unit_count = 0;
    for (i, inst) in suite.iter().enumerate() {
        for id in [1, 2] {
            let scen = ScenarioSpec::new(id, zero, Rational::from(1)).unwrap();
            let inst = apply_scenario(inst, &scen, i as u64);
            let pos = price_of_stability(&inst, None).map_err(|e| e.to_string())?;
            let pod = price_of_decentralisation(&inst, Tiebreak::LeaderBest, None).map_err(|e| e.to_string())?;
            ensure(pos.value == unit && pod.value == unit, || {
                format!("instance {i} scenario {id} (0,1): PoS {} PoD {}", pos.value, pod.value)
            })?;
            unit_count += 1;
        }
    }
    ensure(unit_count >= 20, || format!("only {unit_count} unit-price cases"))?;
    let mut worst: Option<(usize, PriceValue)> = None;
    for (i, inst) in suite.iter().enumerate() {
        let scen = ScenarioSpec::new(5, Rational::from(1), zero).unwrap();
        let inst = apply_scenario(inst, &scen, 0);
        let pod = price_of_decentralisation(&inst, Tiebreak::LeaderBest, None).map_err(|e| e.to_string())?;
        if let PriceValue::Finite(v) = pod.value {
            if v > Rational::from(2) && worst.is_none_or(|(_, w)| pod.value.to_f64() > w.to_f64()) {
                worst = Some((i, pod.value));
            }
        }
    }
    let (wi, wv) = worst.ok_or("no finite PoD > 2 under (1,0) with conflicting priorities")?;
    Ok(format!("{checked} cases with PoS, PoD >= 1; {unit_count} unit-price cases; PoD {wv} on instance {wi}"))
}

fn scale() -> Check {
    let limit = Duration::from_secs(1200);
    let mut optimal = Vec::new();
    let mut notes = Vec::new();
    for seed in 1..=3 {
        let mut p = GenParams::new(10, 1, 2.0, seed);
        p.days = 5;
        let inst = generate_instance(&p).map_err(|e| e.to_string())?;
        let t = Instant::now();
        let out = solve_bnp(&inst, &BnpOptions { time_limit: Some(limit), ..Default::default() })
            .map_err(|e| e.to_string())?;
        incumbents_ok(&inst, &out)?;
        if let Some(v) = out.value {
            ensure(out.bound <= to_f64(&v) + BOUND_TOL, || format!("seed {seed}: bound {} above F {v}", out.bound))?;
        }
        if out.is_optimal() {
            optimal.push(seed);
        }
        notes.push(format!(
            "seed {seed} {} F={} in {:.1}s",
            out.status.as_str(),
            out.value.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
            t.elapsed().as_secs_f64()
        ));
    }
    ensure(!optimal.is_empty(), || format!("no seed solved to optimality: {}", notes.join("; ")))?;
    Ok(notes.join("; "))
}

fn generator_stats() -> Check {
    let mut durations = Vec::new();
    let mut worst_load = 0.0f64;
    for seed in 0..20 {
        let p = GenParams::new(12, 1, 2.0, seed);
        let inst = generate_instance(&p).map_err(|e| e.to_string())?;
        let total: u64 = inst.patients.iter().map(|q| q.duration as u64).sum();
        let load = total as f64 / p.capacity() as f64;
        worst_load = worst_load.max((load - 2.0).abs());
        durations.extend(inst.patients.iter().map(|q| q.duration));
    }
    let mean = durations.iter().map(|&d| d as f64).sum::<f64>() / durations.len() as f64;
    let (min, max) = (*durations.iter().min().unwrap(), *durations.iter().max().unwrap());
    ensure((6.0..=7.0).contains(&mean), || format!("mean duration {mean:.3}"))?;
    ensure(min >= 1 && max <= 30, || format!("durations span {min}..{max}"))?;
    ensure(worst_load <= 0.025 + 1e-12, || format!("load deviates by {worst_load:.4}"))?;
    Ok(format!("mean {mean:.3}, range {min}..{max}, max load deviation {worst_load:.4}"))
}

fn main() -> ExitCode {
    let suite = small_suite(30);
    let criteria: Vec<Criterion> = vec![
        ("1 oracle exactness", Box::new(|| oracle_exactness(&suite))),
        ("2 bilevel feasibility", Box::new(|| bilevel_feasibility(&suite))),
        ("3 bound dominance", Box::new(|| bound_dominance(&suite))),
        ("4 cut validity", Box::new(cut_validity)),
        ("5 ablation neutrality", Box::new(|| ablation(&suite))),
        ("6 PoS/PoD laws", Box::new(|| price_laws(&suite))),
        ("7 scale smoke test", Box::new(scale)),
        ("8 generator statistics", Box::new(generator_stats)),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
