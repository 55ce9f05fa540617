//! The equivalence self-test: every acceptance criterion as an executable
//! check with a deterministic one-line report.

use std::collections::HashMap;
use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::formula::{brute_force_sat, gen, Assignment, Formula};
use crate::gridmap::{Cell, GridMap};
use crate::oracle::{descending_dstar_feasible, joint_astar, monotone_dstar_feasible_capped, Limits};
use crate::plan::Plan;
use crate::reduction::{build, count_leftward_dag_moves, d_star, Agent, AgentKind, Instance, Layout, Variant};
use crate::validator::{check_lemma1, validate, MotionMode};
use crate::witness::{synth_feasible_monotone, synth_optimal_plan};

pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestConfig {
    pub seed: u64,
    /// Smaller sweeps for a fast smoke run.
    pub quick: bool,
    /// Agent cap for the monotone oracle; larger instances are skipped.
    pub max_agents: usize,
    /// Per-instance state cap for the descending oracle.
    pub max_states: u64,
    /// Per-instance time budget for the descending oracle.
    pub seconds: Option<f64>,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        SelftestConfig { seed: DEFAULT_SEED, quick: false, max_agents: 20, max_states: 20_000_000, seconds: Some(300.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skip => "skip",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
    /// Named counts behind the detail string.
    pub counts: Vec<(&'static str, u64)>,
    /// Wall time of the check; never printed, so reports stay reproducible.
    pub elapsed: Duration,
    /// Slowest single oracle call, where the check makes many.
    pub slowest_instance: Option<Duration>,
}

impl CriterionResult {
    fn new(id: u8, name: &'static str, ok: bool, counts: Vec<(&'static str, u64)>) -> Self {
        let detail = counts.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ");
        CriterionResult {
            id,
            name,
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
            counts,
            elapsed: Duration::ZERO,
            slowest_instance: None,
        }
    }

    pub fn count(&self, key: &str) -> Option<u64> {
        self.counts.iter().find(|(k, _)| *k == key).map(|&(_, v)| v)
    }

    pub fn line(&self) -> String {
        format!("CRITERION {} {} {}: {}", self.id, self.status, self.name, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct SelftestReport {
    pub criteria: Vec<CriterionResult>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.status == Status::Pass)
    }

    pub fn get(&self, id: u8) -> Option<&CriterionResult> {
        self.criteria.iter().find(|c| c.id == id)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.criteria {
            out.push_str(&c.line());
            out.push('\n');
        }
        let tally = |s: Status| self.criteria.iter().filter(|c| c.status == s).count();
        out.push_str(&format!(
            "SELFTEST pass={} fail={} skip={}\n",
            tally(Status::Pass),
            tally(Status::Fail),
            tally(Status::Skip)
        ));
        out
    }
}

/// Facts gathered by one criterion and checked by another.
#[derive(Default)]
struct Evidence {
    /// General-variant plans claimed optimal, for the same-run check.
    general_optimal: Vec<(Instance, Layout, Plan)>,
    /// Synthesized optimal plans, for the per-agent check.
    synthesized: Vec<(Instance, Plan)>,
    leftward_moves: u64,
    instances_checked: u64,
    cost_assertion_failures: u64,
}

fn timed(f: impl FnOnce() -> CriterionResult) -> CriterionResult {
    let started = Instant::now();
    let mut c = f();
    c.elapsed = started.elapsed();
    c
}

pub fn run(cfg: &SelftestConfig) -> SelftestReport {
    let mut ev = Evidence::default();
    let mut criteria = vec![
        timed(|| figure_end_to_end(&mut ev)),
        timed(|| monotone_sweep(cfg, &mut ev)),
        timed(|| general_sweep(cfg, &mut ev)),
    ];
    let started = Instant::now();
    let random = random_witnesses(cfg);
    let synthesis = started.elapsed();
    criteria.push(timed(|| same_run(cfg, &mut ev, &random)));
    criteria.push(timed(|| linear_size(cfg, &mut ev)));
    criteria.push(timed(|| per_agent_optimality(&ev, &random)));
    criteria[3].elapsed += synthesis;
    criteria.push(timed(|| fallback(cfg, &mut ev)));
    let tiny = timed(|| tiny_agreement(&mut ev));
    criteria.push(timed(|| no_leftward(&ev)));
    criteria.push(tiny);
    criteria.push(timed(|| determinism(cfg)));
    SelftestReport { criteria }
}

fn figure_assignment() -> Assignment {
    Assignment::from_values(vec![true, false, true])
}

fn figure_end_to_end(ev: &mut Evidence) -> CriterionResult {
    let f = gen::figure_formula();
    let (mi, ml) = build(&f, Variant::Monotone);
    let (gi, gl) = build(&f, Variant::General);
    let a = figure_assignment();
    let height_ok = mi.map().height() == 3 && gi.map().height() == 3;
    let mut ok = height_ok && mi.num_agents() == 12 && gi.num_agents() == 15;
    let mut counts = vec![
        ("height", mi.map().height() as u64),
        ("agents_monotone", mi.num_agents() as u64),
        ("agents_general", gi.num_agents() as u64),
    ];
    match (synth_optimal_plan(&mi, &ml, &a), synth_optimal_plan(&gi, &gl, &a)) {
        (Ok(mp), Ok(gp)) => {
            let rm = validate(&mi, &mp, MotionMode::Monotone).expect("plan shape");
            let rg = validate(&gi, &gp, MotionMode::Sequential).expect("plan shape");
            ok &= rm.feasible && rm.is_monotone && rm.is_dstar_optimal();
            ok &= rg.feasible && rg.is_sequential && rg.is_dstar_optimal();
            counts.extend([
                ("dstar_monotone", rm.dstar.unwrap_or(0)),
                ("cost_monotone", rm.cost),
                ("dstar_general", rg.dstar.unwrap_or(0)),
                ("cost_general", rg.cost),
            ]);
            ev.synthesized.push((mi.clone(), mp));
            ev.synthesized.push((gi.clone(), gp.clone()));
            ev.general_optimal.push((gi, gl, gp));
        }
        _ => ok = false,
    }
    CriterionResult::new(1, "figure formula end to end", ok, counts)
}

fn random_formulas(rng: &mut ChaCha8Rng, count: usize, max_vars: u32, max_clauses: usize) -> Vec<Formula> {
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..=max_vars);
            let m = rng.gen_range(1..=max_clauses);
            gen::random_formula(rng, n, m, false)
        })
        .collect()
}

fn monotone_sweep(cfg: &SelftestConfig, ev: &mut Evidence) -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x02);
    let (canonical_clauses, random_count) = if cfg.quick { (2, 50) } else { (3, 200) };
    let mut formulas = gen::canonical_3cnf(2, canonical_clauses);
    let canonical = formulas.len();
    formulas.extend(random_formulas(&mut rng, random_count, 4, 4));

    // (agree, skipped, witness_ok, leftward)
    let results: Vec<(bool, bool, bool, usize)> = formulas
        .par_iter()
        .map(|f| {
            let (inst, _) = build(f, Variant::Monotone);
            let leftward = count_leftward_dag_moves(&inst).unwrap_or(usize::MAX);
            let sat = brute_force_sat(f).expect("small formula").is_some();
            match monotone_dstar_feasible_capped(&inst, cfg.max_agents) {
                Ok(v) => {
                    let witness_ok = match &v.witness {
                        Some(p) => validate(&inst, p, MotionMode::Monotone).is_ok_and(|r| r.feasible && r.is_dstar_optimal()),
                        None => v.feasible == Some(false),
                    };
                    (v.feasible == Some(sat), false, witness_ok, leftward)
                }
                Err(_) => (true, true, true, leftward),
            }
        })
        .collect();
    ev.instances_checked += results.len() as u64;
    ev.leftward_moves += results.iter().map(|r| r.3 as u64).sum::<u64>();
    let disagree = results.iter().filter(|r| !r.0).count() as u64;
    let skipped = results.iter().filter(|r| r.1).count() as u64;
    let bad_witness = results.iter().filter(|r| !r.2).count() as u64;
    let checked = results.len() as u64 - skipped;
    let ok = disagree == 0 && bad_witness == 0 && checked > 0;
    let mut c = CriterionResult::new(
        2,
        "monotone oracle agrees with SAT",
        ok,
        vec![
            ("canonical", canonical as u64),
            ("random", random_count as u64),
            ("checked", checked),
            ("disagree", disagree),
            ("bad_witness", bad_witness),
            ("skipped", skipped),
        ],
    );
    if checked == 0 {
        c.status = Status::Skip;
    }
    c
}

fn general_sweep(cfg: &SelftestConfig, ev: &mut Evidence) -> CriterionResult {
    let formulas = if cfg.quick { gen::all_small_formulas(1, 2) } else { gen::all_small_formulas(2, 2) };
    let pair = gen::unsat_pair();
    let has_pair = formulas.contains(&pair) as u64;
    let limits = Limits { max_states: cfg.max_states, seconds: cfg.seconds, ..Limits::default() };

    struct Outcome {
        verdict: Option<bool>,
        sat: bool,
        witness_ok: bool,
        assertion_failures: u64,
        leftward: usize,
        plan: Option<(Instance, Layout, Plan)>,
        elapsed: Duration,
    }
    let outcomes: Vec<Outcome> = formulas
        .par_iter()
        .map(|f| {
            let (inst, layout) = build(f, Variant::General);
            let sat = brute_force_sat(f).expect("small formula").is_some();
            let leftward = count_leftward_dag_moves(&inst).unwrap_or(usize::MAX);
            let started = Instant::now();
            let v = descending_dstar_feasible(&inst, limits).expect("generated instances are connected");
            let elapsed = started.elapsed();
            let witness_ok = match &v.witness {
                Some(p) => validate(&inst, p, MotionMode::Sequential).is_ok_and(|r| r.feasible && r.is_dstar_optimal()),
                None => v.feasible != Some(true),
            };
            let plan = v.witness.map(|p| (inst, layout, p));
            Outcome { verdict: v.feasible, sat, witness_ok, assertion_failures: v.cost_assertion_failures, leftward, plan, elapsed }
        })
        .collect();

    let unknown = outcomes.iter().filter(|o| o.verdict.is_none()).count() as u64;
    let wrong = outcomes.iter().filter(|o| o.verdict.is_some_and(|v| v != o.sat)).count() as u64;
    let bad_witness = outcomes.iter().filter(|o| !o.witness_ok).count() as u64;
    let unsat = outcomes.iter().filter(|o| !o.sat).count() as u64;
    let slowest = outcomes.iter().map(|o| o.elapsed).max();
    ev.instances_checked += outcomes.len() as u64;
    for o in outcomes {
        ev.cost_assertion_failures += o.assertion_failures;
        ev.leftward_moves += o.leftward as u64;
        if let Some(p) = o.plan {
            ev.general_optimal.push(p);
        }
    }
    let ok = wrong == 0 && bad_witness == 0 && unknown == 0 && has_pair == 1;
    let mut c = CriterionResult::new(
        3,
        "descending oracle agrees with SAT on the general variant",
        ok,
        vec![
            ("formulas", formulas.len() as u64),
            ("unsat", unsat),
            ("unsat_pair_included", has_pair),
            ("wrong", wrong),
            ("bad_witness", bad_witness),
            ("unknown_skipped", unknown),
        ],
    );
    c.slowest_instance = slowest;
    c
}

/// Synthesized witnesses for seeded random satisfiable formulas, both
/// variants: (general instance, layout, general plan, monotone instance,
/// monotone plan).
struct RandomWitness {
    general: Result<(Instance, Layout, Plan), String>,
    monotone: Result<(Instance, Plan), String>,
}

fn random_witnesses(cfg: &SelftestConfig) -> Vec<RandomWitness> {
    let target = if cfg.quick { 100 } else { 500 };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x04);
    let mut picked: Vec<(Formula, Assignment)> = Vec::with_capacity(target);
    while picked.len() < target {
        let n = rng.gen_range(1..=5);
        let m = rng.gen_range(1..=6);
        let f = gen::random_formula(&mut rng, n, m, false);
        if let Some(a) = brute_force_sat(&f).expect("small formula") {
            picked.push((f, a));
        }
    }
    picked
        .par_iter()
        .map(|(f, a)| {
            let (gi, gl) = build(f, Variant::General);
            let (mi, ml) = build(f, Variant::Monotone);
            RandomWitness {
                general: synth_optimal_plan(&gi, &gl, a).map(|p| (gi, gl, p)).map_err(|e| e.to_string()),
                monotone: synth_optimal_plan(&mi, &ml, a).map(|p| (mi, p)).map_err(|e| e.to_string()),
            }
        })
        .collect()
}

fn same_run(cfg: &SelftestConfig, ev: &mut Evidence, random: &[RandomWitness]) -> CriterionResult {
    let _ = cfg;
    let from_sweeps = ev.general_optimal.len() as u64;
    let mut violations = 0u64;
    let mut errors = 0u64;
    let mut checked = 0u64;
    let sweep: Vec<Result<bool, String>> =
        ev.general_optimal.par_iter().map(|(i, l, p)| check_lemma1(i, l, p).map_err(|e| e.to_string())).collect();
    let synthesized: Vec<Result<bool, String>> = random
        .par_iter()
        .map(|w| match &w.general {
            Ok((i, l, p)) => check_lemma1(i, l, p).map_err(|e| e.to_string()),
            Err(e) => Err(e.clone()),
        })
        .collect();
    for r in sweep.iter().chain(&synthesized) {
        checked += 1;
        match r {
            Ok(true) => {}
            Ok(false) => violations += 1,
            Err(_) => errors += 1,
        }
    }
    let ok = violations == 0 && errors == 0 && synthesized.len() >= if cfg.quick { 100 } else { 500 };
    CriterionResult::new(
        4,
        "traversers of a gadget share one run",
        ok,
        vec![
            ("oracle_and_figure_plans", from_sweeps),
            ("synthesized_plans", synthesized.len() as u64),
            ("checked", checked),
            ("violations", violations),
            ("errors", errors),
        ],
    )
}

/// Closed forms read off the layout rules, computed from literal counts
/// alone: (agents monotone, agents general, open cells, width).
fn closed_form_sizes(f: &Formula) -> (usize, usize, usize, usize) {
    let m = f.num_clauses();
    let mut counts: HashMap<u32, (usize, usize)> = HashMap::new();
    for l in f.clauses().iter().flat_map(|c| c.literals()) {
        let e = counts.entry(l.var).or_default();
        if l.positive {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    let widths: Vec<usize> = counts.values().map(|&(p, q)| p.max(q).max(1) + 1).collect();
    let literals: usize = f.clauses().iter().map(|c| c.len()).sum();
    let n_mono = literals + m;
    let n_gen = n_mono + counts.len();
    let open = m + widths.iter().map(|w| 2 * w + 7).sum::<usize>() + 3 + f.clauses().iter().map(|c| 3 * c.len() + 4).sum::<usize>();
    let width = m + widths.iter().map(|w| w + 3).sum::<usize>() + 2 + f.clauses().iter().map(|c| c.len() + 2).sum::<usize>();
    (n_mono, n_gen, open, width)
}

fn linear_size(cfg: &SelftestConfig, ev: &mut Evidence) -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x05);
    let per_size = if cfg.quick { 2 } else { 5 };
    let mut mismatches = 0u64;
    let mut worst_ratio_milli = 0u64;
    let mut checked = 0u64;
    for m in [5usize, 10, 20, 40] {
        for _ in 0..per_size {
            let n = rng.gen_range(1..=m as u32);
            let f = gen::random_formula(&mut rng, n, m, false);
            let (n_mono, n_gen, open, width) = closed_form_sizes(&f);
            let (mi, ml) = build(&f, Variant::Monotone);
            let (gi, gl) = build(&f, Variant::General);
            checked += 1;
            let exact = mi.num_agents() == n_mono
                && gi.num_agents() == n_gen
                && mi.map().open_cells() == open
                && gi.map().open_cells() == open
                && ml.width == width
                && gl.width == width
                && mi.map().height() == 3;
            mismatches += u64::from(!exact);
            let ratio = (open as u64 * 1000) / (f.num_vars() as u64 + m as u64);
            worst_ratio_milli = worst_ratio_milli.max(ratio);
            ev.leftward_moves += count_leftward_dag_moves(&gi).unwrap_or(usize::MAX) as u64;
            ev.instances_checked += 1;
        }
    }
    let ok = mismatches == 0 && worst_ratio_milli <= 30_000;
    CriterionResult::new(
        5,
        "reduction size is linear",
        ok,
        vec![("formulas", checked), ("mismatches", mismatches), ("max_cells_per_var_plus_clause_x1000", worst_ratio_milli)],
    )
}

fn per_agent_optimality(ev: &Evidence, random: &[RandomWitness]) -> CriterionResult {
    let mut plans: Vec<(&Instance, &Plan)> = ev.synthesized.iter().map(|(i, p)| (i, p)).collect();
    let mut synth_errors = 0u64;
    for w in random {
        match &w.general {
            Ok((i, _, p)) => plans.push((i, p)),
            Err(_) => synth_errors += 1,
        }
        match &w.monotone {
            Ok((i, p)) => plans.push((i, p)),
            Err(_) => synth_errors += 1,
        }
    }
    let bad: u64 = plans
        .par_iter()
        .map(|(inst, plan)| {
            let dist = inst.agent_distances().expect("connected");
            let per_agent = (0..inst.num_agents()).all(|a| plan.path_len(a) == dist[a] as usize);
            let total = validate(inst, plan, MotionMode::Parallel).is_ok_and(|r| r.feasible && r.is_dstar_optimal());
            u64::from(!(per_agent && total))
        })
        .sum();
    CriterionResult::new(
        6,
        "every agent walks a shortest path",
        bad == 0 && synth_errors == 0,
        vec![("plans", plans.len() as u64), ("violations", bad), ("synthesis_errors", synth_errors)],
    )
}

fn fallback(cfg: &SelftestConfig, ev: &mut Evidence) -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x07);
    let mut formulas = vec![
        gen::unsat_pair(),
        Formula::from_ints(&[&[1], &[-1]]).expect("valid"),
        Formula::from_ints(&[&[1, 2], &[-1], &[-2]]).expect("valid"),
        gen::figure_formula(),
    ];
    while formulas.len() < 50 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(2..=5);
        formulas.push(gen::random_formula(&mut rng, n, m, false));
    }
    // (sat, plan ok, cost > d* when unsat, oracle says no when unsat, oracle skipped)
    let results: Vec<(bool, bool, bool, bool, bool, usize)> = formulas
        .par_iter()
        .map(|f| {
            let sat = brute_force_sat(f).expect("small").is_some();
            let (inst, layout) = build(f, Variant::Monotone);
            let leftward = count_leftward_dag_moves(&inst).unwrap_or(usize::MAX);
            let report = synth_feasible_monotone(&inst, &layout)
                .ok()
                .and_then(|p| validate(&inst, &p, MotionMode::Monotone).ok());
            let plan_ok = report.as_ref().is_some_and(|r| r.feasible && r.is_monotone);
            let above = report.as_ref().is_some_and(|r| r.dstar.is_some_and(|d| r.cost > d));
            let (oracle_no, skipped) = match monotone_dstar_feasible_capped(&inst, cfg.max_agents) {
                Ok(v) => (v.feasible == Some(false), false),
                Err(_) => (false, true),
            };
            (sat, plan_ok, above, oracle_no, skipped, leftward)
        })
        .collect();
    ev.instances_checked += results.len() as u64;
    ev.leftward_moves += results.iter().map(|r| r.5 as u64).sum::<u64>();
    let unsat = results.iter().filter(|r| !r.0).count() as u64;
    let invalid = results.iter().filter(|r| !r.1).count() as u64;
    let unsat_at_dstar = results.iter().filter(|r| !r.0 && !r.2).count() as u64;
    let oracle_disagree = results.iter().filter(|r| !r.0 && !r.4 && !r.3).count() as u64;
    let skipped = results.iter().filter(|r| !r.0 && r.4).count() as u64;
    let ok = unsat > 0 && invalid == 0 && unsat_at_dstar == 0 && oracle_disagree == 0;
    CriterionResult::new(
        7,
        "fallback monotone plan always exists",
        ok,
        vec![
            ("formulas", results.len() as u64),
            ("unsat", unsat),
            ("invalid_plans", invalid),
            ("unsat_at_dstar", unsat_at_dstar),
            ("oracle_disagree", oracle_disagree),
            ("oracle_skipped", skipped),
        ],
    )
}

fn no_leftward(ev: &Evidence) -> CriterionResult {
    CriterionResult::new(
        8,
        "no leftward shortest-path moves",
        ev.leftward_moves == 0 && ev.cost_assertion_failures == 0 && ev.instances_checked > 0,
        vec![
            ("instances", ev.instances_checked),
            ("leftward_moves", ev.leftward_moves),
            ("cost_assertion_failures", ev.cost_assertion_failures),
        ],
    )
}

/// A tiny instance from a character map (`.` open, `@` blocked) and
/// (start, target) pairs.
type StartTarget = ((usize, usize), (usize, usize));

fn tiny(rows: &[&str], pairs: &[StartTarget]) -> Instance {
    let mut map = GridMap::blocked(rows.len(), rows[0].len());
    for (r, line) in rows.iter().enumerate() {
        for (c, ch) in line.chars().enumerate() {
            map.set_passable(Cell::new(r, c), ch == '.');
        }
    }
    let agents = pairs
        .iter()
        .enumerate()
        .map(|(id, &((sr, sc), (tr, tc)))| Agent {
            id,
            kind: AgentKind::Clause { clause: id },
            start: Cell::new(sr, sc),
            target: Cell::new(tr, tc),
        })
        .collect();
    Instance::new(map, agents).expect("catalog instances are well formed")
}

/// Handcrafted instances with at most 4 agents and 20 open cells.
pub fn tiny_catalog() -> Vec<(&'static str, Instance)> {
    vec![
        ("corridor", tiny(&["....."], &[((0, 0), (0, 4))])),
        ("corridor train", tiny(&["....."], &[((0, 0), (0, 3)), ((0, 1), (0, 4))])),
        ("corridor chain", tiny(&["...."], &[((0, 0), (0, 1)), ((0, 1), (0, 2)), ((0, 2), (0, 3))])),
        ("corridor swap", tiny(&["...."], &[((0, 1), (0, 2)), ((0, 2), (0, 1))])),
        ("corridor pass", tiny(&["....."], &[((0, 0), (0, 4)), ((0, 4), (0, 0))])),
        ("corridor blocked", tiny(&["....."], &[((0, 0), (0, 4)), ((0, 2), (0, 1))])),
        ("standing in the way", tiny(&["..."], &[((0, 1), (0, 1)), ((0, 0), (0, 2))])),
        ("standing aside", tiny(&["...", "@.@"], &[((0, 1), (0, 1)), ((0, 0), (0, 2))])),
        ("plus crossing", tiny(&["@.@", "...", "@.@"], &[((1, 0), (1, 2)), ((1, 2), (1, 0))])),
        ("plus orthogonal", tiny(&["@.@", "...", "@.@"], &[((1, 0), (1, 2)), ((0, 1), (2, 1))])),
        ("pocket pass", tiny(&["....", "@.@@"], &[((0, 0), (0, 3)), ((0, 3), (0, 0))])),
        (
            "rotation 2x2",
            tiny(&["..", ".."], &[((0, 0), (0, 1)), ((0, 1), (1, 1)), ((1, 1), (1, 0)), ((1, 0), (0, 0))]),
        ),
        ("rotation with hole", tiny(&["..", ".."], &[((0, 0), (0, 1)), ((0, 1), (1, 1)), ((1, 1), (1, 0))])),
        ("diagonal exchange", tiny(&["..", ".."], &[((0, 0), (1, 1)), ((1, 1), (0, 0))])),
        (
            "ring of six",
            tiny(&["...", "..."], &[((0, 0), (0, 1)), ((0, 1), (0, 2)), ((0, 2), (1, 2)), ((1, 2), (1, 1))]),
        ),
        (
            "rotation beside a spare column",
            tiny(&["...", "..."], &[((0, 0), (0, 1)), ((0, 1), (1, 1)), ((1, 1), (1, 0)), ((1, 0), (0, 0))]),
        ),
        ("around a pillar", tiny(&["...", ".@.", "..."], &[((0, 0), (2, 2))])),
        (
            "corners across",
            tiny(&["...", "...", "..."], &[((0, 0), (2, 2)), ((2, 2), (0, 0)), ((0, 2), (2, 0)), ((2, 0), (0, 2))]),
        ),
        (
            "boundary shift",
            tiny(&["...", ".@.", "..."], &[((0, 0), (0, 1)), ((0, 2), (1, 2)), ((2, 2), (2, 1)), ((2, 0), (1, 0))]),
        ),
        ("two lanes", tiny(&[".....", "....."], &[((0, 0), (0, 4)), ((1, 0), (1, 4))])),
        ("lane change", tiny(&[".....", "....."], &[((0, 0), (1, 4)), ((1, 0), (0, 4))])),
        (
            "pairs exchange",
            tiny(&[".....", "....."], &[((0, 0), (0, 4)), ((0, 4), (0, 0)), ((1, 1), (1, 3)), ((1, 3), (1, 1))]),
        ),
        ("dead end", tiny(&["...", "@@."], &[((1, 2), (0, 0)), ((0, 0), (1, 2))])),
        ("t junction", tiny(&["...", "@.@", "@.@"], &[((2, 1), (0, 0)), ((0, 0), (0, 2)), ((0, 2), (2, 1))])),
    ]
}

fn tiny_agreement(ev: &mut Evidence) -> CriterionResult {
    let catalog = tiny_catalog();
    let mut inconsistent = 0u64;
    let mut rotation = (0u64, false);
    let mut unknown_on_rotation = false;
    for (name, inst) in &catalog {
        let dstar = d_star(inst).ok();
        let cost = |mode| joint_astar(inst, mode).expect("tiny");
        let (par, seq, mono) = (cost(MotionMode::Parallel), cost(MotionMode::Sequential), cost(MotionMode::Monotone));
        let c = |x: &Option<(u64, Plan)>| x.as_ref().map_or(u64::MAX, |(c, _)| *c);
        let mut ok = c(&par) <= c(&seq) && c(&seq) <= c(&mono);
        for (mode, res) in [(MotionMode::Parallel, &par), (MotionMode::Sequential, &seq), (MotionMode::Monotone, &mono)] {
            if let Some((cost, plan)) = res {
                ok &= validate(inst, plan, mode).is_ok_and(|r| r.feasible && r.cost == *cost);
            }
        }
        if let Some(d) = dstar {
            let desc = descending_dstar_feasible(inst, Limits::default()).expect("connected");
            ev.cost_assertion_failures += desc.cost_assertion_failures;
            let mono_dp = monotone_dstar_feasible_capped(inst, 20).expect("tiny");
            ok &= desc.sequential_feasible == Some(c(&seq) == d);
            ok &= mono_dp.feasible == Some(c(&mono) == d);
            // a definite answer must hold for parallel motion; without
            // leftward moves there is no rotation and the answer is definite
            ok &= desc.feasible.is_none_or(|f| f == (c(&par) == d));
            if count_leftward_dag_moves(inst).is_ok_and(|l| l == 0) {
                ok &= desc.feasible.is_some();
            }
        } else {
            ok &= par.is_none();
        }
        if *name == "rotation 2x2" {
            rotation = (c(&par), seq.is_none());
            unknown_on_rotation = dstar.is_some_and(|_| {
                descending_dstar_feasible(inst, Limits::default()).is_ok_and(|v| v.feasible.is_none())
            });
        }
        inconsistent += u64::from(!ok);
    }
    let ok = inconsistent == 0 && catalog.len() >= 20 && rotation == (4, true) && unknown_on_rotation;
    CriterionResult::new(
        9,
        "oracles agree on tiny instances",
        ok,
        vec![
            ("instances", catalog.len() as u64),
            ("inconsistent", inconsistent),
            ("rotation_parallel_cost", rotation.0),
            ("rotation_sequential_feasible", u64::from(!rotation.1)),
            ("rotation_descending_unknown", u64::from(unknown_on_rotation)),
        ],
    )
}

fn determinism(cfg: &SelftestConfig) -> CriterionResult {
    let f = gen::figure_formula();
    let texts = || -> Vec<String> {
        let mut out = Vec::new();
        for variant in [Variant::Monotone, Variant::General] {
            let (inst, layout) = build(&f, variant);
            out.push(crate::gridmap::write_map(inst.map()));
            out.push(inst.agents_text());
            out.push(layout.to_text());
            if let Ok(p) = synth_optimal_plan(&inst, &layout, &figure_assignment()) {
                out.push(p.to_text());
            }
        }
        out
    };
    let same_texts = texts() == texts();

    let formulas: Vec<Formula> = gen::canonical_3cnf(1, 2).into_iter().chain(gen::canonical_3cnf(2, 1)).collect();
    let sweep = |threads: usize| -> Vec<String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
        pool.install(|| {
            formulas
                .par_iter()
                .map(|f| {
                    let (inst, _) = build(f, Variant::General);
                    let v = descending_dstar_feasible(&inst, Limits { seconds: None, ..Limits::default() }).expect("connected");
                    let (mi, _) = build(f, Variant::Monotone);
                    let m = monotone_dstar_feasible_capped(&mi, cfg.max_agents).map(|v| v.line()).unwrap_or_default();
                    format!("{} {} {}", v.line(), v.witness.map(|p| p.to_text()).unwrap_or_default(), m)
                })
                .collect()
        })
    };
    let same_sweep = sweep(1) == sweep(4);
    CriterionResult::new(
        10,
        "outputs are deterministic",
        same_texts && same_sweep,
        vec![("artifacts_identical", u64::from(same_texts)), ("oracle_sweep_identical_1_vs_4_threads", u64::from(same_sweep))],
    )
}
