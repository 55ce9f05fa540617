//! Command-line front end. Instances live in three files sharing a prefix:
//! `<prefix>.map`, `<prefix>.agents` and `<prefix>.layout` (the last is
//! only needed by commands that know about gadgets).
//!
//! Exit codes: 0 yes/valid, 1 no/invalid/unknown, 2 error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::formula::{brute_force_sat, gen, parse_dimacs, Assignment};
use crate::gridmap::{read_map, write_map};
use crate::oracle::{descending_dstar_feasible, joint_astar, monotone_dstar_feasible_capped, Limits, DEFAULT_MONOTONE_CAP};
use crate::plan::Plan;
use crate::reduction::{build, d_star, size_stats, Instance, Layout, Variant};
use crate::render::render;
use crate::selftest::{self, SelftestConfig};
use crate::validator::{validate, MotionMode};
use crate::witness::{extract_assignment_general, extract_assignment_monotone, synth_feasible_monotone, synth_optimal_plan, WitnessError};

#[derive(Parser, Debug)]
#[command(name = "sat2mapf", version, about = "Compile 3-SAT into grid MAPF and check distance-optimal plans")]
pub struct Cli {
    /// Worker threads for sweeps and batch work (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compile a DIMACS CNF file into an instance.
    Reduce {
        cnf: PathBuf,
        #[arg(long, value_enum, default_value_t = VariantArg::Monotone)]
        variant: VariantArg,
        /// Output prefix; defaults to the CNF path without its extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a plan for a compiled instance.
    Witness {
        #[command(flatten)]
        io: InstanceArgs,
        /// Assignment such as `1=1,2=0,3=1`.
        #[arg(long, conflicts_with_all = ["solve", "fallback"])]
        assignment: Option<String>,
        /// Find an assignment by brute force.
        #[arg(long, conflicts_with = "fallback")]
        solve: bool,
        /// Build the always-available monotone plan (monotone variant).
        #[arg(long)]
        fallback: bool,
        /// Plan output path; defaults to `<prefix>.plan`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode an assignment from a cost-d* plan.
    Extract {
        #[command(flatten)]
        io: InstanceArgs,
        #[arg(long)]
        plan: PathBuf,
    },
    /// Check a plan against an instance.
    Validate {
        #[command(flatten)]
        io: InstanceArgs,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Parallel)]
        mode: ModeArg,
    },
    /// Decide whether a plan of cost d* exists.
    Oracle {
        #[command(flatten)]
        io: InstanceArgs,
        #[arg(long, value_enum, default_value_t = OracleMethod::Descending)]
        method: OracleMethod,
        /// Motion mode for the joint search.
        #[arg(long, value_enum, default_value_t = ModeArg::Parallel)]
        mode: ModeArg,
        #[arg(long, default_value_t = Limits::default().max_states)]
        max_states: u64,
        #[arg(long)]
        seconds: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_MONOTONE_CAP)]
        max_agents: usize,
        /// Write the witness plan here when one is found.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw an instance, optionally at a plan timestep.
    Render {
        #[command(flatten)]
        io: InstanceArgs,
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long, requires = "plan")]
        time: Option<usize>,
    },
    /// Size statistics for a CNF file or for seeded random formulas.
    Stats {
        cnf: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = VariantArg::Monotone)]
        variant: VariantArg,
        #[arg(long, default_value_t = selftest::DEFAULT_SEED)]
        seed: u64,
        /// Clause counts for the random sweep.
        #[arg(long, value_delimiter = ',', default_values_t = [5usize, 10, 20, 40])]
        clauses: Vec<usize>,
        /// Random formulas per clause count.
        #[arg(long, default_value_t = 3)]
        count: usize,
    },
    /// Run every acceptance check and print one line per criterion.
    Selftest {
        #[arg(long, default_value_t = selftest::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = DEFAULT_MONOTONE_CAP)]
        max_agents: usize,
        #[arg(long, default_value_t = Limits::default().max_states)]
        max_states: u64,
        #[arg(long, default_value_t = 300.0)]
        seconds: f64,
    },
}

#[derive(Args, Debug)]
pub struct InstanceArgs {
    /// Instance prefix (reads `<prefix>.map`, `<prefix>.agents`, `<prefix>.layout`).
    #[arg(long)]
    pub instance: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum VariantArg {
    Monotone,
    General,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Monotone => Variant::Monotone,
            VariantArg::General => Variant::General,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ModeArg {
    Parallel,
    Sequential,
    Monotone,
}

impl From<ModeArg> for MotionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Parallel => MotionMode::Parallel,
            ModeArg::Sequential => MotionMode::Sequential,
            ModeArg::Monotone => MotionMode::Monotone,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum OracleMethod {
    Monotone,
    Descending,
    Joint,
}

/// Exit status plus an error message for status 2.
type Outcome = Result<i32, String>;

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_instance(prefix: &Path) -> Result<Instance, String> {
    let map = read_map(&read(&with_ext(prefix, "map"))?).map_err(|e| e.to_string())?;
    Instance::parse_agents(map, &read(&with_ext(prefix, "agents"))?).map_err(|e| e.to_string())
}

fn load_layout(prefix: &Path) -> Result<Layout, String> {
    Layout::parse(&read(&with_ext(prefix, "layout"))?).map_err(|e| e.to_string())
}

fn load_plan(path: &Path) -> Result<Plan, String> {
    Plan::parse(&read(path)?).map_err(|e| e.to_string())
}

/// Runs the CLI on `args`, writing machine lines to `out`; returns the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    if let Some(threads) = cli.threads {
        // a second call in the same process keeps the existing pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global();
    }
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Outcome {
    let mut emit = |line: String| -> Result<(), String> { writeln!(out, "{line}").map_err(|e| e.to_string()) };
    match command {
        Command::Reduce { cnf, variant, out: prefix } => {
            let f = parse_dimacs(&read(&cnf)?).map_err(|e| e.to_string())?;
            let (inst, layout) = build(&f, variant.into());
            let prefix = prefix.unwrap_or_else(|| cnf.with_extension(""));
            write(&with_ext(&prefix, "map"), &write_map(inst.map()))?;
            write(&with_ext(&prefix, "agents"), &inst.agents_text())?;
            write(&with_ext(&prefix, "layout"), &layout.to_text())?;
            let dstar = d_star(&inst).map_err(|e| e.to_string())?;
            emit(format!("REDUCE n={} V={} dstar={dstar}", inst.num_agents(), inst.map().open_cells()))?;
            Ok(0)
        }
        Command::Witness { io, assignment, solve, fallback, out: plan_out } => {
            let inst = load_instance(&io.instance)?;
            let layout = load_layout(&io.instance)?;
            let f = layout.check_instance(&inst).map_err(|e| e.to_string())?;
            let plan = if fallback {
                synth_feasible_monotone(&inst, &layout).map_err(|e| e.to_string())?
            } else {
                let a = match (assignment, solve) {
                    (Some(text), _) => Assignment::parse(&text, f.num_vars()).map_err(|e| e.to_string())?,
                    (None, true) => match brute_force_sat(&f).map_err(|e| e.to_string())? {
                        Some(a) => a,
                        None => {
                            emit("WITNESS unsatisfiable".into())?;
                            return Ok(1);
                        }
                    },
                    (None, false) => return Err("one of --assignment, --solve or --fallback is required".into()),
                };
                match synth_optimal_plan(&inst, &layout, &a) {
                    Ok(p) => p,
                    Err(WitnessError::NotSatisfying) => {
                        emit("WITNESS not-satisfying".into())?;
                        return Ok(1);
                    }
                    Err(e) => return Err(e.to_string()),
                }
            };
            let report = validate(&inst, &plan, MotionMode::Parallel).map_err(|e| e.to_string())?;
            let dstar = report.dstar.ok_or("d* undefined")?;
            write(&plan_out.unwrap_or_else(|| with_ext(&io.instance, "plan")), &plan.to_text())?;
            let ok = report.feasible && (fallback || report.cost == dstar);
            emit(format!("WITNESS cost={} dstar={dstar} ok={}", report.cost, u8::from(ok)))?;
            Ok(if ok { 0 } else { 1 })
        }
        Command::Extract { io, plan } => {
            let inst = load_instance(&io.instance)?;
            let layout = load_layout(&io.instance)?;
            let f = layout.check_instance(&inst).map_err(|e| e.to_string())?;
            let plan = load_plan(&plan)?;
            let result = match layout.variant {
                Variant::Monotone => extract_assignment_monotone(&inst, &layout, &plan),
                Variant::General => extract_assignment_general(&inst, &layout, &plan),
            };
            match result {
                Ok(a) => {
                    let sat = f.eval(&a).map_err(|e| e.to_string())?;
                    emit(format!("EXTRACT assignment={a} satisfies={}", u8::from(sat)))?;
                    Ok(if sat { 0 } else { 1 })
                }
                Err(e @ WitnessError::Validation(_)) => Err(e.to_string()),
                Err(e) => {
                    emit(format!("EXTRACT failed: {e}"))?;
                    Ok(1)
                }
            }
        }
        Command::Validate { io, plan, mode } => {
            let inst = load_instance(&io.instance)?;
            let plan = load_plan(&plan)?;
            let report = validate(&inst, &plan, mode.into()).map_err(|e| e.to_string())?;
            emit(report.result_line())?;
            Ok(if report.feasible { 0 } else { 1 })
        }
        Command::Oracle { io, method, mode, max_states, seconds, max_agents, out: plan_out } => {
            let inst = load_instance(&io.instance)?;
            let (feasible, witness) = match method {
                OracleMethod::Monotone | OracleMethod::Descending => {
                    let v = match method {
                        OracleMethod::Monotone => monotone_dstar_feasible_capped(&inst, max_agents),
                        _ => descending_dstar_feasible(&inst, Limits { max_states, seconds, ..Limits::default() }),
                    }
                    .map_err(|e| e.to_string())?;
                    emit(v.line())?;
                    (v.feasible == Some(true), v.witness)
                }
                OracleMethod::Joint => {
                    let dstar = d_star(&inst).map_err(|e| e.to_string())?;
                    let mode: MotionMode = mode.into();
                    let found = joint_astar(&inst, mode).map_err(|e| e.to_string())?;
                    let cost = found.as_ref().map_or("none".to_string(), |(c, _)| c.to_string());
                    emit(format!("JOINT mode={mode} cost={cost} dstar={dstar}"))?;
                    let at_dstar = found.as_ref().is_some_and(|(c, _)| *c == dstar);
                    (at_dstar, found.map(|(_, p)| p))
                }
            };
            if let (Some(path), Some(plan)) = (plan_out, witness) {
                write(&path, &plan.to_text())?;
            }
            Ok(if feasible { 0 } else { 1 })
        }
        Command::Render { io, plan, time } => {
            let inst = load_instance(&io.instance)?;
            let text = match plan {
                Some(path) => {
                    let plan = load_plan(&path)?;
                    render(&inst, Some((&plan, time.unwrap_or(0))))
                }
                None => render(&inst, None),
            }
            .map_err(|e| e.to_string())?;
            write!(out, "{text}").map_err(|e| e.to_string())?;
            Ok(0)
        }
        Command::Stats { cnf, variant, seed, clauses, count } => {
            let variant: Variant = variant.into();
            let mut line = |f: &crate::formula::Formula| -> Result<(), String> {
                let s = size_stats(f, variant);
                let nm = f.num_vars() as f64 + f.num_clauses() as f64;
                emit(format!(
                    "STATS N={} M={} n={} V={} width={} height={} cells_per_size={:.3}",
                    f.num_vars(),
                    f.num_clauses(),
                    s.agents,
                    s.open_cells,
                    s.width,
                    s.height,
                    s.open_cells as f64 / nm
                ))
            };
            match cnf {
                Some(path) => line(&parse_dimacs(&read(&path)?).map_err(|e| e.to_string())?)?,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    for &m in &clauses {
                        for _ in 0..count {
                            let n = rng.gen_range(1..=m.max(1) as u32);
                            line(&gen::random_formula(&mut rng, n, m.max(1), false))?;
                        }
                    }
                }
            }
            Ok(0)
        }
        Command::Selftest { seed, quick, max_agents, max_states, seconds } => {
            let cfg = SelftestConfig { seed, quick, max_agents, max_states, seconds: Some(seconds) };
            let report = selftest::run(&cfg);
            write!(out, "{}", report.to_text()).map_err(|e| e.to_string())?;
            Ok(if report.all_passed() { 0 } else { 1 })
        }
    }
}
