//! Plan checking under parallel, sequential and monotone motion.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::gridmap::Cell;
use crate::plan::Plan;
use crate::reduction::{d_star, Instance, Layout};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValidationError {
    #[error("plan has {plan} agents, instance has {instance}")]
    AgentSetMismatch { plan: usize, instance: usize },
    #[error("agent {agent} trajectory has {len} cells, expected {expected}")]
    TrajectoryLengthMismatch { agent: usize, len: usize, expected: usize },
    #[error("plan is not a feasible plan of cost d* (cost {cost:?}, d* {dstar:?})")]
    NotOptimal { cost: Option<u64>, dstar: Option<u64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MotionMode {
    Parallel,
    Sequential,
    Monotone,
}

impl fmt::Display for MotionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MotionMode::Parallel => "parallel",
            MotionMode::Sequential => "sequential",
            MotionMode::Monotone => "monotone",
        })
    }
}

impl FromStr for MotionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "parallel" => Ok(MotionMode::Parallel),
            "sequential" => Ok(MotionMode::Sequential),
            "monotone" => Ok(MotionMode::Monotone),
            other => Err(format!("unknown motion mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexConflict {
    pub time: usize,
    pub agents: (usize, usize),
    pub cell: Cell,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapConflict {
    /// The step `time - 1 -> time`.
    pub time: usize,
    pub agents: (usize, usize),
    pub cells: (Cell, Cell),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AxiomViolation {
    WrongStart { agent: usize, at: Cell },
    WrongTarget { agent: usize, at: Cell },
    BadStep { agent: usize, time: usize, from: Cell, to: Cell },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub mode: MotionMode,
    pub feasible: bool,
    pub axiom_violations: Vec<AxiomViolation>,
    pub vertex_conflicts: Vec<VertexConflict>,
    pub swap_conflicts: Vec<SwapConflict>,
    pub cost: u64,
    pub dstar: Option<u64>,
    pub is_sequential: bool,
    pub is_monotone: bool,
    pub path_lengths: Vec<usize>,
    /// `[first tau with p(tau+1) != start, last tau with p(tau-1) != target]`;
    /// `None` for agents that never move.
    pub active_intervals: Vec<Option<(usize, usize)>>,
}

impl ValidationReport {
    /// Collision-free and well-formed, ignoring the motion mode.
    pub fn collision_free(&self) -> bool {
        self.axiom_violations.is_empty() && self.vertex_conflicts.is_empty() && self.swap_conflicts.is_empty()
    }

    pub fn is_dstar_optimal(&self) -> bool {
        self.feasible && Some(self.cost) == self.dstar
    }

    pub fn result_line(&self) -> String {
        format!(
            "RESULT feasible={} cost={} dstar={} monotone={} sequential={}",
            u8::from(self.feasible),
            self.cost,
            self.dstar.map_or_else(|| "-".to_string(), |d| d.to_string()),
            u8::from(self.is_monotone),
            u8::from(self.is_sequential)
        )
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mode: {}", self.mode)?;
        writeln!(f, "agents: {}", self.path_lengths.len())?;
        for v in &self.axiom_violations {
            writeln!(f, "axiom violation: {v:?}")?;
        }
        for c in &self.vertex_conflicts {
            writeln!(f, "vertex conflict at t={}: agents {} and {} on {}", c.time, c.agents.0, c.agents.1, c.cell)?;
        }
        for c in &self.swap_conflicts {
            writeln!(
                f,
                "swap conflict at t={}: agents {} and {} across {} <-> {}",
                c.time, c.agents.0, c.agents.1, c.cells.0, c.cells.1
            )?;
        }
        writeln!(f, "sequential: {}  monotone: {}", self.is_sequential, self.is_monotone)?;
        writeln!(f, "cost: {}  d*: {}", self.cost, self.dstar.map_or_else(|| "-".into(), |d| d.to_string()))?;
        write!(f, "{}", self.result_line())
    }
}

fn check_shape(inst: &Instance, plan: &Plan) -> Result<(), ValidationError> {
    if plan.num_agents() != inst.num_agents() {
        return Err(ValidationError::AgentSetMismatch { plan: plan.num_agents(), instance: inst.num_agents() });
    }
    for (agent, t) in plan.trajectories().iter().enumerate() {
        if t.len() != plan.horizon() + 1 {
            return Err(ValidationError::TrajectoryLengthMismatch { agent, len: t.len(), expected: plan.horizon() + 1 });
        }
    }
    Ok(())
}

pub fn validate(inst: &Instance, plan: &Plan, mode: MotionMode) -> Result<ValidationReport, ValidationError> {
    check_shape(inst, plan)?;
    let n = inst.num_agents();
    let horizon = plan.horizon();
    let map = inst.map();

    let mut axiom_violations = Vec::new();
    for (agent, a) in inst.agents().iter().enumerate() {
        let t = plan.trajectory(agent);
        if t[0] != a.start {
            axiom_violations.push(AxiomViolation::WrongStart { agent, at: t[0] });
        }
        if t[horizon] != a.target {
            axiom_violations.push(AxiomViolation::WrongTarget { agent, at: t[horizon] });
        }
        for tau in 1..=horizon {
            let (from, to) = (t[tau - 1], t[tau]);
            if !map.is_passable(to) || (from != to && !from.is_adjacent(to)) {
                axiom_violations.push(AxiomViolation::BadStep { agent, time: tau, from, to });
            }
        }
    }

    let mut vertex_conflicts = Vec::new();
    let mut swap_conflicts = Vec::new();
    let mut is_sequential = true;
    let mut occupant: HashMap<Cell, usize> = HashMap::with_capacity(n);
    let mut moves: HashMap<(Cell, Cell), usize> = HashMap::new();
    for tau in 0..=horizon {
        occupant.clear();
        for agent in 0..n {
            let c = plan.trajectory(agent)[tau];
            if let Some(other) = occupant.insert(c, agent) {
                vertex_conflicts.push(VertexConflict { time: tau, agents: (other, agent), cell: c });
            }
        }
        if tau == 0 {
            continue;
        }
        moves.clear();
        for agent in 0..n {
            let t = plan.trajectory(agent);
            if t[tau - 1] != t[tau] {
                moves.insert((t[tau - 1], t[tau]), agent);
            }
        }
        if moves.len() > 1 {
            is_sequential = false;
        }
        for (&(u, v), &agent) in &moves {
            if let Some(&other) = moves.get(&(v, u)) {
                // each swapping pair is reported once, lower id first
                if agent < other {
                    swap_conflicts.push(SwapConflict { time: tau, agents: (agent, other), cells: (u, v) });
                }
            }
        }
    }
    swap_conflicts.sort_by_key(|c| (c.time, c.agents));

    let path_lengths: Vec<usize> = (0..n).map(|a| plan.path_len(a)).collect();
    let active_intervals: Vec<Option<(usize, usize)>> = inst
        .agents()
        .iter()
        .enumerate()
        .map(|(agent, a)| active_interval(plan.trajectory(agent), a.start, a.target))
        .collect();
    let is_monotone = is_sequential && intervals_disjoint(&active_intervals);
    let cost = path_lengths.iter().map(|&l| l as u64).sum();

    let collision_free = axiom_violations.is_empty() && vertex_conflicts.is_empty() && swap_conflicts.is_empty();
    let feasible = collision_free
        && match mode {
            MotionMode::Parallel => true,
            MotionMode::Sequential => is_sequential,
            MotionMode::Monotone => is_monotone,
        };
    Ok(ValidationReport {
        mode,
        feasible,
        axiom_violations,
        vertex_conflicts,
        swap_conflicts,
        cost,
        dstar: d_star(inst).ok(),
        is_sequential,
        is_monotone,
        path_lengths,
        active_intervals,
    })
}

fn active_interval(t: &[Cell], start: Cell, target: Cell) -> Option<(usize, usize)> {
    let first = (0..t.len().saturating_sub(1)).find(|&tau| t[tau + 1] != start)?;
    let last = (1..t.len()).rev().find(|&tau| t[tau - 1] != target)?;
    Some((first, last))
}

/// Active intervals `[a, b]` are compared as the step sets `a..b`: an agent
/// may start moving at the very timestep the previous mover arrives.
fn intervals_disjoint(intervals: &[Option<(usize, usize)>]) -> bool {
    let mut spans: Vec<(usize, usize)> = intervals.iter().flatten().copied().collect();
    spans.sort_unstable();
    spans.windows(2).all(|w| w[0].1 <= w[1].0)
}

pub fn is_dstar_optimal(inst: &Instance, plan: &Plan, mode: MotionMode) -> Result<bool, ValidationError> {
    Ok(validate(inst, plan, mode)?.is_dstar_optimal())
}

/// All agents that enter a variable gadget through its entrance and later
/// leave through its exit must walk the identical cell sequence in between.
pub fn check_lemma1(inst: &Instance, layout: &Layout, plan: &Plan) -> Result<bool, ValidationError> {
    let report = validate(inst, plan, MotionMode::Parallel)?;
    if !report.is_dstar_optimal() {
        return Err(ValidationError::NotOptimal { cost: Some(report.cost), dstar: report.dstar });
    }
    let paths: Vec<Vec<Cell>> = (0..inst.num_agents()).map(|a| plan.path(a)).collect();
    for g in &layout.variables {
        let before = Cell::new(1, g.col.wrapping_sub(1));
        let mut seen: Option<&[Cell]> = None;
        for path in &paths {
            for (i, w) in path.windows(2).enumerate() {
                if w[0] != before || w[1] != g.entrance() {
                    continue;
                }
                let Some(len) = path[i + 1..].iter().position(|&c| c == g.exit()) else { continue };
                let segment = &path[i + 1..=i + 1 + len];
                match seen {
                    None => seen = Some(segment),
                    Some(s) if s == segment => {}
                    Some(_) => return Ok(false),
                }
            }
        }
    }
    Ok(true)
}
