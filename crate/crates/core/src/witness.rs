//! Witness plans for the reduction: staged optimal plans built from a
//! satisfying assignment, the always-available monotone fallback plan, and
//! decoding an assignment back out of an optimal plan.

use std::collections::HashSet;

use thiserror::Error;

use crate::formula::{Assignment, Formula};
use crate::gridmap::{bfs_distances, shortest_path_avoiding, Cell};
use crate::plan::{Plan, PlanError, StagedScript};
use crate::reduction::{AgentKind, Instance, Layout, ReductionError, Run, Variant};
use crate::validator::{validate, MotionMode, ValidationError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WitnessError {
    #[error("assignment does not satisfy the formula")]
    NotSatisfying,
    #[error("layout does not match the instance: {0}")]
    ForeignInstance(String),
    #[error("wrong instance variant: expected {expected}")]
    WrongVariant { expected: Variant },
    #[error("plan is not valid: {0}")]
    InvalidPlan(String),
    #[error("plan cost {cost} differs from d* = {dstar}")]
    NotOptimal { cost: u64, dstar: u64 },
    #[error("plan is not monotone")]
    NotMonotone,
    #[error("variable {var} has both polarities among the agents moving after the last clause agent")]
    AmbiguousWitness { var: u32 },
    #[error("clause agents use different runs through the gadget of variable {var}")]
    InconsistentTraversal { var: u32 },
    #[error("clause agent {agent} never traverses the gadget of variable {var}")]
    IncompleteTraversal { agent: usize, var: u32 },
    #[error("no route for agent {agent}")]
    Stuck { agent: usize },
    #[error(transparent)]
    Script(#[from] PlanError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

impl From<ReductionError> for WitnessError {
    fn from(e: ReductionError) -> Self {
        WitnessError::ForeignInstance(e.to_string())
    }
}

/// Run of each gadget that the assignment path uses: the run holding the
/// literal agents that are false under `a`.
fn assignment_runs(layout: &Layout, a: &Assignment) -> Vec<Run> {
    layout
        .variables
        .iter()
        .map(|g| if a.value(g.var) { Run::Bottom } else { Run::Top })
        .collect()
}

struct Router<'a> {
    layout: &'a Layout,
    /// Run used when passing through each gadget.
    runs: Vec<Run>,
}

impl Router<'_> {
    /// From the exit of gadget `gadget` to the bottom row of the first
    /// clause gadget, passing later gadgets along their chosen runs.
    fn extend_from_exit(&self, gadget: usize, path: &mut Vec<Cell>) {
        for (i, g) in self.layout.variables.iter().enumerate().skip(gadget) {
            if i > gadget {
                path.extend(g.traversal(self.runs[i]));
            }
            path.push(Cell::new(1, g.separator_col()));
        }
        path.extend(self.layout.shaft_path());
    }

    /// Along row 2 from the current bottom-row cell to column `col`.
    fn bottom_to(&self, col: usize, path: &mut Vec<Cell>) {
        let from = path.last().expect("nonempty path").col;
        path.extend((from + 1..=col).map(|c| Cell::new(2, c)));
    }

    fn literal_path(&self, start: Cell, door: Cell) -> Vec<Cell> {
        let gadget = self
            .layout
            .variables
            .iter()
            .position(|g| start.col > g.col && start.col <= g.exit_col())
            .expect("literal start lies in a gadget");
        let g = &self.layout.variables[gadget];
        let mut path: Vec<Cell> = (start.col..=g.exit_col()).map(|c| Cell::new(start.row, c)).collect();
        path.push(g.exit());
        self.extend_from_exit(gadget, &mut path);
        self.bottom_to(door.col, &mut path);
        path.push(door);
        path
    }

    fn clause_path(&self, clause: usize, door_slot: usize) -> Vec<Cell> {
        let start = self.layout.room_cell(clause);
        let mut path: Vec<Cell> = (start.col..self.layout.num_clauses).map(|c| Cell::new(1, c)).collect();
        let first = &self.layout.variables[0];
        path.extend(first.traversal(self.runs[0]));
        self.extend_from_exit(0, &mut path);
        let gadget = self.layout.clauses[clause];
        let door = gadget.door(door_slot);
        self.bottom_to(door.col, &mut path);
        path.push(door);
        path.extend((door.col..=gadget.target().col).map(|c| Cell::new(0, c)));
        path
    }
}

/// Literal agents whose literal has the given truth value under `a`, in
/// descending gadget order and descending start column.
fn literal_stage(inst: &Instance, layout: &Layout, a: &Assignment, truth: bool) -> Vec<usize> {
    let mut ids: Vec<(usize, usize, usize)> = inst
        .agents()
        .iter()
        .filter_map(|ag| {
            let lit = ag.kind.literal()?;
            (lit.holds(a) == truth).then(|| (layout.gadget_index(lit.var).expect("gadget"), ag.start.col, ag.id))
        })
        .collect();
    ids.sort_unstable_by_key(|&(g, col, _)| std::cmp::Reverse((g, col)));
    ids.into_iter().map(|(_, _, id)| id).collect()
}

fn checked_formula(inst: &Instance, layout: &Layout) -> Result<Formula, WitnessError> {
    Ok(layout.check_instance(inst)?)
}

/// Sequential plan of cost d* from a satisfying assignment; monotone for the
/// monotone variant.
pub fn synth_optimal_plan(inst: &Instance, layout: &Layout, a: &Assignment) -> Result<Plan, WitnessError> {
    let f = checked_formula(inst, layout)?;
    if !f.eval(a).map_err(|_| WitnessError::NotSatisfying)? {
        return Err(WitnessError::NotSatisfying);
    }
    let runs = assignment_runs(layout, a);
    let router = Router { layout, runs: runs.clone() };
    let mut script = StagedScript::new();
    let blockers: Vec<(usize, usize)> = inst
        .agents()
        .iter()
        .filter_map(|ag| match ag.kind {
            AgentKind::Blocker { var } => Some((layout.gadget_index(var).expect("gadget"), ag.id)),
            _ => None,
        })
        .collect();

    // blockers step aside onto the corner off the assignment path
    for &(gi, id) in &blockers {
        let g = &layout.variables[gi];
        script.push(id, vec![g.entrance(), g.stop(runs[gi].opposite())]);
    }
    for id in literal_stage(inst, layout, a, false) {
        let ag = &inst.agents()[id];
        script.push(id, router.literal_path(ag.start, ag.target));
    }
    for (j, clause) in f.clauses().iter().enumerate() {
        let slot = clause.literals().iter().position(|l| l.holds(a)).expect("satisfied clause");
        let id = inst.agents().iter().position(|ag| ag.kind == AgentKind::Clause { clause: j }).expect("clause agent");
        script.push(id, router.clause_path(j, slot));
    }
    for id in literal_stage(inst, layout, a, true) {
        let ag = &inst.agents()[id];
        script.push(id, router.literal_path(ag.start, ag.target));
    }
    for &(gi, id) in &blockers {
        let g = &layout.variables[gi];
        let run = runs[gi].opposite();
        let mut path = vec![g.stop(run)];
        path.extend(g.run_cells(run));
        path.push(g.exit());
        script.push(id, path);
    }
    Ok(script.to_plan(inst)?)
}

/// A valid monotone plan for any monotone-variant instance, satisfiable or
/// not. Literal agents leave gadget by gadget from the right (top run right
/// to left, then bottom run); clause agents are dispatched in order as soon
/// as any route to their target is free, taking the shortest free route.
pub fn synth_feasible_monotone(inst: &Instance, layout: &Layout) -> Result<Plan, WitnessError> {
    checked_formula(inst, layout)?;
    if layout.variant != Variant::Monotone {
        return Err(WitnessError::WrongVariant { expected: Variant::Monotone });
    }
    let mut order: Vec<usize> = Vec::new();
    for g in layout.variables.iter().rev() {
        for run in [Run::Top, Run::Bottom] {
            let mut on_run: Vec<(usize, usize)> = inst
                .agents()
                .iter()
                .filter(|ag| ag.start.row == run.row() && ag.start.col > g.col && ag.start.col <= g.exit_col())
                .map(|ag| (ag.start.col, ag.id))
                .collect();
            on_run.sort_unstable_by(|x, y| y.cmp(x));
            order.extend(on_run.into_iter().map(|(_, id)| id));
        }
    }
    let mut clause_queue: Vec<usize> = (0..layout.num_clauses)
        .map(|j| inst.agents().iter().position(|ag| ag.kind == AgentKind::Clause { clause: j }).expect("clause agent"))
        .collect();
    clause_queue.reverse();

    let mut occupied: HashSet<Cell> = inst.agents().iter().map(|ag| ag.start).collect();
    let mut script = StagedScript::new();
    let mut move_agent = |id: usize, occupied: &mut HashSet<Cell>, script: &mut StagedScript| -> bool {
        let ag = &inst.agents()[id];
        match shortest_path_avoiding(inst.map(), ag.start, ag.target, |c| occupied.contains(&c)) {
            Some(path) => {
                occupied.remove(&ag.start);
                occupied.insert(ag.target);
                script.push(id, path);
                true
            }
            None => false,
        }
    };
    let dispatch_clauses = |occupied: &mut HashSet<Cell>, script: &mut StagedScript, queue: &mut Vec<usize>, mv: &mut dyn FnMut(usize, &mut HashSet<Cell>, &mut StagedScript) -> bool| {
        while let Some(&id) = queue.last() {
            if !mv(id, occupied, script) {
                break;
            }
            queue.pop();
        }
    };
    dispatch_clauses(&mut occupied, &mut script, &mut clause_queue, &mut move_agent);
    for id in order {
        // literal agents take their run, so route them with that run forced
        let ag = &inst.agents()[id];
        let path = Router { layout, runs: vec![Run::Top; layout.variables.len()] }.literal_path(ag.start, ag.target);
        if path.iter().skip(1).any(|c| occupied.contains(c)) {
            return Err(WitnessError::Stuck { agent: id });
        }
        occupied.remove(&ag.start);
        occupied.insert(ag.target);
        script.push(id, path);
        dispatch_clauses(&mut occupied, &mut script, &mut clause_queue, &mut move_agent);
    }
    if let Some(&id) = clause_queue.last() {
        return Err(WitnessError::Stuck { agent: id });
    }
    Ok(script.to_plan(inst)?)
}

fn require_optimal(inst: &Instance, plan: &Plan, mode: MotionMode) -> Result<crate::validator::ValidationReport, WitnessError> {
    let report = validate(inst, plan, MotionMode::Parallel)?;
    if !report.collision_free() {
        return Err(WitnessError::InvalidPlan(report.result_line()));
    }
    let dstar = report.dstar.ok_or_else(|| WitnessError::InvalidPlan("d* undefined".into()))?;
    if mode == MotionMode::Monotone && !report.is_monotone {
        return Err(WitnessError::NotMonotone);
    }
    if report.cost != dstar {
        return Err(WitnessError::NotOptimal { cost: report.cost, dstar });
    }
    Ok(report)
}

/// Decodes a monotone cost-d* plan.
///
/// Literal agents whose first move comes after the last clause agent's last
/// move make their literal true. A variable without such an agent takes the
/// polarity of its literal agent that moves last; variables absent from the
/// formula are set true.
pub fn extract_assignment_monotone(inst: &Instance, layout: &Layout, plan: &Plan) -> Result<Assignment, WitnessError> {
    checked_formula(inst, layout)?;
    if layout.variant != Variant::Monotone {
        return Err(WitnessError::WrongVariant { expected: Variant::Monotone });
    }
    let report = require_optimal(inst, plan, MotionMode::Monotone)?;
    let intervals = &report.active_intervals;
    let last_clause_move = inst
        .agents()
        .iter()
        .filter(|ag| ag.kind.is_clause())
        .filter_map(|ag| intervals[ag.id].map(|(_, end)| end))
        .max()
        .unwrap_or(0);

    let mut a = Assignment::all(layout.num_vars, true);
    let mut forced: Vec<Option<bool>> = vec![None; layout.num_vars as usize + 1];
    let mut last_mover: Vec<Option<(usize, bool)>> = vec![None; layout.num_vars as usize + 1];
    for ag in inst.agents() {
        let Some(lit) = ag.kind.literal() else { continue };
        let Some((first, _)) = intervals[ag.id] else { continue };
        let v = lit.var as usize;
        if first >= last_clause_move {
            match forced[v] {
                Some(p) if p != lit.positive => return Err(WitnessError::AmbiguousWitness { var: lit.var }),
                _ => forced[v] = Some(lit.positive),
            }
        }
        if last_mover[v].is_none_or(|(t, _)| first > t) {
            last_mover[v] = Some((first, lit.positive));
        }
    }
    for var in 1..=layout.num_vars {
        let v = var as usize;
        if let Some(value) = forced[v].or(last_mover[v].map(|(_, p)| p)) {
            a.set(var, value);
        }
    }
    Ok(a)
}

/// Decodes a cost-d* plan of the general variant from the run the clause
/// agents take through each gadget: the top run means false.
pub fn extract_assignment_general(inst: &Instance, layout: &Layout, plan: &Plan) -> Result<Assignment, WitnessError> {
    checked_formula(inst, layout)?;
    if layout.variant != Variant::General {
        return Err(WitnessError::WrongVariant { expected: Variant::General });
    }
    require_optimal(inst, plan, MotionMode::Parallel)?;
    let mut a = Assignment::all(layout.num_vars, true);
    let clause_agents: Vec<usize> = inst.agents().iter().filter(|ag| ag.kind.is_clause()).map(|ag| ag.id).collect();
    for g in &layout.variables {
        let mut value: Option<bool> = None;
        for &id in &clause_agents {
            let path = plan.path(id);
            let top = path.contains(&g.first_run_cell(Run::Top));
            let bottom = path.contains(&g.first_run_cell(Run::Bottom));
            let this = match (top, bottom) {
                (true, false) => false,
                (false, true) => true,
                _ => return Err(WitnessError::IncompleteTraversal { agent: id, var: g.var }),
            };
            match value {
                Some(v) if v != this => return Err(WitnessError::InconsistentTraversal { var: g.var }),
                _ => value = Some(this),
            }
        }
        if let Some(v) = value {
            a.set(g.var, v);
        }
    }
    Ok(a)
}

/// Per-agent BFS distances, for optimality checks of individual paths.
pub fn individual_distances(inst: &Instance) -> Vec<Option<u32>> {
    inst.agents()
        .iter()
        .map(|ag| bfs_distances(inst.map(), ag.start).ok().and_then(|d| d.get(ag.target)))
        .collect()
}
