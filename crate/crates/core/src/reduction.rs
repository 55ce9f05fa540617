//! Compiles a formula into a three-row grid MAPF instance.
//!
//! Columns from left to right: the clause agents' room, one variable gadget
//! per occurring variable (ordered by first occurrence), a transition shaft
//! down to the bottom row, and one clause gadget per clause.
//!
//! A variable gadget at column `a` with interior width `w`:
//!
//! ```text
//!   col:  a  a+1 ... a+w+1  a+w+2
//!   row0  s   +  ...   +      @      top run (positive literal agents)
//!   row1  E   @  ...   @  X   .      entrance E, exit X, separator
//!   row2  s   -  ...   -      @      bottom run (negative literal agents)
//! ```
//!
//! A clause gadget at column `g` with `k` literals is a fully open
//! `3 x (k+1)` block: doors on row 1 at `g..g+k-1`, an empty column at
//! `g+k`, the clause target at `(0, g+k-1)`, followed by a separator column
//! open only on row 2.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::formula::{Clause, Formula, FormulaError, Literal};
use crate::gridmap::{bfs_distances, Cell, Direction, GridError, GridMap};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReductionError {
    #[error("agent {agent} cannot reach its target")]
    UnreachableTarget { agent: usize },
    #[error("bad agents file line {line}: {msg}")]
    BadAgents { line: usize, msg: String },
    #[error("bad layout file line {line}: {msg}")]
    BadLayout { line: usize, msg: String },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("layout does not describe this instance: {0}")]
    ForeignInstance(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Literal and clause agents only.
    Monotone,
    /// Adds one blocker agent per variable gadget.
    General,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Monotone => "monotone",
            Variant::General => "general",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "monotone" => Ok(Variant::Monotone),
            "general" => Ok(Variant::General),
            other => Err(format!("unknown variant {other:?}")),
        }
    }
}

/// Which of the two runs of a variable gadget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Run {
    Top,
    Bottom,
}

impl Run {
    pub fn row(self) -> usize {
        match self {
            Run::Top => 0,
            Run::Bottom => 2,
        }
    }

    pub fn opposite(self) -> Run {
        match self {
            Run::Top => Run::Bottom,
            Run::Bottom => Run::Top,
        }
    }

    /// Positive literal agents start on the top run.
    pub fn holding(positive: bool) -> Run {
        if positive {
            Run::Top
        } else {
            Run::Bottom
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentKind {
    /// Occurrence of a literal: clause index (0-based), slot in the clause,
    /// and the 1-based occurrence count of this signed literal in clause order.
    Literal { clause: usize, slot: usize, var: u32, positive: bool, occurrence: usize },
    Clause { clause: usize },
    Blocker { var: u32 },
}

impl AgentKind {
    pub fn literal(&self) -> Option<Literal> {
        match *self {
            AgentKind::Literal { var, positive, .. } => Some(Literal::new(var, positive)),
            _ => None,
        }
    }

    pub fn is_clause(&self) -> bool {
        matches!(self, AgentKind::Clause { .. })
    }

    pub fn is_blocker(&self) -> bool {
        matches!(self, AgentKind::Blocker { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Agent {
    pub id: usize,
    pub kind: AgentKind,
    pub start: Cell,
    pub target: Cell,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    map: GridMap,
    agents: Vec<Agent>,
}

impl Instance {
    /// Checks ids, endpoint passability and distinctness of starts and of
    /// targets.
    pub fn new(map: GridMap, agents: Vec<Agent>) -> Result<Self, ReductionError> {
        let mut starts = HashMap::new();
        let mut targets = HashMap::new();
        for (i, a) in agents.iter().enumerate() {
            let bad = |msg: String| Err(ReductionError::InvalidInstance(msg));
            if a.id != i {
                return bad(format!("agent ids must be 0..n in order, got {} at position {i}", a.id));
            }
            for c in [a.start, a.target] {
                if !map.is_passable(c) {
                    return bad(format!("agent {i} endpoint {c} is not passable"));
                }
            }
            if let Some(other) = starts.insert(a.start, i) {
                return bad(format!("agents {other} and {i} share start {}", a.start));
            }
            if let Some(other) = targets.insert(a.target, i) {
                return bad(format!("agents {other} and {i} share target {}", a.target));
            }
        }
        Ok(Instance { map, agents })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    /// Per-agent BFS distance from start to target.
    pub fn agent_distances(&self) -> Result<Vec<u32>, ReductionError> {
        self.agents
            .iter()
            .map(|a| {
                bfs_distances(&self.map, a.start)?
                    .get(a.target)
                    .ok_or(ReductionError::UnreachableTarget { agent: a.id })
            })
            .collect()
    }

    /// Agents file: `agents <n>` then
    /// `<id> <kind> <var> <occ> <clause> <slot> <sr> <sc> <gr> <gc>`.
    pub fn agents_text(&self) -> String {
        let mut out = format!("agents {}\n", self.agents.len());
        for a in &self.agents {
            let (kind, var, occ, clause, slot) = match a.kind {
                AgentKind::Literal { clause, slot, var, positive, occurrence } => (
                    if positive { "litpos" } else { "litneg" },
                    var as i64,
                    occurrence as i64,
                    clause as i64,
                    slot as i64,
                ),
                AgentKind::Clause { clause } => ("clause", -1, -1, clause as i64, -1),
                AgentKind::Blocker { var } => ("blocker", var as i64, -1, -1, -1),
            };
            out.push_str(&format!(
                "{} {kind} {var} {occ} {clause} {slot} {} {} {} {}\n",
                a.id, a.start.row, a.start.col, a.target.row, a.target.col
            ));
        }
        out
    }

    pub fn parse_agents(map: GridMap, text: &str) -> Result<Self, ReductionError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let bad = |line: usize, msg: &str| ReductionError::BadAgents { line: line + 1, msg: msg.to_string() };
        let (hl, header) = lines.next().ok_or_else(|| bad(0, "empty file"))?;
        let n: usize = header
            .strip_prefix("agents ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad(hl, "expected `agents <n>`"))?;
        let mut agents = Vec::with_capacity(n);
        for (ln, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 10 {
                return Err(bad(ln, "expected 10 fields"));
            }
            let num = |i: usize| -> Result<i64, ReductionError> { f[i].parse().map_err(|_| bad(ln, "bad integer")) };
            let unsigned = |i: usize| -> Result<usize, ReductionError> {
                usize::try_from(num(i)?).map_err(|_| bad(ln, "negative value where a number is required"))
            };
            let id = unsigned(0)?;
            let kind = match f[1] {
                "litpos" | "litneg" => AgentKind::Literal {
                    clause: unsigned(4)?,
                    slot: unsigned(5)?,
                    var: u32::try_from(num(2)?).ok().filter(|&v| v >= 1).ok_or_else(|| bad(ln, "bad var"))?,
                    positive: f[1] == "litpos",
                    occurrence: unsigned(3)?,
                },
                "clause" => AgentKind::Clause { clause: unsigned(4)? },
                "blocker" => AgentKind::Blocker {
                    var: u32::try_from(num(2)?).ok().filter(|&v| v >= 1).ok_or_else(|| bad(ln, "bad var"))?,
                },
                _ => return Err(bad(ln, "unknown agent kind")),
            };
            let start = Cell::new(unsigned(6)?, unsigned(7)?);
            let target = Cell::new(unsigned(8)?, unsigned(9)?);
            agents.push(Agent { id, kind, start, target });
        }
        if agents.len() != n {
            return Err(bad(hl, &format!("header says {n} agents, found {}", agents.len())));
        }
        Instance::new(map, agents)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VariableGadget {
    pub var: u32,
    /// Column of the entrance.
    pub col: usize,
    /// Interior width: `max(positives, negatives, 1) + 1`.
    pub width: usize,
    pub positives: usize,
    pub negatives: usize,
}

impl VariableGadget {
    pub fn entrance(&self) -> Cell {
        Cell::new(1, self.col)
    }

    pub fn exit(&self) -> Cell {
        Cell::new(1, self.exit_col())
    }

    pub fn exit_col(&self) -> usize {
        self.col + self.width + 1
    }

    pub fn separator_col(&self) -> usize {
        self.col + self.width + 2
    }

    /// Corner cell next to the entrance on the given run.
    pub fn stop(&self, run: Run) -> Cell {
        Cell::new(run.row(), self.col)
    }

    /// First run cell right of the corner; every traversal of `run` visits it.
    pub fn first_run_cell(&self, run: Run) -> Cell {
        Cell::new(run.row(), self.col + 1)
    }

    pub fn run_cells(&self, run: Run) -> impl Iterator<Item = Cell> {
        let row = run.row();
        (self.col + 1..=self.exit_col()).map(move |c| Cell::new(row, c))
    }

    /// Start cell of the `occurrence`-th (1-based) literal agent on `run`.
    pub fn start_cell(&self, run: Run, occurrence: usize) -> Cell {
        Cell::new(run.row(), self.col + occurrence)
    }

    /// Entrance to exit along `run`, both inclusive; length `width + 3`.
    pub fn traversal(&self, run: Run) -> Vec<Cell> {
        let mut path = vec![self.entrance(), self.stop(run)];
        path.extend(self.run_cells(run));
        path.push(self.exit());
        path
    }

    pub fn traversal_len(&self) -> usize {
        self.width + 3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClauseGadget {
    pub col: usize,
    /// Number of literals (= doors).
    pub width: usize,
}

impl ClauseGadget {
    pub fn door(&self, slot: usize) -> Cell {
        assert!(slot < self.width);
        Cell::new(1, self.col + slot)
    }

    pub fn doors(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.width).map(|m| self.door(m))
    }

    pub fn target(&self) -> Cell {
        Cell::new(0, self.col + self.width - 1)
    }

    pub fn empty_col(&self) -> usize {
        self.col + self.width
    }

    pub fn separator_col(&self) -> usize {
        self.col + self.width + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub variant: Variant,
    pub num_vars: u32,
    /// Room length, equal to the number of clauses.
    pub num_clauses: usize,
    pub variables: Vec<VariableGadget>,
    pub clauses: Vec<ClauseGadget>,
    /// Column with open middle and bottom cells after the last variable gadget.
    pub shaft_col: usize,
    pub width: usize,
}

impl Layout {
    pub const HEIGHT: usize = 3;

    /// Start of the clause agent of clause `j` (0-based); clause 0 is rightmost.
    pub fn room_cell(&self, clause: usize) -> Cell {
        Cell::new(1, self.num_clauses - 1 - clause)
    }

    pub fn gadget_index(&self, var: u32) -> Option<usize> {
        self.variables.iter().position(|g| g.var == var)
    }

    /// Cells from the shaft down to the first clause gadget's bottom row.
    pub fn shaft_path(&self) -> [Cell; 3] {
        [Cell::new(1, self.shaft_col), Cell::new(2, self.shaft_col), Cell::new(2, self.shaft_col + 1)]
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "kind=layout variant={} vars={} clauses={} height={} width={} room=1,0..1,{} shaft={}\n",
            self.variant,
            self.num_vars,
            self.num_clauses,
            Self::HEIGHT,
            self.width,
            self.num_clauses - 1,
            self.shaft_col
        );
        for (i, g) in self.variables.iter().enumerate() {
            out.push_str(&format!(
                "kind=variable gadget={i} var={} col={} w={} pos={} neg={} entrance={} exit={} stop_top={} stop_bottom={} separator={}\n",
                g.var,
                g.col,
                g.width,
                g.positives,
                g.negatives,
                g.entrance(),
                g.exit(),
                g.stop(Run::Top),
                g.stop(Run::Bottom),
                g.separator_col()
            ));
        }
        for (j, c) in self.clauses.iter().enumerate() {
            let doors: Vec<String> = c.doors().map(|d| d.to_string()).collect();
            out.push_str(&format!(
                "kind=clause clause={j} col={} k={} doors={} target={} empty={} separator={}\n",
                c.col,
                c.width,
                doors.join(";"),
                c.target(),
                c.empty_col(),
                c.separator_col()
            ));
        }
        out
    }

    /// Parses the layout file. Derived fields are recomputed and must match.
    pub fn parse(text: &str) -> Result<Self, ReductionError> {
        let bad = |line: usize, msg: &str| ReductionError::BadLayout { line: line + 1, msg: msg.to_string() };
        let mut layout: Option<Layout> = None;
        for (ln, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut kv = HashMap::new();
            for tok in line.split_whitespace() {
                let (k, v) = tok.split_once('=').ok_or_else(|| bad(ln, "expected key=value"))?;
                kv.insert(k, v);
            }
            let get = |k: &str| kv.get(k).copied().ok_or_else(|| bad(ln, &format!("missing key {k}")));
            let num = |k: &str| -> Result<usize, ReductionError> {
                get(k)?.parse().map_err(|_| bad(ln, &format!("bad number for {k}")))
            };
            match get("kind")? {
                "layout" => {
                    if layout.is_some() {
                        return Err(bad(ln, "duplicate layout record"));
                    }
                    let variant = get("variant")?.parse().map_err(|e: String| bad(ln, &e))?;
                    layout = Some(Layout {
                        variant,
                        num_vars: num("vars")? as u32,
                        num_clauses: num("clauses")?,
                        variables: Vec::new(),
                        clauses: Vec::new(),
                        shaft_col: num("shaft")?,
                        width: num("width")?,
                    });
                }
                "variable" => {
                    let l = layout.as_mut().ok_or_else(|| bad(ln, "variable record before layout record"))?;
                    l.variables.push(VariableGadget {
                        var: num("var")? as u32,
                        col: num("col")?,
                        width: num("w")?,
                        positives: num("pos")?,
                        negatives: num("neg")?,
                    });
                }
                "clause" => {
                    let l = layout.as_mut().ok_or_else(|| bad(ln, "clause record before layout record"))?;
                    l.clauses.push(ClauseGadget { col: num("col")?, width: num("k")? });
                }
                other => return Err(bad(ln, &format!("unknown record kind {other}"))),
            }
        }
        let layout = layout.ok_or_else(|| bad(0, "missing layout record"))?;
        let normalized = |s: &str| s.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join("\n");
        if normalized(&layout.to_text()) != normalized(text) {
            return Err(bad(0, "derived fields are inconsistent with gadget columns"));
        }
        Ok(layout)
    }

    /// Rebuilds the formula encoded by the literal agents of `inst`.
    pub fn recover_formula(&self, inst: &Instance) -> Result<Formula, ReductionError> {
        let foreign = |m: String| ReductionError::ForeignInstance(m);
        let mut slots: Vec<Vec<Option<Literal>>> = self.clauses.iter().map(|c| vec![None; c.width]).collect();
        for a in inst.agents() {
            if let AgentKind::Literal { clause, slot, var, positive, .. } = a.kind {
                let cell = slots
                    .get_mut(clause)
                    .and_then(|s| s.get_mut(slot))
                    .ok_or_else(|| foreign(format!("agent {} refers to missing clause slot", a.id)))?;
                *cell = Some(Literal::new(var, positive));
            }
        }
        let clauses = slots
            .into_iter()
            .enumerate()
            .map(|(j, s)| {
                let lits = s.into_iter().collect::<Option<Vec<_>>>().ok_or_else(|| foreign(format!("clause {j} has an empty slot")))?;
                Ok(Clause::new(lits)?)
            })
            .collect::<Result<Vec<_>, ReductionError>>()?;
        Ok(Formula::new(self.num_vars, clauses)?)
    }

    /// Verifies that `inst` is exactly what this layout's formula compiles to.
    pub fn check_instance(&self, inst: &Instance) -> Result<Formula, ReductionError> {
        let f = self.recover_formula(inst)?;
        let (expected, layout) = build(&f, self.variant);
        if &layout != self {
            return Err(ReductionError::ForeignInstance("layout differs from the recovered formula's layout".into()));
        }
        if expected != *inst {
            return Err(ReductionError::ForeignInstance("instance differs from the compiled instance".into()));
        }
        Ok(f)
    }
}

pub fn build_monotone(f: &Formula) -> (Instance, Layout) {
    build(f, Variant::Monotone)
}

pub fn build_general(f: &Formula) -> (Instance, Layout) {
    build(f, Variant::General)
}

pub fn build(f: &Formula, variant: Variant) -> (Instance, Layout) {
    let m = f.num_clauses();
    let mut counts: HashMap<u32, (usize, usize)> = HashMap::new();
    for lit in f.clauses().iter().flat_map(|c| c.literals()) {
        let e = counts.entry(lit.var).or_default();
        if lit.positive {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }

    let mut col = m;
    let mut variables = Vec::new();
    for var in f.occurring_vars() {
        let (p, q) = counts[&var];
        let width = p.max(q).max(1) + 1;
        variables.push(VariableGadget { var, col, width, positives: p, negatives: q });
        col += width + 3;
    }
    let shaft_col = col;
    let mut col = shaft_col + 2;
    let mut clauses = Vec::new();
    for clause in f.clauses() {
        clauses.push(ClauseGadget { col, width: clause.len() });
        col += clause.len() + 2;
    }
    let layout = Layout { variant, num_vars: f.num_vars(), num_clauses: m, variables, clauses, shaft_col, width: col };

    let mut map = GridMap::blocked(Layout::HEIGHT, layout.width);
    for c in 0..m {
        map.set_passable(Cell::new(1, c), true);
    }
    for g in &layout.variables {
        for cell in g.traversal(Run::Top).into_iter().chain(g.traversal(Run::Bottom)) {
            map.set_passable(cell, true);
        }
        map.set_passable(Cell::new(1, g.separator_col()), true);
    }
    for cell in layout.shaft_path() {
        map.set_passable(cell, true);
    }
    for c in &layout.clauses {
        for col in c.col..=c.empty_col() {
            for row in 0..Layout::HEIGHT {
                map.set_passable(Cell::new(row, col), true);
            }
        }
        map.set_passable(Cell::new(2, c.separator_col()), true);
    }

    let mut agents = Vec::new();
    let mut occurrences: HashMap<Literal, usize> = HashMap::new();
    for (j, clause) in f.clauses().iter().enumerate() {
        for (slot, &lit) in clause.literals().iter().enumerate() {
            let occ = occurrences.entry(lit).or_insert(0);
            *occ += 1;
            let g = &layout.variables[layout.gadget_index(lit.var).expect("occurring variable")];
            agents.push(Agent {
                id: agents.len(),
                kind: AgentKind::Literal { clause: j, slot, var: lit.var, positive: lit.positive, occurrence: *occ },
                start: g.start_cell(Run::holding(lit.positive), *occ),
                target: layout.clauses[j].door(slot),
            });
        }
    }
    for j in 0..m {
        agents.push(Agent {
            id: agents.len(),
            kind: AgentKind::Clause { clause: j },
            start: layout.room_cell(j),
            target: layout.clauses[j].target(),
        });
    }
    if variant == Variant::General {
        for g in &layout.variables {
            agents.push(Agent { id: agents.len(), kind: AgentKind::Blocker { var: g.var }, start: g.entrance(), target: g.exit() });
        }
    }
    let inst = Instance::new(map, agents).expect("construction yields a valid instance");
    (inst, layout)
}

/// Sum of individual shortest-path distances.
pub fn d_star(inst: &Instance) -> Result<u64, ReductionError> {
    Ok(inst.agent_distances()?.into_iter().map(u64::from).sum())
}

/// Number of (agent, move) pairs on the agents' shortest-path DAGs that
/// go left.
pub fn count_leftward_dag_moves(inst: &Instance) -> Result<usize, ReductionError> {
    let map = inst.map();
    let mut count = 0;
    for a in inst.agents() {
        let from_s = bfs_distances(map, a.start)?;
        let to_t = bfs_distances(map, a.target)?;
        let total = to_t.get(a.start).ok_or(ReductionError::UnreachableTarget { agent: a.id })?;
        for u in map.passable_cells() {
            let (Some(du), Some(tu)) = (from_s.get(u), to_t.get(u)) else { continue };
            if du + tu != total || tu == 0 {
                continue;
            }
            count += map
                .neighbors(u)
                .filter(|&v| to_t.get(v) == Some(tu - 1) && from_s.get(v) == Some(du + 1))
                .filter(|&v| Direction::between(u, v) == Some(Direction::Left))
                .count();
        }
    }
    Ok(count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeStats {
    pub agents: usize,
    pub open_cells: usize,
    pub width: usize,
    pub height: usize,
}

pub fn size_stats(f: &Formula, variant: Variant) -> SizeStats {
    let (inst, layout) = build(f, variant);
    SizeStats {
        agents: inst.num_agents(),
        open_cells: inst.map().open_cells(),
        width: layout.width,
        height: inst.map().height(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::gen;
    use crate::gridmap::{constrained_shortest_len, Direction};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn count_shortest_paths(map: &GridMap, s: Cell, t: Cell) -> u64 {
        let ds = bfs_distances(map, s).unwrap();
        let total = ds.get(t).unwrap();
        let dt = bfs_distances(map, t).unwrap();
        let mut by_dist: Vec<Cell> = map
            .passable_cells()
            .filter(|&c| matches!((ds.get(c), dt.get(c)), (Some(a), Some(b)) if a + b == total))
            .collect();
        by_dist.sort_by_key(|&c| ds.get(c));
        let mut ways: HashMap<Cell, u64> = HashMap::from([(s, 1)]);
        for c in by_dist {
            let w = ways.get(&c).copied().unwrap_or(0);
            for n in map.neighbors(c) {
                if ds.get(n) == Some(ds.get(c).unwrap() + 1) && dt.get(n).map(|x| x + ds.get(n).unwrap()) == Some(total) {
                    *ways.entry(n).or_insert(0) += w;
                }
            }
        }
        ways[&t]
    }

    #[test]
    fn figure_formula_rosters() {
        let f = gen::figure_formula();
        let (m, _) = build_monotone(&f);
        assert_eq!(m.num_agents(), 12);
        assert_eq!(m.map().height(), 3);
        assert_eq!(m.agents().iter().filter(|a| a.kind.is_clause()).count(), 3);
        let (g, _) = build_general(&f);
        assert_eq!(g.num_agents(), 15);
        assert_eq!(g.agents().iter().filter(|a| a.kind.is_blocker()).count(), 3);
    }

    #[test]
    fn unit_and_pair_rosters() {
        let unit = Formula::from_ints(&[&[1]]).unwrap();
        let (inst, _) = build_monotone(&unit);
        assert_eq!(inst.num_agents(), 2);
        assert_eq!(inst.map().height(), 3);
        let (inst, _) = build_general(&gen::unsat_pair());
        assert_eq!(inst.num_agents(), 9);
    }

    #[test]
    fn roster_order_and_occurrences() {
        let f = gen::figure_formula();
        let (inst, layout) = build_general(&f);
        let kinds: Vec<_> = inst.agents().iter().map(|a| a.kind).collect();
        assert!(matches!(kinds[0], AgentKind::Literal { clause: 0, slot: 0, var: 1, positive: false, occurrence: 1 }));
        assert!(matches!(kinds[4], AgentKind::Literal { clause: 1, slot: 1, var: 2, positive: false, occurrence: 2 }));
        assert!(matches!(kinds[9], AgentKind::Clause { clause: 0 }));
        assert!(matches!(kinds[14], AgentKind::Blocker { var: 3 }));
        assert_eq!(inst.agents()[9].start, Cell::new(1, 2));
        assert_eq!(inst.agents()[11].start, Cell::new(1, 0));
        assert_eq!(layout.variables[0].col, 3);
    }

    #[test]
    fn blocker_distance_is_width_plus_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let f = gen::random_formula(&mut rng, 4, 5, false);
            let (inst, layout) = build_general(&f);
            let dist = inst.agent_distances().unwrap();
            for a in inst.agents() {
                if let AgentKind::Blocker { var } = a.kind {
                    let g = layout.variables[layout.gadget_index(var).unwrap()];
                    assert_eq!(dist[a.id] as usize, g.width + 3);
                    assert_eq!(count_shortest_paths(inst.map(), g.entrance(), g.exit()), 2);
                }
            }
        }
    }

    #[test]
    fn d_star_examples() {
        let map = GridMap::open(1, 2);
        let agent = Agent { id: 0, kind: AgentKind::Clause { clause: 0 }, start: Cell::new(0, 0), target: Cell::new(0, 1) };
        let inst = Instance::new(map, vec![agent]).unwrap();
        assert_eq!(d_star(&inst).unwrap(), 1);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let f = gen::random_formula(&mut rng, 5, 6, false);
            let (mono, layout) = build_monotone(&f);
            let (general, _) = build_general(&f);
            let extra: u64 = layout.variables.iter().map(|g| (g.width + 3) as u64).sum();
            assert_eq!(d_star(&general).unwrap(), d_star(&mono).unwrap() + extra);
        }
    }

    #[test]
    fn d_star_unreachable() {
        let map = crate::gridmap::read_map("type octile\nheight 1\nwidth 3\nmap\n.@.\n").unwrap();
        let agent = Agent { id: 0, kind: AgentKind::Clause { clause: 0 }, start: Cell::new(0, 0), target: Cell::new(0, 2) };
        let inst = Instance::new(map, vec![agent]).unwrap();
        assert_eq!(d_star(&inst), Err(ReductionError::UnreachableTarget { agent: 0 }));
    }

    #[test]
    fn figure_formula_dstar_golden() {
        // Hand count: literal agents 57 + 70 + 86, clause agents 32 + 38 + 44.
        let f = gen::figure_formula();
        let (m, _) = build_monotone(&f);
        let per_agent = m.agent_distances().unwrap();
        let total: u64 = per_agent.iter().map(|&d| d as u64).sum();
        assert_eq!(d_star(&m).unwrap(), total);
        assert_eq!(total, FIGURE_MONOTONE_DSTAR);
    }

    pub(crate) const FIGURE_MONOTONE_DSTAR: u64 = 327;

    /// Distances read off the geometry: a literal agent climbs to the exit,
    /// dips into every later gadget, drops through the shaft and climbs to
    /// its door; a clause agent dips into every gadget and climbs two rows.
    fn closed_form_dstar(f: &Formula) -> u64 {
        let (inst, layout) = build_monotone(f);
        let k = layout.variables.len() as u64;
        inst.agents()
            .iter()
            .map(|a| {
                let dx = (a.target.col - a.start.col) as u64;
                match a.kind {
                    AgentKind::Literal { var, .. } => {
                        let later = k - 1 - layout.gadget_index(var).unwrap() as u64;
                        dx + 3 + 2 * later
                    }
                    AgentKind::Clause { .. } => dx + 2 * k + 3,
                    AgentKind::Blocker { .. } => unreachable!(),
                }
            })
            .sum()
    }

    #[test]
    fn dstar_matches_closed_form() {
        assert_eq!(closed_form_dstar(&gen::figure_formula()), FIGURE_MONOTONE_DSTAR);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..60 {
            let f = gen::random_formula(&mut rng, 5, 7, false);
            let (inst, _) = build_monotone(&f);
            assert_eq!(d_star(&inst).unwrap(), closed_form_dstar(&f));
        }
    }

    #[test]
    fn clause_gadget_doors_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let f = gen::random_formula(&mut rng, 4, 4, false);
            let (inst, layout) = build_monotone(&f);
            let dist = inst.agent_distances().unwrap();
            for a in inst.agents() {
                let AgentKind::Clause { clause } = a.kind else { continue };
                let gadget = layout.clauses[clause];
                let doors: Vec<Cell> = gadget.doors().collect();
                for m in 0..doors.len() {
                    let blocked: HashSet<Cell> = doors.iter().enumerate().filter(|&(i, _)| i != m).map(|(_, &d)| d).collect();
                    let len = constrained_shortest_len(inst.map(), &blocked, a.start, a.target).unwrap();
                    assert_eq!(len, Some(dist[a.id]));
                }
                let all: HashSet<Cell> = doors.into_iter().collect();
                let len = constrained_shortest_len(inst.map(), &all, a.start, a.target).unwrap();
                assert_eq!(len, Some(dist[a.id] + 2));
            }
        }
    }

    #[test]
    fn no_leftward_shortest_moves() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let f = gen::random_formula(&mut rng, 4, 5, false);
            let (inst, _) = build_general(&f);
            assert_eq!(count_leftward_dag_moves(&inst).unwrap(), 0);
            for a in inst.agents() {
                let from_s = bfs_distances(inst.map(), a.start).unwrap();
                let to_t = bfs_distances(inst.map(), a.target).unwrap();
                let total = from_s.get(a.target).unwrap();
                for u in inst.map().passable_cells() {
                    let (Some(du), Some(tu)) = (from_s.get(u), to_t.get(u)) else { continue };
                    if du + tu != total {
                        continue;
                    }
                    for v in inst.map().neighbors(u) {
                        if from_s.get(v) == Some(du + 1) && tu.checked_sub(1).is_some_and(|t| to_t.get(v) == Some(t)) {
                            assert_ne!(Direction::between(u, v), Some(Direction::Left), "agent {} {u}->{v}", a.id);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn starts_and_targets_disjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let f = gen::random_formula(&mut rng, 3, 6, false);
            let (inst, _) = build_general(&f);
            let starts: HashSet<Cell> = inst.agents().iter().map(|a| a.start).collect();
            assert!(inst.agents().iter().all(|a| !starts.contains(&a.target)));
        }
    }

    #[test]
    fn files_roundtrip_and_determinism() {
        let f = gen::figure_formula();
        let (inst, layout) = build_general(&f);
        let (inst2, layout2) = build_general(&f);
        assert_eq!(inst.agents_text(), inst2.agents_text());
        assert_eq!(layout.to_text(), layout2.to_text());

        let parsed = Instance::parse_agents(inst.map().clone(), &inst.agents_text()).unwrap();
        assert_eq!(parsed, inst);
        let parsed_layout = Layout::parse(&layout.to_text()).unwrap();
        assert_eq!(parsed_layout, layout);
        assert_eq!(parsed_layout.check_instance(&parsed).unwrap(), f);

        let (other, _) = build_monotone(&f);
        assert!(matches!(layout.check_instance(&other), Err(ReductionError::ForeignInstance(_))));
    }

    #[test]
    fn layout_parse_rejects_inconsistent_derived_fields() {
        let (_, layout) = build_monotone(&gen::figure_formula());
        let text = layout.to_text().replacen("exit=1,", "exit=2,", 1);
        assert!(matches!(Layout::parse(&text), Err(ReductionError::BadLayout { .. })));
    }

    #[test]
    fn agents_parse_errors() {
        let map = GridMap::open(1, 3);
        assert!(Instance::parse_agents(map.clone(), "agents 1\n0 clause -1 -1 0 -1 0 0 0 1\n").is_ok());
        assert!(matches!(
            Instance::parse_agents(map.clone(), "agents 2\n0 clause -1 -1 0 -1 0 0 0 1\n"),
            Err(ReductionError::BadAgents { .. })
        ));
        assert!(matches!(
            Instance::parse_agents(map.clone(), "agents 1\n0 robot -1 -1 0 -1 0 0 0 1\n"),
            Err(ReductionError::BadAgents { .. })
        ));
        assert!(matches!(
            Instance::parse_agents(map, "agents 2\n0 clause -1 -1 0 -1 0 0 0 1\n1 clause -1 -1 1 -1 0 2 0 1\n"),
            Err(ReductionError::InvalidInstance(_))
        ));
    }
}
