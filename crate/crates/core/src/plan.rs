//! Timed multi-agent plans and single-mover scripts.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::gridmap::Cell;
use crate::reduction::Instance;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("bad plan text at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("episode {episode}: agent {agent} path does not start at its current cell {at}")]
    Discontinuous { episode: usize, agent: usize, at: Cell },
    #[error("episode {episode}: agent {agent} step {from} -> {to} is not a unit move")]
    NotAdjacent { episode: usize, agent: usize, from: Cell, to: Cell },
    #[error("episode {episode}: agent {agent} enters {cell} occupied by agent {other}")]
    Occupied { episode: usize, agent: usize, cell: Cell, other: usize },
    #[error("unknown agent {0}")]
    UnknownAgent(usize),
}

/// `trajectories[id][tau]` is the cell of agent `id` at timestep `tau`,
/// for `tau` in `0..=horizon`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    horizon: usize,
    trajectories: Vec<Vec<Cell>>,
}

impl Plan {
    /// Pads every trajectory by repeating its last cell up to the longest one.
    pub fn from_trajectories(mut trajectories: Vec<Vec<Cell>>) -> Self {
        assert!(trajectories.iter().all(|t| !t.is_empty()), "trajectories need at least the start cell");
        let horizon = trajectories.iter().map(|t| t.len() - 1).max().unwrap_or(0);
        for t in &mut trajectories {
            let last = *t.last().expect("nonempty");
            t.resize(horizon + 1, last);
        }
        Plan { horizon, trajectories }
    }

    /// Trajectories used verbatim; lengths are validated by the validator.
    pub fn from_raw(horizon: usize, trajectories: Vec<Vec<Cell>>) -> Self {
        Plan { horizon, trajectories }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_agents(&self) -> usize {
        self.trajectories.len()
    }

    pub fn trajectory(&self, agent: usize) -> &[Cell] {
        &self.trajectories[agent]
    }

    pub fn trajectories(&self) -> &[Vec<Cell>] {
        &self.trajectories
    }

    pub fn position(&self, agent: usize, tau: usize) -> Cell {
        let t = &self.trajectories[agent];
        t[tau.min(t.len() - 1)]
    }

    /// The agent's path with consecutive repeats collapsed.
    pub fn path(&self, agent: usize) -> Vec<Cell> {
        let mut path: Vec<Cell> = Vec::new();
        for &c in &self.trajectories[agent] {
            if path.last() != Some(&c) {
                path.push(c);
            }
        }
        path
    }

    /// Number of cell-changing steps of one agent.
    pub fn path_len(&self, agent: usize) -> usize {
        self.trajectories[agent].windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Copy with a pure-wait timestep inserted after `tau`.
    pub fn with_wait_after(&self, tau: usize) -> Plan {
        let trajectories = self
            .trajectories
            .iter()
            .map(|t| {
                let mut t = t.clone();
                let at = tau.min(t.len() - 1);
                t.insert(at, t[at]);
                t
            })
            .collect();
        Plan { horizon: self.horizon + 1, trajectories }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("plan T={} n={}\n", self.horizon, self.trajectories.len());
        for (id, t) in self.trajectories.iter().enumerate() {
            out.push_str(&format!("{id}:"));
            for c in t {
                out.push_str(&format!(" {},{}", c.row, c.col));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, PlanError> {
        let bad = |line: usize, msg: &str| PlanError::Parse { line: line + 1, msg: msg.to_string() };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or_else(|| bad(0, "empty plan"))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let field = |p: Option<&&str>, key: &str| -> Result<usize, PlanError> {
            p.and_then(|s| s.strip_prefix(key)).and_then(|v| v.parse().ok()).ok_or_else(|| bad(hl, "expected `plan T=<T> n=<n>`"))
        };
        if parts.first() != Some(&"plan") || parts.len() != 3 {
            return Err(bad(hl, "expected `plan T=<T> n=<n>`"));
        }
        let horizon = field(parts.get(1), "T=")?;
        let n = field(parts.get(2), "n=")?;
        let mut trajectories = Vec::with_capacity(n);
        for (ln, line) in lines {
            let (id, rest) = line.split_once(':').ok_or_else(|| bad(ln, "expected `<id>:`"))?;
            let id: usize = id.trim().parse().map_err(|_| bad(ln, "bad agent id"))?;
            if id != trajectories.len() {
                return Err(bad(ln, "agent lines must be in id order"));
            }
            let cells = rest
                .split_whitespace()
                .map(|pair| {
                    let (r, c) = pair.split_once(',')?;
                    Some(Cell::new(r.parse().ok()?, c.parse().ok()?))
                })
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| bad(ln, "bad cell pair"))?;
            if cells.len() != horizon + 1 {
                return Err(bad(ln, &format!("expected {} cells, found {}", horizon + 1, cells.len())));
            }
            trajectories.push(cells);
        }
        if trajectories.len() != n {
            return Err(bad(hl, &format!("header says {n} agents, found {}", trajectories.len())));
        }
        Ok(Plan { horizon, trajectories })
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// One agent walking a cell path while everyone else waits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    pub agent: usize,
    pub path: Vec<Cell>,
}

/// Ordered single-mover episodes, replayed against live occupancy.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StagedScript {
    pub episodes: Vec<Episode>,
}

impl StagedScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, agent: usize, path: Vec<Cell>) {
        self.episodes.push(Episode { agent, path });
    }

    /// Replays the episodes from the instance's starts, one unit move per
    /// timestep, rejecting moves into occupied cells.
    pub fn to_plan(&self, inst: &Instance) -> Result<Plan, PlanError> {
        let n = inst.num_agents();
        let mut at: Vec<Cell> = inst.agents().iter().map(|a| a.start).collect();
        let mut occupant: HashMap<Cell, usize> = at.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut trajectories: Vec<Vec<Cell>> = at.iter().map(|&c| vec![c]).collect();
        for (e, ep) in self.episodes.iter().enumerate() {
            if ep.agent >= n {
                return Err(PlanError::UnknownAgent(ep.agent));
            }
            if ep.path.first() != Some(&at[ep.agent]) {
                return Err(PlanError::Discontinuous { episode: e, agent: ep.agent, at: at[ep.agent] });
            }
            for w in ep.path.windows(2) {
                let (from, to) = (w[0], w[1]);
                if !from.is_adjacent(to) || !inst.map().is_passable(to) {
                    return Err(PlanError::NotAdjacent { episode: e, agent: ep.agent, from, to });
                }
                if let Some(&other) = occupant.get(&to) {
                    return Err(PlanError::Occupied { episode: e, agent: ep.agent, cell: to, other });
                }
                occupant.remove(&from);
                occupant.insert(to, ep.agent);
                at[ep.agent] = to;
                for (i, t) in trajectories.iter_mut().enumerate() {
                    t.push(at[i]);
                }
            }
        }
        Ok(Plan::from_trajectories(trajectories))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::GridMap;
    use crate::reduction::{Agent, AgentKind};

    fn corridor(n: usize) -> Instance {
        let agents = vec![
            Agent { id: 0, kind: AgentKind::Clause { clause: 0 }, start: Cell::new(0, 1), target: Cell::new(0, n - 1) },
            Agent { id: 1, kind: AgentKind::Clause { clause: 1 }, start: Cell::new(0, 0), target: Cell::new(0, n - 2) },
        ];
        Instance::new(GridMap::open(1, n), agents).unwrap()
    }

    #[test]
    fn script_replay_and_text_roundtrip() {
        let inst = corridor(4);
        let mut script = StagedScript::new();
        script.push(0, vec![Cell::new(0, 1), Cell::new(0, 2), Cell::new(0, 3)]);
        script.push(1, vec![Cell::new(0, 0), Cell::new(0, 1), Cell::new(0, 2)]);
        let plan = script.to_plan(&inst).unwrap();
        assert_eq!(plan.horizon(), 4);
        assert_eq!(plan.path_len(0), 2);
        assert_eq!(plan.path(1).len(), 3);
        let text = plan.to_text();
        assert!(text.starts_with("plan T=4 n=2\n0: 0,1 0,2 0,3 0,3 0,3\n"));
        assert_eq!(Plan::parse(&text).unwrap(), plan);
    }

    #[test]
    fn script_rejects_collisions() {
        let inst = corridor(4);
        let mut script = StagedScript::new();
        script.push(1, vec![Cell::new(0, 0), Cell::new(0, 1)]);
        assert!(matches!(script.to_plan(&inst), Err(PlanError::Occupied { other: 0, .. })));
    }

    #[test]
    fn parse_errors() {
        assert!(Plan::parse("plan T=1 n=1\n0: 0,0\n").is_err());
        assert!(Plan::parse("plan T=0 n=2\n0: 0,0\n").is_err());
        assert!(Plan::parse("plan T=0\n").is_err());
        assert!(Plan::parse("plan T=0 n=1\n0: 0;0\n").is_err());
        assert!(Plan::parse("plan T=0 n=1\n0: 0,0\n").is_ok());
    }

    #[test]
    fn wait_insertion_keeps_paths() {
        let inst = corridor(4);
        let mut script = StagedScript::new();
        script.push(0, vec![Cell::new(0, 1), Cell::new(0, 2)]);
        let plan = script.to_plan(&inst).unwrap();
        let waited = plan.with_wait_after(0);
        assert_eq!(waited.horizon(), plan.horizon() + 1);
        assert_eq!(waited.path(0), plan.path(0));
    }
}
