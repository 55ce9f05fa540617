//! Plain-text drawings of instances and plan snapshots.
//!
//! `@` is an obstacle and `.` an open cell. Agents are drawn where they
//! stand: `p`/`n` for positive/negative literal agents, `c` for clause
//! agents and the last digit of the variable for blockers. Unoccupied
//! targets of literal and clause agents show as `P`, `N`, `C`.

use thiserror::Error;

use crate::gridmap::Cell;
use crate::plan::Plan;
use crate::reduction::{AgentKind, Instance};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RenderError {
    #[error("timestep {tau} is beyond the plan horizon {horizon}")]
    BadTimestep { tau: usize, horizon: usize },
    #[error("plan has {plan} agents, instance has {instance}")]
    AgentMismatch { plan: usize, instance: usize },
}

fn agent_char(kind: &AgentKind) -> char {
    match *kind {
        AgentKind::Literal { positive: true, .. } => 'p',
        AgentKind::Literal { positive: false, .. } => 'n',
        AgentKind::Clause { .. } => 'c',
        AgentKind::Blocker { var } => char::from_digit(var % 10, 10).expect("digit"),
    }
}

/// One line per grid row. With a plan, agents are drawn at timestep `tau`.
pub fn render(inst: &Instance, at: Option<(&Plan, usize)>) -> Result<String, RenderError> {
    let map = inst.map();
    if let Some((plan, tau)) = at {
        if plan.num_agents() != inst.num_agents() {
            return Err(RenderError::AgentMismatch { plan: plan.num_agents(), instance: inst.num_agents() });
        }
        if tau > plan.horizon() {
            return Err(RenderError::BadTimestep { tau, horizon: plan.horizon() });
        }
    }
    let mut grid: Vec<Vec<char>> = (0..map.height())
        .map(|r| (0..map.width()).map(|c| if map.is_passable(Cell::new(r, c)) { '.' } else { '@' }).collect())
        .collect();
    for a in inst.agents() {
        if !a.kind.is_blocker() {
            grid[a.target.row][a.target.col] = agent_char(&a.kind).to_ascii_uppercase();
        }
    }
    for a in inst.agents() {
        let cell = match at {
            Some((plan, tau)) => plan.position(a.id, tau),
            None => a.start,
        };
        grid[cell.row][cell.col] = agent_char(&a.kind);
    }
    let mut out = String::with_capacity(map.height() * (map.width() + 1));
    for row in grid {
        out.extend(row);
        out.push('\n');
    }
    Ok(out)
}
