//! Exact decision procedures for "does a plan of cost d* exist?".
//!
//! * [`monotone_dstar_feasible`]: dynamic programming over the set of agents
//!   that already moved.
//! * [`descending_dstar_feasible`]: memoized search over joint configurations
//!   where every step moves one agent one cell closer to its target.
//! * [`joint_astar`]: plain optimal search over joint configurations for tiny
//!   instances, in any motion mode.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::gridmap::{bfs_distances, Cell, Direction, GridMap};
use crate::plan::{Plan, PlanError, StagedScript};
use crate::reduction::{Instance, ReductionError};
use crate::validator::MotionMode;

pub const DEFAULT_MONOTONE_CAP: usize = 20;
pub const JOINT_MAX_AGENTS: usize = 4;
pub const JOINT_MAX_CELLS: usize = 20;

const UNREACHABLE: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("{n} agents exceed the cap of {cap}")]
    TooManyAgents { n: usize, cap: usize },
    #[error("instance too large for joint search: {agents} agents, {open_cells} open cells")]
    TooLarge { agents: usize, open_cells: usize },
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleVerdict {
    /// `None` when a limit was hit before the question was settled, or when
    /// only a parallel plan with a rotation could still reach cost d*.
    pub feasible: Option<bool>,
    /// Cost d* is reachable with one move per timestep.
    pub sequential_feasible: Option<bool>,
    pub witness: Option<Plan>,
    /// Order in which agents move, for the monotone oracle.
    pub ordering: Option<Vec<usize>>,
    pub explored: u64,
    /// The search settled the question.
    pub exhausted: bool,
    /// Expansions where the step count disagreed with the distance-based
    /// configuration cost; always zero unless the search is broken.
    pub cost_assertion_failures: u64,
}

impl OracleVerdict {
    pub fn line(&self) -> String {
        let feasible = match self.feasible {
            Some(true) => "1",
            Some(false) => "0",
            None => "unknown",
        };
        format!("ORACLE feasible={feasible} explored={}", self.explored)
    }
}

/// Per-agent distance tables indexed by cell index.
struct Fields {
    to_target: Vec<Vec<u32>>,
    from_start: Vec<Vec<u32>>,
    dist: Vec<u32>,
    start: Vec<usize>,
    target: Vec<usize>,
}

impl Fields {
    fn new(inst: &Instance) -> Result<Self, OracleError> {
        let map = inst.map();
        let table = |c: Cell| -> Vec<u32> {
            let d = bfs_distances(map, c).expect("instance endpoints are passable");
            (0..map.num_cells()).map(|i| d.by_index(i).unwrap_or(UNREACHABLE)).collect()
        };
        let mut f = Fields { to_target: vec![], from_start: vec![], dist: vec![], start: vec![], target: vec![] };
        for a in inst.agents() {
            let to_t = table(a.target);
            let d = to_t[map.index(a.start)];
            if d == UNREACHABLE {
                return Err(ReductionError::UnreachableTarget { agent: a.id }.into());
            }
            f.to_target.push(to_t);
            f.from_start.push(table(a.start));
            f.dist.push(d);
            f.start.push(map.index(a.start));
            f.target.push(map.index(a.target));
        }
        Ok(f)
    }

    fn on_dag(&self, r: usize, cell: usize) -> bool {
        let (a, b) = (self.from_start[r][cell], self.to_target[r][cell]);
        a != UNREACHABLE && b != UNREACHABLE && a + b == self.dist[r]
    }

    fn dstar(&self) -> u64 {
        self.dist.iter().map(|&d| d as u64).sum()
    }
}

/// A path from `from` to agent `r`'s target along strictly decreasing
/// distance, avoiding `blocked` cells; first found in neighbour order.
fn descending_path(adj: &[Vec<usize>], fields: &Fields, r: usize, from: usize, blocked: &dyn Fn(usize) -> bool) -> Option<Vec<usize>> {
    let to_t = &fields.to_target[r];
    let mut dead: HashSet<usize> = HashSet::new();
    let mut path = vec![from];
    let mut next_idx = vec![0usize];
    while let Some(&u) = path.last() {
        if to_t[u] == 0 {
            return Some(path);
        }
        let k = next_idx.last_mut().expect("parallel stacks");
        let step = adj[u][*k..].iter().position(|&v| to_t[v] + 1 == to_t[u] && !blocked(v) && !dead.contains(&v));
        match step {
            Some(off) => {
                let v = adj[u][*k + off];
                *k += off + 1;
                path.push(v);
                next_idx.push(0);
            }
            None => {
                dead.insert(u);
                path.pop();
                next_idx.pop();
            }
        }
    }
    None
}

pub fn monotone_dstar_feasible(inst: &Instance) -> Result<OracleVerdict, OracleError> {
    monotone_dstar_feasible_capped(inst, DEFAULT_MONOTONE_CAP)
}

/// Subset DP: a set `S` of finished agents extends by `r` when `r` has a
/// shortest path while the agents in `S` sit on their targets and all other
/// agents on their starts. Only subsets reachable from the empty set are
/// visited.
pub fn monotone_dstar_feasible_capped(inst: &Instance, cap: usize) -> Result<OracleVerdict, OracleError> {
    let n = inst.num_agents();
    if n > cap || n > 63 {
        return Err(OracleError::TooManyAgents { n, cap: cap.min(63) });
    }
    let fields = Fields::new(inst)?;
    let adj = inst.map().adjacency();
    // agents whose start or target lies on r's shortest-path cells
    let relevant: Vec<u64> = (0..n)
        .map(|r| {
            (0..n)
                .filter(|&j| j != r && (fields.on_dag(r, fields.start[j]) || fields.on_dag(r, fields.target[j])))
                .fold(0u64, |m, j| m | 1 << j)
        })
        .collect();
    let blocked_cells = |r: usize, done: u64| -> Vec<usize> {
        (0..n)
            .filter(|&j| relevant[r] >> j & 1 == 1)
            .map(|j| if done >> j & 1 == 1 { fields.target[j] } else { fields.start[j] })
            .collect()
    };
    let mut cache: HashMap<(usize, u64), bool> = HashMap::new();
    let mut can_move = |r: usize, done: u64| -> bool {
        *cache.entry((r, done & relevant[r])).or_insert_with(|| {
            let blocked = blocked_cells(r, done);
            descending_path(&adj, &fields, r, fields.start[r], &|c| blocked.contains(&c)).is_some()
        })
    };

    let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut parent: HashMap<u64, usize> = HashMap::new();
    parent.insert(0, usize::MAX);
    let mut queue = VecDeque::from([0u64]);
    while let Some(done) = queue.pop_front() {
        if done == full {
            break;
        }
        for r in 0..n {
            let next = done | 1 << r;
            if done >> r & 1 == 1 || parent.contains_key(&next) || !can_move(r, done) {
                continue;
            }
            parent.insert(next, r);
            queue.push_back(next);
        }
    }
    let explored = parent.len() as u64;
    if !parent.contains_key(&full) {
        return Ok(OracleVerdict {
            feasible: Some(false),
            sequential_feasible: None,
            witness: None,
            ordering: None,
            explored,
            exhausted: true,
            cost_assertion_failures: 0,
        });
    }
    let mut ordering = Vec::with_capacity(n);
    let mut mask = full;
    while mask != 0 {
        let r = parent[&mask];
        ordering.push(r);
        mask &= !(1 << r);
    }
    ordering.reverse();

    let map = inst.map();
    let mut script = StagedScript::new();
    let mut done = 0u64;
    for &r in &ordering {
        let blocked = blocked_cells(r, done);
        let path = descending_path(&adj, &fields, r, fields.start[r], &|c| blocked.contains(&c))
            .expect("reachable subsets extend along recorded agents");
        script.push(r, path.into_iter().map(|i| map.cell(i)).collect());
        done |= 1 << r;
    }
    Ok(OracleVerdict {
        feasible: Some(true),
        sequential_feasible: Some(true),
        witness: Some(script.to_plan(inst)?),
        ordering: Some(ordering),
        explored,
        exhausted: true,
        cost_assertion_failures: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub max_states: u64,
    pub seconds: Option<f64>,
    /// Expand only a persistent subset of the moves in each configuration.
    pub prune_interleavings: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_states: 20_000_000, seconds: None, prune_interleavings: true }
    }
}

const APSP_MAX_CELLS: usize = 4096;

/// All-pairs distances for small maps, flat by cell index.
fn all_pairs(map: &GridMap) -> Option<Vec<u32>> {
    let cells = map.num_cells();
    if cells > APSP_MAX_CELLS {
        return None;
    }
    let mut table = vec![UNREACHABLE; cells * cells];
    for c in map.passable_cells() {
        let d = bfs_distances(map, c).expect("passable source");
        let row = map.index(c) * cells;
        for (i, slot) in table[row..row + cells].iter_mut().enumerate() {
            *slot = d.by_index(i).unwrap_or(UNREACHABLE);
        }
    }
    Some(table)
}

enum Visited {
    Packed { bits: u32, set: HashSet<u128> },
    Boxed(HashSet<Box<[u16]>>),
}

impl Visited {
    fn new(n: usize, cells: usize) -> Self {
        let bits = usize::BITS - cells.leading_zeros();
        if n * bits as usize <= 128 {
            Visited::Packed { bits, set: HashSet::new() }
        } else {
            Visited::Boxed(HashSet::new())
        }
    }

    fn insert(&mut self, pos: &[u16]) -> bool {
        match self {
            Visited::Packed { bits, set } => set.insert(pos.iter().fold(0u128, |k, &p| k << *bits | p as u128)),
            Visited::Boxed(set) => set.insert(pos.into()),
        }
    }

    fn len(&self) -> usize {
        match self {
            Visited::Packed { set, .. } => set.len(),
            Visited::Boxed(set) => set.len(),
        }
    }
}

struct Frame {
    moves: Vec<(u16, u16)>,
    next: usize,
    /// Move that produced this configuration.
    moved: Option<(usize, u16)>,
}

/// No cost-d* plan can contain a rotation. A rotation is a closed loop of
/// moves along the agents' shortest-path DAGs, so it needs DAG moves in all
/// four directions and a directed cycle in their union.
fn rotation_free(map: &GridMap, fields: &Fields, succ: &[Vec<Vec<u16>>]) -> bool {
    let cells = map.num_cells();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); cells];
    let mut directions = HashSet::new();
    for (r, per_agent) in succ.iter().enumerate() {
        for (u, next) in per_agent.iter().enumerate() {
            if !fields.on_dag(r, u) {
                continue;
            }
            for &v in next {
                out[u].push(v as usize);
                directions.insert(Direction::between(map.cell(u), map.cell(v as usize)));
            }
        }
    }
    if directions.len() < 4 {
        return true;
    }
    let mut indegree = vec![0usize; cells];
    for &v in out.iter().flatten() {
        indegree[v] += 1;
    }
    let mut ready: Vec<usize> = (0..cells).filter(|&u| indegree[u] == 0).collect();
    let mut seen = 0;
    while let Some(u) = ready.pop() {
        seen += 1;
        for &v in &out[u] {
            indegree[v] -= 1;
            if indegree[v] == 0 {
                ready.push(v);
            }
        }
    }
    seen == cells
}

/// Depth-first reachability in the descending system: one agent moves per
/// step, to a free neighbour one step closer to its target. Agents on their
/// targets can never move again, so a configuration is abandoned as soon as
/// some agent can no longer descend to its target around them.
///
/// Every plan of cost d* made of single moves is a path in this system, so
/// the answer is exact for sequential motion; parallel plans without
/// rotations serialize into it. When the shortest-path moves leave room for
/// a rotation, a negative answer says nothing about parallel motion and
/// `feasible` is reported as unknown.
pub fn descending_dstar_feasible(inst: &Instance, limits: Limits) -> Result<OracleVerdict, OracleError> {
    let n = inst.num_agents();
    let map = inst.map();
    let fields = Fields::new(inst)?;
    let adj = inst.map().adjacency();
    let succ: Vec<Vec<Vec<u16>>> = (0..n)
        .map(|r| {
            (0..map.num_cells())
                .map(|u| {
                    let tu = fields.to_target[r][u];
                    adj[u].iter().filter(|&&v| tu != UNREACHABLE && fields.to_target[r][v] + 1 == tu).map(|&v| v as u16).collect()
                })
                .collect()
        })
        .collect();

    let dstar = fields.dstar();
    let mut pos: Vec<u16> = fields.start.iter().map(|&c| c as u16).collect();
    let mut occ: Vec<u16> = vec![0; map.num_cells()];
    for (r, &p) in pos.iter().enumerate() {
        occ[p as usize] = r as u16 + 1;
    }
    let mut remaining: u64 = dstar;
    let mut visited = Visited::new(n, map.num_cells());
    visited.insert(&pos);
    let mut assertion_failures = 0u64;
    let started = Instant::now();
    let deadline = limits.seconds.map(Duration::from_secs_f64);
    let mut expansions = 0u64;

    let at_target = |r: usize, pos: &[u16]| fields.to_target[r][pos[r] as usize] == 0;
    // can every agent not yet home still descend around the parked ones?
    let all_alive = |pos: &[u16], occ: &[u16]| -> bool {
        (0..n).all(|q| {
            at_target(q, pos)
                || descending_path(&adj, &fields, q, pos[q] as usize, &|c| {
                    let o = occ[c];
                    o != 0 && at_target(o as usize - 1, pos)
                })
                .is_some()
        })
    };
    if !all_alive(&pos, &occ) {
        // parked agents never move again in any plan of cost d*
        return Ok(OracleVerdict {
            feasible: Some(false),
            sequential_feasible: Some(false),
            witness: None,
            ordering: None,
            explored: 1,
            exhausted: true,
            cost_assertion_failures: 0,
        });
    }

    let apsp = if limits.prune_interleavings { all_pairs(map) } else { None };
    let cells = map.num_cells();
    // can agent q, standing at p, ever step onto v?
    let may_enter = |q: usize, p: usize, v: usize| -> bool {
        let (tp, tv) = (fields.to_target[q][p], fields.to_target[q][v]);
        if tv == UNREACHABLE || tv >= tp {
            return false;
        }
        match &apsp {
            Some(d) => d[p * cells + v] + tv == tp,
            None => fields.on_dag(q, v),
        }
    };
    // Moves to expand: with pruning, the enabled moves of a smallest agent
    // set A closed under (a) any agent that could later step onto the
    // destination of an enabled move of A, and (b) the occupant of a cell an
    // agent of A is waiting for. Moves outside A then commute with all of
    // A's, so the set is persistent and terminal configurations stay
    // reachable.
    let expand = |pos: &[u16], occ: &[u16]| -> Vec<(u16, u16)> {
        let enabled = |r: usize| succ[r][pos[r] as usize].iter().copied().filter(|&v| occ[v as usize] == 0);
        let all = || (0..n).flat_map(|r| enabled(r).map(move |v| (r as u16, v))).collect::<Vec<_>>();
        if !limits.prune_interleavings {
            return all();
        }
        let mut best: Option<Vec<bool>> = None;
        let mut best_count = usize::MAX;
        for seed in 0..n {
            if enabled(seed).next().is_none() {
                continue;
            }
            let mut in_a = vec![false; n];
            in_a[seed] = true;
            let mut work = vec![seed];
            while let Some(a) = work.pop() {
                for &v in &succ[a][pos[a] as usize] {
                    let o = occ[v as usize];
                    if o != 0 {
                        let q = o as usize - 1;
                        if !in_a[q] && !at_target(q, pos) {
                            in_a[q] = true;
                            work.push(q);
                        }
                        continue;
                    }
                    for q in 0..n {
                        if !in_a[q] && !at_target(q, pos) && may_enter(q, pos[q] as usize, v as usize) {
                            in_a[q] = true;
                            work.push(q);
                        }
                    }
                }
            }
            let count: usize = (0..n).filter(|&r| in_a[r]).map(|r| enabled(r).count()).sum();
            if count < best_count {
                best_count = count;
                best = Some(in_a);
                if count == 1 {
                    break;
                }
            }
        }
        match best {
            Some(in_a) => (0..n).filter(|&r| in_a[r]).flat_map(|r| enabled(r).map(move |v| (r as u16, v))).collect(),
            None => Vec::new(),
        }
    };
    let mut stack = vec![Frame { moves: expand(&pos, &occ), next: 0, moved: None }];
    let mut limited = false;
    while let Some(frame) = stack.last_mut() {
        if remaining == 0 {
            break;
        }
        expansions += 1;
        if visited.len() as u64 >= limits.max_states
            || (expansions.is_multiple_of(4096) && deadline.is_some_and(|d| started.elapsed() >= d))
        {
            limited = true;
            break;
        }
        let mut advanced = None;
        while frame.next < frame.moves.len() {
            let (r, v) = frame.moves[frame.next];
            let r = r as usize;
            frame.next += 1;
            let u = pos[r];
            pos[r] = v;
            occ[u as usize] = 0;
            occ[v as usize] = r as u16 + 1;
            let fresh = visited.insert(&pos);
            if fresh && (!at_target(r, &pos) || all_alive(&pos, &occ)) {
                advanced = Some((r, u));
                break;
            }
            pos[r] = u;
            occ[v as usize] = 0;
            occ[u as usize] = r as u16 + 1;
        }
        match advanced {
            Some((r, u)) => {
                remaining -= 1;
                stack.push(Frame { moves: expand(&pos, &occ), next: 0, moved: Some((r, u)) });
                let depth = (stack.len() - 1) as u64;
                let config_cost: u64 = (0..n).map(|q| (fields.dist[q] - fields.to_target[q][pos[q] as usize]) as u64).sum();
                if config_cost != depth || dstar - remaining != depth {
                    assertion_failures += 1;
                }
            }
            None => {
                let frame = stack.pop().expect("nonempty");
                if let Some((r, u)) = frame.moved {
                    let v = pos[r];
                    pos[r] = u;
                    occ[v as usize] = 0;
                    occ[u as usize] = r as u16 + 1;
                    remaining += 1;
                }
            }
        }
    }
    let explored = visited.len() as u64;
    if limited {
        return Ok(OracleVerdict {
            feasible: None,
            sequential_feasible: None,
            witness: None,
            ordering: None,
            explored,
            exhausted: false,
            cost_assertion_failures: assertion_failures,
        });
    }
    if stack.is_empty() {
        return Ok(OracleVerdict {
            feasible: rotation_free(map, &fields, &succ).then_some(false),
            sequential_feasible: Some(false),
            witness: None,
            ordering: None,
            explored,
            exhausted: true,
            cost_assertion_failures: assertion_failures,
        });
    }
    // replay the move sequence on the stack, one move per timestep
    let mut cur: Vec<Cell> = inst.agents().iter().map(|a| a.start).collect();
    let mut trajectories: Vec<Vec<Cell>> = cur.iter().map(|&c| vec![c]).collect();
    let mut after: Vec<u16> = fields.start.iter().map(|&c| c as u16).collect();
    let moves: Vec<(usize, u16)> = stack.iter().filter_map(|f| f.moved).collect();
    // each frame stores where the agent came from; destinations follow from
    // the final configuration walked backwards
    let mut dests = vec![0u16; moves.len()];
    let mut back = pos.clone();
    for (i, &(r, u)) in moves.iter().enumerate().rev() {
        dests[i] = back[r];
        back[r] = u;
    }
    for (i, &(r, _)) in moves.iter().enumerate() {
        after[r] = dests[i];
        cur[r] = map.cell(after[r] as usize);
        for (q, t) in trajectories.iter_mut().enumerate() {
            t.push(cur[q]);
        }
    }
    Ok(OracleVerdict {
        feasible: Some(true),
        sequential_feasible: Some(true),
        witness: Some(Plan::from_trajectories(trajectories)),
        ordering: None,
        explored,
        exhausted: true,
        cost_assertion_failures: assertion_failures,
    })
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct JointState {
    pos: Vec<u16>,
    done: u8,
    /// Currently moving agent in monotone mode.
    active: Option<u8>,
}

/// Minimum distance cost over all plans in `mode`, with a witness, or
/// `None` when no plan exists. Exhaustive A* over joint configurations with
/// the sum of individual distances as heuristic; parallel steps may move
/// any subset of agents, so trains and rotations are included.
pub fn joint_astar(inst: &Instance, mode: MotionMode) -> Result<Option<(u64, Plan)>, OracleError> {
    let n = inst.num_agents();
    let map: &GridMap = inst.map();
    if n > JOINT_MAX_AGENTS || map.open_cells() > JOINT_MAX_CELLS {
        return Err(OracleError::TooLarge { agents: n, open_cells: map.open_cells() });
    }
    let fields = match Fields::new(inst) {
        Ok(f) => f,
        Err(OracleError::Reduction(ReductionError::UnreachableTarget { .. })) => return Ok(None),
        Err(e) => return Err(e),
    };
    let adj = map.adjacency();
    let h = |s: &JointState| -> u64 { (0..n).map(|r| fields.to_target[r][s.pos[r] as usize] as u64).sum() };
    let goal = |s: &JointState| (0..n).all(|r| s.pos[r] as usize == fields.target[r]);

    let start = JointState { pos: fields.start.iter().map(|&c| c as u16).collect(), done: 0, active: None };
    let mut states: Vec<JointState> = vec![start.clone()];
    let mut index: HashMap<JointState, usize> = HashMap::from([(start.clone(), 0)]);
    let mut g: Vec<u64> = vec![0];
    let mut parent: Vec<usize> = vec![usize::MAX];
    let mut closed: Vec<bool> = vec![false];
    let mut heap = BinaryHeap::from([Reverse((h(&start), 0usize))]);

    let mut found = None;
    while let Some(Reverse((_, id))) = heap.pop() {
        if closed[id] {
            continue;
        }
        closed[id] = true;
        let s = states[id].clone();
        if goal(&s) {
            found = Some(id);
            break;
        }
        let mut push = |next: JointState, cost: u64, states: &mut Vec<JointState>| {
            let ng = g[id] + cost;
            let nid = match index.get(&next) {
                Some(&nid) => {
                    if closed[nid] || g[nid] <= ng {
                        return;
                    }
                    nid
                }
                None => {
                    states.push(next.clone());
                    index.insert(next.clone(), states.len() - 1);
                    g.push(u64::MAX);
                    parent.push(usize::MAX);
                    closed.push(false);
                    states.len() - 1
                }
            };
            g[nid] = ng;
            parent[nid] = id;
            heap.push(Reverse((ng + h(&next), nid)));
        };
        match mode {
            MotionMode::Sequential | MotionMode::Monotone => {
                for r in 0..n {
                    if mode == MotionMode::Monotone && s.done >> r & 1 == 1 {
                        continue;
                    }
                    for &v in &adj[s.pos[r] as usize] {
                        if s.pos.contains(&(v as u16)) {
                            continue;
                        }
                        let mut next = s.clone();
                        next.pos[r] = v as u16;
                        if mode == MotionMode::Monotone {
                            if let Some(a) = s.active.filter(|&a| a as usize != r) {
                                next.done |= 1 << a;
                            }
                            next.active = Some(r as u8);
                        }
                        push(next, 1, &mut states);
                    }
                }
            }
            MotionMode::Parallel => {
                for (next, movers) in parallel_successors(&s.pos, &adj) {
                    push(JointState { pos: next, done: 0, active: None }, movers, &mut states);
                }
            }
        }
    }
    let Some(end) = found else { return Ok(None) };
    let mut chain = vec![end];
    while parent[*chain.last().expect("nonempty")] != usize::MAX {
        chain.push(parent[*chain.last().expect("nonempty")]);
    }
    chain.reverse();
    let trajectories: Vec<Vec<Cell>> =
        (0..n).map(|r| chain.iter().map(|&id| map.cell(states[id].pos[r] as usize)).collect()).collect();
    Ok(Some((g[end], Plan::from_trajectories(trajectories))))
}

/// All joint steps from `pos` with at least one mover: distinct end cells
/// and no two agents exchanging cells. Yields the new positions and the
/// number of movers.
fn parallel_successors(pos: &[u16], adj: &[Vec<usize>]) -> Vec<(Vec<u16>, u64)> {
    fn rec(r: usize, pos: &[u16], adj: &[Vec<usize>], cur: &mut Vec<u16>, out: &mut Vec<(Vec<u16>, u64)>) {
        if r == pos.len() {
            let movers = (0..pos.len()).filter(|&i| cur[i] != pos[i]).count() as u64;
            let swap = (0..pos.len())
                .any(|i| (0..pos.len()).any(|j| i != j && cur[i] != pos[i] && cur[i] == pos[j] && cur[j] == pos[i]));
            if movers > 0 && !swap {
                out.push((cur.clone(), movers));
            }
            return;
        }
        let options = std::iter::once(pos[r]).chain(adj[pos[r] as usize].iter().map(|&v| v as u16));
        for v in options {
            if cur.contains(&v) {
                continue;
            }
            cur.push(v);
            rec(r + 1, pos, adj, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, pos, adj, &mut Vec::with_capacity(pos.len()), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{brute_force_sat, gen, Formula};
    use crate::gridmap::constrained_shortest_len;
    use crate::reduction::{build_general, build_monotone, d_star, Agent, AgentKind};
    use crate::validator::validate;
    use rand::SeedableRng;

    type StartTarget = ((usize, usize), (usize, usize));

    fn plain(map: GridMap, pairs: &[StartTarget]) -> Instance {
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
        Instance::new(map, agents).unwrap()
    }

    fn assert_witness(inst: &Instance, v: &OracleVerdict, mode: MotionMode) {
        let plan = v.witness.as_ref().expect("feasible verdicts carry a witness");
        let r = validate(inst, plan, mode).unwrap();
        assert!(r.feasible, "{}", r);
        assert_eq!(Some(r.cost), r.dstar);
    }

    #[test]
    fn monotone_oracle_examples() {
        let (inst, _) = build_monotone(&gen::figure_formula());
        let v = monotone_dstar_feasible(&inst).unwrap();
        assert_eq!(v.feasible, Some(true));
        assert_witness(&inst, &v, MotionMode::Monotone);

        let (inst, _) = build_monotone(&gen::unsat_pair());
        let v = monotone_dstar_feasible(&inst).unwrap();
        assert_eq!(v.feasible, Some(false));
        assert!(v.witness.is_none());
        assert!(v.line().starts_with("ORACLE feasible=0 explored="));

        let corridor = plain(GridMap::open(1, 5), &[((0, 0), (0, 4))]);
        let v = monotone_dstar_feasible(&corridor).unwrap();
        assert_eq!(v.ordering, Some(vec![0]));
        assert_eq!(v.witness.unwrap().path(0).len(), 5);
    }

    #[test]
    fn monotone_cap() {
        let (inst, _) = build_monotone(&gen::figure_formula());
        assert_eq!(monotone_dstar_feasible_capped(&inst, 5), Err(OracleError::TooManyAgents { n: 12, cap: 5 }));
    }

    #[test]
    fn dag_reachability_matches_constrained_bfs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let f = gen::random_formula(&mut rng, 3, 3, false);
            let (inst, _) = build_monotone(&f);
            let fields = Fields::new(&inst).unwrap();
            let adj = inst.map().adjacency();
            let map = inst.map();
            let n = inst.num_agents();
            for r in 0..n {
                for mask in [0u64, 0b1010_1010_1010, 0b0101_0101, (1 << n) - 1] {
                    let blocked: HashSet<Cell> = (0..n)
                        .filter(|&j| j != r)
                        .map(|j| if mask >> j & 1 == 1 { inst.agents()[j].target } else { inst.agents()[j].start })
                        .collect();
                    let a = &inst.agents()[r];
                    let bfs = if blocked.contains(&a.target) {
                        None
                    } else {
                        constrained_shortest_len(map, &blocked, a.start, a.target).unwrap()
                    };
                    let dag = descending_path(&adj, &fields, r, fields.start[r], &|c| blocked.contains(&map.cell(c)));
                    assert_eq!(bfs == Some(fields.dist[r]), dag.is_some());
                }
            }
        }
    }

    #[test]
    fn descending_examples() {
        let unit = Formula::from_ints(&[&[1]]).unwrap();
        let (inst, _) = build_general(&unit);
        let v = descending_dstar_feasible(&inst, Limits::default()).unwrap();
        assert_eq!(v.feasible, Some(true));
        assert_eq!(v.cost_assertion_failures, 0);
        assert_witness(&inst, &v, MotionMode::Sequential);

        let (inst, _) = build_general(&gen::unsat_pair());
        let v = descending_dstar_feasible(&inst, Limits::default()).unwrap();
        assert_eq!(v.feasible, Some(false));
        assert!(v.exhausted);
        assert_eq!(v.cost_assertion_failures, 0);
    }

    #[test]
    fn descending_limits_report_unknown() {
        let (inst, _) = build_general(&gen::unsat_pair());
        let v = descending_dstar_feasible(&inst, Limits { max_states: 3, ..Limits::default() }).unwrap();
        assert_eq!(v.feasible, None);
        assert!(!v.exhausted);
        assert!(v.line().starts_with("ORACLE feasible=unknown"));
    }

    #[test]
    fn descending_agrees_with_sat_on_small_general() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..6 {
            let f = gen::random_formula(&mut rng, 2, 2, false);
            let (inst, _) = build_general(&f);
            let v = descending_dstar_feasible(&inst, Limits::default()).unwrap();
            assert_eq!(v.feasible, Some(brute_force_sat(&f).unwrap().is_some()), "{f}");
            if v.feasible == Some(true) {
                assert_witness(&inst, &v, MotionMode::Sequential);
            }
        }
    }

    #[test]
    fn joint_corridor_and_swap() {
        let one = plain(GridMap::open(1, 6), &[((0, 0), (0, 5))]);
        for mode in [MotionMode::Parallel, MotionMode::Sequential, MotionMode::Monotone] {
            assert_eq!(joint_astar(&one, mode).unwrap().unwrap().0, 5);
        }
        let swap = plain(GridMap::open(1, 4), &[((0, 1), (0, 2)), ((0, 2), (0, 1))]);
        for mode in [MotionMode::Parallel, MotionMode::Sequential, MotionMode::Monotone] {
            assert!(joint_astar(&swap, mode).unwrap().is_none());
        }
    }

    #[test]
    fn rotation_needs_parallel_motion() {
        let inst = plain(
            GridMap::open(2, 2),
            &[((0, 0), (0, 1)), ((0, 1), (1, 1)), ((1, 1), (1, 0)), ((1, 0), (0, 0))],
        );
        let (cost, plan) = joint_astar(&inst, MotionMode::Parallel).unwrap().unwrap();
        assert_eq!(cost, 4);
        assert!(validate(&inst, &plan, MotionMode::Parallel).unwrap().feasible);
        assert!(joint_astar(&inst, MotionMode::Sequential).unwrap().is_none());
        assert!(joint_astar(&inst, MotionMode::Monotone).unwrap().is_none());
        let v = descending_dstar_feasible(&inst, Limits::default()).unwrap();
        assert_eq!(v.sequential_feasible, Some(false));
        assert_eq!(v.feasible, None);
        assert_eq!(v.line(), format!("ORACLE feasible=unknown explored={}", v.explored));
    }

    #[test]
    fn joint_too_large() {
        let (inst, _) = build_monotone(&gen::figure_formula());
        assert!(matches!(joint_astar(&inst, MotionMode::Parallel), Err(OracleError::TooLarge { .. })));
    }

    #[test]
    fn joint_witness_costs_validate() {
        // two agents crossing in a plus-shaped junction
        let mut map = GridMap::blocked(3, 3);
        for c in [(0, 1), (1, 0), (1, 1), (1, 2), (2, 1)] {
            map.set_passable(Cell::new(c.0, c.1), true);
        }
        let inst = plain(map, &[((1, 0), (1, 2)), ((1, 2), (1, 0))]);
        let dstar = d_star(&inst).unwrap();
        // one of them waits in a side pocket, which takes two episodes
        assert!(joint_astar(&inst, MotionMode::Monotone).unwrap().is_none());
        for mode in [MotionMode::Parallel, MotionMode::Sequential] {
            let (cost, plan) = joint_astar(&inst, mode).unwrap().unwrap();
            assert_eq!(cost, dstar + 2);
            let r = validate(&inst, &plan, mode).unwrap();
            assert!(r.feasible);
            assert_eq!(r.cost, cost);
        }
    }

    fn random_tiny(rng: &mut impl rand::Rng) -> Option<Instance> {
        let (h, w) = (rng.gen_range(2..=4), rng.gen_range(2..=5));
        let mut map = GridMap::open(h, w);
        for _ in 0..rng.gen_range(0..=3) {
            map.set_passable(Cell::new(rng.gen_range(0..h), rng.gen_range(0..w)), false);
        }
        let cells: Vec<Cell> = map.passable_cells().collect();
        let n = rng.gen_range(2..=4).min(cells.len());
        let pick = |rng: &mut dyn rand::RngCore| {
            let mut c = cells.clone();
            rand::seq::SliceRandom::shuffle(c.as_mut_slice(), rng);
            c.truncate(n);
            c
        };
        let (starts, targets) = (pick(rng), pick(rng));
        let agents = (0..n)
            .map(|id| Agent { id, kind: AgentKind::Clause { clause: id }, start: starts[id], target: targets[id] })
            .collect();
        let inst = Instance::new(map, agents).ok()?;
        d_star(&inst).ok().map(|_| inst)
    }

    #[test]
    fn pruning_preserves_verdicts_on_tiny_grids() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let full = Limits { prune_interleavings: false, ..Limits::default() };
        let mut checked = 0;
        while checked < 300 {
            let Some(inst) = random_tiny(&mut rng) else { continue };
            checked += 1;
            let dstar = d_star(&inst).unwrap();
            let pruned = descending_dstar_feasible(&inst, Limits::default()).unwrap();
            let plain = descending_dstar_feasible(&inst, full).unwrap();
            let seq = joint_astar(&inst, MotionMode::Sequential).unwrap().map(|(c, _)| c);
            assert_eq!(pruned.feasible, plain.feasible);
            assert_eq!(pruned.sequential_feasible, plain.sequential_feasible);
            assert_eq!(pruned.sequential_feasible, Some(seq == Some(dstar)));
            if let Some(f) = pruned.feasible {
                let par = joint_astar(&inst, MotionMode::Parallel).unwrap().map(|(c, _)| c);
                assert_eq!(f, par == Some(dstar));
            }
            if pruned.sequential_feasible == Some(false) {
                assert!(pruned.explored <= plain.explored);
            }
            if pruned.feasible == Some(true) {
                assert_witness(&inst, &pruned, MotionMode::Sequential);
            }
            let mono = monotone_dstar_feasible(&inst).unwrap();
            let mono_joint = joint_astar(&inst, MotionMode::Monotone).unwrap().map(|(c, _)| c);
            assert_eq!(mono.feasible, Some(mono_joint == Some(dstar)));
        }
    }

    #[test]
    fn pruning_preserves_verdicts_on_small_reductions() {
        let full = Limits { prune_interleavings: false, ..Limits::default() };
        let mut formulas = gen::canonical_3cnf(1, 1);
        formulas.push(Formula::from_ints(&[&[1, 2, -2]]).unwrap());
        formulas.push(Formula::from_ints(&[&[1], &[-1]]).unwrap());
        for f in formulas {
            let sat = brute_force_sat(&f).unwrap().is_some();
            let (inst, _) = build_general(&f);
            let pruned = descending_dstar_feasible(&inst, Limits::default()).unwrap();
            let plain = descending_dstar_feasible(&inst, full).unwrap();
            assert_eq!(pruned.feasible, plain.feasible, "{f}");
            assert_eq!(pruned.feasible, Some(sat), "{f}");
        }
    }
}
