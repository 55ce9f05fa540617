//! 4-connected grid maps, BFS distances and MovingAI map I/O.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("cell {0} is outside the map")]
    OutOfBounds(Cell),
    #[error("source cell {0} is an obstacle")]
    SourceBlocked(Cell),
    #[error("endpoint {0} is blocked or impassable")]
    EndpointBlocked(Cell),
    #[error("bad map header: {0}")]
    BadHeader(String),
    #[error("row {row} has {len} characters, expected {width}")]
    RaggedRows { row: usize, len: usize, width: usize },
    #[error("expected {expected} map rows, found {found}")]
    MissingRows { expected: usize, found: usize },
    #[error("illegal map character {ch:?} at row {row}")]
    IllegalCharacter { ch: char, row: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }

    pub fn is_adjacent(self, other: Cell) -> bool {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col) == 1
    }

    pub fn manhattan(self, other: Cell) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.row, self.col)
    }
}

/// Unit moves in the canonical exploration order: right, down, up, left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Right,
    Down,
    Up,
    Left,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Right, Direction::Down, Direction::Up, Direction::Left];

    /// Direction of the unit move `from -> to`, if they are adjacent.
    pub fn between(from: Cell, to: Cell) -> Option<Direction> {
        match (to.row as isize - from.row as isize, to.col as isize - from.col as isize) {
            (0, 1) => Some(Direction::Right),
            (1, 0) => Some(Direction::Down),
            (-1, 0) => Some(Direction::Up),
            (0, -1) => Some(Direction::Left),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridMap {
    height: usize,
    width: usize,
    passable: Vec<bool>,
}

impl GridMap {
    /// A map where every cell is an obstacle.
    pub fn blocked(height: usize, width: usize) -> Self {
        assert!(height >= 1 && width >= 1, "maps are at least 1x1");
        GridMap { height, width, passable: vec![false; height * width] }
    }

    pub fn open(height: usize, width: usize) -> Self {
        let mut m = Self::blocked(height, width);
        m.passable.fill(true);
        m
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_cells(&self) -> usize {
        self.passable.len()
    }

    pub fn open_cells(&self) -> usize {
        self.passable.iter().filter(|&&p| p).count()
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.row < self.height && c.col < self.width
    }

    pub fn index(&self, c: Cell) -> usize {
        debug_assert!(self.in_bounds(c));
        c.row * self.width + c.col
    }

    pub fn cell(&self, index: usize) -> Cell {
        Cell::new(index / self.width, index % self.width)
    }

    pub fn is_passable(&self, c: Cell) -> bool {
        self.in_bounds(c) && self.passable[self.index(c)]
    }

    pub fn set_passable(&mut self, c: Cell, passable: bool) {
        let i = self.index(c);
        self.passable[i] = passable;
    }

    pub fn step(&self, c: Cell, d: Direction) -> Option<Cell> {
        let next = match d {
            Direction::Right => Cell::new(c.row, c.col + 1),
            Direction::Down => Cell::new(c.row + 1, c.col),
            Direction::Up => Cell::new(c.row.checked_sub(1)?, c.col),
            Direction::Left => Cell::new(c.row, c.col.checked_sub(1)?),
        };
        self.is_passable(next).then_some(next)
    }

    /// Passable neighbours in right, down, up, left order.
    pub fn neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        Direction::ALL.into_iter().filter_map(move |d| self.step(c, d))
    }

    pub fn passable_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.passable.len()).filter(|&i| self.passable[i]).map(|i| self.cell(i))
    }

    /// Index-level adjacency table; `adj[i]` lists neighbour indices of cell
    /// `i` in canonical direction order.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.num_cells())
            .map(|i| {
                if !self.passable[i] {
                    return Vec::new();
                }
                self.neighbors(self.cell(i)).map(|n| self.index(n)).collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceField {
    source: Cell,
    width: usize,
    dist: Vec<Option<u32>>,
}

impl DistanceField {
    pub fn source(&self) -> Cell {
        self.source
    }

    /// `None` means unreachable (or an obstacle).
    pub fn get(&self, c: Cell) -> Option<u32> {
        if c.col >= self.width {
            return None;
        }
        self.dist.get(c.row * self.width + c.col).copied().flatten()
    }

    pub fn by_index(&self, i: usize) -> Option<u32> {
        self.dist[i]
    }
}

pub fn bfs_distances(map: &GridMap, source: Cell) -> Result<DistanceField, GridError> {
    if !map.in_bounds(source) {
        return Err(GridError::OutOfBounds(source));
    }
    if !map.is_passable(source) {
        return Err(GridError::SourceBlocked(source));
    }
    let mut dist = vec![None; map.num_cells()];
    let mut queue = VecDeque::new();
    dist[map.index(source)] = Some(0);
    queue.push_back(source);
    while let Some(c) = queue.pop_front() {
        let d = dist[map.index(c)].expect("queued cells are labelled");
        for n in map.neighbors(c) {
            let slot = &mut dist[map.index(n)];
            if slot.is_none() {
                *slot = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    Ok(DistanceField { source, width: map.width(), dist })
}

/// Shortest `s -> t` length avoiding `blocked`; `None` if disconnected.
pub fn constrained_shortest_len(
    map: &GridMap,
    blocked: &HashSet<Cell>,
    s: Cell,
    t: Cell,
) -> Result<Option<u32>, GridError> {
    for e in [s, t] {
        if !map.in_bounds(e) {
            return Err(GridError::OutOfBounds(e));
        }
        if !map.is_passable(e) || blocked.contains(&e) {
            return Err(GridError::EndpointBlocked(e));
        }
    }
    Ok(shortest_path_avoiding(map, s, t, |c| blocked.contains(&c)).map(|p| (p.len() - 1) as u32))
}

/// A shortest `s -> t` cell path avoiding cells for which `is_blocked`
/// holds. Ties are broken by the canonical neighbour order, so the result
/// is deterministic. Endpoints are not tested against `is_blocked`.
pub fn shortest_path_avoiding(
    map: &GridMap,
    s: Cell,
    t: Cell,
    is_blocked: impl Fn(Cell) -> bool,
) -> Option<Vec<Cell>> {
    if !map.is_passable(s) || !map.is_passable(t) {
        return None;
    }
    let mut parent: Vec<Option<usize>> = vec![None; map.num_cells()];
    let mut seen = vec![false; map.num_cells()];
    let mut queue = VecDeque::new();
    seen[map.index(s)] = true;
    queue.push_back(s);
    while let Some(c) = queue.pop_front() {
        if c == t {
            let mut path = vec![t];
            let mut i = map.index(t);
            while let Some(p) = parent[i] {
                path.push(map.cell(p));
                i = p;
            }
            path.reverse();
            return Some(path);
        }
        for n in map.neighbors(c) {
            let ni = map.index(n);
            if seen[ni] || (n != t && is_blocked(n)) {
                continue;
            }
            seen[ni] = true;
            parent[ni] = Some(map.index(c));
            queue.push_back(n);
        }
    }
    None
}

pub fn read_map(text: &str) -> Result<GridMap, GridError> {
    let mut lines = text.lines();
    let mut next_header = |key: &str| -> Result<String, GridError> {
        let line = lines.next().ok_or_else(|| GridError::BadHeader(format!("missing `{key}` line")))?;
        let line = line.trim_end_matches('\r');
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(GridError::BadHeader(line.to_string()));
        }
        let rest: Vec<&str> = parts.collect();
        Ok(rest.join(" "))
    };
    if next_header("type")? != "octile" {
        return Err(GridError::BadHeader("expected `type octile`".into()));
    }
    let height: usize = next_header("height")?
        .parse()
        .map_err(|_| GridError::BadHeader("height".into()))?;
    let width: usize = next_header("width")?
        .parse()
        .map_err(|_| GridError::BadHeader("width".into()))?;
    if !next_header("map")?.is_empty() {
        return Err(GridError::BadHeader("trailing tokens after `map`".into()));
    }
    if height == 0 || width == 0 {
        return Err(GridError::BadHeader("empty map".into()));
    }
    let rows: Vec<&str> = lines.map(|l| l.trim_end_matches('\r')).collect();
    let mut map = GridMap::blocked(height, width);
    let mut found = 0;
    for (row, line) in rows.iter().enumerate() {
        if row >= height {
            if line.is_empty() {
                continue;
            }
            return Err(GridError::MissingRows { expected: height, found: row + 1 });
        }
        let chars: Vec<char> = line.chars().collect();
        if chars.len() != width {
            return Err(GridError::RaggedRows { row, len: chars.len(), width });
        }
        for (col, ch) in chars.into_iter().enumerate() {
            match ch {
                '.' => map.set_passable(Cell::new(row, col), true),
                '@' => {}
                other => return Err(GridError::IllegalCharacter { ch: other, row }),
            }
        }
        found += 1;
    }
    if found != height {
        return Err(GridError::MissingRows { expected: height, found });
    }
    Ok(map)
}

pub fn write_map(map: &GridMap) -> String {
    let mut out = format!("type octile\nheight {}\nwidth {}\nmap\n", map.height(), map.width());
    for row in 0..map.height() {
        for col in 0..map.width() {
            out.push(if map.is_passable(Cell::new(row, col)) { '.' } else { '@' });
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bfs_open_and_around_block() {
        let open = GridMap::open(3, 3);
        let d = bfs_distances(&open, Cell::new(0, 0)).unwrap();
        assert_eq!(d.get(Cell::new(2, 2)), Some(4));
        assert_eq!(d.get(Cell::new(0, 0)), Some(0));

        let mut holed = GridMap::open(3, 3);
        holed.set_passable(Cell::new(1, 1), false);
        let d = bfs_distances(&holed, Cell::new(0, 0)).unwrap();
        assert_eq!(d.get(Cell::new(2, 2)), Some(4));
        assert_eq!(d.get(Cell::new(1, 1)), None);
    }

    #[test]
    fn bfs_unreachable_and_errors() {
        let m = read_map("type octile\nheight 1\nwidth 3\nmap\n.@.\n").unwrap();
        let d = bfs_distances(&m, Cell::new(0, 0)).unwrap();
        assert_eq!(d.get(Cell::new(0, 2)), None);
        assert_eq!(bfs_distances(&m, Cell::new(0, 1)), Err(GridError::SourceBlocked(Cell::new(0, 1))));
        assert_eq!(bfs_distances(&m, Cell::new(1, 0)), Err(GridError::OutOfBounds(Cell::new(1, 0))));
    }

    #[test]
    fn constrained_examples() {
        let open = GridMap::open(1, 5);
        let s = Cell::new(0, 0);
        let t = Cell::new(0, 4);
        assert_eq!(constrained_shortest_len(&open, &HashSet::new(), s, t).unwrap(), Some(4));
        let blocked: HashSet<Cell> = [Cell::new(0, 2)].into();
        assert_eq!(constrained_shortest_len(&open, &blocked, s, t).unwrap(), None);
        assert_eq!(
            constrained_shortest_len(&open, &blocked, Cell::new(0, 2), t),
            Err(GridError::EndpointBlocked(Cell::new(0, 2)))
        );
    }

    /// Exhaustive simple-path enumeration, used as an independent oracle.
    fn brute_shortest(map: &GridMap, blocked: &HashSet<Cell>, s: Cell, t: Cell) -> Option<u32> {
        fn go(map: &GridMap, blocked: &HashSet<Cell>, c: Cell, t: Cell, seen: &mut HashSet<Cell>, len: u32, best: &mut Option<u32>) {
            if c == t {
                *best = Some(best.map_or(len, |b| b.min(len)));
                return;
            }
            for n in map.neighbors(c) {
                if blocked.contains(&n) || seen.contains(&n) {
                    continue;
                }
                seen.insert(n);
                go(map, blocked, n, t, seen, len + 1, best);
                seen.remove(&n);
            }
        }
        let mut best = None;
        let mut seen = HashSet::from([s]);
        go(map, blocked, s, t, &mut seen, 0, &mut best);
        best
    }

    #[test]
    fn constrained_three_row_detour_is_manhattan_plus_two() {
        let map = GridMap::open(3, 5);
        let s = Cell::new(1, 0);
        let t = Cell::new(1, 4);
        let blocked: HashSet<Cell> = [Cell::new(1, 2)].into();
        let oracle = brute_shortest(&map, &blocked, s, t).unwrap();
        assert_eq!(oracle, 6);
        assert_eq!(constrained_shortest_len(&map, &blocked, s, t).unwrap(), Some(oracle));
        assert_eq!(oracle as usize, s.manhattan(t) + 2);
    }

    #[test]
    fn map_io() {
        let text = "type octile\nheight 1\nwidth 2\nmap\n.@\n";
        let m = read_map(text).unwrap();
        assert!(m.is_passable(Cell::new(0, 0)));
        assert!(!m.is_passable(Cell::new(0, 1)));
        assert_eq!(write_map(&m), text);

        assert!(matches!(
            read_map("type octile\nheight 2\nwidth 2\nmap\n..\n.\n"),
            Err(GridError::RaggedRows { row: 1, len: 1, width: 2 })
        ));
        assert!(matches!(read_map("type octile\nheight 1\nwidth 2\nmap\n.T\n"), Err(GridError::IllegalCharacter { ch: 'T', .. })));
        assert!(matches!(read_map("type grid\nheight 1\nwidth 1\nmap\n.\n"), Err(GridError::BadHeader(_))));
        assert!(matches!(read_map("type octile\nwidth 1\nheight 1\nmap\n.\n"), Err(GridError::BadHeader(_))));
        assert!(matches!(read_map("type octile\nheight 2\nwidth 1\nmap\n.\n"), Err(GridError::MissingRows { .. })));
    }

    fn arb_map() -> impl Strategy<Value = GridMap> {
        (1usize..=4, 1usize..=5).prop_flat_map(|(h, w)| {
            prop::collection::vec(prop::bool::weighted(0.75), h * w).prop_map(move |cells| {
                let mut m = GridMap::blocked(h, w);
                for (i, p) in cells.into_iter().enumerate() {
                    m.set_passable(Cell::new(i / w, i % w), p);
                }
                m
            })
        })
    }

    proptest! {
        #[test]
        fn write_read_roundtrip(m in arb_map()) {
            prop_assert_eq!(read_map(&write_map(&m)).unwrap(), m);
        }

        #[test]
        fn distance_properties(m in arb_map(), extra in any::<u64>()) {
            let cells: Vec<Cell> = m.passable_cells().collect();
            let fields: Vec<DistanceField> = cells.iter().map(|&c| bfs_distances(&m, c).unwrap()).collect();
            let none = HashSet::new();
            for (a, fa) in cells.iter().zip(&fields) {
                for b in &cells {
                    let d = fa.get(*b);
                    prop_assert_eq!(constrained_shortest_len(&m, &none, *a, *b).unwrap(), d);
                    prop_assert_eq!(brute_shortest(&m, &none, *a, *b), d);
                    // adjacent cells differ by at most one
                    for n in m.neighbors(*b) {
                        if let (Some(x), Some(y)) = (d, fa.get(n)) {
                            prop_assert!(x.abs_diff(y) <= 1);
                        }
                    }
                }
            }
            // triangle inequality
            for (i, fu) in fields.iter().enumerate() {
                for (j, fv) in fields.iter().enumerate() {
                    for w in &cells {
                        if let (Some(uv), Some(vw), Some(uw)) = (fu.get(cells[j]), fv.get(*w), fu.get(*w)) {
                            prop_assert!(uw <= uv + vw, "{} {} {}", i, j, w);
                        }
                    }
                }
            }
            // blocking one more cell never shortens a path
            if cells.len() >= 3 {
                let s = cells[0];
                let t = cells[cells.len() - 1];
                let blk = cells[1 + (extra as usize) % (cells.len() - 2)];
                let before = constrained_shortest_len(&m, &none, s, t).unwrap();
                let after = constrained_shortest_len(&m, &HashSet::from([blk]), s, t).unwrap();
                match (before, after) {
                    (None, Some(_)) => prop_assert!(false, "blocking created a path"),
                    (Some(b), Some(a)) => prop_assert!(a >= b),
                    _ => {}
                }
            }
        }
    }
}
