//! Port-labeled grid graphs.
//!
//! A [`Grid`] is the hidden ground truth a simulation runs on. Robot programs
//! only ever see the local [`NodeProfile`] of the node they stand on and the
//! port numbers they choose or arrive through. Coordinates are exposed through
//! [`Grid::oracle_position`] for checkers and tests.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Port numbers are 1-based and bounded by the node degree.
pub type Port = u8;
/// Opaque node index, `row * cols + col`.
pub type NodeId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("grid dimension {0} is below the minimum of 3")]
    TooSmall(usize),
    #[error("rectangle length {length} must be at least its width {width}")]
    LengthBelowWidth { length: usize, width: usize },
    #[error("node {0} does not exist")]
    NoSuchNode(NodeId),
    #[error("port {port} out of range at node {node} (degree {degree})")]
    BadPort { node: NodeId, port: Port, degree: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Oriented,
    Unoriented,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GridShape {
    Square { side: usize },
    Rectangle { length: usize, width: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(flatten)]
    pub shape: GridShape,
    pub orientation: Orientation,
    #[serde(default)]
    pub port_seed: u64,
}

impl GridSpec {
    pub fn square(side: usize, orientation: Orientation, port_seed: u64) -> Self {
        GridSpec {
            shape: GridShape::Square { side },
            orientation,
            port_seed,
        }
    }

    pub fn rectangle(length: usize, width: usize, orientation: Orientation, port_seed: u64) -> Self {
        GridSpec {
            shape: GridShape::Rectangle { length, width },
            orientation,
            port_seed,
        }
    }

    /// Number of columns (the longer side).
    pub fn length(&self) -> usize {
        match self.shape {
            GridShape::Square { side } => side,
            GridShape::Rectangle { length, .. } => length,
        }
    }

    /// Number of rows (the shorter side).
    pub fn width(&self) -> usize {
        match self.shape {
            GridShape::Square { side } => side,
            GridShape::Rectangle { width, .. } => width,
        }
    }

    pub fn node_count(&self) -> usize {
        self.length() * self.width()
    }

    pub fn validate(&self) -> Result<(), GridError> {
        match self.shape {
            GridShape::Square { side } if side < 3 => Err(GridError::TooSmall(side)),
            GridShape::Rectangle { width, .. } if width < 3 => Err(GridError::TooSmall(width)),
            GridShape::Rectangle { length, width } if length < width => Err(GridError::LengthBelowWidth { length, width }),
            _ => Ok(()),
        }
    }
}

/// Geometric direction of an edge, using row-down / column-right coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    N,
    E,
    S,
    W,
}

impl Direction {
    /// Port numbering order used on oriented grids.
    pub const PORT_ORDER: [Direction; 4] = [Direction::W, Direction::S, Direction::E, Direction::N];

    pub fn delta(self) -> (isize, isize) {
        match self {
            Direction::N => (-1, 0),
            Direction::E => (0, 1),
            Direction::S => (1, 0),
            Direction::W => (0, -1),
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::N => Direction::S,
            Direction::E => Direction::W,
            Direction::S => Direction::N,
            Direction::W => Direction::E,
        }
    }

    pub fn clockwise(self) -> Direction {
        match self {
            Direction::N => Direction::E,
            Direction::E => Direction::S,
            Direction::S => Direction::W,
            Direction::W => Direction::N,
        }
    }

    pub fn is_vertical(self) -> bool {
        matches!(self, Direction::N | Direction::S)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeClass {
    Corner,
    Boundary,
    Internal,
}

impl NodeClass {
    pub fn from_degree(degree: u8) -> NodeClass {
        match degree {
            2 => NodeClass::Corner,
            3 => NodeClass::Boundary,
            _ => NodeClass::Internal,
        }
    }
}

/// What a robot standing on a node is allowed to know about it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeProfile<'g> {
    pub degree: u8,
    pub class: NodeClass,
    /// Port-indexed directions (`directions[p - 1]`), oriented grids only.
    pub directions: Option<&'g [Direction]>,
}

impl NodeProfile<'_> {
    /// Port leading in direction `dir`, if the grid is oriented and the edge exists.
    pub fn port_toward(&self, dir: Direction) -> Option<Port> {
        self.directions?.iter().position(|&d| d == dir).map(|i| i as Port + 1)
    }

    pub fn direction_of(&self, port: Port) -> Option<Direction> {
        self.directions?.get(usize::from(port).checked_sub(1)?).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PortEntry {
    to: NodeId,
    entry: Port,
}

#[derive(Debug, Clone)]
pub struct Grid {
    spec: GridSpec,
    rows: usize,
    cols: usize,
    ports: Vec<Vec<PortEntry>>,
    dirs: Vec<Vec<Direction>>,
}

impl Grid {
    pub fn build(spec: &GridSpec) -> Result<Grid, GridError> {
        spec.validate()?;
        let rows = spec.width();
        let cols = spec.length();
        let n = rows * cols;
        let mut dirs = Vec::with_capacity(n);
        for node in 0..n {
            let (r, c) = (node / cols, node % cols);
            let mut present: Vec<Direction> = Direction::PORT_ORDER.iter().copied().filter(|d| step(r, c, *d, rows, cols).is_some()).collect();
            if spec.orientation == Orientation::Unoriented {
                let mut rng = port_rng(spec.port_seed, node as u64);
                present.shuffle(&mut rng);
            }
            dirs.push(present);
        }
        let mut ports = Vec::with_capacity(n);
        for node in 0..n {
            let (r, c) = (node / cols, node % cols);
            let table = dirs[node]
                .iter()
                .map(|&d| {
                    let (nr, nc) = step(r, c, d, rows, cols).expect("direction filtered above");
                    let to = nr * cols + nc;
                    let back = d.opposite();
                    let entry = dirs[to].iter().position(|&x| x == back).expect("edge is symmetric");
                    PortEntry { to, entry: entry as Port + 1 }
                })
                .collect();
            ports.push(table);
        }
        Ok(Grid {
            spec: spec.clone(),
            rows,
            cols,
            ports,
            dirs,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn node_count(&self) -> usize {
        self.ports.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_oriented(&self) -> bool {
        self.spec.orientation == Orientation::Oriented
    }

    pub fn degree(&self, node: NodeId) -> u8 {
        self.ports[node].len() as u8
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node < self.ports.len()
    }

    /// Follow `port` out of `node`; returns the neighbor and the port of the
    /// same edge on the neighbor's side.
    pub fn traverse(&self, node: NodeId, port: Port) -> Result<(NodeId, Port), GridError> {
        let table = self.ports.get(node).ok_or(GridError::NoSuchNode(node))?;
        let idx = usize::from(port).checked_sub(1).filter(|&i| i < table.len());
        match idx {
            Some(i) => Ok((table[i].to, table[i].entry)),
            None => Err(GridError::BadPort {
                node,
                port,
                degree: table.len() as u8,
            }),
        }
    }

    pub fn node_profile(&self, node: NodeId) -> NodeProfile<'_> {
        let degree = self.degree(node);
        NodeProfile {
            degree,
            class: NodeClass::from_degree(degree),
            directions: self.is_oriented().then(|| self.dirs[node].as_slice()),
        }
    }

    /// Hidden `(row, col)` of a node. Never handed to robot programs.
    pub fn oracle_position(&self, node: NodeId) -> (usize, usize) {
        (node / self.cols, node % self.cols)
    }

    /// Hidden geometric direction of a port, for checkers.
    pub fn oracle_direction(&self, node: NodeId, port: Port) -> Direction {
        self.dirs[node][usize::from(port) - 1]
    }

    pub fn node_at(&self, row: usize, col: usize) -> NodeId {
        assert!(row < self.rows && col < self.cols, "({row},{col}) outside grid");
        row * self.cols + col
    }

    /// `(corners, boundary, internal)` counts.
    pub fn census(&self) -> (usize, usize, usize) {
        let mut out = (0, 0, 0);
        for node in 0..self.node_count() {
            match NodeClass::from_degree(self.degree(node)) {
                NodeClass::Corner => out.0 += 1,
                NodeClass::Boundary => out.1 += 1,
                NodeClass::Internal => out.2 += 1,
            }
        }
        out
    }

    /// Stable JSON dump of adjacency and port tables.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct NodeDump {
            id: NodeId,
            pos: [usize; 2],
            ports: Vec<[usize; 2]>,
        }
        #[derive(Serialize)]
        struct GridDump<'a> {
            spec: &'a GridSpec,
            rows: usize,
            cols: usize,
            nodes: Vec<NodeDump>,
        }
        let nodes = (0..self.node_count())
            .map(|id| {
                let (r, c) = self.oracle_position(id);
                NodeDump {
                    id,
                    pos: [r, c],
                    ports: self.ports[id].iter().map(|e| [e.to, usize::from(e.entry)]).collect(),
                }
            })
            .collect();
        serde_json::to_string(&GridDump {
            spec: &self.spec,
            rows: self.rows,
            cols: self.cols,
            nodes,
        })
        .expect("grid dump serializes")
    }
}

fn step(r: usize, c: usize, d: Direction, rows: usize, cols: usize) -> Option<(usize, usize)> {
    let (dr, dc) = d.delta();
    let nr = r.checked_add_signed(dr)?;
    let nc = c.checked_add_signed(dc)?;
    (nr < rows && nc < cols).then_some((nr, nc))
}

/// Counter-based stream keyed by `(seed, node)`.
fn port_rng(seed: u64, node: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oriented(side: usize) -> Grid {
        Grid::build(&GridSpec::square(side, Orientation::Oriented, 0)).unwrap()
    }

    #[test]
    fn census_side_four() {
        assert_eq!(oriented(4).census(), (4, 8, 4));
    }

    #[test]
    fn census_side_three() {
        assert_eq!(oriented(3).census(), (4, 4, 1));
        let g = Grid::build(&GridSpec::square(3, Orientation::Unoriented, 9)).unwrap();
        assert_eq!(g.census(), (4, 4, 1));
    }

    #[test]
    fn census_rectangle_by_enumeration() {
        let g = Grid::build(&GridSpec::rectangle(6, 3, Orientation::Unoriented, 1)).unwrap();
        // count neighbors by coordinates, independent of the port tables
        let mut counts = [0usize; 5];
        for r in 0..3isize {
            for c in 0..6isize {
                let deg = [(-1, 0), (1, 0), (0, -1), (0, 1)]
                    .iter()
                    .filter(|(dr, dc)| (0..3).contains(&(r + dr)) && (0..6).contains(&(c + dc)))
                    .count();
                counts[deg] += 1;
            }
        }
        assert_eq!((counts[2], counts[3], counts[4]), (4, 10, 4));
        assert_eq!(g.census(), (4, 10, 4));
    }

    #[test]
    fn rejects_small_and_inverted() {
        assert_eq!(Grid::build(&GridSpec::square(2, Orientation::Oriented, 0)).unwrap_err(), GridError::TooSmall(2));
        assert!(Grid::build(&GridSpec::rectangle(5, 2, Orientation::Oriented, 0)).is_err());
        assert!(Grid::build(&GridSpec::rectangle(3, 5, Orientation::Oriented, 0)).is_err());
        assert!(Grid::build(&GridSpec::square(0, Orientation::Oriented, 0)).is_err());
    }

    #[test]
    fn traverse_out_of_range() {
        let g = oriented(4);
        assert!(matches!(g.traverse(0, 3), Err(GridError::BadPort { degree: 2, .. })));
        assert!(g.traverse(0, 0).is_err());
        assert!(g.traverse(99, 1).is_err());
    }

    #[test]
    fn oriented_east_port() {
        let g = oriented(5);
        let v = g.node_at(2, 2);
        let east = g.node_profile(v).port_toward(Direction::E).unwrap();
        let (to, _) = g.traverse(v, east).unwrap();
        assert_eq!(g.oracle_position(to), (2, 3));
    }

    #[test]
    fn oriented_internal_layout() {
        // W, S, E, N at an internal node, so the straight continuation of an
        // entry port is two ports further on
        let g = oriented(4);
        let prof = g.node_profile(g.node_at(1, 1));
        assert_eq!(prof.directions.unwrap(), &[Direction::W, Direction::S, Direction::E, Direction::N]);
        let corner = g.node_profile(g.node_at(0, 0));
        assert_eq!(corner.directions.unwrap(), &[Direction::S, Direction::E]);
        assert_eq!(corner.class, NodeClass::Corner);
    }

    #[test]
    fn unoriented_hides_directions() {
        let g = Grid::build(&GridSpec::square(4, Orientation::Unoriented, 7)).unwrap();
        assert!(g.node_profile(5).directions.is_none());
    }

    #[test]
    fn unoriented_ports_are_permutations() {
        let g = Grid::build(&GridSpec::square(4, Orientation::Unoriented, 7)).unwrap();
        for v in 0..g.node_count() {
            let d = g.degree(v);
            let mut seen: Vec<NodeId> = (1..=d).map(|p| g.traverse(v, p).unwrap().0).collect();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), usize::from(d));
        }
    }

    #[test]
    fn corners_at_extremes() {
        let g = Grid::build(&GridSpec::rectangle(7, 4, Orientation::Unoriented, 3)).unwrap();
        let mut corners: Vec<_> = (0..g.node_count()).filter(|&v| g.degree(v) == 2).map(|v| g.oracle_position(v)).collect();
        corners.sort();
        assert_eq!(corners, vec![(0, 0), (0, 6), (3, 0), (3, 6)]);
    }

    #[test]
    fn odd_side_center_is_equidistant() {
        let s = 7;
        let g = oriented(s);
        let mid = (s - 1) / 2;
        let center = g.node_at(mid, mid);
        let dist = |v: NodeId| {
            let (r, c) = g.oracle_position(v);
            r.abs_diff(mid) + c.abs_diff(mid)
        };
        let corner_d: Vec<_> = (0..g.node_count()).filter(|&v| g.degree(v) == 2).map(dist).collect();
        assert!(corner_d.iter().all(|&d| d == s - 1));
        let equidistant = (0..g.node_count())
            .filter(|&v| {
                let (r, c) = g.oracle_position(v);
                let ds: Vec<_> = [(0, 0), (0, s - 1), (s - 1, 0), (s - 1, s - 1)]
                    .iter()
                    .map(|&(a, b): &(usize, usize)| r.abs_diff(a) + c.abs_diff(b))
                    .collect();
                ds.iter().all(|&d| d == ds[0])
            })
            .collect::<Vec<_>>();
        assert_eq!(equidistant, vec![center]);
    }

    #[test]
    fn spec_json_shape() {
        let spec: GridSpec = serde_json::from_str(r#"{"kind":"rectangle","length":8,"width":4,"orientation":"unoriented","port_seed":3}"#).unwrap();
        assert_eq!(spec, GridSpec::rectangle(8, 4, Orientation::Unoriented, 3));
        let sq: GridSpec = serde_json::from_str(r#"{"kind":"square","side":5,"orientation":"oriented"}"#).unwrap();
        assert_eq!(sq.node_count(), 25);
    }
}
