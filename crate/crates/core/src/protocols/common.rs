use serde::{Deserialize, Serialize};

use crate::engine::RobotId;
use crate::grid::{Direction, GridSpec, NodeProfile};
use crate::kernels::bits;

/// What every robot knows before the run starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Params {
    /// Longer dimension (columns).
    pub length: usize,
    /// Shorter dimension (rows).
    pub width: usize,
    pub k: usize,
}

impl Params {
    pub fn new(spec: &GridSpec, k: usize) -> Self {
        Params {
            length: spec.length(),
            width: spec.width(),
            k,
        }
    }

    pub fn side(&self) -> u64 {
        self.length as u64
    }

    pub fn n(&self) -> u64 {
        (self.length * self.width) as u64
    }

    pub fn id_bits(&self) -> u64 {
        bits(self.k.saturating_sub(1) as u64)
    }

    pub fn count_bits(&self) -> u64 {
        bits(self.n())
    }

    /// Boundary nodes including corners.
    pub fn perimeter(&self) -> usize {
        2 * (self.length + self.width) - 4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Corner {
    NW,
    NE,
    SE,
    SW,
}

/// Which corner a degree-2 node is, from the directions of its two edges.
pub fn corner_identity(profile: &NodeProfile<'_>) -> Option<Corner> {
    let dirs = profile.directions?;
    if dirs.len() != 2 {
        return None;
    }
    let has = |d: Direction| dirs.contains(&d);
    match (has(Direction::E), has(Direction::S)) {
        (true, true) => Some(Corner::NW),
        (false, true) => Some(Corner::NE),
        (false, false) => Some(Corner::SE),
        (true, false) => Some(Corner::SW),
    }
}

/// Ascending position of `me` in `ids` (which must contain it).
pub fn rank_of(ids: &[RobotId], me: RobotId) -> usize {
    ids.iter().position(|&i| i == me).expect("caller is among the ids")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, Orientation};

    #[test]
    fn corners_match_hidden_coordinates() {
        for (l, w) in [(4, 4), (5, 5), (6, 3), (9, 4), (20, 20)] {
            let g = Grid::build(&GridSpec::rectangle(l, w, Orientation::Oriented, 0)).unwrap();
            let at = |r, c| corner_identity(&g.node_profile(g.node_at(r, c)));
            assert_eq!(at(0, 0), Some(Corner::NW));
            assert_eq!(at(0, l - 1), Some(Corner::NE));
            assert_eq!(at(w - 1, l - 1), Some(Corner::SE));
            assert_eq!(at(w - 1, 0), Some(Corner::SW));
            assert_eq!(at(0, 1), None);
        }
        let u = Grid::build(&GridSpec::square(4, Orientation::Unoriented, 0)).unwrap();
        assert_eq!(corner_identity(&u.node_profile(0)), None);
    }
}
