//! Schedule constants and the bounds the checkers assert.
//!
//! `side` is the longer grid dimension (the side of a square grid). Every
//! protocol runs on a fixed global schedule derived from these values, so
//! all robots agree on phase boundaries without communicating.

use serde::Serialize;

use crate::kernels::R_HOP;

/// Ceiling of log2, with `ceil_log2(1) == 0`.
pub fn ceil_log2(x: u64) -> u64 {
    if x <= 1 {
        0
    } else {
        u64::from(64 - (x - 1).leading_zeros())
    }
}

/// Round factor for the fault-free unoriented protocol: rounds <= K_ALG2 * side.
pub const K_ALG2: u64 = 2 * R_HOP + 40;
/// Round factor for the fault-tolerant unoriented protocol:
/// rounds <= K_ALG3 * side * ceil(log2 n).
pub const K_ALG3: u64 = 220;

/// Oriented protocol round bound (8 * side, or 6 * side when both dimensions are odd).
pub fn alg1_bound(side: u64, odd_branch: bool) -> u64 {
    if odd_branch {
        6 * side
    } else {
        8 * side
    }
}

/// End of stage 1 of the fault-free unoriented protocol.
pub fn alg2_t1(side: u64) -> u64 {
    (R_HOP + 1) * side + 3 * side
}

/// Length of the corner-gathering stage.
pub fn alg2_stage2_len(side: u64) -> u64 {
    18 * side
}

pub fn alg2_t2(side: u64) -> u64 {
    alg2_t1(side) + alg2_stage2_len(side)
}

pub fn alg2_t_end(side: u64) -> u64 {
    alg2_t2(side) + (2 * R_HOP + 9) * side + 12 * side
}

pub fn alg3_t1(side: u64, n: u64) -> u64 {
    R_HOP * (side + ceil_log2(n)) + 3 * side
}

/// Length of one seeker trip window.
pub fn alg3_trip_len(side: u64) -> u64 {
    12 * side
}

pub fn alg3_stage2_len(side: u64, n: u64) -> u64 {
    alg3_trip_len(side) * ceil_log2(n) + 6 * side
}

pub fn alg3_t2(side: u64, n: u64) -> u64 {
    alg3_t1(side, n) + alg3_stage2_len(side, n)
}

/// Length of one dispatch iteration from the gathering corner.
pub fn alg3_iter_len(side: u64) -> u64 {
    (2 * R_HOP + 24) * side
}

pub fn alg3_t3(side: u64, n: u64) -> u64 {
    alg3_t2(side, n) + alg3_iter_len(side) * 2 * ceil_log2(n)
}

/// Memory ceiling for the O(log n) protocols.
pub fn log_memory_ceiling(n: u64) -> u64 {
    32 * ceil_log2(n)
}

/// Memory ceiling for the fault-tolerant unoriented protocol.
pub fn alg3_memory_ceiling(side: u64, n: u64) -> u64 {
    8 * side * ceil_log2(n)
}

/// One row of the constants table: what the checkers assert next to the
/// published reference value.
#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub name: &'static str,
    pub implementation: String,
    pub reference: &'static str,
}

pub fn table() -> Vec<BoundRow> {
    vec![
        BoundRow {
            name: "hop budget",
            implementation: format!("{R_HOP}"),
            reference: "56",
        },
        BoundRow {
            name: "alg1 rounds",
            implementation: "8*side (6*side odd)".into(),
            reference: "6*sqrt(n)",
        },
        BoundRow {
            name: "alg2 corner walk",
            implementation: "3*side".into(),
            reference: "3*sqrt(n)",
        },
        BoundRow {
            name: "alg2 gathering",
            implementation: "18*side".into(),
            reference: "18*sqrt(n)",
        },
        BoundRow {
            name: "alg2 rounds",
            implementation: format!("{K_ALG2}*side"),
            reference: "195*sqrt(n)",
        },
        BoundRow {
            name: "alg3 stage 1",
            implementation: format!("{R_HOP}*(side+L)+3*side"),
            reference: "56*log n + 59*sqrt(n)",
        },
        BoundRow {
            name: "alg3 gathering",
            implementation: "12*side*L+6*side".into(),
            reference: "12*sqrt(n)*log n + 6*sqrt(n)",
        },
        BoundRow {
            name: "alg3 rounds",
            implementation: format!("{K_ALG3}*side*L"),
            reference: "236*sqrt(n)*log n",
        },
        BoundRow {
            name: "memory (alg1, alg2)",
            implementation: "32*L bits".into(),
            reference: "O(log n)",
        },
        BoundRow {
            name: "memory (alg3)",
            implementation: "8*side*L bits".into(),
            reference: "2*sqrt(n)*log n",
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log2_ceiling() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(16), 4);
        assert_eq!(ceil_log2(17), 5);
        assert_eq!(ceil_log2(144), 8);
    }

    #[test]
    fn schedule_values() {
        assert_eq!(K_ALG2, 200);
        assert_eq!(alg2_t1(10), 840);
        assert_eq!(alg2_t2(10), 1020);
        assert_eq!(alg2_t_end(10), 1020 + 1690 + 120);
        // side 8: L = 6
        assert_eq!(alg3_t1(8, 64), 80 * 14 + 24);
        assert_eq!(alg3_stage2_len(8, 64), 96 * 6 + 48);
        assert_eq!(alg3_iter_len(8), 184 * 8);
    }
}
