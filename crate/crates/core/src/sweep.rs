//! Parameter sweeps: a grid of independent runs, executed in parallel and
//! reported as canonically sorted CSV.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::CrashPolicy;
use crate::config::{RobotsConfig, RunConfig};
use crate::engine::Placement;
use crate::grid::{GridSpec, Orientation};
use crate::protocols::ProtocolId;
use crate::runner::{self, Executed, RunError, RunRecord};

/// Adversary template; seeds and default budgets are filled in per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum AdversarySpec {
    None,
    Random {
        p: f64,
        #[serde(default)]
        f: Option<usize>,
    },
    TargetScouts {
        #[serde(default = "one")]
        q: f64,
        #[serde(default)]
        f: Option<usize>,
    },
    /// The protocol's scripted worst case (see [`runner::worst_case_schedule`]).
    WorstCase,
}

fn one() -> f64 {
    1.0
}

impl AdversarySpec {
    /// Comma-free label used in CSV rows.
    pub fn name(&self) -> String {
        match self {
            AdversarySpec::None => "none".into(),
            AdversarySpec::Random { p, .. } => format!("random_p{p}"),
            AdversarySpec::TargetScouts { q, .. } => format!("target_scouts_q{q}"),
            AdversarySpec::WorstCase => "worst_case".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KName {
    One,
    Half,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSpec {
    Count(usize),
    Named(KName),
}

impl KSpec {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            KSpec::Count(k) => k,
            KSpec::Named(KName::One) => 1,
            KSpec::Named(KName::Half) => n / 2,
            KSpec::Named(KName::Full) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default)]
    pub sides: Vec<usize>,
    /// `(length, width)` pairs.
    #[serde(default)]
    pub rectangles: Vec<(usize, usize)>,
    #[serde(default)]
    pub protocols: Vec<ProtocolId>,
    #[serde(default = "no_crashes")]
    pub adversaries: Vec<AdversarySpec>,
    /// Seeds `0..seeds` per cell; each seed drives placement, port
    /// numbering and adversary alike.
    #[serde(default = "one_seed")]
    pub seeds: u64,
    #[serde(default = "all_ks")]
    pub ks: Vec<KSpec>,
}

fn no_crashes() -> Vec<AdversarySpec> {
    vec![AdversarySpec::None]
}

fn one_seed() -> u64 {
    1
}

fn all_ks() -> Vec<KSpec> {
    vec![KSpec::Named(KName::One), KSpec::Named(KName::Half), KSpec::Named(KName::Full)]
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("cannot read sweep spec: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid sweep spec: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("cell {cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: RunError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub protocol: ProtocolId,
    pub length: usize,
    pub width: usize,
    pub k: usize,
    pub adversary: AdversarySpec,
    pub seed: u64,
}

impl Cell {
    fn label(&self) -> String {
        format!(
            "{} {}x{} k={} {} seed={}",
            self.protocol.as_str(),
            self.length,
            self.width,
            self.k,
            self.adversary.name(),
            self.seed
        )
    }

    fn grid(&self) -> GridSpec {
        let orientation = if self.protocol == ProtocolId::Alg1 {
            Orientation::Oriented
        } else {
            Orientation::Unoriented
        };
        if self.length == self.width {
            GridSpec::square(self.length, orientation, self.seed)
        } else {
            GridSpec::rectangle(self.length, self.width, orientation, self.seed)
        }
    }

    pub fn config(&self) -> Result<RunConfig, RunError> {
        let grid = self.grid();
        let placement = Placement::Seeded { seed: self.seed };
        let (seed, k) = (self.seed, self.k);
        let adversary = match self.adversary {
            AdversarySpec::None => CrashPolicy::None,
            AdversarySpec::Random { p, f } => CrashPolicy::Random { p, seed, f: f.unwrap_or(k) },
            AdversarySpec::TargetScouts { q, f } => CrashPolicy::TargetScouts {
                seed,
                f: f.unwrap_or(k / 2),
                q,
            },
            AdversarySpec::WorstCase => runner::worst_case_schedule(self.protocol, &grid, &placement, k, true)?,
        };
        Ok(RunConfig {
            grid,
            robots: RobotsConfig { k, placement },
            protocol: self.protocol,
            adversary,
            round_budget: None,
            early_stop: true,
            outputs: Default::default(),
        })
    }
}

impl SweepSpec {
    /// Every cell in canonical order. Crash adversaries are skipped for the
    /// fault-free protocol, which rejects them.
    pub fn cells(&self) -> Vec<Cell> {
        let shapes = self.sides.iter().map(|&s| (s, s)).chain(self.rectangles.iter().copied());
        let mut out = Vec::new();
        for (length, width) in shapes {
            let n = length * width;
            for &protocol in &self.protocols {
                for adversary in &self.adversaries {
                    if protocol == ProtocolId::Alg2 && *adversary != AdversarySpec::None {
                        continue;
                    }
                    let mut ks: Vec<usize> = self.ks.iter().map(|k| k.resolve(n)).filter(|&k| k >= 1 && k <= n).collect();
                    ks.dedup();
                    for k in ks {
                        for seed in 0..self.seeds {
                            out.push(Cell {
                                protocol,
                                length,
                                width,
                                k,
                                adversary: adversary.clone(),
                                seed,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub protocol: String,
    pub length: usize,
    pub width: usize,
    pub n: usize,
    pub k: usize,
    pub adversary: String,
    pub seed: u64,
    pub rounds: u64,
    pub dispersed: bool,
    pub passed: bool,
    pub peak_mem_bits: u64,
    pub crashes: usize,
    pub retries: u64,
    pub trips: u64,
    pub iterations: u64,
    pub digest: String,
}

pub const CSV_HEADER: &str = "protocol,length,width,n,k,adversary,seed,rounds,dispersed,passed,peak_mem_bits,crashes,retries,trips,iterations,digest";

impl Row {
    pub fn from_run(cell: &Cell, ex: &Executed) -> Row {
        Row::from_record(&ex.record, cell.adversary.name(), cell.seed)
    }

    /// Row for any finished run; `adversary` must not contain commas.
    pub fn from_record(record: &RunRecord, adversary: String, seed: u64) -> Row {
        let r = &record.result;
        let counter = |name: &str| r.counters.get(name).copied().unwrap_or(0);
        let (length, width) = (record.config.grid.length(), record.config.grid.width());
        Row {
            protocol: record.config.protocol.as_str().to_string(),
            length,
            width,
            n: r.n,
            k: r.k,
            adversary,
            seed,
            rounds: r.rounds_used,
            dispersed: r.dispersed,
            passed: record.passed(),
            peak_mem_bits: r.max_memory_bits,
            crashes: r.crashes,
            retries: counter("retries"),
            trips: counter("trips"),
            iterations: counter("iterations"),
            digest: r.trace_digest.clone(),
        }
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.protocol,
            self.length,
            self.width,
            self.n,
            self.k,
            self.adversary,
            self.seed,
            self.rounds,
            self.dispersed,
            self.passed,
            self.peak_mem_bits,
            self.crashes,
            self.retries,
            self.trips,
            self.iterations,
            self.digest
        )
    }

    fn sort_key(&self) -> (String, usize, usize, usize, String, u64) {
        (self.protocol.clone(), self.length, self.width, self.k, self.adversary.clone(), self.seed)
    }
}

pub fn run_cell(cell: &Cell) -> Result<(Row, Executed), SweepError> {
    let wrap = |source| SweepError::Cell { cell: cell.label(), source };
    let cfg = cell.config().map_err(wrap)?;
    let ex = runner::execute(&cfg).map_err(wrap)?;
    Ok((Row::from_run(cell, &ex), ex))
}

/// Run every cell on `jobs` threads (0 = one per core) and sort the rows.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<Vec<Row>, SweepError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let cells = spec.cells();
    let mut rows = pool.install(|| cells.par_iter().map(|c| run_cell(c).map(|(row, _)| row)).collect::<Result<Vec<_>, _>>())?;
    rows.sort_by_key(Row::sort_key);
    Ok(rows)
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(text: &str) -> SweepSpec {
        serde_json::from_str(text).unwrap()
    }

    #[test]
    fn empty_spec_gives_only_the_header() {
        let rows = run_sweep(&spec("{}"), 1).unwrap();
        assert!(rows.is_empty());
        assert_eq!(to_csv(&rows), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn cells_skip_crashes_for_the_fault_free_protocol() {
        let s = spec(
            r#"{"sides": [4], "protocols": ["alg2", "alg3"], "adversaries": [{"policy": "none"}, {"policy": "random", "p": 0.01}], "seeds": 2, "ks": ["half", 3]}"#,
        );
        let cells = s.cells();
        assert_eq!(cells.iter().filter(|c| c.protocol == ProtocolId::Alg2).count(), 2 * 2);
        assert_eq!(cells.iter().filter(|c| c.protocol == ProtocolId::Alg3).count(), 2 * 2 * 2);
        assert!(cells.iter().all(|c| c.k == 8 || c.k == 3));
    }

    #[test]
    fn sweep_is_sorted_and_repeatable() {
        let s = spec(
            r#"{"sides": [5, 4], "rectangles": [[6, 3]], "protocols": ["alg3", "alg1"], "adversaries": [{"policy": "none"}, {"policy": "worst_case"}], "seeds": 2, "ks": ["full"]}"#,
        );
        let a = to_csv(&run_sweep(&s, 0).unwrap());
        let b = to_csv(&run_sweep(&s, 2).unwrap());
        assert_eq!(a, b);
        let lines: Vec<&str> = a.lines().skip(1).collect();
        assert_eq!(lines.len(), 3 * 2 * 2 * 2);
        assert!(lines[0].starts_with("alg1,4,4,16,16,none,0,"));
        assert!(lines.iter().all(|l| l.split(',').nth(9) == Some("true")), "{a}");
    }
}
