//! Restart driven by a random walk over task indices.
//!
//! Visit `j` sits at task `zeta_j` (with `zeta_0 = 0`), runs one restart
//! iteration there and then steps down with probability `p`, up otherwise.
//! The `v`-th visit to a task uses mark lane `v`, so repeated visits see fresh
//! failures while the task keeps its size. With `p = 0` the walk is plain
//! sequential restart.

use serde::{Deserialize, Serialize};

use crate::analytic::expected_restart_time;
use crate::dist::{DistError, Distribution};
use crate::procgen::{MarkedWindow, ProcessError};
use crate::restart::{restart_point, EfficiencyEstimate, RestartConfig, RestartError, RestartIterationRecord, DEFAULT_TOLERANCE};
use crate::rng::{Domain, StreamKey};
use crate::stats::{lag1_autocorrelation, mean_se, ratio_se, MeanSe};

/// A candidate regeneration is confirmed once the chance of a later dip below
/// it is under this level.
pub const CENSOR_LEVEL: f64 = 1e-9;
/// Step horizon of the walks used to estimate `gamma` and `rho`.
pub const WALK_HORIZON: usize = 10_000;
/// Fewest confirmed regeneration blocks for a walk efficiency estimate.
pub const MIN_BLOCKS: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum WalkError {
    #[error("down-step probability must lie in [0, 1/2), got {0}")]
    Probability(f64),
    #[error("only {found} regeneration blocks, at least {needed} needed")]
    TooFewBlocks { found: usize, needed: usize },
    #[error(transparent)]
    Restart(#[from] RestartError),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisitRecord {
    pub visit: usize,
    pub task: i64,
    /// Earlier visits to the same task; also the mark lane.
    pub lane: u64,
    pub record: RestartIterationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkTrace {
    pub p: f64,
    pub visits: Vec<VisitRecord>,
    /// `zeta_0 ..= zeta_J`; one longer than `visits`.
    pub positions: Vec<i64>,
    /// Visits at which the walk first reaches a new maximum, `0` included.
    pub ladder_epochs: Vec<usize>,
}

/// Walks until the position first reaches `n_tasks`, i.e. until tasks
/// `0 .. n_tasks` have each been reached from below.
pub fn simulate_walk_restart(window: &mut MarkedWindow, p: f64, n_tasks: usize, config: &RestartConfig) -> Result<WalkTrace, WalkError> {
    if !(0.0..0.5).contains(&p) {
        return Err(WalkError::Probability(p));
    }
    window.ensure(n_tasks);
    let mut steps = window.key().stream(Domain::Walk, 0, 0);
    let mut visits = Vec::new();
    let mut positions = vec![0i64];
    let mut ladder_epochs = vec![0];
    let mut fwd_lanes = vec![0u64; n_tasks];
    let mut back_lanes: Vec<u64> = Vec::new();
    let mut zeta = 0i64;
    let mut max = 0i64;
    while zeta < n_tasks as i64 {
        let lane = if zeta >= 0 {
            &mut fwd_lanes[zeta as usize]
        } else {
            let k = (-zeta) as usize;
            if back_lanes.len() < k {
                back_lanes.resize(k, 0);
                window.ensure_back(k)?;
            }
            &mut back_lanes[k - 1]
        };
        let record = restart_point(window, zeta, *lane, config)?;
        visits.push(VisitRecord {
            visit: visits.len(),
            task: zeta,
            lane: *lane,
            record,
        });
        *lane += 1;
        zeta += if p > 0.0 && steps.uniform() < p { -1 } else { 1 };
        positions.push(zeta);
        if zeta > max {
            max = zeta;
            ladder_epochs.push(positions.len() - 1);
        }
    }
    Ok(WalkTrace {
        p,
        visits,
        positions,
        ladder_epochs,
    })
}

/// Heights above a candidate that make a later dip below it rarer than
/// [`CENSOR_LEVEL`].
pub fn censor_margin(p: f64) -> i64 {
    if p == 0.0 {
        0
    } else {
        (CENSOR_LEVEL.ln() / (p / (1.0 - p)).ln()).ceil() as i64
    }
}

/// Ladder epochs after which the walk never goes below its level again.
/// Only candidates with at least [`censor_margin`] levels of room above them
/// at the end of the trace are confirmed.
pub fn find_regenerations(trace: &WalkTrace) -> Vec<usize> {
    let pos = &trace.positions;
    let last = *pos.last().expect("trace has a start");
    let margin = censor_margin(trace.p);
    // suffix minima of the positions
    let mut suffix_min = pos.clone();
    for i in (0..pos.len().saturating_sub(1)).rev() {
        suffix_min[i] = suffix_min[i].min(suffix_min[i + 1]);
    }
    trace
        .ladder_epochs
        .iter()
        .copied()
        .filter(|&j| suffix_min[j] >= pos[j] && last - pos[j] + 1 >= margin)
        .collect()
}

/// Work between two consecutive regenerations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub time: f64,
    pub visits: usize,
    pub levels: i64,
    /// Sizes of the tasks first reached in the block.
    pub ideal: f64,
}

pub fn regeneration_blocks(trace: &WalkTrace, regenerations: &[usize]) -> Vec<Block> {
    regenerations
        .windows(2)
        .map(|w| {
            let visits = &trace.visits[w[0]..w[1]];
            let (lo, hi) = (trace.positions[w[0]], trace.positions[w[1]]);
            let mut ideal = 0.0;
            let mut first = std::collections::HashSet::new();
            for v in visits {
                if v.task >= lo && v.task < hi && first.insert(v.task) {
                    ideal += v.record.ideal;
                }
            }
            Block {
                time: visits.iter().map(|v| v.record.actual).sum(),
                visits: w[1] - w[0],
                levels: hi - lo,
                ideal,
            }
        })
        .collect()
}

/// Walk efficiency estimates from one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkEfficiency {
    /// Total ideal over total time, over complete blocks.
    pub direct: EfficiencyEstimate,
    pub direct_se: f64,
    /// `E[D] E[dzeta] / (E[T] E[dupsilon])`.
    pub formula: f64,
    pub mean_size: f64,
    /// Mean time per visit, analytic when finite.
    pub mean_visit_time: f64,
    pub block_visits: MeanSe,
    pub block_levels: MeanSe,
    pub block_time: MeanSe,
    /// Mean of `block time - E[T] block visits`; zero in expectation.
    pub wald_residual: MeanSe,
    /// Lag-1 autocorrelation of block times.
    pub block_time_lag1: f64,
    pub n_blocks: usize,
}

pub fn walk_efficiency(trace: &WalkTrace, d: &Distribution, l: &Distribution) -> Result<WalkEfficiency, WalkError> {
    let regen = find_regenerations(trace);
    let blocks = regeneration_blocks(trace, &regen);
    if blocks.len() < MIN_BLOCKS {
        return Err(WalkError::TooFewBlocks {
            found: blocks.len(),
            needed: MIN_BLOCKS,
        });
    }
    let mean_size = d.mean();
    let analytic_t = expected_restart_time(d, l)?;
    let mean_visit_time = if analytic_t.is_finite() {
        analytic_t.value
    } else {
        f64::INFINITY
    };
    let block_visits = mean_se(&blocks.iter().map(|b| b.visits as f64).collect::<Vec<_>>());
    let block_levels = mean_se(&blocks.iter().map(|b| b.levels as f64).collect::<Vec<_>>());
    let times: Vec<f64> = blocks.iter().map(|b| b.time).collect();
    let block_time = mean_se(&times);
    let wald_residual = mean_se(&blocks.iter().map(|b| b.time - mean_visit_time * b.visits as f64).collect::<Vec<_>>());
    let formula = if mean_visit_time.is_finite() {
        mean_size * block_levels.mean / (mean_visit_time * block_visits.mean)
    } else {
        0.0
    };
    let pairs: Vec<(f64, f64)> = blocks.iter().map(|b| (b.ideal, b.time)).collect();
    Ok(WalkEfficiency {
        direct: EfficiencyEstimate::from_pairs(pairs.iter().copied(), DEFAULT_TOLERANCE),
        direct_se: ratio_se(&pairs),
        formula,
        mean_size,
        mean_visit_time,
        block_visits,
        block_levels,
        block_time,
        wald_residual,
        block_time_lag1: lag1_autocorrelation(&times),
        n_blocks: blocks.len(),
    })
}

/// Monte Carlo estimates of `gamma = P[walk never drops below its start]`
/// and `rho = E[visits to the start]`, with the finite horizon corrected by
/// the exact escape probability from the final height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConstants {
    pub gamma: f64,
    pub rho: f64,
    pub n_walks: usize,
}

pub fn estimate_walk_constants(p: f64, n_walks: usize, key: StreamKey) -> WalkConstants {
    let r = p / (1.0 - p);
    let (mut stay, mut escape) = (0.0, 0.0);
    for w in 0..n_walks {
        let mut s = key.stream(Domain::Walk, 1 + w as i64, 0);
        let mut h = 0i64;
        let mut below = false;
        let mut returned = false;
        for _ in 0..WALK_HORIZON {
            h += if s.uniform() < p { -1 } else { 1 };
            below |= h < 0;
            returned |= h == 0;
            if below && returned {
                break;
            }
            // past this height the corrections below are exact to rounding
            if r.powi(h as i32) < 1e-17 {
                break;
            }
        }
        if !below {
            stay += 1.0 - r.powi((h + 1) as i32);
        }
        if !returned && h > 0 {
            escape += 1.0 - r.powi(h as i32);
        }
    }
    let n = n_walks as f64;
    WalkConstants {
        gamma: stay / n,
        rho: n / escape,
        n_walks,
    }
}
