//! Sequential checkpointing over a renewal window.
//!
//! From checkpoint `X_s` the marks of point `s` are tried until one exceeds
//! `D_s`; the winning mark `W` then secures every checkpoint `X_k` with
//! `X_k - X_s` within `W`, and the next iteration starts at the last one.

use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::procgen::{generate_renewal, MarkedWindow};
use crate::restart::{aggregate_failures, saturating_count, EfficiencyEstimate, Sampling, DEFAULT_ATTEMPT_CAP, DEFAULT_TOLERANCE};
use crate::rng::{Domain, RandomStream, StreamKey};
use crate::stats::{mean_se, MeanSe};

pub const DEFAULT_SCAN_CAP: usize = 1_000_000;
pub const DEFAULT_BURN_IN: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CheckpointError {
    #[error("pathological iteration at checkpoint {index}: no success within {attempts} attempts")]
    Pathological { index: usize, attempts: u64 },
    #[error("hop from checkpoint {index} passed {scanned} checkpoints without landing")]
    ScanCap { index: usize, scanned: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointConfig {
    pub attempt_cap: u64,
    pub scan_cap: usize,
    pub sampling: Sampling,
}

impl Default for CheckpointConfig {
    fn default() -> Self {
        Self {
            attempt_cap: DEFAULT_ATTEMPT_CAP,
            scan_cap: DEFAULT_SCAN_CAP,
            sampling: Sampling::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointIterationRecord {
    pub n: usize,
    pub start_index: usize,
    pub end_index: usize,
    /// Attempts at the start checkpoint, the winning one included.
    pub attempts: u64,
    /// `X_end - X_start`
    pub ideal: f64,
    /// Sum of all drawn marks.
    pub actual: f64,
    /// Winning mark minus `D_start`.
    pub overshoot: f64,
    pub winning_mark: f64,
    pub aggregated: bool,
}

/// One hop from `start`. With `secure_ties` a checkpoint exactly at the
/// winning mark is secured (first hop); otherwise it must lie strictly below.
pub fn run_checkpoint_iteration(
    window: &mut MarkedWindow,
    start: usize,
    secure_ties: bool,
    config: &CheckpointConfig,
) -> Result<CheckpointIterationRecord, CheckpointError> {
    window.ensure(start + 1);
    let size = window.size(start);
    let (attempts, lost, win, aggregated) = {
        let mut marks = window.marks(start as i64, 0);
        let law = marks.law();
        if config.sampling.aggregates(law, size) {
            let log_q = law.log_tail(size);
            let (f, lost) = aggregate_failures(size, &mut marks);
            let u = marks.uniforms().uniform();
            let win = law.log_tail_inverse(log_q + u.ln()).max(size.next_up());
            (saturating_count(f).saturating_add(1), lost, win, true)
        } else {
            let mut attempts = 0u64;
            let mut lost = 0.0;
            let win = loop {
                let m = marks.next().expect("mark streams are infinite");
                attempts += 1;
                if m > size {
                    break m;
                }
                lost += m;
                if attempts >= config.attempt_cap {
                    return Err(CheckpointError::Pathological { index: start, attempts });
                }
            };
            (attempts, lost, win, false)
        }
    };
    let origin = window.point(start);
    let mut end = start + 1;
    loop {
        window.ensure(end + 1);
        let next = window.point(end + 1) - origin;
        let secured = if secure_ties { next <= win } else { next < win };
        if !secured {
            break;
        }
        end += 1;
        if end - start > config.scan_cap {
            return Err(CheckpointError::ScanCap {
                index: start,
                scanned: end - start,
            });
        }
    }
    Ok(CheckpointIterationRecord {
        n: 0,
        start_index: start,
        end_index: end,
        attempts,
        ideal: window.point(end) - origin,
        actual: lost + win,
        overshoot: win - size,
        winning_mark: win,
        aggregated,
    })
}

/// `n_iterations` chained hops starting at `X_0`.
pub fn run_checkpointing(
    window: &mut MarkedWindow,
    n_iterations: usize,
    config: &CheckpointConfig,
) -> Result<Vec<CheckpointIterationRecord>, CheckpointError> {
    let mut out = Vec::with_capacity(n_iterations);
    let mut start = 0;
    for n in 0..n_iterations {
        let mut rec = run_checkpoint_iteration(window, start, n == 0, config)?;
        rec.n = n;
        start = rec.end_index;
        out.push(rec);
    }
    Ok(out)
}

/// Efficiency of a checkpointing run, with the post-burn-in averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEfficiency {
    pub estimate: EfficiencyEstimate,
    pub burn_in: usize,
    pub ideal_after_burn_in: MeanSe,
    pub actual_after_burn_in: MeanSe,
    /// Mean ideal over mean actual after the burn-in.
    pub burn_in_ratio: f64,
}

pub fn checkpoint_efficiency(records: &[CheckpointIterationRecord], burn_in: usize) -> CheckpointEfficiency {
    let estimate = EfficiencyEstimate::from_pairs(records.iter().map(|r| (r.ideal, r.actual)), DEFAULT_TOLERANCE);
    let tail = &records[burn_in.min(records.len())..];
    let ideal: Vec<f64> = tail.iter().map(|r| r.ideal).collect();
    let actual: Vec<f64> = tail.iter().map(|r| r.actual).collect();
    let ideal_after_burn_in = mean_se(&ideal);
    let actual_after_burn_in = mean_se(&actual);
    let burn_in_ratio = if actual_after_burn_in.mean.is_infinite() {
        0.0
    } else {
        ideal_after_burn_in.mean / actual_after_burn_in.mean
    };
    CheckpointEfficiency {
        estimate,
        burn_in,
        ideal_after_burn_in,
        actual_after_burn_in,
        burn_in_ratio,
    }
}

/// Total lifetime at `t` of a fresh renewal process with sizes `d`: the
/// inter-arrival `D_n` with `X_n < t <= X_{n+1}`.
pub fn sample_beta(d: &Distribution, t: f64, stream: &mut RandomStream) -> f64 {
    let mut x = 0.0;
    loop {
        let step = d.sample(stream);
        if x + step >= t {
            return step;
        }
        x += step;
    }
}

/// Covering interval at `t` together with the number of renewal epochs in
/// `(0, t)`.
fn beta_with_count(d: &Distribution, t: f64, stream: &mut RandomStream) -> (f64, u64) {
    let mut x = 0.0;
    let mut count = 0;
    loop {
        let step = d.sample(stream);
        if x + step >= t {
            return (step, count);
        }
        x += step;
        count += 1;
    }
}

/// Runs `n_hops` checkpoint iterations on a fresh window keyed by `key` and
/// returns the inter-arrival starting at the last landed checkpoint.
pub fn sample_first_interval_after_shift(
    d: &Distribution,
    l: &Distribution,
    n_hops: usize,
    key: StreamKey,
    config: &CheckpointConfig,
) -> Result<f64, CheckpointError> {
    assert!(n_hops >= 1, "at least one hop");
    let mut w = generate_renewal(d.clone(), l.clone(), 2, key);
    let recs = run_checkpointing(&mut w, n_hops, config)?;
    let end = recs.last().expect("n_hops >= 1").end_index;
    w.ensure(end + 1);
    Ok(w.size(end))
}

/// The landed interval obtained from an overshoot `z`: `beta(z)`.
pub fn landed_interval_from_overshoot(d: &Distribution, z: f64, stream: &mut RandomStream) -> f64 {
    sample_beta(d, z, stream)
}

/// Landed interval under exponential(`lambda`) marks, where every overshoot
/// is exponential(`lambda`).
pub fn sample_landed_interval_oracle(d: &Distribution, lambda: f64, stream: &mut RandomStream) -> f64 {
    let z = -stream.uniform().ln() / lambda;
    sample_beta(d, z, stream)
}

/// Monte Carlo means of the limit quantities of checkpointing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitMoments {
    pub d_infinity: MeanSe,
    pub nu_infinity: MeanSe,
    pub tau_infinity: MeanSe,
    /// `E[1 / P[L > D_inf]]` over the same `D_inf` draws as `tau_infinity`.
    pub tau_infinity_conditional: MeanSe,
}

const TAU_EXACT_LIMIT: u64 = 10_000_000;

/// Attempts until a fresh mark exceeds `size`.
fn count_attempts(l: &Distribution, size: f64, stream: &mut RandomStream) -> f64 {
    for k in 1..=TAU_EXACT_LIMIT {
        if l.sample(stream) > size {
            return k as f64;
        }
    }
    // continue with the geometric law of the remaining attempts
    let q = l.tail(size);
    TAU_EXACT_LIMIT as f64 + 1.0 + (stream.uniform().ln() / (-q).ln_1p()).floor()
}

/// Estimates `E[D_inf]`, `E[nu_inf]` and `E[tau_inf]`.
///
/// Exponential marks use the closed description of the limit: overshoots are
/// exponential, so `D_inf` is `beta(Z)`. Other marks run `burn_in` hops of the
/// engine per sample and read the next hop.
pub fn estimate_limit_moments(
    d: &Distribution,
    l: &Distribution,
    n_samples: usize,
    key: StreamKey,
    burn_in: usize,
    config: &CheckpointConfig,
) -> Result<LimitMoments, CheckpointError> {
    let mut ds = Vec::with_capacity(n_samples);
    let mut nus = Vec::with_capacity(n_samples);
    let mut taus = Vec::with_capacity(n_samples);
    let mut conds = Vec::with_capacity(n_samples);
    if let Some(lambda) = l.exponential_rate() {
        for i in 0..n_samples {
            let mut s = key.stream(Domain::Auxiliary, i as i64, 0);
            let z = -s.uniform().ln() / lambda;
            let (dd, count) = beta_with_count(d, z, &mut s);
            ds.push(dd);
            nus.push(1.0 + count as f64);
            let z2 = -s.uniform().ln() / lambda;
            let fresh = sample_beta(d, z2, &mut s);
            taus.push(count_attempts(l, fresh, &mut s));
            conds.push((-l.log_tail(fresh)).exp());
        }
    } else {
        for i in 0..n_samples {
            let mut w = generate_renewal(d.clone(), l.clone(), 2, key.child(i as u64));
            let recs = run_checkpointing(&mut w, burn_in + 1, config)?;
            let r = recs.last().expect("at least one hop");
            let dd = w.size(r.start_index);
            ds.push(dd);
            nus.push((r.end_index - r.start_index) as f64);
            taus.push(r.attempts as f64);
            conds.push((-l.log_tail(dd)).exp());
        }
    }
    Ok(LimitMoments {
        d_infinity: mean_se(&ds),
        nu_infinity: mean_se(&nus),
        tau_infinity: mean_se(&taus),
        tau_infinity_conditional: mean_se(&conds),
    })
}
