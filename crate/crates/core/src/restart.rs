//! Sequential restart: task `n` has size `D_n` and is attempted with the
//! marks of point `n` until one mark exceeds the size.

use serde::{Deserialize, Serialize};

use crate::analytic::{expected_restart_time, Classification, ExpectedTime};
use crate::dist::{compare_tails, DistError, Distribution};
use crate::procgen::{MarkStream, MarkedWindow, MarkovRenewalSpec};

pub const DEFAULT_ATTEMPT_CAP: u64 = 1_000_000_000;
/// Expected attempt count above which [`Sampling::Auto`] aggregates.
pub const DEFAULT_AGGREGATE_THRESHOLD: f64 = 1e4;
/// Default relative tolerance of the efficiency diagnostics.
pub const DEFAULT_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RestartError {
    #[error("pathological iteration {index}: no success within {attempts} attempts")]
    Pathological { index: i64, attempts: u64 },
    #[error("mark sequence of point {index} ran out")]
    MarksExhausted { index: i64 },
}

/// How failed attempts are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Every attempt is drawn from the mark stream.
    Exact,
    /// Exact unless `1 / P[L > size]` exceeds `threshold`; then the number of
    /// failures is drawn as one geometric variate and their total from the
    /// conditional law of a failed mark.
    Auto { threshold: f64 },
}

impl Default for Sampling {
    fn default() -> Self {
        Self::Auto {
            threshold: DEFAULT_AGGREGATE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartConfig {
    /// Upper bound on attempts drawn one by one.
    pub attempt_cap: u64,
    pub sampling: Sampling,
}

impl Default for RestartConfig {
    fn default() -> Self {
        Self {
            attempt_cap: DEFAULT_ATTEMPT_CAP,
            sampling: Sampling::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartIterationRecord {
    pub n: i64,
    pub ideal: f64,
    /// Saturates at `u64::MAX` when the actual time overflows.
    pub failures: u64,
    pub actual: f64,
    pub state: Option<usize>,
    pub regime: Option<u8>,
    /// Failures were drawn in aggregate rather than attempt by attempt.
    pub aggregated: bool,
}

/// Runs one task of length `size` against `marks`: every mark `<= size` is a
/// failed attempt of that duration, the first mark `> size` completes it.
pub fn run_restart_iteration<I: Iterator<Item = f64>>(
    size: f64,
    marks: &mut I,
    attempt_cap: u64,
) -> Result<RestartIterationRecord, RestartError> {
    let mut failures = 0u64;
    let mut lost = 0.0;
    loop {
        let m = marks.next().ok_or(RestartError::MarksExhausted { index: 0 })?;
        if m > size {
            break;
        }
        failures += 1;
        lost += m;
        if failures >= attempt_cap {
            return Err(RestartError::Pathological {
                index: 0,
                attempts: failures,
            });
        }
    }
    Ok(RestartIterationRecord {
        n: 0,
        ideal: size,
        failures,
        actual: lost + size,
        state: None,
        regime: None,
        aggregated: false,
    })
}

const EXACT_SUM_LIMIT: f64 = 64.0;

/// Failed attempts against a task of length `size`, drawn in aggregate: the
/// count is Geometric(q) with `q = P[L > size]` and the lost time is their sum
/// under `L | L <= size`, exact for few failures and normal otherwise.
/// Returns `(failures, lost)`; both are `+inf` when `q` is too small for the
/// count to be represented.
pub fn aggregate_failures(size: f64, marks: &mut MarkStream<'_>) -> (f64, f64) {
    let law = marks.law();
    let log_q = law.log_tail(size);
    let q = log_q.exp();
    let u = marks.uniforms().uniform();
    let f = if q >= 1.0 {
        0.0
    } else {
        let ln_fail = if q > 1e-300 { (-q).ln_1p() } else { -q };
        let x = u.ln() / ln_fail;
        if ln_fail == 0.0 || x.is_nan() {
            f64::INFINITY
        } else {
            x.floor()
        }
    };
    let p_fail = -(log_q.exp_m1());
    let lost = if f == 0.0 {
        0.0
    } else if !f.is_finite() {
        f64::INFINITY
    } else if f <= EXACT_SUM_LIMIT {
        let mut s = 0.0;
        for _ in 0..f as u64 {
            let v = marks.uniforms().uniform();
            s += law.quantile(v * p_fail).min(size);
        }
        s
    } else {
        let tm = law.partial_moment(size, 1) / p_fail;
        let t2 = law.truncated_second_moment(size) / p_fail;
        let var = (t2 - tm * tm).max(0.0);
        let z = marks.uniforms().standard_normal();
        (f * tm + (f * var).sqrt() * z).clamp(0.0, f * size)
    };
    (f, lost)
}

pub(crate) fn saturating_count(f: f64) -> u64 {
    if f.is_finite() && f < u64::MAX as f64 {
        f as u64
    } else {
        u64::MAX
    }
}

/// One restart iteration with failures drawn by [`aggregate_failures`].
pub fn run_restart_iteration_aggregated(size: f64, marks: &mut MarkStream<'_>) -> RestartIterationRecord {
    let (f, lost) = aggregate_failures(size, marks);
    RestartIterationRecord {
        n: marks.point_index,
        ideal: size,
        failures: saturating_count(f),
        actual: lost + size,
        state: None,
        regime: None,
        aggregated: true,
    }
}

impl Sampling {
    /// Whether a task of this size against `law` is drawn in aggregate.
    pub fn aggregates(&self, law: &Distribution, size: f64) -> bool {
        match self {
            Sampling::Exact => false,
            Sampling::Auto { threshold } => -law.log_tail(size) > threshold.ln(),
        }
    }
}

/// Restart iteration for point `n` of `window`, which must contain `D_n`.
pub fn restart_point(window: &MarkedWindow, n: i64, lane: u64, config: &RestartConfig) -> Result<RestartIterationRecord, RestartError> {
    let size = window.size_at(n);
    let mut marks = window.marks(n, lane);
    let mut rec = if config.sampling.aggregates(marks.law(), size) {
        run_restart_iteration_aggregated(size, &mut marks)
    } else {
        run_restart_iteration(size, &mut marks, config.attempt_cap).map_err(|e| match e {
            RestartError::Pathological { attempts, .. } => RestartError::Pathological { index: n, attempts },
            RestartError::MarksExhausted { .. } => RestartError::MarksExhausted { index: n },
        })?
    };
    rec.n = n;
    if n >= 0 {
        rec.state = window.state(n as usize);
    }
    rec.regime = window.regime();
    Ok(rec)
}

/// Restarts tasks `0 .. n_iterations` in order, growing the window as needed.
pub fn run_restart(window: &mut MarkedWindow, n_iterations: usize, config: &RestartConfig) -> Result<Vec<RestartIterationRecord>, RestartError> {
    window.ensure(n_iterations);
    (0..n_iterations as i64).map(|n| restart_point(window, n, 0, config)).collect()
}

/// Re-derives a record attempt by attempt from the window's mark stream.
/// Holds exactly for records produced without aggregation.
pub fn audit_record(window: &MarkedWindow, rec: &RestartIterationRecord) -> bool {
    let marks = window.marks(rec.n, 0);
    let size = window.size_at(rec.n);
    let mut lost = 0.0;
    for i in 0..rec.failures {
        let m = marks.mark_at(i);
        if m > size {
            return false;
        }
        lost += m;
    }
    marks.mark_at(rec.failures) > size && lost + size == rec.actual && size == rec.ideal
}

// ---------------------------------------------------------------------------
// efficiency

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    Stable,
    Decreasing,
    Increasing,
}

/// Running ratio of total ideal to total actual time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyEstimate {
    pub ratio: f64,
    pub n_iterations: usize,
    /// Ratio over the first N/4, N/2 and N iterations.
    pub window_ratios: [f64; 3],
    pub converged: bool,
    pub trend: Trend,
}

fn sum_ratio(ideal: f64, actual: f64) -> f64 {
    if actual.is_infinite() {
        0.0
    } else if actual > 0.0 {
        ideal / actual
    } else {
        1.0
    }
}

impl EfficiencyEstimate {
    /// Builds the estimate from `(ideal, actual)` pairs in iteration order.
    pub fn from_pairs<I: IntoIterator<Item = (f64, f64)>>(pairs: I, tolerance: f64) -> Self {
        let pairs: Vec<(f64, f64)> = pairs.into_iter().collect();
        let n = pairs.len();
        let cuts = [(n / 4).max(1), (n / 2).max(1), n.max(1)];
        let mut window_ratios = [0.0; 3];
        let (mut si, mut sa) = (0.0, 0.0);
        let mut next = 0;
        for (i, (a, b)) in pairs.iter().enumerate() {
            si += a;
            sa += b;
            while next < 3 && i + 1 == cuts[next] {
                window_ratios[next] = sum_ratio(si, sa);
                next += 1;
            }
        }
        let ratio = if n == 0 { f64::NAN } else { sum_ratio(si, sa) };
        let [w1, w2, w3] = window_ratios;
        let converged = (w3 - w2).abs() / w3 < tolerance;
        // a ratio that has reached 0 (infinite actual time) counts as still falling
        let drop = |a: f64, b: f64| b == 0.0 || b < a * (1.0 - tolerance);
        let rise = |a: f64, b: f64| b > a * (1.0 + tolerance);
        let trend = if drop(w1, w2) && drop(w2, w3) {
            Trend::Decreasing
        } else if rise(w1, w2) && rise(w2, w3) {
            Trend::Increasing
        } else {
            Trend::Stable
        };
        Self {
            ratio,
            n_iterations: n,
            window_ratios,
            converged,
            trend,
        }
    }
}

pub fn efficiency(records: &[RestartIterationRecord]) -> EfficiencyEstimate {
    EfficiencyEstimate::from_pairs(records.iter().map(|r| (r.ideal, r.actual)), DEFAULT_TOLERANCE)
}

/// `e(N)` at each requested `N`, from one pass over the records.
pub fn efficiency_curve(pairs: &[(f64, f64)], at: &[usize]) -> Vec<(usize, f64)> {
    let (mut si, mut sa) = (0.0, 0.0);
    let mut out = Vec::with_capacity(at.len());
    let mut k = 0;
    for (i, (a, b)) in pairs.iter().enumerate() {
        si += a;
        sa += b;
        while k < at.len() && at[k] == i + 1 {
            out.push((at[k], sum_ratio(si, sa)));
            k += 1;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Markov renewal efficiency

/// Analytic efficiency of a Markov renewal process under restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrpEfficiency {
    /// sum_i pi_i E[D_i]
    pub numerator: ExpectedTime,
    /// sum_i pi_i E[T^R_i]
    pub denominator: ExpectedTime,
    pub efficiency: f64,
    /// Transitions whose size tail is at least as heavy as their failure tail.
    pub slow_pairs: Vec<(usize, usize)>,
}

pub fn mrp_efficiency(spec: &MarkovRenewalSpec) -> Result<MrpEfficiency, DistError> {
    let pi = spec.stationary();
    let k = spec.n_states();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut err = 0.0;
    let mut slow = Vec::new();
    let mut class = Classification::FiniteNumeric;
    for i in 0..k {
        for j in 0..k {
            let p = spec.transition[i][j];
            if p == 0.0 {
                continue;
            }
            let (d, l): (&Distribution, &Distribution) = (spec.size_law(i, j), spec.mark_law(i, j));
            num += pi[i] * p * d.mean();
            if compare_tails(d, l)?.verdict.first_at_least_as_heavy() {
                slow.push((i, j));
                continue;
            }
            let t = expected_restart_time(d, l)?;
            match t.classification {
                Classification::FiniteNumeric | Classification::FiniteProved => {
                    den += pi[i] * p * t.value;
                    err += pi[i] * p * t.abs_error_bound.unwrap_or(0.0);
                }
                other => {
                    if class != Classification::InfiniteProved {
                        class = other;
                    }
                }
            }
        }
    }
    if !slow.is_empty() {
        class = Classification::InfiniteProved;
    }
    let numerator = ExpectedTime::exact(num);
    let (denominator, efficiency) = if class == Classification::FiniteNumeric {
        (
            ExpectedTime {
                value: den,
                classification: class,
                abs_error_bound: Some(err),
            },
            num / den,
        )
    } else {
        (
            ExpectedTime {
                value: f64::INFINITY,
                classification: class,
                abs_error_bound: None,
            },
            0.0,
        )
    };
    Ok(MrpEfficiency {
        numerator,
        denominator,
        efficiency,
        slow_pairs: slow,
    })
}
