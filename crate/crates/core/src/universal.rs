//! Universal checkpoints under exponential failure marks.
//!
//! `kappa[n]` is the checkpoint reached by one hop from `X_n` using the marks
//! of point `n`. Since the marks belong to the process, every starting point
//! follows the same map and trajectories merge once they meet. `N_n` counts
//! the earlier points whose hop jumps over `X_n`; `N_n = 0` makes `X_n` a
//! checkpoint that every earlier trajectory goes through.

use serde::{Deserialize, Serialize};

use crate::checkpoint::{run_checkpoint_iteration, CheckpointConfig, CheckpointError};
use crate::dist::Distribution;
use crate::procgen::MarkedWindow;
use crate::stats::normal_quantile;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum UniversalError {
    #[error("failure marks must be exponential, got {0}")]
    NonExponentialMarks(String),
    #[error("lookback {lookback} exceeds the {points} points with known hops")]
    LookbackTooLarge { lookback: usize, points: usize },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// Single-hop targets of a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMap {
    /// `kappa[n] > n` for every `n`.
    pub kappa: Vec<usize>,
}

/// Hop from `X_n` with the marks of point `n`; a checkpoint exactly at the
/// winning mark is secured.
pub fn compute_kappa(window: &mut MarkedWindow, n: usize, config: &CheckpointConfig) -> Result<usize, CheckpointError> {
    Ok(run_checkpoint_iteration(window, n, true, config)?.end_index)
}

/// `kappa` for the points `0 .. n_points`. Every point must carry
/// exponential marks.
pub fn compute_trajectory_map(window: &mut MarkedWindow, n_points: usize, config: &CheckpointConfig) -> Result<TrajectoryMap, UniversalError> {
    window.ensure(n_points);
    let mut kappa = Vec::with_capacity(n_points);
    for n in 0..n_points {
        let law = window.mark_law(n as i64);
        if law.exponential_rate().is_none() {
            return Err(UniversalError::NonExponentialMarks(law.to_string()));
        }
        kappa.push(compute_kappa(window, n, config)?);
    }
    Ok(TrajectoryMap { kappa })
}

impl TrajectoryMap {
    /// The trajectory of `X_m` up to the first checkpoint at or beyond
    /// `until`, computed hop by hop.
    pub fn trajectory(&self, m: usize, until: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut x = m;
        while x < until && x < self.kappa.len() {
            x = self.kappa[x];
            out.push(x);
        }
        out
    }
}

/// The process `N_n` for `n` in `lookback ..= kappa.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NProcess {
    pub lookback: usize,
    /// Index of `values[0]`; equal to `lookback`.
    pub first_index: usize,
    pub values: Vec<u32>,
    pub universal_indices: Vec<usize>,
    /// Longest hop `kappa[m] - m` in the window.
    pub max_hop: usize,
    /// No hop is longer than the lookback, so no count was truncated.
    pub boundary_ok: bool,
}

impl NProcess {
    pub fn get(&self, n: usize) -> Option<u32> {
        n.checked_sub(self.first_index).and_then(|i| self.values.get(i).copied())
    }
}

/// `N_n = #{m in [n - B, n) : kappa[m] > n}` with lookback `B`.
pub fn compute_n_process(map: &TrajectoryMap, lookback: usize) -> Result<NProcess, UniversalError> {
    let m_len = map.kappa.len();
    if lookback == 0 || lookback > m_len {
        return Err(UniversalError::LookbackTooLarge {
            lookback,
            points: m_len,
        });
    }
    // point m is counted for n in m+1 ..= min(kappa[m] - 1, m + B)
    let mut diff = vec![0i64; m_len + 2];
    let mut max_hop = 0;
    for (m, &k) in map.kappa.iter().enumerate() {
        max_hop = max_hop.max(k - m);
        let lo = m + 1;
        let hi = (k - 1).min(m + lookback).min(m_len);
        if lo <= hi {
            diff[lo] += 1;
            diff[hi + 1] -= 1;
        }
    }
    let mut values = Vec::with_capacity(m_len + 1 - lookback);
    let mut universal_indices = Vec::new();
    let mut acc = 0i64;
    for (n, dv) in diff.iter().enumerate().take(m_len + 1) {
        acc += dv;
        if n >= lookback {
            values.push(acc as u32);
            if acc == 0 {
                universal_indices.push(n);
            }
        }
    }
    Ok(NProcess {
        lookback,
        first_index: lookback,
        values,
        universal_indices,
        max_hop,
        boundary_ok: max_hop <= lookback,
    })
}

/// Whether the trajectory of every `X_m`, `m` in `[n - B, n)`, passes through
/// `X_n`. Trajectories are resolved from the right so that each point is
/// followed for one hop only.
pub fn verify_universal(map: &TrajectoryMap, n: usize, lookback: usize) -> bool {
    let lo = n.saturating_sub(lookback);
    // hits[m - lo]: trajectory of m contains n
    let mut hits = vec![false; n - lo];
    for m in (lo..n).rev() {
        let k = map.kappa[m];
        hits[m - lo] = match k.cmp(&n) {
            std::cmp::Ordering::Equal => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Less => hits[k - lo],
        };
        if !hits[m - lo] {
            return false;
        }
    }
    true
}

/// [`verify_universal`] without memoization, following each trajectory.
pub fn verify_universal_naive(map: &TrajectoryMap, n: usize, lookback: usize) -> bool {
    (n.saturating_sub(lookback)..n).all(|m| map.trajectory(m, n).last() == Some(&n))
}

/// Mean hop length in points, `1 / (1 - E[e^{-lambda D}])`, and the default
/// lookback of 50 mean hops.
pub fn mean_hop_length(d: &Distribution, lambda: f64) -> f64 {
    1.0 / (1.0 - d.expect(|t| (-lambda * t).exp()))
}

pub fn default_lookback(d: &Distribution, lambda: f64) -> usize {
    (50.0 * mean_hop_length(d, lambda)).ceil() as usize
}

fn binomial(k: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

/// Transition probabilities `P[N_n = j | N_{n-1} = k]` for `j = 0 ..= k+1`,
/// with the hop from `X_{n-1}` weighed independently of the `k` older ones:
/// `(int C(k,j) a^j (1-a)^(k-j) f)(1 - A) + (int C(k,j-1) a^(j-1) (1-a)^(k-j+1) f) A`
/// where `a = e^{-lambda t}` and `A = int a f`.
pub fn kernel_row(d: &Distribution, lambda: f64, k: usize) -> Vec<f64> {
    let a = d.expect(|t| (-lambda * t).exp());
    let mixed = |j: usize| {
        let c = binomial(k, j);
        d.expect(|t| {
            let s = (-lambda * t).exp();
            c * s.powi(j as i32) * (-(-lambda * t).exp_m1()).powi((k - j) as i32)
        })
    };
    let surv: Vec<f64> = (0..=k).map(mixed).collect();
    (0..=k + 1)
        .map(|j| {
            let stay = if j <= k { surv[j] * (1.0 - a) } else { 0.0 };
            let new = if j >= 1 { surv[j - 1] * a } else { 0.0 };
            stay + new
        })
        .collect()
}

/// Transition probabilities when the `k` older hops and the hop from
/// `X_{n-1}` all have to clear the same interval `D_n`: each does so with
/// probability `e^{-lambda D_n}`, so `N_n` is a binomial(k+1) mixture,
/// `int C(k+1,j) a^j (1-a)^(k+1-j) f`.
pub fn shared_interval_row(d: &Distribution, lambda: f64, k: usize) -> Vec<f64> {
    (0..=k + 1)
        .map(|j| {
            let c = binomial(k + 1, j);
            d.expect(|t| c * (-lambda * t).exp().powi(j as i32) * (-(-lambda * t).exp_m1()).powi((k + 1 - j) as i32))
        })
        .collect()
}

/// Which N-chain kernel to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelForm {
    /// [`kernel_row`]
    Factorized,
    /// [`shared_interval_row`]
    SharedInterval,
}

impl KernelForm {
    pub fn row(self, d: &Distribution, lambda: f64, k: usize) -> Vec<f64> {
        match self {
            Self::Factorized => kernel_row(d, lambda, k),
            Self::SharedInterval => shared_interval_row(d, lambda, k),
        }
    }
}

/// One entry of [`kernel_row`]; zero for `j > k + 1`.
pub fn analytic_n_kernel(d: &Distribution, lambda: f64, k: usize, j: usize) -> f64 {
    if j > k + 1 {
        0.0
    } else {
        kernel_row(d, lambda, k)[j]
    }
}

/// Stationary law of the N-chain truncated to `0 ..= max_state`, by power
/// iteration; mass leaving the top state stays there.
pub fn kernel_stationary(d: &Distribution, lambda: f64, max_state: usize, form: KernelForm) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = (0..=max_state).map(|k| form.row(d, lambda, k)).collect();
    let mut pi = vec![0.0; max_state + 1];
    pi[0] = 1.0;
    for _ in 0..100_000 {
        let mut next = vec![0.0; max_state + 1];
        for (k, row) in rows.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                next[j.min(max_state)] += pi[k] * p;
            }
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        let diff = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        pi = next;
        if diff < 1e-14 {
            break;
        }
    }
    pi
}

/// Observed versus analytic transitions out of one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRowReport {
    pub k: usize,
    pub visits: u64,
    pub empirical: Vec<f64>,
    pub analytic: Vec<f64>,
    /// Simultaneous 99% half-widths (Bonferroni over the row's cells).
    pub half_width: Vec<f64>,
    pub inside: bool,
}

/// Compares the observed transitions of `np` with the analytic kernel for
/// rows `0 ..= max_k`.
pub fn kernel_report(np: &NProcess, d: &Distribution, lambda: f64, max_k: usize, level: f64, form: KernelForm) -> Vec<KernelRowReport> {
    (0..=max_k)
        .map(|k| {
            let cells = k + 2;
            let mut counts = vec![0u64; cells];
            let mut visits = 0u64;
            for w in np.values.windows(2) {
                if w[0] as usize == k {
                    visits += 1;
                    let j = w[1] as usize;
                    if j < cells {
                        counts[j] += 1;
                    }
                }
            }
            let analytic = form.row(d, lambda, k);
            let z = normal_quantile(1.0 - (1.0 - level) / (2.0 * cells as f64));
            let n = visits.max(1) as f64;
            let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
            let half_width: Vec<f64> = analytic.iter().map(|p| z * (p * (1.0 - p) / n).sqrt()).collect();
            // counts outside 0..=k+1 would contradict the kernel outright
            let complete = counts.iter().sum::<u64>() == visits;
            let inside = complete
                && visits > 0
                && empirical
                    .iter()
                    .zip(&analytic)
                    .zip(&half_width)
                    .all(|((e, a), h)| (e - a).abs() <= *h);
            KernelRowReport {
                k,
                visits,
                empirical,
                analytic,
                half_width,
                inside,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procgen::generate_renewal;
    use crate::rng::StreamKey;

    fn d(s: &str) -> Distribution {
        s.parse().unwrap()
    }

    #[test]
    fn minimal_hops_make_every_point_universal() {
        let map = TrajectoryMap {
            kappa: (1..=50).collect(),
        };
        let np = compute_n_process(&map, 10).unwrap();
        assert!(np.values.iter().all(|&v| v == 0));
        assert_eq!(np.universal_indices.len(), np.values.len());
        assert!((10..=50).all(|n| verify_universal(&map, n, 10)));
    }

    #[test]
    fn long_hop_is_counted() {
        let mut kappa: Vec<usize> = (1..=30).collect();
        kappa[11] = 15; // from 11 straight to 15
        let map = TrajectoryMap { kappa };
        let np = compute_n_process(&map, 5).unwrap();
        for n in 12..15 {
            assert_eq!(np.get(n), Some(1));
            assert!(!verify_universal(&map, n, 5));
        }
        assert_eq!(np.get(15), Some(0));
        assert!(verify_universal(&map, 15, 5));
        assert!(compute_n_process(&map, 31).is_err());
    }

    #[test]
    fn kernel_exponential_values() {
        let e1 = d("exp(1)");
        assert!((analytic_n_kernel(&e1, 1.0, 0, 1) - 0.5).abs() < 1e-10);
        assert!((analytic_n_kernel(&e1, 1.0, 0, 0) - 0.5).abs() < 1e-10);
        assert!((analytic_n_kernel(&e1, 1.0, 1, 2) - 0.25).abs() < 1e-10);
        assert_eq!(analytic_n_kernel(&e1, 1.0, 1, 3), 0.0);
        for k in 0..=10 {
            let s: f64 = kernel_row(&e1, 1.0, k).iter().sum();
            assert!((s - 1.0).abs() < 1e-8, "row {k} sums to {s}");
        }
        assert!((mean_hop_length(&e1, 1.0) - 2.0).abs() < 1e-10);
        // shared interval: binomial(2, U) mixture, uniform on {0, 1, 2}
        for p in shared_interval_row(&e1, 1.0, 1) {
            assert!((p - 1.0 / 3.0).abs() < 1e-10);
        }
        for k in 0..=10 {
            let s: f64 = shared_interval_row(&d("pareto(1,2)"), 0.5, k).iter().sum();
            assert!((s - 1.0).abs() < 1e-8);
        }
        assert_eq!(default_lookback(&e1, 1.0), 100);
    }

    #[test]
    fn memoized_verification_matches_naive() {
        let mut w = generate_renewal(d("exp(1)"), d("exp(1)"), 0, StreamKey::new(12, 0));
        let map = compute_trajectory_map(&mut w, 3000, &CheckpointConfig::default()).unwrap();
        for n in (100..3000).step_by(7) {
            assert_eq!(verify_universal(&map, n, 100), verify_universal_naive(&map, n, 100));
        }
    }

    #[test]
    fn pareto_marks_rejected() {
        let mut w = generate_renewal(d("exp(1)"), d("pareto(1,2)"), 0, StreamKey::new(1, 0));
        assert!(matches!(
            compute_trajectory_map(&mut w, 10, &CheckpointConfig::default()),
            Err(UniversalError::NonExponentialMarks(_))
        ));
    }
}
