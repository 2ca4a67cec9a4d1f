//! Expected actual time of a single task of size `D` under failures `L`.
//!
//! Given `D = z`, restart takes `m_R(z) = z + E[L 1{L <= z}] / P[L > z]` on
//! average and checkpointing `m_C(z) = E[L] / P[L > z]`. The unconditional
//! expectations integrate these against the law of `D`. The integrals are
//! taken over the upper-tail probability `s = P[D > z]` in dyadic windows,
//! so that a divergent integral shows up as windows that stop shrinking.

use serde::{Deserialize, Serialize};

use crate::dist::{compare_tails, DistError, Distribution};
use crate::quad::{self, WindowedIntegral};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    FiniteProved,
    InfiniteProved,
    FiniteNumeric,
    DivergentNumeric,
}

/// An expected time that may be infinite, with how that was established.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedTime {
    pub value: f64,
    pub classification: Classification,
    pub abs_error_bound: Option<f64>,
}

impl ExpectedTime {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            classification: Classification::FiniteProved,
            abs_error_bound: None,
        }
    }

    pub fn infinite() -> Self {
        Self {
            value: f64::INFINITY,
            classification: Classification::InfiniteProved,
            abs_error_bound: None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.classification, Classification::FiniteProved | Classification::FiniteNumeric)
    }
}

/// `b / P[L > z]` computed through the log tail, `+inf` when the tail is 0.
fn over_tail(l: &Distribution, z: f64, b: f64) -> f64 {
    let lt = l.log_tail(z);
    if lt == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    let r = b * (-lt).exp();
    if r.is_nan() {
        f64::INFINITY
    } else {
        r
    }
}

/// Mean restart time of a task of size `z`.
pub fn m_restart(l: &Distribution, z: f64) -> Result<f64, DistError> {
    let tm = l.truncated_mean(z)?;
    Ok(z + over_tail(l, z, tm))
}

/// Mean checkpointing time to pass a stretch of length `z`.
pub fn m_checkpoint(l: &Distribution, z: f64) -> Result<f64, DistError> {
    if !l.is_integrable() {
        return Err(DistError::NotIntegrable(l.to_string()));
    }
    Ok(over_tail(l, z, l.mean()))
}

/// Integrates `h(z)` against the law of `d` and classifies the result using
/// the tail comparison between `d` and `l`.
fn classified_integral<H: Fn(f64) -> f64>(d: &Distribution, l: &Distribution, h: H) -> Result<(ExpectedTime, Option<WindowedIntegral>), DistError> {
    d.require_regular()?;
    l.require_regular()?;
    let cmp = compare_tails(d, l)?;
    if cmp.verdict.first_at_least_as_heavy() {
        return Ok((ExpectedTime::infinite(), None));
    }
    let known_finite = cmp.verdict.second_strictly_heavier();
    let r = quad::integrate_unit_tail(|s| h(d.tail_inverse(s)), known_finite);
    let t = if r.value.is_finite() && (known_finite || r.converges()) {
        ExpectedTime {
            value: r.value,
            classification: Classification::FiniteNumeric,
            abs_error_bound: Some(r.abs_error),
        }
    } else {
        ExpectedTime {
            value: f64::INFINITY,
            classification: Classification::DivergentNumeric,
            abs_error_bound: None,
        }
    };
    Ok((t, Some(r)))
}

/// `E[T^R]` for a task of random size `d` with failures `l`.
pub fn expected_restart_time(d: &Distribution, l: &Distribution) -> Result<ExpectedTime, DistError> {
    let (mut t, _) = classified_integral(d, l, |z| {
        let tm = l.truncated_mean(z).expect("integrability checked");
        over_tail(l, z, tm)
    })?;
    if t.is_finite() {
        t.value += d.mean();
        if let Some(e) = t.abs_error_bound.as_mut() {
            *e += 4.0 * f64::EPSILON * t.value;
        }
    }
    Ok(t)
}

/// `E[T^C]` for a task of random size `d` with failures `l`.
pub fn expected_checkpoint_time(d: &Distribution, l: &Distribution) -> Result<ExpectedTime, DistError> {
    let (mut t, _) = classified_integral(d, l, |z| over_tail(l, z, 1.0))?;
    if t.is_finite() {
        let m = l.mean();
        t.value *= m;
        t.abs_error_bound = t.abs_error_bound.map(|e| e * m);
    }
    Ok(t)
}
