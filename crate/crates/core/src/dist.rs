//! Task-size and failure-time laws.
//!
//! Every family samples by inverse CDF so that one uniform maps to one
//! variate. Tail probabilities are also available in log form because the
//! restart and checkpoint integrands divide by tails that underflow long
//! before the integrals stop contributing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::function::gamma::{gamma, gamma_lr};

use crate::quad;
use crate::rng::RandomStream;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("law {0} is not integrable")]
    NotIntegrable(String),
    #[error("law {0} has bounded support; integrable laws with right-unbounded support are required")]
    BoundedSupport(String),
    #[error("cannot parse distribution `{input}`: {reason}")]
    Parse { input: String, reason: String },
}

/// A probability law on the nonnegative reals.
///
/// Build values through the validating constructors or [`FromStr`]; the
/// variants are public for matching only.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Exponential { rate: f64 },
    Pareto { scale: f64, shape: f64 },
    Weibull { scale: f64, shape: f64 },
    Deterministic { value: f64 },
    Mixture { weights: Vec<f64>, components: Vec<Distribution> },
}

fn positive(name: &str, x: f64) -> Result<f64, DistError> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(DistError::InvalidParameter(format!("{name} must be a positive finite number, got {x}")))
    }
}

/// E[X 1{X <= z}] for X ~ Exp(rate).
fn exp_truncated_mean(rate: f64, z: f64) -> f64 {
    let x = rate * z;
    if x < 1e-3 {
        // 1 - e^{-x}(1 + x) = x^2/2 - x^3/3 + x^4/8 - ...
        x * x * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0) / rate
    } else {
        gamma_lr(2.0, x) / rate
    }
}

impl Distribution {
    pub fn exponential(rate: f64) -> Result<Self, DistError> {
        Ok(Self::Exponential { rate: positive("rate", rate)? })
    }

    pub fn pareto(scale: f64, shape: f64) -> Result<Self, DistError> {
        Ok(Self::Pareto {
            scale: positive("scale", scale)?,
            shape: positive("shape", shape)?,
        })
    }

    pub fn weibull(scale: f64, shape: f64) -> Result<Self, DistError> {
        Ok(Self::Weibull {
            scale: positive("scale", scale)?,
            shape: positive("shape", shape)?,
        })
    }

    pub fn deterministic(value: f64) -> Result<Self, DistError> {
        Ok(Self::Deterministic { value: positive("value", value)? })
    }

    pub fn mixture(weights: Vec<f64>, components: Vec<Distribution>) -> Result<Self, DistError> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(DistError::InvalidParameter(
                "mixture needs one positive weight per component".into(),
            ));
        }
        for &w in &weights {
            positive("mixture weight", w)?;
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(DistError::InvalidParameter(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self::Mixture { weights, components })
    }

    /// P[X > z].
    pub fn tail(&self, z: f64) -> f64 {
        match self {
            Self::Exponential { rate } => (-rate * z.max(0.0)).exp(),
            Self::Pareto { scale, shape } => {
                if z < *scale {
                    1.0
                } else {
                    (scale / z).powf(*shape)
                }
            }
            Self::Weibull { scale, shape } => (-(z.max(0.0) / scale).powf(*shape)).exp(),
            Self::Deterministic { value } => {
                if z < *value {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Mixture { weights, components } => {
                weights.iter().zip(components).map(|(w, c)| w * c.tail(z)).sum()
            }
        }
    }

    /// ln P[X > z]; finite wherever the tail is positive, even if it underflows.
    pub fn log_tail(&self, z: f64) -> f64 {
        match self {
            Self::Exponential { rate } => -rate * z.max(0.0),
            Self::Pareto { scale, shape } => {
                if z < *scale {
                    0.0
                } else {
                    shape * (scale / z).ln()
                }
            }
            Self::Weibull { scale, shape } => -(z.max(0.0) / scale).powf(*shape),
            Self::Deterministic { value } => {
                if z < *value {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Self::Mixture { weights, components } => {
                let logs: Vec<f64> = weights.iter().zip(components).map(|(w, c)| w.ln() + c.log_tail(z)).collect();
                log_sum_exp(&logs)
            }
        }
    }

    /// P[X <= z].
    pub fn cdf(&self, z: f64) -> f64 {
        match self {
            Self::Exponential { rate } => -(-rate * z.max(0.0)).exp_m1(),
            Self::Weibull { scale, shape } => -(-(z.max(0.0) / scale).powf(*shape)).exp_m1(),
            _ => 1.0 - self.tail(z),
        }
    }

    /// Generalized inverse of the CDF: the smallest z with P[X <= z] >= u.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Self::Exponential { rate } => -(-u).ln_1p() / rate,
            Self::Pareto { scale, shape } => scale * (-(-u).ln_1p() / shape).exp(),
            Self::Weibull { scale, shape } => scale * (-(-u).ln_1p()).powf(1.0 / shape),
            Self::Deterministic { value } => *value,
            Self::Mixture { .. } => self.tail_inverse(1.0 - u),
        }
    }

    /// The smallest z with P[X > z] <= p. Accurate for p far below machine
    /// epsilon, unlike `quantile(1 - p)`.
    pub fn tail_inverse(&self, p: f64) -> f64 {
        if p >= 1.0 {
            return self.lower_support();
        }
        self.log_tail_inverse(p.ln())
    }

    /// [`tail_inverse`](Self::tail_inverse) of `exp(log_p)`, usable when the
    /// probability itself underflows.
    pub fn log_tail_inverse(&self, log_p: f64) -> f64 {
        if log_p >= 0.0 {
            return self.lower_support();
        }
        match self {
            Self::Exponential { rate } => -log_p / rate,
            Self::Pareto { scale, shape } => scale * (-log_p / shape).exp(),
            Self::Weibull { scale, shape } => scale * (-log_p).powf(1.0 / shape),
            Self::Deterministic { value } => *value,
            Self::Mixture { components, .. } => {
                if log_p == f64::NEG_INFINITY {
                    return f64::INFINITY;
                }
                let mut lo = 0.0f64;
                // each component tail is below exp(log_p) there, so the mixture's is too
                let mut hi = components.iter().map(|c| c.log_tail_inverse(log_p)).fold(0.0, f64::max);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.log_tail(mid) > log_p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }

    /// Variate obtained from one uniform by inverse CDF.
    pub fn sample_from_uniform(&self, u: f64) -> f64 {
        self.quantile(u)
    }

    pub fn sample(&self, stream: &mut RandomStream) -> f64 {
        self.quantile(stream.uniform())
    }

    fn lower_support(&self) -> f64 {
        match self {
            Self::Pareto { scale, .. } => *scale,
            Self::Deterministic { value } => *value,
            Self::Mixture { components, .. } => components.iter().map(|c| c.lower_support()).fold(f64::INFINITY, f64::min),
            _ => 0.0,
        }
    }

    /// A characteristic length: 1/rate, the scale parameter, or the point mass.
    pub fn scale(&self) -> f64 {
        match self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Pareto { scale, .. } | Self::Weibull { scale, .. } => *scale,
            Self::Deterministic { value } => *value,
            Self::Mixture { components, .. } => components.iter().map(|c| c.scale()).fold(0.0, f64::max),
        }
    }

    pub fn has_unbounded_support(&self) -> bool {
        match self {
            Self::Deterministic { .. } => false,
            Self::Mixture { components, .. } => components.iter().any(|c| c.has_unbounded_support()),
            _ => true,
        }
    }

    pub fn is_integrable(&self) -> bool {
        match self {
            Self::Pareto { shape, .. } => *shape > 1.0,
            Self::Mixture { components, .. } => components.iter().all(|c| c.is_integrable()),
            _ => true,
        }
    }

    /// Rate of an exponential law, `None` for every other family.
    pub fn exponential_rate(&self) -> Option<f64> {
        match self {
            Self::Exponential { rate } => Some(*rate),
            _ => None,
        }
    }

    /// Rejects laws outside the model assumptions: not integrable, or with
    /// bounded support.
    pub fn require_regular(&self) -> Result<(), DistError> {
        if !self.is_integrable() {
            return Err(DistError::NotIntegrable(self.to_string()));
        }
        if !self.has_unbounded_support() {
            return Err(DistError::BoundedSupport(self.to_string()));
        }
        Ok(())
    }

    /// E[X]; `+inf` for non-integrable laws.
    pub fn mean(&self) -> f64 {
        match self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Pareto { scale, shape } => {
                if *shape > 1.0 {
                    shape * scale / (shape - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            Self::Weibull { scale, shape } => scale * gamma(1.0 + 1.0 / shape),
            Self::Deterministic { value } => *value,
            Self::Mixture { weights, components } => {
                weights.iter().zip(components).map(|(w, c)| w * c.mean()).sum()
            }
        }
    }

    /// E[X^2]; `+inf` when infinite.
    pub fn second_moment(&self) -> f64 {
        match self {
            Self::Exponential { rate } => 2.0 / (rate * rate),
            Self::Pareto { scale, shape } => {
                if *shape > 2.0 {
                    shape * scale * scale / (shape - 2.0)
                } else {
                    f64::INFINITY
                }
            }
            Self::Weibull { scale, shape } => scale * scale * gamma(1.0 + 2.0 / shape),
            Self::Deterministic { value } => value * value,
            Self::Mixture { weights, components } => {
                weights.iter().zip(components).map(|(w, c)| w * c.second_moment()).sum()
            }
        }
    }

    /// E[X 1{X <= z}].
    pub fn truncated_mean(&self, z: f64) -> Result<f64, DistError> {
        if !self.is_integrable() {
            return Err(DistError::NotIntegrable(self.to_string()));
        }
        Ok(self.partial_moment(z, 1))
    }

    /// E[X^2 1{X <= z}].
    pub fn truncated_second_moment(&self, z: f64) -> f64 {
        self.partial_moment(z, 2)
    }

    pub(crate) fn partial_moment(&self, z: f64, order: i32) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        match self {
            Self::Exponential { rate } => {
                if order == 1 {
                    exp_truncated_mean(*rate, z)
                } else {
                    2.0 * gamma_lr(3.0, rate * z) / (rate * rate)
                }
            }
            Self::Pareto { scale, shape } => {
                let (s, a) = (*scale, *shape);
                if z <= s {
                    return 0.0;
                }
                let k = order as f64;
                if (a - k).abs() < 1e-12 {
                    a * s.powf(a) * (z / s).ln() * s.powf(k - a)
                } else {
                    // a s^a / (k - a) * (z^(k-a) - s^(k-a)), scaled to avoid overflow
                    a * s.powf(k) / (k - a) * ((z / s).powf(k - a) - 1.0)
                }
            }
            Self::Weibull { scale, shape } => {
                let k = order as f64;
                let x = (z / scale).powf(*shape);
                scale.powf(k) * gamma(1.0 + k / shape) * gamma_lr(1.0 + k / shape, x)
            }
            Self::Deterministic { value } => {
                if *value <= z {
                    value.powi(order)
                } else {
                    0.0
                }
            }
            Self::Mixture { weights, components } => {
                weights.iter().zip(components).map(|(w, c)| w * c.partial_moment(z, order)).sum()
            }
        }
    }

    /// E[h(X)] for bounded, nonnegative `h`, by quadrature over the tail
    /// probability.
    pub fn expect<H: Fn(f64) -> f64>(&self, h: H) -> f64 {
        self.expect_dyn(&h)
    }

    fn expect_dyn(&self, h: &dyn Fn(f64) -> f64) -> f64 {
        match self {
            Self::Deterministic { value } => h(*value),
            Self::Mixture { weights, components } => {
                weights.iter().zip(components).map(|(w, c)| w * c.expect_dyn(h)).sum()
            }
            _ => quad::integrate_unit_tail(|s| h(self.tail_inverse(s)), true).value,
        }
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

// ---------------------------------------------------------------------------
// tail classification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tail {
    Heavy,
    Light,
}

/// Heavy or light tail. Closed-form families are decided exactly; a mixture
/// is heavy iff one of its unbounded components is.
pub fn classify_tail(d: &Distribution) -> Result<Tail, DistError> {
    if !d.has_unbounded_support() {
        return Err(DistError::BoundedSupport(d.to_string()));
    }
    Ok(match d {
        Distribution::Exponential { .. } => Tail::Light,
        Distribution::Pareto { .. } => Tail::Heavy,
        Distribution::Weibull { shape, .. } => {
            if *shape < 1.0 {
                Tail::Heavy
            } else {
                Tail::Light
            }
        }
        Distribution::Mixture { components, .. } => {
            let heavy = components
                .iter()
                .filter(|c| c.has_unbounded_support())
                .any(|c| matches!(classify_tail(c), Ok(Tail::Heavy)));
            if heavy {
                Tail::Heavy
            } else {
                Tail::Light
            }
        }
        Distribution::Deterministic { .. } => unreachable!("bounded support rejected above"),
    })
}

/// Numeric heaviness probe: heavy iff e^{gamma t} P[X > t] is increasing over
/// the last probe points for every gamma in {2^-k : k = 0..20}, with
/// t in {10, 20, ..., 200} times the law's scale.
///
/// This only sees t up to 200 scales, so slowly decaying laws such as
/// Pareto with a large shape, or Weibull with shape close to 1, can be
/// reported light. [`classify_tail`] does not rely on it.
pub fn probe_tail(d: &Distribution) -> Result<Tail, DistError> {
    if !d.has_unbounded_support() {
        return Err(DistError::BoundedSupport(d.to_string()));
    }
    const TRAILING: usize = 5;
    let s = d.scale();
    let ts: Vec<f64> = (1..=20).map(|i| 10.0 * i as f64 * s).collect();
    for k in 0..=20 {
        let g = (0.5f64).powi(k) / s;
        let vals: Vec<f64> = ts.iter().map(|&t| g * t + d.log_tail(t)).collect();
        let n = vals.len();
        let increasing = vals[n - TRAILING - 1..].windows(2).all(|w| w[1] > w[0]);
        if !increasing {
            return Ok(Tail::Light);
        }
    }
    Ok(Tail::Heavy)
}

// ---------------------------------------------------------------------------
// tail comparison

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    FirstHeavier,
    FirstStrictHeavier,
    SecondHeavier,
    SecondStrictHeavier,
    Equal,
    Inconclusive,
}

impl Verdict {
    /// The verdict with the roles of the two laws exchanged.
    pub fn mirrored(self) -> Self {
        match self {
            Self::FirstHeavier => Self::SecondHeavier,
            Self::FirstStrictHeavier => Self::SecondStrictHeavier,
            Self::SecondHeavier => Self::FirstHeavier,
            Self::SecondStrictHeavier => Self::FirstStrictHeavier,
            v => v,
        }
    }

    pub fn first_at_least_as_heavy(self) -> bool {
        matches!(self, Self::FirstHeavier | Self::FirstStrictHeavier | Self::Equal)
    }

    pub fn second_strictly_heavier(self) -> bool {
        matches!(self, Self::SecondStrictHeavier)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailComparison {
    pub verdict: Verdict,
    /// Smallest grid abscissa from which the verdict holds on the whole grid.
    pub witness_z0: f64,
    /// Exponent of a strict verdict; absent otherwise.
    pub witness_epsilon: Option<f64>,
    pub grid: Vec<f64>,
}

/// Number of dyadic upper quantiles of max(v, w) probed.
pub const COMPARE_GRID_LEN: usize = 40;
/// A verdict must hold on at least this many trailing grid points.
pub const COMPARE_MIN_SUPPORT: usize = 5;

/// Exponents tried for strict heaviness, ascending. Besides 2^-k the grid has
/// 1 - 2^-k so that close tails can still be separated.
pub fn epsilon_grid() -> Vec<f64> {
    let mut e: Vec<f64> = (1..=10).map(|k| (0.5f64).powi(k)).collect();
    e.extend((2..=10).map(|k| 1.0 - (0.5f64).powi(k)));
    e.sort_by(f64::total_cmp);
    e
}

fn max_quantile(v: &Distribution, w: &Distribution, p: f64) -> f64 {
    // tail of max(V, W) = tv + tw - tv tw, decreasing in z
    let tail_max = |z: f64| {
        let (a, b) = (v.tail(z), w.tail(z));
        a + b - a * b
    };
    let mut lo = v.tail_inverse(p).max(w.tail_inverse(p));
    let mut hi = v.tail_inverse(0.5 * p).max(w.tail_inverse(0.5 * p));
    if tail_max(lo) <= p {
        return lo;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if tail_max(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn holds(a: f64, b: f64, eps: f64) -> bool {
    // a >= eps * b for log tails a, b <= 0, with a relative slack
    let rhs = eps * b;
    a >= rhs - 1e-9 * rhs.abs() - 1e-300
}

/// First grid index from which `rel` holds to the end, if that leaves enough
/// support.
fn trailing_start(rel: impl Fn(usize) -> bool, n: usize) -> Option<usize> {
    let mut start = n;
    while start > 0 && rel(start - 1) {
        start -= 1;
    }
    if n - start >= COMPARE_MIN_SUPPORT {
        Some(start)
    } else {
        None
    }
}

/// Decides which of two laws has the heavier tail on a grid of dyadic upper
/// quantiles of max(v, w).
pub fn compare_tails(v: &Distribution, w: &Distribution) -> Result<TailComparison, DistError> {
    for d in [v, w] {
        if !d.has_unbounded_support() {
            return Err(DistError::BoundedSupport(d.to_string()));
        }
    }
    let grid: Vec<f64> = (1..=COMPARE_GRID_LEN as i32).map(|k| max_quantile(v, w, (0.5f64).powi(k))).collect();
    if v == w {
        return Ok(TailComparison {
            verdict: Verdict::Equal,
            witness_z0: grid[0],
            witness_epsilon: None,
            grid,
        });
    }
    let lv: Vec<f64> = grid.iter().map(|&z| v.log_tail(z)).collect();
    let lw: Vec<f64> = grid.iter().map(|&z| w.log_tail(z)).collect();
    let n = grid.len();
    let found = |verdict, start: usize, eps| TailComparison {
        verdict,
        witness_z0: grid[start],
        witness_epsilon: eps,
        grid: grid.clone(),
    };
    for eps in epsilon_grid() {
        let second = trailing_start(|i| holds(lw[i], lv[i], eps), n);
        let first = trailing_start(|i| holds(lv[i], lw[i], eps), n);
        match (first, second) {
            (None, Some(i)) => return Ok(found(Verdict::SecondStrictHeavier, i, Some(eps))),
            (Some(i), None) => return Ok(found(Verdict::FirstStrictHeavier, i, Some(eps))),
            (Some(_), Some(_)) => return Ok(found(Verdict::Inconclusive, n - 1, None)),
            (None, None) => {}
        }
    }
    let second = trailing_start(|i| holds(lw[i], lv[i], 1.0), n);
    let first = trailing_start(|i| holds(lv[i], lw[i], 1.0), n);
    Ok(match (first, second) {
        (None, Some(i)) => found(Verdict::SecondHeavier, i, None),
        (Some(i), None) => found(Verdict::FirstHeavier, i, None),
        _ => found(Verdict::Inconclusive, n - 1, None),
    })
}

// ---------------------------------------------------------------------------
// text form: exp(rate), pareto(scale,shape), weibull(scale,shape), det(value),
// mix(w1*d1, w2*d2, ...)

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exponential { rate } => write!(f, "exp({rate})"),
            Self::Pareto { scale, shape } => write!(f, "pareto({scale},{shape})"),
            Self::Weibull { scale, shape } => write!(f, "weibull({scale},{shape})"),
            Self::Deterministic { value } => write!(f, "det({value})"),
            Self::Mixture { weights, components } => {
                write!(f, "mix(")?;
                for (i, (w, c)) in weights.iter().zip(components).enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{w}*{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

impl FromStr for Distribution {
    type Err = DistError;

    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let fail = |reason: &str| DistError::Parse {
            input: input.to_string(),
            reason: reason.to_string(),
        };
        let s = input.trim();
        let open = s.find('(').ok_or_else(|| fail("expected `name(arguments)`"))?;
        if !s.ends_with(')') {
            return Err(fail("missing closing parenthesis"));
        }
        let name = s[..open].trim().to_ascii_lowercase();
        let body = &s[open + 1..s.len() - 1];
        let args = split_top_level(body);
        let numbers = || -> Result<Vec<f64>, DistError> {
            args.iter()
                .map(|a| a.trim().parse::<f64>().map_err(|_| fail(&format!("`{}` is not a number", a.trim()))))
                .collect()
        };
        let arity = |k: usize, xs: &[f64]| {
            if xs.len() == k {
                Ok(())
            } else {
                Err(fail(&format!("{name} takes {k} argument(s), got {}", xs.len())))
            }
        };
        match name.as_str() {
            "exp" | "exponential" => {
                let x = numbers()?;
                arity(1, &x)?;
                Self::exponential(x[0])
            }
            "pareto" => {
                let x = numbers()?;
                arity(2, &x)?;
                Self::pareto(x[0], x[1])
            }
            "weibull" => {
                let x = numbers()?;
                arity(2, &x)?;
                Self::weibull(x[0], x[1])
            }
            "det" | "deterministic" => {
                let x = numbers()?;
                arity(1, &x)?;
                Self::deterministic(x[0])
            }
            "mix" | "mixture" => {
                let mut weights = Vec::new();
                let mut comps = Vec::new();
                for term in args {
                    let (w, d) = term
                        .split_once('*')
                        .ok_or_else(|| fail(&format!("mixture term `{}` must read weight*law", term.trim())))?;
                    weights.push(
                        w.trim()
                            .parse::<f64>()
                            .map_err(|_| fail(&format!("`{}` is not a weight", w.trim())))?,
                    );
                    comps.push(d.parse()?);
                }
                Self::mixture(weights, comps)
            }
            other => Err(fail(&format!("unknown family `{other}`"))),
        }
    }
}

impl Serialize for Distribution {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Distribution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
