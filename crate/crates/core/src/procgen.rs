//! Finite windows of marked point processes with a point at the origin.
//!
//! A [`MarkedWindow`] holds the inter-arrival sizes generated so far and grows
//! on demand in both directions. Sizes, chain states and marks are read from
//! keyed streams, so growing a window never changes the entries it already
//! has, and the marks of a point can be re-read at any time.

use std::sync::Arc;

use crate::dist::{DistError, Distribution};
use crate::rng::{Domain, RandomStream, StreamKey};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProcessError {
    #[error("transition matrix: {0}")]
    Transition(String),
    #[error("initial distribution: {0}")]
    Initial(String),
    #[error("law for transition ({from}, {to}): {source}")]
    Law {
        from: usize,
        to: usize,
        #[source]
        source: DistError,
    },
    #[error("law for transition ({from}, {to}) is missing")]
    MissingLaw { from: usize, to: usize },
    #[error("mixture probability p0 = {0} is outside [0, 1]")]
    MixtureProbability(f64),
    #[error("{0}")]
    Unsupported(String),
}

/// Law of chain state `Y_0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    Vector(Vec<f64>),
    Stationary,
}

/// A Markov renewal process: states follow a finite chain and the size and
/// failure law of each step depend on the transition taken.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovRenewalSpec {
    pub states: Vec<String>,
    pub transition: Vec<Vec<f64>>,
    pub initial: Initial,
    /// Size law per transition `(i, j)`; required where `P[i][j] > 0`.
    pub sizes: Vec<Vec<Option<Distribution>>>,
    /// Failure-mark law per transition `(i, j)`.
    pub marks: Vec<Vec<Option<Distribution>>>,
    stationary: Vec<f64>,
}

const ROW_SUM_TOL: f64 = 1e-12;

impl MarkovRenewalSpec {
    /// Validates the chain and every law it uses, and solves for the
    /// stationary distribution.
    pub fn new(
        states: Vec<String>,
        transition: Vec<Vec<f64>>,
        initial: Initial,
        sizes: Vec<Vec<Option<Distribution>>>,
        marks: Vec<Vec<Option<Distribution>>>,
    ) -> Result<Self, ProcessError> {
        let k = states.len();
        if k == 0 {
            return Err(ProcessError::Transition("no states".into()));
        }
        if transition.len() != k || transition.iter().any(|r| r.len() != k) {
            return Err(ProcessError::Transition(format!("expected a {k}x{k} matrix")));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(ProcessError::Transition(format!("row {i} has an entry outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(ProcessError::Transition(format!("row {i} sums to {s}")));
            }
        }
        if !irreducible(&transition) {
            return Err(ProcessError::Transition("chain is reducible".into()));
        }
        if let Initial::Vector(a) = &initial {
            if a.len() != k || a.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(ProcessError::Initial(format!("expected {k} probabilities")));
            }
            let s: f64 = a.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(ProcessError::Initial(format!("sums to {s}")));
            }
        }
        for table in [&sizes, &marks] {
            if table.len() != k || table.iter().any(|r| r.len() != k) {
                return Err(ProcessError::Transition(format!("law tables must be {k}x{k}")));
            }
            for i in 0..k {
                for j in 0..k {
                    if transition[i][j] > 0.0 {
                        let law = table[i][j].as_ref().ok_or(ProcessError::MissingLaw { from: i, to: j })?;
                        law.require_regular()
                            .map_err(|source| ProcessError::Law { from: i, to: j, source })?;
                    }
                }
            }
        }
        let stationary = stationary_distribution(&transition);
        Ok(Self {
            states,
            transition,
            initial,
            sizes,
            marks,
            stationary,
        })
    }

    /// A one-state chain, equivalent to a renewal process.
    pub fn single(size: Distribution, mark: Distribution) -> Result<Self, ProcessError> {
        Self::new(
            vec!["0".into()],
            vec![vec![1.0]],
            Initial::Stationary,
            vec![vec![Some(size)]],
            vec![vec![Some(mark)]],
        )
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    /// The stationary distribution pi, with pi P = pi.
    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn size_law(&self, i: usize, j: usize) -> &Distribution {
        self.sizes[i][j].as_ref().expect("validated: law present for a possible transition")
    }

    pub fn mark_law(&self, i: usize, j: usize) -> &Distribution {
        self.marks[i][j].as_ref().expect("validated: law present for a possible transition")
    }

    fn initial_probabilities(&self) -> &[f64] {
        match &self.initial {
            Initial::Vector(a) => a,
            Initial::Stationary => &self.stationary,
        }
    }
}

/// Every state reaches every other state.
pub fn irreducible(p: &[Vec<f64>]) -> bool {
    let k = p.len();
    (0..k).all(|start| {
        let mut seen = vec![false; k];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for j in 0..k {
                if p[i][j] > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    })
}

/// Stationary distribution by fixed-point iteration on the lazy chain
/// (P + I)/2, which has the same invariant law and converges for periodic
/// chains too.
pub fn stationary_distribution(p: &[Vec<f64>]) -> Vec<f64> {
    let k = p.len();
    let mut pi = vec![1.0 / k as f64; k];
    for _ in 0..10_000_000 {
        let mut next = vec![0.0; k];
        for i in 0..k {
            for j in 0..k {
                next[j] += pi[i] * p[i][j];
            }
        }
        let mut diff = 0.0f64;
        for j in 0..k {
            next[j] = 0.5 * (next[j] + pi[j]);
            diff = diff.max((next[j] - pi[j]).abs());
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        pi = next;
        if diff < 1e-15 {
            break;
        }
    }
    pi
}

fn draw_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the last partial sum: take the last possible state
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Laws from which a window is generated.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessLaw {
    Renewal {
        sizes: Distribution,
        marks: Distribution,
    },
    Markov(Arc<MarkovRenewalSpec>),
    /// Two regimes drawn once per replication: regime 0 with probability `p0`.
    Mixture {
        sizes: Distribution,
        marks0: Distribution,
        marks1: Distribution,
        p0: f64,
    },
}

/// The failure marks `L_{n,1}, L_{n,2}, ...` of one point.
#[derive(Debug, Clone)]
pub struct MarkStream<'a> {
    pub point_index: i64,
    law: &'a Distribution,
    stream: RandomStream,
}

impl<'a> MarkStream<'a> {
    pub fn new(point_index: i64, law: &'a Distribution, stream: RandomStream) -> Self {
        Self { point_index, law, stream }
    }

    pub fn law(&self) -> &'a Distribution {
        self.law
    }

    /// Zero-based index of the next attempt.
    pub fn next_attempt(&self) -> u64 {
        self.stream.position()
    }

    /// The `i`-th mark (zero-based) regardless of how many were drawn.
    pub fn mark_at(&self, i: u64) -> f64 {
        self.law.sample_from_uniform(self.stream.uniform_at(i))
    }

    /// The underlying uniforms, for samplers that consume them differently.
    pub fn uniforms(&mut self) -> &mut RandomStream {
        &mut self.stream
    }
}

impl Iterator for MarkStream<'_> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.law.sample(&mut self.stream))
    }
}

/// A realization of a marked point process observed on a finite, growable
/// index range, with `X_0 = 0`.
#[derive(Debug, Clone)]
pub struct MarkedWindow {
    key: StreamKey,
    law: ProcessLaw,
    /// `D_0, D_1, ...`
    sizes: Vec<f64>,
    /// `X_0 = 0, X_1, ...`; one longer than `sizes`.
    points: Vec<f64>,
    /// `D_{-1}, D_{-2}, ...`
    back_sizes: Vec<f64>,
    /// `X_{-1}, X_{-2}, ...`
    back_points: Vec<f64>,
    /// `Y_0, Y_1, ...` for Markov renewal; one longer than `sizes`.
    states: Option<Vec<usize>>,
    regime: Option<u8>,
}

impl MarkedWindow {
    /// An empty window (only the point at the origin) for the given laws.
    pub fn new(law: ProcessLaw, key: StreamKey) -> Self {
        let mut states = None;
        let mut regime = None;
        match &law {
            ProcessLaw::Markov(spec) => {
                let u = key.stream(Domain::States, 0, 0).uniform_at(0);
                states = Some(vec![draw_index(spec.initial_probabilities(), u)]);
            }
            ProcessLaw::Mixture { p0, .. } => {
                let u = key.stream(Domain::Regime, 0, 0).uniform_at(0);
                regime = Some(if u < *p0 { 0 } else { 1 });
            }
            ProcessLaw::Renewal { .. } => {}
        }
        Self {
            key,
            law,
            sizes: Vec::new(),
            points: vec![0.0],
            back_sizes: Vec::new(),
            back_points: Vec::new(),
            states,
            regime,
        }
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    pub fn law(&self) -> &ProcessLaw {
        &self.law
    }

    /// Number of sizes generated in the forward direction.
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// Grows the window so that `D_0 .. D_{n-1}` exist.
    pub fn ensure(&mut self, n: usize) {
        while self.sizes.len() < n {
            let idx = self.sizes.len();
            let u = self.key.stream(Domain::Sizes, idx as i64, 0).uniform_at(0);
            let d = match &self.law {
                ProcessLaw::Renewal { sizes, .. } | ProcessLaw::Mixture { sizes, .. } => sizes.sample_from_uniform(u),
                ProcessLaw::Markov(spec) => {
                    let states = self.states.as_mut().expect("markov window has states");
                    let from = states[idx];
                    let v = self.key.stream(Domain::States, idx as i64 + 1, 0).uniform_at(0);
                    let to = draw_index(&spec.transition[from], v);
                    states.push(to);
                    spec.size_law(from, to).sample_from_uniform(u)
                }
            };
            let last = *self.points.last().expect("origin present");
            self.sizes.push(d);
            self.points.push(last + d);
        }
    }

    /// Grows the window backwards so that `D_{-1} .. D_{-k}` exist. Only
    /// processes with i.i.d. sizes can be extended to negative indices.
    pub fn ensure_back(&mut self, k: usize) -> Result<(), ProcessError> {
        let sizes = match &self.law {
            ProcessLaw::Renewal { sizes, .. } | ProcessLaw::Mixture { sizes, .. } => sizes,
            ProcessLaw::Markov(_) => {
                return Err(ProcessError::Unsupported(
                    "Markov renewal windows cannot be extended to negative indices".into(),
                ))
            }
        };
        while self.back_sizes.len() < k {
            let idx = -(self.back_sizes.len() as i64) - 1;
            let d = sizes.sample_from_uniform(self.key.stream(Domain::Sizes, idx, 0).uniform_at(0));
            let last = self.back_points.last().copied().unwrap_or(0.0);
            self.back_sizes.push(d);
            self.back_points.push(last - d);
        }
        Ok(())
    }

    /// A copy grown to `n` forward sizes; `self` is left as it is.
    pub fn extended(&self, n: usize) -> Self {
        let mut w = self.clone();
        w.ensure(n);
        w
    }

    /// `D_n` for `n >= 0`; the window must already contain it.
    pub fn size(&self, n: usize) -> f64 {
        self.sizes[n]
    }

    /// `D_n` for any generated index, negative ones included.
    pub fn size_at(&self, n: i64) -> f64 {
        if n >= 0 {
            self.sizes[n as usize]
        } else {
            self.back_sizes[(-n - 1) as usize]
        }
    }

    /// `X_n` for `0 <= n <= len()`.
    pub fn point(&self, n: usize) -> f64 {
        self.points[n]
    }

    /// `X_n` for any generated index, negative ones included.
    pub fn point_at(&self, n: i64) -> f64 {
        if n >= 0 {
            self.points[n as usize]
        } else {
            self.back_points[(-n - 1) as usize]
        }
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Chain state `Y_n` of a Markov renewal window.
    pub fn state(&self, n: usize) -> Option<usize> {
        self.states.as_ref().map(|s| s[n])
    }

    pub fn states(&self) -> Option<&[usize]> {
        self.states.as_deref()
    }

    pub fn regime(&self) -> Option<u8> {
        self.regime
    }

    /// Failure law of point `n`. For Markov renewal the size `D_n` must
    /// already be generated, since the law depends on the transition taken.
    pub fn mark_law(&self, n: i64) -> &Distribution {
        match &self.law {
            ProcessLaw::Renewal { marks, .. } => marks,
            ProcessLaw::Mixture { marks0, marks1, .. } => {
                if self.regime == Some(0) {
                    marks0
                } else {
                    marks1
                }
            }
            ProcessLaw::Markov(spec) => {
                let s = self.states.as_ref().expect("markov window has states");
                let n = n as usize;
                spec.mark_law(s[n], s[n + 1])
            }
        }
    }

    /// Mark stream of point `n`. `lane` selects an independent sequence for
    /// repeated visits of the same point.
    pub fn marks(&self, n: i64, lane: u64) -> MarkStream<'_> {
        MarkStream::new(n, self.mark_law(n), self.key.stream(Domain::Marks, n, lane))
    }
}

/// Renewal process with i.i.d. sizes from `d` and i.i.d. marks from `l`.
pub fn generate_renewal(d: Distribution, l: Distribution, n_points: usize, key: StreamKey) -> MarkedWindow {
    let mut w = MarkedWindow::new(ProcessLaw::Renewal { sizes: d, marks: l }, key);
    w.ensure(n_points);
    w
}

pub fn generate_markov_renewal(spec: Arc<MarkovRenewalSpec>, n_points: usize, key: StreamKey) -> MarkedWindow {
    let mut w = MarkedWindow::new(ProcessLaw::Markov(spec), key);
    w.ensure(n_points);
    w
}

/// Two-regime process: one regime label per replication, marks from `l0` in
/// regime 0 (probability `p0`) and from `l1` otherwise.
pub fn generate_mixture(
    d: Distribution,
    l0: Distribution,
    l1: Distribution,
    p0: f64,
    n_points: usize,
    key: StreamKey,
) -> Result<MarkedWindow, ProcessError> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(ProcessError::MixtureProbability(p0));
    }
    let mut w = MarkedWindow::new(
        ProcessLaw::Mixture {
            sizes: d,
            marks0: l0,
            marks1: l1,
            p0,
        },
        key,
    );
    w.ensure(n_points);
    Ok(w)
}
