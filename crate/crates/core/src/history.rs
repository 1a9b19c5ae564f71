//! Time-stamped history buffer realizing the segment `u_t(theta) = u(t + theta)`,
//! `theta in [-r, 0]`, with linear interpolation and window norms.

use std::collections::VecDeque;

use thiserror::Error;

use crate::basis::{BasisError, EigenBasis, ModalState, NormKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HistoryError {
    #[error("non-monotone time: {t} does not exceed latest stored time {latest}")]
    NonMonotone { t: f64, latest: f64 },
    #[error("time {s} outside stored history [{earliest}, {latest}]")]
    OutOfWindow { s: f64, earliest: f64, latest: f64 },
    #[error("history is empty")]
    Empty,
    #[error("state length {actual} differs from history dimension {expected}")]
    Dimension { expected: usize, actual: usize },
    #[error("window length must be finite and nonnegative, got {0}")]
    WindowLength(f64),
    #[error(transparent)]
    Basis(#[from] BasisError),
}

/// A state vector that can live in a history buffer.
pub trait HistoryState: Clone {
    fn values(&self) -> &[f64];
    fn with_values(&self, values: Vec<f64>) -> Self;
    /// Squared L^2 norm of the represented function.
    fn l2_squared(&self) -> f64;
}

impl HistoryState for ModalState {
    fn values(&self) -> &[f64] {
        self
    }
    fn with_values(&self, values: Vec<f64>) -> Self {
        ModalState::new(values)
    }
    fn l2_squared(&self) -> f64 {
        self.iter().map(|a| a * a).sum()
    }
}

#[derive(Debug, Clone)]
struct Node<S> {
    t: f64,
    state: S,
    l2: f64,
}

/// Window norms of the history segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowNorm {
    /// `C([-r, 0]; L^2)`
    CL2,
    /// `L^inf(-r, 0; L^q)`
    LinfLq(f64),
    /// `C([-r, 0]; V_1)`
    CV1,
    /// `L^inf(-r, 0; L^inf)`
    LinfLinf,
}

impl WindowNorm {
    fn spatial(self) -> NormKind {
        match self {
            WindowNorm::CL2 => NormKind::Lq(2.0),
            WindowNorm::LinfLq(q) => NormKind::Lq(q),
            WindowNorm::CV1 => NormKind::V1,
            WindowNorm::LinfLinf => NormKind::Linf,
        }
    }
}

/// Ordered samples `(t_i, u(t_i))` covering at least `[t_latest - r, t_latest]`.
///
/// After each push, samples are evicted while the second-oldest is already at
/// or before `t_latest - r`, so exactly one sample at or before the left end
/// of the window is kept and interpolation there never extrapolates.
#[derive(Debug, Clone)]
pub struct HistorySegment<S = ModalState> {
    r: f64,
    nodes: VecDeque<Node<S>>,
}

fn snap_tolerance(s: f64) -> f64 {
    1e-12 * (1.0 + s.abs())
}

impl<S: HistoryState> HistorySegment<S> {
    pub fn new(r: f64) -> Result<Self, HistoryError> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(HistoryError::WindowLength(r));
        }
        Ok(Self {
            r,
            nodes: VecDeque::new(),
        })
    }

    pub fn window(&self) -> f64 {
        self.r
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn earliest_time(&self) -> Option<f64> {
        self.nodes.front().map(|n| n.t)
    }

    pub fn latest_time(&self) -> Option<f64> {
        self.nodes.back().map(|n| n.t)
    }

    pub fn latest(&self) -> Option<&S> {
        self.nodes.back().map(|n| &n.state)
    }

    /// L^2 norm of the newest sample, i.e. `|u_t(0)|_2`.
    pub fn latest_l2(&self) -> Option<f64> {
        self.nodes.back().map(|n| n.l2)
    }

    /// Stored `(t, state)` pairs, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = (f64, &S)> {
        self.nodes.iter().map(|n| (n.t, &n.state))
    }

    pub fn push(&mut self, t: f64, state: S) -> Result<(), HistoryError> {
        if let Some(back) = self.nodes.back() {
            if !(t > back.t) {
                return Err(HistoryError::NonMonotone { t, latest: back.t });
            }
            let expected = back.state.values().len();
            if state.values().len() != expected {
                return Err(HistoryError::Dimension {
                    expected,
                    actual: state.values().len(),
                });
            }
        }
        let l2 = state.l2_squared().sqrt();
        self.nodes.push_back(Node { t, state, l2 });
        let left = t - self.r;
        while self.nodes.len() > 1 && self.nodes[1].t <= left {
            self.nodes.pop_front();
        }
        Ok(())
    }

    fn locate(&self, s: f64) -> Result<Located, HistoryError> {
        let (first, last) = match (self.nodes.front(), self.nodes.back()) {
            (Some(f), Some(l)) => (f.t, l.t),
            _ => return Err(HistoryError::Empty),
        };
        let tol = snap_tolerance(s);
        if s < first - tol || s > last + tol {
            return Err(HistoryError::OutOfWindow {
                s,
                earliest: first,
                latest: last,
            });
        }
        // first index with t >= s
        let hi = self.nodes.partition_point(|n| n.t < s);
        if hi < self.nodes.len() && (self.nodes[hi].t - s).abs() <= tol {
            return Ok(Located::Node(hi));
        }
        if hi > 0 && (s - self.nodes[hi - 1].t).abs() <= tol {
            return Ok(Located::Node(hi - 1));
        }
        if hi == 0 {
            return Ok(Located::Node(0));
        }
        if hi == self.nodes.len() {
            return Ok(Located::Node(hi - 1));
        }
        let (a, b) = (&self.nodes[hi - 1], &self.nodes[hi]);
        Ok(Located::Between(hi - 1, (s - a.t) / (b.t - a.t)))
    }

    /// State at time `s`: exact at stored nodes, componentwise linear between.
    pub fn sample(&self, s: f64) -> Result<S, HistoryError> {
        match self.locate(s)? {
            Located::Node(i) => Ok(self.nodes[i].state.clone()),
            Located::Between(i, w) => {
                let a = &self.nodes[i].state;
                let b = &self.nodes[i + 1].state;
                let values = a
                    .values()
                    .iter()
                    .zip(b.values())
                    .map(|(x, y)| (1.0 - w) * x + w * y)
                    .collect();
                Ok(a.with_values(values))
            }
        }
    }

    /// States entering a window norm: the stored nodes inside
    /// `[t_latest - r, t_latest]` plus the interpolated state at the left end.
    fn window_states(&self) -> Result<Vec<std::borrow::Cow<'_, S>>, HistoryError> {
        let last = self.latest_time().ok_or(HistoryError::Empty)?;
        let left = last - self.r;
        let mut out = Vec::new();
        if self.r > 0.0 {
            if let Located::Between(..) = self.locate(left)? {
                out.push(std::borrow::Cow::Owned(self.sample(left)?));
            }
        }
        let tol = snap_tolerance(left);
        for n in &self.nodes {
            if n.t >= left - tol {
                out.push(std::borrow::Cow::Borrowed(&n.state));
            }
        }
        Ok(out)
    }

    /// `sup` over the window of a caller-supplied spatial norm.
    pub fn window_norm_with<F>(&self, mut norm: F) -> Result<f64, HistoryError>
    where
        F: FnMut(&S) -> Result<f64, HistoryError>,
    {
        let mut best = 0.0f64;
        for s in self.window_states()? {
            best = best.max(norm(&s)?);
        }
        Ok(best)
    }

    /// `||u_t||_{C([-r,0]; L^2)}`, using the cached per-node L^2 norms.
    pub fn window_l2(&self) -> Result<f64, HistoryError> {
        let last = self.latest_time().ok_or(HistoryError::Empty)?;
        let left = last - self.r;
        let tol = snap_tolerance(left);
        let mut best = self
            .nodes
            .iter()
            .filter(|n| n.t >= left - tol)
            .fold(0.0f64, |m, n| m.max(n.l2));
        if self.r > 0.0 {
            if let Located::Between(..) = self.locate(left)? {
                best = best.max(self.sample(left)?.l2_squared().sqrt());
            }
        }
        Ok(best)
    }
}

impl HistorySegment<ModalState> {
    pub fn window_norm(&self, basis: &EigenBasis, kind: WindowNorm) -> Result<f64, HistoryError> {
        if kind == WindowNorm::CL2 {
            return self.window_l2();
        }
        let spatial = kind.spatial();
        self.window_norm_with(|s| Ok(basis.norm(s, spatial)?))
    }
}

enum Located {
    Node(usize),
    Between(usize, f64),
}
