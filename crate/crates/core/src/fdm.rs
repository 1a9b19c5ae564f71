//! Finite-difference method-of-lines oracle in one dimension.
//!
//! Second-order central differences on `N - 1` interior nodes, backward
//! Euler for diffusion (one tridiagonal solve per step) and the reaction,
//! delay and forcing terms explicit, with the same history handling as the
//! spectral solver.

use serde::Serialize;
use thiserror::Error;

use crate::basis::{BasisError, EigenBasis};
use crate::history::{HistoryError, HistorySegment, HistoryState};
use crate::model::{ModelError, ProblemSpec};
use crate::solver::BLOWUP_THRESHOLD;
use crate::trajectory::{NormRow, Termination, Trajectory};

pub const MIN_NODES: usize = 16;

#[derive(Debug, Error)]
pub enum FdmError {
    #[error("finite-difference oracle is one-dimensional, got dimension {0}")]
    Dimension(usize),
    #[error("invalid oracle configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("trajectories belong to different problems ({spectral} vs {grid})")]
    SpecMismatch { spectral: String, grid: String },
    #[error("no sample at t = {0} in both trajectories")]
    MissingTime(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Basis(#[from] BasisError),
}

/// Interior node values; the boundary values are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub values: Vec<f64>,
    pub dx: f64,
}

impl HistoryState for GridState {
    fn values(&self) -> &[f64] {
        &self.values
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            values,
            dx: self.dx,
        }
    }

    fn l2_squared(&self) -> f64 {
        self.dx * self.values.iter().map(|v| v * v).sum::<f64>()
    }
}

impl GridState {
    pub fn l2(&self) -> f64 {
        self.l2_squared().sqrt()
    }

    pub fn lq(&self, q: f64) -> f64 {
        if q == 2.0 {
            return self.l2();
        }
        (self.dx * self.values.iter().map(|v| v.abs().powf(q)).sum::<f64>()).powf(1.0 / q)
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn padded(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(0.0)
            .chain(self.values.iter().copied())
            .chain(std::iter::once(0.0))
    }

    /// Discrete `|u_x|_2` over all cells.
    pub fn h1(&self) -> f64 {
        let u: Vec<f64> = self.padded().collect();
        (u.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / self.dx).sqrt()
    }

    /// Discrete `|u_xx|_2` over the interior.
    pub fn v2(&self) -> f64 {
        let u: Vec<f64> = self.padded().collect();
        let dx2 = self.dx * self.dx;
        (self.dx
            * u.windows(3)
                .map(|w| ((w[0] - 2.0 * w[1] + w[2]) / dx2).powi(2))
                .sum::<f64>())
        .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdmConfig {
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSample {
    pub t: f64,
    pub state: GridState,
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridTrajectory {
    pub problem_digest: String,
    pub config: FdmConfig,
    pub samples: Vec<GridSample>,
    pub status: Termination,
}

impl GridTrajectory {
    pub fn is_complete(&self) -> bool {
        self.status == Termination::Completed
    }

    pub fn last(&self) -> &GridSample {
        self.samples.last().expect("trajectory is never empty")
    }

    pub fn at(&self, t: f64) -> Option<&GridSample> {
        let i = self.samples.partition_point(|s| s.t < t);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter_map(|j| self.samples.get(j))
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .filter(|s| (s.t - t).abs() <= 0.5 * self.config.dt + 1e-12)
    }

    /// Interior node coordinates.
    pub fn nodes(&self, length: f64) -> Vec<f64> {
        let dx = length / self.config.n as f64;
        (1..self.config.n).map(|i| i as f64 * dx).collect()
    }

    pub fn norm_rows(&self, q: f64) -> Vec<NormRow> {
        self.samples
            .iter()
            .map(|s| NormRow {
                t: s.t,
                tau: s.tau.unwrap_or(f64::NAN),
                l2: s.state.l2(),
                lq: s.state.lq(q),
                h1: s.state.h1(),
                v2: s.state.v2(),
                linf: s.state.linf(),
            })
            .collect()
    }
}

/// Constant-coefficient tridiagonal solver for `(I - dt D2)`, factored once.
struct Tridiagonal {
    off: f64,
    c_prime: Vec<f64>,
    denom: Vec<f64>,
}

impl Tridiagonal {
    fn new(m: usize, dt: f64, dx: f64) -> Self {
        let off = -dt / (dx * dx);
        let diag = 1.0 + 2.0 * dt / (dx * dx);
        let mut c_prime = vec![0.0; m];
        let mut denom = vec![0.0; m];
        for i in 0..m {
            let prev = if i == 0 { 0.0 } else { c_prime[i - 1] };
            denom[i] = diag - off * prev;
            c_prime[i] = off / denom[i];
        }
        Self {
            off,
            c_prime,
            denom,
        }
    }

    fn solve(&self, rhs: &mut [f64]) {
        let m = rhs.len();
        for i in 0..m {
            let prev = if i == 0 { 0.0 } else { rhs[i - 1] };
            rhs[i] = (rhs[i] - self.off * prev) / self.denom[i];
        }
        for i in (0..m.saturating_sub(1)).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
    }
}

pub fn fdm_solve(problem: &ProblemSpec, config: &FdmConfig) -> Result<GridTrajectory, FdmError> {
    let d = problem.domain.dimension();
    if d != 1 {
        return Err(FdmError::Dimension(d));
    }
    problem.validate()?;
    let r = problem.delay.bound();
    let mut errors = Vec::new();
    if config.n < MIN_NODES {
        errors.push(format!(
            "oracle.n must be at least {MIN_NODES}, got {}",
            config.n
        ));
    }
    if !(config.dt > 0.0 && config.dt.is_finite()) {
        errors.push(format!("oracle.dt must be positive, got {}", config.dt));
    }
    if !(config.t_end > 0.0 && config.t_end.is_finite()) {
        errors.push(format!(
            "oracle.t_end must be positive, got {}",
            config.t_end
        ));
    }
    if r > 0.0 && config.dt > r / 8.0 {
        errors.push(format!("oracle.dt must not exceed r/8 = {}", r / 8.0));
    }
    if !errors.is_empty() {
        return Err(FdmError::Config(errors));
    }

    let length = problem.domain.lengths()[0];
    let dx = length / config.n as f64;
    let dt = config.dt;
    let xs: Vec<f64> = (1..config.n).map(|i| i as f64 * dx).collect();
    let m = xs.len();
    let forcing: Vec<(_, Vec<f64>)> = problem
        .forcing
        .terms
        .iter()
        .map(|term| {
            let space = xs
                .iter()
                .map(|&x| term.space.eval(&problem.domain, &[x]))
                .collect();
            (&term.time, space)
        })
        .collect();
    let nl = &problem.nonlinearity;
    let (has_f, has_g) = (!nl.f.is_zero(), !nl.g.is_zero());
    let lhs = Tridiagonal::new(m, dt, dx);

    let mut seg: HistorySegment<GridState> = HistorySegment::new(r)?;
    let mut samples = Vec::new();
    let nodes = if r == 0.0 {
        0
    } else {
        (r / dt - 1e-9).ceil() as i64
    };
    for i in (0..=nodes).rev() {
        let t = -(i as f64) * dt;
        let theta = t.max(-r);
        let state = GridState {
            values: xs
                .iter()
                .map(|&x| problem.initial_at(theta, &[x]))
                .collect(),
            dx,
        };
        seg.push(t, state.clone())?;
        samples.push(GridSample {
            t,
            state,
            tau: None,
        });
    }

    let steps = (config.t_end / dt - 1e-9).ceil() as i64;
    let mut status = Termination::Completed;
    for n in 0..steps {
        let t = n as f64 * dt;
        let tau = problem.delay.eval(t, &seg)?;
        samples.last_mut().expect("nonempty").tau = Some(tau);
        let current = &samples.last().expect("nonempty").state;
        let delayed = if !has_g {
            None
        } else if tau < dt {
            Some(current.clone())
        } else {
            Some(seg.sample(t - tau)?)
        };
        let mut rhs = current.values.clone();
        for (time, space) in &forcing {
            let c = time.eval(t);
            for (o, s) in rhs.iter_mut().zip(space) {
                *o += dt * c * s;
            }
        }
        if has_f || has_g {
            for (i, o) in rhs.iter_mut().enumerate() {
                let u = current.values[i];
                let mut f = if has_f { nl.eval_f(u) } else { 0.0 };
                if let Some(v) = &delayed {
                    f += nl.eval_g(u, v.values[i]);
                }
                *o += dt * f;
            }
        }
        lhs.solve(&mut rhs);
        let t_next = (n + 1) as f64 * dt;
        if rhs
            .iter()
            .any(|v| !v.is_finite() || v.abs() > BLOWUP_THRESHOLD)
        {
            status = Termination::BlowupSuspected {
                t: t_next,
                reason: "grid value exceeds the blowup threshold".into(),
            };
            break;
        }
        let state = GridState { values: rhs, dx };
        seg.push(t_next, state.clone())?;
        samples.push(GridSample {
            t: t_next,
            state,
            tau: None,
        });
    }
    if status == Termination::Completed {
        let t = steps as f64 * dt;
        samples.last_mut().expect("nonempty").tau = Some(problem.delay.eval(t, &seg)?);
    }
    Ok(GridTrajectory {
        problem_digest: problem.digest(),
        config: config.clone(),
        samples,
        status,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub t: f64,
    /// `|u_spectral - u_grid|_2 / |u_grid|_2` on the grid nodes; absolute when `u_grid = 0`.
    pub relative_l2: f64,
}

/// Relative discrete L^2 differences at `times`, the spectral solution
/// synthesized on the grid nodes.
pub fn compare(
    spectral: &Trajectory,
    basis: &EigenBasis,
    grid: &GridTrajectory,
    times: &[f64],
) -> Result<Vec<ComparisonRow>, FdmError> {
    if spectral.problem_digest != grid.problem_digest {
        return Err(FdmError::SpecMismatch {
            spectral: spectral.problem_digest.clone(),
            grid: grid.problem_digest.clone(),
        });
    }
    let nodes: Vec<[f64; 1]> = grid
        .nodes(basis.domain().lengths()[0])
        .into_iter()
        .map(|x| [x])
        .collect();
    times
        .iter()
        .map(|&t| {
            let (Some(s), Some(g)) = (spectral.at(t), grid.at(t)) else {
                return Err(FdmError::MissingTime(t));
            };
            let u = basis.synthesize(&s.state, &nodes)?;
            let diff = g
                .state
                .with_values(u.iter().zip(&g.state.values).map(|(a, b)| a - b).collect());
            let scale = g.state.l2();
            let relative_l2 = if scale > 0.0 {
                diff.l2() / scale
            } else {
                diff.l2()
            };
            Ok(ComparisonRow { t, relative_l2 })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use std::f64::consts::PI;

    fn heat_error(n: usize, dt: f64) -> f64 {
        let p = presets::heat(presets::mode_one((PI / 2.0).sqrt()));
        let traj = fdm_solve(&p, &FdmConfig { n, dt, t_end: 0.5 }).unwrap();
        let exact = (-0.5f64).exp() * (PI / 2.0).sqrt();
        (traj.last().state.l2() - exact).abs() / exact
    }

    #[test]
    fn heat_sine() {
        // phi = sin x
        let e = heat_error(200, 1e-4);
        assert!(e < 1e-3, "{e}");
        let finer = heat_error(400, 5e-5);
        assert!(e / finer >= 2.0, "{e} / {finer}");
    }

    #[test]
    fn zero_data_stays_zero() {
        let p = presets::dissipative(0.0);
        let traj = fdm_solve(
            &p,
            &FdmConfig {
                n: 32,
                dt: 1e-2,
                t_end: 1.0,
            },
        )
        .unwrap();
        assert!(traj
            .samples
            .iter()
            .all(|s| s.state.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn maximum_principle() {
        let p = presets::heat(presets::bump(3.0, 1.0, 0.5));
        let traj = fdm_solve(
            &p,
            &FdmConfig {
                n: 64,
                dt: 1e-2,
                t_end: 1.0,
            },
        )
        .unwrap();
        for w in traj.samples.windows(2) {
            assert!(w[1].state.linf() <= w[0].state.linf());
        }
    }

    #[test]
    fn validation() {
        let p = presets::dissipative(1.0);
        assert!(matches!(
            fdm_solve(&p, &FdmConfig { n: 8, dt: 0.1, t_end: 1.0 }),
            Err(FdmError::Config(v)) if v.len() == 2
        ));
    }

    #[test]
    fn tridiagonal_matches_dense_product() {
        let (dt, dx) = (0.3, 0.1);
        let lhs = Tridiagonal::new(5, dt, dx);
        let x = [1.0, -2.0, 0.5, 3.0, 0.25];
        let k = dt / (dx * dx);
        let mut b: Vec<f64> = (0..5)
            .map(|i| {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i < 4 { x[i + 1] } else { 0.0 };
                (1.0 + 2.0 * k) * x[i] - k * (l + r)
            })
            .collect();
        lhs.solve(&mut b);
        for (a, b) in x.iter().zip(&b) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
