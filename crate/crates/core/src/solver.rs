//! Exponential-Euler integration of the Galerkin system
//!
//! ```text
//! a_j' + mu_j a_j = ( f(u) + g(u, u(t - tau(t, u_t))) + h(t), w_j ),   j = 1..k
//! ```
//!
//! The linear part is propagated exactly, `a_j <- e^{-mu_j dt} a_j +
//! (1 - e^{-mu_j dt}) / mu_j * F_j(t)`, and `F` is evaluated explicitly:
//! nonlinear terms pointwise on the quadrature grid, then projected.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::basis::{BasisError, EigenBasis, ModalState};
use crate::history::{HistoryError, HistorySegment};
use crate::model::{DiscreteField, ModelError, ProblemSpec};
use crate::trajectory::{SolverConfig, Termination, Trajectory, TrajectorySample};

/// Coefficients beyond this magnitude are treated as blowup.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

/// Upper bound on `||phi_k|| / ||phi||` guaranteed for the initial approximation.
pub const INITIAL_RATIO_BOUND: f64 = 8.0;

/// Slack allowed when checking a convergence table for monotonicity.
pub const MONOTONE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("initial history is not finite at theta = {theta}")]
    InitialEvaluation { theta: f64 },
    #[error("convergence study needs at least 3 levels, got {0}")]
    StudyLevels(usize),
    #[error("convergence study aborted: k = {k} blew up at t = {t}")]
    StudyAborted { k: usize, t: f64 },
    #[error("cannot continue a trajectory that terminated early")]
    NotContinuable,
    #[error(
        "continuation end time {requested} does not extend the trajectory ending at {current}"
    )]
    ContinuationTime { requested: f64, current: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    History(#[from] HistoryError),
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error("non-finite right-hand side at t = {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Basis(#[from] BasisError),
}

/// Projected initial history `phi_k` together with the measured norm ratio.
#[derive(Debug, Clone)]
pub struct InitialApproximation {
    pub nodes: Vec<(f64, ModalState)>,
    pub q: f64,
    pub exact_norm: f64,
    pub projected_norm: f64,
    pub ratio: f64,
}

impl InitialApproximation {
    pub fn history(&self, r: f64) -> Result<HistorySegment, HistoryError> {
        let mut seg = HistorySegment::new(r)?;
        for (t, s) in &self.nodes {
            seg.push(*t, s.clone())?;
        }
        Ok(seg)
    }

    pub fn within_bound(&self) -> bool {
        self.ratio <= INITIAL_RATIO_BOUND
    }
}

/// Problems with `config` for `problem`, all of them.
pub fn config_violations(problem: &ProblemSpec, config: &SolverConfig) -> Vec<String> {
    let mut errors = Vec::new();
    if config.k == 0 {
        errors.push("solver.k must be at least 1".to_string());
    }
    if !(config.dt.is_finite() && config.dt > 0.0) {
        errors.push(format!("solver.dt must be positive, got {}", config.dt));
    }
    if !(config.t_end.is_finite() && config.t_end > 0.0) {
        errors.push(format!(
            "solver.t_end must be positive, got {}",
            config.t_end
        ));
    }
    let r = problem.delay.bound();
    if r > 0.0 && config.dt > r / 8.0 {
        errors.push(format!(
            "solver.dt = {} must not exceed r/8 = {} to resolve the delay window",
            config.dt,
            r / 8.0
        ));
    }
    if let Some(h) = config.history_dt {
        if !(h > 0.0 && (r == 0.0 || h <= r / 8.0)) {
            errors.push(format!("solver.history_dt = {h} must lie in (0, r/8]"));
        }
    }
    errors
}

pub struct GalerkinSolver<'a> {
    problem: &'a ProblemSpec,
    basis: EigenBasis,
    config: SolverConfig,
    forcing: DiscreteField,
    initial: DiscreteField,
    decay: Vec<f64>,
    gain: Vec<f64>,
    has_reaction: bool,
    has_coupling: bool,
}

impl<'a> GalerkinSolver<'a> {
    pub fn new(problem: &'a ProblemSpec, config: &SolverConfig) -> Result<Self, SolverError> {
        problem.validate()?;
        let errors = config_violations(problem, config);
        if !errors.is_empty() {
            return Err(SolverError::Config(errors));
        }
        let basis = EigenBasis::build(&problem.domain, config.k)?;
        let decay = basis
            .eigenvalues()
            .iter()
            .map(|mu| (-mu * config.dt).exp())
            .collect();
        let gain = basis
            .eigenvalues()
            .iter()
            .map(|mu| -(-mu * config.dt).exp_m1() / mu)
            .collect();
        Ok(Self {
            problem,
            forcing: problem.forcing.discretize(&basis)?,
            initial: problem.initial.discretize(&basis)?,
            basis,
            config: config.clone(),
            decay,
            gain,
            has_reaction: !problem.nonlinearity.f.is_zero(),
            has_coupling: !problem.nonlinearity.g.is_zero(),
        })
    }

    pub fn basis(&self) -> &EigenBasis {
        &self.basis
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Advisory messages that do not stop a run.
    pub fn warnings(&self) -> Vec<String> {
        let mu_k = *self.basis.eigenvalues().last().expect("nonempty basis");
        let mut out = Vec::new();
        if self.config.dt > 1.0 / mu_k {
            out.push(format!(
                "dt = {} exceeds 1/mu_k = {:.3e}; explicit nonlinear terms may be under-resolved",
                self.config.dt,
                1.0 / mu_k
            ));
        }
        out
    }

    /// History node times on `[-r, 0]`, ascending, ending at 0.
    fn initial_times(&self) -> Vec<f64> {
        let r = self.problem.delay.bound();
        if r == 0.0 {
            return vec![0.0];
        }
        let h = self.config.history_resolution();
        let m = (r / h - 1e-9).ceil() as i64;
        (0..=m).rev().map(|i| -(i as f64) * h).collect()
    }

    /// Samples `phi` on `[-r, 0]` and projects each sample onto the first `k` modes.
    pub fn approximate_initial(&self) -> Result<InitialApproximation, SolverError> {
        let r = self.problem.delay.bound();
        let q = self.problem.primary_q();
        let n = self.basis.len();
        let grid_len = self.basis.grid_len();
        let mut nodes = Vec::new();
        let (mut exact_norm, mut projected_norm) = (0.0f64, 0.0f64);
        for t in self.initial_times() {
            let theta = t.max(-r);
            let exact = self.initial.grid_at(theta, grid_len);
            let coeffs = self.initial.modal_at(theta, n);
            if exact.iter().chain(&coeffs).any(|v| !v.is_finite()) {
                return Err(SolverError::InitialEvaluation { theta });
            }
            let state = ModalState::new(coeffs);
            exact_norm = exact_norm.max(self.basis.grid_lq(&exact, q)?);
            projected_norm =
                projected_norm.max(self.basis.grid_lq(&self.basis.to_grid(&state)?, q)?);
            nodes.push((t, state));
        }
        let ratio = if exact_norm > 0.0 {
            projected_norm / exact_norm
        } else if projected_norm == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        Ok(InitialApproximation {
            nodes,
            q,
            exact_norm,
            projected_norm,
            ratio,
        })
    }

    /// Modal right-hand side `F_j(t)`, with the delayed state already resolved.
    fn rhs(&self, state: &ModalState, delayed: &ModalState, t: f64) -> Result<Vec<f64>, StepError> {
        let n = self.basis.len();
        let mut out = self.forcing.modal_at(t, n);
        if self.has_reaction || self.has_coupling {
            let nl = &self.problem.nonlinearity;
            let u = self.basis.to_grid(state)?;
            let values: Vec<f64> = if self.has_coupling {
                let v = self.basis.to_grid(delayed)?;
                u.iter()
                    .zip(&v)
                    .map(|(&u, &v)| nl.eval_f(u) + nl.eval_g(u, v))
                    .collect()
            } else {
                u.iter().map(|&u| nl.eval_f(u)).collect()
            };
            if values.iter().any(|v| !v.is_finite()) {
                return Err(StepError::NonFinite(t));
            }
            for (o, p) in out.iter_mut().zip(self.basis.project(&values)?.iter()) {
                *o += p;
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(StepError::NonFinite(t));
        }
        Ok(out)
    }

    /// One exponential-Euler step from `t`; returns the new state and the delay used.
    ///
    /// `seg` must end at `(t, state)`. A delay shorter than one step uses the
    /// newest sample instead of interpolating inside the step.
    pub fn step(
        &self,
        state: &ModalState,
        seg: &HistorySegment,
        t: f64,
    ) -> Result<(ModalState, f64), StepError> {
        let tau = self.problem.delay.eval(t, seg)?;
        let delayed = if tau < self.config.dt {
            seg.latest().ok_or(HistoryError::Empty)?.clone()
        } else {
            seg.sample(t - tau)?
        };
        let f = self.rhs(state, &delayed, t)?;
        let next = state
            .iter()
            .zip(&self.decay)
            .zip(&self.gain)
            .zip(&f)
            .map(|(((a, e), g), f)| e * a + g * f)
            .collect();
        Ok((ModalState::new(next), tau))
    }

    fn run(
        &self,
        mut seg: HistorySegment,
        mut samples: Vec<TrajectorySample>,
        first_step: i64,
        last_step: i64,
    ) -> Result<(Vec<TrajectorySample>, Termination), SolverError> {
        let dt = self.config.dt;
        let mut state = samples.last().expect("initial sample").state.clone();
        for n in first_step..last_step {
            let t = n as f64 * dt;
            let (next, tau) = match self.step(&state, &seg, t) {
                Ok(v) => v,
                Err(StepError::NonFinite(t)) => {
                    return Ok((
                        samples,
                        Termination::BlowupSuspected {
                            t,
                            reason: "non-finite nonlinear term".into(),
                        },
                    ))
                }
                Err(StepError::Model(e)) => return Err(e.into()),
                Err(StepError::History(e)) => return Err(e.into()),
                Err(StepError::Basis(e)) => return Err(e.into()),
            };
            samples.last_mut().expect("nonempty").tau = Some(tau);
            let t_next = (n + 1) as f64 * dt;
            if let Some(a) = next
                .iter()
                .find(|a| !a.is_finite() || a.abs() > BLOWUP_THRESHOLD)
            {
                return Ok((
                    samples,
                    Termination::BlowupSuspected {
                        t: t_next,
                        reason: format!("modal coefficient {a:e} exceeds {BLOWUP_THRESHOLD:e}"),
                    },
                ));
            }
            seg.push(t_next, next.clone())?;
            samples.push(TrajectorySample {
                t: t_next,
                state: next.clone(),
                tau: None,
            });
            state = next;
        }
        let t_last = last_step as f64 * dt;
        samples.last_mut().expect("nonempty").tau = Some(self.problem.delay.eval(t_last, &seg)?);
        Ok((samples, Termination::Completed))
    }

    pub fn solve(&self) -> Result<Trajectory, SolverError> {
        let init = self.approximate_initial()?;
        let mut diagnostics = self.warnings();
        if !init.within_bound() {
            diagnostics.push(format!(
                "initial approximation norm ratio {:.6} exceeds the guaranteed bound {}",
                init.ratio, INITIAL_RATIO_BOUND
            ));
        }
        let seg = init.history(self.problem.delay.bound())?;
        let samples = init
            .nodes
            .iter()
            .map(|(t, s)| TrajectorySample {
                t: *t,
                state: s.clone(),
                tau: None,
            })
            .collect();
        let (samples, status) = self.run(seg, samples, 0, self.config.steps())?;
        Ok(Trajectory {
            problem_digest: self.problem.digest(),
            config: self.config.clone(),
            samples,
            status,
            initial_lq_ratio: init.ratio,
            diagnostics,
        })
    }

    /// Extends a completed trajectory to `t_end`, starting from its own tail
    /// history. Produces exactly the samples a single run to `t_end` would.
    pub fn continue_to(
        &self,
        previous: &Trajectory,
        t_end: f64,
    ) -> Result<Trajectory, SolverError> {
        if !previous.is_complete() {
            return Err(SolverError::NotContinuable);
        }
        let first_step = previous.config.steps();
        let mut config = self.config.clone();
        config.t_end = t_end;
        let last_step = config.steps();
        if last_step <= first_step {
            return Err(SolverError::ContinuationTime {
                requested: t_end,
                current: previous.last().t,
            });
        }
        let r = self.problem.delay.bound();
        let mut seg = HistorySegment::new(r)?;
        for s in &previous.samples {
            seg.push(s.t, s.state.clone())?;
        }
        let mut samples = previous.samples.clone();
        samples.last_mut().expect("nonempty").tau = None;
        let (samples, status) = self.run(seg, samples, first_step, last_step)?;
        Ok(Trajectory {
            problem_digest: previous.problem_digest.clone(),
            config,
            samples,
            status,
            initial_lq_ratio: previous.initial_lq_ratio,
            diagnostics: previous.diagnostics.clone(),
        })
    }
}

pub fn solve(problem: &ProblemSpec, config: &SolverConfig) -> Result<Trajectory, SolverError> {
    GalerkinSolver::new(problem, config)?.solve()
}

/// Successive differences `max_t |u_{k_{i+1}}(t) - u_{k_i}(t)|_2` across levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub levels: Vec<usize>,
    pub differences: Vec<f64>,
    pub nonincreasing: bool,
}

/// `C([0,T]; L^2)` distance between two trajectories of one problem, matching
/// modes by wave numbers and samples by time.
pub fn trajectory_distance(
    coarse: &Trajectory,
    coarse_basis: &EigenBasis,
    fine: &Trajectory,
    fine_basis: &EigenBasis,
) -> f64 {
    let map: HashMap<[usize; 2], usize> = (0..fine_basis.len())
        .map(|j| (fine_basis.mode(j), j))
        .collect();
    let index: Vec<Option<usize>> = (0..coarse_basis.len())
        .map(|j| map.get(&coarse_basis.mode(j)).copied())
        .collect();
    let mut worst = 0.0f64;
    for c in coarse.forward() {
        let Some(f) = fine
            .at(c.t)
            .filter(|f| (f.t - c.t).abs() <= 1e-12 * (1.0 + c.t.abs()))
        else {
            continue;
        };
        let mut diff = f.state.to_vec();
        let mut extra = 0.0;
        for (j, a) in c.state.iter().enumerate() {
            match index[j] {
                Some(i) => diff[i] -= a,
                None => extra += a * a,
            }
        }
        let d = (diff.iter().map(|v| v * v).sum::<f64>() + extra).sqrt();
        worst = worst.max(d);
    }
    worst
}

/// Runs `problem` at each configuration (ascending `k`) concurrently and
/// tabulates successive differences.
pub fn convergence_study(
    problem: &ProblemSpec,
    configs: &[SolverConfig],
) -> Result<ConvergenceTable, SolverError> {
    if configs.len() < 3 {
        return Err(SolverError::StudyLevels(configs.len()));
    }
    let runs: Vec<(Trajectory, EigenBasis)> = configs
        .par_iter()
        .map(|c| {
            let solver = GalerkinSolver::new(problem, c)?;
            let traj = solver.solve()?;
            Ok((traj, solver.basis().clone()))
        })
        .collect::<Result<_, SolverError>>()?;
    for (traj, basis) in &runs {
        if let Termination::BlowupSuspected { t, .. } = traj.status {
            return Err(SolverError::StudyAborted {
                k: basis.modes_per_axis(),
                t,
            });
        }
    }
    let differences: Vec<f64> = runs
        .windows(2)
        .map(|w| trajectory_distance(&w[0].0, &w[0].1, &w[1].0, &w[1].1))
        .collect();
    let nonincreasing = differences
        .windows(2)
        .all(|w| w[1] <= w[0] + MONOTONE_TOLERANCE);
    Ok(ConvergenceTable {
        levels: configs.iter().map(|c| c.k).collect(),
        differences,
        nonincreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::DomainSpec;
    use crate::model::*;
    use std::f64::consts::PI;

    fn heat(initial: SeparableField, forcing: SeparableField, r: f64) -> ProblemSpec {
        ProblemSpec {
            domain: DomainSpec::interval(PI).unwrap(),
            nonlinearity: NonlinearitySpec {
                f: ReactionTerm::Polynomial {
                    coefficients: vec![],
                },
                g: CouplingTerm::Zero,
                p: 1.0,
                beta: 1.0,
                a0: 1.0,
                b0: 1.0,
                beta0: 3.0,
                lambda: 1.0,
                n: 0.0,
            },
            delay: DelaySpec::Constant { r, tau0: r },
            forcing,
            initial,
            q: vec![4.0],
        }
    }

    fn mode_field(value: f64, modes: &[(usize, f64)]) -> SeparableField {
        SeparableField::new(vec![SeparableTerm {
            time: TimeProfile::Constant { value },
            space: SpaceProfile::Eigenmodes {
                terms: modes
                    .iter()
                    .map(|&(m, a)| ModeTerm {
                        amplitude: a,
                        mode: vec![m],
                    })
                    .collect(),
            },
        }])
    }

    #[test]
    fn pure_decay_over_ln2() {
        let p = heat(mode_field(1.0, &[(1, 1.0)]), SeparableField::default(), 0.0);
        let s = GalerkinSolver::new(&p, &SolverConfig::new(1, 2f64.ln(), 1.0)).unwrap();
        let seg = s.approximate_initial().unwrap().history(0.0).unwrap();
        let (a, tau) = s.step(&ModalState::new(vec![1.0]), &seg, 0.0).unwrap();
        assert!((a[0] - 0.5).abs() < 1e-15);
        assert_eq!(tau, 0.0);
    }

    #[test]
    fn steady_forcing_is_a_fixed_point() {
        // F_j = mu_j c  =>  a_j = c is invariant
        let c = 0.7;
        let p = heat(
            mode_field(1.0, &[(1, 0.0)]),
            mode_field(1.0, &[(1, c), (2, 4.0 * c), (3, 9.0 * c)]),
            0.0,
        );
        let s = GalerkinSolver::new(&p, &SolverConfig::new(3, 0.01, 1.0)).unwrap();
        let mut seg = HistorySegment::new(0.0).unwrap();
        let a = ModalState::new(vec![c; 3]);
        seg.push(0.0, a.clone()).unwrap();
        let (next, _) = s.step(&a, &seg, 0.0).unwrap();
        for v in next.iter() {
            assert!((v - c).abs() < 1e-14);
        }
    }

    #[test]
    fn single_forced_step() {
        let p = heat(
            mode_field(0.0, &[(1, 1.0)]),
            mode_field(1.0, &[(1, 1.0)]),
            0.0,
        );
        let dt = 0.05;
        let s = GalerkinSolver::new(&p, &SolverConfig::new(4, dt, 1.0)).unwrap();
        let traj = s.solve().unwrap();
        let a1 = traj.samples[1].state[0];
        assert!((a1 - (1.0 - (-dt).exp())).abs() < 1e-15);
    }

    #[test]
    fn linear_exactness_and_nesting() {
        let p = heat(
            mode_field(1.0, &[(1, 1.0), (2, -0.5), (3, 0.25)]),
            SeparableField::default(),
            0.0,
        );
        let dt = 1e-2;
        let traj = solve(&p, &SolverConfig::new(12, dt, 1.0)).unwrap();
        for (n, s) in traj.forward().iter().enumerate() {
            for (j, a0) in [1.0, -0.5, 0.25].iter().enumerate() {
                let mu = ((j + 1) * (j + 1)) as f64;
                let exact = a0 * (-mu * n as f64 * dt).exp();
                assert!((s.state[j] - exact).abs() < 1e-13 * (1.0 + n as f64));
            }
            assert!(s.state[3..].iter().all(|&a| a == 0.0));
        }
    }

    #[test]
    fn config_errors() {
        let p = heat(mode_field(1.0, &[(1, 1.0)]), SeparableField::default(), 0.5);
        let err = GalerkinSolver::new(&p, &SolverConfig::new(4, 0.1, 1.0))
            .err()
            .unwrap();
        assert!(matches!(err, SolverError::Config(ref v) if v[0].contains("r/8")));
        let err = GalerkinSolver::new(&p, &SolverConfig::new(0, -1.0, 1.0))
            .err()
            .unwrap();
        assert!(matches!(err, SolverError::Config(ref v) if v.len() == 2));
    }

    #[test]
    fn initial_approximation_examples() {
        let p = heat(mode_field(1.0, &[(1, 1.0)]), SeparableField::default(), 0.5);
        let s = GalerkinSolver::new(&p, &SolverConfig::new(3, 0.05, 1.0)).unwrap();
        let init = s.approximate_initial().unwrap();
        assert_eq!(init.nodes.len(), 11);
        assert!((init.ratio - 1.0).abs() < 1e-12);
        assert_eq!(init.nodes[0].1, ModalState::new(vec![1.0, 0.0, 0.0]));

        // truncating sum_{j<=10} w_j / j to 5 modes shrinks the L^2 norm
        let modes: Vec<(usize, f64)> = (1..=10).map(|j| (j, 1.0 / j as f64)).collect();
        let p = heat(mode_field(1.0, &modes), SeparableField::default(), 0.0);
        let s = GalerkinSolver::new(&p, &SolverConfig::new(5, 0.01, 1.0)).unwrap();
        let init = s.approximate_initial().unwrap();
        let full: f64 = modes.iter().map(|m| m.1 * m.1).sum::<f64>().sqrt();
        assert!(init.nodes[0].1.l2() <= full);

        // sin^3 x truncated to two modes, measured in L^4
        let mut p = heat(
            SeparableField::new(vec![SeparableTerm {
                time: TimeProfile::Constant { value: 1.0 },
                space: SpaceProfile::SinePower {
                    amplitude: 1.0,
                    power: 3,
                },
            }]),
            SeparableField::default(),
            0.0,
        );
        p.q = vec![4.0];
        let s = GalerkinSolver::new(&p, &SolverConfig::new(2, 0.01, 1.0)).unwrap();
        let init = s.approximate_initial().unwrap();
        // oracle: phi_k = (3/4) sin x; int sin^4 = 3pi/8, int sin^12 = 231 pi / 1024
        let oracle = 0.75 * (3.0 * PI / 8.0).powf(0.25) / (231.0 * PI / 1024.0).powf(0.25);
        // 24 quadrature nodes resolve sin^12 to about 1e-11
        assert!(
            (init.ratio - oracle).abs() < 1e-9,
            "{} vs {oracle}",
            init.ratio
        );
        assert!(init.within_bound());
    }
}
