use std::f64::consts::PI;

use sdd_galerkin::basis::{EigenBasis, NormKind};
use sdd_galerkin::model::{CouplingTerm, Monomial};
use sdd_galerkin::presets;
use sdd_galerkin::solver::{convergence_study, solve, GalerkinSolver};
use sdd_galerkin::trajectory::SolverConfig;

fn l2_error_to_exact(
    traj: &sdd_galerkin::trajectory::Trajectory,
    basis: &EigenBasis,
) -> (f64, f64) {
    let last = traj.last();
    let pts = basis.grid_points();
    let u = basis.to_grid(&last.state).unwrap();
    let diff: Vec<f64> = pts
        .iter()
        .zip(&u)
        .map(|(x, u)| u - presets::manufactured_exact(last.t, x[0]))
        .collect();
    let exact: Vec<f64> = pts
        .iter()
        .map(|x| presets::manufactured_exact(last.t, x[0]))
        .collect();
    (
        basis.grid_lq(&diff, 2.0).unwrap(),
        basis.grid_lq(&exact, 2.0).unwrap(),
    )
}

#[test]
fn heat_mode_one_decays_exactly() {
    let p = presets::heat(presets::mode_one(1.0));
    let traj = solve(&p, &SolverConfig::new(8, 1e-3, 1.0)).unwrap();
    let last = traj.last();
    assert_eq!(last.t, 1.0);
    assert!((last.state.l2() - (-1.0f64).exp()).abs() < 1e-12);
    assert!(traj.forward().iter().all(|s| s.tau == Some(0.0)));
}

#[test]
fn manufactured_solution() {
    let p = presets::manufactured();
    let mut errs = Vec::new();
    for dt in [1e-3, 5e-4] {
        let s = GalerkinSolver::new(&p, &SolverConfig::new(4, dt, 2.0)).unwrap();
        let traj = s.solve().unwrap();
        assert!(traj.is_complete());
        let (e, n) = l2_error_to_exact(&traj, s.basis());
        errs.push(e / n);
    }
    eprintln!("manufactured relative errors {errs:?}");
    assert!(errs[0] < 1e-3);
}

#[test]
fn concatenation_is_bitwise() {
    let p = presets::dissipative(2.0);
    let s1 = GalerkinSolver::new(&p, &SolverConfig::new(8, 1e-3, 1.0)).unwrap();
    let first = s1.solve().unwrap();
    let joined = s1.continue_to(&first, 2.0).unwrap();
    let whole = solve(&p, &SolverConfig::new(8, 1e-3, 2.0)).unwrap();
    assert_eq!(joined.samples, whole.samples);
    assert_eq!(solve(&p, &SolverConfig::new(8, 1e-3, 2.0)).unwrap(), whole);
}

#[test]
fn delays_stay_in_window() {
    let p = presets::dissipative(8.0);
    let traj = solve(&p, &SolverConfig::new(16, 1e-3, 2.0)).unwrap();
    for s in traj.forward() {
        let tau = s.tau.unwrap();
        assert!((0.0..=0.5).contains(&tau));
    }
}

#[test]
fn dissipative_tail_is_monotone() {
    let mut p = presets::dissipative(2.0);
    p.nonlinearity.g = CouplingTerm::Zero;
    let traj = solve(&p, &SolverConfig::new(16, 1e-3, 2.0)).unwrap();
    let l2: Vec<f64> = traj.forward().iter().map(|s| s.state.l2()).collect();
    for w in l2.windows(2) {
        assert!(w[1] <= w[0] + 1e-8);
    }
}

#[test]
fn convergence_tables() {
    let heat = presets::heat(presets::mode_one(1.0));
    let cfg = |k| SolverConfig::new(k, 1e-3, 1.0);
    let t = convergence_study(&heat, &[cfg(4), cfg(8), cfg(16)]).unwrap();
    assert_eq!(t.differences, vec![0.0, 0.0]);

    let m = presets::manufactured();
    let t = convergence_study(&m, &[cfg(4), cfg(8), cfg(16)]).unwrap();
    eprintln!("manufactured {:?}", t.differences);
    assert!(t.nonincreasing);

    let mut d = presets::dissipative(2.0);
    d.nonlinearity.g = CouplingTerm::Polynomial {
        terms: vec![Monomial {
            coefficient: 0.1,
            u: 0,
            v: 1,
        }],
    };
    let cfg = |k| SolverConfig::new(k, 1e-3, 2.0);
    let t = convergence_study(&d, &[cfg(8), cfg(16), cfg(32)]).unwrap();
    eprintln!("dissipative {:?}", t.differences);
    assert!(t.nonincreasing);

    assert!(convergence_study(&heat, &[cfg(4), cfg(8)]).is_err());
}

#[test]
fn norm_chain_along_a_run() {
    let p = presets::dissipative(8.0);
    let s = GalerkinSolver::new(&p, &SolverConfig::new(16, 1e-3, 1.0)).unwrap();
    let traj = s.solve().unwrap();
    let b = s.basis();
    let mu1 = b.first_eigenvalue();
    for smp in traj.forward() {
        let l2 = b.norm(&smp.state, NormKind::Lq(2.0)).unwrap();
        let v1 = b.norm(&smp.state, NormKind::V1).unwrap();
        let v2 = b.norm(&smp.state, NormKind::V2).unwrap();
        assert!(l2 <= v1 / mu1.sqrt() * (1.0 + 1e-9));
        assert!(v1 <= v2 / mu1.sqrt() * (1.0 + 1e-9));
    }
    assert_eq!(mu1, (PI / PI).powi(2));
}
