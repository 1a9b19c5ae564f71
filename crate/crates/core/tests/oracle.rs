use sdd_galerkin::fdm::{compare, fdm_solve, FdmConfig, FdmError};
use sdd_galerkin::presets;
use sdd_galerkin::solver::GalerkinSolver;
use sdd_galerkin::trajectory::SolverConfig;

#[test]
fn manufactured_on_the_grid() {
    let p = presets::manufactured();
    let traj = fdm_solve(
        &p,
        &FdmConfig {
            n: 200,
            dt: 1e-4,
            t_end: 2.0,
        },
    )
    .unwrap();
    let last = traj.last();
    let xs = traj.nodes(std::f64::consts::PI);
    let dx = std::f64::consts::PI / 200.0;
    let (mut err, mut norm) = (0.0, 0.0);
    for (x, u) in xs.iter().zip(&last.state.values) {
        let e = presets::manufactured_exact(last.t, *x);
        err += dx * (u - e).powi(2);
        norm += dx * e * e;
    }
    let rel = (err / norm).sqrt();
    eprintln!("manufactured fdm relative error {rel:e}");
    assert!(rel < 1e-3);
}

#[test]
fn heat_agreement() {
    let p = presets::heat(presets::mode_one(1.0));
    let s = GalerkinSolver::new(&p, &SolverConfig::new(32, 1e-3, 1.0)).unwrap();
    let spectral = s.solve().unwrap();
    let grid = fdm_solve(
        &p,
        &FdmConfig {
            n: 256,
            dt: 1e-3,
            t_end: 1.0,
        },
    )
    .unwrap();
    let rows = compare(&spectral, s.basis(), &grid, &[0.5, 1.0]).unwrap();
    eprintln!("heat {rows:?}");
    assert!(rows.iter().all(|r| r.relative_l2 < 2e-3));
}

#[test]
fn dissipative_agreement() {
    let p = presets::dissipative(2.0);
    let s = GalerkinSolver::new(&p, &SolverConfig::new(32, 1e-3, 2.0)).unwrap();
    let spectral = s.solve().unwrap();
    let grid = fdm_solve(
        &p,
        &FdmConfig {
            n: 256,
            dt: 1e-3,
            t_end: 2.0,
        },
    )
    .unwrap();
    let rows = compare(&spectral, s.basis(), &grid, &[0.5, 1.0, 2.0]).unwrap();
    eprintln!("dissipative {rows:?}");
    assert!(rows.iter().all(|r| r.relative_l2 < 5e-3));
}

#[test]
fn different_problems_are_rejected() {
    let a = presets::heat(presets::mode_one(1.0));
    let b = presets::heat(presets::mode_one(2.0));
    let s = GalerkinSolver::new(&a, &SolverConfig::new(4, 1e-2, 0.1)).unwrap();
    let grid = fdm_solve(
        &b,
        &FdmConfig {
            n: 32,
            dt: 1e-2,
            t_end: 0.1,
        },
    )
    .unwrap();
    assert!(matches!(
        compare(&s.solve().unwrap(), s.basis(), &grid, &[0.1]),
        Err(FdmError::SpecMismatch { .. })
    ));
}
