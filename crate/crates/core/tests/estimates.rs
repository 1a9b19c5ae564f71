use rayon::prelude::*;

use sdd_galerkin::estimates::*;
use sdd_galerkin::model::ProblemSpec;
use sdd_galerkin::presets;
use sdd_galerkin::solver::GalerkinSolver;
use sdd_galerkin::trajectory::{read_norm_csv, SolverConfig};

fn series(p: &ProblemSpec, cfg: &SolverConfig) -> NormSeries {
    let s = GalerkinSolver::new(p, cfg).unwrap();
    let traj = s.solve().unwrap();
    NormSeries::from_trajectory(&traj, s.basis(), p.primary_q()).unwrap()
}

#[test]
fn heat_series_is_exact() {
    let p = presets::heat(presets::mode_one(1.0));
    let s = series(&p, &SolverConfig::new(4, 1e-2, 1.0));
    for r in &s.rows {
        assert!((r.l2 - (-r.t).exp()).abs() < 1e-12);
    }
    let zero = series(
        &presets::heat(presets::mode_one(0.0)),
        &SolverConfig::new(4, 1e-2, 1.0),
    );
    assert!(zero
        .rows
        .iter()
        .all(|r| r.l2 == 0.0 && r.linf == 0.0 && r.v2 == 0.0));
}

#[test]
fn steady_forcing_tail_is_flat() {
    // F_1 = mu_1 c holds a_1 = c fixed
    let mut p = presets::heat(presets::mode_one(0.4));
    p.forcing = presets::mode_one(0.4);
    let s = series(&p, &SolverConfig::new(4, 1e-2, 2.0));
    for r in &s.rows {
        assert!((r.l2 - 0.4).abs() < 1e-8);
    }
}

#[test]
fn heat_v1_decay_and_budget() {
    let p = presets::heat(presets::mode_one(1.0));
    let crit = p.nonlinearity.critical_exponents().unwrap();
    let s = series(&p, &SolverConfig::new(4, 1e-2, 10.0));
    let e = verify_decay(&s, DecayNorm::V1, 4.0, &crit).unwrap();
    eprintln!("{}", e.to_json_line());
    assert!(e.passed());

    let fam: Vec<NormSeries> = [0.5, 2.0, 8.0]
        .par_iter()
        .map(|&c| series(&p.with_scaled_initial(c), &SolverConfig::new(4, 1e-3, 2.0)))
        .collect();
    // closed form c^2 (1 - e^{-2T}) / 2 with mu_1 = 1
    for (c, s) in [0.5f64, 2.0, 8.0].iter().zip(&fam) {
        let t: Vec<f64> = s.times();
        let y: Vec<f64> = s.column(|r| r.v2 * r.v2);
        let integral: f64 = t
            .windows(2)
            .zip(y.windows(2))
            .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
            .sum();
        let exact = c * c * (1.0 - (-4.0f64).exp()) / 2.0;
        assert!((integral - exact).abs() / exact < 1e-6);
    }
    let e = verify_v2_budget(&fam).unwrap();
    eprintln!("{}", e.to_json_line());
    assert!(e.passed());
}

#[test]
fn dissipative_budget_and_smoothing() {
    let p = presets::dissipative(1.0);
    let fam: Vec<NormSeries> = [0.5, 2.0, 8.0]
        .par_iter()
        .map(|&c| series(&p.with_scaled_initial(c), &SolverConfig::new(16, 1e-3, 2.0)))
        .collect();
    let e = verify_v2_budget(&fam).unwrap();
    eprintln!("{}", e.to_json_line());
    assert!(e.passed());

    let crit = p.nonlinearity.critical_exponents().unwrap();
    let reports: Vec<ReportEntry> = [0.3, 0.15]
        .par_iter()
        .map(|&w| {
            let mut bp = p.clone();
            bp.initial = presets::bump(1.0, std::f64::consts::FRAC_PI_2, w);
            let b = sdd_galerkin::basis::EigenBasis::build(&bp.domain, 64).unwrap();
            let norm = bp.initial.lq_bound(&b, 8.0).unwrap().unwrap();
            bp.initial = presets::bump(1.0 / norm, std::f64::consts::FRAC_PI_2, w);
            let s = series(&bp, &SolverConfig::new(64, 1e-4, 2.0));
            verify_smoothing(&s, 1, bp.nonlinearity.p_hat(), &crit).unwrap()
        })
        .collect();
    for r in &reports {
        eprintln!("{}", r.to_json_line());
        assert!(r.passed());
        assert_eq!(r.constants["exponent"], 0.125);
    }
    let spread = smoothing_spread(&reports).unwrap();
    eprintln!("{}", spread.to_json_line());
    assert!(spread.passed());
}

#[test]
fn csv_reproduces_the_report() {
    let p = presets::dissipative(2.0);
    let s = GalerkinSolver::new(&p, &SolverConfig::new(8, 1e-3, 3.0)).unwrap();
    let traj = s.solve().unwrap();
    let crit = p.nonlinearity.critical_exponents().unwrap();
    let direct = NormSeries::from_trajectory(&traj, s.basis(), 8.0).unwrap();
    let mut buf = Vec::new();
    traj.write_csv(s.basis(), 8.0, true, &mut buf).unwrap();
    let csv = read_norm_csv(&buf[..]).unwrap();
    let reread = NormSeries::from_csv(&csv, 8.0, true).unwrap();
    for kind in [DecayNorm::Lq, DecayNorm::V1] {
        let a = verify_decay(&direct, kind, 8.0, &crit).unwrap();
        let b = verify_decay(&reread, kind, 8.0, &crit).unwrap();
        assert_eq!(a.to_json_line(), b.to_json_line());
    }
}
