use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{CheckKind, ExperimentConfig};
use super::{entry_digest, Artifacts, Blowup, RunOptions, RunOutcome, RunnerError};
use crate::basis::{EigenBasis, ModalState};
use crate::estimates::{
    absorbing_check, verify_decay, verify_linf_bound, verify_smoothing, verify_v2_budget,
    DecayNorm, NormSeries, ReportEntry, Verdict,
};
use crate::fdm::{compare, fdm_solve, FdmConfig};
use crate::history::HistorySegment;
use crate::model::{
    check_dissipativity, check_growth, estimate_tau_lipschitz, ProblemSpec, SampledBound,
};
use crate::solver::{convergence_study, GalerkinSolver, INITIAL_RATIO_BOUND};
use crate::trajectory::{write_norm_csv, Termination, Trajectory};

fn entry(
    config: &ExperimentConfig,
    check_id: &str,
    reference: &str,
    ok: bool,
    constants: BTreeMap<String, f64>,
    margins: BTreeMap<String, f64>,
    notes: Vec<String>,
) -> ReportEntry {
    ReportEntry {
        check_id: check_id.into(),
        reference: reference.into(),
        verdict: Verdict::from_bool(ok),
        constants,
        margins,
        inputs_digest: entry_digest(check_id, config),
        notes,
    }
}

fn map<const N: usize>(pairs: [(&str, f64); N]) -> BTreeMap<String, f64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn blowup_of(run: &str, traj: &Trajectory) -> Option<Blowup> {
    match &traj.status {
        Termination::Completed => None,
        Termination::BlowupSuspected { t, reason } => Some(Blowup {
            run: run.into(),
            t: *t,
            reason: reason.clone(),
        }),
    }
}

struct Run {
    traj: Trajectory,
    basis: EigenBasis,
}

fn solve(problem: &ProblemSpec, config: &ExperimentConfig) -> Result<Run, RunnerError> {
    let solver = GalerkinSolver::new(problem, &config.solver)?;
    let traj = solver.solve()?;
    Ok(Run {
        basis: solver.basis().clone(),
        traj,
    })
}

fn write_trajectory(
    art: &mut Artifacts,
    name: &str,
    run: &Run,
    q: f64,
    dump_modes: bool,
) -> Result<(), RunnerError> {
    let mut buf = Vec::new();
    run.traj
        .write_csv(&run.basis, q, dump_modes, &mut buf)
        .map_err(|e| RunnerError::Precondition(e.to_string()))?;
    art.write(name, &buf)
}

fn initial_entry(config: &ExperimentConfig, traj: &Trajectory) -> ReportEntry {
    let ratio = traj.initial_lq_ratio;
    entry(
        config,
        "initial-approximation",
        "||phi_k||_{L^inf L^q} <= 8 ||phi||_{L^inf L^q}",
        ratio <= INITIAL_RATIO_BOUND,
        map([("ratio", ratio)]),
        map([("margin", INITIAL_RATIO_BOUND - ratio)]),
        traj.diagnostics.clone(),
    )
}

pub(super) fn simulate(
    config: &ExperimentConfig,
    opts: &RunOptions,
    art: &mut Artifacts,
) -> Result<RunOutcome, RunnerError> {
    let run = solve(&config.problem, config)?;
    write_trajectory(
        art,
        "trajectory.csv",
        &run,
        config.problem.primary_q(),
        opts.dump_modes,
    )?;
    Ok(RunOutcome {
        entries: vec![initial_entry(config, &run.traj)],
        blowups: blowup_of("trajectory", &run.traj).into_iter().collect(),
        ..Default::default()
    })
}

fn bound_entry(
    config: &ExperimentConfig,
    id: &str,
    reference: &str,
    bound: &SampledBound,
    messages: &mut Vec<String>,
) -> ReportEntry {
    let (ratio, at, ok) = match bound {
        SampledBound::Pass { ratio, at } => (*ratio, at.clone(), true),
        SampledBound::Violation { ratio, at } => (*ratio, at.clone(), false),
    };
    if !ok {
        messages.push(format!(
            "{id}: violated at {at:?}, value / bound = {ratio:e} ({reference})"
        ));
    }
    let mut constants = map([("worst_ratio", ratio)]);
    for (i, x) in at.iter().enumerate() {
        constants.insert(format!("witness_{i}"), *x);
    }
    entry(
        config,
        id,
        reference,
        ok,
        constants,
        map([("margin", 1.0 - ratio)]),
        vec![],
    )
}

pub(super) fn check_hypotheses(config: &ExperimentConfig) -> Result<RunOutcome, RunnerError> {
    let h = config.hypotheses.clone().unwrap_or_default();
    let nl = &config.problem.nonlinearity;
    let mut messages = Vec::new();
    let mut entries = Vec::new();

    let growth = check_growth(nl, h.range, h.grid);
    entries.push(bound_entry(
        config,
        "growth-f",
        "|f(u)| <= a0 (|u|^p + 1)",
        &growth.f,
        &mut messages,
    ));
    entries.push(bound_entry(
        config,
        "growth-g",
        "|g(u, v)| <= b0 (|u|^beta + |v|^beta + 1)",
        &growth.g,
        &mut messages,
    ));

    let diss = check_dissipativity(nl, h.range, h.grid);
    if !diss.passed {
        messages.push(format!(
            "dissipativity: violated at s = {}, needs N >= {:e}, declared N = {}",
            diss.at, diss.minimal_n, nl.n
        ));
    }
    entries.push(entry(
        config,
        "dissipativity",
        "f(s) s <= -lambda |s|^(beta0 + 1) + N",
        diss.passed,
        map([
            ("minimal_n", diss.minimal_n),
            ("witness", diss.at),
            ("declared_n", nl.n),
        ]),
        map([("margin", nl.n - diss.minimal_n)]),
        vec![],
    ));

    let crit = nl
        .critical_exponents()
        .map_err(|e| RunnerError::Precondition(e.to_string()))?;
    let q = config.problem.primary_q();
    if !crit.admits(q) {
        messages.push(format!(
            "critical exponent: q = {q} does not exceed q_c = max{{2p, 2beta, p0}} = {}",
            crit.q_c
        ));
    }
    entries.push(entry(
        config,
        "critical-exponent",
        "q > q_c = max{2p, 2beta, p0}, p0 = (beta0 - 1) beta / (beta0 - beta)",
        crit.admits(q),
        map([
            ("q", q),
            ("q_c", crit.q_c),
            ("p0", crit.p0),
            ("q_bar", crit.q_bar(q)),
        ]),
        map([("q_minus_q_c", q - crit.q_c)]),
        vec![],
    ));

    // delay regularity over random modal histories
    let r = config.problem.delay.bound();
    let k = EigenBasis::build(&config.problem.domain, config.solver.k)
        .map_err(crate::solver::SolverError::from)?
        .len();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let history = |scale: f64, rng: &mut ChaCha8Rng| -> Result<HistorySegment, RunnerError> {
        let mut seg = HistorySegment::new(r).map_err(crate::solver::SolverError::from)?;
        let nodes = if r > 0.0 { 8 } else { 0 };
        for i in 0..=nodes {
            let a = (0..k)
                .map(|_| scale * rng.random_range(-1.0..1.0))
                .collect();
            seg.push(-r + r * i as f64 / 8.0, ModalState::new(a))
                .map_err(crate::solver::SolverError::from)?;
        }
        Ok(seg)
    };
    let mut pairs = Vec::with_capacity(h.pairs);
    for _ in 0..h.pairs {
        let scale = 10f64.powf(rng.random_range(-2.0..1.0));
        let a = history(scale, &mut rng)?;
        let b = history(scale, &mut rng)?;
        pairs.push((a, b));
    }
    let lipschitz = estimate_tau_lipschitz(&config.problem.delay, 0.0, &pairs)
        .map_err(|e| RunnerError::Precondition(e.to_string()))?;
    entries.push(entry(
        config,
        "delay-lipschitz",
        "|tau(phi1) - tau(phi2)| <= L ||phi1 - phi2||_{C L^2}, tau in [0, r]",
        lipschitz.is_finite(),
        map([("observed_l", lipschitz), ("pairs", h.pairs as f64)]),
        BTreeMap::new(),
        vec![],
    ));
    Ok(RunOutcome {
        entries,
        messages,
        ..Default::default()
    })
}

pub(super) fn converge(
    config: &ExperimentConfig,
    art: &mut Artifacts,
) -> Result<RunOutcome, RunnerError> {
    let levels = &config.converge.as_ref().expect("validated").levels;
    let configs: Vec<_> = levels
        .iter()
        .map(|&k| {
            let mut c = config.solver.clone();
            c.k = k;
            c
        })
        .collect();
    let table = convergence_study(&config.problem, &configs)?;
    let mut csv = String::from("k_coarse,k_fine,difference\n");
    for (w, d) in table.levels.windows(2).zip(&table.differences) {
        csv += &format!("{},{},{d:.16e}\n", w[0], w[1]);
    }
    art.write("convergence.csv", csv.as_bytes())?;
    let mut constants = BTreeMap::new();
    for (w, d) in table.levels.windows(2).zip(&table.differences) {
        constants.insert(format!("diff_{}_{}", w[0], w[1]), *d);
    }
    Ok(RunOutcome {
        entries: vec![entry(
            config,
            "convergence",
            "max_t |u_{k'}(t) - u_k(t)|_2 nonincreasing in k",
            table.nonincreasing,
            constants,
            BTreeMap::new(),
            vec![],
        )],
        ..Default::default()
    })
}

pub(super) fn compare_oracle(
    config: &ExperimentConfig,
    opts: &RunOptions,
    art: &mut Artifacts,
) -> Result<RunOutcome, RunnerError> {
    let oracle = config.oracle.as_ref().expect("validated");
    let fdm_config = FdmConfig {
        n: oracle.n,
        dt: oracle.dt.unwrap_or(config.solver.dt),
        t_end: config.solver.t_end,
    };
    let (spectral, grid) = rayon::join(
        || solve(&config.problem, config),
        || fdm_solve(&config.problem, &fdm_config),
    );
    let (spectral, grid) = (spectral?, grid?);
    let q = config.problem.primary_q();
    write_trajectory(art, "spectral.csv", &spectral, q, opts.dump_modes)?;
    let mut buf = Vec::new();
    write_norm_csv(&grid.norm_rows(q), None, &mut buf)
        .map_err(|e| RunnerError::Precondition(e.to_string()))?;
    art.write("oracle.csv", &buf)?;

    let mut blowups: Vec<Blowup> = blowup_of("spectral", &spectral.traj).into_iter().collect();
    if let Termination::BlowupSuspected { t, reason } = &grid.status {
        blowups.push(Blowup {
            run: "oracle".into(),
            t: *t,
            reason: reason.clone(),
        });
    }
    if !blowups.is_empty() {
        return Ok(RunOutcome {
            blowups,
            ..Default::default()
        });
    }
    let rows = compare(&spectral.traj, &spectral.basis, &grid, &oracle.times)?;
    let mut csv = String::from("t,relative_l2\n");
    let mut margins = BTreeMap::new();
    for r in &rows {
        csv += &format!("{:.16e},{:.16e}\n", r.t, r.relative_l2);
        margins.insert(format!("t_{}", r.t), oracle.tolerance - r.relative_l2);
    }
    art.write("comparison.csv", csv.as_bytes())?;
    let worst = rows.iter().map(|r| r.relative_l2).fold(0.0, f64::max);
    Ok(RunOutcome {
        entries: vec![entry(
            config,
            "oracle-agreement",
            "|u_spectral - u_fdm|_2 / |u_fdm|_2 <= tolerance at the requested times",
            worst <= oracle.tolerance,
            map([
                ("worst_relative_l2", worst),
                ("tolerance", oracle.tolerance),
            ]),
            margins,
            vec![],
        )],
        ..Default::default()
    })
}

pub(super) fn verify_estimates(
    config: &ExperimentConfig,
    opts: &RunOptions,
    art: &mut Artifacts,
) -> Result<RunOutcome, RunnerError> {
    let est = config.estimates.clone().unwrap_or_default();
    let problem = &config.problem;
    let q = problem.primary_q();
    let crit = problem
        .nonlinearity
        .critical_exponents()
        .map_err(|e| RunnerError::Precondition(e.to_string()))?;
    if est
        .checks
        .iter()
        .any(|c| matches!(c, CheckKind::DecayLq | CheckKind::Smoothing))
    {
        crit.require(q)
            .map_err(|e| RunnerError::Precondition(e.to_string()))?;
    }
    let needs_family = est
        .checks
        .iter()
        .any(|c| matches!(c, CheckKind::V2Budget | CheckKind::Absorbing))
        || (est.checks.contains(&CheckKind::LinfBound) && !est.amplitudes.is_empty());

    let base = solve(problem, config)?;
    write_trajectory(art, "trajectory.csv", &base, q, opts.dump_modes)?;
    let mut outcome = RunOutcome {
        entries: vec![initial_entry(config, &base.traj)],
        blowups: blowup_of("trajectory", &base.traj).into_iter().collect(),
        ..Default::default()
    };

    let family: Vec<(f64, Run)> = if needs_family {
        est.amplitudes
            .par_iter()
            .map(|&a| Ok((a, solve(&problem.with_scaled_initial(a), config)?)))
            .collect::<Result<_, RunnerError>>()?
    } else {
        Vec::new()
    };
    for (i, (a, run)) in family.iter().enumerate() {
        write_trajectory(art, &format!("family-{i}.csv"), run, q, opts.dump_modes)?;
        if let Some(b) = blowup_of(&format!("amplitude {a}"), &run.traj) {
            outcome.blowups.push(b);
        }
    }
    if !outcome.blowups.is_empty() {
        return Ok(outcome);
    }

    let base_series = NormSeries::from_trajectory(&base.traj, &base.basis, q)?;
    let family_series: Vec<(f64, NormSeries)> = family
        .iter()
        .map(|(a, r)| Ok((*a, NormSeries::from_trajectory(&r.traj, &r.basis, q)?)))
        .collect::<Result<_, RunnerError>>()?;
    let plain: Vec<NormSeries> = family_series.iter().map(|f| f.1.clone()).collect();
    let mut checks = est.checks.clone();
    checks.sort();
    checks.dedup();
    for check in checks {
        match check {
            CheckKind::DecayLq => {
                outcome
                    .entries
                    .push(verify_decay(&base_series, DecayNorm::Lq, q, &crit)?)
            }
            CheckKind::DecayV1 => {
                outcome
                    .entries
                    .push(verify_decay(&base_series, DecayNorm::V1, q, &crit)?)
            }
            CheckKind::LinfBound => {
                let fam = if plain.is_empty() {
                    vec![base_series.clone()]
                } else {
                    plain.clone()
                };
                outcome.entries.push(verify_linf_bound(&fam)?);
            }
            CheckKind::V2Budget => outcome.entries.push(verify_v2_budget(&plain)?),
            CheckKind::Smoothing => outcome.entries.push(verify_smoothing(
                &base_series,
                problem.domain.dimension(),
                problem.nonlinearity.p_hat(),
                &crit,
            )?),
            CheckKind::Absorbing => outcome.entries.push(absorbing_check(&family_series)?),
        }
    }
    Ok(outcome)
}
