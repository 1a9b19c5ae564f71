//! Norm time series along trajectories and numerical checks of the decay,
//! integral, L^inf and smoothing bounds. All constants are measured: a PASS
//! says an admissible constant set exists for the given runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::basis::{BasisError, EigenBasis};
use crate::model::{CriticalExponents, ModelError};
use crate::trajectory::{CsvTrajectory, NormRow, Trajectory};

/// Samples below this are treated as zero when taking logarithms.
pub const LOG_FLOOR: f64 = 1e-14;
/// Fraction of the series (at the end) defining the plateau.
pub const TAIL_FRACTION: f64 = 0.2;
/// Fraction of the series (at the start) used for the rate fit.
pub const HEAD_FRACTION: f64 = 0.5;
pub const MIN_SAMPLES: usize = 10;
/// Largest admissible growth of the integral-budget ratio across a family.
pub const BUDGET_SPREAD: f64 = 10.0;
pub const ABSORBING_SPREAD: f64 = 0.1;
/// Right end of the early-time window for the smoothing check.
pub const EARLY_WINDOW: f64 = 0.1;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("series has {0} samples, at least {MIN_SAMPLES} are needed")]
    TooShort(usize),
    #[error("trajectory terminated early (blowup suspected)")]
    Incomplete,
    #[error("series carries q = {have}, check requested q = {want}")]
    WrongExponent { have: f64, want: f64 },
    #[error("family check needs at least {need} runs, got {got}")]
    FamilySize { need: usize, got: usize },
    #[error("amplitudes must span at least one decade, got {min}..{max}")]
    AmplitudeSpan { min: f64, max: f64 },
    #[error("no samples in (0, {EARLY_WINDOW}]")]
    NoEarlySamples,
    #[error("series has no initial-history row")]
    NoHistory,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Basis(#[from] BasisError),
}

/// Window norms of the initial history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialNorms {
    /// `||phi||_{C V1}`
    pub c_v1: f64,
    /// `||phi||_{L^inf L^q}`
    pub linf_lq: f64,
    /// `||phi||_{L^inf L^inf}`
    pub linf_linf: f64,
    /// `|phi(0)|_2`
    pub l2_at_zero: f64,
}

/// Norms on `t >= 0` plus the initial-history window norms, for one `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormSeries {
    pub q: f64,
    pub rows: Vec<NormRow>,
    pub initial: InitialNorms,
    pub complete: bool,
}

impl NormSeries {
    /// From every row of a trajectory (history rows have `t <= 0`).
    pub fn from_rows(all: &[NormRow], q: f64, complete: bool) -> Result<Self, EstimateError> {
        let history: Vec<&NormRow> = all.iter().filter(|r| r.t <= 0.0).collect();
        let zero = history.last().ok_or(EstimateError::NoHistory)?;
        let max = |f: fn(&NormRow) -> f64| history.iter().map(|r| f(r)).fold(0.0, f64::max);
        let initial = InitialNorms {
            c_v1: max(|r| r.h1),
            linf_lq: max(|r| r.lq),
            linf_linf: max(|r| r.linf),
            l2_at_zero: zero.l2,
        };
        Ok(Self {
            q,
            rows: all.iter().filter(|r| r.t >= 0.0).copied().collect(),
            initial,
            complete,
        })
    }

    pub fn from_trajectory(
        traj: &Trajectory,
        basis: &EigenBasis,
        q: f64,
    ) -> Result<Self, EstimateError> {
        Self::from_rows(&traj.norm_rows(basis, q)?, q, traj.is_complete())
    }

    /// A CSV carries only the primary `q`; completeness is supplied by the caller.
    pub fn from_csv(csv: &CsvTrajectory, q: f64, complete: bool) -> Result<Self, EstimateError> {
        Self::from_rows(&csv.rows, q, complete)
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn column(&self, f: impl Fn(&NormRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    fn hash_into(&self, h: &mut Sha256) {
        h.update(self.q.to_le_bytes());
        let init = self.initial;
        for v in [init.c_v1, init.linf_lq, init.linf_linf, init.l2_at_zero] {
            h.update(v.to_le_bytes());
        }
        for r in &self.rows {
            for v in [r.t, r.tau, r.l2, r.lq, r.h1, r.v2, r.linf] {
                h.update(v.to_le_bytes());
            }
        }
        h.update([self.complete as u8]);
    }
}

fn inputs_digest(check_id: &str, series: &[&NormSeries], params: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update(check_id.as_bytes());
    for s in series {
        s.hash_into(&mut h);
    }
    for p in params {
        h.update(p.to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// One line of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub check_id: String,
    /// The bound being checked, as a formula.
    pub reference: String,
    pub verdict: Verdict,
    pub constants: BTreeMap<String, f64>,
    pub margins: BTreeMap<String, f64>,
    pub inputs_digest: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ReportEntry {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report entry serializes")
    }
}

fn map<const N: usize>(pairs: [(&str, f64); N]) -> BTreeMap<String, f64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// `value(t) <= b * x0 * e^{-eta t} + rho * (1 + slack)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeFit {
    /// Tail mean.
    pub rho: f64,
    /// `3 sigma / rho` over the tail, 0 when `rho = 0`.
    pub slack: f64,
    pub b: f64,
    pub eta: f64,
    pub x0: f64,
    /// `min_t (envelope - value)`.
    pub min_margin: f64,
}

impl EnvelopeFit {
    pub fn plateau(&self) -> f64 {
        self.rho * (1.0 + self.slack)
    }

    pub fn envelope(&self, t: f64) -> f64 {
        self.b * self.x0 * (-self.eta * t).exp() + self.plateau()
    }

    /// Rechecks domination of every sample, allowing for rounding.
    pub fn dominates(&self, times: &[f64], values: &[f64]) -> bool {
        times
            .iter()
            .zip(values)
            .all(|(&t, &v)| v <= self.envelope(t) + 1e-12 * v.abs().max(1.0))
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Least-squares slope of `y` against `x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, _) = mean_std(x);
    let (my, _) = mean_std(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Fits plateau, rate and the minimal amplitude; see [`EnvelopeFit`].
pub fn fit_envelope(times: &[f64], values: &[f64], x0: f64) -> Result<EnvelopeFit, EstimateError> {
    let n = values.len();
    if n < MIN_SAMPLES {
        return Err(EstimateError::TooShort(n));
    }
    let tail = (TAIL_FRACTION * n as f64).ceil() as usize;
    let (rho, sigma) = mean_std(&values[n - tail..]);
    let slack = if rho > 0.0 { 3.0 * sigma / rho } else { 0.0 };
    let head = (HEAD_FRACTION * n as f64).ceil() as usize;
    let logs: Vec<f64> = values[..head]
        .iter()
        .map(|v| (v - rho).max(LOG_FLOOR).ln())
        .collect();
    let eta = (-slope(&times[..head], &logs)).max(0.0);
    let plateau = rho * (1.0 + slack);
    let excess = times
        .iter()
        .zip(values)
        .map(|(&t, &v)| (v - plateau).max(0.0) * (eta * t).exp())
        .fold(0.0, f64::max);
    let b = if excess == 0.0 {
        0.0
    } else if x0 > 0.0 {
        excess / x0
    } else {
        f64::INFINITY
    };
    let mut fit = EnvelopeFit {
        rho,
        slack,
        b,
        eta,
        x0,
        min_margin: 0.0,
    };
    fit.min_margin = times
        .iter()
        .zip(values)
        .map(|(&t, &v)| fit.envelope(t) - v)
        .fold(f64::INFINITY, f64::min);
    Ok(fit)
}

fn fit_constants(fit: &EnvelopeFit) -> BTreeMap<String, f64> {
    map([
        ("B", fit.b),
        ("eta", fit.eta),
        ("rho", fit.rho),
        ("slack", fit.slack),
        ("X0", fit.x0),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayNorm {
    Lq,
    V1,
}

/// Decay-to-plateau envelope of `|u|_q` or `||u||_V1`.
pub fn verify_decay(
    series: &NormSeries,
    kind: DecayNorm,
    q: f64,
    crit: &CriticalExponents,
) -> Result<ReportEntry, EstimateError> {
    if series.q != q {
        return Err(EstimateError::WrongExponent {
            have: series.q,
            want: q,
        });
    }
    if kind == DecayNorm::Lq {
        crit.require(q)?;
    }
    if !series.complete {
        return Err(EstimateError::Incomplete);
    }
    let init = series.initial;
    let (check_id, reference, values, x0) = match kind {
        DecayNorm::Lq => (
            format!("decay-L{q}"),
            "|u(t)|_q <= B0 ||phi||_{L^inf L^q} e^{-eta0 t} + rho0",
            series.column(|r| r.lq),
            init.linf_lq,
        ),
        DecayNorm::V1 => (
            "decay-V1".to_string(),
            "||u(t)||_V1 <= B1 (||phi||_{C V1} + ||phi||_{L^inf L^q}^{q/2}) e^{-eta1 t} + rho1",
            series.column(|r| r.h1),
            init.c_v1 + init.linf_lq.powf(q / 2.0),
        ),
    };
    let times = series.times();
    let fit = fit_envelope(&times, &values, x0)?;
    let ok = values.iter().all(|v| v.is_finite())
        && fit.b.is_finite()
        && fit.dominates(&times, &values)
        && (fit.eta > 0.0 || fit.b == 0.0);
    let mut notes = Vec::new();
    let t_end = times.last().copied().unwrap_or(0.0);
    if fit.eta * t_end < 5.0 && fit.b > 0.0 {
        notes.push(format!(
            "horizon covers {:.2} e-folds of the fitted rate",
            fit.eta * t_end
        ));
    }
    Ok(ReportEntry {
        inputs_digest: inputs_digest(&check_id, &[series], &[q, crit.q_c]),
        check_id,
        reference: reference.into(),
        verdict: Verdict::from_bool(ok),
        constants: fit_constants(&fit),
        margins: map([
            ("min_envelope_margin", fit.min_margin),
            ("q_minus_q_c", q - crit.q_c),
        ]),
        notes,
    })
}

fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

/// `int_0^T ||u||_V2^2 <= C_T (||phi||_{C V1}^2 + ||phi||_{L^inf L^q}^q + 1)`
/// across runs that differ only in initial amplitude.
///
/// `C_T` is the largest observed ratio. The family passes when no ratio
/// exceeds [`BUDGET_SPREAD`] times the ratio of the run with the smallest
/// initial data, i.e. the ratio does not grow with amplitude.
pub fn verify_v2_budget(family: &[NormSeries]) -> Result<ReportEntry, EstimateError> {
    if family.len() < 3 {
        return Err(EstimateError::FamilySize {
            need: 3,
            got: family.len(),
        });
    }
    if family.iter().any(|s| !s.complete) {
        return Err(EstimateError::Incomplete);
    }
    let mut runs: Vec<(f64, f64)> = family
        .iter()
        .map(|s| {
            let v2sq: Vec<f64> = s.column(|r| r.v2 * r.v2);
            let integral = trapezoid(&s.times(), &v2sq);
            let data = s.initial.c_v1.powi(2) + s.initial.linf_lq.powf(s.q) + 1.0;
            (data, integral / data)
        })
        .collect();
    let ratios: Vec<f64> = runs.iter().map(|r| r.1).collect();
    runs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let c_t = ratios.iter().copied().fold(0.0, f64::max);
    let c_min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let baseline = runs.iter().map(|r| r.1).find(|&r| r > 0.0).unwrap_or(0.0);
    let ok =
        ratios.iter().all(|r| r.is_finite()) && (c_t == 0.0 || c_t <= BUDGET_SPREAD * baseline);
    let mut constants = map([("C_T", c_t), ("baseline_ratio", baseline)]);
    for (i, r) in ratios.iter().enumerate() {
        constants.insert(format!("ratio_{i}"), *r);
    }
    let refs: Vec<&NormSeries> = family.iter().collect();
    Ok(ReportEntry {
        check_id: "v2-budget".into(),
        reference: "int_0^T ||u||_V2^2 ds <= C_T (||phi||_{C V1}^2 + ||phi||_{L^inf L^q}^q + 1)"
            .into(),
        verdict: Verdict::from_bool(ok),
        constants,
        margins: map([
            ("growth_margin", BUDGET_SPREAD * baseline - c_t),
            ("max_over_min", if c_min > 0.0 { c_t / c_min } else { 0.0 }),
        ]),
        inputs_digest: inputs_digest("v2-budget", &refs, &[]),
        notes: vec![],
    })
}

fn tail_level(values: &[f64]) -> f64 {
    let tail = ((TAIL_FRACTION * values.len() as f64).ceil() as usize).clamp(1, values.len());
    let (m, s) = mean_std(&values[values.len() - tail..]);
    m + 3.0 * s
}

/// `max_t |u(t)|_inf <= ||phi||_{L^inf L^inf} + rho_*` with `rho_*` the
/// largest tail level of `|u|_inf` over the family.
pub fn verify_linf_bound(family: &[NormSeries]) -> Result<ReportEntry, EstimateError> {
    if family.is_empty() {
        return Err(EstimateError::FamilySize { need: 1, got: 0 });
    }
    if family.iter().any(|s| !s.complete) {
        return Err(EstimateError::Incomplete);
    }
    let rho_star = family
        .iter()
        .map(|s| tail_level(&s.column(|r| r.linf)))
        .fold(0.0, f64::max);
    let margins: Vec<f64> = family
        .iter()
        .map(|s| {
            let peak = s.rows.iter().map(|r| r.linf).fold(0.0, f64::max);
            s.initial.linf_linf + rho_star - peak
        })
        .collect();
    let ok = rho_star.is_finite() && margins.iter().all(|m| *m >= 0.0);
    let mut margin_map = BTreeMap::new();
    for (i, m) in margins.iter().enumerate() {
        margin_map.insert(format!("run_{i}"), *m);
    }
    let refs: Vec<&NormSeries> = family.iter().collect();
    Ok(ReportEntry {
        check_id: "linf-bound".into(),
        reference: "|u(t)|_inf <= ||phi||_{L^inf L^inf} + rho_*".into(),
        verdict: Verdict::from_bool(ok),
        constants: map([("rho_star", rho_star)]),
        margins: margin_map,
        inputs_digest: inputs_digest("linf-bound", &refs, &[]),
        notes: vec![],
    })
}

/// Early-time product `(|u(t)|_inf - rho2)_+ t^{(d+1)/(2q)} e^{eta2 t}` on
/// `(0, 0.1]`, with `eta2, rho2` fitted on `t >= 0.1` first.
///
/// On one trajectory this can only establish a finite `B2`; whether `B2`
/// depends on the datum beyond `||phi||` is judged across runs by
/// [`smoothing_spread`].
pub fn verify_smoothing(
    series: &NormSeries,
    dimension: usize,
    p_hat: f64,
    crit: &CriticalExponents,
) -> Result<ReportEntry, EstimateError> {
    let q = series.q;
    crit.require(q)?;
    if !series.complete {
        return Err(EstimateError::Incomplete);
    }
    let exponent = (dimension as f64 + 1.0) / (2.0 * q);
    let early: Vec<&NormRow> = series
        .rows
        .iter()
        .filter(|r| r.t > 0.0 && r.t <= EARLY_WINDOW)
        .collect();
    if early.is_empty() {
        return Err(EstimateError::NoEarlySamples);
    }
    let late: Vec<&NormRow> = series.rows.iter().filter(|r| r.t >= EARLY_WINDOW).collect();
    let late_t: Vec<f64> = late.iter().map(|r| r.t).collect();
    let late_v: Vec<f64> = late.iter().map(|r| r.linf).collect();
    let late_fit = fit_envelope(&late_t, &late_v, series.initial.linf_lq)?;
    let (eta2, rho2) = (late_fit.eta, late_fit.plateau());
    let product: Vec<(f64, f64)> = early
        .iter()
        .map(|r| {
            let p = (r.linf - rho2).max(0.0) * r.t.powf(exponent) * (eta2 * r.t).exp();
            (r.t, p)
        })
        .collect();
    let (t_sup, sup) = product
        .iter()
        .copied()
        .fold((0.0, 0.0), |a, p| if p.1 > a.1 { p } else { a });
    let norm = series.initial.linf_lq.powf(p_hat);
    let b2 = if sup == 0.0 { 0.0 } else { sup / norm };
    let ok = product.iter().all(|p| p.1.is_finite()) && b2.is_finite();
    Ok(ReportEntry {
        check_id: format!("smoothing-L{q}"),
        reference:
            "|u(t)|_inf <= B2 ||phi||^{p_hat} t^{-(d+1)/(2q)} e^{-eta2 t} + rho2, p_hat = max{p, beta}"
                .into(),
        verdict: Verdict::from_bool(ok),
        constants: map([
            ("B2", b2),
            ("eta2", eta2),
            ("rho2", rho2),
            ("exponent", exponent),
            ("p_hat", p_hat),
        ]),
        margins: map([("early_sup", sup), ("t_at_sup", t_sup)]),
        inputs_digest: inputs_digest(
            "smoothing",
            &[series],
            &[dimension as f64, p_hat, crit.q_c],
        ),
        notes: vec![format!(
            "the undefined smoothing threshold q_c* is taken equal to q_c = {}",
            crit.q_c
        )],
    })
}

/// Compares `B2` across smoothing reports of data with equal `||phi||`;
/// PASS when the largest is within [`BUDGET_SPREAD`] of the smallest.
pub fn smoothing_spread(reports: &[ReportEntry]) -> Result<ReportEntry, EstimateError> {
    if reports.len() < 2 {
        return Err(EstimateError::FamilySize {
            need: 2,
            got: reports.len(),
        });
    }
    let b2: Vec<f64> = reports
        .iter()
        .map(|r| r.constants.get("B2").copied().unwrap_or(f64::NAN))
        .collect();
    let hi = b2.iter().copied().fold(0.0, f64::max);
    let lo = b2.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if hi == 0.0 { 1.0 } else { hi / lo };
    let ok = reports.iter().all(ReportEntry::passed)
        && b2.iter().all(|b| b.is_finite())
        && spread <= BUDGET_SPREAD;
    let mut h = Sha256::new();
    h.update(b"smoothing-spread");
    for r in reports {
        h.update(r.inputs_digest.as_bytes());
    }
    Ok(ReportEntry {
        check_id: "smoothing-spread".into(),
        reference: "B2 in the smoothing bound does not depend on phi beyond ||phi||".into(),
        verdict: Verdict::from_bool(ok),
        constants: map([("B2_max", hi), ("B2_min", lo)]),
        margins: map([("max_over_min", spread), ("allowed", BUDGET_SPREAD)]),
        inputs_digest: hex::encode(h.finalize()),
        notes: vec![],
    })
}

/// Terminal `|u(T)|_2` across amplitudes; PASS when the relative spread
/// `(max - min) / max(max, 0.01 * min_i |phi_i(0)|_2)` is at most 10%.
pub fn absorbing_check(family: &[(f64, NormSeries)]) -> Result<ReportEntry, EstimateError> {
    if family.len() < 3 {
        return Err(EstimateError::FamilySize {
            need: 3,
            got: family.len(),
        });
    }
    let amps: Vec<f64> = family.iter().map(|f| f.0.abs()).collect();
    let (amin, amax) = (
        amps.iter().copied().fold(f64::INFINITY, f64::min),
        amps.iter().copied().fold(0.0, f64::max),
    );
    if !(amin > 0.0 && amax >= 10.0 * amin) {
        return Err(EstimateError::AmplitudeSpan {
            min: amin,
            max: amax,
        });
    }
    if family.iter().any(|f| !f.1.complete) {
        return Err(EstimateError::Incomplete);
    }
    let terminal: Vec<f64> = family
        .iter()
        .map(|f| f.1.rows.last().map_or(0.0, |r| r.l2))
        .collect();
    let hi = terminal.iter().copied().fold(0.0, f64::max);
    let lo = terminal.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = family
        .iter()
        .map(|f| f.1.initial.l2_at_zero)
        .fold(f64::INFINITY, f64::min);
    let spread = (hi - lo) / hi.max(0.01 * scale).max(f64::MIN_POSITIVE);
    let mut constants = map([("terminal_max", hi), ("terminal_min", lo)]);
    for (a, v) in amps.iter().zip(&terminal) {
        constants.insert(format!("terminal_at_{a}"), *v);
    }
    let refs: Vec<&NormSeries> = family.iter().map(|f| &f.1).collect();
    Ok(ReportEntry {
        check_id: "absorbing".into(),
        reference: "terminal |u(T)|_2 independent of the initial amplitude".into(),
        verdict: Verdict::from_bool(spread <= ABSORBING_SPREAD),
        constants,
        margins: map([("relative_spread", spread), ("allowed", ABSORBING_SPREAD)]),
        inputs_digest: inputs_digest("absorbing", &refs, &amps),
        notes: vec![],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::critical_exponents;

    fn grid(n: usize, t_end: f64) -> Vec<f64> {
        (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect()
    }

    fn series(values: &[(f64, f64)], q: f64) -> NormSeries {
        let rows: Vec<NormRow> = values
            .iter()
            .map(|&(t, v)| NormRow {
                t,
                tau: 0.0,
                l2: v,
                lq: v,
                h1: v,
                v2: v,
                linf: v,
            })
            .collect();
        NormSeries::from_rows(&rows, q, true).unwrap()
    }

    #[test]
    fn envelope_of_pure_exponential() {
        let t = grid(501, 5.0);
        let v: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
        let fit = fit_envelope(&t, &v, 1.0).unwrap();
        // reference values from an independent least-squares computation
        assert!((fit.rho - 0.011587184455141342).abs() < 1e-12);
        assert!((fit.eta - 1.0503523064107816).abs() < 1e-9);
        assert!((fit.b - 0.9909700681606413).abs() < 1e-9);
        assert!(fit.dominates(&t, &v));
        assert!(fit.min_margin >= -1e-12);
    }

    #[test]
    fn envelope_of_shifted_exponential() {
        let t = grid(501, 5.0);
        let v: Vec<f64> = t.iter().map(|t| 2.0 * (-3.0 * t).exp() + 1.0).collect();
        let fit = fit_envelope(&t, &v, 1.0).unwrap();
        assert!((fit.rho - 1.0).abs() < 1e-5);
        assert!((fit.eta - 3.0).abs() < 0.1);
        assert!((fit.b - 2.0).abs() < 0.01);
        assert!(fit.dominates(&t, &v));
    }

    #[test]
    fn envelope_of_constant() {
        let t = grid(20, 1.0);
        let fit = fit_envelope(&t, &[0.3; 20], 1.0).unwrap();
        assert_eq!((fit.rho, fit.eta, fit.b), (0.3, 0.0, 0.0));
        assert!(matches!(
            fit_envelope(&t[..9], &[1.0; 9], 1.0),
            Err(EstimateError::TooShort(9))
        ));
    }

    #[test]
    fn decay_requires_supercritical_q() {
        let crit = critical_exponents(3.0, 1.0, 3.0).unwrap();
        let s = series(&[(0.0, 0.0); 12], 4.0);
        let err = verify_decay(&s, DecayNorm::Lq, 4.0, &crit).unwrap_err();
        assert!(err.to_string().contains("q_c = max{2p, 2beta, p0} = 6"));
        // the V1 form has no such restriction
        assert!(verify_decay(&s, DecayNorm::V1, 4.0, &crit).is_ok());
    }

    #[test]
    fn zero_solution_passes_trivially() {
        let crit = critical_exponents(3.0, 1.0, 3.0).unwrap();
        let t = grid(50, 5.0);
        let s = series(&t.iter().map(|&t| (t, 0.0)).collect::<Vec<_>>(), 8.0);
        let e = verify_decay(&s, DecayNorm::Lq, 8.0, &crit).unwrap();
        assert!(e.passed());
        assert_eq!(e.constants["B"], 0.0);
        assert_eq!(e.constants["rho"], 0.0);
        assert!(verify_linf_bound(&[s]).unwrap().passed());
    }

    #[test]
    fn budget_family_sizes() {
        let s = series(&[(0.0, 1.0), (1.0, 0.5)], 2.0);
        assert!(matches!(
            verify_v2_budget(&[s.clone(), s.clone()]),
            Err(EstimateError::FamilySize { need: 3, got: 2 })
        ));
        let zero = series(&[(0.0, 0.0), (1.0, 0.0)], 2.0);
        let e = verify_v2_budget(&[zero.clone(), zero.clone(), zero]).unwrap();
        assert!(e.passed());
        assert_eq!(e.constants["C_T"], 0.0);
    }

    #[test]
    fn absorbing_preconditions() {
        let s = series(&[(0.0, 1.0), (1.0, 0.5)], 2.0);
        assert!(matches!(
            absorbing_check(&[(1.0, s.clone())]),
            Err(EstimateError::FamilySize { .. })
        ));
        assert!(matches!(
            absorbing_check(&[(1.0, s.clone()), (2.0, s.clone()), (4.0, s.clone())]),
            Err(EstimateError::AmplitudeSpan { .. })
        ));
        let e = absorbing_check(&[(1.0, s.clone()), (2.0, s.clone()), (10.0, s)]).unwrap();
        assert!(e.passed());
    }

    #[test]
    fn report_line_is_stable_json() {
        let crit = critical_exponents(3.0, 1.0, 3.0).unwrap();
        let t = grid(50, 5.0);
        let s = series(&t.iter().map(|&t| (t, (-t).exp())).collect::<Vec<_>>(), 8.0);
        let a = verify_decay(&s, DecayNorm::Lq, 8.0, &crit).unwrap();
        let line = a.to_json_line();
        let back: ReportEntry = serde_json::from_str(&line).unwrap();
        assert_eq!(back, a);
        assert!(line.contains("\"verdict\":\"PASS\""));
    }
}
