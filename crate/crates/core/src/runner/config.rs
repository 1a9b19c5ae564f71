use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RunnerError;
use crate::model::ProblemSpec;
use crate::solver::config_violations;
use crate::trajectory::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    Simulate,
    CheckHypotheses,
    Converge,
    CompareOracle,
    VerifyEstimates,
    Sweep,
}

impl RunKind {
    pub const ALL: [&'static str; 6] = [
        "simulate",
        "check-hypotheses",
        "converge",
        "compare-oracle",
        "verify-estimates",
        "sweep",
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    /// Mode counts, ascending.
    pub levels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub n: usize,
    /// Defaults to `solver.dt`.
    #[serde(default)]
    pub dt: Option<f64>,
    pub times: Vec<f64>,
    #[serde(default = "default_oracle_tolerance")]
    pub tolerance: f64,
}

fn default_oracle_tolerance() -> f64 {
    5e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    DecayLq,
    DecayV1,
    LinfBound,
    V2Budget,
    Smoothing,
    Absorbing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatesSection {
    #[serde(default = "default_checks")]
    pub checks: Vec<CheckKind>,
    /// Initial-data scale factors for the family checks.
    #[serde(default)]
    pub amplitudes: Vec<f64>,
}

fn default_checks() -> Vec<CheckKind> {
    vec![CheckKind::DecayLq, CheckKind::DecayV1, CheckKind::LinfBound]
}

impl Default for EstimatesSection {
    fn default() -> Self {
        Self {
            checks: default_checks(),
            amplitudes: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesesSection {
    #[serde(default = "default_range")]
    pub range: f64,
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Random history pairs for the delay Lipschitz estimate.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
}

fn default_range() -> f64 {
    50.0
}
fn default_grid() -> usize {
    2001
}
fn default_pairs() -> usize {
    200
}

impl Default for HypothesesSection {
    fn default() -> Self {
        Self {
            range: default_range(),
            grid: default_grid(),
            pairs: default_pairs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Run kind applied to every expanded configuration.
    pub kind: RunKind,
    /// Dotted path into the configuration, mapped to the values to try.
    pub parameters: BTreeMap<String, Vec<toml::Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: RunKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub problem: ProblemSpec,
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimates: Option<EstimatesSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypotheses: Option<HypothesesSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    /// The normalized source, kept for sweep expansion.
    #[serde(skip)]
    pub source: Option<toml::Table>,
}

impl ExperimentConfig {
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// `pi`, `2pi`, `2*pi`, `pi/2`, `3pi/4`.
fn pi_expression(s: &str) -> Option<f64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.to_string(), b.parse::<f64>().ok()?),
        None => (s.clone(), 1.0),
    };
    let factor = num.strip_suffix("pi")?.trim_end_matches('*');
    let factor = if factor.is_empty() {
        1.0
    } else {
        factor.parse::<f64>().ok()?
    };
    Some(factor * PI / den)
}

fn normalize(value: &mut toml::Value) {
    match value {
        toml::Value::String(s) => {
            if let Some(v) = pi_expression(s) {
                *value = toml::Value::Float(v);
            }
        }
        toml::Value::Array(items) => items.iter_mut().for_each(normalize),
        toml::Value::Table(t) => t.iter_mut().for_each(|(_, v)| normalize(v)),
        _ => {}
    }
}

fn section<T: DeserializeOwned>(
    table: &toml::Table,
    key: &str,
    out: &mut Vec<String>,
) -> Option<T> {
    let value = table.get(key)?;
    match value.clone().try_into::<T>() {
        Ok(v) => Some(v),
        Err(e) => {
            out.push(format!("{key}: {}", e.message().trim()));
            None
        }
    }
}

fn required<T: DeserializeOwned>(
    table: &toml::Table,
    key: &str,
    prefix: &str,
    out: &mut Vec<String>,
) -> Option<T> {
    if !table.contains_key(key) {
        out.push(format!("{prefix}{key}: missing field"));
        return None;
    }
    let mut sub = Vec::new();
    let v = section(table, key, &mut sub);
    out.extend(sub.into_iter().map(|m| format!("{prefix}{m}")));
    v
}

fn problem_from(table: &toml::Table, out: &mut Vec<String>) -> Option<ProblemSpec> {
    let p = "problem.";
    let domain = required(table, "domain", p, out);
    let nonlinearity = required(table, "nonlinearity", p, out);
    let delay = required(table, "delay", p, out);
    let initial = required(table, "initial", p, out);
    let mut forcing_err = Vec::new();
    let forcing = section(table, "forcing", &mut forcing_err);
    out.extend(forcing_err.into_iter().map(|m| format!("{p}{m}")));
    let mut q_err = Vec::new();
    let q = section(table, "q", &mut q_err);
    out.extend(q_err.into_iter().map(|m| format!("{p}{m}")));
    for key in table.keys() {
        if !["domain", "nonlinearity", "delay", "initial", "forcing", "q"].contains(&key.as_str()) {
            out.push(format!("{p}{key}: unknown field"));
        }
    }
    Some(ProblemSpec {
        domain: domain?,
        nonlinearity: nonlinearity?,
        delay: delay?,
        forcing: forcing.unwrap_or_default(),
        initial: initial?,
        q: q.unwrap_or_else(|| vec![2.0]),
    })
}

fn solver_from(table: &toml::Table, out: &mut Vec<String>) -> Option<SolverConfig> {
    let p = "solver.";
    let k = required(table, "k", p, out);
    let dt = required(table, "dt", p, out);
    let t_key = if table.contains_key("T") {
        "T"
    } else {
        "t_end"
    };
    let t_end = required(table, t_key, p, out);
    let mut h_err = Vec::new();
    let history_dt = section(table, "history_dt", &mut h_err);
    out.extend(h_err.into_iter().map(|m| format!("{p}{m}")));
    for key in table.keys() {
        if !["k", "dt", "T", "t_end", "history_dt"].contains(&key.as_str()) {
            out.push(format!("{p}{key}: unknown field"));
        }
    }
    Some(SolverConfig {
        k: k?,
        dt: dt?,
        t_end: t_end?,
        history_dt,
    })
}

/// Validates a parsed document, reporting every violation found.
pub fn config_from_table(mut table: toml::Table) -> Result<ExperimentConfig, RunnerError> {
    table.iter_mut().for_each(|(_, v)| normalize(v));
    let mut out = Vec::new();

    let kind = match table.get("kind") {
        None => {
            out.push("kind: missing field".into());
            None
        }
        Some(v) => match v.clone().try_into::<RunKind>() {
            Ok(k) => Some(k),
            Err(_) => {
                out.push(format!(
                    "kind: unrecognized run kind {v}, expected one of {}",
                    RunKind::ALL.join(", ")
                ));
                None
            }
        },
    };
    let problem = match table.get("problem") {
        Some(toml::Value::Table(t)) => problem_from(t, &mut out),
        Some(_) => {
            out.push("problem: expected a table".into());
            None
        }
        None => {
            out.push("problem: missing section".into());
            None
        }
    };
    let solver = match table.get("solver") {
        Some(toml::Value::Table(t)) => solver_from(t, &mut out),
        Some(_) => {
            out.push("solver: expected a table".into());
            None
        }
        None => {
            out.push("solver: missing section".into());
            None
        }
    };
    let name: Option<String> = section(&table, "name", &mut out);
    let output: Option<PathBuf> = section(&table, "output", &mut out);
    let converge: Option<ConvergeSection> = section(&table, "converge", &mut out);
    let oracle: Option<OracleSection> = section(&table, "oracle", &mut out);
    let estimates: Option<EstimatesSection> = section(&table, "estimates", &mut out);
    let hypotheses: Option<HypothesesSection> = section(&table, "hypotheses", &mut out);
    let sweep: Option<SweepSection> = section(&table, "sweep", &mut out);
    for key in table.keys() {
        const KNOWN: [&str; 10] = [
            "kind",
            "name",
            "output",
            "problem",
            "solver",
            "converge",
            "oracle",
            "estimates",
            "hypotheses",
            "sweep",
        ];
        if !KNOWN.contains(&key.as_str()) {
            out.push(format!("{key}: unknown field"));
        }
    }

    if let Some(p) = &problem {
        out.extend(p.violations().into_iter().map(|m| format!("problem: {m}")));
        if let Some(s) = &solver {
            out.extend(config_violations(p, s));
        }
    }
    match kind {
        Some(RunKind::Converge) => match &converge {
            None if !table.contains_key("converge") => {
                out.push("converge: missing section (levels)".into())
            }
            Some(c) => {
                if c.levels.len() < 3 {
                    out.push(format!(
                        "converge.levels: at least 3 levels needed, got {}",
                        c.levels.len()
                    ));
                }
                if c.levels.windows(2).any(|w| w[1] <= w[0]) || c.levels.contains(&0) {
                    out.push("converge.levels: must be positive and increasing".into());
                }
            }
            None => {}
        },
        Some(RunKind::CompareOracle) => {
            if !table.contains_key("oracle") {
                out.push("oracle: missing section (n, times)".into());
            }
            if problem.as_ref().is_some_and(|p| p.domain.dimension() != 1) {
                out.push("oracle: the finite-difference oracle is one-dimensional".into());
            }
        }
        Some(RunKind::Sweep) => match &sweep {
            None if !table.contains_key("sweep") => {
                out.push("sweep: missing section (kind, parameters)".into())
            }
            Some(s) => {
                if s.kind == RunKind::Sweep {
                    out.push("sweep.kind: sweeps cannot nest".into());
                }
                if s.parameters.is_empty() || s.parameters.values().any(Vec::is_empty) {
                    out.push("sweep.parameters: every parameter needs at least one value".into());
                }
            }
            None => {}
        },
        _ => {}
    }
    if !out.is_empty() {
        return Err(RunnerError::Schema(out));
    }
    Ok(ExperimentConfig {
        kind: kind.expect("checked"),
        name,
        output,
        problem: problem.expect("checked"),
        solver: solver.expect("checked"),
        converge,
        oracle,
        estimates,
        hypotheses,
        sweep,
        source: Some(table),
    })
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, RunnerError> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| RunnerError::Parse(e.message().to_string()))?;
    config_from_table(table)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, RunnerError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunnerError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAT: &str = r#"
kind = "simulate"

[problem]
domain = { dimension = 1, lengths = ["pi"] }
q = [4]
delay = { kind = "constant", r = 0, tau0 = 0 }

[problem.nonlinearity]
f = { kind = "polynomial", coefficients = [] }
g = { kind = "zero" }
p = 1
beta = 1
a0 = 1
b0 = 1
beta0 = 3
lambda = 1
n = 0

[[problem.initial]]
time = { kind = "constant", value = 1 }
space = { kind = "eigenmodes", terms = [{ amplitude = 1, mode = [1] }] }

[solver]
k = 8
dt = 0.001
T = 1
"#;

    #[test]
    fn pi_strings() {
        assert_eq!(pi_expression("pi"), Some(PI));
        assert_eq!(pi_expression("2pi"), Some(2.0 * PI));
        assert_eq!(pi_expression("2 * pi"), Some(2.0 * PI));
        assert_eq!(pi_expression("3pi/4"), Some(3.0 * PI / 4.0));
        assert_eq!(pi_expression("simulate"), None);
    }

    #[test]
    fn heat_config_loads() {
        let c = parse_config(HEAT).unwrap();
        assert_eq!(c.kind, RunKind::Simulate);
        assert_eq!(c.problem.domain.lengths(), &[PI]);
        assert_eq!(c.solver, SolverConfig::new(8, 0.001, 1.0));
        assert_eq!(
            c.problem,
            crate::presets::heat(crate::presets::mode_one(1.0))
        );
    }

    #[test]
    fn every_violation_is_listed() {
        let text = HEAT
            .replace("beta0 = 3", "beta0 = 1")
            .replace("dt = 0.001\n", "")
            .replace("kind = \"simulate\"", "kind = \"launch\"");
        let Err(RunnerError::Schema(v)) = parse_config(&text) else {
            panic!("expected schema violations");
        };
        assert!(
            v.iter().any(|m| m.starts_with("kind: unrecognized")),
            "{v:?}"
        );
        assert!(v.iter().any(|m| m == "solver.dt: missing field"), "{v:?}");
        assert!(
            v.iter()
                .any(|m| m.contains("dissipativity condition requires beta0 > beta")),
            "{v:?}"
        );
    }

    #[test]
    fn delay_resolution_is_enforced() {
        let text = HEAT.replace(
            "delay = { kind = \"constant\", r = 0, tau0 = 0 }",
            "delay = { kind = \"constant\", r = 0.004, tau0 = 0.004 }",
        );
        let Err(RunnerError::Schema(v)) = parse_config(&text) else {
            panic!("expected schema violations");
        };
        assert!(v[0].contains("r/8"));
    }
}
