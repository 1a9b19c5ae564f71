use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{config_from_table, ExperimentConfig};
use super::{Artifacts, Blowup, RunOptions, RunOutcome, RunnerError};

fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), String> {
    let parts: Vec<&str> = path.split('.').collect();
    let (last, init) = parts.split_last().ok_or("empty path")?;
    let mut cur = table
        .get_mut(init.first().copied().unwrap_or(last))
        .ok_or_else(|| format!("{path}: no such field"))?;
    if init.is_empty() {
        *cur = value;
        return Ok(());
    }
    for part in init[1..]
        .iter()
        .chain(std::iter::once(last))
        .take(parts.len() - 2)
    {
        cur = step(cur, part).ok_or_else(|| format!("{path}: no such field {part:?}"))?;
    }
    match cur {
        toml::Value::Table(t) => {
            t.insert(last.to_string(), value);
        }
        toml::Value::Array(a) => {
            let i: usize = last
                .parse()
                .map_err(|_| format!("{path}: {last:?} is not an index"))?;
            *a.get_mut(i)
                .ok_or_else(|| format!("{path}: index {i} out of range"))? = value;
        }
        _ => return Err(format!("{path}: cannot descend into a scalar")),
    }
    Ok(())
}

fn step<'a>(value: &'a mut toml::Value, part: &str) -> Option<&'a mut toml::Value> {
    match value {
        toml::Value::Table(t) => t.get_mut(part),
        toml::Value::Array(a) => a.get_mut(part.parse::<usize>().ok()?),
        _ => None,
    }
}

/// One sweep point: the substituted values and the resulting config.
pub type SweepPoint = (BTreeMap<String, toml::Value>, ExperimentConfig);

/// Cartesian product of the sweep parameters, in lexicographic key order,
/// each combination validated as a standalone configuration.
pub fn expand_sweep(config: &ExperimentConfig) -> Result<Vec<SweepPoint>, RunnerError> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| RunnerError::Schema(vec!["sweep: missing section".into()]))?;
    let mut base = config.source.clone().unwrap_or_default();
    base.remove("sweep");
    base.insert(
        "kind".into(),
        toml::Value::try_from(sweep.kind).expect("kind serializes"),
    );
    let mut combos: Vec<BTreeMap<String, toml::Value>> = vec![BTreeMap::new()];
    for (path, values) in &sweep.parameters {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.insert(path.clone(), v.clone());
                    c
                })
            })
            .collect();
    }
    let mut out = Vec::with_capacity(combos.len());
    let mut errors = Vec::new();
    for (i, combo) in combos.into_iter().enumerate() {
        let mut table = base.clone();
        for (path, value) in &combo {
            if let Err(e) = set_path(&mut table, path, value.clone()) {
                errors.push(format!("sweep.parameters.{e}"));
            }
        }
        match config_from_table(table) {
            Ok(c) => out.push((combo, c)),
            Err(RunnerError::Schema(v)) => {
                errors.extend(v.into_iter().map(|m| format!("sweep run {i}: {m}")))
            }
            Err(e) => return Err(e),
        }
    }
    if !errors.is_empty() {
        errors.dedup();
        return Err(RunnerError::Schema(errors));
    }
    Ok(out)
}

#[derive(Serialize)]
struct SweepRecord {
    run: String,
    parameters: BTreeMap<String, toml::Value>,
    exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub(super) fn run_sweep(
    config: &ExperimentConfig,
    opts: &RunOptions,
    art: &mut Artifacts,
) -> Result<RunOutcome, RunnerError> {
    let runs = expand_sweep(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| RunnerError::Precondition(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunOutcome, RunnerError>> = pool.install(|| {
        runs.par_iter()
            .enumerate()
            .map(|(i, (_, c))| {
                let sub = RunOptions {
                    out: art.dir().join(format!("run-{i:03}")),
                    jobs: 1,
                    dump_modes: opts.dump_modes,
                };
                super::run(c, &sub)
            })
            .collect()
    });
    let mut outcome = RunOutcome::default();
    let mut summary = String::new();
    let mut child_exit = 0;
    for (i, ((params, _), result)) in runs.into_iter().zip(results).enumerate() {
        let name = format!("run-{i:03}");
        let (code, error) = match result {
            Ok(o) => {
                for mut e in o.entries.clone() {
                    e.check_id = format!("{name}/{}", e.check_id);
                    outcome.entries.push(e);
                }
                outcome.blowups.extend(o.blowups.iter().map(|b| Blowup {
                    run: format!("{name}/{}", b.run),
                    ..b.clone()
                }));
                outcome
                    .messages
                    .extend(o.messages.iter().map(|m| format!("{name}: {m}")));
                (o.exit_code(), None)
            }
            Err(e) => {
                outcome.messages.push(format!("{name}: {e}"));
                (e.exit_code(), Some(e.to_string()))
            }
        };
        child_exit = child_exit.max(code);
        let record = SweepRecord {
            run: name,
            parameters: params,
            exit_code: code,
            error,
        };
        summary += &(serde_json::to_string(&record).expect("record serializes") + "\n");
    }
    art.write("sweep.jsonl", summary.as_bytes())?;
    outcome.child_exit = Some(child_exit);
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_reach_tables_and_arrays() {
        let mut t: toml::Table = "a = { b = [ { c = 1 } ] }\nd = 2".parse().unwrap();
        set_path(&mut t, "a.b.0.c", toml::Value::Integer(5)).unwrap();
        set_path(&mut t, "d", toml::Value::Integer(3)).unwrap();
        set_path(&mut t, "a.e", toml::Value::Integer(4)).unwrap();
        assert_eq!(t["a"]["b"][0]["c"].as_integer(), Some(5));
        assert_eq!(t["d"].as_integer(), Some(3));
        assert_eq!(t["a"]["e"].as_integer(), Some(4));
        assert!(set_path(&mut t, "x.y", toml::Value::Integer(1)).is_err());
        assert!(set_path(&mut t, "a.b.7.c", toml::Value::Integer(1)).is_err());
    }
}
