//! Solver output and the shared CSV trajectory format.
//!
//! CSV layout: header `t,tau,l2,lq,h1,v2,linf`, optionally followed by one
//! `a1..ak` column per mode. Values use 17 significant digits so a file
//! re-read reproduces every `f64` exactly; `tau` is `NaN` on the initial
//! history rows, where no delay is evaluated.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{BasisError, EigenBasis, ModalState, NormKind};

pub const CSV_HEADER: [&str; 7] = ["t", "tau", "l2", "lq", "h1", "v2", "linf"];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Modes (per axis in 2D).
    pub k: usize,
    pub dt: f64,
    #[serde(rename = "t_end", alias = "T")]
    pub t_end: f64,
    /// Resolution used to ingest the initial history; defaults to `dt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history_dt: Option<f64>,
}

impl SolverConfig {
    pub fn new(k: usize, dt: f64, t_end: f64) -> Self {
        Self {
            k,
            dt,
            t_end,
            history_dt: None,
        }
    }

    pub fn history_resolution(&self) -> f64 {
        self.history_dt.unwrap_or(self.dt)
    }

    /// Index of the last step, `ceil(t_end / dt)`.
    pub fn steps(&self) -> i64 {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as i64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    BlowupSuspected { t: f64, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: ModalState,
    /// Delay realized at this time; `None` on the ingested initial history.
    pub tau: Option<f64>,
}

/// Galerkin approximation on `[-r, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub problem_digest: String,
    pub config: SolverConfig,
    pub samples: Vec<TrajectorySample>,
    pub status: Termination,
    /// `||phi_k||_{L^inf L^q} / ||phi||_{L^inf L^q}` for the primary `q`.
    pub initial_lq_ratio: f64,
    pub diagnostics: Vec<String>,
}

impl Trajectory {
    pub fn is_complete(&self) -> bool {
        self.status == Termination::Completed
    }

    /// Samples at `t >= 0`.
    pub fn forward(&self) -> &[TrajectorySample] {
        let start = self.samples.partition_point(|s| s.t < 0.0);
        &self.samples[start..]
    }

    /// Ingested initial history, `t <= 0`.
    pub fn initial_segment(&self) -> &[TrajectorySample] {
        let end = self.samples.partition_point(|s| s.t <= 0.0);
        &self.samples[..end]
    }

    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory is never empty")
    }

    /// Sample at the stored time closest to `t`, if within half a step.
    pub fn at(&self, t: f64) -> Option<&TrajectorySample> {
        let i = self.samples.partition_point(|s| s.t < t);
        let candidates = [i.checked_sub(1), Some(i)];
        candidates
            .into_iter()
            .flatten()
            .filter_map(|j| self.samples.get(j))
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .filter(|s| (s.t - t).abs() <= 0.5 * self.config.dt + 1e-12)
    }

    pub fn norm_rows(&self, basis: &EigenBasis, q: f64) -> Result<Vec<NormRow>, BasisError> {
        self.samples
            .iter()
            .map(|s| NormRow::of_state(basis, s, q))
            .collect()
    }

    pub fn write_csv<W: Write>(
        &self,
        basis: &EigenBasis,
        q: f64,
        dump_modes: bool,
        out: W,
    ) -> Result<(), CsvError> {
        let rows = self.norm_rows(basis, q).map_err(|e| CsvError::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        let modes: Option<Vec<&[f64]>> =
            dump_modes.then(|| self.samples.iter().map(|s| &s.state[..]).collect());
        write_norm_csv(&rows, modes.as_deref(), out)
    }
}

/// One CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormRow {
    pub t: f64,
    pub tau: f64,
    pub l2: f64,
    pub lq: f64,
    pub h1: f64,
    pub v2: f64,
    pub linf: f64,
}

impl NormRow {
    pub fn of_state(
        basis: &EigenBasis,
        sample: &TrajectorySample,
        q: f64,
    ) -> Result<Self, BasisError> {
        let a = &sample.state;
        Ok(Self {
            t: sample.t,
            tau: sample.tau.unwrap_or(f64::NAN),
            l2: basis.norm(a, NormKind::Lq(2.0))?,
            lq: basis.norm(a, NormKind::Lq(q))?,
            h1: basis.norm(a, NormKind::V1)?,
            v2: basis.norm(a, NormKind::V2)?,
            linf: basis.norm(a, NormKind::Linf)?,
        })
    }

    fn values(&self) -> [f64; 7] {
        [
            self.t, self.tau, self.l2, self.lq, self.h1, self.v2, self.linf,
        ]
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_norm_csv<W: Write>(
    rows: &[NormRow],
    modes: Option<&[&[f64]]>,
    mut out: W,
) -> Result<(), CsvError> {
    let width = modes.and_then(|m| m.first()).map_or(0, |m| m.len());
    let mut header: Vec<String> = CSV_HEADER.iter().map(|s| s.to_string()).collect();
    header.extend((1..=width).map(|j| format!("a{j}")));
    writeln!(out, "{}", header.join(","))?;
    for (i, row) in rows.iter().enumerate() {
        let mut cells: Vec<String> = row.values().iter().map(|&v| fmt(v)).collect();
        if let Some(m) = modes {
            cells.extend(m[i].iter().map(|&v| fmt(v)));
        }
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Parsed trajectory CSV: norm rows plus the modal columns, if present.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTrajectory {
    pub rows: Vec<NormRow>,
    pub modes: Vec<Vec<f64>>,
}

pub fn read_norm_csv<R: BufRead>(input: R) -> Result<CsvTrajectory, CsvError> {
    let mut lines = input.lines();
    let header = lines.next().ok_or(CsvError::Parse {
        line: 1,
        message: "empty file".into(),
    })??;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < CSV_HEADER.len() || cols[..CSV_HEADER.len()] != CSV_HEADER {
        return Err(CsvError::Parse {
            line: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    let mut modes = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| CsvError::Parse {
                line: i + 2,
                message: e.to_string(),
            })?;
        if vals.len() != cols.len() {
            return Err(CsvError::Parse {
                line: i + 2,
                message: format!("expected {} columns, got {}", cols.len(), vals.len()),
            });
        }
        rows.push(NormRow {
            t: vals[0],
            tau: vals[1],
            l2: vals[2],
            lq: vals[3],
            h1: vals[4],
            v2: vals[5],
            linf: vals[6],
        });
        if vals.len() > CSV_HEADER.len() {
            modes.push(vals[CSV_HEADER.len()..].to_vec());
        }
    }
    Ok(CsvTrajectory { rows, modes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_roundtrip_is_exact(vals in proptest::collection::vec(-1e6f64..1e6, 7 * 5), modes in proptest::collection::vec(-1.0f64..1.0, 3 * 5)) {
            let rows: Vec<NormRow> = vals.chunks(7).enumerate().map(|(i, c)| NormRow {
                t: c[0], tau: if i == 0 { f64::NAN } else { c[1] }, l2: c[2], lq: c[3], h1: c[4], v2: c[5], linf: c[6],
            }).collect();
            let m: Vec<&[f64]> = modes.chunks(3).collect();
            let mut buf = Vec::new();
            write_norm_csv(&rows, Some(&m), &mut buf).unwrap();
            let back = read_norm_csv(&buf[..]).unwrap();
            prop_assert!(back.rows[0].tau.is_nan());
            for (a, b) in rows.iter().zip(&back.rows).skip(1) {
                prop_assert_eq!(a, b);
            }
            prop_assert_eq!(back.modes.concat(), modes);
        }
    }

    #[test]
    fn header_is_fixed() {
        let mut buf = Vec::new();
        write_norm_csv(&[], None, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,tau,l2,lq,h1,v2,linf\n");
        assert!(read_norm_csv(&b"t,x\n"[..]).is_err());
    }
}
