//! Problem definition: nonlinearities, forcing, delay functional, initial
//! history, and sampled checkers for the structural hypotheses.

mod delay;
mod field;
mod nonlinearity;

pub use delay::{estimate_tau_lipschitz, DelaySpec, NormArgument};
pub use field::{
    DiscreteField, ModeTerm, SeparableField, SeparableTerm, SpaceProfile, TimeProfile,
};
pub use nonlinearity::{
    check_dissipativity, check_growth, critical_exponents, CouplingTerm, CriticalExponents,
    DissipativityCheck, GrowthCheck, Monomial, NonlinearitySpec, ReactionTerm, SampledBound,
};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::basis::{BasisError, DomainSpec};
use crate::history::HistoryError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("critical exponent needs beta0 > beta, got beta0 = {beta0}, beta = {beta}")]
    ExponentOrder { beta0: f64, beta: f64 },
    #[error(
        "q = {q} must exceed the critical exponent q_c = max{{2p, 2beta, p0}} = {q_c} (p0 = {p0})"
    )]
    BelowCriticalExponent { q: f64, q_c: f64, p0: f64 },
    #[error("delay evaluated to {tau}, outside [0, {r}]")]
    DelayOutOfRange { tau: f64, r: f64 },
    #[error("delay evaluated on an empty history")]
    EmptyHistory,
    #[error("trial histories of a pair must share node times")]
    MismatchedPair,
    #[error("all trial history pairs are identical")]
    NoDistinctPairs,
    #[error("invalid problem: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Basis(#[from] BasisError),
}

fn default_q() -> Vec<f64> {
    vec![2.0]
}

/// Full problem: `u_t - Lap u = f(u) + g(u, u(t - tau(t, u_t))) + h(t, x)`,
/// `u = 0` on the boundary, `u = phi` on `[-r, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub domain: DomainSpec,
    pub nonlinearity: NonlinearitySpec,
    pub delay: DelaySpec,
    #[serde(default)]
    pub forcing: SeparableField,
    pub initial: SeparableField,
    /// Exponents for L^q diagnostics; the first one is primary.
    #[serde(default = "default_q")]
    pub q: Vec<f64>,
}

impl ProblemSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut out = self.nonlinearity.violations();
        out.extend(self.delay.violations());
        out.extend(self.forcing.violations(&self.domain, "forcing"));
        out.extend(self.initial.violations(&self.domain, "initial"));
        for (i, term) in self.forcing.terms.iter().enumerate() {
            if term.time.sup_forward().is_none() {
                out.push(format!(
                    "forcing[{i}]: time profile is unbounded for t >= 0"
                ));
            }
        }
        if self.initial.is_empty() {
            out.push("initial history needs at least one term".into());
        }
        if self.q.is_empty() {
            out.push("q list must not be empty".into());
        }
        for q in &self.q {
            if !(*q >= 1.0 && q.is_finite()) {
                out.push(format!("q = {q} must be finite and at least 1"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Invalid(v))
        }
    }

    pub fn primary_q(&self) -> f64 {
        self.q.first().copied().unwrap_or(2.0)
    }

    /// Initial history `phi(theta, x)`.
    pub fn initial_at(&self, theta: f64, x: &[f64]) -> f64 {
        self.initial.eval(&self.domain, theta, x)
    }

    pub fn forcing_at(&self, t: f64, x: &[f64]) -> f64 {
        self.forcing.eval(&self.domain, t, x)
    }

    /// Stable content hash, used to tell trajectories of different problems apart.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("problem serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Same problem with the initial history multiplied by `factor`.
    pub fn with_scaled_initial(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for term in &mut out.initial.terms {
            term.time = match term.time.clone() {
                TimeProfile::Constant { value } => TimeProfile::Constant {
                    value: factor * value,
                },
                TimeProfile::Exponential {
                    amplitude,
                    rate,
                    shift,
                } => TimeProfile::Exponential {
                    amplitude: factor * amplitude,
                    rate,
                    shift,
                },
                TimeProfile::Sine {
                    amplitude,
                    omega,
                    phase,
                } => TimeProfile::Sine {
                    amplitude: factor * amplitude,
                    omega,
                    phase,
                },
            };
        }
        out
    }
}
