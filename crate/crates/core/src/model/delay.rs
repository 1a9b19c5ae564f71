use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::history::{HistorySegment, HistoryState};

/// Which norm of the history feeds a state-dependent delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NormArgument {
    /// `s = |phi(0)|_2^2`
    #[default]
    Current,
    /// `s = ||phi||_{C([-r,0]; L^2)}^2`
    Window,
}

/// Delay functional `tau(t, u_t)` with values in `[0, r]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DelaySpec {
    Constant {
        r: f64,
        tau0: f64,
    },
    /// `tau = r / (1 + c s)` with `s` the squared norm selected by `argument`.
    StateNorm {
        r: f64,
        c: f64,
        #[serde(default)]
        argument: NormArgument,
    },
}

impl DelaySpec {
    pub fn bound(&self) -> f64 {
        match *self {
            DelaySpec::Constant { r, .. } | DelaySpec::StateNorm { r, .. } => r,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let r = self.bound();
        if !(r.is_finite() && r >= 0.0) {
            out.push(format!("delay.r must be finite and nonnegative, got {r}"));
        }
        match *self {
            DelaySpec::Constant { tau0, .. } => {
                if !(tau0 >= 0.0 && tau0 <= r) {
                    out.push(format!(
                        "delay.tau0 must lie in [0, r] = [0, {r}], got {tau0}"
                    ));
                }
            }
            DelaySpec::StateNorm { c, .. } => {
                if !(c.is_finite() && c > 0.0) {
                    out.push(format!("delay.c must be positive, got {c}"));
                }
            }
        }
        out
    }

    /// Delay from the norm argument `s` (ignored for a constant delay).
    pub fn from_norm(&self, s: f64) -> f64 {
        match *self {
            DelaySpec::Constant { tau0, .. } => tau0,
            DelaySpec::StateNorm { r, c, .. } => r / (1.0 + c * s),
        }
    }

    fn argument<S: HistoryState>(&self, seg: &HistorySegment<S>) -> Result<f64, ModelError> {
        match *self {
            DelaySpec::Constant { .. } => Ok(0.0),
            DelaySpec::StateNorm { argument, .. } => {
                let norm = match argument {
                    NormArgument::Current => seg.latest_l2().ok_or(ModelError::EmptyHistory)?,
                    NormArgument::Window => seg.window_l2()?,
                };
                Ok(norm * norm)
            }
        }
    }

    /// `tau(t, u_t)`; a value outside `[0, r]` is reported, never clamped.
    pub fn eval<S: HistoryState>(
        &self,
        _t: f64,
        seg: &HistorySegment<S>,
    ) -> Result<f64, ModelError> {
        let tau = self.from_norm(self.argument(seg)?);
        let r = self.bound();
        if tau.is_nan() || tau < 0.0 || tau > r {
            return Err(ModelError::DelayOutOfRange { tau, r });
        }
        Ok(tau)
    }
}

/// Largest observed `|tau(phi1) - tau(phi2)| / ||phi1 - phi2||_{C L^2}` over
/// trial pairs sharing the same node times.
pub fn estimate_tau_lipschitz<S: HistoryState>(
    spec: &DelaySpec,
    t: f64,
    pairs: &[(HistorySegment<S>, HistorySegment<S>)],
) -> Result<f64, ModelError> {
    let mut best: Option<f64> = None;
    for (a, b) in pairs {
        let mut diff: HistorySegment<S> = HistorySegment::new(a.window())?;
        if a.len() != b.len() {
            return Err(ModelError::MismatchedPair);
        }
        for ((ta, sa), (tb, sb)) in a.iter().zip(b.iter()) {
            if ta != tb {
                return Err(ModelError::MismatchedPair);
            }
            let d = sa
                .values()
                .iter()
                .zip(sb.values())
                .map(|(x, y)| x - y)
                .collect();
            diff.push(ta, sa.with_values(d))?;
        }
        let dist = diff.window_l2()?;
        if dist == 0.0 {
            continue;
        }
        let ratio = (spec.eval(t, a)? - spec.eval(t, b)?).abs() / dist;
        best = Some(best.map_or(ratio, |m: f64| m.max(ratio)));
    }
    best.ok_or(ModelError::NoDistinctPairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::ModalState;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn constant_history(r: f64, state: &[f64]) -> HistorySegment {
        let mut h = HistorySegment::new(r).unwrap();
        for i in 0..=8 {
            h.push(-r + r * i as f64 / 8.0, ModalState::new(state.to_vec()))
                .unwrap();
        }
        h
    }

    #[test]
    fn eval_examples() {
        let h = constant_history(1.0, &[1.0, 0.0]);
        let c = DelaySpec::Constant { r: 1.0, tau0: 0.5 };
        assert_eq!(c.eval(0.0, &h).unwrap(), 0.5);
        let s = DelaySpec::StateNorm {
            r: 1.0,
            c: 1.0,
            argument: NormArgument::Current,
        };
        assert_eq!(s.eval(0.0, &h).unwrap(), 0.5);
        let z = constant_history(1.0, &[0.0, 0.0]);
        assert_eq!(s.eval(0.0, &z).unwrap(), 1.0);
        let bad = DelaySpec::Constant { r: 1.0, tau0: 1.5 };
        assert_eq!(
            bad.eval(0.0, &h),
            Err(ModelError::DelayOutOfRange { tau: 1.5, r: 1.0 })
        );
        assert_eq!(bad.violations().len(), 1);
    }

    #[test]
    fn lipschitz_examples() {
        let pairs = vec![(
            constant_history(1.0, &[1.0, 0.0]),
            constant_history(1.0, &[1.1, 0.0]),
        )];
        let c = DelaySpec::Constant { r: 1.0, tau0: 0.3 };
        assert_eq!(estimate_tau_lipschitz(&c, 0.0, &pairs).unwrap(), 0.0);
        let s = DelaySpec::StateNorm {
            r: 1.0,
            c: 1.0,
            argument: NormArgument::Current,
        };
        let est = estimate_tau_lipschitz(&s, 0.0, &pairs).unwrap();
        // finite-difference quotient of r / (1 + s) between s = 1 and s = 1.21
        let oracle = (0.5 - 1.0 / 2.21) / 0.1;
        assert!((est - oracle).abs() < 1e-12);
        assert!(est <= 2.0 * 1.0 * 1.1);
        assert_eq!(estimate_tau_lipschitz(&s, 0.0, &pairs).unwrap(), est);

        let same = vec![(
            constant_history(1.0, &[1.0, 0.0]),
            constant_history(1.0, &[1.0, 0.0]),
        )];
        assert_eq!(
            estimate_tau_lipschitz(&s, 0.0, &same),
            Err(ModelError::NoDistinctPairs)
        );
    }

    #[test]
    fn randomized_histories_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let specs = [
            DelaySpec::Constant { r: 0.7, tau0: 0.7 },
            DelaySpec::StateNorm {
                r: 0.5,
                c: 1.0,
                argument: NormArgument::Current,
            },
            DelaySpec::StateNorm {
                r: 2.0,
                c: 0.01,
                argument: NormArgument::Window,
            },
        ];
        for spec in &specs {
            let r = spec.bound();
            for _ in 0..10_000 {
                let mut h = HistorySegment::new(r).unwrap();
                let scale = 10f64.powf(rng.random_range(-3.0..3.0));
                for i in 0..=4 {
                    let a: Vec<f64> = (0..3)
                        .map(|_| scale * rng.random_range(-1.0..1.0))
                        .collect();
                    h.push(-r + r * i as f64 / 4.0, ModalState::new(a)).unwrap();
                }
                let tau = spec.eval(0.0, &h).unwrap();
                assert!((0.0..=r).contains(&tau));
            }
        }
    }
}
