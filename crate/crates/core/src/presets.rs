//! Reference problems on `(0, pi)` used by the tests, the acceptance suite
//! and the sample configurations.

use std::f64::consts::PI;

use crate::basis::DomainSpec;
use crate::model::{
    CouplingTerm, DelaySpec, ModeTerm, Monomial, NonlinearitySpec, NormArgument, ProblemSpec,
    ReactionTerm, SeparableField, SeparableTerm, SpaceProfile, TimeProfile,
};

pub fn pi_interval() -> DomainSpec {
    DomainSpec::interval(PI).expect("positive length")
}

/// `c * w_1`, constant in time.
pub fn mode_one(c: f64) -> SeparableField {
    modes(TimeProfile::Constant { value: 1.0 }, &[(1, c)])
}

/// `d(t) * sum a_m w_m` in 1D.
pub fn modes(time: TimeProfile, terms: &[(usize, f64)]) -> SeparableField {
    SeparableField::new(vec![SeparableTerm {
        time,
        space: SpaceProfile::Eigenmodes {
            terms: terms
                .iter()
                .map(|&(m, a)| ModeTerm {
                    amplitude: a,
                    mode: vec![m],
                })
                .collect(),
        },
    }])
}

/// Constant-in-time bump of peak `amplitude`.
pub fn bump(amplitude: f64, center: f64, width: f64) -> SeparableField {
    SeparableField::new(vec![SeparableTerm {
        time: TimeProfile::Constant { value: 1.0 },
        space: SpaceProfile::Bump {
            amplitude,
            center: vec![center],
            width,
        },
    }])
}

/// `-u^3 + g`, with growth exponent 3 and dissipativity exponent 3.
fn cubic(g: CouplingTerm, b0: f64) -> NonlinearitySpec {
    NonlinearitySpec {
        f: ReactionTerm::Dissipative {
            lambda: 1.0,
            beta0: 3.0,
            lower: vec![],
        },
        g,
        p: 3.0,
        beta: 1.0,
        a0: 1.0,
        b0,
        beta0: 3.0,
        lambda: 1.0,
        n: 0.0,
    }
}

fn linear_delay(coefficient: f64) -> CouplingTerm {
    CouplingTerm::Polynomial {
        terms: vec![Monomial {
            coefficient,
            u: 0,
            v: 1,
        }],
    }
}

/// `u_t = u_xx`, no delay.
pub fn heat(initial: SeparableField) -> ProblemSpec {
    ProblemSpec {
        domain: pi_interval(),
        nonlinearity: NonlinearitySpec {
            f: ReactionTerm::Polynomial {
                coefficients: vec![],
            },
            g: CouplingTerm::Zero,
            p: 1.0,
            beta: 1.0,
            a0: 1.0,
            b0: 1.0,
            beta0: 3.0,
            lambda: 1.0,
            n: 0.0,
        },
        delay: DelaySpec::Constant { r: 0.0, tau0: 0.0 },
        forcing: SeparableField::default(),
        initial,
        q: vec![4.0],
    }
}

/// Delayed problem with exact solution `u = e^{-t} sin x`:
/// `f = -u^3`, `g = v`, `tau = 1`,
/// `h = e^{-3t} sin^3 x - e^{-(t-1)} sin x`.
pub fn manufactured() -> ProblemSpec {
    let sin = |amplitude| SpaceProfile::Sines {
        terms: vec![ModeTerm {
            amplitude,
            mode: vec![1],
        }],
    };
    ProblemSpec {
        domain: pi_interval(),
        nonlinearity: cubic(linear_delay(1.0), 1.0),
        delay: DelaySpec::Constant { r: 1.0, tau0: 1.0 },
        forcing: SeparableField::new(vec![
            SeparableTerm {
                time: TimeProfile::Exponential {
                    amplitude: 1.0,
                    rate: -3.0,
                    shift: 0.0,
                },
                space: SpaceProfile::SinePower {
                    amplitude: 1.0,
                    power: 3,
                },
            },
            SeparableTerm {
                time: TimeProfile::Exponential {
                    amplitude: -1.0,
                    rate: -1.0,
                    shift: 1.0,
                },
                space: sin(1.0),
            },
        ]),
        initial: SeparableField::new(vec![SeparableTerm {
            time: TimeProfile::Exponential {
                amplitude: 1.0,
                rate: -1.0,
                shift: 0.0,
            },
            space: sin(1.0),
        }]),
        q: vec![8.0],
    }
}

/// `u(t, x) = e^{-t} sin x`.
pub fn manufactured_exact(t: f64, x: f64) -> f64 {
    (-t).exp() * x.sin()
}

/// `f = -u^3`, `g = 0.1 v`, `tau = 0.5 / (1 + |u(t)|_2^2)`, `h = 0`,
/// `phi = amplitude * w_1`, `q = 8`.
pub fn dissipative(amplitude: f64) -> ProblemSpec {
    ProblemSpec {
        domain: pi_interval(),
        nonlinearity: cubic(linear_delay(0.1), 0.1),
        delay: DelaySpec::StateNorm {
            r: 0.5,
            c: 1.0,
            argument: NormArgument::Current,
        },
        forcing: SeparableField::default(),
        initial: mode_one(amplitude),
        q: vec![8.0],
    }
}

/// `f = -u^3`, `g = 0`, forcing `0.5 w_1`, `phi = amplitude * w_1`.
pub fn absorbing(amplitude: f64) -> ProblemSpec {
    ProblemSpec {
        domain: pi_interval(),
        nonlinearity: cubic(CouplingTerm::Zero, 1.0),
        delay: DelaySpec::Constant { r: 0.0, tau0: 0.0 },
        forcing: mode_one(0.5),
        initial: mode_one(amplitude),
        q: vec![8.0],
    }
}
