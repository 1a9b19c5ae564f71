//! Separable space-time fields `sum_i d_i(t) psi_i(x)`, used for the forcing
//! `h` and for the initial history `phi(theta, x)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::basis::{BasisError, DomainSpec, EigenBasis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeProfile {
    Constant {
        value: f64,
    },
    /// `amplitude * exp(rate * (t - shift))`
    Exponential {
        amplitude: f64,
        rate: f64,
        #[serde(default)]
        shift: f64,
    },
    /// `amplitude * sin(omega t + phase)`
    Sine {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant { value } => value,
            TimeProfile::Exponential {
                amplitude,
                rate,
                shift,
            } => amplitude * (rate * (t - shift)).exp(),
            TimeProfile::Sine {
                amplitude,
                omega,
                phase,
            } => amplitude * (omega * t + phase).sin(),
        }
    }

    /// `sup_{t >= 0} |d(t)|`, `None` when unbounded.
    pub fn sup_forward(&self) -> Option<f64> {
        match *self {
            TimeProfile::Constant { value } => Some(value.abs()),
            TimeProfile::Exponential {
                amplitude,
                rate,
                shift,
            } => {
                if rate > 0.0 && amplitude != 0.0 {
                    None
                } else {
                    Some((amplitude * (-rate * shift).exp()).abs())
                }
            }
            TimeProfile::Sine { amplitude, .. } => Some(amplitude.abs()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTerm {
    pub amplitude: f64,
    pub mode: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpaceProfile {
    /// `sum amplitude * w_mode` in the normalized eigenbasis.
    Eigenmodes { terms: Vec<ModeTerm> },
    /// `sum amplitude * prod_a sin(m_a pi x_a / L_a)`, unnormalized.
    Sines { terms: Vec<ModeTerm> },
    /// `amplitude * prod_a sin(pi x_a / L_a)^power`
    SinePower {
        #[serde(default = "unit")]
        amplitude: f64,
        power: u32,
    },
    /// Smooth compactly supported bump `amplitude * exp(1 - 1 / (1 - rho^2))`,
    /// `rho = |x - center| / width`, peak value `amplitude`.
    Bump {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl SpaceProfile {
    pub fn violations(&self, domain: &DomainSpec, at: &str) -> Vec<String> {
        let d = domain.dimension();
        let mut out = Vec::new();
        match self {
            SpaceProfile::Eigenmodes { terms } | SpaceProfile::Sines { terms } => {
                for t in terms {
                    if t.mode.len() != d || t.mode.contains(&0) {
                        out.push(format!(
                            "{at}: mode {:?} must have {d} positive wave numbers",
                            t.mode
                        ));
                    }
                }
            }
            SpaceProfile::SinePower { .. } => {}
            SpaceProfile::Bump { center, width, .. } => {
                if center.len() != d {
                    out.push(format!("{at}: bump center must have {d} coordinates"));
                }
                if !(*width > 0.0) {
                    out.push(format!("{at}: bump width must be positive"));
                }
            }
        }
        out
    }

    pub fn eval(&self, domain: &DomainSpec, x: &[f64]) -> f64 {
        let lengths = domain.lengths();
        let sines = |mode: &[usize]| -> f64 {
            mode.iter()
                .zip(lengths)
                .zip(x)
                .map(|((&m, &l), &xi)| (m as f64 * PI * xi / l).sin())
                .product()
        };
        match self {
            SpaceProfile::Eigenmodes { terms } => terms
                .iter()
                .map(|t| {
                    let norm: f64 = lengths.iter().map(|l| (2.0 / l).sqrt()).product();
                    t.amplitude * norm * sines(&t.mode)
                })
                .sum(),
            SpaceProfile::Sines { terms } => {
                terms.iter().map(|t| t.amplitude * sines(&t.mode)).sum()
            }
            SpaceProfile::SinePower { amplitude, power } => {
                let base: f64 = lengths
                    .iter()
                    .zip(x)
                    .map(|(&l, &xi)| (PI * xi / l).sin())
                    .product();
                amplitude * base.powi(*power as i32)
            }
            SpaceProfile::Bump {
                amplitude,
                center,
                width,
            } => {
                let rho2 = x
                    .iter()
                    .zip(center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    / (width * width);
                if rho2 < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - rho2)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Values on the basis quadrature grid.
    pub fn on_grid(&self, basis: &EigenBasis) -> Vec<f64> {
        basis
            .grid_points()
            .iter()
            .map(|x| self.eval(basis.domain(), x))
            .collect()
    }

    /// Modal coefficients in `basis`; exact for eigenmode and sine terms,
    /// quadrature for the rest. Modes outside the basis are truncated.
    pub fn project(&self, basis: &EigenBasis) -> Result<Vec<f64>, BasisError> {
        let mut out = vec![0.0; basis.len()];
        match self {
            SpaceProfile::Eigenmodes { terms } | SpaceProfile::Sines { terms } => {
                let scale = match self {
                    SpaceProfile::Sines { .. } => basis
                        .domain()
                        .lengths()
                        .iter()
                        .map(|l| (l / 2.0).sqrt())
                        .product(),
                    _ => 1.0,
                };
                for t in terms {
                    if let Some(j) = basis.index_of(&t.mode) {
                        out[j] += scale * t.amplitude;
                    }
                }
                Ok(out)
            }
            _ => Ok(basis.project(&self.on_grid(basis))?.into_inner()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableTerm {
    pub time: TimeProfile,
    pub space: SpaceProfile,
}

/// `sum_i time_i(t) * space_i(x)`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct SeparableField {
    pub terms: Vec<SeparableTerm>,
}

impl SeparableField {
    pub fn new(terms: Vec<SeparableTerm>) -> Self {
        Self { terms }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, domain: &DomainSpec, t: f64, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|term| term.time.eval(t) * term.space.eval(domain, x))
            .sum()
    }

    pub fn violations(&self, domain: &DomainSpec, at: &str) -> Vec<String> {
        self.terms
            .iter()
            .enumerate()
            .flat_map(|(i, term)| term.space.violations(domain, &format!("{at}[{i}]")))
            .collect()
    }

    /// Precomputed modal and grid images of each spatial profile.
    pub fn discretize(&self, basis: &EigenBasis) -> Result<DiscreteField, BasisError> {
        let mut modal = Vec::with_capacity(self.terms.len());
        let mut grid = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            modal.push(term.space.project(basis)?);
            grid.push(term.space.on_grid(basis));
        }
        Ok(DiscreteField {
            times: self.terms.iter().map(|t| t.time.clone()).collect(),
            modal,
            grid,
        })
    }

    /// `sum_i sup_t |d_i(t)| * |psi_i|_q`, an upper bound for `sup_t |h(t)|_q`.
    pub fn lq_bound(&self, basis: &EigenBasis, q: f64) -> Result<Option<f64>, BasisError> {
        let mut total = 0.0;
        for term in &self.terms {
            let Some(sup) = term.time.sup_forward() else {
                return Ok(None);
            };
            total += sup * basis.grid_lq(&term.space.on_grid(basis), q)?;
        }
        Ok(Some(total))
    }
}

/// A [`SeparableField`] with its spatial profiles resolved on one basis.
#[derive(Debug, Clone)]
pub struct DiscreteField {
    times: Vec<TimeProfile>,
    modal: Vec<Vec<f64>>,
    grid: Vec<Vec<f64>>,
}

impl DiscreteField {
    fn combine(&self, t: f64, parts: &[Vec<f64>], len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (time, part) in self.times.iter().zip(parts) {
            let d = time.eval(t);
            if d == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(part) {
                *o += d * p;
            }
        }
        out
    }

    /// Modal coefficients of the truncated field at time `t`.
    pub fn modal_at(&self, t: f64, modes: usize) -> Vec<f64> {
        self.combine(t, &self.modal, modes)
    }

    /// Exact (untruncated) field values on the quadrature grid at time `t`.
    pub fn grid_at(&self, t: f64, nodes: usize) -> Vec<f64> {
        self.combine(t, &self.grid, nodes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pi_basis(k: usize) -> EigenBasis {
        EigenBasis::build(&DomainSpec::interval(PI).unwrap(), k).unwrap()
    }

    #[test]
    fn sine_profiles_project_exactly() {
        let b = pi_basis(4);
        let s = SpaceProfile::Sines {
            terms: vec![ModeTerm {
                amplitude: 1.0,
                mode: vec![1],
            }],
        };
        let a = s.project(&b).unwrap();
        assert_eq!(a[0], (PI / 2.0).sqrt());
        let cube = SpaceProfile::SinePower {
            amplitude: 1.0,
            power: 3,
        };
        let a = cube.project(&b).unwrap();
        let r = (PI / 2.0).sqrt();
        assert!((a[0] - 0.75 * r).abs() < 1e-13);
        assert!((a[2] + 0.25 * r).abs() < 1e-13);
        let w = SpaceProfile::Eigenmodes {
            terms: vec![ModeTerm {
                amplitude: 2.0,
                mode: vec![9],
            }],
        };
        assert_eq!(w.project(&b).unwrap(), vec![0.0; 4]);
        assert!((w.eval(b.domain(), &[PI / 18.0]) - 2.0 * (2.0 / PI).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn time_profiles() {
        let e = TimeProfile::Exponential {
            amplitude: -1.0,
            rate: -1.0,
            shift: 1.0,
        };
        assert!((e.eval(1.0) + 1.0).abs() < 1e-15);
        assert!((e.sup_forward().unwrap() - 1f64.exp()).abs() < 1e-14);
        let grow = TimeProfile::Exponential {
            amplitude: 1.0,
            rate: 0.5,
            shift: 0.0,
        };
        assert_eq!(grow.sup_forward(), None);
        let s = TimeProfile::Sine {
            amplitude: -0.3,
            omega: 2.0,
            phase: 0.0,
        };
        assert_eq!(s.sup_forward(), Some(0.3));
    }

    #[test]
    fn bump_is_compact_with_unit_peak() {
        let d = DomainSpec::interval(PI).unwrap();
        let b = SpaceProfile::Bump {
            amplitude: 3.0,
            center: vec![1.0],
            width: 0.2,
        };
        assert_eq!(b.eval(&d, &[1.0]), 3.0);
        assert_eq!(b.eval(&d, &[1.2]), 0.0);
        assert!(b.eval(&d, &[1.1]) > 0.0);
    }

    #[test]
    fn forcing_bound_uses_profile_norms() {
        let b = pi_basis(8);
        let f = SeparableField::new(vec![SeparableTerm {
            time: TimeProfile::Sine {
                amplitude: 2.0,
                omega: 1.0,
                phase: 0.0,
            },
            space: SpaceProfile::Sines {
                terms: vec![ModeTerm {
                    amplitude: 1.0,
                    mode: vec![1],
                }],
            },
        }]);
        let bound = f.lq_bound(&b, 2.0).unwrap().unwrap();
        assert!((bound - 2.0 * (PI / 2.0).sqrt()).abs() < 1e-12);
    }
}
