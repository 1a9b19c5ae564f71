use serde::{Deserialize, Serialize};

use super::ModelError;

/// Scalar reaction term `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReactionTerm {
    /// `sum_i c_i u^i`
    Polynomial { coefficients: Vec<f64> },
    /// `-lambda u |u|^(beta0 - 1) + sum_i lower_i u^i`
    Dissipative {
        lambda: f64,
        beta0: f64,
        #[serde(default)]
        lower: Vec<f64>,
    },
    /// `scale * e^u`; violates every polynomial growth bound.
    Exponential {
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn horner(coefficients: &[f64], u: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * u + c)
}

fn signed_power(u: f64, exponent: f64) -> f64 {
    // u |u|^(e - 1)
    if exponent.fract() == 0.0 && exponent.abs() < 64.0 {
        let e = exponent as i32;
        if e % 2 == 1 {
            u.powi(e)
        } else {
            u.powi(e - 1) * u.abs()
        }
    } else {
        u.signum() * u.abs().powf(exponent)
    }
}

impl ReactionTerm {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            ReactionTerm::Polynomial { coefficients } => horner(coefficients, u),
            ReactionTerm::Dissipative {
                lambda,
                beta0,
                lower,
            } => -lambda * signed_power(u, *beta0) + horner(lower, u),
            ReactionTerm::Exponential { scale } => scale * u.exp(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ReactionTerm::Polynomial { coefficients } => coefficients.iter().all(|&c| c == 0.0),
            ReactionTerm::Dissipative { lambda, lower, .. } => {
                *lambda == 0.0 && lower.iter().all(|&c| c == 0.0)
            }
            ReactionTerm::Exponential { scale } => *scale == 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coefficient: f64,
    #[serde(default)]
    pub u: u32,
    #[serde(default)]
    pub v: u32,
}

/// Delayed coupling `g(u, v)`, `v` being the delayed state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CouplingTerm {
    Zero,
    /// `sum c * u^i * v^j`
    Polynomial {
        terms: Vec<Monomial>,
    },
}

impl CouplingTerm {
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        match self {
            CouplingTerm::Zero => 0.0,
            CouplingTerm::Polynomial { terms } => terms
                .iter()
                .map(|m| m.coefficient * u.powi(m.u as i32) * v.powi(m.v as i32))
                .sum(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            CouplingTerm::Zero => true,
            CouplingTerm::Polynomial { terms } => terms.iter().all(|m| m.coefficient == 0.0),
        }
    }
}

/// `f`, `g` and the constants they are declared to satisfy.
///
/// Growth: `|f(u)| <= a0 (|u|^p + 1)`, `|g(u,v)| <= b0 (|u|^beta + |v|^beta + 1)`.
/// Dissipativity: `f(s) s <= -lambda |s|^(beta0 + 1) + n`, with `beta0 > beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub f: ReactionTerm,
    pub g: CouplingTerm,
    pub p: f64,
    pub beta: f64,
    pub a0: f64,
    pub b0: f64,
    pub beta0: f64,
    pub lambda: f64,
    pub n: f64,
}

impl NonlinearitySpec {
    pub fn eval_f(&self, u: f64) -> f64 {
        self.f.eval(u)
    }

    pub fn eval_g(&self, u: f64, v: f64) -> f64 {
        self.g.eval(u, v)
    }

    /// Schema problems, all of them.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, value) in [
            ("p", self.p),
            ("beta", self.beta),
            ("a0", self.a0),
            ("b0", self.b0),
            ("beta0", self.beta0),
            ("lambda", self.lambda),
        ] {
            if !(value.is_finite() && value > 0.0) {
                out.push(format!("nonlinearity.{name} must be positive, got {value}"));
            }
        }
        if !(self.n.is_finite() && self.n >= 0.0) {
            out.push(format!(
                "nonlinearity.n must be nonnegative, got {}",
                self.n
            ));
        }
        if self.p < 1.0 {
            out.push(format!("nonlinearity.p must be at least 1, got {}", self.p));
        }
        if self.beta < 1.0 {
            out.push(format!(
                "nonlinearity.beta must be at least 1, got {}",
                self.beta
            ));
        }
        if !(self.beta0 > self.beta) {
            out.push(format!(
                "dissipativity condition requires beta0 > beta, got beta0 = {} and beta = {}",
                self.beta0, self.beta
            ));
        }
        out
    }

    pub fn critical_exponents(&self) -> Result<CriticalExponents, ModelError> {
        critical_exponents(self.p, self.beta, self.beta0)
    }

    /// `max(p, beta)`, the power of the initial norm in the smoothing estimate.
    pub fn p_hat(&self) -> f64 {
        self.p.max(self.beta)
    }
}

/// Critical exponent `q_c = max{2p, 2 beta, p0}`, `p0 = (beta0 - 1) beta / (beta0 - beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalExponents {
    pub q_c: f64,
    pub p0: f64,
    pub beta0: f64,
}

impl CriticalExponents {
    /// `(q - 1) / beta0 + 1`, the integrability required of the forcing.
    pub fn q_bar(&self, q: f64) -> f64 {
        (q - 1.0) / self.beta0 + 1.0
    }

    pub fn admits(&self, q: f64) -> bool {
        q > self.q_c
    }

    /// Precondition for every L^q-based estimate.
    pub fn require(&self, q: f64) -> Result<(), ModelError> {
        if self.admits(q) {
            Ok(())
        } else {
            Err(ModelError::BelowCriticalExponent {
                q,
                q_c: self.q_c,
                p0: self.p0,
            })
        }
    }
}

pub fn critical_exponents(p: f64, beta: f64, beta0: f64) -> Result<CriticalExponents, ModelError> {
    if !(beta0 > beta) {
        return Err(ModelError::ExponentOrder { beta0, beta });
    }
    let p0 = (beta0 - 1.0) / (beta0 - beta) * beta;
    Ok(CriticalExponents {
        q_c: (2.0 * p).max(2.0 * beta).max(p0),
        p0,
        beta0,
    })
}

fn sample_grid(range: f64, points: usize) -> impl Iterator<Item = f64> + Clone {
    let n = points.max(2);
    (0..n).map(move |i| -range + 2.0 * range * i as f64 / (n - 1) as f64)
}

/// Outcome of a sampled inequality check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum SampledBound {
    /// Every sample satisfied the bound; `ratio` is the tightest observed.
    Pass { ratio: f64, at: Vec<f64> },
    /// The worst violating sample.
    Violation { ratio: f64, at: Vec<f64> },
}

impl SampledBound {
    pub fn passed(&self) -> bool {
        matches!(self, SampledBound::Pass { .. })
    }

    fn from_worst(ratio: f64, at: Vec<f64>) -> Self {
        if ratio <= 1.0 + 1e-12 {
            SampledBound::Pass { ratio, at }
        } else {
            SampledBound::Violation { ratio, at }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthCheck {
    pub range: f64,
    pub grid: usize,
    pub f: SampledBound,
    pub g: SampledBound,
}

impl GrowthCheck {
    pub fn passed(&self) -> bool {
        self.f.passed() && self.g.passed()
    }
}

fn ratio(value: f64, bound: f64) -> f64 {
    if value.is_nan() || value.is_infinite() {
        f64::INFINITY
    } else {
        value.abs() / bound
    }
}

/// Samples the polynomial growth bounds on `[-range, range]` (and its square for `g`).
pub fn check_growth(spec: &NonlinearitySpec, range: f64, grid: usize) -> GrowthCheck {
    let (mut worst_f, mut at_f) = (f64::NEG_INFINITY, 0.0);
    for u in sample_grid(range, grid) {
        let r = ratio(spec.eval_f(u), spec.a0 * (u.abs().powf(spec.p) + 1.0));
        if r > worst_f {
            worst_f = r;
            at_f = u;
        }
    }
    let (mut worst_g, mut at_g) = (f64::NEG_INFINITY, (0.0, 0.0));
    let g_grid = grid.clamp(2, 1001);
    for u in sample_grid(range, g_grid) {
        for v in sample_grid(range, g_grid) {
            let bound = spec.b0 * (u.abs().powf(spec.beta) + v.abs().powf(spec.beta) + 1.0);
            let r = ratio(spec.eval_g(u, v), bound);
            if r > worst_g {
                worst_g = r;
                at_g = (u, v);
            }
        }
    }
    GrowthCheck {
        range,
        grid,
        f: SampledBound::from_worst(worst_f, vec![at_f]),
        g: SampledBound::from_worst(worst_g, vec![at_g.0, at_g.1]),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipativityCheck {
    pub range: f64,
    pub grid: usize,
    /// `max_s f(s) s + lambda |s|^(beta0 + 1)` over the range.
    pub minimal_n: f64,
    pub at: f64,
    pub passed: bool,
}

/// Samples `f(s) s <= -lambda |s|^(beta0+1) + n` and measures the smallest admissible `n`.
pub fn check_dissipativity(spec: &NonlinearitySpec, range: f64, grid: usize) -> DissipativityCheck {
    let excess = |s: f64| {
        let v = spec.eval_f(s) * s + spec.lambda * s.abs().powf(spec.beta0 + 1.0);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    // round-off allowance scaled by the size of the two cancelling terms
    let allowance = |s: f64| {
        1e-12 * ((spec.eval_f(s) * s).abs() + spec.lambda * s.abs().powf(spec.beta0 + 1.0) + 1.0)
    };
    let pts: Vec<f64> = sample_grid(range, grid).collect();
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    let mut passed = true;
    for (i, &s) in pts.iter().enumerate() {
        let e = excess(s);
        if e > spec.n + allowance(s) {
            passed = false;
        }
        if e > best {
            best = e;
            best_i = i;
        }
    }
    let mut at = pts[best_i];
    if best.is_finite() {
        // golden-section refinement on the neighbouring cells
        let lo = pts[best_i.saturating_sub(1)];
        let hi = pts[(best_i + 1).min(pts.len() - 1)];
        let (s, e) = golden_max(&excess, lo, hi);
        if e > best {
            best = e;
            at = s;
            if e > spec.n + allowance(s) {
                passed = false;
            }
        }
    }
    DissipativityCheck {
        range,
        grid,
        minimal_n: best,
        at,
        passed,
    }
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let s = 0.5 * (a + b);
    (s, f(s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(f: ReactionTerm, g: CouplingTerm) -> NonlinearitySpec {
        NonlinearitySpec {
            f,
            g,
            p: 3.0,
            beta: 1.0,
            a0: 1.0,
            b0: 1.0,
            beta0: 3.0,
            lambda: 1.0,
            n: 0.0,
        }
    }

    fn cubic() -> ReactionTerm {
        ReactionTerm::Polynomial {
            coefficients: vec![0.0, 0.0, 0.0, -1.0],
        }
    }

    fn mono(c: f64, u: u32, v: u32) -> Monomial {
        Monomial {
            coefficient: c,
            u,
            v,
        }
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(cubic().eval(2.0), -8.0);
        let g = CouplingTerm::Polynomial {
            terms: vec![mono(1.0, 0, 1)],
        };
        assert_eq!(g.eval(5.0, -1.0), -1.0);
        let g = CouplingTerm::Polynomial {
            terms: vec![mono(1.0, 1, 2)],
        };
        assert_eq!(g.eval(2.0, 3.0), 18.0);
        let d = ReactionTerm::Dissipative {
            lambda: 2.0,
            beta0: 3.0,
            lower: vec![0.0, 1.0],
        };
        assert_eq!(d.eval(-2.0), 16.0 - 2.0);
        let d = ReactionTerm::Dissipative {
            lambda: 1.0,
            beta0: 2.0,
            lower: vec![],
        };
        assert_eq!(d.eval(-3.0), 9.0);
        let d = ReactionTerm::Dissipative {
            lambda: 1.0,
            beta0: 2.5,
            lower: vec![],
        };
        assert!((d.eval(4.0) + 32.0).abs() < 1e-12);
    }

    #[test]
    fn growth_check_fixtures() {
        let s = spec(cubic(), CouplingTerm::Zero);
        assert!(check_growth(&s, 100.0, 2001).passed());

        let half = CouplingTerm::Polynomial {
            terms: vec![mono(0.5, 1, 0), mono(0.5, 0, 1)],
        };
        assert!(check_growth(&spec(cubic(), half), 100.0, 201).passed());

        let e = spec(ReactionTerm::Exponential { scale: 1.0 }, CouplingTerm::Zero);
        let report = check_growth(&e, 50.0, 1001);
        match report.f {
            SampledBound::Violation { ref at, ratio } => {
                assert_eq!(at[0], 50.0);
                assert!(ratio > 1e15);
            }
            _ => panic!("exponential growth must be rejected"),
        }
        assert!(!report.passed());
    }

    #[test]
    fn dissipativity_fixtures() {
        let pure = spec(cubic(), CouplingTerm::Zero);
        let r = check_dissipativity(&pure, 50.0, 10001);
        assert!(r.passed);
        assert!(r.minimal_n.abs() < 1e-9);

        let mut shifted = spec(
            ReactionTerm::Polynomial {
                coefficients: vec![0.0, 1.0, 0.0, -1.0],
            },
            CouplingTerm::Zero,
        );
        shifted.lambda = 0.5;
        shifted.n = 0.5;
        // oracle: s^2 - s^4 / 2 peaks at s^2 = 1 with value 1/2
        let r = check_dissipativity(&shifted, 7.3, 1000);
        assert!(r.passed);
        assert!((r.minimal_n - 0.5).abs() < 1e-6, "{}", r.minimal_n);
        assert!((r.at.abs() - 1.0).abs() < 1e-3);

        let growing = spec(
            ReactionTerm::Polynomial {
                coefficients: vec![0.0, 0.0, 0.0, 1.0],
            },
            CouplingTerm::Zero,
        );
        assert!(!check_dissipativity(&growing, 10.0, 1001).passed);
    }

    #[test]
    fn critical_exponent_fixtures() {
        let c = critical_exponents(3.0, 1.0, 3.0).unwrap();
        assert_eq!(c.p0, 1.0);
        assert_eq!(c.q_c, 6.0);
        let c = critical_exponents(2.0, 2.0, 5.0).unwrap();
        assert_eq!(c.p0, 8.0 / 3.0);
        assert_eq!(c.q_c, 4.0);
        let c = critical_exponents(3.0, 1.0, 3.0).unwrap();
        assert!((c.q_bar(8.0) - 10.0 / 3.0).abs() < 1e-15);
        assert!(c.admits(8.0) && !c.admits(6.0) && !c.admits(4.0));
        assert!(matches!(
            c.require(4.0),
            Err(ModelError::BelowCriticalExponent { q_c, .. }) if q_c == 6.0
        ));
        assert_eq!(
            critical_exponents(1.0, 2.0, 2.0),
            Err(ModelError::ExponentOrder {
                beta0: 2.0,
                beta: 2.0
            })
        );
    }

    #[test]
    fn schema_violations_are_collected() {
        let mut s = spec(cubic(), CouplingTerm::Zero);
        s.beta0 = 1.0;
        s.a0 = -1.0;
        let v = s.violations();
        assert_eq!(v.len(), 2);
        assert!(v.iter().any(|m| m.contains("beta0 > beta")));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn critical_exponent_is_monotone(p in 1.0f64..6.0, beta in 1.0f64..4.0, gap in 0.1f64..5.0, dp in 0.0f64..2.0, db in 0.0f64..2.0) {
                let beta0 = beta + db + gap;
                let base = critical_exponents(p, beta, beta0).unwrap().q_c;
                prop_assert!(critical_exponents(p + dp, beta, beta0).unwrap().q_c >= base);
                prop_assert!(critical_exponents(p, beta + db, beta0).unwrap().q_c >= base);
            }

            #[test]
            fn dissipative_family_has_opposite_sign(lambda in 0.1f64..5.0, beta0 in 1.0f64..7.0, s in -20.0f64..20.0) {
                prop_assume!(s != 0.0);
                let f = ReactionTerm::Dissipative { lambda, beta0, lower: vec![] };
                let mut sp = spec(f.clone(), CouplingTerm::Zero);
                sp.lambda = lambda;
                sp.beta0 = beta0;
                sp.beta = 0.5 * beta0;
                prop_assert!(check_dissipativity(&sp, 20.0, 401).passed);
                prop_assert!(f.eval(s).signum() == -s.signum());
            }
        }
    }
}
