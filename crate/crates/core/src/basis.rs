//! Dirichlet Laplacian eigenpairs on intervals and rectangles.
//!
//! On a box `(0, L1) x ... ` the eigenfunctions are tensor products of
//! `sqrt(2/L) sin(m pi x / L)` with eigenvalues `sum (m pi / L)^2`, so the
//! basis is built in closed form. Quadrature is composite Gauss-Legendre,
//! one panel per mode with [`NODES_PER_PANEL`] nodes, which integrates
//! products of the retained sines (and the cubic nonlinearities built from
//! them) to round-off.

use std::f64::consts::PI;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gauss-Legendre nodes per quadrature panel.
pub const NODES_PER_PANEL: usize = 12;

/// Uniform points per mode per axis for the sup-norm grid.
pub const DENSE_POINTS_PER_MODE: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("unsupported dimension {0}: only 1 and 2 are supported")]
    Dimension(usize),
    #[error("edge length must be positive and finite, got {0}")]
    Length(f64),
    #[error("mode count must be at least 1")]
    ModeCount,
    #[error("grid size mismatch: expected {expected} samples, got {actual}")]
    GridMismatch { expected: usize, actual: usize },
    #[error("state has {actual} coefficients but the basis has {expected} modes")]
    StateMismatch { expected: usize, actual: usize },
    #[error("point {0:?} lies outside the domain")]
    OutsideDomain(Vec<f64>),
    #[error("L^q norm requires q >= 1, got {0}")]
    Exponent(f64),
}

/// Box domain `(0, L1)` or `(0, L1) x (0, L2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDomain", into = "RawDomain")]
pub struct DomainSpec {
    lengths: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDomain {
    dimension: usize,
    lengths: Vec<f64>,
}

impl TryFrom<RawDomain> for DomainSpec {
    type Error = BasisError;
    fn try_from(raw: RawDomain) -> Result<Self, Self::Error> {
        DomainSpec::new(raw.dimension, &raw.lengths)
    }
}

impl From<DomainSpec> for RawDomain {
    fn from(d: DomainSpec) -> Self {
        RawDomain {
            dimension: d.dimension(),
            lengths: d.lengths,
        }
    }
}

impl DomainSpec {
    pub fn new(dimension: usize, lengths: &[f64]) -> Result<Self, BasisError> {
        if !(1..=2).contains(&dimension) {
            return Err(BasisError::Dimension(dimension));
        }
        if lengths.len() != dimension {
            return Err(BasisError::Dimension(lengths.len()));
        }
        if let Some(&bad) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(BasisError::Length(bad));
        }
        Ok(Self {
            lengths: lengths.to_vec(),
        })
    }

    pub fn interval(length: f64) -> Result<Self, BasisError> {
        Self::new(1, &[length])
    }

    pub fn rectangle(lx: f64, ly: f64) -> Result<Self, BasisError> {
        Self::new(2, &[lx, ly])
    }

    pub fn dimension(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn measure(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension()
            && x.iter().zip(&self.lengths).all(|(&xi, &l)| {
                let tol = 1e-12 * l;
                xi >= -tol && xi <= l + tol
            })
    }
}

/// Coefficients `a_j` of `u = sum_j a_j w_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalState(Vec<f64>);

impl ModalState {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self(coefficients)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn unit(len: usize, j: usize) -> Self {
        let mut a = vec![0.0; len];
        a[j] = 1.0;
        Self(a)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Spectral L^2 norm (Parseval).
    pub fn l2(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

impl Deref for ModalState {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ModalState {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ModalState {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    Lq(f64),
    V1,
    V2,
    Linf,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// One axis worth of sampled sines: `values[i * k + (m - 1)] = sqrt(2/L) sin(m pi x_i / L)`.
#[derive(Debug, Clone)]
struct AxisTable {
    points: Vec<f64>,
    weights: Vec<f64>,
    values: Vec<f64>,
    k: usize,
}

impl AxisTable {
    fn sample(length: f64, points: Vec<f64>, weights: Vec<f64>, k: usize) -> Self {
        let scale = (2.0 / length).sqrt();
        let mut values = Vec::with_capacity(points.len() * k);
        for &x in &points {
            for m in 1..=k {
                values.push(scale * (m as f64 * PI * x / length).sin());
            }
        }
        Self {
            points,
            weights,
            values,
            k,
        }
    }

    fn quadrature(length: f64, k: usize) -> Self {
        let (gx, gw) = gauss_legendre(NODES_PER_PANEL);
        let panels = k;
        let h = length / panels as f64;
        let mut points = Vec::with_capacity(panels * NODES_PER_PANEL);
        let mut weights = Vec::with_capacity(panels * NODES_PER_PANEL);
        for p in 0..panels {
            let left = p as f64 * h;
            for (x, w) in gx.iter().zip(&gw) {
                points.push(left + 0.5 * h * (x + 1.0));
                weights.push(0.5 * h * w);
            }
        }
        Self::sample(length, points, weights, k)
    }

    fn dense(length: f64, k: usize) -> Self {
        let intervals = DENSE_POINTS_PER_MODE * k;
        let points = (0..=intervals)
            .map(|i| length * i as f64 / intervals as f64)
            .collect();
        Self::sample(length, points, Vec::new(), k)
    }

    fn len(&self) -> usize {
        self.points.len()
    }

    /// 1D Gram matrix `G[m][n] = sum_i w_i s_m(x_i) s_n(x_i)`.
    fn gram(&self) -> Vec<f64> {
        let k = self.k;
        let mut g = vec![0.0; k * k];
        for i in 0..self.len() {
            let row = &self.values[i * k..(i + 1) * k];
            let w = self.weights[i];
            for m in 0..k {
                let wm = w * row[m];
                for n in 0..k {
                    g[m * k + n] += wm * row[n];
                }
            }
        }
        g
    }
}

/// Closed-form Dirichlet eigenbasis with quadrature and a dense evaluation grid.
///
/// For `d = 2` the basis holds all `k^2` tensor modes sorted by eigenvalue,
/// ties broken lexicographically on `(m, n)`.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    domain: DomainSpec,
    modes_per_axis: usize,
    modes: Vec<[usize; 2]>,
    eigenvalues: Vec<f64>,
    quad: Vec<AxisTable>,
    dense: Vec<AxisTable>,
}

impl EigenBasis {
    pub fn build(domain: &DomainSpec, k: usize) -> Result<Self, BasisError> {
        if k == 0 {
            return Err(BasisError::ModeCount);
        }
        let lengths = domain.lengths();
        let axis_mu = |m: usize, l: f64| (m as f64 * PI / l).powi(2);
        let mut pairs: Vec<([usize; 2], f64)> = match domain.dimension() {
            1 => (1..=k).map(|m| ([m, 0], axis_mu(m, lengths[0]))).collect(),
            2 => {
                let mut v = Vec::with_capacity(k * k);
                for m in 1..=k {
                    for n in 1..=k {
                        v.push(([m, n], axis_mu(m, lengths[0]) + axis_mu(n, lengths[1])));
                    }
                }
                v
            }
            d => return Err(BasisError::Dimension(d)),
        };
        pairs.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let quad = lengths
            .iter()
            .map(|&l| AxisTable::quadrature(l, k))
            .collect();
        let dense = lengths.iter().map(|&l| AxisTable::dense(l, k)).collect();
        Ok(Self {
            domain: domain.clone(),
            modes_per_axis: k,
            modes: pairs.iter().map(|p| p.0).collect(),
            eigenvalues: pairs.iter().map(|p| p.1).collect(),
            quad,
            dense,
        })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    pub fn modes_per_axis(&self) -> usize {
        self.modes_per_axis
    }

    /// Number of modes (`k` in 1D, `k^2` in 2D).
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn first_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Per-axis wave numbers of mode `j`; the second entry is 0 in 1D.
    pub fn mode(&self, j: usize) -> [usize; 2] {
        self.modes[j]
    }

    pub fn index_of(&self, mode: &[usize]) -> Option<usize> {
        let key = match (self.dimension(), mode) {
            (1, [m]) | (1, [m, 0]) => [*m, 0],
            (2, [m, n]) => [*m, *n],
            _ => return None,
        };
        self.modes.iter().position(|&md| md == key)
    }

    /// Number of quadrature nodes (tensor count in 2D).
    pub fn grid_len(&self) -> usize {
        self.quad.iter().map(AxisTable::len).product()
    }

    pub fn dense_grid_len(&self) -> usize {
        self.dense.iter().map(AxisTable::len).product()
    }

    /// Quadrature nodes in grid order (x-major in 2D).
    pub fn grid_points(&self) -> Vec<Vec<f64>> {
        Self::tensor_points(&self.quad)
    }

    pub fn dense_points(&self) -> Vec<Vec<f64>> {
        Self::tensor_points(&self.dense)
    }

    fn tensor_points(axes: &[AxisTable]) -> Vec<Vec<f64>> {
        match axes {
            [x] => x.points.iter().map(|&p| vec![p]).collect(),
            [x, y] => x
                .points
                .iter()
                .flat_map(|&px| y.points.iter().map(move |&py| vec![px, py]))
                .collect(),
            _ => unreachable!("dimension validated at construction"),
        }
    }

    /// Quadrature weights in grid order.
    pub fn grid_weights(&self) -> Vec<f64> {
        match self.quad.as_slice() {
            [x] => x.weights.clone(),
            [x, y] => x
                .weights
                .iter()
                .flat_map(|&wx| y.weights.iter().map(move |&wy| wx * wy))
                .collect(),
            _ => unreachable!(),
        }
    }

    /// Closed-form value of `w_j` at `x`.
    pub fn eval_mode(&self, j: usize, x: &[f64]) -> f64 {
        let mode = self.modes[j];
        self.domain
            .lengths()
            .iter()
            .zip(x)
            .zip(mode)
            .map(|((&l, &xi), m)| (2.0 / l).sqrt() * (m as f64 * PI * xi / l).sin())
            .product()
    }

    fn check_state(&self, state: &[f64]) -> Result<(), BasisError> {
        if state.len() != self.len() {
            return Err(BasisError::StateMismatch {
                expected: self.len(),
                actual: state.len(),
            });
        }
        Ok(())
    }

    fn coefficient_matrix(&self, state: &[f64]) -> Vec<f64> {
        let k = self.modes_per_axis;
        let mut c = vec![0.0; k * k];
        for (a, &[m, n]) in state.iter().zip(&self.modes) {
            c[(m - 1) * k + (n - 1)] = *a;
        }
        c
    }

    fn synthesize_on(&self, axes: &[AxisTable], state: &[f64]) -> Vec<f64> {
        match axes {
            [x] => {
                let mut out = vec![0.0; x.len()];
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &x.values[i * x.k..(i + 1) * x.k];
                    let mut acc = 0.0;
                    for (j, &[m, _]) in self.modes.iter().enumerate() {
                        acc += state[j] * row[m - 1];
                    }
                    *o = acc;
                }
                out
            }
            [x, y] => {
                let k = self.modes_per_axis;
                let c = self.coefficient_matrix(state);
                // t[m][l] = sum_n c[m][n] Y_n(y_l)
                let ny = y.len();
                let mut t = vec![0.0; k * ny];
                for m in 0..k {
                    let crow = &c[m * k..(m + 1) * k];
                    if crow.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    for l in 0..ny {
                        let yrow = &y.values[l * k..(l + 1) * k];
                        t[m * ny + l] = crow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                    }
                }
                let mut out = vec![0.0; x.len() * ny];
                for i in 0..x.len() {
                    let xrow = &x.values[i * k..(i + 1) * k];
                    let orow = &mut out[i * ny..(i + 1) * ny];
                    for (m, &xv) in xrow.iter().enumerate() {
                        if xv == 0.0 {
                            continue;
                        }
                        let trow = &t[m * ny..(m + 1) * ny];
                        for (o, &tv) in orow.iter_mut().zip(trow) {
                            *o += xv * tv;
                        }
                    }
                }
                out
            }
            _ => unreachable!(),
        }
    }

    /// Values of `u = sum a_j w_j` on the quadrature grid.
    pub fn to_grid(&self, state: &[f64]) -> Result<Vec<f64>, BasisError> {
        self.check_state(state)?;
        Ok(self.synthesize_on(&self.quad, state))
    }

    /// Values on the dense uniform grid used for the sup norm.
    pub fn to_dense_grid(&self, state: &[f64]) -> Result<Vec<f64>, BasisError> {
        self.check_state(state)?;
        Ok(self.synthesize_on(&self.dense, state))
    }

    /// Quadrature approximation of `a_j = (u, w_j)` from samples on the grid.
    pub fn project(&self, samples: &[f64]) -> Result<ModalState, BasisError> {
        if samples.len() != self.grid_len() {
            return Err(BasisError::GridMismatch {
                expected: self.grid_len(),
                actual: samples.len(),
            });
        }
        let coeffs = match self.quad.as_slice() {
            [x] => {
                let mut acc = vec![0.0; x.k];
                for (i, &u) in samples.iter().enumerate() {
                    let wu = x.weights[i] * u;
                    if wu == 0.0 {
                        continue;
                    }
                    let row = &x.values[i * x.k..(i + 1) * x.k];
                    for (a, &s) in acc.iter_mut().zip(row) {
                        *a += wu * s;
                    }
                }
                self.modes.iter().map(|&[m, _]| acc[m - 1]).collect()
            }
            [x, y] => {
                let k = self.modes_per_axis;
                let ny = y.len();
                // z[i][n] = sum_l wy_l Y_n(y_l) u(x_i, y_l)
                let mut z = vec![0.0; x.len() * k];
                for i in 0..x.len() {
                    let urow = &samples[i * ny..(i + 1) * ny];
                    let zrow = &mut z[i * k..(i + 1) * k];
                    for (l, &u) in urow.iter().enumerate() {
                        let wu = y.weights[l] * u;
                        if wu == 0.0 {
                            continue;
                        }
                        let yrow = &y.values[l * k..(l + 1) * k];
                        for (zv, &s) in zrow.iter_mut().zip(yrow) {
                            *zv += wu * s;
                        }
                    }
                }
                let mut c = vec![0.0; k * k];
                for i in 0..x.len() {
                    let zrow = &z[i * k..(i + 1) * k];
                    let xrow = &x.values[i * k..(i + 1) * k];
                    for m in 0..k {
                        let wx = x.weights[i] * xrow[m];
                        let crow = &mut c[m * k..(m + 1) * k];
                        for (cv, &zv) in crow.iter_mut().zip(zrow) {
                            *cv += wx * zv;
                        }
                    }
                }
                self.modes
                    .iter()
                    .map(|&[m, n]| c[(m - 1) * k + (n - 1)])
                    .collect()
            }
            _ => unreachable!(),
        };
        Ok(ModalState::new(coeffs))
    }

    /// Pointwise `sum a_j w_j(x)` at arbitrary points of the closed domain.
    pub fn synthesize<P: AsRef<[f64]>>(
        &self,
        state: &[f64],
        points: &[P],
    ) -> Result<Vec<f64>, BasisError> {
        self.check_state(state)?;
        points
            .iter()
            .map(|p| {
                let x = p.as_ref();
                if !self.domain.contains(x) {
                    return Err(BasisError::OutsideDomain(x.to_vec()));
                }
                Ok(state
                    .iter()
                    .enumerate()
                    .map(|(j, a)| a * self.eval_mode(j, x))
                    .sum())
            })
            .collect()
    }

    /// L^q norm of grid samples by quadrature.
    pub fn grid_lq(&self, samples: &[f64], q: f64) -> Result<f64, BasisError> {
        if !(q >= 1.0) {
            return Err(BasisError::Exponent(q));
        }
        if samples.len() != self.grid_len() {
            return Err(BasisError::GridMismatch {
                expected: self.grid_len(),
                actual: samples.len(),
            });
        }
        let w = self.grid_weights();
        let sum: f64 = samples
            .iter()
            .zip(&w)
            .map(|(u, w)| w * u.abs().powf(q))
            .sum();
        Ok(sum.powf(1.0 / q))
    }

    pub fn norm(&self, state: &[f64], kind: NormKind) -> Result<f64, BasisError> {
        self.check_state(state)?;
        let weighted = |power: i32| {
            state
                .iter()
                .zip(&self.eigenvalues)
                .map(|(a, mu)| mu.powi(power) * a * a)
                .sum::<f64>()
                .sqrt()
        };
        match kind {
            NormKind::Lq(q) if !(q >= 1.0) => Err(BasisError::Exponent(q)),
            NormKind::Lq(2.0) => Ok(weighted(0)),
            NormKind::Lq(q) => self.grid_lq(&self.synthesize_on(&self.quad, state), q),
            NormKind::V1 => Ok(weighted(1)),
            NormKind::V2 => Ok(weighted(2)),
            NormKind::Linf => Ok(self
                .synthesize_on(&self.dense, state)
                .iter()
                .fold(0.0, |m: f64, v| m.max(v.abs()))),
        }
    }

    /// Quadrature Gram matrix of the basis, row-major `len x len`.
    ///
    /// In 2D the tensor quadrature factorizes, so the entry for modes
    /// `(m, n)` and `(m', n')` is `Gx[m][m'] * Gy[n][n']`.
    pub fn gram_matrix(&self) -> Vec<f64> {
        let n = self.len();
        let k = self.modes_per_axis;
        let grams: Vec<Vec<f64>> = self.quad.iter().map(AxisTable::gram).collect();
        let mut g = vec![0.0; n * n];
        for (i, a) in self.modes.iter().enumerate() {
            for (j, b) in self.modes.iter().enumerate() {
                g[i * n + j] = grams
                    .iter()
                    .enumerate()
                    .map(|(axis, ga)| ga[(a[axis] - 1) * k + (b[axis] - 1)])
                    .product();
            }
        }
        g
    }

    /// Dense-grid resolution used for the sup norm, recorded in reports.
    pub fn dense_points_per_axis(&self) -> usize {
        self.dense[0].len()
    }
}
