//! Eigendecomposition and everything built on it: functional calculus, spectral projectors,
//! the weights `<Dx>^(-s)`, `<x>^p`, `k_j`, and the localized/artifact split of eigenpairs.

use faer::{c64, Mat, MatRef, Side};

use crate::error::{config, Error, Result};
use crate::grid::{d2_op, Axis, AxisOperator, DiscreteOperator, GridSpec};

/// Largest dimension handed to the dense eigensolver unless overridden.
pub const DEFAULT_DENSE_LIMIT: usize = 6400;

/// Ascending eigenvalues with orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: Mat<c64>,
}

pub fn eigendecompose(op: &DiscreteOperator) -> Result<SpectralDecomposition> {
    eigendecompose_matrix(op.matrix(), DEFAULT_DENSE_LIMIT)
}

/// Decomposes a Hermitian matrix; only the lower triangle is read.
pub fn eigendecompose_matrix(m: MatRef<'_, c64>, limit: usize) -> Result<SpectralDecomposition> {
    check_capacity(m.nrows(), limit)?;
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let eigenvalues = (0..m.nrows()).map(|k| s[k].re).collect();
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors: evd.U().to_owned(),
    })
}

/// Ascending eigenvalues only, cheaper than a full decomposition.
pub fn eigenvalues(op: &DiscreteOperator) -> Result<Vec<f64>> {
    let m = op.matrix();
    check_capacity(m.nrows(), DEFAULT_DENSE_LIMIT)?;
    let mut ev = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

fn check_capacity(dim: usize, limit: usize) -> Result<()> {
    if dim > limit {
        Err(Error::Capacity { dim, limit })
    } else {
        Ok(())
    }
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
    pub fn eigenvectors(&self) -> MatRef<'_, c64> {
        self.eigenvectors.as_ref()
    }
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Indices `k` with `lo < lambda_k <= hi`.
    pub fn indices_in(&self, lo: f64, hi: f64) -> Vec<usize> {
        (0..self.dim())
            .filter(|&k| self.eigenvalues[k] > lo && self.eigenvalues[k] <= hi)
            .collect()
    }

    /// The eigenvector columns listed in `idx`, as an `N x k` matrix.
    pub fn columns(&self, idx: &[usize]) -> Mat<c64> {
        let u = &self.eigenvectors;
        Mat::from_fn(self.dim(), idx.len(), |r, c| u[(r, idx[c])])
    }

    /// `U diag(lambda) U*`.
    pub fn reconstruct(&self) -> Mat<c64> {
        apply_function(self, |t| t)
    }

    /// `max |U diag(lambda) U* - M| / max |M|`.
    pub fn reconstruction_defect(&self, m: MatRef<'_, c64>) -> f64 {
        let scale = crate::grid::max_abs(m).max(f64::MIN_POSITIVE);
        crate::grid::max_abs((&self.reconstruct() - m).as_ref()) / scale
    }

    /// `max |U* U - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let u = &self.eigenvectors;
        let g = u.adjoint() * u;
        let id = Mat::<c64>::identity(self.dim(), self.dim());
        crate::grid::max_abs((&g - &id).as_ref())
    }

    /// `|U_{rk}|^2` summed against a diagonal weight: `tr(diag(d) P_k)` for each `k` in `idx`.
    pub fn diagonal_expectations(&self, idx: &[usize], d: &[f64]) -> Vec<f64> {
        let u = &self.eigenvectors;
        idx.iter()
            .map(|&k| (0..self.dim()).map(|r| d[r] * u[(r, k)].norm_sqr()).sum())
            .collect()
    }
}

/// `f(M) = U diag(f(lambda)) U*`. Eigenpairs with `f(lambda) = 0` are skipped.
pub fn apply_function(dec: &SpectralDecomposition, f: impl Fn(f64) -> f64) -> Mat<c64> {
    let idx: Vec<usize> = (0..dec.dim()).filter(|&k| f(dec.eigenvalues[k]) != 0.0).collect();
    let us = dec.columns(&idx);
    let mut scaled = us.clone();
    for (c, &k) in idx.iter().enumerate() {
        let w = f(dec.eigenvalues[k]);
        for r in 0..dec.dim() {
            scaled[(r, c)] *= w;
        }
    }
    &scaled * us.adjoint()
}

/// `tr(diag(d) f(M))` without forming `f(M)`.
pub fn weighted_trace(dec: &SpectralDecomposition, f: impl Fn(f64) -> f64, d: &[f64]) -> f64 {
    let idx: Vec<usize> = (0..dec.dim()).filter(|&k| f(dec.eigenvalues[k]) != 0.0).collect();
    let e = dec.diagonal_expectations(&idx, d);
    idx.iter().zip(e).map(|(&k, ek)| f(dec.eigenvalues[k]) * ek).sum()
}

/// `sum_k f(lambda_k)`.
pub fn trace_of_function(eigenvalues: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    eigenvalues.iter().map(|&t| f(t)).sum()
}

/// Orthogonal projector onto eigenvalues in `(a, b]`.
#[derive(Debug, Clone)]
pub struct Projector {
    pub matrix: Mat<c64>,
    pub rank: usize,
}

impl Projector {
    /// No eigenvalue was selected; `matrix` is zero.
    pub fn is_empty(&self) -> bool {
        self.rank == 0
    }
}

/// Projector onto the eigenvalues in `[a, b]`. An eigenvalue exactly at a cut belongs to the
/// interval on its left, so the selection is `(a, b]` and adjacent projectors add up.
pub fn spectral_projector(dec: &SpectralDecomposition, a: f64, b: f64) -> Result<Projector> {
    if !(a < b) {
        return Err(config("interval", format!("needs a < b, got [{a}, {b}]")));
    }
    let idx = dec.indices_in(a, b);
    let u = dec.columns(&idx);
    Ok(Projector {
        matrix: &u * u.adjoint(),
        rank: idx.len(),
    })
}

/// `exp(-1/t) / (exp(-1/t) + exp(-1/(1-t)))`: 0 for `t <= 0`, 1 for `t >= 1`, smooth between.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a * b * (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t))) / ((a + b) * (a + b))
    }
}

/// Compactly supported smooth test function on `[center - halfwidth, center + halfwidth]`.
///
/// Without a core it is `exp(1 - 1/(1-u^2))`, `u = (t - center)/halfwidth`. With a core it is
/// identically 1 on `|t - center| <= core` and falls off through [`smooth_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpFunction {
    center: f64,
    halfwidth: f64,
    core: f64,
    scale: f64,
}

impl BumpFunction {
    pub fn new(center: f64, halfwidth: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(config("center", "must be finite"));
        }
        if !(halfwidth.is_finite() && halfwidth > 0.0) {
            return Err(config("halfwidth", format!("must be positive, got {halfwidth}")));
        }
        Ok(Self {
            center,
            halfwidth,
            core: 0.0,
            scale: 1.0,
        })
    }

    /// Equal to 1 on `[center - core, center + core]`.
    pub fn plateau(center: f64, halfwidth: f64, core: f64) -> Result<Self> {
        let f = Self::new(center, halfwidth)?;
        if !(core > 0.0 && core < halfwidth) {
            return Err(config("core", format!("must lie in (0, halfwidth), got {core}")));
        }
        Ok(Self { core, ..f })
    }

    /// `c * f`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            scale: self.scale * c,
            ..*self
        }
    }

    pub fn center(&self) -> f64 {
        self.center
    }
    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }
    pub fn core(&self) -> f64 {
        self.core
    }
    pub fn scale(&self) -> f64 {
        self.scale
    }
    pub fn support(&self) -> (f64, f64) {
        (self.center - self.halfwidth, self.center + self.halfwidth)
    }
    /// `sup |f|`.
    pub fn max_abs(&self) -> f64 {
        self.scale.abs()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let d = (t - self.center).abs();
        if d >= self.halfwidth {
            return 0.0;
        }
        if self.core > 0.0 {
            if d <= self.core {
                return self.scale;
            }
            let v = (d - self.core) / (self.halfwidth - self.core);
            return self.scale * smooth_step(1.0 - v);
        }
        let u = d / self.halfwidth;
        self.scale * (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

/// Weight exponents: `s` for `<Dx>^(-s)`, `p` for `<x>^p`, `delta` for `k_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    pub s: f64,
    pub p: f64,
    pub delta: f64,
}

impl WeightSpec {
    pub fn new(s: f64, p: f64, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(config("delta", format!("must be positive, got {delta}")));
        }
        if !s.is_finite() || !p.is_finite() {
            return Err(config("s", "weights must be finite"));
        }
        Ok(Self { s, p, delta })
    }

    /// Enforces `1/2 < s < 1`.
    pub fn check_s(&self) -> Result<()> {
        if self.s > 0.5 && self.s < 1.0 {
            Ok(())
        } else {
            Err(config("s", format!("must lie in (1/2, 1), got {}", self.s)))
        }
    }
}

/// `(I + Dx^2)^(power/2)` along x, with `Dx^2` the three-point Dirichlet stencil.
pub fn dx_bracket_power(grid: &GridSpec, power: f64) -> Result<AxisOperator> {
    let d2 = d2_op(grid.nx(), grid.hx())?;
    let dec = eigendecompose_matrix(d2.as_ref(), usize::MAX)?;
    let a = apply_function(&dec, |t| (1.0 + t).powf(power / 2.0));
    AxisOperator::new(grid, Axis::X, a)
}

/// `<Dx>^(-s)` with `s` checked to lie in `(1/2, 1)`.
pub fn weight_dx_s(grid: &GridSpec, w: &WeightSpec) -> Result<AxisOperator> {
    w.check_s()?;
    dx_bracket_power(grid, -w.s)
}

/// Diagonal of `<x>^p = (1 + x^2)^(p/2)`.
pub fn weight_x_p(grid: &GridSpec, p: f64) -> Vec<f64> {
    grid.sample(|x, _| (1.0 + x * x).powf(p / 2.0))
}

/// Diagonal of `k_j = <x>^(-j(1+delta)) <y>^(-j(1/2+delta))`.
pub fn k_weight(grid: &GridSpec, j: u32, delta: f64) -> Vec<f64> {
    let j = j as f64;
    grid.sample(|x, y| (1.0 + x * x).powf(-j * (1.0 + delta) / 2.0) * (1.0 + y * y).powf(-j * (0.5 + delta) / 2.0))
}

/// Interior mass needed to call an eigenvector localized.
pub const LOCALIZATION_THRESHOLD: f64 = 0.99;

/// Default relative wall margin for [`localized_spectrum`].
pub const DEFAULT_LOCALIZATION_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateScore {
    pub index: usize,
    pub eigenvalue: f64,
    /// Eigenvector mass inside the centered sub-box.
    pub score: f64,
    pub localized: bool,
}

/// Scores every eigenpair by its mass in the centered box of relative size `1 - 2 margin`.
pub fn localized_spectrum(dec: &SpectralDecomposition, grid: &GridSpec, margin: f64) -> Result<Vec<StateScore>> {
    if !(margin > 0.0 && margin < 0.5) {
        return Err(config("margin", format!("must lie in (0, 0.5), got {margin}")));
    }
    if dec.dim() != grid.dim() {
        return Err(config("grid", "dimension differs from the decomposition"));
    }
    let bx = (1.0 - 2.0 * margin) * grid.lx();
    let by = (1.0 - 2.0 * margin) * grid.ly();
    let inside = grid.sample(|x, y| if x.abs() <= bx && y.abs() <= by { 1.0 } else { 0.0 });
    let all: Vec<usize> = (0..dec.dim()).collect();
    let mass = dec.diagonal_expectations(&all, &inside);
    Ok(mass
        .into_iter()
        .enumerate()
        .map(|(k, score)| StateScore {
            index: k,
            eigenvalue: dec.eigenvalues[k],
            score,
            localized: score > LOCALIZATION_THRESHOLD,
        })
        .collect())
}

/// Eigenvalues of the localized states, ascending.
pub fn localized_eigenvalues(states: &[StateScore]) -> Vec<f64> {
    states.iter().filter(|s| s.localized).map(|s| s.eigenvalue).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cluster {
    pub lo: f64,
    pub hi: f64,
    pub mean: f64,
    pub count: usize,
}

/// Splits sorted values wherever consecutive entries are more than `gap` apart.
pub fn clusters(sorted: &[f64], gap: f64) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = Vec::new();
    let mut start = 0;
    for k in 1..=sorted.len() {
        if k == sorted.len() || sorted[k] - sorted[k - 1] > gap {
            let part = &sorted[start..k];
            if !part.is_empty() {
                out.push(Cluster {
                    lo: part[0],
                    hi: part[part.len() - 1],
                    mean: part.iter().sum::<f64>() / part.len() as f64,
                    count: part.len(),
                });
            }
            start = k;
        }
    }
    out
}
