//! Traces, Schatten norms and resolvents, plus the trace-norm bound experiments built on them.
//!
//! Resolvents are always `(z - M)^(-1)`.

use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat, MatRef, Side};

use crate::error::{config, Error, Result};
use crate::grid::{DiscreteOperator, GridSpec};
use crate::spectral::{dx_bracket_power, k_weight, WeightSpec};

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|k| m[(k, k)]).sum()
}

/// Hilbert-Schmidt norm.
pub fn frobenius_norm(m: MatRef<'_, c64>) -> f64 {
    m.norm_l2()
}

/// Sum of singular values.
pub fn nuclear_norm(m: MatRef<'_, c64>) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}

/// Largest singular value.
pub fn operator_norm(m: MatRef<'_, c64>) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

fn singular_values(m: MatRef<'_, c64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    m.singular_values().map_err(|e| Error::Linalg(format!("{e:?}")))
}

/// Distance below which a real `z` counts as sitting on the spectrum.
pub const NEAR_SINGULAR_TOL: f64 = 1e-8;

/// `(z - M)^(-1)`.
pub fn resolvent(op: &DiscreteOperator, z: c64) -> Result<Mat<c64>> {
    resolvent_matrix(op.matrix(), z)
}

/// `(z - M)^(-1)` for a Hermitian matrix. Real `z` is checked against the spectrum first.
pub fn resolvent_matrix(m: MatRef<'_, c64>, z: c64) -> Result<Mat<c64>> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(config("z", "must be finite"));
    }
    if z.im == 0.0 {
        let ev = m
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Linalg(format!("{e:?}")))?;
        if let Some(&near) = ev.iter().min_by(|a, b| (*a - z.re).abs().total_cmp(&(*b - z.re).abs())) {
            if (near - z.re).abs() <= NEAR_SINGULAR_TOL {
                return Err(Error::NearSingular {
                    re: z.re,
                    im: z.im,
                    eigenvalue: near,
                    tol: NEAR_SINGULAR_TOL,
                });
            }
        }
    }
    let n = m.nrows();
    let a = Mat::from_fn(n, n, |r, c| if r == c { z - m[(r, c)] } else { -m[(r, c)] });
    Ok(a.partial_piv_lu().inverse())
}

/// `max |(z - M) R - I|`.
pub fn resolvent_residual(m: MatRef<'_, c64>, z: c64, r: MatRef<'_, c64>) -> f64 {
    let n = m.nrows();
    let a = Mat::from_fn(n, n, |i, j| if i == j { z - m[(i, j)] } else { -m[(i, j)] });
    let prod = &a * r;
    crate::grid::max_abs((&prod - Mat::<c64>::identity(n, n)).as_ref())
}

/// Scales row `i` of `m` by `d[i]`.
pub fn diag_left(d: &[f64], m: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] * d[r])
}

/// Scales column `j` of `m` by `d[j]`.
pub fn diag_right(m: MatRef<'_, c64>, d: &[f64]) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] * d[c])
}

/// Probe points `z_k = re_z + i im_k`, `z'_k = re_z' + i im_k` for the Im-halving sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSpec {
    pub re_z: f64,
    pub re_z_prime: f64,
    pub im_list: Vec<f64>,
}

/// Default imaginary parts of the halving sweep.
pub const DEFAULT_IM_LIST: [f64; 3] = [0.5, 0.25, 0.125];

impl ProbeSpec {
    pub fn new(re_z: f64, re_z_prime: f64, im_list: Vec<f64>) -> Result<Self> {
        if im_list.is_empty() {
            return Err(config("im_list", "must not be empty"));
        }
        if im_list.iter().any(|&t| !(t.is_finite() && t > 0.0)) {
            return Err(config("im_list", "imaginary parts must be positive"));
        }
        if im_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(config("im_list", "must be strictly decreasing"));
        }
        Ok(Self {
            re_z,
            re_z_prime,
            im_list,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prop2Point {
    pub im: f64,
    pub z: c64,
    pub z_prime: c64,
    /// `|| (z - H)^(-1) V (z' - H)^(-1) ||_1`.
    pub nuclear: f64,
    /// `|Im z| |Im z'|` times the nuclear norm.
    pub product: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prop2Report {
    pub points: Vec<Prop2Point>,
    /// max/min of `product` over the sweep; 1 when every product is 0.
    pub ratio: f64,
}

/// `|| (z - H)^(-1) V (z' - H)^(-1) ||_1`.
pub fn prop2_norm(h: &DiscreteOperator, v: &[f64], z: c64, z_prime: c64) -> Result<f64> {
    let r1 = resolvent(h, z)?;
    let r2 = if z_prime == z {
        r1.clone()
    } else {
        resolvent(h, z_prime)?
    };
    nuclear_norm((diag_right(r1.as_ref(), v) * r2).as_ref())
}

/// Nuclear norms of `(z - H)^(-1) V (z' - H)^(-1)` over the sweep, weighted by `|Im z| |Im z'|`.
pub fn prop2_tracebound(h: &DiscreteOperator, v: &[f64], probe: &ProbeSpec) -> Result<Prop2Report> {
    let mut points = Vec::with_capacity(probe.im_list.len());
    for &im in &probe.im_list {
        let z = c64::new(probe.re_z, im);
        let z_prime = c64::new(probe.re_z_prime, im);
        let nuclear = prop2_norm(h, v, z, z_prime)?;
        points.push(Prop2Point {
            im,
            z,
            z_prime,
            nuclear,
            product: im * im * nuclear,
        });
    }
    Ok(Prop2Report {
        ratio: max_min_ratio(points.iter().map(|p| p.product)),
        points,
    })
}

pub(crate) fn max_min_ratio(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi == 0.0 {
        1.0
    } else {
        hi / lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppendixNorms {
    /// `|| k_1 (H0 + i)^(-1) ||_2`.
    pub hs1: f64,
    /// `|| k_2 (H0 + i)^(-2) ||_1`.
    pub tr2: f64,
}

/// Weighted resolvent norms with `k_j = <x>^(-j(1+d)) <y>^(-j(1/2+d))`, `d = w.delta`.
pub fn appendix_norms(h0: &DiscreteOperator, w: &WeightSpec, grid: &GridSpec) -> Result<AppendixNorms> {
    // (H0 + i)^(-1) = -(-i - H0)^(-1); the sign does not reach the norms.
    let r = resolvent(h0, c64::new(0.0, -1.0))?;
    let k1 = k_weight(grid, 1, w.delta);
    let k2 = k_weight(grid, 2, w.delta);
    let hs1 = frobenius_norm(diag_left(&k1, r.as_ref()).as_ref());
    let r2 = &r * &r;
    let tr2 = nuclear_norm(diag_left(&k2, r2.as_ref()).as_ref())?;
    Ok(AppendixNorms { hs1, tr2 })
}

/// `|| <Dx>^s diag(dV/dx) [(z - Q)^(-1) X]^n <Dx>^s ||_1`.
///
/// Requires `n >= 2` and `1/2 < s < min(1/2 + delta/4, 1)` with `delta = w.delta`.
pub fn prop4_norm(q: &DiscreteOperator, dxv: &[f64], n: u32, w: &WeightSpec, z: c64) -> Result<f64> {
    if n < 2 {
        return Err(config("n", format!("must be at least 2, got {n}")));
    }
    let s_max = (0.5 + w.delta / 4.0).min(1.0);
    if !(w.s > 0.5 && w.s < s_max) {
        return Err(config("s", format!("must lie in (1/2, {s_max}), got {}", w.s)));
    }
    if dxv.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let grid = q.grid();
    let x = grid.sample(|x, _| x);
    let t = diag_right(resolvent(q, z)?.as_ref(), &x);
    let mut tn = t.clone();
    for _ in 1..n {
        tn = &tn * &t;
    }
    drop(t);
    let weight = dx_bracket_power(grid, w.s)?;
    let m = weight.apply_left(diag_left(dxv, tn.as_ref()).as_ref());
    drop(tn);
    let m = weight.apply_right(m.as_ref());
    nuclear_norm(m.as_ref())
}
