//! Commutator positivity on spectral subspaces, the `eps^2` bound for cutoffs supported away
//! from `sigma(Q)`, weighted resolvent probes as `delta -> 0`, and the embedded-eigenvalue scan.
//!
//! "Embedded eigenvalue" here is a discrete proxy: a localized eigenpair of `H` (interior mass
//! above [`crate::spectral::LOCALIZATION_THRESHOLD`]) inside a window of the resolved continuum. A finite matrix
//! has only point spectrum, so nothing below can decide whether the continuum operator has one.

use faer::{c64, Mat, MatRef};

use crate::error::{config, Result};
use crate::grid::{DiscreteOperator, GridSpec};
use crate::hamiltonian::{assemble_h_from_diag, commutator_dx, FieldParams};
use crate::potentials::{eval_potential, PotentialSpec};
use crate::spectral::{
    dx_bracket_power, eigendecompose, localized_spectrum, weight_x_p, BumpFunction, SpectralDecomposition, WeightSpec,
    DEFAULT_LOCALIZATION_MARGIN,
};
use crate::ssf::{check_support_clear, fit_loglog, localized_q_spectrum, ScalingReport};
use crate::traces::{diag_right, operator_norm};

/// Lower edge of `P C P` on `ran P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MourreBound {
    /// `+inf` when the projector is empty.
    pub min_eigenvalue: f64,
    /// `-inf` when the projector is empty.
    pub max_eigenvalue: f64,
    pub rank: usize,
    pub empty: bool,
}

/// Spectrum of `U_S* C U_S` with `U_S` the eigenvectors of `H` in `(a, b]`.
pub fn restricted_bound(dec: &SpectralDecomposition, a: f64, b: f64, c: MatRef<'_, c64>) -> Result<MourreBound> {
    if !(a < b) {
        return Err(config("window", format!("needs a < b, got [{a}, {b}]")));
    }
    let idx = dec.indices_in(a, b);
    if idx.is_empty() {
        return Ok(MourreBound {
            min_eigenvalue: f64::INFINITY,
            max_eigenvalue: f64::NEG_INFINITY,
            rank: 0,
            empty: true,
        });
    }
    let us = dec.columns(&idx);
    let small = us.adjoint() * c * &us;
    let ev = crate::spectral::eigendecompose_matrix(small.as_ref(), usize::MAX)?;
    let e = ev.eigenvalues();
    Ok(MourreBound {
        min_eigenvalue: e[0],
        max_eigenvalue: e[e.len() - 1],
        rank: idx.len(),
        empty: false,
    })
}

/// Bound for `C = [d/dx, H]`.
pub fn mourre_gap_bound(dec_h: &SpectralDecomposition, h: &DiscreteOperator, a: f64, b: f64) -> Result<MourreBound> {
    let c = commutator_dx(h);
    restricted_bound(dec_h, a, b, c.matrix())
}

/// `|| chi(H) <x>^(-2) ||` from an existing decomposition, without the support precondition.
pub fn lemma7_norm_unchecked(dec_h: &SpectralDecomposition, grid: &GridSpec, chi: &BumpFunction) -> Result<f64> {
    let idx: Vec<usize> = (0..dec_h.dim())
        .filter(|&k| chi.eval(dec_h.eigenvalues()[k]) != 0.0)
        .collect();
    if idx.is_empty() {
        return Ok(0.0);
    }
    // chi(H) W = U_S diag(chi) U_S* W and U_S is an isometry, so the norm is that of diag(chi) U_S* W.
    let us = dec_h.columns(&idx);
    let w = weight_x_p(grid, -2.0);
    let mut m: Mat<c64> = diag_right(us.adjoint().to_owned().as_ref(), &w);
    for (r, &k) in idx.iter().enumerate() {
        let c = chi.eval(dec_h.eigenvalues()[k]);
        for col in 0..m.ncols() {
            m[(r, col)] *= c;
        }
    }
    operator_norm(m.as_ref())
}

/// Distance kept between `supp chi` and the localized spectrum of `Q`.
pub const LEMMA7_Q_MARGIN: f64 = 0.2;

/// `|| chi(H) <x>^(-2) ||` after checking `supp chi` against the localized spectrum of `Q`.
pub fn lemma7_norm(
    grid: &GridSpec,
    fields: &FieldParams,
    spec: &PotentialSpec,
    chi: &BumpFunction,
    q_margin: f64,
) -> Result<f64> {
    let loc = localized_q_spectrum(grid, fields.b(), spec)?;
    check_support_clear(&loc, chi.support(), q_margin)?;
    let v = eval_potential(spec, grid)?.v;
    let dec = eigendecompose(&assemble_h_from_diag(grid, fields, &v))?;
    lemma7_norm_unchecked(&dec, grid, chi)
}

/// [`lemma7_norm`] over `eps_list`, fitted against `eps^2`.
pub fn lemma7_sweep(
    grid: &GridSpec,
    b: f64,
    spec: &PotentialSpec,
    chi: &BumpFunction,
    eps_list: &[f64],
    q_margin: f64,
) -> Result<ScalingReport> {
    let loc = localized_q_spectrum(grid, b, spec)?;
    check_support_clear(&loc, chi.support(), q_margin)?;
    let v = eval_potential(spec, grid)?.v;
    let samples = eps_list
        .iter()
        .map(|&eps| {
            let fields = FieldParams::new(b, eps)?;
            fields.require_electric()?;
            let dec = eigendecompose(&assemble_h_from_diag(grid, &fields, &v))?;
            Ok((eps, lemma7_norm_unchecked(&dec, grid, chi)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(fit_loglog(&samples, 2.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    /// `delta` (or `eps`) values, strictly monotone.
    pub params: Vec<f64>,
    pub norms: Vec<f64>,
    /// Log-log slope of `norms` against `params` when one was fitted.
    pub slope: Option<f64>,
    /// Last norm over the previous one.
    pub plateau_ratio: f64,
    /// `norms[k+1] / norms[k]` for each consecutive pair.
    pub growth: Vec<f64>,
}

/// Smallest shift accepted by [`lap_probe`].
pub const MIN_DELTA: f64 = 1e-6;

fn check_delta_list(delta_list: &[f64]) -> Result<()> {
    if delta_list.len() < 2 {
        return Err(config("delta_list", "needs at least two values"));
    }
    if delta_list.iter().any(|&d| !(d.is_finite() && d >= MIN_DELTA)) {
        return Err(config("delta_list", format!("values must be at least {MIN_DELTA}")));
    }
    if delta_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(config("delta_list", "must be strictly decreasing"));
    }
    Ok(())
}

/// `<Dx>^(-s) U` for the eigenvectors of `H`; reused across every shift.
pub fn weighted_eigenvectors(dec_h: &SpectralDecomposition, grid: &GridSpec, w: &WeightSpec) -> Result<Mat<c64>> {
    w.check_s()?;
    Ok(dx_bracket_power(grid, -w.s)?.apply_left(dec_h.eigenvectors()))
}

/// `|| <Dx>^(-s) (H - lambda - i delta)^(-1) <Dx>^(-s) ||` given `wu = <Dx>^(-s) U`.
pub fn lap_norm(dec_h: &SpectralDecomposition, wu: MatRef<'_, c64>, lambda: f64, delta: f64) -> Result<f64> {
    let z = c64::new(lambda, delta);
    let d: Vec<c64> = dec_h
        .eigenvalues()
        .iter()
        .map(|&e| (c64::new(e, 0.0) - z).inv())
        .collect();
    let scaled = Mat::from_fn(wu.nrows(), wu.ncols(), |r, c| wu[(r, c)] * d[c]);
    operator_norm((&scaled * wu.adjoint()).as_ref())
}

/// Weighted resolvent norms at `lambda + i delta` for each `delta`.
pub fn lap_probe(
    dec_h: &SpectralDecomposition,
    grid: &GridSpec,
    lambda: f64,
    w: &WeightSpec,
    delta_list: &[f64],
) -> Result<ProbeReport> {
    check_delta_list(delta_list)?;
    let wu = weighted_eigenvectors(dec_h, grid, w)?;
    let norms = delta_list
        .iter()
        .map(|&d| lap_norm(dec_h, wu.as_ref(), lambda, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(probe_report(delta_list.to_vec(), norms))
}

pub(crate) fn probe_report(params: Vec<f64>, norms: Vec<f64>) -> ProbeReport {
    let growth: Vec<f64> = norms.windows(2).map(|w| w[1] / w[0]).collect();
    let samples: Vec<(f64, f64)> = params.iter().copied().zip(norms.iter().copied()).collect();
    ProbeReport {
        slope: fit_loglog(&samples, 0.0).slope,
        plateau_ratio: growth.last().copied().unwrap_or(1.0),
        growth,
        params,
        norms,
    }
}

/// `max_lambda` of the weighted resolvent norm at a single shift `delta`.
pub fn lap_sup_norm(
    dec_h: &SpectralDecomposition,
    grid: &GridSpec,
    lambdas: &[f64],
    w: &WeightSpec,
    delta: f64,
) -> Result<f64> {
    if !(delta.is_finite() && delta >= MIN_DELTA) {
        return Err(config("delta", format!("must be at least {MIN_DELTA}")));
    }
    let wu = weighted_eigenvectors(dec_h, grid, w)?;
    lambdas
        .iter()
        .try_fold(0.0f64, |acc, &l| Ok(acc.max(lap_norm(dec_h, wu.as_ref(), l, delta)?)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub eigenvalue: f64,
    pub score: f64,
    /// Closest localized eigenvalue of `Q`, if `Q` has any.
    pub nearest_q: Option<f64>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedScan {
    pub rows: Vec<ScanRow>,
    /// Largest `distance`; `None` when no localized `H` state lies in the window.
    pub max_distance: Option<f64>,
}

/// Localized eigenpairs of `H` in `(lo, hi]` and their distance to the localized spectrum of `Q`.
pub fn embedded_eigenvalue_scan(
    dec_h: &SpectralDecomposition,
    dec_q: &SpectralDecomposition,
    grid: &GridSpec,
    window: (f64, f64),
    margin: f64,
) -> Result<EmbeddedScan> {
    if dec_h.dim() != dec_q.dim() {
        return Err(config("grid", "H and Q decompositions differ in dimension"));
    }
    let q_loc: Vec<f64> = localized_spectrum(dec_q, grid, margin)?
        .into_iter()
        .filter(|s| s.localized)
        .map(|s| s.eigenvalue)
        .collect();
    let rows: Vec<ScanRow> = localized_spectrum(dec_h, grid, margin)?
        .into_iter()
        .filter(|s| s.localized && s.eigenvalue > window.0 && s.eigenvalue <= window.1)
        .map(|s| {
            let nearest_q = q_loc
                .iter()
                .copied()
                .min_by(|a, b| (a - s.eigenvalue).abs().total_cmp(&(b - s.eigenvalue).abs()));
            ScanRow {
                eigenvalue: s.eigenvalue,
                score: s.score,
                nearest_q,
                distance: nearest_q.map_or(f64::INFINITY, |q| (q - s.eigenvalue).abs()),
            }
        })
        .collect();
    let max_distance = rows.iter().map(|r| r.distance).reduce(f64::max);
    Ok(EmbeddedScan { rows, max_distance })
}

/// [`embedded_eigenvalue_scan`] with the default wall margin.
pub fn embedded_scan_default(
    dec_h: &SpectralDecomposition,
    dec_q: &SpectralDecomposition,
    grid: &GridSpec,
    window: (f64, f64),
) -> Result<EmbeddedScan> {
    embedded_eigenvalue_scan(dec_h, dec_q, grid, window, DEFAULT_LOCALIZATION_MARGIN)
}
