//! Spectral shift experiments: the trace identity `tr(f(H) - f(H0)) = -(1/eps) tr(dV/dx f(H))`,
//! its exact finite-dimensional backbone, truncation in space, the mollified `xi'`,
//! the gap window of `Q`, the epsilon scaling sweep and the resolvent expansion in `eps`.
//!
//! `<xi', f>` is always computed from eigenvalue sums, never from a perturbation determinant.

use faer::{c64, Mat, MatRef};

use crate::error::{config, Error, Result};
use crate::grid::{max_abs, DiscreteOperator, GridSpec, Role};
use crate::hamiltonian::{
    assemble_h0, assemble_h_from_diag, assemble_q, averaging_operator, commutator_dx, kinetic_wall_commutator,
    FieldParams,
};
use crate::potentials::{eval_potential, PotentialSpec};
use crate::spectral::{
    apply_function, eigendecompose, eigenvalues, localized_eigenvalues, localized_spectrum, smooth_step,
    smooth_step_derivative, trace_of_function, weighted_trace, BumpFunction, SpectralDecomposition,
    DEFAULT_LOCALIZATION_MARGIN,
};
use crate::traces::{diag_right, resolvent, trace};

/// Distance kept from both ends of the resolved window.
pub const DEFAULT_WINDOW_MARGIN: f64 = 0.05;

/// Distance kept between a test function's support and the localized spectrum of `Q`.
pub const DEFAULT_GAP_MARGIN: f64 = 0.3;

/// Default epsilon sweep, half-decade log spaced.
pub const DEFAULT_EPS_LIST: [f64; 5] = [0.4, 0.283, 0.2, 0.141, 0.1];

/// `[lambda_min(H0) + margin, 2/h^2 - margin]`.
///
/// `2/h^2` is where the three-point stencil's dispersion `(2 - 2cos kh)/h^2` reaches `k h = pi/2`;
/// above it the lattice no longer tracks the continuum kinetic energy.
pub fn resolved_window(h0_eigenvalues: &[f64], grid: &GridSpec, margin: f64) -> (f64, f64) {
    let lo = h0_eigenvalues.first().copied().unwrap_or(0.0) + margin;
    let hi = 2.0 / (grid.h_max() * grid.h_max()) - margin;
    (lo, hi)
}

fn check_window(f: &BumpFunction, window: (f64, f64)) -> Result<()> {
    let (lo, hi) = f.support();
    if lo < window.0 || hi > window.1 {
        Err(Error::Window {
            lo,
            hi,
            a: window.0,
            b: window.1,
        })
    } else {
        Ok(())
    }
}

/// Terms whose sum is exactly the discrete residual.
///
/// With `A = [d/dx, x]`, `C_V = [d/dx, V]`, `K` the kinetic wall commutator and
/// `df = f(H) - f(H0)`:
/// `residual = averaging + potential - wall`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualBreakdown {
    /// `tr((I - A) df)`.
    pub averaging: f64,
    /// `(tr(dV/dx f(H)) - tr(C_V f(H))) / eps`.
    pub potential: f64,
    /// `tr(K df) / eps`.
    pub wall: f64,
}

impl ResidualBreakdown {
    pub fn sum(&self) -> f64 {
        self.averaging + self.potential - self.wall
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFormulaReport {
    /// `tr f(H) - tr f(H0)`.
    pub lhs: f64,
    /// `-(1/eps) tr(dV/dx f(H))`.
    pub rhs: f64,
    pub residual: f64,
    pub grid: GridSpec,
    pub h: f64,
    pub window: (f64, f64),
    pub breakdown: ResidualBreakdown,
    /// `|tr([d/dx, H f(H)])|`.
    pub commutator_trace: f64,
    /// Eigenvalues of `H` inside the support of `f`.
    pub support_count: usize,
    /// `||H||` from the extreme eigenvalues.
    pub h_norm: f64,
}

impl TraceFormulaReport {
    /// `|residual| / max(|lhs|, 1e-8)`.
    pub fn relative_residual(&self) -> f64 {
        self.residual.abs() / self.lhs.abs().max(1e-8)
    }
}

/// Checks the trace identity on one grid.
pub fn theorem1_check(
    grid: &GridSpec,
    fields: &FieldParams,
    spec: &PotentialSpec,
    f: &BumpFunction,
) -> Result<TraceFormulaReport> {
    fields.require_electric()?;
    let pf = eval_potential(spec, grid)?;
    let h0 = assemble_h0(grid, fields);
    let h = assemble_h_from_diag(grid, fields, &pf.v);
    let dec0 = eigendecompose(&h0)?;
    let window = resolved_window(dec0.eigenvalues(), grid, DEFAULT_WINDOW_MARGIN);
    check_window(f, window)?;
    let dec = eigendecompose(&h)?;
    let eps = fields.eps();
    let fe = |t: f64| f.eval(t);

    let lhs = trace_of_function(dec.eigenvalues(), fe) - trace_of_function(dec0.eigenvalues(), fe);
    let tr_dxv = weighted_trace(&dec, fe, &pf.dx);
    let rhs = -tr_dxv / eps;

    let fh = apply_function(&dec, fe);
    let df = &fh - apply_function(&dec0, fe);
    let a = averaging_operator(grid);
    let cv = commutator_dx(&DiscreteOperator::new(
        crate::grid::diag_matrix(&pf.v),
        *grid,
        Role::Generic,
    )?);
    let k = kinetic_wall_commutator(grid, fields.b())?;
    let breakdown = ResidualBreakdown {
        averaging: trace(df.as_ref()).re - trace_of_product(a.matrix(), df.as_ref()).re,
        potential: (tr_dxv - trace_of_product(cv.matrix(), fh.as_ref()).re) / eps,
        wall: trace_of_product(k.matrix(), df.as_ref()).re / eps,
    };
    let (lo, hi) = f.support();

    Ok(TraceFormulaReport {
        lhs,
        rhs,
        residual: lhs - rhs,
        grid: *grid,
        h: grid.h_max(),
        window,
        breakdown,
        commutator_trace: commutator_trace_of(&h, &fh)?,
        support_count: dec.indices_in(lo, hi).len(),
        h_norm: spectral_radius(dec.eigenvalues()),
    })
}

fn spectral_radius(eigenvalues: &[f64]) -> f64 {
    eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()))
}

/// `tr(A B)` in `O(N^2)`.
pub fn trace_of_product(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> c64 {
    let mut acc = c64::new(0.0, 0.0);
    for c in 0..a.ncols() {
        for r in 0..a.nrows() {
            acc += a[(r, c)] * b[(c, r)];
        }
    }
    acc
}

fn commutator_trace_of(h: &DiscreteOperator, fh: &Mat<c64>) -> Result<f64> {
    let m = DiscreteOperator::new(h.matrix() * fh, *h.grid(), Role::Generic)?;
    Ok(trace(commutator_dx(&m).matrix()).norm())
}

/// `|tr([d/dx, H f(H)])|`, zero up to rounding for every input.
pub fn commutator_trace_zero(
    grid: &GridSpec,
    fields: &FieldParams,
    spec: &PotentialSpec,
    f: &BumpFunction,
) -> Result<f64> {
    let h = if spec.is_zero() {
        assemble_h0(grid, fields)
    } else {
        crate::hamiltonian::assemble_h(grid, fields, spec)?
    };
    let dec = eigendecompose(&h)?;
    let fh = apply_function(&dec, |t| f.eval(t));
    commutator_trace_of(&h, &fh)
}

/// `1e-10 N ||H||`, the round-off budget for [`commutator_trace_zero`].
pub fn commutator_trace_tolerance(dim: usize, norm: f64) -> f64 {
    1e-10 * dim as f64 * norm
}

/// Radii for the spatial truncation `H_R = H0 + chi_R V`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationSpec {
    radii: Vec<f64>,
}

impl TruncationSpec {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() || radii.iter().any(|&r| !(r.is_finite() && r > 0.0)) {
            return Err(config("radii", "must be a non-empty list of positive radii"));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config("radii", "must be strictly increasing"));
        }
        Ok(Self { radii })
    }
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
}

/// Radial cutoff: 1 on `r <= R`, 0 on `r >= 2R`, smooth between.
pub fn chi_r(x: f64, y: f64, radius: f64) -> f64 {
    let r = x.hypot(y);
    1.0 - smooth_step((r - radius) / radius)
}

/// `d chi_R / dx`.
pub fn chi_r_dx(x: f64, y: f64, radius: f64) -> f64 {
    let r = x.hypot(y);
    if r == 0.0 {
        return 0.0;
    }
    -smooth_step_derivative((r - radius) / radius) / radius * x / r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationRow {
    pub radius: f64,
    /// `|tr f(H_R) - tr f(H)|`.
    pub trace_gap: f64,
    /// `|tr(d(chi_R V)/dx f(H_R)) - tr(dV/dx f(H))|`.
    pub rhs_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationTable {
    pub rows: Vec<TruncationRow>,
}

/// Gaps below this count as converged when judging monotonicity.
pub const TRUNCATION_FLOOR: f64 = 1e-10;

impl TruncationTable {
    /// Both columns decrease with `R` (entries at round-off level count as converged).
    pub fn monotone(&self) -> bool {
        let dec = |get: fn(&TruncationRow) -> f64| {
            self.rows
                .windows(2)
                .all(|w| get(&w[1]) < get(&w[0]) || get(&w[1]).max(get(&w[0])) <= TRUNCATION_FLOOR)
        };
        dec(|r| r.trace_gap) && dec(|r| r.rhs_gap)
    }
}

/// Replaces `V` by `chi_R V` for each radius and compares both sides of the identity.
pub fn truncation_convergence(
    grid: &GridSpec,
    fields: &FieldParams,
    spec: &PotentialSpec,
    f: &BumpFunction,
    trunc: &TruncationSpec,
) -> Result<TruncationTable> {
    let limit = grid.lx().min(grid.ly());
    if let Some(&r) = trunc.radii().iter().find(|&&r| 2.0 * r > limit + 1e-12) {
        return Err(Error::Geometry { radius: r, limit });
    }
    let pf = eval_potential(spec, grid)?;
    let fe = |t: f64| f.eval(t);
    let dec = eigendecompose(&assemble_h_from_diag(grid, fields, &pf.v))?;
    let tr_full = trace_of_function(dec.eigenvalues(), fe);
    let rhs_full = weighted_trace(&dec, fe, &pf.dx);
    let mut rows = Vec::with_capacity(trunc.radii().len());
    for &radius in trunc.radii() {
        let v_r = grid.sample(|x, y| chi_r(x, y, radius) * spec.value(x, y));
        let dx_r = grid.sample(|x, y| chi_r_dx(x, y, radius) * spec.value(x, y) + chi_r(x, y, radius) * spec.dx(x, y));
        let dec_r = eigendecompose(&assemble_h_from_diag(grid, fields, &v_r))?;
        rows.push(TruncationRow {
            radius,
            trace_gap: (trace_of_function(dec_r.eigenvalues(), fe) - tr_full).abs(),
            rhs_gap: (weighted_trace(&dec_r, fe, &dx_r) - rhs_full).abs(),
        });
    }
    Ok(TruncationTable { rows })
}

/// Unit-mass gaussian of width `eta`.
pub fn gaussian_kernel(t: f64, eta: f64) -> f64 {
    (-(t * t) / (2.0 * eta * eta)).exp() / (eta * (2.0 * std::f64::consts::PI).sqrt())
}

/// `sum_j phi(lambda - lambda_j(H)) - sum_j phi(lambda - lambda_j(H0))` on `lambdas`.
///
/// Readable only when `eta` exceeds about twice the local eigenvalue spacing.
pub fn xi_prime_mollified(
    h_eigenvalues: &[f64],
    h0_eigenvalues: &[f64],
    lambdas: &[f64],
    eta: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(config("eta", format!("must be positive, got {eta}")));
    }
    Ok(lambdas
        .iter()
        .map(|&l| {
            let a: f64 = h_eigenvalues.iter().map(|&e| gaussian_kernel(l - e, eta)).sum();
            let b: f64 = h0_eigenvalues.iter().map(|&e| gaussian_kernel(l - e, eta)).sum();
            (l, a - b)
        })
        .collect())
}

/// Trapezoid rule for `int g(lambda) curve(lambda) d lambda` on the curve's own nodes.
pub fn integrate_against(curve: &[(f64, f64)], g: impl Fn(f64) -> f64) -> f64 {
    curve
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (g(w[0].0) * w[0].1 + g(w[1].0) * w[1].1))
        .sum()
}

/// `n` points evenly spaced over `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// The first Landau gap `(B, 3B)`, the default search range for gap windows.
pub fn first_landau_gap(b: f64) -> (f64, f64) {
    (b, 3.0 * b)
}

/// Widest interval in `search` (intersected with the resolved range) keeping distance `margin`
/// from every localized eigenvalue of `Q`.
pub fn sigma_q_gap_window(
    dec_q: &SpectralDecomposition,
    grid: &GridSpec,
    margin: f64,
    search: (f64, f64),
) -> Result<(f64, f64)> {
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(config("margin", format!("must be non-negative, got {margin}")));
    }
    let states = localized_spectrum(dec_q, grid, DEFAULT_LOCALIZATION_MARGIN)?;
    let loc = localized_eigenvalues(&states);
    let resolved = resolved_window(dec_q.eigenvalues(), grid, 0.0);
    let lo = search.0.max(resolved.0);
    let hi = search.1.min(resolved.1);
    gap_window_from(&loc, margin, (lo, hi))
}

/// [`sigma_q_gap_window`] on an explicit list of localized eigenvalues.
pub fn gap_window_from(localized: &[f64], margin: f64, range: (f64, f64)) -> Result<(f64, f64)> {
    let (lo, hi) = range;
    let mut cuts = vec![f64::NEG_INFINITY];
    cuts.extend(localized.iter().copied());
    cuts.push(f64::INFINITY);
    cuts.sort_by(f64::total_cmp);
    let mut best: Option<(f64, f64)> = None;
    let mut available = 0.0f64;
    for w in cuts.windows(2) {
        let a = (w[0] + margin).max(lo);
        let b = (w[1] - margin).min(hi);
        if a <= b && best.map_or(true, |(p, q)| b - a > q - p) {
            best = Some((a, b));
        }
        // Largest distance to the localized set reachable inside [lo, hi] within this gap.
        let (p, q) = (lo.max(w[0]), hi.min(w[1]));
        if p <= q {
            let mid = (0.5 * (w[0] + w[1])).clamp(p, q);
            available = available.max((mid - w[0]).min(w[1] - mid));
        }
    }
    best.ok_or(Error::GapNotFound {
        requested: margin,
        available,
        lo,
        hi,
    })
}

/// Fails when a localized eigenvalue lies within `margin` of `[lo, hi]`.
pub fn check_support_clear(localized: &[f64], support: (f64, f64), margin: f64) -> Result<()> {
    let (lo, hi) = support;
    match localized.iter().find(|&&e| e > lo - margin && e < hi + margin) {
        Some(&eigenvalue) => Err(Error::SupportOverlap {
            lo,
            hi,
            eigenvalue,
            margin,
        }),
        None => Ok(()),
    }
}

/// Localized eigenvalues of `Q(B) = Q0 + V`.
pub fn localized_q_spectrum(grid: &GridSpec, b: f64, spec: &PotentialSpec) -> Result<Vec<f64>> {
    let q = assemble_q(grid, &FieldParams::new(b, 0.0)?, spec)?;
    let dec = eigendecompose(&q)?;
    Ok(localized_eigenvalues(&localized_spectrum(
        &dec,
        grid,
        DEFAULT_LOCALIZATION_MARGIN,
    )?))
}

/// Log-log fit of `(parameter, value)` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub samples: Vec<(f64, f64)>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r2: Option<f64>,
    /// Exponent the experiment is compared against.
    pub predicted: f64,
    /// Some sample fell below [`UNDERFLOW_FLOOR`]; the fit is not attempted.
    pub underflow: bool,
}

/// Samples smaller than this are treated as zero.
pub const UNDERFLOW_FLOOR: f64 = 1e-13;

/// Least-squares fit of `ln v = intercept + slope ln p`, with `r^2`.
pub fn fit_loglog(samples: &[(f64, f64)], predicted: f64) -> ScalingReport {
    let underflow = samples.iter().any(|&(_, v)| !(v.abs() >= UNDERFLOW_FLOOR));
    let mut report = ScalingReport {
        samples: samples.to_vec(),
        slope: None,
        intercept: None,
        r2: None,
        predicted,
        underflow,
    };
    if underflow || samples.len() < 2 {
        return report;
    }
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.abs().ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return report;
    }
    let slope = sxy / sxx;
    report.slope = Some(slope);
    report.intercept = Some(my - slope * mx);
    report.r2 = Some(if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) });
    report
}

fn check_decreasing(field: &'static str, list: &[f64]) -> Result<()> {
    if list.is_empty() || list.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
        return Err(config(field, "must be a non-empty list of positive values"));
    }
    if list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(config(field, "must be strictly decreasing"));
    }
    Ok(())
}

/// `|tr f(H(eps)) - tr f(H0(eps))|` for one `eps`, from eigenvalues only.
pub fn scaling_sample(grid: &GridSpec, b: f64, eps: f64, v: &[f64], f: &BumpFunction) -> Result<f64> {
    let fields = FieldParams::new(b, eps)?;
    fields.require_electric()?;
    let fe = |t: f64| f.eval(t);
    let e0 = eigenvalues(&assemble_h0(grid, &fields))?;
    let e = eigenvalues(&assemble_h_from_diag(grid, &fields, v))?;
    Ok((trace_of_function(&e, fe) - trace_of_function(&e0, fe)).abs())
}

/// Checks the scaling preconditions and returns the sampled potential.
pub fn scaling_setup(
    grid: &GridSpec,
    b: f64,
    spec: &PotentialSpec,
    f: &BumpFunction,
    eps_list: &[f64],
    gap_margin: f64,
) -> Result<Vec<f64>> {
    check_decreasing("eps_list", eps_list)?;
    let pf = eval_potential(spec, grid)?;
    if !spec.is_zero() {
        let loc = localized_q_spectrum(grid, b, spec)?;
        check_support_clear(&loc, f.support(), gap_margin)?;
    }
    Ok(pf.v)
}

/// `|<xi', f>|` over `eps_list`, fitted against `eps^(n-2)`.
pub fn epsilon_scaling(
    grid: &GridSpec,
    b: f64,
    spec: &PotentialSpec,
    f: &BumpFunction,
    eps_list: &[f64],
) -> Result<ScalingReport> {
    let v = scaling_setup(grid, b, spec, f, eps_list, DEFAULT_GAP_MARGIN)?;
    let samples = eps_list
        .iter()
        .map(|&eps| Ok((eps, scaling_sample(grid, b, eps, &v, f)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(fit_loglog(&samples, spec.decay_n() as f64 - 2.0))
}

/// `max |R_H - sum_{k<n} eps^k (R_Q X)^k R_Q - eps^n (R_Q X)^n R_H|` with `R_M = (z - M)^(-1)`.
///
/// `h` must equal `Q + eps X`; the identity is then exact and only solver round-off remains.
pub fn resolvent_expansion_check(
    q: &DiscreteOperator,
    x: &[f64],
    h: &DiscreteOperator,
    eps: f64,
    z: c64,
    n: u32,
) -> Result<f64> {
    let rq = resolvent(q, z)?;
    let rh = resolvent(h, z)?;
    let t = diag_right(rq.as_ref(), x);
    let mut sum = Mat::<c64>::zeros(rq.nrows(), rq.ncols());
    // term = eps^k T^k R_Q; power = eps^k T^k.
    let mut power = Mat::<c64>::identity(rq.nrows(), rq.ncols());
    for _ in 0..n {
        sum += &power * &rq;
        power = (&power * &t) * faer::Scale(c64::new(eps, 0.0));
    }
    let remainder = &power * &rh;
    Ok(max_abs((&rh - &sum - &remainder).as_ref()))
}
