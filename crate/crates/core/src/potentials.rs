//! Analytic potential families with exact x-derivatives and decay certificates.
//!
//! Two envelopes are checked on the grid:
//!
//! * the trace-formula class, `|V|, |dV/dx| <= C (1+|x|)^(-2-d) (1+|y|)^(-1-d)`;
//! * the scaling class, `|d^k V/dx^k| <= C_k (1+|x|)^(-n-d-k) (1+|y|)^(-2-d)` for `k = 0, 1, 2`.
//!
//! Every family ships closed-form constants for both, so certification is a sampled
//! ratio test against known bounds rather than a fit.

use std::f64::consts::SQRT_2;

use crate::error::{config, Error, Result};
use crate::grid::GridSpec;

/// Shape of the potential. Amplitude and decay data live on [`PotentialSpec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Zero,
    /// `(1+x^2)^(-alpha/2) (1+y^2)^(-beta/2)`.
    SeparablePower {
        alpha: f64,
        beta: f64,
    },
    /// `exp(-(x^2+y^2)/sigma^2)`.
    Gaussian {
        sigma: f64,
    },
    /// `exp(1 - 1/(1-r^2/rho^2))` for `r < rho`, zero outside.
    CompactBump {
        rho: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSpec {
    family: Family,
    amplitude: f64,
    decay_n: u32,
    decay_delta: f64,
}

impl PotentialSpec {
    pub fn zero() -> Self {
        Self {
            family: Family::Zero,
            amplitude: 0.0,
            decay_n: 2,
            decay_delta: 1.0,
        }
    }

    /// `a (1+x^2)^(-(n+d)/2) (1+y^2)^(-(2+d)/2)`, which sits exactly on the
    /// scaling envelope with exponent `n`.
    pub fn separable_power(amplitude: f64, n: u32, delta: f64) -> Result<Self> {
        Self::new(
            Family::SeparablePower {
                alpha: n as f64 + delta,
                beta: 2.0 + delta,
            },
            amplitude,
            n,
            delta,
        )
    }

    pub fn gaussian(amplitude: f64, sigma: f64, n: u32, delta: f64) -> Result<Self> {
        Self::new(Family::Gaussian { sigma }, amplitude, n, delta)
    }

    pub fn compact_bump(amplitude: f64, rho: f64, n: u32, delta: f64) -> Result<Self> {
        Self::new(Family::CompactBump { rho }, amplitude, n, delta)
    }

    /// General constructor; validates every parameter.
    pub fn new(family: Family, amplitude: f64, n: u32, delta: f64) -> Result<Self> {
        if !amplitude.is_finite() {
            return Err(config("amplitude", "must be finite"));
        }
        if n < 2 {
            return Err(config("n", format!("must be at least 2, got {n}")));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(config("delta", format!("must be positive, got {delta}")));
        }
        match family {
            Family::Zero => {}
            Family::SeparablePower { alpha, beta } => {
                if !(alpha.is_finite() && alpha >= 2.0 + delta) {
                    return Err(config("alpha", format!("must be at least 2 + delta, got {alpha}")));
                }
                if !(beta.is_finite() && beta >= 1.0 + delta) {
                    return Err(config("beta", format!("must be at least 1 + delta, got {beta}")));
                }
            }
            Family::Gaussian { sigma } => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(config("sigma", format!("must be positive, got {sigma}")));
                }
            }
            Family::CompactBump { rho } => {
                if !(rho.is_finite() && rho > 0.0) {
                    return Err(config("rho", format!("must be positive, got {rho}")));
                }
            }
        }
        Ok(Self {
            family,
            amplitude: if family == Family::Zero { 0.0 } else { amplitude },
            decay_n: n,
            decay_delta: delta,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
    pub fn decay_n(&self) -> u32 {
        self.decay_n
    }
    pub fn decay_delta(&self) -> f64 {
        self.decay_delta
    }
    pub fn is_zero(&self) -> bool {
        self.family == Family::Zero || self.amplitude == 0.0
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self {
            amplitude: if self.family == Family::Zero { 0.0 } else { amplitude },
            ..*self
        }
    }

    /// Same shape, tested against a different scaling exponent.
    pub fn with_decay(&self, n: u32, delta: f64) -> Result<Self> {
        Self::new(self.family, self.amplitude, n, delta)
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.amplitude * self.shape(x, y)[0]
    }
    pub fn dx(&self, x: f64, y: f64) -> f64 {
        self.amplitude * self.shape(x, y)[1]
    }
    pub fn dxx(&self, x: f64, y: f64) -> f64 {
        self.amplitude * self.shape(x, y)[2]
    }

    /// `[g, dg/dx, d^2g/dx^2]` for the unit-amplitude shape `g`.
    fn shape(&self, x: f64, y: f64) -> [f64; 3] {
        match self.family {
            Family::Zero => [0.0; 3],
            Family::SeparablePower { alpha, beta } => {
                let px = 1.0 + x * x;
                let g = px.powf(-alpha / 2.0) * (1.0 + y * y).powf(-beta / 2.0);
                let d1 = -alpha * x / px;
                let d2 = (-alpha + alpha * (alpha + 2.0) * x * x / px) / px;
                [g, d1 * g, d2 * g]
            }
            Family::Gaussian { sigma } => {
                let s2 = sigma * sigma;
                let g = (-(x * x + y * y) / s2).exp();
                let d1 = -2.0 * x / s2;
                let d2 = 4.0 * x * x / (s2 * s2) - 2.0 / s2;
                [g, d1 * g, d2 * g]
            }
            Family::CompactBump { rho } => {
                let r2 = rho * rho;
                let u = (x * x + y * y) / r2;
                if u >= 1.0 {
                    return [0.0; 3];
                }
                let v = 1.0 / (1.0 - u);
                let g = (1.0 - v).exp();
                // dg/du = -v^2 g, d^2g/du^2 = (v^4 - 2v^3) g.
                let gu = -v * v * g;
                let guu = (v.powi(4) - 2.0 * v.powi(3)) * g;
                let ux = 2.0 * x / r2;
                [g, gu * ux, guu * ux * ux + gu * 2.0 / r2]
            }
        }
    }

    /// Declared constants `[C_V, C_dV]` for the trace-formula envelope.
    pub fn trace_class_constants(&self) -> [f64; 2] {
        let d = self.decay_delta;
        let c = self.constants_for(2.0 + d, 1.0 + d);
        [c[0], c[1]]
    }

    /// Declared constants `[C_0, C_1, C_2]` for the scaling envelope with exponent `n`.
    pub fn scaling_constants(&self) -> [f64; 3] {
        let d = self.decay_delta;
        self.constants_for(self.decay_n as f64 + d, 2.0 + d)
    }

    /// Bounds on `|d^k g/dx^k| (1+|x|)^(mx+k) (1+|y|)^my`, times `|a|`.
    fn constants_for(&self, mx: f64, my: f64) -> [f64; 3] {
        let a = self.amplitude.abs();
        match self.family {
            Family::Zero => [0.0; 3],
            Family::SeparablePower { alpha, beta } => {
                // (1+x^2)^(-1/2) <= sqrt2 / (1+|x|). The constants are the shape's own,
                // so an envelope steeper than (alpha, beta) fails at large |x|.
                let cy = SQRT_2.powf(beta);
                [
                    a * cy * SQRT_2.powf(alpha),
                    a * cy * alpha * SQRT_2.powf(alpha + 1.0),
                    a * cy * alpha * (alpha + 3.0) * SQRT_2.powf(alpha + 2.0),
                ]
            }
            Family::Gaussian { sigma } => {
                let s2 = sigma * sigma;
                let my_sup = poly_gauss_sup(my, sigma);
                [
                    a * poly_gauss_sup(mx, sigma) * my_sup,
                    a * 2.0 / s2 * poly_gauss_sup(mx + 2.0, sigma) * my_sup,
                    a * (4.0 / (s2 * s2) + 2.0 / s2) * poly_gauss_sup(mx + 4.0, sigma) * my_sup,
                ]
            }
            Family::CompactBump { rho } => {
                // sup |g'| = 4/e at v = 2; sup |g''| at v = 3 + sqrt 3.
                let g1 = 4.0 / std::f64::consts::E;
                let v = 3.0 + 3f64.sqrt();
                let g2 = (v.powi(4) - 2.0 * v.powi(3)) * (1.0 - v).exp();
                let r2 = rho * rho;
                let w = |k: f64| (1.0 + rho).powf(mx + k + my);
                [
                    a * w(0.0),
                    a * g1 * 2.0 / rho * w(1.0),
                    a * (4.0 * g2 + 2.0 * g1) / r2 * w(2.0),
                ]
            }
        }
    }
}

/// `sup_{t >= 0} (1+t)^m exp(-t^2/sigma^2)`, attained where `2t(1+t) = m sigma^2`.
fn poly_gauss_sup(m: f64, sigma: f64) -> f64 {
    let t = (-1.0 + (1.0 + 2.0 * m * sigma * sigma).sqrt()) / 2.0;
    (1.0 + t).powf(m) * (-t * t / (sigma * sigma)).exp()
}

/// One envelope check: the worst sampled ratio against its declared constant.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCheck {
    pub label: &'static str,
    pub max_ratio: f64,
    pub constant: f64,
    pub worst: (f64, f64),
}

impl EnvelopeCheck {
    pub fn pass(&self) -> bool {
        self.max_ratio <= self.constant
    }
    fn pass_with_slack(&self) -> bool {
        self.max_ratio <= self.constant * (1.0 + CERTIFICATE_SLACK)
    }
}

/// Relative slack `eval_potential` grants before refusing a potential.
pub const CERTIFICATE_SLACK: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    /// `V` and `dV/dx` against the trace-formula envelope.
    pub trace_class: [EnvelopeCheck; 2],
    /// `d^k V/dx^k`, `k = 0, 1, 2`, against the scaling envelope.
    pub scaling: [EnvelopeCheck; 3],
}

impl CertificateReport {
    pub fn pass(&self) -> bool {
        self.checks().all(EnvelopeCheck::pass)
    }
    pub fn checks(&self) -> impl Iterator<Item = &EnvelopeCheck> {
        self.trace_class.iter().chain(self.scaling.iter())
    }
}

/// Samples every envelope ratio over the grid. Never fails.
pub fn certify_decay(spec: &PotentialSpec, grid: &GridSpec) -> CertificateReport {
    let d = spec.decay_delta;
    let n = spec.decay_n as f64;
    let ct = spec.trace_class_constants();
    let cs = spec.scaling_constants();
    let mut trace_class = [check("V, trace class", ct[0]), check("dV/dx, trace class", ct[1])];
    let mut scaling = [
        check("V, scaling", cs[0]),
        check("dV/dx, scaling", cs[1]),
        check("d2V/dx2, scaling", cs[2]),
    ];
    for k in 0..grid.dim() {
        let (x, y) = grid.coords(k);
        let g = [spec.value(x, y), spec.dx(x, y), spec.dxx(x, y)];
        let px = 1.0 + x.abs();
        let py = 1.0 + y.abs();
        let trace_env = px.powf(-2.0 - d) * py.powf(-1.0 - d);
        for (c, v) in trace_class.iter_mut().zip(g) {
            update(c, v.abs() / trace_env, x, y);
        }
        for (kk, (c, v)) in scaling.iter_mut().zip(g).enumerate() {
            let env = px.powf(-n - d - kk as f64) * py.powf(-2.0 - d);
            update(c, v.abs() / env, x, y);
        }
    }
    CertificateReport { trace_class, scaling }
}

fn check(label: &'static str, constant: f64) -> EnvelopeCheck {
    EnvelopeCheck {
        label,
        max_ratio: 0.0,
        constant,
        worst: (0.0, 0.0),
    }
}

fn update(c: &mut EnvelopeCheck, ratio: f64, x: f64, y: f64) {
    if ratio > c.max_ratio {
        c.max_ratio = ratio;
        c.worst = (x, y);
    }
}

/// `V`, `dV/dx`, `d^2V/dx^2` sampled in flat grid order, with the certificate that admitted them.
#[derive(Debug, Clone)]
pub struct PotentialFields {
    pub v: Vec<f64>,
    pub dx: Vec<f64>,
    pub dxx: Vec<f64>,
    pub certificate: CertificateReport,
}

/// Samples the potential and enforces the decay certificate.
pub fn eval_potential(spec: &PotentialSpec, grid: &GridSpec) -> Result<PotentialFields> {
    let certificate = certify_decay(spec, grid);
    if let Some(bad) = certificate.checks().find(|c| !c.pass_with_slack()) {
        return Err(Error::DecayCertificate {
            envelope: bad.label,
            ratio: bad.max_ratio,
            constant: bad.constant,
            x: bad.worst.0,
            y: bad.worst.1,
        });
    }
    Ok(PotentialFields {
        v: grid.sample(|x, y| spec.value(x, y)),
        dx: grid.sample(|x, y| spec.dx(x, y)),
        dxx: grid.sample(|x, y| spec.dxx(x, y)),
        certificate,
    })
}

/// Largest `|dV/dx|` over the grid.
pub fn sup_dx(spec: &PotentialSpec, grid: &GridSpec) -> f64 {
    grid.sample(|x, y| spec.dx(x, y).abs()).into_iter().fold(0.0, f64::max)
}

/// Rescales the amplitude so that `sup |dV/dx| <= eps / 2` on the grid.
pub fn clamp_for_positivity(spec: &PotentialSpec, grid: &GridSpec, eps: f64) -> PotentialSpec {
    let s = sup_dx(spec, grid);
    if s <= eps / 2.0 {
        return *spec;
    }
    let factor = eps / 2.0 / s;
    // Shrink by one ulp-scale margin so the bound survives rounding.
    spec.with_amplitude(spec.amplitude * factor * (1.0 - 1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;

    #[test]
    fn zero_family_is_identically_zero() {
        let g = make_grid(4.0, 4.0, 9, 9).unwrap();
        let f = eval_potential(&PotentialSpec::zero(), &g).unwrap();
        assert!(f.v.iter().chain(&f.dx).chain(&f.dxx).all(|&v| v == 0.0));
        let c = certify_decay(&PotentialSpec::zero(), &g);
        assert!(c.pass());
        assert!(c.checks().all(|c| c.max_ratio == 0.0));
    }

    #[test]
    fn separable_power_normalization_and_closed_form() {
        let s = PotentialSpec::separable_power(1.0, 3, 0.5).unwrap();
        assert_eq!(s.value(0.0, 0.0), 1.0);
        let (x, y): (f64, f64) = (1.3, -0.7);
        let want = (1.0 + x * x).powf(-1.75) * (1.0 + y * y).powf(-1.25);
        assert!((s.value(x, y) - want).abs() < 1e-15);
    }

    #[test]
    fn gaussian_derivative_example() {
        let s = PotentialSpec::gaussian(0.5, 2.0, 3, 0.5).unwrap();
        let (x, y) = (2.0, 0.0);
        assert!((s.dx(x, y) + 0.5 * std::f64::consts::E.recip()).abs() < 1e-15);
        assert!((s.dx(x, y) + 0.1839).abs() < 5e-5);
        for (x, y) in [(0.3, 1.0), (-2.5, 0.4), (1.0, -3.0)] {
            assert!((s.dx(x, y) + x / 2.0 * s.value(x, y)).abs() < 1e-15);
        }
    }

    fn fd_probe(s: &PotentialSpec, g: &GridSpec) -> (f64, f64) {
        // 100 grid points picked by a fixed stride walk.
        let step = 1e-4;
        let mut worst = (0.0f64, 0.0f64);
        for t in 0..100usize {
            let k = (t * 7919) % g.dim();
            let (x, y) = g.coords(k);
            let d1 = (s.value(x + step, y) - s.value(x - step, y)) / (2.0 * step);
            let d2 = (s.dx(x + step, y) - s.dx(x - step, y)) / (2.0 * step);
            worst.0 = worst.0.max((d1 - s.dx(x, y)).abs());
            worst.1 = worst.1.max((d2 - s.dxx(x, y)).abs());
        }
        worst
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let g = make_grid(6.0, 6.0, 41, 41).unwrap();
        for s in [
            PotentialSpec::separable_power(1.0, 3, 0.5).unwrap(),
            PotentialSpec::separable_power(-0.8, 4, 0.3).unwrap(),
            PotentialSpec::gaussian(0.5, 2.0, 3, 0.5).unwrap(),
            PotentialSpec::gaussian(-0.4, 1.2, 5, 0.5).unwrap(),
            PotentialSpec::compact_bump(0.7, 3.5, 3, 0.5).unwrap(),
        ] {
            let (e1, e2) = fd_probe(&s, &g);
            assert!(e1 < 1e-6, "{s:?}: {e1}");
            assert!(e2 < 1e-6, "{s:?}: {e2}");
        }
    }

    #[test]
    fn symmetric_families_are_exactly_even() {
        let g = make_grid(5.0, 4.0, 21, 17).unwrap();
        for s in [
            PotentialSpec::separable_power(1.0, 3, 0.5).unwrap(),
            PotentialSpec::gaussian(0.5, 2.0, 3, 0.5).unwrap(),
        ] {
            let f = eval_potential(&s, &g).unwrap();
            for j in 0..g.ny() {
                for i in 0..g.nx() {
                    let v = f.v[g.index(i, j)];
                    assert_eq!(v, f.v[g.index(g.nx() - 1 - i, j)]);
                    assert_eq!(v, f.v[g.index(i, g.ny() - 1 - j)]);
                }
            }
        }
    }

    #[test]
    fn certificates_pass_for_declared_exponents() {
        let g = make_grid(20.0, 20.0, 81, 81).unwrap();
        for n in 2..=6 {
            for s in [
                PotentialSpec::separable_power(1.0, n, 0.5).unwrap(),
                PotentialSpec::gaussian(0.5, 2.0, n, 0.5).unwrap(),
                PotentialSpec::gaussian(-2.0, 0.7, n, 0.1).unwrap(),
                PotentialSpec::compact_bump(-1.5, 2.5, n, 0.5).unwrap(),
            ] {
                let c = certify_decay(&s, &g);
                assert!(c.pass(), "{s:?}: {c:?}");
                assert!(eval_potential(&s, &g).is_ok());
            }
        }
    }

    #[test]
    fn separable_power_certificate_is_nearly_tight() {
        // The sqrt2 bound is attained at |x| = 1, so the ratio sits well above half the constant.
        let g = make_grid(4.0, 4.0, 41, 41).unwrap();
        let c = certify_decay(&PotentialSpec::separable_power(1.0, 3, 0.5).unwrap(), &g);
        let r = c.scaling[0].max_ratio / c.scaling[0].constant;
        assert!(r > 0.9 && r <= 1.0, "{r}");
    }

    #[test]
    fn separable_power_fails_a_steeper_envelope() {
        let g = make_grid(30.0, 4.0, 121, 9).unwrap();
        let s = PotentialSpec::separable_power(1.0, 3, 0.5).unwrap();
        // Same shape tested as if it decayed like n = 5.
        let steep = s.with_decay(5, 0.5).unwrap();
        let c = certify_decay(&steep, &g);
        assert!(!c.pass());
        assert!(c.scaling[0].worst.0.abs() > 20.0, "{:?}", c.scaling[0]);
        let err = eval_potential(&steep, &g).unwrap_err();
        assert!(matches!(err, Error::DecayCertificate { .. }), "{err}");
    }

    #[test]
    fn gaussian_constant_is_the_true_supremum() {
        let sigma = 1.7;
        let m = 3.5;
        let best = (0..200_000)
            .map(|k| {
                let t = k as f64 * 1e-4;
                (1.0 + t).powf(m) * (-t * t / (sigma * sigma)).exp()
            })
            .fold(0.0, f64::max);
        let sup = poly_gauss_sup(m, sigma);
        assert!(sup >= best && sup - best < 1e-6 * sup);
    }

    #[test]
    fn compact_bump_vanishes_outside_support() {
        let s = PotentialSpec::compact_bump(2.0, 1.5, 3, 0.5).unwrap();
        assert_eq!(s.value(0.0, 0.0), 2.0);
        assert_eq!(s.value(1.2, 0.9), 0.0);
        assert_eq!(s.dx(1.5, 0.0), 0.0);
        assert!(s.value(1.0, 0.0) > 0.0);
    }

    #[test]
    fn clamping_enforces_positivity_margin() {
        let g = make_grid(6.0, 6.0, 31, 31).unwrap();
        let s = PotentialSpec::gaussian(-3.0, 1.5, 3, 0.5).unwrap();
        let eps = 0.4;
        assert!(sup_dx(&s, &g) > eps / 2.0);
        let c = clamp_for_positivity(&s, &g, eps);
        assert!(sup_dx(&c, &g) <= eps / 2.0);
        assert!(sup_dx(&c, &g) > 0.49 * eps);
        let small = PotentialSpec::gaussian(0.01, 1.5, 3, 0.5).unwrap();
        assert_eq!(clamp_for_positivity(&small, &g, eps), small);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PotentialSpec::separable_power(1.0, 1, 0.5).is_err());
        assert!(PotentialSpec::gaussian(1.0, 0.0, 3, 0.5).is_err());
        assert!(PotentialSpec::gaussian(1.0, 1.0, 3, 0.0).is_err());
        assert!(PotentialSpec::compact_bump(f64::NAN, 1.0, 3, 0.5).is_err());
        assert!(PotentialSpec::new(Family::SeparablePower { alpha: 1.0, beta: 3.0 }, 1.0, 2, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn amplitude_scales_fields(c in -4.0f64..4.0, x in -8.0f64..8.0, y in -8.0f64..8.0, sigma in 0.5f64..3.0) {
            let base = PotentialSpec::gaussian(1.0, sigma, 3, 0.5).unwrap();
            let scaled = base.with_amplitude(c);
            // a * g with a = 1 is g itself, so c * g is bit-identical to (c * 1) * g.
            prop_assert_eq!(scaled.value(x, y), c * base.value(x, y));
            prop_assert_eq!(scaled.dx(x, y), c * base.dx(x, y));
            prop_assert_eq!(scaled.dxx(x, y), c * base.dxx(x, y));
        }

        #[test]
        fn power_of_two_scaling_is_exact(k in -3i32..4, x in -8.0f64..8.0, y in -8.0f64..8.0) {
            let base = PotentialSpec::separable_power(0.7, 3, 0.5).unwrap();
            let c = 2f64.powi(k);
            let scaled = base.with_amplitude(0.7 * c);
            prop_assert_eq!(scaled.value(x, y), c * base.value(x, y));
            prop_assert_eq!(scaled.dxx(x, y), c * base.dxx(x, y));
        }

        #[test]
        fn certificates_hold_off_grid(x in -40.0f64..40.0, y in -40.0f64..40.0, n in 2u32..6, a in -3.0f64..3.0) {
            for s in [
                PotentialSpec::separable_power(a, n, 0.4).unwrap(),
                PotentialSpec::gaussian(a, 1.3, n, 0.4).unwrap(),
                PotentialSpec::compact_bump(a, 2.0, n, 0.4).unwrap(),
            ] {
                let cs = s.scaling_constants();
                let d = s.decay_delta();
                let px = 1.0 + x.abs();
                let py = 1.0 + y.abs();
                let vals = [s.value(x, y), s.dx(x, y), s.dxx(x, y)];
                for (k, v) in vals.iter().enumerate() {
                    let env = px.powf(-(n as f64) - d - k as f64) * py.powf(-2.0 - d);
                    prop_assert!(v.abs() <= cs[k] * env * (1.0 + 1e-12), "{:?} k={} {} > {}", s, k, v.abs(), cs[k] * env);
                }
            }
        }
    }
}
