//! Assembly of `H0 = (Dx - B y)^2 + Dy^2 + eps x`, `H = H0 + V`, `Q0 = H0 - eps x`, `Q = Q0 + V`
//! and of the discrete commutator with `d/dx`.
//!
//! The magnetic kinetic term is expanded as `Dx^2 - 2B Y Dx + B^2 Y^2` with `Dx` the centered
//! difference in x. `Y` and `Dx` act on different tensor factors, so the product needs no
//! symmetrization.

use faer::{c64, Mat};

use crate::error::{config, Result};
use crate::grid::{max_abs, Axis, AxisOperator, DiscreteOperator, GridSpec, Role};
use crate::potentials::{eval_potential, PotentialSpec};

/// Magnetic strength `b > 0` and electric strength `eps >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldParams {
    b: f64,
    eps: f64,
}

impl FieldParams {
    pub fn new(b: f64, eps: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(config("b", format!("must be positive, got {b}")));
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(config("eps", format!("must be non-negative, got {eps}")));
        }
        Ok(Self { b, eps })
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.b, eps)
    }
    /// Rejects `eps = 0`, which the trace-formula experiments cannot use.
    pub fn require_electric(&self) -> Result<()> {
        if self.eps > 0.0 {
            Ok(())
        } else {
            Err(config("eps", "must be positive for spectral shift experiments"))
        }
    }
}

/// Writes `(Dx - B y)^2 + Dy^2 + eps x + diag` into a fresh matrix.
fn assemble(grid: &GridSpec, b: f64, eps: f64, extra: Option<&[f64]>) -> Mat<c64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = (grid.hx(), grid.hy());
    let cx = 1.0 / (hx * hx);
    let cy = 1.0 / (hy * hy);
    let mut m = Mat::<c64>::zeros(grid.dim(), grid.dim());
    for j in 0..ny {
        let y = grid.y(j);
        // -2B y Dx contributes -2By * (-i/2h) = iBy/h above the diagonal.
        let cross = b * y / hx;
        for i in 0..nx {
            let k = grid.index(i, j);
            let mut d = 2.0 * cx + 2.0 * cy + b * b * y * y + eps * grid.x(i);
            if let Some(v) = extra {
                d += v[k];
            }
            m[(k, k)] = c64::new(d, 0.0);
            if i + 1 < nx {
                m[(k, k + 1)] = c64::new(-cx, cross);
                m[(k + 1, k)] = c64::new(-cx, -cross);
            }
            if j + 1 < ny {
                m[(k, k + nx)] = c64::new(-cy, 0.0);
                m[(k + nx, k)] = c64::new(-cy, 0.0);
            }
        }
    }
    m
}

/// `H0(B, eps)`.
pub fn assemble_h0(grid: &GridSpec, fields: &FieldParams) -> DiscreteOperator {
    DiscreteOperator::from_parts(assemble(grid, fields.b, fields.eps, None), *grid, Role::H0)
}

/// `Q0 = H0 - eps x`, the pure Landau Hamiltonian.
pub fn assemble_q0(grid: &GridSpec, fields: &FieldParams) -> DiscreteOperator {
    DiscreteOperator::from_parts(assemble(grid, fields.b, 0.0, None), *grid, Role::Q0)
}

/// `Q = Q0 + V`; tagged `Q0` for the zero potential.
pub fn assemble_q(grid: &GridSpec, fields: &FieldParams, spec: &PotentialSpec) -> Result<DiscreteOperator> {
    if spec.is_zero() {
        return Ok(assemble_q0(grid, fields));
    }
    let v = eval_potential(spec, grid)?.v;
    Ok(DiscreteOperator::from_parts(
        assemble(grid, fields.b, 0.0, Some(&v)),
        *grid,
        Role::Q,
    ))
}

/// `H = H0 + V`.
pub fn assemble_h(grid: &GridSpec, fields: &FieldParams, spec: &PotentialSpec) -> Result<DiscreteOperator> {
    let v = eval_potential(spec, grid)?.v;
    Ok(assemble_h_from_diag(grid, fields, &v))
}

/// `H0 + diag(v)` for an already sampled (possibly truncated) potential.
pub fn assemble_h_from_diag(grid: &GridSpec, fields: &FieldParams, v: &[f64]) -> DiscreteOperator {
    assert_eq!(v.len(), grid.dim());
    DiscreteOperator::from_parts(assemble(grid, fields.b, fields.eps, Some(v)), *grid, Role::H)
}

/// The discrete `d/dx = i Dx` as an x-factor operator (real, antisymmetric).
pub fn ddx(grid: &GridSpec) -> AxisOperator {
    let n = grid.nx();
    let c = 1.0 / (2.0 * grid.hx());
    let a = Mat::from_fn(n, n, |r, s| {
        if s == r + 1 {
            c64::new(c, 0.0)
        } else if r == s + 1 {
            c64::new(-c, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    });
    AxisOperator::new(grid, Axis::X, a).expect("factor sized from the grid")
}

/// `[d/dx, M]` formed as an explicit difference of matrix products.
///
/// For `H` its interior rows approximate multiplication by `eps + dV/dx`; the kinetic part
/// contributes only on the two x-walls.
pub fn commutator_dx(op: &DiscreteOperator) -> DiscreteOperator {
    let grid = *op.grid();
    let m = op.matrix();
    let n = grid.dim();
    let nx = grid.nx();
    let c = 1.0 / (2.0 * grid.hx());
    let mut out = Mat::<c64>::zeros(n, n);
    // d/dx M: rows combine the x-neighbours of the row point.
    // M d/dx: columns combine the x-neighbours of the column point.
    for col in 0..n {
        let ci = col % nx;
        for row in 0..n {
            let ri = row % nx;
            let mut acc = c64::new(0.0, 0.0);
            if ri + 1 < nx {
                acc += m[(row + 1, col)] * c;
            }
            if ri > 0 {
                acc -= m[(row - 1, col)] * c;
            }
            if ci > 0 {
                acc -= m[(row, col - 1)] * c;
            }
            if ci + 1 < nx {
                acc += m[(row, col + 1)] * c;
            }
            out[(row, col)] = acc;
        }
    }
    DiscreteOperator::from_parts(out, grid, Role::Generic)
}

/// `[d/dx, x]`: the two-point x-average `A`, the discrete stand-in for the identity.
pub fn averaging_operator(grid: &GridSpec) -> DiscreteOperator {
    let x = crate::grid::position_op(grid, Axis::X, 1);
    commutator_dx(&x)
}

/// `[d/dx, Q0]` at `eps = 0`: the pure wall term of the kinetic part.
pub fn kinetic_wall_commutator(grid: &GridSpec, b: f64) -> Result<DiscreteOperator> {
    let f = FieldParams::new(b, 0.0)?;
    Ok(commutator_dx(&assemble_q0(grid, &f)))
}

/// `max |(C phi)_r - target_r phi_r|` over rows at least `band` points from every wall.
///
/// With a smooth probe `phi` this measures how well `C` acts like multiplication by `target`.
pub fn interior_deviation(c: &DiscreteOperator, target: &[f64], probe: &[f64], band: usize) -> f64 {
    let grid = c.grid();
    let m = c.matrix();
    let n = grid.dim();
    assert_eq!(target.len(), n);
    assert_eq!(probe.len(), n);
    let mut worst = 0.0f64;
    for r in 0..n {
        if !grid.is_interior(r, band) {
            continue;
        }
        let mut acc = c64::new(0.0, 0.0);
        for (s, &p) in probe.iter().enumerate() {
            acc += m[(r, s)] * p;
        }
        worst = worst.max((acc - c64::new(target[r] * probe[r], 0.0)).norm());
    }
    worst
}

/// Largest entry modulus of `M` over rows at least `band` points from every wall.
pub fn interior_max_abs(c: &DiscreteOperator, band: usize) -> f64 {
    let grid = c.grid();
    let m = c.matrix();
    let mut worst = 0.0f64;
    for r in 0..grid.dim() {
        if grid.is_interior(r, band) {
            for s in 0..grid.dim() {
                worst = worst.max(m[(r, s)].norm());
            }
        }
    }
    worst
}

/// Relative Hermiticity check used by assertions and reports.
pub fn is_hermitian(op: &DiscreteOperator) -> bool {
    op.hermiticity_defect() <= 1e-12 || max_abs(op.matrix()) == 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{d1_op, d2_op, diag_matrix, kron_axis, make_grid, position_op};
    use proptest::prelude::*;

    fn kron_h0(grid: &GridSpec, b: f64, eps: f64) -> Mat<c64> {
        let dx = kron_axis(grid, Axis::X, &d1_op(grid.nx(), grid.hx()).unwrap()).unwrap();
        let dxx = kron_axis(grid, Axis::X, &d2_op(grid.nx(), grid.hx()).unwrap()).unwrap();
        let dyy = kron_axis(grid, Axis::Y, &d2_op(grid.ny(), grid.hy()).unwrap()).unwrap();
        let y = position_op(grid, Axis::Y, 1).into_matrix();
        let y2 = position_op(grid, Axis::Y, 2).into_matrix();
        let x = position_op(grid, Axis::X, 1).into_matrix();
        let s = |v: f64| faer::Scale(c64::new(v, 0.0));
        &dxx - (&y * &dx) * s(2.0 * b) + &y2 * s(b * b) + &dyy + &x * s(eps)
    }

    #[test]
    fn matches_kronecker_oracle() {
        let g = make_grid(2.0, 1.5, 9, 8).unwrap();
        let f = FieldParams::new(1.3, 0.7).unwrap();
        let h0 = assemble_h0(&g, &f);
        let oracle = kron_h0(&g, 1.3, 0.7);
        assert!(max_abs((&h0.matrix() - &oracle).as_ref()) < 1e-12);
        assert_eq!(h0.role(), Role::H0);
        assert_eq!(h0.hermiticity_defect(), 0.0);
    }

    #[test]
    fn field_validation() {
        assert!(FieldParams::new(0.0, 1.0).is_err());
        assert!(FieldParams::new(1.0, -0.1).is_err());
        assert!(FieldParams::new(1.0, 0.0).unwrap().require_electric().is_err());
    }

    #[test]
    fn linearity_in_eps_and_v() {
        let g = make_grid(3.0, 3.0, 10, 9).unwrap();
        let f1 = FieldParams::new(1.0, 1.0).unwrap();
        let f0 = FieldParams::new(1.0, 0.0).unwrap();
        let x = position_op(&g, Axis::X, 1).into_matrix();
        let d = &assemble_h0(&g, &f1).matrix() - &x;
        // Equal up to the rounding of (a + x) - x.
        assert!(max_abs((&d - &assemble_h0(&g, &f0).matrix()).as_ref()) <= 1e-14);

        let spec = PotentialSpec::gaussian(0.5, 2.0, 3, 0.5).unwrap();
        let f = FieldParams::new(1.0, 0.5).unwrap();
        let h = assemble_h(&g, &f, &spec).unwrap();
        let q = assemble_q(&g, &f, &spec).unwrap();
        let hq = &h.matrix() - &q.matrix();
        let ex = &x * faer::Scale(c64::new(0.5, 0.0));
        assert!(max_abs((&hq - &ex).as_ref()) < 1e-13);
        assert_eq!(q.role(), Role::Q);

        let v = g.sample(|x, y| spec.value(x, y));
        let qq0 = &q.matrix() - &assemble_q0(&g, &f).matrix();
        assert!(max_abs((&qq0 - &diag_matrix(&v)).as_ref()) < 1e-13);

        let zero = assemble_q(&g, &f, &PotentialSpec::zero()).unwrap();
        assert_eq!(zero.role(), Role::Q0);
        assert_eq!(zero.matrix(), assemble_q0(&g, &f).matrix());
        let h_zero = assemble_h(&g, &f, &PotentialSpec::zero()).unwrap();
        assert_eq!(h_zero.matrix(), assemble_h0(&g, &f).matrix());

        let h2 = assemble_h(&g, &f, &spec.with_amplitude(1.0)).unwrap();
        let lin = &h2.matrix() - &assemble_h0(&g, &f).matrix();
        let v1 = g.sample(|x, y| spec.with_amplitude(1.0).value(x, y));
        assert!(max_abs((&lin - &diag_matrix(&v1)).as_ref()) < 1e-13);
    }

    #[test]
    fn landau_ground_state_and_attractive_impurity() {
        // Small-grid oracle; the fine-grid version is an acceptance criterion.
        let g = make_grid(5.0, 5.0, 31, 31).unwrap();
        let f = FieldParams::new(1.0, 0.0).unwrap();
        let q0 = assemble_q0(&g, &f);
        let ev0 = q0.matrix().self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        assert!((ev0[0] - 1.0).abs() < 0.1, "{}", ev0[0]);
        let spec = PotentialSpec::gaussian(-0.4, 2.0, 3, 0.5).unwrap();
        let q = assemble_q(&g, &f, &spec).unwrap();
        let ev = q.matrix().self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        assert!(ev[0] < ev0[0] - 0.1, "{} vs {}", ev[0], ev0[0]);
    }

    #[test]
    fn commutator_matches_product_definition() {
        let g = make_grid(2.0, 2.0, 9, 8).unwrap();
        let f = FieldParams::new(1.0, 0.4).unwrap();
        let spec = PotentialSpec::gaussian(0.5, 1.5, 3, 0.5).unwrap();
        let h = assemble_h(&g, &f, &spec).unwrap();
        let c = commutator_dx(&h);
        let d = ddx(&g).to_dense();
        let want = &d * &h.matrix() - &h.matrix() * &d;
        assert!(max_abs((&c.matrix() - &want).as_ref()) < 1e-12);
        assert!(c.hermiticity_defect() < 1e-14);
    }

    #[test]
    fn free_commutator_is_eps_times_average() {
        let g = make_grid(3.0, 3.0, 13, 11).unwrap();
        let eps = 0.6;
        let f = FieldParams::new(1.0, eps).unwrap();
        let c = commutator_dx(&assemble_h0(&g, &f));
        let a = averaging_operator(&g);
        for r in 0..g.dim() {
            let (i, _) = g.point(r);
            if i == 0 || i + 1 == g.nx() {
                continue;
            }
            for s in 0..g.dim() {
                let want = a.matrix()[(r, s)] * eps;
                assert!((c.matrix()[(r, s)] - want).norm() < 1e-12);
            }
            if g.is_interior(r, 1) {
                assert!((a.matrix()[(r, r - 1)] - c64::new(0.5, 0.0)).norm() < 1e-15);
                assert!((a.matrix()[(r, r + 1)] - c64::new(0.5, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn kinetic_commutator_lives_on_x_walls() {
        let g = make_grid(2.0, 2.0, 12, 10).unwrap();
        let k = kinetic_wall_commutator(&g, 1.7).unwrap();
        let h = g.hx();
        for r in 0..g.dim() {
            for s in 0..g.dim() {
                let v = k.matrix()[(r, s)];
                let (i, _) = g.point(r);
                if r != s {
                    assert!(v.norm() < 1e-9, "off-diagonal {r},{s}: {v}");
                } else if i == 0 {
                    assert!((v.re + 1.0 / h.powi(3)).abs() < 1e-9);
                } else if i + 1 == g.nx() {
                    assert!((v.re - 1.0 / h.powi(3)).abs() < 1e-9);
                } else {
                    assert!(v.norm() < 1e-9);
                }
            }
        }
        assert_eq!(interior_max_abs(&k, 1), 0.0);
    }

    fn deviation(n: usize) -> f64 {
        let g = make_grid(4.0, 4.0, n, n).unwrap();
        let eps = 0.5;
        let f = FieldParams::new(1.0, eps).unwrap();
        let spec = PotentialSpec::gaussian(0.5, 2.0, 3, 0.5).unwrap();
        let c = commutator_dx(&assemble_h(&g, &f, &spec).unwrap());
        let target = g.sample(|x, y| eps + spec.dx(x, y));
        let probe = g.sample(|x, y| (-(x * x + y * y) / 4.0).exp());
        interior_deviation(&c, &target, &probe, 2)
    }

    #[test]
    fn commutator_converges_to_eps_plus_dxv() {
        let (e1, e2, e3) = (deviation(13), deviation(25), deviation(49));
        let o1 = (e1 / e2).log2() / (24.0f64 / 12.0).log2();
        let o2 = (e2 / e3).log2() / (48.0f64 / 24.0).log2();
        assert!(o1 >= 1.8 && o2 >= 1.8, "{e1} {e2} {e3}: {o1} {o2}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn assembled_operators_are_hermitian(b in 0.1f64..3.0, eps in 0.0f64..2.0, a in -2.0f64..2.0, nx in 8usize..11, ny in 8usize..11) {
            let g = make_grid(3.0, 2.0, nx, ny).unwrap();
            let f = FieldParams::new(b, eps).unwrap();
            let spec = PotentialSpec::gaussian(a, 1.5, 3, 0.5).unwrap();
            for op in [assemble_h0(&g, &f), assemble_q0(&g, &f), assemble_h(&g, &f, &spec).unwrap(), assemble_q(&g, &f, &spec).unwrap()] {
                prop_assert!(op.hermiticity_defect() <= 1e-12);
                prop_assert!(is_hermitian(&op));
                let c = commutator_dx(&op);
                prop_assert!(c.hermiticity_defect() <= 1e-12);
            }
        }
    }
}
