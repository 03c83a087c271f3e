//! Truncated rectangular domain, 1D difference stencils and their tensor embeddings.
//!
//! Grid point `(i, j)` (x index `i`, y index `j`) lives at flat index `j * nx + i`,
//! so x runs fastest. Every 2D operator is a dense `N x N` complex matrix with
//! `N = nx * ny`.

use faer::{c64, Mat, MatRef};

use crate::error::{config, Result};

/// Coordinate axis of the plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

/// The domain `[-lx, lx] x [-ly, ly]` sampled by `nx x ny` points, walls included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

/// Smallest point count accepted on either axis.
pub const MIN_POINTS: usize = 8;

/// Builds a grid from half-lengths and point counts.
pub fn make_grid(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<GridSpec> {
    check_length("lx", lx)?;
    check_length("ly", ly)?;
    check_count("nx", nx)?;
    check_count("ny", ny)?;
    Ok(GridSpec {
        lx,
        ly,
        nx,
        ny,
        hx: 2.0 * lx / (nx - 1) as f64,
        hy: 2.0 * ly / (ny - 1) as f64,
    })
}

fn check_length(field: &'static str, l: f64) -> Result<()> {
    if l.is_finite() && l > 0.0 {
        Ok(())
    } else {
        Err(config(field, format!("must be a positive length, got {l}")))
    }
}

fn check_count(field: &'static str, n: usize) -> Result<()> {
    if n >= MIN_POINTS {
        Ok(())
    } else {
        Err(config(field, format!("must be at least {MIN_POINTS}, got {n}")))
    }
}

fn check_spacing(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(config("h", format!("must be a positive spacing, got {h}")))
    }
}

impl GridSpec {
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }
    /// The larger of the two spacings.
    pub fn h_max(&self) -> f64 {
        self.hx.max(self.hy)
    }
    /// Total dimension `nx * ny`.
    pub fn dim(&self) -> usize {
        self.nx * self.ny
    }
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
    /// Inverse of [`GridSpec::index`].
    pub fn point(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    // Written so that x(i) == -x(n - 1 - i) bit for bit.
    pub fn x(&self, i: usize) -> f64 {
        symmetric_coord(self.lx, self.nx, i)
    }
    pub fn y(&self, j: usize) -> f64 {
        symmetric_coord(self.ly, self.ny, j)
    }
    /// Coordinates `(x, y)` of flat index `k`.
    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.point(k);
        (self.x(i), self.y(j))
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }
    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.y(j)).collect()
    }

    /// Point count and spacing along `axis`.
    pub fn axis(&self, axis: Axis) -> (usize, f64) {
        match axis {
            Axis::X => (self.nx, self.hx),
            Axis::Y => (self.ny, self.hy),
        }
    }

    /// True when `k` is at least `band` points away from every wall.
    pub fn is_interior(&self, k: usize, band: usize) -> bool {
        let (i, j) = self.point(k);
        i >= band && j >= band && i + band < self.nx && j + band < self.ny
    }

    /// Applies `f(x, y)` at every grid point, in flat order.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.dim())
            .map(|k| {
                let (x, y) = self.coords(k);
                f(x, y)
            })
            .collect()
    }
}

fn symmetric_coord(l: f64, n: usize, i: usize) -> f64 {
    let m = (n - 1) as f64;
    l * ((2.0 * i as f64 - m) / m)
}

/// Centered difference for `Dx = -i d/dx` with Dirichlet truncation.
pub fn d1_op(n: usize, h: f64) -> Result<Mat<c64>> {
    check_count("n", n)?;
    check_spacing(h)?;
    let c = 1.0 / (2.0 * h);
    Ok(Mat::from_fn(n, n, |r, s| {
        if s == r + 1 {
            c64::new(0.0, -c)
        } else if r == s + 1 {
            c64::new(0.0, c)
        } else {
            c64::new(0.0, 0.0)
        }
    }))
}

/// Three-point stencil for `-d^2/dx^2` with Dirichlet truncation.
pub fn d2_op(n: usize, h: f64) -> Result<Mat<c64>> {
    check_count("n", n)?;
    check_spacing(h)?;
    let c = 1.0 / (h * h);
    Ok(Mat::from_fn(n, n, |r, s| {
        if r == s {
            c64::new(2.0 * c, 0.0)
        } else if r.abs_diff(s) == 1 {
            c64::new(-c, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    }))
}

/// Role an operator plays in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    H0,
    H,
    Q0,
    Q,
    Generic,
}

/// A Hermitian matrix on a grid.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    matrix: Mat<c64>,
    grid: GridSpec,
    role: Role,
}

impl DiscreteOperator {
    /// Wraps a matrix; the dimension must match the grid.
    pub fn new(matrix: Mat<c64>, grid: GridSpec, role: Role) -> Result<Self> {
        if matrix.nrows() != grid.dim() || matrix.ncols() != grid.dim() {
            return Err(config(
                "matrix",
                format!(
                    "is {}x{} but the grid has dimension {}",
                    matrix.nrows(),
                    matrix.ncols(),
                    grid.dim()
                ),
            ));
        }
        Ok(Self { matrix, grid, role })
    }

    pub(crate) fn from_parts(matrix: Mat<c64>, grid: GridSpec, role: Role) -> Self {
        debug_assert_eq!(matrix.nrows(), grid.dim());
        Self { matrix, grid, role }
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }
    pub fn into_matrix(self) -> Mat<c64> {
        self.matrix
    }
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
    pub fn role(&self) -> Role {
        self.role
    }
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        max_abs(self.matrix.as_ref())
    }

    /// `max |M - M*| / max |M|`, or 0 for the zero matrix.
    pub fn hermiticity_defect(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            0.0
        } else {
            hermiticity_defect(self.matrix.as_ref()) / scale
        }
    }
}

/// Multiplication by `x^power` or `y^power`.
pub fn position_op(grid: &GridSpec, axis: Axis, power: i32) -> DiscreteOperator {
    let d = position_diag(grid, axis, power);
    DiscreteOperator::from_parts(diag_matrix(&d), *grid, Role::Generic)
}

/// Diagonal of [`position_op`].
pub fn position_diag(grid: &GridSpec, axis: Axis, power: i32) -> Vec<f64> {
    grid.sample(|x, y| match axis {
        Axis::X => x.powi(power),
        Axis::Y => y.powi(power),
    })
}

pub fn diag_matrix(d: &[f64]) -> Mat<c64> {
    let n = d.len();
    let mut m = Mat::zeros(n, n);
    for (k, &v) in d.iter().enumerate() {
        m[(k, k)] = c64::new(v, 0.0);
    }
    m
}

/// Largest entry modulus of `m`.
pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut best = 0.0f64;
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            best = best.max(m[(r, c)].norm());
        }
    }
    best
}

/// Absolute `max |M - M*|`.
pub fn hermiticity_defect(m: MatRef<'_, c64>) -> f64 {
    let mut best = 0.0f64;
    for c in 0..m.ncols() {
        for r in 0..=c.min(m.nrows() - 1) {
            best = best.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    best
}

/// A 1D matrix acting on one tensor factor: `I_y (x) A` for x, `A (x) I_x` for y.
#[derive(Debug, Clone)]
pub struct AxisOperator {
    axis: Axis,
    nx: usize,
    ny: usize,
    a: Mat<c64>,
}

impl AxisOperator {
    pub fn new(grid: &GridSpec, axis: Axis, a: Mat<c64>) -> Result<Self> {
        let (n, _) = grid.axis(axis);
        if a.nrows() != n || a.ncols() != n {
            return Err(config(
                "axis operator",
                format!("factor is {}x{}, axis has {n} points", a.nrows(), a.ncols()),
            ));
        }
        Ok(Self {
            axis,
            nx: grid.nx(),
            ny: grid.ny(),
            a,
        })
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }
    pub fn factor(&self) -> MatRef<'_, c64> {
        self.a.as_ref()
    }
    pub fn dim(&self) -> usize {
        self.nx * self.ny
    }

    pub fn adjoint(&self) -> Self {
        Self {
            a: self.a.adjoint().to_owned(),
            ..*self
        }
    }

    /// The full `N x N` Kronecker embedding.
    pub fn to_dense(&self) -> Mat<c64> {
        let id = Mat::<c64>::identity(self.dim(), self.dim());
        self.apply_left(id.as_ref())
    }

    /// `(embedded A) * m` for an `N x k` matrix.
    pub fn apply_left(&self, m: MatRef<'_, c64>) -> Mat<c64> {
        assert_eq!(m.nrows(), self.dim());
        let mut out = Mat::zeros(m.nrows(), m.ncols());
        let mut buf = Mat::<c64>::zeros(self.nx, self.ny);
        for c in 0..m.ncols() {
            // Column c reshaped as an nx x ny matrix V[i, j].
            for j in 0..self.ny {
                for i in 0..self.nx {
                    buf[(i, j)] = m[(j * self.nx + i, c)];
                }
            }
            let res = match self.axis {
                Axis::X => &self.a * &buf,
                Axis::Y => &buf * self.a.transpose(),
            };
            for j in 0..self.ny {
                for i in 0..self.nx {
                    out[(j * self.nx + i, c)] = res[(i, j)];
                }
            }
        }
        out
    }

    /// `m * (embedded A)` for a `k x N` matrix.
    pub fn apply_right(&self, m: MatRef<'_, c64>) -> Mat<c64> {
        let t = self.adjoint().apply_left(m.adjoint().to_owned().as_ref());
        t.adjoint().to_owned()
    }
}

/// Embeds a 1D factor on `axis` as a dense `N x N` matrix.
pub fn kron_axis(grid: &GridSpec, axis: Axis, a: &Mat<c64>) -> Result<Mat<c64>> {
    Ok(AxisOperator::new(grid, axis, a.clone())?.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_small_counts_and_bad_lengths() {
        let err = make_grid(1.0, 1.0, 3, 3).unwrap_err();
        assert!(err.to_string().contains("`nx`"), "{err}");
        let err = make_grid(1.0, 1.0, 8, 7).unwrap_err();
        assert!(err.to_string().contains("`ny`"), "{err}");
        assert!(make_grid(0.0, 1.0, 8, 8).unwrap_err().to_string().contains("`lx`"));
        assert!(make_grid(1.0, -2.0, 8, 8).unwrap_err().to_string().contains("`ly`"));
        assert!(make_grid(f64::NAN, 1.0, 8, 8).is_err());
    }

    #[test]
    fn spacing_examples() {
        let g = make_grid(10.0, 10.0, 21, 21).unwrap();
        assert_eq!((g.hx(), g.hy()), (1.0, 1.0));
        let g = make_grid(12.0, 12.0, 49, 49).unwrap();
        assert_eq!((g.hx(), g.hy()), (0.5, 0.5));
        assert_eq!(g.dim(), 49 * 49);
    }

    #[test]
    fn coordinates_hit_walls_and_are_symmetric() {
        let g = make_grid(3.0, 2.0, 13, 9).unwrap();
        assert_eq!(g.x(0), -3.0);
        assert_eq!(g.x(12), 3.0);
        assert_eq!(g.y(0), -2.0);
        assert_eq!(g.y(4), 0.0);
        for i in 0..13 {
            assert_eq!(g.x(i), -g.x(12 - i));
        }
        let k = g.index(5, 7);
        assert_eq!(k, 7 * 13 + 5);
        assert_eq!(g.point(k), (5, 7));
    }

    #[test]
    fn d1_is_exactly_hermitian_and_kills_constants() {
        let m = d1_op(8, 0.3).unwrap();
        assert_eq!(hermiticity_defect(m.as_ref()), 0.0);
        let ones = Mat::<c64>::from_fn(8, 1, |_, _| c64::new(1.0, 0.0));
        let out = &m * &ones;
        for r in 1..7 {
            assert_eq!(out[(r, 0)], c64::new(0.0, 0.0));
        }
    }

    fn d1_sin_error(n: usize) -> f64 {
        let l = 2.0;
        let h = 2.0 * l / (n - 1) as f64;
        let k = 1.3;
        let xs: Vec<f64> = (0..n).map(|i| symmetric_coord(l, n, i)).collect();
        let m = d1_op(n, h).unwrap();
        let v = Mat::<c64>::from_fn(n, 1, |r, _| c64::new((k * xs[r]).sin(), 0.0));
        let out = &m * &v;
        (1..n - 1)
            .map(|r| (out[(r, 0)] - c64::new(0.0, -k * (k * xs[r]).cos())).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn d1_on_sine_is_second_order() {
        // Taylor oracle: error = k^3 h^2 / 6 cos(kx) + O(h^4).
        let e1 = d1_sin_error(41);
        let e2 = d1_sin_error(81);
        let order = (e1 / e2).log2() / ((80.0f64 / 40.0).log2());
        assert!(order > 1.9 && order < 2.1, "order {order}");
        let h = 4.0 / 40.0;
        let predicted = 1.3f64.powi(3) * h * h / 6.0;
        assert!((e1 / predicted - 1.0).abs() < 0.02, "{e1} vs {predicted}");
    }

    #[test]
    fn d2_eigenvalues_are_closed_form() {
        let n = 12;
        let h = 0.4;
        let m = d2_op(n, h).unwrap();
        assert_eq!(hermiticity_defect(m.as_ref()), 0.0);
        let mut ev = m.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        ev.sort_by(f64::total_cmp);
        for (j, e) in ev.iter().enumerate() {
            let exact = (2.0 - 2.0 * ((j + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos()) / (h * h);
            assert!((e - exact).abs() < 1e-10 * exact.max(1.0), "{e} vs {exact}");
        }
    }

    #[test]
    fn d2_smallest_eigenvalue_tends_to_dirichlet_limit() {
        // Interior unknowns only see the open interval of length 2l + 2h.
        let l = 1.5f64;
        let exact = std::f64::consts::PI.powi(2) / (2.0 * l).powi(2);
        let mut prev = f64::INFINITY;
        for n in [20usize, 40, 80, 160] {
            let h = 2.0 * l / (n + 1) as f64;
            let lam = (2.0 - 2.0 * (std::f64::consts::PI / (n + 1) as f64).cos()) / (h * h);
            let m = d2_op(n, h).unwrap();
            let ev = m.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
            assert!((ev[0] - lam).abs() < 1e-9);
            let err = (ev[0] - exact).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn d2_on_parabola_gives_minus_two() {
        let n = 15;
        let h = 0.25;
        let m = d2_op(n, h).unwrap();
        let v = Mat::<c64>::from_fn(n, 1, |r, _| c64::new((r as f64 * h).powi(2), 0.0));
        let out = &m * &v;
        for r in 1..n - 1 {
            assert!((out[(r, 0)].re + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn position_operators() {
        let g = make_grid(2.0, 1.0, 9, 8).unwrap();
        let id = position_op(&g, Axis::X, 0);
        assert_eq!(id.matrix(), Mat::<c64>::identity(g.dim(), g.dim()).as_ref());
        let x = position_op(&g, Axis::X, 1);
        assert_eq!(x.matrix()[(0, 0)].re, -2.0);
        let y = position_op(&g, Axis::Y, 1);
        let xy = &x.matrix() * &y.matrix();
        let yx = &y.matrix() * &x.matrix();
        assert_eq!(max_abs((&xy - &yx).as_ref()), 0.0);
        assert!(DiscreteOperator::new(Mat::zeros(3, 3), g, Role::Generic).is_err());
    }

    #[test]
    fn axis_operator_matches_kronecker_definition() {
        let g = make_grid(1.0, 1.5, 8, 9).unwrap();
        let ax = Mat::<c64>::from_fn(8, 8, |r, c| c64::new((r * 3 + c) as f64, (r as f64) - (c as f64) * 0.5));
        let ay = Mat::<c64>::from_fn(9, 9, |r, c| c64::new((r + 2 * c) as f64 * 0.1, 0.3 * c as f64));
        let ex = kron_axis(&g, Axis::X, &ax).unwrap();
        let ey = kron_axis(&g, Axis::Y, &ay).unwrap();
        for r in 0..g.dim() {
            for c in 0..g.dim() {
                let (i, j) = g.point(r);
                let (k, l) = g.point(c);
                let want_x = if j == l { ax[(i, k)] } else { c64::new(0.0, 0.0) };
                let want_y = if i == k { ay[(j, l)] } else { c64::new(0.0, 0.0) };
                assert_eq!(ex[(r, c)], want_x);
                assert_eq!(ey[(r, c)], want_y);
            }
        }
        let op = AxisOperator::new(&g, Axis::X, ax).unwrap();
        let m = Mat::<c64>::from_fn(g.dim(), 5, |r, c| c64::new((r * c) as f64 % 7.0, r as f64 * 0.01));
        let left = op.apply_left(m.as_ref());
        assert!(max_abs((&left - &ex * &m).as_ref()) < 1e-10);
        let mt = m.adjoint().to_owned();
        let right = op.apply_right(mt.as_ref());
        assert!(max_abs((&right - &mt * &ex).as_ref()) < 1e-10);
    }

    #[test]
    fn d1_commutes_with_functions_of_y() {
        let g = make_grid(1.0, 1.0, 8, 10).unwrap();
        let d = kron_axis(&g, Axis::X, &d1_op(8, g.hx()).unwrap()).unwrap();
        let f = diag_matrix(&g.sample(|_, y| (2.0 * y).sin() + y * y));
        assert_eq!(max_abs((&d * &f - &f * &d).as_ref()), 0.0);
    }

    #[test]
    fn product_rule_averaging_stencil() {
        // [D, X] = -i A with A the two-point average in x.
        for n in [11usize, 21, 41] {
            let g = make_grid(1.0, 1.0, n, 8).unwrap();
            let d = kron_axis(&g, Axis::X, &d1_op(n, g.hx()).unwrap()).unwrap();
            let x = position_op(&g, Axis::X, 1);
            let c = &d * &x.matrix() - &x.matrix() * &d;
            for r in 0..g.dim() {
                if !g.is_interior(r, 1) {
                    continue;
                }
                assert_eq!(c[(r, r)], c64::new(0.0, 0.0));
                for s in [r - 1, r + 1] {
                    assert!((c[(r, s)] - c64::new(0.0, -0.5)).norm() < 1e-12);
                }
            }
            // On a smooth probe, A phi - phi = h^2 phi''/2 + O(h^4).
            let phi = g.sample(|x, _| (x * 1.7).cos());
            let mut worst = 0.0f64;
            for r in 0..g.dim() {
                if g.is_interior(r, 2) {
                    let a_phi = 0.5 * (phi[r - 1] + phi[r + 1]);
                    worst = worst.max((a_phi - phi[r]).abs());
                }
            }
            let bound = 0.5 * g.hx() * g.hx() * 1.7 * 1.7;
            assert!(worst <= bound * 1.0001, "{worst} > {bound}");
        }
    }

    proptest! {
        #[test]
        fn builders_are_exactly_hermitian(n in 8usize..24, h in 0.01f64..3.0) {
            prop_assert_eq!(hermiticity_defect(d1_op(n, h).unwrap().as_ref()), 0.0);
            prop_assert_eq!(hermiticity_defect(d2_op(n, h).unwrap().as_ref()), 0.0);
        }

        #[test]
        fn kron_preserves_hermiticity(nx in 8usize..11, ny in 8usize..11, h in 0.1f64..1.0) {
            let g = make_grid(1.0, 1.0, nx, ny).unwrap();
            let a = kron_axis(&g, Axis::X, &d1_op(nx, h).unwrap()).unwrap();
            let b = kron_axis(&g, Axis::Y, &d1_op(ny, h).unwrap()).unwrap();
            prop_assert_eq!(hermiticity_defect(a.as_ref()), 0.0);
            prop_assert_eq!(hermiticity_defect(b.as_ref()), 0.0);
        }

        #[test]
        fn spacing_invariant(lx in 0.1f64..50.0, ly in 0.1f64..50.0, nx in 8usize..200, ny in 8usize..200) {
            let g = make_grid(lx, ly, nx, ny).unwrap();
            prop_assert!((g.hx() - 2.0 * lx / (nx - 1) as f64).abs() <= 1e-15 * lx);
            prop_assert!(g.hx() > 0.0 && g.hy() > 0.0);
            prop_assert_eq!(g.dim(), nx * ny);
            prop_assert_eq!(g.x(0), -lx);
            prop_assert_eq!(g.y(ny - 1), ly);
        }
    }
}
