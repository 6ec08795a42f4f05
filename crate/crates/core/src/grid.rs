//! Node-centered (r, t) grids on the half- and full cylinder and the
//! discrete cylindrically reduced Kohn Laplacian
//!
//!   L U = r^(1-2n) d_r( r^(2n-1) d_r U ) + 4 r^2 d_tt U,
//!
//! discretized in divergence form with half-node weights r_{i+1/2}^(2n-1).
//! The axis row r = 0 uses the symmetry rule L = 2n d_rr with a ghost node
//! U(-hr, t) = U(hr, t); its t coupling vanishes exactly with the 4 r^2
//! coefficient. Scaled by the finite-volume weights the stencil is a
//! symmetric M-matrix, which the linear and eigen solvers rely on.

use crate::error::{Error, Result};
use std::sync::Arc;

/// Geometry of a node-centered rectangle [0, R] x [t_min, t_max].
#[derive(Debug, Clone, PartialEq)]
pub struct CylGrid {
    /// Heisenberg index; the radial weight exponent is 2n - 1.
    pub n: usize,
    pub r_max: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub nr: usize,
    pub nt: usize,
    pub hr: f64,
    pub ht: f64,
}

impl CylGrid {
    pub fn new(n: usize, r_max: f64, t_min: f64, t_max: f64, nr: usize, nt: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if nr < 8 || nt < 8 {
            return Err(Error::InvalidArgument(format!(
                "node counts must be at least 8, got {nr} x {nt}"
            )));
        }
        if !(r_max > 0.0) || !(t_max > t_min) {
            return Err(Error::InvalidArgument(format!(
                "degenerate extents: R = {r_max}, t in [{t_min}, {t_max}]"
            )));
        }
        Ok(Self {
            n,
            r_max,
            t_min,
            t_max,
            nr,
            nt,
            hr: r_max / (nr - 1) as f64,
            ht: (t_max - t_min) / (nt - 1) as f64,
        })
    }

    /// Half cylinder (0, R) x (0, R^2).
    pub fn half_cylinder(n: usize, r_max: f64, nr: usize, nt: usize) -> Result<Self> {
        Self::new(n, r_max, 0.0, r_max * r_max, nr, nt)
    }

    /// Full cylinder (0, R) x (-R^2, R^2).
    pub fn full_cylinder(n: usize, r_max: f64, nr: usize, nt: usize) -> Result<Self> {
        Self::new(n, r_max, -r_max * r_max, r_max * r_max, nr, nt)
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.hr
    }

    #[inline]
    pub fn t(&self, j: usize) -> f64 {
        self.t_min + j as f64 * self.ht
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nt + j
    }

    pub fn len(&self) -> usize {
        self.nr * self.nt
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Dirichlet boundary: the r = R column and both t edges. The axis
    /// column carries the symmetry condition instead of data.
    #[inline]
    pub fn is_dirichlet(&self, i: usize, j: usize) -> bool {
        i == self.nr - 1 || j == 0 || j == self.nt - 1
    }

    #[inline]
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        !self.is_dirichlet(i, j)
    }
}

/// A scalar function sampled on a grid.
#[derive(Debug, Clone)]
pub struct Field {
    pub grid: Arc<CylGrid>,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Arc<CylGrid>) -> Self {
        let len = grid.len();
        Self {
            grid,
            values: vec![0.0; len],
        }
    }

    pub fn from_fn(grid: Arc<CylGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nr {
            for j in 0..grid.nt {
                values.push(f(grid.r(i), grid.t(j)));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.values[k] = v;
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Bilinear interpolation at (r, t); queries are clamped to the
    /// rectangle covered by the grid.
    pub fn interpolate(&self, r: f64, t: f64) -> f64 {
        let g = &self.grid;
        let fr = ((r / g.hr).clamp(0.0, (g.nr - 1) as f64)).min((g.nr - 2) as f64);
        let ft = (((t - g.t_min) / g.ht).clamp(0.0, (g.nt - 1) as f64)).min((g.nt - 2) as f64);
        let i = fr.floor() as usize;
        let j = ft.floor() as usize;
        let a = fr - i as f64;
        let b = ft - j as f64;
        (1.0 - a) * (1.0 - b) * self.at(i, j)
            + a * (1.0 - b) * self.at(i + 1, j)
            + (1.0 - a) * b * self.at(i, j + 1)
            + a * b * self.at(i + 1, j + 1)
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        self.grid == other.grid
    }
}

/// Compressed 5-point stencil of L. Coefficients depend on the radial
/// index only, so one entry per column suffices.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: Arc<CylGrid>,
    /// Coupling to (i-1, j); zero on the axis row.
    pub west: Vec<f64>,
    /// Coupling to (i+1, j).
    pub east: Vec<f64>,
    /// Coupling to (i, j+-1): 4 r_i^2 / ht^2.
    pub vertical: Vec<f64>,
    /// Negative diagonal.
    pub diag: Vec<f64>,
    /// Finite-volume weights making the scaled stencil symmetric;
    /// the axis entry is the true control volume of the half cell.
    pub vol: Vec<f64>,
}

/// Conservative discretization of L on `grid`.
pub fn build_operator(grid: Arc<CylGrid>) -> DiscreteOperator {
    let n = grid.n;
    let p = (2 * n - 1) as i32;
    let hr = grid.hr;
    let ht = grid.ht;
    let hr2 = hr * hr;
    let nr = grid.nr;
    let mut west = vec![0.0; nr];
    let mut east = vec![0.0; nr];
    let mut vertical = vec![0.0; nr];
    let mut diag = vec![0.0; nr];
    let mut vol = vec![0.0; nr];

    // Axis row: 2n d_rr with the ghost reflection gives 4n (U_1 - U_0)/hr^2;
    // this is exactly the finite-volume flux balance over the half cell
    // [0, hr/2], whose weighted volume is (hr/2)^(2n) ht / (2n).
    east[0] = 4.0 * n as f64 / hr2;
    diag[0] = -east[0];
    vol[0] = (hr / 2.0).powi(p) * hr * ht / (4.0 * n as f64);

    for i in 1..nr {
        let r = grid.r(i);
        let wm = (r - 0.5 * hr).powi(p);
        let wp = (r + 0.5 * hr).powi(p);
        let w = r.powi(p);
        west[i] = wm / (w * hr2);
        east[i] = wp / (w * hr2);
        vertical[i] = 4.0 * r * r / (ht * ht);
        diag[i] = -(west[i] + east[i] + 2.0 * vertical[i]);
        vol[i] = w * hr * ht;
    }

    DiscreteOperator {
        grid,
        west,
        east,
        vertical,
        diag,
        vol,
    }
}

impl DiscreteOperator {
    /// L u at an interior node (axis included).
    #[inline]
    pub fn stencil(&self, u: &Field, i: usize, j: usize) -> f64 {
        let c = self.diag[i] * u.at(i, j)
            + self.east[i] * u.at(i + 1, j)
            + self.vertical[i] * (u.at(i, j + 1) + u.at(i, j - 1));
        if i == 0 {
            c
        } else {
            c + self.west[i] * u.at(i - 1, j)
        }
    }

    /// L u over the whole grid; boundary rows are returned as zero.
    pub fn apply(&self, u: &Field) -> Result<Field> {
        if !u.same_grid(&Field::zeros(self.grid.clone())) {
            return Err(Error::GridMismatch("apply: field on a different grid".into()));
        }
        let g = &self.grid;
        let mut out = Field::zeros(self.grid.clone());
        for i in 0..g.nr - 1 {
            for j in 1..g.nt - 1 {
                let v = self.stencil(u, i, j);
                out.set(i, j, v);
            }
        }
        Ok(out)
    }

    /// max over interior nodes of |L u + f(u)|.
    pub fn residual(&self, u: &Field, f: &crate::nonlinearity::Nonlinearity) -> Result<f64> {
        if u.grid != self.grid {
            return Err(Error::GridMismatch("residual: field on a different grid".into()));
        }
        let g = &self.grid;
        let mut worst = 0.0_f64;
        for i in 0..g.nr - 1 {
            for j in 1..g.nt - 1 {
                let v = self.stencil(u, i, j) + f.f(u.at(i, j));
                worst = worst.max(v.abs());
            }
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::Nonlinearity;
    use proptest::prelude::*;

    fn grid(n: usize, r: f64, nr: usize, nt: usize) -> Arc<CylGrid> {
        Arc::new(CylGrid::half_cylinder(n, r, nr, nt).unwrap())
    }

    #[test]
    fn constants_are_harmonic() {
        let g = grid(1, 2.0, 17, 17);
        let op = build_operator(g.clone());
        let u = Field::from_fn(g, |_, _| 3.7);
        let lu = op.apply(&u).unwrap();
        assert!(lu.sup_norm() < 1e-12);
    }

    #[test]
    fn linear_t_is_harmonic() {
        let g = grid(2, 1.5, 17, 21);
        let op = build_operator(g.clone());
        let u = Field::from_fn(g, |_, t| t);
        let lu = op.apply(&u).unwrap();
        assert!(lu.sup_norm() < 1e-12);
    }

    #[test]
    fn r_squared_maps_to_4n() {
        // The half-node-weight stencil is exact on r^2 for n = 1, on the
        // axis row for every n.
        let g = grid(1, 2.0, 33, 17);
        let op = build_operator(g.clone());
        let u = Field::from_fn(g.clone(), |r, _| r * r);
        let lu = op.apply(&u).unwrap();
        for i in 0..g.nr - 1 {
            for j in 1..g.nt - 1 {
                assert!(
                    (lu.at(i, j) - 4.0).abs() < 1e-10,
                    "node ({i}, {j}): {}",
                    lu.at(i, j)
                );
            }
        }
        for n in [2usize, 3] {
            let g = grid(n, 2.0, 33, 17);
            let op = build_operator(g.clone());
            let u = Field::from_fn(g, |r, _| r * r);
            let lu = op.apply(&u).unwrap();
            // Axis regularity: the symmetry row reproduces the interior
            // limit 4n exactly.
            assert!((lu.at(0, 5) - 4.0 * n as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn stencil_signs_give_m_matrix() {
        let g = grid(2, 3.0, 21, 25);
        let op = build_operator(g);
        for i in 0..op.grid.nr - 1 {
            assert!(op.diag[i] < 0.0);
            assert!(op.east[i] >= 0.0 && op.west[i] >= 0.0 && op.vertical[i] >= 0.0);
            // Rows sum to zero: constants are harmonic.
            let row = op.diag[i]
                + op.east[i]
                + op.west[i]
                + 2.0 * op.vertical[i];
            assert!(row.abs() < 1e-9 * op.diag[i].abs());
        }
    }

    #[test]
    fn richardson_order_on_smooth_field() {
        // || L_h U - L U ||_inf over a window away from the axis drops
        // about 4x when both spacings halve.
        let exact = |r: f64, t: f64, n: usize| {
            -r.sin() * t.cos() + (2.0 * n as f64 - 1.0) / r * r.cos() * t.cos()
                - 4.0 * r * r * r.sin() * t.cos()
        };
        let err = |nr: usize| {
            let g = grid(1, 1.0, nr, nr);
            let op = build_operator(g.clone());
            let u = Field::from_fn(g.clone(), |r, t| r.sin() * t.cos());
            let lu = op.apply(&u).unwrap();
            let mut worst = 0.0_f64;
            for i in 0..g.nr - 1 {
                let r = g.r(i);
                if r < 0.25 {
                    continue;
                }
                for j in 1..g.nt - 1 {
                    worst = worst.max((lu.at(i, j) - exact(r, g.t(j), 1)).abs());
                }
            }
            worst
        };
        let e1 = err(33);
        let e2 = err(65);
        let ratio = e1 / e2;
        assert!(ratio > 3.4 && ratio < 4.6, "ratio {ratio}");
    }

    #[test]
    fn residual_trivial_cases() {
        let g = grid(1, 2.0, 17, 17);
        let op = build_operator(g.clone());
        let f = Nonlinearity::cubic();
        let zero = Field::zeros(g.clone());
        assert_eq!(op.residual(&zero, &f).unwrap(), 0.0);
        let one = Field::from_fn(g, |_, _| 1.0);
        assert!(op.residual(&one, &f).unwrap() < 1e-12);
    }

    #[test]
    fn weighted_self_adjointness() {
        // <L u, v>_w = <u, L v>_w for fields vanishing on all edge rows,
        // with the weight r^(2n-1) hr ht.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 2] {
            let g = grid(n, 1.7, 19, 23);
            let op = build_operator(g.clone());
            let mut u = Field::zeros(g.clone());
            let mut v = Field::zeros(g.clone());
            for i in 1..g.nr - 1 {
                for j in 1..g.nt - 1 {
                    u.set(i, j, rng.random_range(-1.0..1.0));
                    v.set(i, j, rng.random_range(-1.0..1.0));
                }
            }
            let lu = op.apply(&u).unwrap();
            let lv = op.apply(&v).unwrap();
            let p = (2 * n - 1) as i32;
            let w = |i: usize| g.r(i).powi(p) * g.hr * g.ht;
            let mut a = 0.0;
            let mut b = 0.0;
            let mut nu = 0.0;
            let mut nv = 0.0;
            for i in 0..g.nr - 1 {
                for j in 1..g.nt - 1 {
                    a += lu.at(i, j) * v.at(i, j) * w(i);
                    b += u.at(i, j) * lv.at(i, j) * w(i);
                    nu += u.at(i, j) * u.at(i, j) * w(i);
                    nv += v.at(i, j) * v.at(i, j) * w(i);
                }
            }
            let bound = 1e-10 * nu.sqrt() * nv.sqrt();
            assert!((a - b).abs() <= bound.max(1e-14), "defect {} vs {}", (a - b).abs(), bound);
        }
    }

    #[test]
    fn interpolation_reproduces_nodes_and_clamps() {
        let g = grid(1, 2.0, 9, 9);
        let u = Field::from_fn(g.clone(), |r, t| 2.0 * r + 0.5 * t);
        assert_eq!(u.interpolate(g.r(3), g.t(4)), u.at(3, 4));
        // Bilinear is exact on affine data.
        assert!((u.interpolate(0.37, 1.91) - (2.0 * 0.37 + 0.5 * 1.91)).abs() < 1e-13);
        // Clamped beyond the rectangle.
        assert_eq!(u.interpolate(5.0, 100.0), u.at(8, 8));
    }

    #[test]
    fn grid_validation() {
        assert!(CylGrid::half_cylinder(0, 1.0, 16, 16).is_err());
        assert!(CylGrid::half_cylinder(1, 1.0, 4, 16).is_err());
        assert!(CylGrid::half_cylinder(1, -1.0, 16, 16).is_err());
        let g = CylGrid::full_cylinder(1, 2.0, 16, 31).unwrap();
        assert_eq!(g.t_min, -4.0);
        assert_eq!(g.t_max, 4.0);
    }

    proptest! {
        #[test]
        fn apply_is_linear(seed in 0u64..50) {
            use rand::Rng;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = grid(1, 1.3, 12, 14);
            let op = build_operator(g.clone());
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                let mut f = Field::zeros(g.clone());
                for v in f.values.iter_mut() {
                    *v = rng.random_range(-1.0..1.0);
                }
                f
            };
            let u = mk(&mut rng);
            let v = mk(&mut rng);
            let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let mut combo = Field::zeros(g.clone());
            for k in 0..combo.values.len() {
                combo.values[k] = a * u.values[k] + b * v.values[k];
            }
            let lhs = op.apply(&combo).unwrap();
            let lu = op.apply(&u).unwrap();
            let lv = op.apply(&v).unwrap();
            let scale = op.diag[1].abs();
            for k in 0..lhs.values.len() {
                let rhs = a * lu.values[k] + b * lv.values[k];
                prop_assert!((lhs.values[k] - rhs).abs() < 1e-12 * scale.max(1.0));
            }
        }
    }
}
