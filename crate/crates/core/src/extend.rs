//! Odd reflection of the half-cylinder solution across t = 0 and the
//! verification that the reflected field solves the equation through the
//! seam: the stencil there cancels by parity, and an optional deep probe
//! reconstructs the fundamental-solution potential of f(v) and checks
//! that v + w is harmonic near the origin.

use crate::error::{Error, Result};
use crate::grid::{CylGrid, DiscreteOperator, Field};
use crate::heisenberg::{apply_kohn, gamma, group_inv, group_mul, koranyi_norm, GroupConstants, HeisenbergPoint};
use crate::nonlinearity::Nonlinearity;
use std::sync::Arc;

/// Odd extension of a half-cylinder field to the full cylinder.
#[derive(Debug, Clone)]
pub struct ReflectedField {
    pub field: Field,
    /// Row index of t = 0 in the full grid.
    pub seam: usize,
}

fn reflect_with_sign(u: &Field, sign: f64) -> Result<ReflectedField> {
    let half = &u.grid;
    if half.t_min != 0.0 {
        return Err(Error::Precondition("reflection expects a half-cylinder field".into()));
    }
    let full = Arc::new(CylGrid::full_cylinder(
        half.n,
        half.r_max,
        half.nr,
        2 * half.nt - 1,
    )?);
    let seam = half.nt - 1;
    let mut v = Field::zeros(full);
    for i in 0..half.nr {
        for k in 0..half.nt {
            let val = u.at(i, k);
            v.set(i, seam + k, val);
            if k > 0 {
                v.set(i, seam - k, sign * val);
            }
        }
    }
    Ok(ReflectedField { field: v, seam })
}

/// Exact mirror with sign flip; the shared t = 0 row must vanish.
pub fn odd_reflect(u: &Field) -> Result<ReflectedField> {
    let mut worst = 0.0_f64;
    for i in 0..u.grid.nr {
        worst = worst.max(u.at(i, 0).abs());
    }
    if worst > 1e-12 {
        return Err(Error::Precondition(format!(
            "bottom row is not zero (max |u(r, 0)| = {worst:e}); odd reflection undefined"
        )));
    }
    reflect_with_sign(u, -1.0)
}

/// Wrong-parity mirror used as a negative control by the verification
/// suites; it leaves an O(1) defect on the seam row.
pub fn even_reflect_control(u: &Field) -> Result<ReflectedField> {
    reflect_with_sign(u, 1.0)
}

impl ReflectedField {
    /// Exact oddness by construction: v(r, -t) + v(r, t) = 0 bitwise.
    pub fn oddness_defect(&self) -> f64 {
        let g = &self.field.grid;
        let mut worst = 0.0_f64;
        for i in 0..g.nr {
            for k in 0..=self.seam {
                worst = worst.max((self.field.at(i, self.seam - k) + self.field.at(i, self.seam + k)).abs());
            }
        }
        worst
    }
}

/// max |L v + f(v)| over the interior of the t = 0 row, whose stencil
/// reaches across the seam.
pub fn seam_residual(
    v: &ReflectedField,
    f: &Nonlinearity,
    op_full: &DiscreteOperator,
) -> Result<f64> {
    if v.field.grid != op_full.grid {
        return Err(Error::GridMismatch("seam_residual: operator on a different grid".into()));
    }
    let g = &op_full.grid;
    let mut worst = 0.0_f64;
    for i in 0..g.nr - 1 {
        let r = op_full.stencil(&v.field, i, v.seam) + f.f(v.field.at(i, v.seam));
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// Catmull-Rom interpolation through four samples at s in [0, 1] between
/// p1 and p2.
fn catmull_rom(p0: f64, p1: f64, p2: f64, p3: f64, s: f64) -> f64 {
    0.5 * (2.0 * p1
        + (-p0 + p2) * s
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s * s
        + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * s * s * s)
}

/// C^1 bicubic interpolation of a field; needed where the probe takes
/// second differences of the reconstruction.
pub fn interpolate_bicubic(u: &Field, r: f64, t: f64) -> f64 {
    let g = &u.grid;
    let fr = ((r / g.hr).clamp(0.0, (g.nr - 1) as f64)).min((g.nr - 2) as f64);
    let ft = (((t - g.t_min) / g.ht).clamp(0.0, (g.nt - 1) as f64)).min((g.nt - 2) as f64);
    let i = fr.floor() as usize;
    let j = ft.floor() as usize;
    let a = fr - i as f64;
    let b = ft - j as f64;
    let ci = |k: i64| -> usize { k.clamp(0, (g.nr - 1) as i64) as usize };
    let cj = |k: i64| -> usize { k.clamp(0, (g.nt - 1) as i64) as usize };
    let mut rows = [0.0; 4];
    for (m, row) in rows.iter_mut().enumerate() {
        let ii = ci(i as i64 + m as i64 - 1);
        *row = catmull_rom(
            u.at(ii, cj(j as i64 - 1)),
            u.at(ii, cj(j as i64)),
            u.at(ii, cj(j as i64 + 1)),
            u.at(ii, cj(j as i64 + 2)),
            b,
        );
    }
    catmull_rom(rows[0], rows[1], rows[2], rows[3], a)
}

/// One probe point of the potential check.
#[derive(Debug, Clone)]
pub struct PotentialProbe {
    pub point: (f64, f64, f64),
    /// Kohn residual of v + w at the fine quadrature resolution.
    pub residual: f64,
    /// Same at half resolution.
    pub coarse_residual: f64,
    /// Resolution-halving error estimate the residual is held against.
    pub error_estimate: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct PotentialReport {
    pub probes: Vec<PotentialProbe>,
    /// Volume of quadrature cells skipped around the pole (fine level).
    pub skipped_volume: f64,
    pub cells_per_dim: usize,
    pub all_pass: bool,
}

/// Midpoint-rule cells of the solid cylinder |z'| < R, |t'| < R^2 with
/// the integrand f(v) attached; cells whose gauge distance to the
/// evaluation point is below the exclusion radius are skipped at
/// evaluation time.
struct Quadrature {
    centers: Vec<(f64, f64, f64)>,
    weights: Vec<f64>,
    cell_volume: f64,
    exclusion: f64,
}

impl Quadrature {
    fn build(v: &ReflectedField, f: &Nonlinearity, cells: usize) -> Self {
        let g = &v.field.grid;
        let r_max = g.r_max;
        let t_max = g.t_max;
        let dx = 2.0 * r_max / cells as f64;
        let dt = 2.0 * t_max / cells as f64;
        let mut centers = Vec::new();
        let mut weights = Vec::new();
        for ix in 0..cells {
            let x = -r_max + (ix as f64 + 0.5) * dx;
            for iy in 0..cells {
                let y = -r_max + (iy as f64 + 0.5) * dx;
                let rho = (x * x + y * y).sqrt();
                if rho >= r_max {
                    continue;
                }
                for it in 0..cells {
                    let t = -t_max + (it as f64 + 0.5) * dt;
                    centers.push((x, y, t));
                    weights.push(f.f(v.field.interpolate(rho, t)));
                }
            }
        }
        Self {
            centers,
            weights,
            cell_volume: dx * dx * dt,
            exclusion: dx.max(dt.sqrt()),
        }
    }

    /// w(xi) = -sum Gamma(inv(xi') . xi) f(v(xi')) vol, pole cells skipped.
    fn potential(&self, xi: &HeisenbergPoint, c: &GroupConstants, skipped: &mut f64) -> f64 {
        let mut acc = 0.0;
        for (center, fv) in self.centers.iter().zip(self.weights.iter()) {
            let p = HeisenbergPoint {
                x: vec![center.0],
                y: vec![center.1],
                t: center.2,
            };
            let d = group_mul(&group_inv(&p), xi).expect("dimension 1");
            let rho = koranyi_norm(&d);
            if rho < self.exclusion {
                *skipped += self.cell_volume;
                continue;
            }
            acc -= gamma(&d, c).expect("off the pole") * fv * self.cell_volume;
        }
        acc
    }
}

/// Evaluates the potential w of f(v) by midpoint quadrature and checks
/// that v + w is Kohn-harmonic at the sample points, at the tolerance the
/// quadrature itself supports (estimated by resolution halving). A
/// verification probe for n = 1, not a production path.
pub fn newton_potential_check(
    v: &ReflectedField,
    f: &Nonlinearity,
    c: &GroupConstants,
    samples: &[HeisenbergPoint],
    cells_per_dim: usize,
    fd_step: f64,
    estimate_floor: f64,
) -> Result<PotentialReport> {
    if v.field.grid.n != 1 || c.n != 1 {
        return Err(Error::InvalidArgument(
            "the potential probe is implemented for n = 1 only".into(),
        ));
    }
    if cells_per_dim < 8 || cells_per_dim % 2 != 0 {
        return Err(Error::InvalidArgument(
            "cells_per_dim must be even and at least 8".into(),
        ));
    }
    for s in samples {
        if koranyi_norm(s) == 0.0 {
            return Err(Error::PoleEvaluation);
        }
    }
    let fine = Quadrature::build(v, f, cells_per_dim);
    let coarse = Quadrature::build(v, f, cells_per_dim / 2);
    let mut skipped = 0.0;
    let mut probes = Vec::new();
    for s in samples {
        let mut eval = |quad: &Quadrature, skipped: &mut f64| -> Result<f64> {
            apply_kohn(
                |p: &HeisenbergPoint| {
                    let rho = p.z_norm_sq().sqrt();
                    interpolate_bicubic(&v.field, rho, p.t) + quad.potential(p, c, skipped)
                },
                s,
                fd_step,
            )
        };
        let fine_res = eval(&fine, &mut skipped)?;
        let mut sink = 0.0;
        let coarse_res = eval(&coarse, &mut sink)?;
        let estimate = 3.0 * (fine_res - coarse_res).abs() + estimate_floor;
        probes.push(PotentialProbe {
            point: (s.x[0], s.y[0], s.t),
            residual: fine_res,
            coarse_residual: coarse_res,
            error_estimate: estimate,
            pass: fine_res.abs() <= estimate,
        });
    }
    let all_pass = probes.iter().all(|p| p.pass);
    Ok(PotentialReport {
        probes,
        skipped_volume: skipped / (samples.len().max(1) * 15) as f64,
        cells_per_dim,
        all_pass,
    })
}
