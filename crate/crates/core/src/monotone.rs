//! The lower barrier, the shifted fixed-point map, and the monotone
//! iteration producing the half-cylinder solution.
//!
//! The map T sends v to the solution of (L - M) u = -g(v) with the ramp
//! data on the Dirichlet rows. For 0 <= v <= 1 it satisfies 0 <= T(v) <= 1
//! and preserves ordering, so iterating from the barrier yields a
//! nondecreasing sequence converging to a solution of L u + f(u) = 0.

use crate::eigen::EigenPair;
use crate::error::{Error, Result};
use crate::grid::{CylGrid, DiscreteOperator, Field};
use crate::linsolve::{solve_shifted, BoundaryData, SolveConfig};
use crate::nonlinearity::Nonlinearity;
use std::sync::Arc;

/// Trace of one monotone iteration run.
#[derive(Debug, Clone)]
pub struct IterationReport {
    pub iterations: usize,
    /// sup |v_{k+1} - v_k| per step.
    pub sup_diffs: Vec<f64>,
    /// max over steps and nodes of (v_k - v_{k+1})_+.
    pub ordering_violation: f64,
    /// max of (v - 1)_+ and (-v)_+ over the run.
    pub bounds_violation: f64,
    /// || T(u) - u ||_inf for the returned field.
    pub fixed_point_gap: f64,
    /// max interior |L u + f(u)| of the returned field.
    pub final_residual: f64,
    pub converged: bool,
}

/// The barrier: eps phi0 inside the eigenpair's quarter-plane rectangle,
/// zero outside. phi0 vanishes on its Dirichlet rows, so the extension is
/// continuous across the interface.
pub fn barrier_v0(pair: &EigenPair, epsilon: f64, grid: Arc<CylGrid>) -> Result<Field> {
    let inner = &pair.phi0.grid;
    if grid.t_min != 0.0 {
        return Err(Error::Precondition("barrier lives on a half-cylinder grid".into()));
    }
    if grid.r_max < inner.r_max || grid.t_max < inner.t_max {
        return Err(Error::GridMismatch(format!(
            "working domain (R = {}, T = {}) does not contain the barrier domain (R = {}, T = {})",
            grid.r_max, grid.t_max, inner.r_max, inner.t_max
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "barrier amplitude must lie in (0, 1), got {epsilon}"
        )));
    }
    let slack = 1.0 + 1e-12;
    Ok(Field::from_fn(grid, |r, t| {
        if r <= inner.r_max * slack && t <= inner.t_max * slack {
            epsilon * pair.phi0.interpolate(r, t)
        } else {
            0.0
        }
    }))
}

/// One application of the map T. The input must satisfy 0 <= v <= 1 up to
/// 10x the solver tolerance (values inside that margin are clamped,
/// anything beyond is an error). `seed` warm-starts the inner solve.
pub fn apply_map(
    v: &Field,
    f: &Nonlinearity,
    op: &DiscreteOperator,
    bc: &BoundaryData,
    cfg: &SolveConfig,
    seed: Option<&Field>,
) -> Result<Field> {
    if v.grid != op.grid {
        return Err(Error::GridMismatch("apply_map: field on a different grid".into()));
    }
    let margin = 10.0 * cfg.tolerance;
    let (min, max) = (v.min_value(), v.max_value());
    if min < -margin || max > 1.0 + margin {
        return Err(Error::Precondition(format!(
            "map input outside [0, 1] beyond tolerance: range [{min}, {max}]"
        )));
    }
    let g = &op.grid;
    let mut rhs = Field::zeros(op.grid.clone());
    for i in 0..g.nr - 1 {
        for j in 1..g.nt - 1 {
            let s = v.at(i, j).clamp(0.0, 1.0);
            rhs.set(i, j, -f.g(s)?);
        }
    }
    solve_shifted(op, f.m, bc, &rhs, cfg, seed)
}

/// Outcome of the subsolution test u1 >= v0.
#[derive(Debug, Clone)]
pub struct SubsolutionReport {
    pub pass: bool,
    /// max over nodes of (v0 - u1)_+.
    pub worst_violation: f64,
    pub worst_node: (usize, usize),
    pub tolerance: f64,
}

/// Verifies that the first iterate dominates the barrier nodewise within
/// 10x the solver tolerance.
pub fn subsolution_check(v0: &Field, u1: &Field, solver_tolerance: f64) -> SubsolutionReport {
    let g = &v0.grid;
    let mut worst = 0.0_f64;
    let mut node = (0, 0);
    for i in 0..g.nr {
        for j in 0..g.nt {
            let gap = v0.at(i, j) - u1.at(i, j);
            if gap > worst {
                worst = gap;
                node = (i, j);
            }
        }
    }
    let tolerance = 10.0 * solver_tolerance;
    SubsolutionReport {
        pass: worst <= tolerance,
        worst_violation: worst,
        worst_node: node,
        tolerance,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IterateConfig {
    /// Stop when sup |v_{k+1} - v_k| falls below this.
    pub fixed_point_tol: f64,
    pub max_steps: usize,
    pub solve: SolveConfig,
}

impl Default for IterateConfig {
    fn default() -> Self {
        Self {
            fixed_point_tol: 1e-8,
            max_steps: 500,
            solve: SolveConfig::default(),
        }
    }
}

/// Runs the monotone iteration from `v0` until the sup-difference of
/// successive iterates falls below the fixed-point tolerance.
pub fn iterate(
    v0: &Field,
    f: &Nonlinearity,
    op: &DiscreteOperator,
    bc: &BoundaryData,
    cfg: &IterateConfig,
) -> Result<(Field, IterationReport)> {
    let mut v = v0.clone();
    let mut sup_diffs = Vec::new();
    let mut ordering = 0.0_f64;
    let mut bounds = (-(v.min_value())).max(v.max_value() - 1.0).max(0.0);
    let mut converged = false;
    for _ in 0..cfg.max_steps {
        let u = apply_map(&v, f, op, bc, &cfg.solve, Some(&v))?;
        let mut diff = 0.0_f64;
        for k in 0..u.values.len() {
            let d = u.values[k] - v.values[k];
            diff = diff.max(d.abs());
            ordering = ordering.max(-d);
        }
        bounds = bounds.max(-(u.min_value())).max(u.max_value() - 1.0).max(0.0);
        sup_diffs.push(diff);
        v = u;
        if diff < cfg.fixed_point_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(format!(
            "monotone iteration missed the fixed-point tolerance {:e} within {} steps (last diff {:e})",
            cfg.fixed_point_tol,
            cfg.max_steps,
            sup_diffs.last().copied().unwrap_or(f64::NAN)
        )));
    }
    // One extra application measures the fixed-point gap of the returned
    // field itself.
    let t_of_v = apply_map(&v, f, op, bc, &cfg.solve, Some(&v))?;
    let mut gap = 0.0_f64;
    for k in 0..v.values.len() {
        gap = gap.max((t_of_v.values[k] - v.values[k]).abs());
    }
    let report = IterationReport {
        iterations: sup_diffs.len(),
        ordering_violation: ordering,
        bounds_violation: bounds,
        fixed_point_gap: gap,
        final_residual: op.residual(&v, f)?,
        converged,
        sup_diffs,
    };
    Ok((v, report))
}
