//! Radial analysis of the far-field limit profile: shooting integration
//! of U'' + (2n-1)/r U' + f(U) = 0 with U'(0) = 0, the first-integral
//! identity r^(2n-1) U' = -int_0^r rho^(2n-1) f(U), the transform
//! V = r^((2n-1)/2) U reducing the equation to V'' + H V = 0, and the
//! oscillation certificate that rules out interior starting values.

use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;

/// Fixed-step trace of the radial profile.
#[derive(Debug, Clone)]
pub struct RadialOdeSolution {
    pub n: usize,
    /// Starting value U(0).
    pub a: f64,
    pub step: f64,
    pub rs: Vec<f64>,
    pub us: Vec<f64>,
    pub dus: Vec<f64>,
    /// Bracketed and refined roots of U.
    pub zero_crossings: Vec<f64>,
    /// Set when the |U| > 10 guard stopped the march early.
    pub truncated_at: Option<f64>,
}

/// Cubic Hermite evaluation on [0, 1] with endpoint values and scaled
/// slopes.
fn hermite(u0: f64, m0: f64, u1: f64, m1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * u0
        + (s3 - 2.0 * s2 + s) * m0
        + (-2.0 * s3 + 3.0 * s2) * u1
        + (s3 - s2) * m1
}

/// Fourth-order integration of the radial profile with the regular
/// singular point handled by the series start
/// U(r) = a - f(a) r^2 / (4n) on [0, step].
pub fn integrate_radial(
    f: &Nonlinearity,
    n: usize,
    a: f64,
    rmax: f64,
    step: f64,
) -> Result<RadialOdeSolution> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(step > 0.0) || !(rmax > 2.0 * step) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < step << rmax, got step = {step}, rmax = {rmax}"
        )));
    }
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidArgument(format!(
            "starting value must lie in [0, 1], got {a}"
        )));
    }
    let steps = (rmax / step).floor() as usize;
    let nn = n as f64;
    let fa = f.f(a);
    let mut rs = Vec::with_capacity(steps + 1);
    let mut us = Vec::with_capacity(steps + 1);
    let mut dus = Vec::with_capacity(steps + 1);
    rs.push(0.0);
    us.push(a);
    dus.push(0.0);
    // Series start at r = step.
    let mut r = step;
    let mut u = a - fa * step * step / (4.0 * nn);
    let mut du = -fa * step / (2.0 * nn);
    rs.push(r);
    us.push(u);
    dus.push(du);

    let rhs = |r: f64, u: f64, du: f64| -> (f64, f64) {
        (du, -(2.0 * nn - 1.0) / r * du - f.f(u))
    };
    let mut truncated_at = None;
    for _ in 1..steps {
        let (k1u, k1d) = rhs(r, u, du);
        let (k2u, k2d) = rhs(r + 0.5 * step, u + 0.5 * step * k1u, du + 0.5 * step * k1d);
        let (k3u, k3d) = rhs(r + 0.5 * step, u + 0.5 * step * k2u, du + 0.5 * step * k2d);
        let (k4u, k4d) = rhs(r + step, u + step * k3u, du + step * k3d);
        u += step / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        du += step / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        r += step;
        if !u.is_finite() || !du.is_finite() {
            return Err(Error::NonFinite(format!("radial integration at r = {r}")));
        }
        rs.push(r);
        us.push(u);
        dus.push(du);
        if u.abs() > 10.0 {
            truncated_at = Some(r);
            break;
        }
    }

    // Sign changes, refined on the cubic Hermite interpolant.
    let mut zero_crossings = Vec::new();
    for k in 0..us.len() - 1 {
        let (u0, u1) = (us[k], us[k + 1]);
        if u0 == 0.0 && u1 != 0.0 && k > 0 {
            zero_crossings.push(rs[k]);
        } else if u0 * u1 < 0.0 {
            let (m0, m1) = (dus[k] * step, dus[k + 1] * step);
            let mut lo = 0.0;
            let mut hi = 1.0;
            let flo = hermite(u0, m0, u1, m1, lo);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let fm = hermite(u0, m0, u1, m1, mid);
                if (fm > 0.0) == (flo > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            zero_crossings.push(rs[k] + 0.5 * (lo + hi) * step);
        }
    }

    Ok(RadialOdeSolution {
        n,
        a,
        step,
        rs,
        us,
        dus,
        zero_crossings,
        truncated_at,
    })
}

/// Max defect of r^(2n-1) U'(r) + int_0^r rho^(2n-1) f(U) over the even
/// sample indices, the integral evaluated by composite Simpson.
pub fn first_integral_defect(sol: &RadialOdeSolution, f: &Nonlinearity) -> f64 {
    let p = (2 * sol.n - 1) as i32;
    let g: Vec<f64> = sol
        .rs
        .iter()
        .zip(sol.us.iter())
        .map(|(&r, &u)| r.powi(p) * f.f(u))
        .collect();
    let mut integral = 0.0;
    let mut worst = 0.0_f64;
    let h = sol.step;
    let mut k = 0;
    while k + 2 < g.len() + 1 {
        if k > 0 {
            let defect = sol.rs[k].powi(p) * sol.dus[k] + integral;
            worst = worst.max(defect.abs());
        }
        if k + 2 >= g.len() {
            break;
        }
        integral += h / 3.0 * (g[k] + 4.0 * g[k + 1] + g[k + 2]);
        k += 2;
    }
    worst
}

/// U' < 0 strictly between r = 0 and the first crossing (while
/// 0 < U < 1), read off the stored trace.
pub fn strictly_decreasing_before_first_crossing(sol: &RadialOdeSolution) -> bool {
    let end = sol
        .zero_crossings
        .first()
        .map(|&z| z)
        .unwrap_or(f64::INFINITY);
    sol.rs
        .iter()
        .zip(sol.dus.iter())
        .skip(1)
        .take_while(|(&r, _)| r < end)
        .all(|(_, &du)| du < 0.0)
}

/// Trace of the oscillation normal form V'' + H V = 0.
#[derive(Debug, Clone)]
pub struct LiouvilleTrace {
    pub n: usize,
    pub rs: Vec<f64>,
    /// V = r^((2n-1)/2) U.
    pub v: Vec<f64>,
    /// K = f(U)/U.
    pub k: Vec<f64>,
    /// H = K - (2n-1)(2n-3)/(4 r^2).
    pub h: Vec<f64>,
    pub step: f64,
}

/// Coefficient of the 1/r^2 correction in H.
pub fn liouville_correction(n: usize) -> f64 {
    let m = (2.0 * n as f64 - 1.0) / 2.0;
    -(m * (m - 1.0))
}

/// Defect between H written as K - (2n-1)(2n-3)/(4 r^2) and the
/// equivalent form (2n-1)/2 (1 - (N-1)/2) / r^2 + K with N = 2n.
pub fn correction_identity_defect(n: usize, r: f64, k: f64) -> f64 {
    let nn = n as f64;
    let ours = k - (2.0 * nn - 1.0) * (2.0 * nn - 3.0) / (4.0 * r * r);
    let big_n = 2.0 * nn;
    let alt = (2.0 * nn - 1.0) / 2.0 * (1.0 - (big_n - 1.0) / 2.0) / (r * r) + k;
    (ours - alt).abs()
}

/// Computes the transform up to (exclusive) the first zero of U; errors
/// if U vanishes on the requested range.
pub fn liouville_transform(sol: &RadialOdeSolution, f: &Nonlinearity) -> Result<LiouvilleTrace> {
    let end = match sol.zero_crossings.first() {
        Some(&z) => sol.rs.iter().position(|&r| r >= z).unwrap_or(sol.rs.len()),
        None => sol.rs.len(),
    };
    if end <= 2 {
        return Err(Error::Precondition(
            "profile vanishes immediately; transform undefined".into(),
        ));
    }
    let m = (2.0 * sol.n as f64 - 1.0) / 2.0;
    let corr = (2.0 * sol.n as f64 - 1.0) * (2.0 * sol.n as f64 - 3.0) / 4.0;
    let mut rs = Vec::new();
    let mut v = Vec::new();
    let mut kk = Vec::new();
    let mut h = Vec::new();
    for idx in 1..end {
        let r = sol.rs[idx];
        let u = sol.us[idx];
        if u == 0.0 {
            return Err(Error::Precondition(format!("U vanishes at r = {r}")));
        }
        rs.push(r);
        v.push(r.powf(m) * sol.us[idx]);
        let kval = f.f(u) / u;
        kk.push(kval);
        h.push(kval - corr / (r * r));
    }
    Ok(LiouvilleTrace {
        n: sol.n,
        rs,
        v,
        k: kk,
        h,
        step: sol.step,
    })
}

impl LiouvilleTrace {
    /// max |V'' + H V| by centered differences over samples with
    /// r in [r_lo, r_hi].
    pub fn ode_residual_sup(&self, r_lo: f64, r_hi: f64) -> f64 {
        let h2 = self.step * self.step;
        let mut worst = 0.0_f64;
        for i in 1..self.rs.len() - 1 {
            let r = self.rs[i];
            if r < r_lo || r > r_hi {
                continue;
            }
            let vpp = (self.v[i + 1] - 2.0 * self.v[i] + self.v[i - 1]) / h2;
            worst = worst.max((vpp + self.h[i] * self.v[i]).abs());
        }
        worst
    }
}

/// Sturm gap check between two consecutive zeros.
#[derive(Debug, Clone)]
pub struct GapCheck {
    pub left: f64,
    pub right: f64,
    pub gap: f64,
    /// pi / sqrt(l/2) * 1.1.
    pub bound: f64,
    /// min of H over the gap.
    pub premise_min_h: f64,
    /// Whether H > 0.9 l/2 held on the whole gap.
    pub premise_held: bool,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct DichotomyEntry {
    pub a: f64,
    pub crossings: Vec<f64>,
    /// a in {0, 1}: the profile stays at the fixed point.
    pub constant_branch: bool,
    pub crossing_found: bool,
    pub gap_checks: Vec<GapCheck>,
    /// min(H - l/2) over the tail when no crossing was found.
    pub inconclusive_margin: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DichotomyReport {
    pub l: f64,
    pub entries: Vec<DichotomyEntry>,
}

impl DichotomyReport {
    /// Every interior start produced a crossing and every gap whose
    /// premise held satisfied the Sturm bound.
    pub fn certified(&self) -> bool {
        self.entries.iter().all(|e| {
            if e.constant_branch {
                !e.crossing_found
            } else {
                e.crossing_found && e.gap_checks.iter().all(|g| !g.premise_held || g.pass)
            }
        })
    }
}

/// Integrates each starting value and certifies the dichotomy: interior
/// starts oscillate (at Sturm-comparison spacing once H clears 0.9 l/2),
/// the endpoints stay constant.
pub fn oscillation_certificate(
    f: &Nonlinearity,
    n: usize,
    a_values: &[f64],
    rmax: f64,
    step: f64,
) -> Result<DichotomyReport> {
    let corr = (2.0 * n as f64 - 1.0) * (2.0 * n as f64 - 3.0) / 4.0;
    let bound = std::f64::consts::PI / (f.l / 2.0).sqrt() * 1.1;
    let mut entries = Vec::new();
    for &a in a_values {
        let sol = integrate_radial(f, n, a, rmax, step)?;
        let constant_branch = a == 0.0 || a == 1.0;
        if constant_branch {
            let drift = sol.us.iter().fold(0.0_f64, |m, &u| m.max((u - a).abs()));
            if drift > 1e-12 {
                return Err(Error::NoConvergence(format!(
                    "fixed-point start a = {a} drifted by {drift:e}"
                )));
            }
        }
        let h_at = |idx: usize| -> f64 {
            let u = sol.us[idx];
            let r = sol.rs[idx];
            let k = if u.abs() > 1e-14 { f.f(u) / u } else { f.l };
            k - corr / (r * r)
        };
        let mut gap_checks = Vec::new();
        for w in sol.zero_crossings.windows(2) {
            let (left, right) = (w[0], w[1]);
            let mut min_h = f64::INFINITY;
            for idx in 1..sol.rs.len() {
                if sol.rs[idx] >= left && sol.rs[idx] <= right {
                    min_h = min_h.min(h_at(idx));
                }
            }
            let premise_held = min_h > 0.9 * f.l / 2.0;
            let gap = right - left;
            gap_checks.push(GapCheck {
                left,
                right,
                gap,
                bound,
                premise_min_h: min_h,
                premise_held,
                pass: gap <= bound,
            });
        }
        let crossing_found = !sol.zero_crossings.is_empty();
        let inconclusive_margin = if !crossing_found && !constant_branch {
            let start = sol.rs.len() / 2;
            Some(
                (start..sol.rs.len())
                    .map(h_at)
                    .fold(f64::INFINITY, f64::min)
                    - f.l / 2.0,
            )
        } else {
            None
        };
        entries.push(DichotomyEntry {
            a,
            crossings: sol.zero_crossings,
            constant_branch,
            crossing_found,
            gap_checks,
            inconclusive_margin,
        });
    }
    Ok(DichotomyReport { l: f.l, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_points_stay_constant() {
        let f = Nonlinearity::cubic();
        for a in [0.0, 1.0] {
            let sol = integrate_radial(&f, 1, a, 20.0, 1e-2).unwrap();
            assert!(sol.zero_crossings.is_empty() || a == 0.0);
            for &u in &sol.us {
                assert!((u - a).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn interior_start_crosses_zero() {
        let f = Nonlinearity::cubic();
        let sol = integrate_radial(&f, 1, 0.5, 60.0, 1e-3).unwrap();
        assert!(!sol.zero_crossings.is_empty());
        let z = sol.zero_crossings[0];
        // Crossing location is stable under step halving.
        let fine = integrate_radial(&f, 1, 0.5, 60.0, 5e-4).unwrap();
        assert!((fine.zero_crossings[0] - z).abs() < 1e-3);
        assert!(strictly_decreasing_before_first_crossing(&sol));
    }

    #[test]
    fn integrator_is_fourth_order() {
        // Richardson ratio of the value at a fixed radius under step
        // halving is about 16.
        let f = Nonlinearity::cubic();
        let probe = |step: f64| {
            let sol = integrate_radial(&f, 1, 0.5, 4.0, step).unwrap();
            let idx = (2.0 / step).round() as usize;
            sol.us[idx]
        };
        let (c, m, fine) = (probe(4e-3), probe(2e-3), probe(1e-3));
        let ratio = (c - m).abs() / (m - fine).abs();
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn first_integral_defect_is_small_and_fourth_order() {
        let f = Nonlinearity::cubic();
        let one = integrate_radial(&f, 1, 1.0, 10.0, 1e-3).unwrap();
        assert_eq!(first_integral_defect(&one, &f), 0.0);
        let sol = integrate_radial(&f, 1, 0.5, 10.0, 1e-3).unwrap();
        let defect = first_integral_defect(&sol, &f);
        assert!(defect <= 1e-6, "defect {defect:e}");
        let coarse = integrate_radial(&f, 1, 0.5, 10.0, 4e-3).unwrap();
        let dc = first_integral_defect(&coarse, &f);
        // Roughly O(step^4): 4x the step, about 256x the defect.
        assert!(dc / defect > 60.0, "ratio {}", dc / defect);
    }

    #[test]
    fn liouville_correction_values() {
        // n = 1: H = K + 1/(4 r^2); n = 2: H = K - 3/(4 r^2).
        assert!((liouville_correction(1) - 0.25).abs() < 1e-15);
        assert!((liouville_correction(2) + 0.75).abs() < 1e-15);
        let f = Nonlinearity::cubic();
        let sol = integrate_radial(&f, 1, 0.5, 5.0, 1e-3).unwrap();
        let trace = liouville_transform(&sol, &f).unwrap();
        let idx = trace.rs.len() / 2;
        let r = trace.rs[idx];
        assert!((trace.h[idx] - (trace.k[idx] + 0.25 / (r * r))).abs() < 1e-14);
    }

    #[test]
    fn paper_form_identity_is_exact() {
        for n in [1usize, 2, 3] {
            for i in 0..1000 {
                let r = 0.1 + i as f64 * 0.01;
                let k = (i as f64 * 0.37).sin();
                assert!(correction_identity_defect(n, r, k) <= 1e-12);
            }
        }
    }

    #[test]
    fn transform_reconstructs_u() {
        let f = Nonlinearity::cubic();
        let sol = integrate_radial(&f, 2, 0.6, 4.0, 1e-3).unwrap();
        let trace = liouville_transform(&sol, &f).unwrap();
        let m = (2.0 * sol.n as f64 - 1.0) / 2.0;
        for (idx, &r) in trace.rs.iter().enumerate() {
            let u = trace.v[idx] * r.powf(-m);
            assert!((u - sol.us[idx + 1]).abs() <= 1e-12);
        }
    }

    #[test]
    fn normal_form_residual_shrinks_at_second_order() {
        let f = Nonlinearity::cubic();
        let res = |step: f64| {
            let sol = integrate_radial(&f, 1, 0.5, 4.0, step).unwrap();
            let tr = liouville_transform(&sol, &f).unwrap();
            tr.ode_residual_sup(0.5, 3.5)
        };
        let ratio = res(2e-3) / res(1e-3);
        assert!(ratio > 3.3 && ratio < 4.7, "ratio {ratio}");
    }

    #[test]
    fn certificate_for_cubic() {
        let f = Nonlinearity::cubic();
        let report =
            oscillation_certificate(&f, 1, &[0.0, 0.3, 0.6, 0.9, 1.0], 60.0, 1e-3).unwrap();
        assert!(report.certified());
        for e in &report.entries {
            if e.constant_branch {
                assert!(!e.crossing_found);
            } else {
                assert!(e.crossing_found, "a = {}", e.a);
                assert!(
                    e.gap_checks.iter().any(|g| g.premise_held),
                    "no checked gap for a = {}",
                    e.a
                );
            }
        }
    }

    #[test]
    fn comparison_equation_zero_spacing() {
        // Oracle: integrate U'' + (l/2) U = 0 with the same RK4 scheme;
        // zeros are spaced pi / sqrt(l/2) = pi sqrt(2) for l = 1.
        let l = 1.0_f64;
        let omega2 = l / 2.0;
        let step = 1e-3;
        let mut u = 1.0_f64;
        let mut du = 0.0_f64;
        let mut r = 0.0_f64;
        let mut crossings = Vec::new();
        let rhs = |u: f64, du: f64| (du, -omega2 * u);
        let mut prev = u;
        while r < 30.0 {
            let (k1u, k1d) = rhs(u, du);
            let (k2u, k2d) = rhs(u + 0.5 * step * k1u, du + 0.5 * step * k1d);
            let (k3u, k3d) = rhs(u + 0.5 * step * k2u, du + 0.5 * step * k2d);
            let (k4u, k4d) = rhs(u + step * k3u, du + step * k3d);
            u += step / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            du += step / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
            r += step;
            if prev * u < 0.0 {
                crossings.push(r - step * u.abs() / (u - prev).abs());
            }
            prev = u;
        }
        let want = std::f64::consts::PI * 2.0_f64.sqrt();
        for w in crossings.windows(2) {
            assert!(((w[1] - w[0]) - want).abs() < 1e-5);
        }
    }

    #[test]
    fn input_validation() {
        let f = Nonlinearity::cubic();
        assert!(integrate_radial(&f, 0, 0.5, 10.0, 1e-2).is_err());
        assert!(integrate_radial(&f, 1, 1.5, 10.0, 1e-2).is_err());
        assert!(integrate_radial(&f, 1, 0.5, 10.0, -1.0).is_err());
        assert!(integrate_radial(&f, 1, 0.5, 1e-3, 1e-2).is_err());
    }
}
