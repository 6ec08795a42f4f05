//! The reaction term f and the shifted auxiliary g(s) = f(s) + M s.
//!
//! A valid reaction term is odd, positive on (0, 1) with f(0) = f(1) = 0,
//! and has slope l > 0 at the origin. M bounds the Lipschitz constant of
//! f on [-1, 1]; with that choice g is nondecreasing there, which is what
//! the monotone iteration needs.

use crate::error::{Error, Result};
use std::sync::Arc;

type EvalFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Nonlinearity {
    eval: EvalFn,
    /// Slope of f at the origin (limit of f(s)/s).
    pub l: f64,
    /// Lipschitz bound of f on [-1, 1]; also the shift in g.
    pub m: f64,
    pub name: String,
}

impl std::fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name)
            .field("l", &self.l)
            .field("m", &self.m)
            .finish()
    }
}

impl Nonlinearity {
    /// A user-supplied term must come with l and M declared; the
    /// validator cross-checks them rather than inferring.
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        l: f64,
        m: f64,
    ) -> Result<Self> {
        if !(l > 0.0) || !(m > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "l and M must be positive, got l = {l}, M = {m}"
            )));
        }
        Ok(Self {
            eval: Arc::new(eval),
            l,
            m,
            name: name.into(),
        })
    }

    /// Same, with M set to a tight numeric Lipschitz bound on [-1, 1]
    /// times a 1.05 safety factor.
    pub fn with_auto_shift(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        l: f64,
    ) -> Result<Self> {
        let m = numeric_lipschitz(&eval, 4096) * 1.05;
        Self::new(name, eval, l, m)
    }

    /// The double-well cubic s (1 - s^2), with l = 1 and M = 2
    /// (|f'| on [-1, 1] peaks at the endpoints with value 2).
    pub fn cubic() -> Self {
        Self {
            eval: Arc::new(|s: f64| s * (1.0 - s * s)),
            l: 1.0,
            m: 2.0,
            name: "cubic".into(),
        }
    }

    /// Look up a builtin by name.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "cubic" => Ok(Self::cubic()),
            other => Err(Error::InvalidArgument(format!(
                "unknown nonlinearity '{other}' (builtin: cubic)"
            ))),
        }
    }

    pub fn f(&self, s: f64) -> f64 {
        (self.eval)(s)
    }

    /// g(s) = f(s) + M s, defined on [-1, 1].
    pub fn g(&self, s: f64) -> Result<f64> {
        if !(-1.0..=1.0).contains(&s) {
            return Err(Error::InvalidArgument(format!(
                "g is only defined on [-1, 1], got {s}"
            )));
        }
        Ok(self.f(s) + self.m * s)
    }
}

/// Largest |f(a) - f(b)| / |a - b| over a uniform pair sample of [-1, 1].
fn numeric_lipschitz(f: &impl Fn(f64) -> f64, samples: usize) -> f64 {
    let mut worst = 0.0_f64;
    let h = 2.0 / samples as f64;
    for i in 0..samples {
        let a = -1.0 + i as f64 * h;
        let b = a + h;
        worst = worst.max(((f(b) - f(a)) / h).abs());
    }
    worst
}

/// Per-hypothesis outcome of `validate_hypotheses`.
#[derive(Debug, Clone)]
pub struct HypothesisReport {
    /// f(-s) = -f(s) on the sample grid.
    pub odd: bool,
    /// f > 0 on (0, 1) with f(0) = f(1) = 0.
    pub positive_on_unit_interval: bool,
    /// f(s)/s approaches the declared l near zero (5% at s = 1e-2..1e-4).
    pub slope_at_zero: bool,
    /// |f(a) - f(b)| <= M |a - b| on sampled pairs of [-1, 1].
    pub lipschitz_bound: bool,
    pub detail: Vec<String>,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.odd && self.positive_on_unit_interval && self.slope_at_zero && self.lipschitz_bound
    }
}

/// Finite-sample check of the structural hypotheses. Failures are report
/// entries, not errors.
pub fn validate_hypotheses(f: &Nonlinearity, samples: usize) -> Result<HypothesisReport> {
    if samples < 16 {
        return Err(Error::InvalidArgument(format!(
            "need at least 16 samples, got {samples}"
        )));
    }
    let mut detail = Vec::new();
    let tol = 1e-12;

    let mut odd = true;
    for i in 0..=samples {
        let s = i as f64 / samples as f64;
        let d = (f.f(-s) + f.f(s)).abs();
        if d > tol * (1.0 + f.f(s).abs()) {
            odd = false;
            detail.push(format!("oddness fails at s = {s}: f(-s) + f(s) = {d:e}"));
            break;
        }
    }

    let mut positive = f.f(0.0).abs() <= tol && f.f(1.0).abs() <= tol;
    if !positive {
        detail.push(format!(
            "endpoints: f(0) = {:e}, f(1) = {:e}",
            f.f(0.0),
            f.f(1.0)
        ));
    }
    for i in 1..samples {
        let s = i as f64 / samples as f64;
        if f.f(s) <= 0.0 {
            positive = false;
            detail.push(format!("f({s}) = {:e} is not positive", f.f(s)));
            break;
        }
    }

    let mut slope = true;
    for s in [1e-2, 1e-3, 1e-4] {
        let ratio = f.f(s) / s;
        if (ratio - f.l).abs() > 0.05 * f.l.abs() {
            slope = false;
            detail.push(format!("f({s})/{s} = {ratio} vs declared l = {}", f.l));
        }
    }

    let observed = numeric_lipschitz(&|s| f.f(s), samples.max(256));
    let lipschitz = observed <= f.m * (1.0 + 1e-9);
    if !lipschitz {
        detail.push(format!(
            "observed Lipschitz constant {observed} exceeds declared M = {}",
            f.m
        ));
    }

    Ok(HypothesisReport {
        odd,
        positive_on_unit_interval: positive,
        slope_at_zero: slope,
        lipschitz_bound: lipschitz,
        detail,
    })
}
