//! Koenigs-style linearization: from `lambda f = f o h + k` with `lambda > 1`
//! build `f_inf` with `lambda f_inf = f_inf o h` and `f_inf - f` continuous.
//!
//! The iterates `f_n(x) = lambda^{-n} f(h^n(x))` satisfy
//! `f_{n+1} - f_n = -lambda^{-n-1} k(h^n(x))`, so `f_inf` is evaluated as
//! `f(x) - sum_n lambda^{-n-1} k(h^n(x))`. This never evaluates `f` at
//! `h^n(x)`, which underflows to 0 for fast contractions like `x^2`.

use std::sync::Arc;

use serde::Serialize;

use crate::efunc::{EFunction, FunctionClass, FunctionKind, GridSpec, Shift};
use crate::error::{Error, Result};
use crate::homeo::{basin_of_zero, probe_nodes, BasinCase, Homeo};
use crate::oscillation::{check_witness, EquivalenceWitness, Relation, CLOSED_FORM_TOL};
use crate::real::Real;

#[derive(Debug, Clone)]
pub struct LinearizeConfig<T> {
    pub lambda: T,
    pub max_iters: usize,
    pub probe: GridSpec,
    /// Sup-norm convergence tolerance.
    pub tol: T,
    /// Relative tolerance for the witness check on entry.
    pub witness_tol: T,
    /// Fraction of `b` kept as the upper edge of the compact probe set.
    pub edge_margin: T,
}

impl<T: Real> LinearizeConfig<T> {
    pub fn new(lambda: T) -> Self {
        Self {
            lambda,
            max_iters: 64,
            probe: GridSpec::default(),
            tol: T::lit(1e-10),
            witness_tol: T::lit(CLOSED_FORM_TOL),
            edge_margin: T::lit(0.99),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > T::one()) {
            return Err(Error::InvalidParameter(format!(
                "linearization needs lambda > 1, got {}",
                self.lambda
            )));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidParameter(
                "convergence tolerance must be positive".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Decay of `f_inf` along backward orbits: `f_inf(h^{-n}(x0)) = lambda^{-n} f_inf(x0)`.
#[derive(Debug, Clone, Serialize)]
pub struct TailDecay<T> {
    pub x0: T,
    /// `(h^{-n}(x0), f_inf there, lambda^{-n} f_inf(x0))` for `n = 0..=10`.
    pub orbit: Vec<(T, T, T)>,
    pub max_rel_err: T,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearizeResult<T> {
    #[serde(skip)]
    pub f_inf: EFunction<T>,
    pub lambda: T,
    pub case: BasinCase,
    pub b: Option<T>,
    /// Largest number of series terms used at any probe.
    pub iterations: usize,
    /// Largest final increment over the probes.
    pub last_change: T,
    /// `sup |lambda f_inf(x) - f_inf(h(x))|` over the probes.
    pub residual: T,
    /// Constant added to `f` (and matching `(lambda-1)` multiple to `k`) so that `k(0) = 0`.
    pub normalization_shift: T,
    pub tail_decay: TailDecay<T>,
    /// `(x, f(x), f_inf(x))` on the probe set.
    pub probes: Vec<(T, T, T)>,
}

/// The `f_inf` series evaluator shared by the result closure and the probes.
struct Series<T> {
    f: EFunction<T>,
    h: Homeo<T>,
    k: Shift<T>,
    lambda: T,
    max_iters: usize,
    tol: T,
    b: Option<T>,
}

struct SeriesValue<T> {
    value: T,
    terms: usize,
    last_change: T,
    converged: bool,
}

impl<T: Real> Series<T> {
    fn eval(&self, x: T) -> Result<SeriesValue<T>> {
        if let Some(b) = self.b {
            if x >= b {
                return Ok(SeriesValue {
                    value: T::zero(),
                    terms: 0,
                    last_change: T::zero(),
                    converged: true,
                });
            }
        }
        let base = self.f.eval(x)?;
        let tail_factor = (self.lambda - T::one()).recip();
        let mut sum = T::zero();
        let mut weight = self.lambda.recip();
        let mut y = x;
        let mut k_hull = T::zero();
        let mut last_change = T::zero();
        for n in 0..self.max_iters {
            let ky = self.k.eval(y);
            k_hull = k_hull.max(ky.abs());
            let term = weight * ky;
            sum = sum + term;
            last_change = term.abs();
            // remaining terms bounded by lambda^{-n-1} sup|k| / (lambda - 1)
            if weight * k_hull * tail_factor < self.tol || y == T::zero() {
                return Ok(SeriesValue {
                    value: base - sum,
                    terms: n + 1,
                    last_change,
                    converged: true,
                });
            }
            weight = weight / self.lambda;
            y = self.h.eval(y);
        }
        Ok(SeriesValue {
            value: base - sum,
            terms: self.max_iters,
            last_change,
            converged: false,
        })
    }
}

/// Runs the linearization, after checking the witness and the basin of 0.
pub fn koenigs_limit<T: Real>(
    f: &EFunction<T>,
    h: &Homeo<T>,
    k: &Shift<T>,
    cfg: &LinearizeConfig<T>,
) -> Result<LinearizeResult<T>> {
    cfg.validate()?;
    let lambda = cfg.lambda;

    // normalize k(0) = 0: f' = f + a, k' = k + (lambda - 1) a with a = -k(0)/(lambda - 1)
    let k0 = k.eval(T::zero());
    if !k0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "shift `{}` is not finite at 0",
            k.description()
        )));
    }
    let shift = -k0 / (lambda - T::one());
    let (f, k) = if k0 == T::zero() {
        (f.clone(), k.clone())
    } else {
        (f.add_const(shift), k.add_const((lambda - T::one()) * shift))
    };

    let witness = EquivalenceWitness::new(lambda, h.clone(), k.clone());
    let report = check_witness(
        &f,
        Relation::SelfSimilar,
        &witness,
        &cfg.probe,
        cfg.witness_tol,
    )?;
    if !report.pass {
        return Err(Error::WitnessFailed {
            residual: report.max_rel.as_f64(),
            tol: cfg.witness_tol.as_f64(),
        });
    }

    let basin = basin_of_zero(h, &cfg.probe)?;
    let series = Arc::new(Series {
        f: f.clone(),
        h: h.clone(),
        k: k.clone(),
        lambda,
        max_iters: cfg.max_iters,
        tol: cfg.tol,
        b: basin.b,
    });

    // compact probe set: grid nodes inside the basin, away from b
    let upper = match basin.b {
        Some(b) => b * cfg.edge_margin,
        None => basin.horizon,
    };
    let nodes: Vec<T> = probe_nodes(&cfg.probe);
    let mut probes = Vec::new();
    let (mut iterations, mut last_change, mut residual) = (0usize, T::zero(), T::zero());
    for &x in nodes.iter().filter(|&&x| x <= upper) {
        let v = series.eval(x)?;
        if !v.converged {
            return Err(Error::NoConvergence {
                iterations: cfg.max_iters,
                last_change: v.last_change.as_f64(),
            });
        }
        iterations = iterations.max(v.terms);
        last_change = last_change.max(v.last_change);
        let hx = h.eval(x);
        if hx > T::zero() {
            let r = (lambda * v.value - series.eval(hx)?.value).abs();
            residual = residual.max(r / v.value.abs().max(T::one()));
        }
        probes.push((x, f.eval(x)?, v.value));
    }
    if let Some(b) = basin.b {
        for &x in nodes.iter().filter(|&&x| x >= b) {
            probes.push((x, f.eval(x)?, T::zero()));
        }
    }

    let f_inf = {
        let s = Arc::clone(&series);
        EFunction::from_parts(
            FunctionKind::Derived,
            FunctionClass::E0,
            format!(
                "linearization of {} under {} (lambda = {lambda})",
                f.description(),
                h.name()
            ),
            Arc::new(move |x| s.eval(x).map(|v| v.value)),
        )
    };

    let x0 = match basin.b {
        Some(b) => b / T::lit(2.0),
        None => T::one(),
    };
    let tail_decay = tail_decay(&f_inf, h, lambda, x0)?;

    Ok(LinearizeResult {
        f_inf,
        lambda,
        case: basin.case,
        b: basin.b,
        iterations,
        last_change,
        residual,
        normalization_shift: shift,
        tail_decay,
        probes,
    })
}

/// Relative tolerance for the backward-orbit decay identity.
pub const TAIL_DECAY_TOL: f64 = 1e-9;

fn tail_decay<T: Real>(
    f_inf: &EFunction<T>,
    h: &Homeo<T>,
    lambda: T,
    x0: T,
) -> Result<TailDecay<T>> {
    let v0 = f_inf.eval(x0)?;
    let mut orbit = Vec::with_capacity(11);
    let mut max_rel_err = T::zero();
    let mut x = x0;
    let mut expected = v0;
    for n in 0..=10 {
        if n > 0 {
            x = h.eval_inverse(x)?;
            expected = expected / lambda;
        }
        let got = f_inf.eval(x)?;
        max_rel_err =
            max_rel_err.max((got - expected).abs() / v0.abs().max(T::lit(f64::MIN_POSITIVE)));
        orbit.push((x, got, expected));
    }
    Ok(TailDecay {
        x0,
        orbit,
        max_rel_err,
        pass: max_rel_err <= T::lit(TAIL_DECAY_TOL),
    })
}

/// `|f - f_inf|` bound from the series: the sum truncated at `n_max` plus
/// `lambda^{-n_max}` times the max of `|k|` on the orbit hull.
pub fn telescoping_bound<T: Real>(x: T, h: &Homeo<T>, k: &Shift<T>, lambda: T, n_max: usize) -> T {
    let mut sum = T::zero();
    let mut weight = lambda.recip();
    let mut y = x;
    let mut hull = T::zero();
    for _ in 0..n_max {
        let ky = k.eval(y).abs();
        hull = hull.max(ky);
        sum = sum + weight * ky;
        weight = weight / lambda;
        y = h.eval(y);
    }
    hull = hull.max(k.eval(T::zero()).abs());
    sum + lambda.powi(-(n_max as i32)) * hull
}

/// Result of the `f(h(a)) > ((lambda+1)/2) f(a)` check below `a'`.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport<T> {
    /// `(2/(lambda-1)) max |k|` over `[0, 1]`.
    pub bound: T,
    /// Largest node below which `f(a)` exceeds `bound`.
    pub a_prime: Option<T>,
    pub checked: usize,
    pub violations: usize,
    pub pass: bool,
}

/// Locates `a'` on the grid and verifies the growth inequality below it.
pub fn threshold_check<T: Real>(
    f: &EFunction<T>,
    h: &Homeo<T>,
    k: &Shift<T>,
    lambda: T,
    grid: &GridSpec,
) -> Result<ThresholdReport<T>> {
    let xs: Vec<T> = grid.from_one().nodes();
    let k_max = xs
        .iter()
        .map(|&x| k.eval(x).abs())
        .fold(k.eval(T::zero()).abs(), T::max);
    let bound = T::lit(2.0) / (lambda - T::one()) * k_max;
    let values = xs.iter().map(|&x| f.eval(x)).collect::<Result<Vec<_>>>()?;
    // first index from which every node exceeds the bound
    let start = values
        .iter()
        .rposition(|&v| !(v > bound))
        .map_or(0, |i| i + 1);
    let a_prime = xs.get(start).copied();
    let factor = (lambda + T::one()) / T::lit(2.0);
    let mut checked = 0;
    let mut violations = 0;
    for i in start..xs.len() {
        let ha = h.eval(xs[i]);
        if !(ha > T::zero()) {
            continue;
        }
        checked += 1;
        if !(f.eval(ha)? > factor * values[i]) {
            violations += 1;
        }
    }
    Ok(ThresholdReport {
        bound,
        a_prime,
        checked,
        violations,
        pass: checked > 0 && violations == 0,
    })
}

/// Replaces `f` by `f(min(x, 1))` beyond 1 and adjusts `k` so that
/// `lambda f' = f' o h + k'` still holds; the change `f' - f` is continuous
/// and vanishes near 0.
pub fn clamp_tail<T: Real>(
    f: &EFunction<T>,
    h: &Homeo<T>,
    k: &Shift<T>,
    lambda: T,
) -> (EFunction<T>, Shift<T>) {
    let base = f.clone();
    let clamped = EFunction::from_parts(
        FunctionKind::Derived,
        f.class(),
        format!("({}) clamped beyond 1", f.description()),
        Arc::new(move |x: T| base.eval(x.min(T::one()))),
    );
    let (orig, cl, map, shift) = (f.clone(), clamped.clone(), h.clone(), k.clone());
    let diff = move |x: T| -> T {
        if x <= T::one() {
            T::zero()
        } else {
            cl.eval(x).unwrap_or(T::nan()) - orig.eval(x).unwrap_or(T::nan())
        }
    };
    let k_new = Shift::from_fn(
        format!("({}) adjusted for clamping", k.description()),
        move |x: T| shift.eval(x) + lambda * diff(x) - diff(map.eval(x)),
    );
    (clamped, k_new)
}
