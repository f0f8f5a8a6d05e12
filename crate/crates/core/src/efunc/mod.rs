//! Elements of E and E_0: evaluable functions on (0, inf) that diverge at 0.
//!
//! An [`EFunction`] is an immutable, cheaply clonable handle around an
//! evaluation closure. Builtins are closed forms, expressions are parsed once
//! and evaluated in `f64`, and sampled functions interpolate CSV data linearly
//! in `(ln x, f)`.

mod csv;
mod expr;
pub mod grid;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homeo::Homeo;
use crate::real::Real;

pub use self::csv::{from_csv, from_csv_reader};
pub use self::expr::ParsedExpr;
pub use self::grid::{sample, GridProfile, GridSpec};

type EvalFn<T> = dyn Fn(T) -> Result<T> + Send + Sync;

/// The space a function claims to belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FunctionClass {
    E,
    E0,
}

/// The gallery of closed-form functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    /// `-ln x`, the transition function of the standard flow.
    StdLog,
    /// `(1/x) 2^{sin(2 pi log2 x)}`, self-similar with `f(x/2) = 2 f(x)`.
    PaperExample,
    /// `ln(1/x) + A sin(ln(1/x))`.
    BoundedOsc { amplitude: f64 },
    /// `-ln x + x/(1+x)`.
    KoenigsDemo,
}

impl Builtin {
    pub const NAMES: [&'static str; 4] =
        ["std_log", "paper_example", "bounded_osc", "koenigs_demo"];

    pub fn parse(name: &str, params: &[f64]) -> Result<Self> {
        let builtin = match name {
            "std_log" => Builtin::StdLog,
            "paper_example" => Builtin::PaperExample,
            "koenigs_demo" => Builtin::KoenigsDemo,
            "bounded_osc" => {
                let amplitude = params.first().copied().unwrap_or(2.0);
                if !(amplitude >= 0.0) || !amplitude.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "bounded_osc amplitude must be a finite value >= 0, got {amplitude}"
                    )));
                }
                Builtin::BoundedOsc { amplitude }
            }
            other => return Err(Error::UnknownBuiltin(other.to_string())),
        };
        Ok(builtin)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Builtin::StdLog => "std_log",
            Builtin::PaperExample => "paper_example",
            Builtin::BoundedOsc { .. } => "bounded_osc",
            Builtin::KoenigsDemo => "koenigs_demo",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            Builtin::BoundedOsc { amplitude } => vec![*amplitude],
            _ => Vec::new(),
        }
    }

    pub fn class(&self) -> FunctionClass {
        match self {
            Builtin::PaperExample => FunctionClass::E0,
            _ => FunctionClass::E,
        }
    }

    pub fn eval<T: Real>(&self, x: T) -> T {
        match *self {
            Builtin::StdLog => -x.ln(),
            Builtin::PaperExample => paper_example(x),
            Builtin::BoundedOsc { amplitude } => {
                let u = -x.ln();
                u + T::lit(amplitude) * u.sin()
            }
            Builtin::KoenigsDemo => -x.ln() + x / (T::one() + x),
        }
    }
}

/// `(1/x) 2^{sin(2 pi log2 x)}`. The phase `2 log2 x` is reduced mod 2
/// before `sin(pi r)` so that dyadic points give an exact zero phase.
fn paper_example<T: Real>(x: T) -> T {
    let two = T::lit(2.0);
    let r = (two * x.log2()) % two;
    let phase = if r == T::zero() {
        T::zero()
    } else {
        (T::PI() * r).sin()
    };
    x.recip() * phase.exp2()
}

/// Where a function came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionKind {
    Builtin { builtin: Builtin },
    Expression { source: String },
    Sampled { nodes: usize },
    Derived,
}

/// A function on `(0, x_max]`, claimed to lie in E or E_0.
#[derive(Clone)]
pub struct EFunction<T> {
    kind: FunctionKind,
    class: FunctionClass,
    description: String,
    eval: Arc<EvalFn<T>>,
}

impl<T> fmt::Debug for EFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EFunction")
            .field("kind", &self.kind)
            .field("class", &self.class)
            .field("description", &self.description)
            .finish()
    }
}

impl<T: Real> EFunction<T> {
    /// Builds a gallery function by name; `params` carries the amplitude of
    /// `bounded_osc`.
    pub fn builtin(name: &str, params: &[f64]) -> Result<Self> {
        Ok(Self::from_builtin(Builtin::parse(name, params)?))
    }

    pub fn from_builtin(builtin: Builtin) -> Self {
        let description = match builtin {
            Builtin::StdLog => "-ln x".to_string(),
            Builtin::PaperExample => "(1/x) 2^sin(2 pi log2 x)".to_string(),
            Builtin::BoundedOsc { amplitude } => format!("ln(1/x) + {amplitude} sin(ln(1/x))"),
            Builtin::KoenigsDemo => "-ln x + x/(1+x)".to_string(),
        };
        Self {
            kind: FunctionKind::Builtin { builtin },
            class: builtin.class(),
            description,
            eval: Arc::new(move |x: T| Ok(builtin.eval(x))),
        }
    }

    /// Parses a closed-form expression in the variable `x`.
    pub fn expression(source: &str, class: FunctionClass) -> Result<Self> {
        let parsed = ParsedExpr::parse(source)?;
        let description = source.to_string();
        Ok(Self {
            kind: FunctionKind::Expression {
                source: source.to_string(),
            },
            class,
            description,
            eval: Arc::new(move |x: T| parsed.eval_real(x)),
        })
    }

    /// Wraps an infallible closure.
    pub fn from_fn<F>(description: impl Into<String>, class: FunctionClass, f: F) -> Self
    where
        F: Fn(T) -> T + Send + Sync + 'static,
    {
        Self {
            kind: FunctionKind::Derived,
            class,
            description: description.into(),
            eval: Arc::new(move |x| Ok(f(x))),
        }
    }

    pub(crate) fn from_parts(
        kind: FunctionKind,
        class: FunctionClass,
        description: String,
        eval: Arc<EvalFn<T>>,
    ) -> Self {
        Self {
            kind,
            class,
            description,
            eval,
        }
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    pub fn class(&self) -> FunctionClass {
        self.class
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn with_class(mut self, class: FunctionClass) -> Self {
        self.class = class;
        self
    }

    /// Evaluates at `x > 0`; non-finite results are errors.
    pub fn eval(&self, x: T) -> Result<T> {
        if !(x > T::zero()) || !x.is_finite() {
            return Err(Error::Eval {
                x: x.as_f64(),
                reason: "outside (0, inf)".into(),
            });
        }
        let y = (self.eval)(x)?;
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::Eval {
                x: x.as_f64(),
                reason: format!("non-finite value {y}"),
            })
        }
    }

    /// `lambda * f`.
    pub fn scale(&self, lambda: T) -> Self {
        let inner = Arc::clone(&self.eval);
        Self {
            kind: FunctionKind::Derived,
            class: self.class,
            description: format!("{lambda} * ({})", self.description),
            eval: Arc::new(move |x| Ok(lambda * inner(x)?)),
        }
    }

    /// `f + c`. The result leaves E_0 unless `c = 0`.
    pub fn add_const(&self, c: T) -> Self {
        let inner = Arc::clone(&self.eval);
        let class = if c == T::zero() {
            self.class
        } else {
            FunctionClass::E
        };
        Self {
            kind: FunctionKind::Derived,
            class,
            description: format!("({}) + {c}", self.description),
            eval: Arc::new(move |x| Ok(inner(x)? + c)),
        }
    }

    /// `f + k` for a continuous shift `k`.
    pub fn add_shift(&self, k: &Shift<T>) -> Self {
        let inner = Arc::clone(&self.eval);
        let shift = k.clone();
        Self {
            kind: FunctionKind::Derived,
            class: FunctionClass::E,
            description: format!("({}) + {}", self.description, k.description()),
            eval: Arc::new(move |x| Ok(inner(x)? + shift.eval(x))),
        }
    }

    /// `f o h`.
    pub fn compose(&self, h: &Homeo<T>) -> Self {
        let inner = Arc::clone(&self.eval);
        let map = h.clone();
        Self {
            kind: FunctionKind::Derived,
            class: self.class,
            description: format!("({}) o {}", self.description, h.name()),
            eval: Arc::new(move |x| {
                let y = map.eval(x);
                if !(y > T::zero()) {
                    return Err(Error::Eval {
                        x: x.as_f64(),
                        reason: format!("h(x) = {y} underflows"),
                    });
                }
                inner(y)
            }),
        }
    }

    /// `f o h + k`, the general element of the equivalence class of `f`.
    pub fn transport(&self, h: &Homeo<T>, k: &Shift<T>) -> Self {
        self.compose(h).add_shift(k)
    }
}

/// A continuous function on `[0, inf)` with a finite value at 0: the
/// additive part of the equivalence `f' = f o h + k`.
#[derive(Clone)]
pub struct Shift<T> {
    description: String,
    eval: Arc<dyn Fn(T) -> T + Send + Sync>,
}

impl<T> fmt::Debug for Shift<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Shift").field(&self.description).finish()
    }
}

impl<T: Real> Shift<T> {
    pub fn from_fn<F>(description: impl Into<String>, f: F) -> Self
    where
        F: Fn(T) -> T + Send + Sync + 'static,
    {
        Self {
            description: description.into(),
            eval: Arc::new(f),
        }
    }

    pub fn zero() -> Self {
        Self::from_fn("0", |_| T::zero())
    }

    pub fn constant(c: T) -> Self {
        Self::from_fn(format!("{c}"), move |_| c)
    }

    /// `x/(1+x)`: vanishes at 0 and saturates at 1.
    pub fn saturating() -> Self {
        Self::from_fn("x/(1+x)", |x: T| x / (T::one() + x))
    }

    /// Parses an expression in `x`; it must be finite at 0.
    pub fn expression(source: &str) -> Result<Self> {
        let parsed = ParsedExpr::parse(source)?;
        let at_zero = parsed.eval_f64(0.0);
        if !at_zero.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "shift `{source}` is not finite at 0 (value {at_zero})"
            )));
        }
        Ok(Self::from_fn(source, move |x: T| {
            T::from_f64(parsed.eval_f64(x.as_f64())).unwrap_or(T::nan())
        }))
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn eval(&self, x: T) -> T {
        (self.eval)(x)
    }

    /// `k + c`.
    pub fn add_const(&self, c: T) -> Self {
        let inner = Arc::clone(&self.eval);
        Self::from_fn(format!("({}) + {c}", self.description), move |x| {
            inner(x) + c
        })
    }
}

/// Outcome of the finite-data E / E_0 membership diagnosis.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnosis {
    pub class: FunctionClass,
    /// Suffix minima `min f|(0, 2^-m]` on the probe octaves.
    pub suffix_minima: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Diagnosis {
    pub fn looks_valid(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// Octaves over which the suffix minimum must strictly grow.
const DIAGNOSE_WINDOW: usize = 8;

/// Heuristic check that sampled data looks like an element of E (and E_0
/// when claimed). Violations are reported, never fatal.
pub fn diagnose<T: Real>(f: &EFunction<T>, grid: &GridSpec, tail_bound: T) -> Result<Diagnosis> {
    let profile = sample(f, grid)?;
    let octaves = profile.octave_count();
    let mut suffix = vec![T::infinity(); octaves + 1];
    let mut running = T::infinity();
    for m in (0..octaves).rev() {
        let window = profile.octave_window(m);
        for &v in &profile.values()[window] {
            running = running.min(v);
        }
        suffix[m] = running;
    }
    suffix.truncate(octaves);

    let mut warnings = Vec::new();
    for m in 0..octaves.saturating_sub(DIAGNOSE_WINDOW) {
        if suffix[m + DIAGNOSE_WINDOW] <= suffix[m] {
            let lo = grid.m_min + m as i32;
            warnings.push(format!(
                "minimum of f below 2^-{} does not grow over octaves {}..{} ({} -> {})",
                lo,
                lo,
                lo + DIAGNOSE_WINDOW as i32,
                suffix[m],
                suffix[m + DIAGNOSE_WINDOW]
            ));
        }
    }
    if f.class() == FunctionClass::E0 {
        let x = T::lit(2.0).powi(grid.tail_octaves as i32);
        match f.eval(x) {
            Ok(v) if v.abs() <= tail_bound => {}
            Ok(v) => warnings.push(format!(
                "|f(2^{})| = {} exceeds tail bound {}",
                grid.tail_octaves, v, tail_bound
            )),
            Err(e) => warnings.push(format!("tail not evaluable: {e}")),
        }
    }
    Ok(Diagnosis {
        class: f.class(),
        suffix_minima: suffix.iter().map(|v| v.as_f64()).collect(),
        warnings,
    })
}

/// Serializable description of where to load a function from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionSpec {
    Builtin {
        builtin: String,
        #[serde(default)]
        params: Vec<f64>,
    },
    Csv {
        csv: std::path::PathBuf,
    },
    Expr {
        expr: String,
        #[serde(default = "default_class")]
        class: FunctionClass,
    },
}

fn default_class() -> FunctionClass {
    FunctionClass::E
}

impl FunctionSpec {
    pub fn load<T: Real>(&self) -> Result<EFunction<T>> {
        match self {
            FunctionSpec::Builtin { builtin, params } => EFunction::builtin(builtin, params),
            FunctionSpec::Csv { csv } => from_csv(csv),
            FunctionSpec::Expr { expr, class } => EFunction::expression(expr, *class),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn paper_example_values() {
        let f = EFunction::<f64>::builtin("paper_example", &[]).unwrap();
        assert_eq!(f.eval(1.0).unwrap(), 1.0);
        assert_eq!(f.eval(0.5).unwrap(), 2.0);
        assert_eq!(f.eval(0.125).unwrap(), 8.0);
        let x = 2f64.powf(-0.25);
        assert!(close(f.eval(x).unwrap(), 0.594_603_557_501_360_5, 1e-14));
    }

    #[test]
    fn std_log_at_one_is_zero() {
        let f = EFunction::<f64>::builtin("std_log", &[]).unwrap();
        assert_eq!(f.eval(1.0).unwrap(), 0.0);
    }

    #[test]
    fn gallery_diverges_toward_zero() {
        for name in ["std_log", "paper_example"] {
            let f = EFunction::<f64>::builtin(name, &[]).unwrap();
            let at = |m: i32| f.eval(2f64.powi(-m)).unwrap();
            assert!(at(40) > at(20) && at(20) > at(5), "{name}");
        }
    }

    #[test]
    fn builtin_errors() {
        assert!(matches!(
            EFunction::<f64>::builtin("nope", &[]),
            Err(Error::UnknownBuiltin(_))
        ));
        assert!(matches!(
            EFunction::<f64>::builtin("bounded_osc", &[-1.0]),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn bounded_osc_and_koenigs_closed_forms() {
        let f = EFunction::<f64>::builtin("bounded_osc", &[2.0]).unwrap();
        let u = 4.0 * std::f64::consts::PI / 3.0;
        assert!(close(f.eval((-u).exp()).unwrap(), u + 2.0 * u.sin(), 1e-14));
        let g = EFunction::<f64>::builtin("koenigs_demo", &[]).unwrap();
        assert!(close(g.eval(0.5).unwrap(), 2f64.ln() + 1.0 / 3.0, 1e-15));
    }

    #[test]
    fn eval_rejects_nonpositive_and_nonfinite() {
        let f = EFunction::<f64>::builtin("std_log", &[]).unwrap();
        assert!(f.eval(0.0).is_err());
        assert!(f.eval(-1.0).is_err());
        let g = EFunction::<f64>::from_fn("1/(x-1)", FunctionClass::E, |x| 1.0 / (x - 1.0));
        assert!(g.eval(1.0).is_err());
    }

    #[test]
    fn expression_matches_closed_form() {
        let f = EFunction::<f64>::expression("-ln(x) + x/(1+x)", FunctionClass::E).unwrap();
        let g = EFunction::<f64>::builtin("koenigs_demo", &[]).unwrap();
        for x in [1e-9, 0.3, 1.0, 7.5] {
            assert!(close(f.eval(x).unwrap(), g.eval(x).unwrap(), 1e-14));
        }
        assert!(EFunction::<f64>::expression("ln(", FunctionClass::E).is_err());
    }

    #[test]
    fn combinators() {
        let f = EFunction::<f64>::builtin("std_log", &[]).unwrap();
        let h = Homeo::halve();
        assert!(close(f.compose(&h).eval(0.25).unwrap(), 8f64.ln(), 1e-15));
        assert_eq!(f.scale(3.0).eval(1.0).unwrap(), 0.0);
        assert_eq!(f.add_const(2.0).eval(1.0).unwrap(), 2.0);
        let k = Shift::saturating();
        assert_eq!(f.add_shift(&k).eval(1.0).unwrap(), 0.5);
        assert!(Shift::<f64>::expression("1/x").is_err());
        assert_eq!(Shift::<f64>::expression("2 + x").unwrap().eval(0.0), 2.0);
    }

    #[test]
    fn diagnose_flags_bounded_data() {
        let grid = GridSpec {
            k: 8,
            m_min: 0,
            m_max: 20,
            tail_octaves: 10,
        };
        let good = EFunction::<f64>::builtin("bounded_osc", &[2.0]).unwrap();
        assert!(diagnose(&good, &grid, 1e-2).unwrap().looks_valid());
        let bad = EFunction::<f64>::from_fn("sin(ln x)", FunctionClass::E, |x| x.ln().sin());
        assert!(!diagnose(&bad, &grid, 1e-2).unwrap().looks_valid());
        let e0 = EFunction::<f64>::builtin("paper_example", &[]).unwrap();
        assert!(diagnose(&e0, &grid, 1e-2).unwrap().looks_valid());
        let not_e0 = EFunction::<f64>::builtin("std_log", &[])
            .unwrap()
            .with_class(FunctionClass::E0);
        assert!(!diagnose(&not_e0, &grid, 1e-2).unwrap().looks_valid());
    }

    #[test]
    fn f32_evaluation() {
        let f = EFunction::<f32>::builtin("paper_example", &[]).unwrap();
        assert_eq!(f.eval(0.5f32).unwrap(), 2.0f32);
    }
}
