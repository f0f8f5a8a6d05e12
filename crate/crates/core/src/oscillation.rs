//! Oscillation functionals `f*` and `f#`, the invariant sigma, and checks of
//! the equivalence `f' = f o h + k`.
//!
//! `f*(x) = max(f|[x,1]) - f(x)` is computed by a single descending pass over
//! the geometric grid, carrying the running maximum of the samples seen so
//! far. `f#` is the same pass seeded with the maximum of `f` over
//! `[1, 2^tail]`. Between nodes `f` is assumed continuous; the per-octave cell
//! oscillation is kept so callers can judge whether `K` is fine enough.

use serde::Serialize;

use crate::efunc::grid::{cell_of, interpolate_descending};
use crate::efunc::{sample, EFunction, GridProfile, GridSpec, Shift};
use crate::error::{Error, Result};
use crate::homeo::Homeo;
use crate::real::Real;

/// Tail window length (octaves) for the sigma estimate.
pub const DEFAULT_TAIL_WINDOW: usize = 8;
/// Ratio separating `increasing`/`bounded`/`vanishing` trends.
pub const TREND_HYSTERESIS: f64 = 1.5;
/// Witness tolerance for closed-form inputs.
pub const CLOSED_FORM_TOL: f64 = 1e-9;
/// Witness tolerance for sampled inputs.
pub const SAMPLED_TOL: f64 = 1e-6;
/// Default bound on `|f(2^tail)|` for the E_0 tail check.
pub const DEFAULT_TAIL_BOUND: f64 = 1e-2;

const ROUNDOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Star,
    Sharp,
}

/// Node values of `f*` (or `f#`) with per-octave statistics.
#[derive(Debug, Clone, Serialize)]
pub struct OscillationProfile<T> {
    pub variant: Variant,
    /// The grid, always starting at `x = 1`.
    pub grid: GridSpec,
    pub xs: Vec<T>,
    pub values: Vec<T>,
    pub deficits: Vec<T>,
    /// Running maximum at each node.
    pub running_max: Vec<T>,
    /// Node index where the running maximum was attained.
    #[serde(skip)]
    argmax: Vec<usize>,
    /// `max f` over `[1, 2^tail]`, for the sharp variant.
    pub tail_max: Option<T>,
    pub octave_sup: Vec<T>,
    pub octave_min: Vec<T>,
    /// Largest `|f(x_{i+1}) - f(x_i)|` inside each octave.
    pub cell_oscillation: Vec<T>,
}

impl<T: Real> OscillationProfile<T> {
    fn build(variant: Variant, profile: &GridProfile<T>, start: T, tail_max: Option<T>) -> Self {
        let values = profile.values().to_vec();
        let mut running_max = Vec::with_capacity(values.len());
        let mut argmax = Vec::with_capacity(values.len());
        let mut deficits = Vec::with_capacity(values.len());
        let mut run = start;
        let mut at = 0;
        for (i, &v) in values.iter().enumerate() {
            if v > run {
                run = v;
                at = i;
            }
            running_max.push(run);
            argmax.push(at);
            deficits.push(run - v);
        }
        let octaves = profile.octave_count();
        let mut octave_sup = Vec::with_capacity(octaves);
        let mut octave_min = Vec::with_capacity(octaves);
        let mut cell_oscillation = Vec::with_capacity(octaves);
        for m in 0..octaves {
            let w = profile.octave_window(m);
            let d = &deficits[w.clone()];
            octave_sup.push(d.iter().copied().fold(T::neg_infinity(), T::max));
            octave_min.push(d.iter().copied().fold(T::infinity(), T::min));
            let v = &values[w];
            cell_oscillation.push(
                v.windows(2)
                    .map(|p| (p[1] - p[0]).abs())
                    .fold(T::zero(), T::max),
            );
        }
        Self {
            variant,
            grid: *profile.grid(),
            xs: profile.xs().to_vec(),
            values,
            deficits,
            running_max,
            argmax,
            tail_max,
            octave_sup,
            octave_min,
            cell_oscillation,
        }
    }

    pub fn octave_count(&self) -> usize {
        self.octave_sup.len()
    }

    /// Local node index of `2^{-m}`.
    pub fn octave_node(&self, m: usize) -> usize {
        m * self.grid.k as usize
    }

    /// Deficit at an arbitrary `x` in range, linear in `ln x` between nodes.
    pub fn interpolate(&self, x: T) -> Option<T> {
        interpolate_descending(&self.xs, &self.deficits, x)
    }

    /// Largest `|f(x_{j+1}) - f(x_j)|` over the cells within `radius` of
    /// the cell containing `x`.
    pub fn local_oscillation(&self, x: T, radius: usize) -> Option<T> {
        let j = cell_of(&self.xs, x)?;
        Some(self.cell_range_oscillation(j.saturating_sub(radius), j + radius))
    }

    fn cell_range_oscillation(&self, lo: usize, hi: usize) -> T {
        let hi = hi.min(self.values.len().saturating_sub(2));
        (lo..=hi)
            .map(|c| (self.values[c + 1] - self.values[c]).abs())
            .fold(T::zero(), T::max)
    }

    /// `x,f,fstar` rows.
    pub fn rows(&self) -> impl Iterator<Item = (T, T, T)> + '_ {
        self.xs
            .iter()
            .zip(&self.values)
            .zip(&self.deficits)
            .map(|((&x, &v), &d)| (x, v, d))
    }
}

/// `f*` on the grid.
pub fn star<T: Real>(f: &EFunction<T>, grid: &GridSpec) -> Result<OscillationProfile<T>> {
    let profile = sample(f, &grid.from_one())?;
    star_of_profile(&profile)
}

/// `f*` from sampled values that start at `x = 1`.
pub fn star_of_profile<T: Real>(profile: &GridProfile<T>) -> Result<OscillationProfile<T>> {
    if profile.grid().m_min != 0 {
        return Err(Error::Config(
            "f* needs a profile starting at x = 1 (m_min = 0)".into(),
        ));
    }
    Ok(OscillationProfile::build(
        Variant::Star,
        profile,
        T::neg_infinity(),
        None,
    ))
}

/// `f#` on the grid; `f` must pass the E_0 tail check `|f(2^tail)| <= tail_bound`.
pub fn sharp<T: Real>(
    f: &EFunction<T>,
    grid: &GridSpec,
    tail_bound: T,
) -> Result<OscillationProfile<T>> {
    let grid = grid.from_one();
    let tail: Vec<T> = grid.tail_nodes();
    let horizon = *tail.last().unwrap();
    let at_horizon = f.eval(horizon)?;
    if at_horizon.abs() > tail_bound {
        return Err(Error::TailCheck {
            x: horizon.as_f64(),
            value: at_horizon.as_f64(),
            bound: tail_bound.as_f64(),
        });
    }
    let mut tail_max = T::neg_infinity();
    for &x in &tail {
        tail_max = tail_max.max(f.eval(x)?);
    }
    let profile = sample(f, &grid)?;
    Ok(OscillationProfile::build(
        Variant::Sharp,
        &profile,
        tail_max,
        Some(tail_max),
    ))
}

pub fn oscillation<T: Real>(
    f: &EFunction<T>,
    grid: &GridSpec,
    variant: Variant,
) -> Result<OscillationProfile<T>> {
    match variant {
        Variant::Star => star(f, grid),
        Variant::Sharp => sharp(f, grid, T::lit(DEFAULT_TAIL_BOUND)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Increasing,
    Bounded,
    Vanishing,
}

impl Trend {
    pub fn as_str(&self) -> &'static str {
        match self {
            Trend::Increasing => "increasing",
            Trend::Bounded => "bounded",
            Trend::Vanishing => "vanishing",
        }
    }
}

/// Finite-data stand-in for `limsup_{x -> 0} f*(x)`.
#[derive(Debug, Clone, Serialize)]
pub struct SigmaEstimate<T> {
    pub s_m: Vec<T>,
    pub tail_window: usize,
    pub sigma_hat: T,
    /// Max of `s_m` over the window preceding the tail window.
    pub preceding_max: T,
    pub trend: Trend,
}

/// Per-octave sups, tail-window max and trend of an oscillation profile.
pub fn sigma_from_profile<T: Real>(
    p: &OscillationProfile<T>,
    window: usize,
) -> Result<SigmaEstimate<T>> {
    let n = p.octave_count();
    if window == 0 || n < 2 * window {
        return Err(Error::GridTooShort {
            needed: 2 * window.max(1),
            available: n,
        });
    }
    let s_m = p.octave_sup.clone();
    let max_of = |s: &[T]| s.iter().copied().fold(T::zero(), T::max);
    let sigma_hat = max_of(&s_m[n - window..]);
    let preceding_max = max_of(&s_m[n - 2 * window..n - window]);

    // roundoff floor scaled by the magnitude of f in the tail
    let tail_nodes = p.octave_node(n - window)..p.values.len();
    let scale = p.values[tail_nodes]
        .iter()
        .fold(T::one(), |a, v| a.max(v.abs()));
    let floor = T::lit(ROUNDOFF) * scale;
    let hysteresis = T::lit(TREND_HYSTERESIS);
    let trend = if sigma_hat <= floor || sigma_hat * hysteresis < preceding_max {
        Trend::Vanishing
    } else if sigma_hat <= hysteresis * preceding_max {
        Trend::Bounded
    } else {
        Trend::Increasing
    };
    Ok(SigmaEstimate {
        s_m,
        tail_window: window,
        sigma_hat,
        preceding_max,
        trend,
    })
}

pub fn sigma_estimate<T: Real>(
    f: &EFunction<T>,
    grid: &GridSpec,
    variant: Variant,
    window: usize,
) -> Result<SigmaEstimate<T>> {
    sigma_from_profile(&oscillation(f, grid, variant)?, window)
}

/// `(h, k, lambda)` witnessing `lambda f = f o h + k` or `f' = f o h + k`.
#[derive(Debug, Clone)]
pub struct EquivalenceWitness<T> {
    pub h: Homeo<T>,
    pub k: Shift<T>,
    pub lambda: T,
}

impl<T: Real> EquivalenceWitness<T> {
    pub fn new(lambda: T, h: Homeo<T>, k: Shift<T>) -> Self {
        Self { h, k, lambda }
    }

    /// Checks `h(0) = 0` and `k(0)` finite.
    pub fn validate(&self) -> Result<()> {
        let h0 = self.h.eval(T::zero());
        if h0 != T::zero() {
            return Err(Error::NotFixingZero { value: h0.as_f64() });
        }
        if !self.k.eval(T::zero()).is_finite() {
            return Err(Error::InvalidParameter(format!(
                "shift `{}` is not finite at 0",
                self.k.description()
            )));
        }
        if !(self.lambda > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Which identity a witness is checked against.
#[derive(Debug, Clone, Copy)]
pub enum Relation<'a, T> {
    /// `f2 = f o h + k`; lambda is ignored.
    Equivalent(&'a EFunction<T>),
    /// `lambda f = f o h + k`.
    SelfSimilar,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport<T> {
    pub lambda: T,
    pub homeo: String,
    pub shift: String,
    pub max_abs: T,
    /// `max |lhs - rhs| / max(1, |lhs|)`.
    pub max_rel: T,
    pub worst_x: T,
    pub tol: T,
    pub pass: bool,
}

/// Max residual of the witnessed identity over the grid nodes.
pub fn check_witness<T: Real>(
    f: &EFunction<T>,
    relation: Relation<'_, T>,
    w: &EquivalenceWitness<T>,
    grid: &GridSpec,
    tol: T,
) -> Result<WitnessReport<T>> {
    w.validate()?;
    let xs: Vec<T> = grid.nodes();
    let mut prev_h = T::infinity();
    let (mut max_abs, mut max_rel, mut worst_x) = (T::zero(), T::zero(), T::nan());
    for &x in &xs {
        let hx = w.h.eval(x);
        if !(hx < prev_h) {
            return Err(Error::NotIncreasing { x: x.as_f64() });
        }
        prev_h = hx;
        let lhs = match relation {
            Relation::Equivalent(f2) => f2.eval(x)?,
            Relation::SelfSimilar => w.lambda * f.eval(x)?,
        };
        let rhs = f.eval(hx)? + w.k.eval(x);
        let abs = (lhs - rhs).abs();
        let rel = abs / lhs.abs().max(T::one());
        if abs > max_abs {
            max_abs = abs;
        }
        if rel > max_rel || worst_x.is_nan() {
            max_rel = rel;
            worst_x = x;
        }
    }
    let lambda = match relation {
        Relation::Equivalent(_) => T::one(),
        Relation::SelfSimilar => w.lambda,
    };
    Ok(WitnessReport {
        lambda,
        homeo: w.h.name().to_string(),
        shift: w.k.description().to_string(),
        max_abs,
        max_rel,
        worst_x,
        tol,
        pass: max_rel <= tol,
    })
}

/// Comparison of `(f o h)*` (or `#`) at `x` with `f*` (or `#`) at `h(x)`.
#[derive(Debug, Clone, Serialize)]
pub struct PushforwardReport<T> {
    pub homeo: String,
    /// Located threshold `a`; `None` for the sharp variant.
    pub threshold: Option<T>,
    pub compared: usize,
    pub max_err: T,
    /// Largest `err - tol` over compared nodes; `<= 0` on success.
    pub max_excess: T,
    pub pass: bool,
}

/// Upper bound on octaves of the auxiliary grid used to evaluate `f*` at `h(x)`.
const MAX_EXTENDED_OCTAVES: i32 = 400;

/// Checks `(f o h)* = f* o h` below the located threshold (star) or
/// `(f o h)# = f# o h` on all of `(0, 1]` (sharp).
pub fn pushforward_check<T: Real>(
    f: &EFunction<T>,
    h: &Homeo<T>,
    grid: &GridSpec,
    variant: Variant,
    tail_bound: T,
) -> Result<PushforwardReport<T>> {
    let grid = grid.from_one();
    let fh = f.compose(h);
    let lhs = match variant {
        Variant::Star => star(&fh, &grid)?,
        Variant::Sharp => sharp(&fh, &grid, tail_bound)?,
    };
    let ys: Vec<T> = lhs.xs.iter().map(|&x| h.eval(x)).collect();
    let y_min = ys.iter().copied().fold(T::infinity(), T::min);
    let needed = (-y_min.log2())
        .ceil()
        .to_i32()
        .unwrap_or(i32::MAX)
        .saturating_add(1);
    if needed > MAX_EXTENDED_OCTAVES {
        return Err(Error::Config(format!(
            "h maps the grid below 2^-{MAX_EXTENDED_OCTAVES}"
        )));
    }
    let ext_grid = grid.with_m_max(needed.max(grid.m_max));
    let rhs = match variant {
        Variant::Star => star(f, &ext_grid)?,
        Variant::Sharp => sharp(f, &ext_grid, tail_bound)?,
    };

    let start = match variant {
        Variant::Star => locate_threshold(f, h, &ys, &rhs)?,
        Variant::Sharp => 0,
    };
    let threshold = match variant {
        Variant::Star => Some(lhs.xs.get(start).copied().unwrap_or(T::zero())),
        Variant::Sharp => None,
    };

    let rnd = T::lit(ROUNDOFF);
    let four = T::lit(4.0);
    let node_of = |y: T| rhs.xs.binary_search_by(|v| y.partial_cmp(v).unwrap()).ok();
    // h maps consecutive nodes to consecutive nodes: both sides sample f identically
    let node_preserving = ys
        .iter()
        .filter(|&&y| y <= T::one())
        .map(|&y| node_of(y))
        .collect::<Option<Vec<_>>>()
        .is_some_and(|idx| idx.windows(2).all(|w| w[1] == w[0] + 1));
    let (mut compared, mut max_err, mut max_excess) = (0usize, T::zero(), T::neg_infinity());
    for i in start..lhs.xs.len() {
        let y = ys[i];
        if y > T::one() {
            continue;
        }
        let Some(expected) = rhs.interpolate(y) else {
            continue;
        };
        let err = (lhs.deficits[i] - expected).abs();
        let scale = lhs.running_max[i].abs().max(T::one());
        let tol = if node_preserving {
            rnd * scale
        } else {
            let local = rhs.local_oscillation(y, 2).unwrap_or(T::zero());
            let j = cell_of(&rhs.xs, y).unwrap_or(0);
            let peak = [j, j + 1]
                .into_iter()
                .map(|n| rhs.argmax[n.min(rhs.xs.len() - 1)])
                .map(|a| rhs.cell_range_oscillation(a.saturating_sub(1), a))
                .fold(T::zero(), T::max);
            // the left side samples f o h on its own nodes and may miss the max by a cell
            let a = lhs.argmax[i];
            let lhs_peak = lhs.cell_range_oscillation(a.saturating_sub(1), a);
            four * local + peak + lhs_peak + rnd * scale
        };
        compared += 1;
        max_err = max_err.max(err);
        max_excess = max_excess.max(err - tol);
    }
    Ok(PushforwardReport {
        homeo: h.name().to_string(),
        threshold,
        compared,
        max_err,
        max_excess,
        pass: compared > 0 && max_excess <= T::zero(),
    })
}

/// First node index below which `max f|[h(x),1] = max f|[h(x),h(1)]` on the samples.
fn locate_threshold<T: Real>(
    f: &EFunction<T>,
    h: &Homeo<T>,
    ys: &[T],
    ext: &OscillationProfile<T>,
) -> Result<usize> {
    let h1 = h.eval(T::one());
    // max f on [min(h(1),1), max(h(1),1)] from the fine grid plus endpoints
    let (lo, hi) = if h1 <= T::one() {
        (h1, T::one())
    } else {
        (T::one(), h1)
    };
    let mut outside = f.eval(lo)?.max(f.eval(hi)?);
    for (&x, &v) in ext.xs.iter().zip(&ext.values) {
        if x >= lo && x <= hi {
            outside = outside.max(v);
        }
    }
    let f1 = f.eval(T::one())?;
    let mut run_full = T::neg_infinity(); // max over [h(x), h(1)]
    let mut run_unit = f1; // max over [h(x), 1]
    let mut last_mismatch = None;
    for (i, &y) in ys.iter().enumerate() {
        let v = f.eval(y)?;
        run_full = run_full.max(v);
        let over_unit = if h1 <= T::one() {
            run_full.max(outside)
        } else {
            if y <= T::one() {
                run_unit = run_unit.max(v);
            }
            run_unit
        };
        if run_full != over_unit {
            last_mismatch = Some(i);
        }
    }
    Ok(last_mismatch.map_or(0, |i| i + 1))
}

/// Pass/fail of one Lemma 2 item with its measured quantity.
#[derive(Debug, Clone, Serialize)]
pub struct ItemResult<T> {
    pub pass: bool,
    pub measured: T,
    pub tol: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationResult<T> {
    pub early_octave: usize,
    pub late_octave: usize,
    pub delta_early: T,
    pub delta_late: T,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ZeroSequenceResult {
    /// Octaves whose minimum of `f*` exceeds `1e-6 (1 + s_m)`.
    pub failing_octaves: Vec<usize>,
    /// Whether every window of `tail_window` octaves contains a near-zero.
    pub zeros_recur: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma2Report<T> {
    pub lambda: T,
    pub c: T,
    pub homeo: String,
    pub shift: String,
    pub scaling: ItemResult<T>,
    pub constant_shift: ItemResult<T>,
    pub pushforward: PushforwardReport<T>,
    pub perturbation: PerturbationResult<T>,
    pub zero_sequence: ZeroSequenceResult,
}

impl<T> Lemma2Report<T> {
    pub fn all_pass(&self) -> bool {
        self.scaling.pass
            && self.constant_shift.pass
            && self.pushforward.pass
            && self.perturbation.pass
            && self.zero_sequence.pass
    }
}

/// Octaves at which the perturbation difference `(f+k)* - f*` is compared.
pub const PERTURBATION_OCTAVES: (usize, usize) = (5, 30);
/// Relative threshold for a per-octave zero of `f*`.
pub const ZERO_SEQUENCE_TOL: f64 = 1e-6;

/// Runs the five Lemma 2 checks for `f*`.
pub fn lemma2_suite<T: Real>(
    f: &EFunction<T>,
    lambda: T,
    c: T,
    h: &Homeo<T>,
    k: &Shift<T>,
    grid: &GridSpec,
) -> Result<Lemma2Report<T>> {
    let grid = grid.from_one();
    let base = star(f, &grid)?;
    let rnd = T::lit(ROUNDOFF);

    // (1) (lambda f)* = lambda f*
    let scaled = star(&f.scale(lambda), &grid)?;
    let scaling_err = base
        .deficits
        .iter()
        .zip(&scaled.deficits)
        .zip(&base.running_max)
        .zip(&base.values)
        .map(|(((&d, &ds), &m), &v)| {
            (ds - lambda * d).abs() / (lambda.abs() * m.abs().max(v.abs())).max(T::one())
        })
        .fold(T::zero(), T::max);

    // (2) (f + c)* = f*
    let shifted = star(&f.add_const(c), &grid)?;
    let shift_err = base
        .deficits
        .iter()
        .zip(&shifted.deficits)
        .zip(&base.running_max)
        .map(|((&d, &ds), &m)| (ds - d).abs() / (m.abs() + c.abs()).max(T::one()))
        .fold(T::zero(), T::max);

    // (3) (f o h)* = f* o h below a
    let pushforward = pushforward_check(f, h, &grid, Variant::Star, T::lit(DEFAULT_TAIL_BOUND))?;

    // (4) (f + k)* - f* -> 0
    let (early, late) = PERTURBATION_OCTAVES;
    let perturbation = if base.octave_count() >= late {
        let perturbed = star(&f.add_shift(k), &grid)?;
        let delta = |m: usize| {
            let i = base.octave_node(m);
            (perturbed.deficits[i] - base.deficits[i]).abs()
        };
        let (de, dl) = (delta(early), delta(late));
        let floor = rnd * base.values[base.octave_node(late)].abs().max(T::one());
        let shrinks = dl < de || dl <= floor;
        PerturbationResult {
            early_octave: early,
            late_octave: late,
            delta_early: de,
            delta_late: dl,
            pass: shrinks && de < T::one() && dl < T::one(),
        }
    } else {
        PerturbationResult {
            early_octave: early,
            late_octave: late,
            delta_early: T::nan(),
            delta_late: T::nan(),
            pass: false,
        }
    };

    // (5) zeros of f* in every octave
    let ztol = T::lit(ZERO_SEQUENCE_TOL);
    let near_zero = |m: usize| base.octave_min[m] <= ztol * (T::one() + base.octave_sup[m]);
    let failing_octaves: Vec<usize> = (0..base.octave_count())
        .filter(|&m| !near_zero(m))
        .collect();
    let w = DEFAULT_TAIL_WINDOW.min(base.octave_count().max(1));
    let zeros_recur = (0..base.octave_count())
        .collect::<Vec<_>>()
        .chunks(w)
        .all(|chunk| chunk.iter().any(|&m| near_zero(m)));

    Ok(Lemma2Report {
        lambda,
        c,
        homeo: h.name().to_string(),
        shift: k.description().to_string(),
        scaling: ItemResult {
            pass: scaling_err <= rnd,
            measured: scaling_err,
            tol: rnd,
        },
        constant_shift: ItemResult {
            pass: shift_err <= rnd,
            measured: shift_err,
            tol: rnd,
        },
        pushforward,
        perturbation,
        zero_sequence: ZeroSequenceResult {
            pass: failing_octaves.is_empty(),
            failing_octaves,
            zeros_recur,
        },
    })
}
