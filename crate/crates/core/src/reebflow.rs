//! Flows on the punctured quarter-plane whose orbits are the Reeb leaves.
//!
//! Interior leaves are hyperbolas `xi * eta = c`. In leaf coordinates
//! `(c, s) = (xi eta, ln xi)` every flow here is `ds/dt = v(c, s)` with a
//! speed that is piecewise linear in `s`, so orbits and transit times are
//! integrated in closed form.

use serde::{Deserialize, Serialize};

use crate::efunc::{EFunction, FunctionSpec, GridSpec};
use crate::error::{Error, Result};
use crate::real::Real;

/// Default transit-time ceiling for event detection on custom transversals.
pub const TIME_CEILING: f64 = 1e15;
/// Bisection tolerance in time for custom transversals.
pub const CROSSING_TOL: f64 = 1e-10;
/// Minimum transit target enforced by the positivity shift.
pub const POSITIVITY_FLOOR: f64 = 0.1;

/// A point of `P = {xi >= 0, eta >= 0} \ {(0, 0)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarterPlanePoint<T> {
    pub xi: T,
    pub eta: T,
}

impl<T: Real> QuarterPlanePoint<T> {
    pub fn new(xi: T, eta: T) -> Result<Self> {
        let ok = xi >= T::zero() && eta >= T::zero() && xi.is_finite() && eta.is_finite();
        if !ok || (xi == T::zero() && eta == T::zero()) {
            return Err(Error::OutsideQuarterPlane {
                xi: xi.as_f64(),
                eta: eta.as_f64(),
            });
        }
        Ok(Self { xi, eta })
    }

    pub fn is_interior(&self) -> bool {
        self.xi > T::zero() && self.eta > T::zero()
    }

    pub fn leaf(&self) -> T {
        self.xi * self.eta
    }
}

/// `c = xi eta`, `s = ln xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeafCoords<T> {
    pub c: T,
    pub s: T,
}

impl<T: Real> LeafCoords<T> {
    pub fn from_point(p: &QuarterPlanePoint<T>) -> Result<Self> {
        if !p.is_interior() {
            return Err(Error::BoundaryPoint {
                xi: p.xi.as_f64(),
                eta: p.eta.as_f64(),
            });
        }
        Ok(Self {
            c: p.xi * p.eta,
            s: p.xi.ln(),
        })
    }

    pub fn to_point(&self) -> Result<QuarterPlanePoint<T>> {
        let xi = self.s.exp();
        let eta = self.c / xi;
        if !(xi > T::zero()) || !xi.is_finite() || !(eta > T::zero()) || !eta.is_finite() {
            return Err(Error::Overflow(format!(
                "leaf position s = {} on c = {} is not representable",
                self.s, self.c
            )));
        }
        Ok(QuarterPlanePoint { xi, eta })
    }
}

/// `(xi, eta)` after time `t` of the standard flow.
pub fn standard_step<T: Real>(t: T, p: &QuarterPlanePoint<T>) -> Result<QuarterPlanePoint<T>> {
    if !(t.abs() <= T::exp_limit()) {
        return Err(Error::Overflow(format!(
            "|t| = {} exceeds {}",
            t.abs(),
            T::exp_limit()
        )));
    }
    let xi = p.xi * t.exp();
    let eta = p.eta * (-t).exp();
    if !xi.is_finite() || !eta.is_finite() {
        return Err(Error::Overflow(format!(
            "standard flow leaves the representable range at t = {t}"
        )));
    }
    Ok(QuarterPlanePoint { xi, eta })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    Standard,
    Realized,
    TimeScaled,
}

/// Prescribed transit targets on leaves `c < c1`.
#[derive(Debug, Clone)]
pub struct Realization<T> {
    pub f: EFunction<T>,
    pub c0: T,
    pub c1: T,
    /// Constant added to `f` so that it is at least the positivity floor on the grid.
    pub shift: T,
}

impl<T: Real> Realization<T> {
    /// Transit time across `s in [ln c, 0]` on leaf `c`.
    pub fn target(&self, c: T) -> Result<T> {
        let std = -c.ln();
        if c >= self.c1 {
            return Ok(std);
        }
        let prescribed = self.f.eval(c)? + self.shift;
        let t = if c <= self.c0 {
            prescribed
        } else {
            let u = smoothstep((c - self.c0) / (self.c1 - self.c0));
            (T::one() - u) * prescribed + u * std
        };
        if !(t > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "transit target {t} at c = {c} is not positive"
            )));
        }
        Ok(t)
    }
}

fn smoothstep<T: Real>(u: T) -> T {
    let u = u.max(T::zero()).min(T::one());
    u * u * (T::lit(3.0) - T::lit(2.0) * u)
}

/// A flow on P preserving the Reeb leaves.
#[derive(Debug, Clone)]
pub struct Flow<T> {
    pub kind: FlowKind,
    pub realization: Option<Realization<T>>,
    /// Time multiplier: the flow is `phi^{lambda t}` of the unscaled field.
    pub lambda: T,
}

/// One piece of a leaf's speed profile.
#[derive(Debug, Clone, Copy)]
enum Piece<T> {
    Unit,
    /// `v(s) = v0 + beta (s - a)`.
    Ramp {
        a: T,
        v0: T,
        beta: T,
    },
    /// Constant speed `len / target`, parametrized so a full pass takes `target` exactly.
    Uniform {
        len: T,
        target: T,
    },
}

impl<T: Real> Piece<T> {
    fn speed(&self, s: T) -> T {
        match *self {
            Piece::Unit => T::one(),
            Piece::Ramp { a, v0, beta } => v0 + beta * (s - a),
            Piece::Uniform { len, target } => len / target,
        }
    }

    /// Time to move from `from` to `to` (signed).
    fn time(&self, from: T, to: T) -> T {
        match *self {
            Piece::Unit => to - from,
            Piece::Ramp { beta, .. } => {
                let v = self.speed(from);
                if beta == T::zero() {
                    (to - from) / v
                } else {
                    (beta * (to - from) / v).ln_1p() / beta
                }
            }
            Piece::Uniform { len, target } => target * ((to - from) / len),
        }
    }

    /// Position after time `tau` starting from `s`.
    fn advance(&self, s: T, tau: T) -> T {
        match *self {
            Piece::Unit => s + tau,
            Piece::Ramp { beta, .. } => {
                let v = self.speed(s);
                if beta == T::zero() {
                    s + v * tau
                } else {
                    s + v * (beta * tau).exp_m1() / beta
                }
            }
            Piece::Uniform { len, target } => s + len * (tau / target),
        }
    }
}

/// Speed profile of one leaf: unit speed outside `[sc - 1, 1]`.
struct LeafProfile<T> {
    /// Segment boundaries `sc - 1, sc, 0, 1`.
    knots: [T; 4],
    /// Pieces on `(-inf, k0], [k0, k1], [k1, k2], [k2, k3], [k3, inf)`.
    pieces: [Piece<T>; 5],
}

impl<T: Real> LeafProfile<T> {
    fn new(c: T, target: T) -> Self {
        let sc = c.ln();
        let len = -sc;
        let r = len / target;
        let a = sc - T::one();
        Self {
            knots: [a, sc, T::zero(), T::one()],
            pieces: [
                Piece::Unit,
                Piece::Ramp {
                    a,
                    v0: T::one(),
                    beta: r - T::one(),
                },
                Piece::Uniform { len, target },
                Piece::Ramp {
                    a: T::zero(),
                    v0: r,
                    beta: T::one() - r,
                },
                Piece::Unit,
            ],
        }
    }

    fn bounds(&self, i: usize) -> (T, T) {
        let lo = if i == 0 {
            T::neg_infinity()
        } else {
            self.knots[i - 1]
        };
        let hi = if i == 4 { T::infinity() } else { self.knots[i] };
        (lo, hi)
    }

    /// Segment used when moving forward from `s` (`lo <= s < hi`) or
    /// backward (`lo < s <= hi`).
    fn segment(&self, s: T, forward: bool) -> usize {
        let below = |k: T| if forward { k <= s } else { k < s };
        self.knots.iter().filter(|&&k| below(k)).count()
    }

    fn speed(&self, s: T) -> T {
        self.pieces[self.segment(s, true)].speed(s)
    }

    fn advance(&self, s0: T, t: T) -> T {
        let forward = t >= T::zero();
        let mut s = s0;
        let mut tau = t;
        loop {
            let i = self.segment(s, forward);
            let piece = self.pieces[i];
            let (lo, hi) = self.bounds(i);
            let end = if forward { hi } else { lo };
            if !end.is_finite() {
                return piece.advance(s, tau);
            }
            let need = piece.time(s, end);
            if need.abs() >= tau.abs() {
                return piece.advance(s, tau);
            }
            s = end;
            tau = tau - need;
        }
    }

    /// Signed time to move from `from` to `to`.
    fn transit(&self, from: T, to: T) -> T {
        if from == to {
            return T::zero();
        }
        let (lo, hi, sign) = if from < to {
            (from, to, T::one())
        } else {
            (to, from, -T::one())
        };
        let mut total = T::zero();
        let mut s = lo;
        while s < hi {
            let i = self.segment(s, true);
            let (_, seg_hi) = self.bounds(i);
            let stop = seg_hi.min(hi);
            total = total + self.pieces[i].time(s, stop);
            s = stop;
        }
        sign * total
    }
}

impl<T: Real> Flow<T> {
    pub fn standard() -> Self {
        Self {
            kind: FlowKind::Standard,
            realization: None,
            lambda: T::one(),
        }
    }

    pub fn is_standard_field(&self) -> bool {
        self.realization.is_none()
    }

    pub fn shift(&self) -> T {
        self.realization.as_ref().map_or(T::zero(), |r| r.shift)
    }

    fn profile(&self, c: T) -> Result<Option<LeafProfile<T>>> {
        match &self.realization {
            Some(r) if c < r.c1 => Ok(Some(LeafProfile::new(c, r.target(c)?))),
            _ => Ok(None),
        }
    }

    /// Speed `ds/dt` at leaf coordinates `(c, s)`, including the time scale.
    pub fn speed(&self, c: T, s: T) -> Result<T> {
        let v = self.profile(c)?.map_or(T::one(), |p| p.speed(s));
        Ok(self.lambda * v)
    }

    /// Transit target `T(c)` of the unscaled field.
    pub fn target(&self, c: T) -> Result<T> {
        match &self.realization {
            Some(r) => r.target(c),
            None => Ok(-c.ln()),
        }
    }

    /// Moves `p` along its leaf for time `t`.
    pub fn step(&self, t: T, p: &QuarterPlanePoint<T>) -> Result<QuarterPlanePoint<T>> {
        let scaled = self.lambda * t;
        if self.is_standard_field() {
            return standard_step(scaled, p);
        }
        let LeafCoords { c, s } = LeafCoords::from_point(p)?;
        let s1 = match self.profile(c)? {
            Some(profile) => profile.advance(s, scaled),
            None => s + scaled,
        };
        LeafCoords { c, s: s1 }.to_point()
    }

    /// Time to go from `s_from` to `s_to` on leaf `c`.
    pub fn leaf_transit(&self, c: T, s_from: T, s_to: T) -> Result<T> {
        let raw = match self.profile(c)? {
            Some(profile) => profile.transit(s_from, s_to),
            None => s_to - s_from,
        };
        Ok(raw / self.lambda)
    }

    /// `(t, xi, eta)` samples of the orbit through `p` at `n + 1` evenly spaced times in `[0, t_max]`.
    pub fn orbit(&self, p: &QuarterPlanePoint<T>, t_max: T, n: usize) -> Result<Vec<(T, T, T)>> {
        let n = n.max(1);
        (0..=n)
            .map(|i| {
                let t = t_max * T::lit(i as f64) / T::lit(n as f64);
                let q = self.step(t, p)?;
                Ok((t, q.xi, q.eta))
            })
            .collect()
    }
}

/// `flow_step`.
pub fn flow_step<T: Real>(
    flow: &Flow<T>,
    t: T,
    p: &QuarterPlanePoint<T>,
) -> Result<QuarterPlanePoint<T>> {
    flow.step(t, p)
}

/// Realizes `f` as the transition-time function of a flow for the default
/// transversals, blending to the standard flow on `[c0, c1]`.
pub fn build_flow<T: Real>(f: &EFunction<T>, c0: T, c1: T, grid: &GridSpec) -> Result<Flow<T>> {
    if !(c0 > T::zero() && c0 < c1 && c1 < T::one()) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < c0 < c1 < 1, got c0 = {c0}, c1 = {c1}"
        )));
    }
    grid.validate()?;
    let nodes: Vec<T> = grid.nodes();
    let mut min = T::infinity();
    for &x in nodes.iter().filter(|&&x| x <= c1) {
        min = min.min(f.eval(x)?);
    }
    let floor = T::lit(POSITIVITY_FLOOR);
    let shift = if min <= T::zero() {
        floor - min
    } else {
        T::zero()
    };
    let realization = Realization {
        f: f.clone(),
        c0,
        c1,
        shift,
    };
    for &x in nodes.iter().filter(|&&x| x < c1) {
        realization.target(x)?;
    }
    Ok(Flow {
        kind: FlowKind::Realized,
        realization: Some(realization),
        lambda: T::one(),
    })
}

/// `phi^{lambda t}`.
pub fn time_scale<T: Real>(flow: &Flow<T>, lambda: T) -> Result<Flow<T>> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "time scale must be positive, got {lambda}"
        )));
    }
    Ok(Flow {
        kind: FlowKind::TimeScaled,
        realization: flow.realization.clone(),
        lambda: flow.lambda * lambda,
    })
}

/// A curve meeting every interior leaf once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Curve<T> {
    /// Piecewise-linear path through `(x, xi, eta)` nodes with ascending parameter `x`.
    Polyline(Vec<(T, T, T)>),
}

impl<T: Real> Curve<T> {
    fn eval(&self, x: T) -> Result<QuarterPlanePoint<T>> {
        let Curve::Polyline(nodes) = self;
        let n = nodes.len();
        if n < 2 || x < nodes[0].0 || x > nodes[n - 1].0 {
            return Err(Error::Transversal(format!(
                "parameter {x} outside the polyline range"
            )));
        }
        let j = nodes.partition_point(|node| node.0 <= x).clamp(1, n - 1);
        let (a, b) = (nodes[j - 1], nodes[j]);
        let u = (x - a.0) / (b.0 - a.0);
        QuarterPlanePoint::new(a.1 + u * (b.1 - a.1), a.2 + u * (b.2 - a.2))
    }

    fn validate(&self, start_axis_xi: bool) -> Result<()> {
        let Curve::Polyline(nodes) = self;
        if nodes.len() < 2 {
            return Err(Error::Transversal(
                "a polyline needs at least two nodes".into(),
            ));
        }
        let first = nodes[0];
        let on_axis = if start_axis_xi {
            first.1 == T::zero()
        } else {
            first.2 == T::zero()
        };
        if !on_axis {
            let axis = if start_axis_xi { "eta" } else { "xi" };
            return Err(Error::Transversal(format!(
                "the curve must start on the {axis}-axis"
            )));
        }
        let mut last_c = T::neg_infinity();
        for w in nodes.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Transversal(
                    "polyline parameters must increase".into(),
                ));
            }
        }
        for node in nodes {
            QuarterPlanePoint::new(node.1, node.2)?;
            let c = node.1 * node.2;
            if !(c > last_c) {
                return Err(Error::Transversal(format!(
                    "leaf label is not strictly increasing at x = {}",
                    node.0
                )));
            }
            last_c = c;
        }
        Ok(())
    }

    /// Point on the curve lying on leaf `c`, by bisection in the parameter.
    fn point_on_leaf(&self, c: T) -> Result<QuarterPlanePoint<T>> {
        let Curve::Polyline(nodes) = self;
        let (mut lo, mut hi) = (nodes[0].0, nodes[nodes.len() - 1].0);
        let c_hi = self.eval(hi)?.leaf();
        if !(c > T::zero() && c <= c_hi) {
            return Err(Error::Transversal(format!(
                "leaf {c} is not met by the curve"
            )));
        }
        for _ in 0..200 {
            let mid = lo + (hi - lo) / T::lit(2.0);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid)?.leaf() < c {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.eval(hi)
    }
}

/// The pair of curves between which transition times are measured.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Transversal<T> {
    /// `None` is the default `x -> (x, 1)`.
    pub gamma1: Option<Curve<T>>,
    /// `None` is the default `x -> (1, x)`.
    pub gamma2: Option<Curve<T>>,
}

impl<T: Real> Transversal<T> {
    pub fn defaults() -> Self {
        Self {
            gamma1: None,
            gamma2: None,
        }
    }

    pub fn custom(gamma1: Option<Curve<T>>, gamma2: Option<Curve<T>>) -> Result<Self> {
        if let Some(g) = &gamma1 {
            g.validate(true)?;
        }
        if let Some(g) = &gamma2 {
            g.validate(false)?;
        }
        Ok(Self { gamma1, gamma2 })
    }

    pub fn is_default(&self) -> bool {
        self.gamma1.is_none() && self.gamma2.is_none()
    }

    pub fn gamma1(&self, x: T) -> Result<QuarterPlanePoint<T>> {
        match &self.gamma1 {
            None => QuarterPlanePoint::new(x, T::one()),
            Some(curve) => curve.eval(x),
        }
    }

    fn gamma2_on_leaf(&self, c: T) -> Result<QuarterPlanePoint<T>> {
        match &self.gamma2 {
            None => QuarterPlanePoint::new(T::one(), c),
            Some(curve) => curve.point_on_leaf(c),
        }
    }
}

/// Time for the orbit of `gamma1(x)` to reach `gamma2`.
pub fn transition_time<T: Real>(flow: &Flow<T>, tv: &Transversal<T>, x: T) -> Result<T> {
    if !(x > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "transversal parameter must be positive, got {x}"
        )));
    }
    let p = tv.gamma1(x)?;
    let start = LeafCoords::from_point(&p)?;
    if tv.is_default() {
        return flow.leaf_transit(start.c, start.s, T::zero());
    }
    let q = tv.gamma2_on_leaf(start.c)?;
    let s_target = q.xi.ln();
    crossing_by_bisection(flow, &p, s_target, T::lit(TIME_CEILING))
}

/// Brackets the time at which `ln xi` reaches `s_target` and bisects it.
fn crossing_by_bisection<T: Real>(
    flow: &Flow<T>,
    p: &QuarterPlanePoint<T>,
    s_target: T,
    ceiling: T,
) -> Result<T> {
    let s0 = p.xi.ln();
    if s0 == s_target {
        return Ok(T::zero());
    }
    let dir = if s_target > s0 { T::one() } else { -T::one() };
    let passed = |t: T| -> Result<bool> {
        let s = flow.step(t, p)?.xi.ln();
        Ok((s - s_target) * dir >= T::zero())
    };
    let (mut lo, mut hi) = (T::zero(), dir);
    loop {
        if passed(hi)? {
            break;
        }
        lo = hi;
        hi = hi * T::lit(2.0);
        if hi.abs() > ceiling {
            return Err(Error::NoCrossing {
                x: p.xi.as_f64(),
                ceiling: ceiling.as_f64(),
            });
        }
    }
    let tol = T::lit(CROSSING_TOL);
    while (hi - lo).abs() > tol * T::one().max(hi.abs()) {
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid == lo || mid == hi {
            break;
        }
        if passed(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo + (hi - lo) / T::lit(2.0))
}

/// Transition times on the nodes of `grid`, descending in `x`.
pub fn extract_transitions<T: Real>(
    flow: &Flow<T>,
    tv: &Transversal<T>,
    grid: &GridSpec,
) -> Result<Vec<(T, T)>> {
    grid.validate()?;
    grid.nodes::<T>()
        .into_iter()
        .map(|x| Ok((x, transition_time(flow, tv, x)?)))
        .collect()
}

/// JSON form of a flow: `{kind, c0, c1, shift, lambda, f}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub kind: FlowKind,
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default = "default_c1")]
    pub c1: f64,
    /// Informational; recomputed from `f` when the flow is built.
    #[serde(default)]
    pub shift: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<FunctionSpec>,
}

fn default_c0() -> f64 {
    0.25
}

fn default_c1() -> f64 {
    0.5
}

fn default_lambda() -> f64 {
    1.0
}

impl FlowConfig {
    pub fn standard() -> Self {
        Self {
            kind: FlowKind::Standard,
            c0: default_c0(),
            c1: default_c1(),
            shift: 0.0,
            lambda: 1.0,
            f: None,
        }
    }

    pub fn realized(f: FunctionSpec) -> Self {
        Self {
            kind: FlowKind::Realized,
            f: Some(f),
            ..Self::standard()
        }
    }

    /// Builds the flow; a config carrying `f` is realized regardless of `kind`.
    pub fn build<T: Real>(&self, grid: &GridSpec) -> Result<Flow<T>> {
        let base = match (&self.f, self.kind) {
            (Some(spec), _) => {
                build_flow(&spec.load::<T>()?, T::lit(self.c0), T::lit(self.c1), grid)?
            }
            (None, FlowKind::Realized) => {
                return Err(Error::Config("a realized flow needs a function `f`".into()));
            }
            (None, _) => Flow::standard(),
        };
        if self.lambda == 1.0 && self.kind != FlowKind::TimeScaled {
            Ok(base)
        } else {
            time_scale(&base, T::lit(self.lambda))
        }
    }

    /// Copy with the shift recorded by `flow`.
    pub fn with_recorded_shift<T: Real>(&self, flow: &Flow<T>) -> Self {
        Self {
            shift: flow.shift().as_f64(),
            ..self.clone()
        }
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn flows() -> Vec<Flow<f64>> {
        let grid = GridSpec::new(64, 40);
        let mut out = vec![Flow::standard()];
        for (name, params) in [
            ("paper_example", vec![]),
            ("bounded_osc", vec![2.0]),
            ("koenigs_demo", vec![]),
        ] {
            let f = EFunction::builtin(name, &params).unwrap();
            let flow = build_flow(&f, 0.25, 0.5, &grid).unwrap();
            out.push(time_scale(&flow, 2.0).unwrap());
            out.push(flow);
        }
        out
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn group_law_and_leaf_invariance(
            lx in -4.0f64..4.0,
            ly in -4.0f64..4.0,
            t in -5.0f64..5.0,
            s in -5.0f64..5.0,
        ) {
            let p = QuarterPlanePoint::new(lx.exp(), ly.exp()).unwrap();
            for flow in flows() {
                let two = flow.step(s, &flow.step(t, &p).unwrap()).unwrap();
                let one = flow.step(s + t, &p).unwrap();
                prop_assert!(rel(two.xi, one.xi) < 1e-10 && rel(two.eta, one.eta) < 1e-10);
                prop_assert!(rel(one.leaf(), p.leaf()) < 1e-12);
            }
        }
    }
}
