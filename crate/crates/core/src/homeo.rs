//! Increasing homeomorphisms of `[0, inf)` and their dynamics near 0.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::efunc::{GridSpec, ParsedExpr};
use crate::error::{Error, Result};
use crate::real::Real;

type MapFn<T> = dyn Fn(T) -> T + Send + Sync;

/// Default ceiling for the doubling bracket of the numeric inverse.
pub const INVERSE_CEILING: f64 = 1e300;

/// An increasing bijection of `[0, inf)` fixing 0.
#[derive(Clone)]
pub struct Homeo<T> {
    name: String,
    forward: Arc<MapFn<T>>,
    inverse: Option<Arc<MapFn<T>>>,
    fixed_point: Option<T>,
}

impl<T: fmt::Debug> fmt::Debug for Homeo<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Homeo")
            .field("name", &self.name)
            .field("closed_inverse", &self.inverse.is_some())
            .field("fixed_point", &self.fixed_point)
            .finish()
    }
}

impl<T: Real> Homeo<T> {
    pub fn new<F>(name: impl Into<String>, forward: F) -> Self
    where
        F: Fn(T) -> T + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            forward: Arc::new(forward),
            inverse: None,
            fixed_point: None,
        }
    }

    pub fn with_inverse<F>(mut self, inverse: F) -> Self
    where
        F: Fn(T) -> T + Send + Sync + 'static,
    {
        self.inverse = Some(Arc::new(inverse));
        self
    }

    /// Records a known positive fixed point.
    pub fn with_fixed_point(mut self, b: T) -> Self {
        self.fixed_point = Some(b);
        self
    }

    /// `x/2`.
    pub fn halve() -> Self {
        Self::scaling("halve", T::lit(0.5))
    }

    /// `x^2`, attracting 0 on `(0, 1)`.
    pub fn square() -> Self {
        Self::power("square", T::lit(2.0))
    }

    /// `x / 2^{1/n}`, an `n`-th root of [`Homeo::halve`].
    pub fn root_scale(n: u32) -> Self {
        let factor = T::lit(2.0).powf(-T::lit(n as f64).recip());
        Self::scaling(format!("root_scale:{n}"), factor)
    }

    /// `a x` for `a > 0`.
    pub fn scaling(name: impl Into<String>, a: T) -> Self {
        Self::new(name, move |x| a * x).with_inverse(move |y| y / a)
    }

    /// `x^p` for `p > 0`; fixes 1.
    pub fn pow(p: T) -> Self {
        Self::power(format!("pow:{p}"), p)
    }

    fn power(name: impl Into<String>, p: T) -> Self {
        let q = p.recip();
        Self::new(name, move |x: T| x.powf(p))
            .with_inverse(move |y: T| y.powf(q))
            .with_fixed_point(T::one())
    }

    /// `x (1+x) / (2+x)`: like `x/2` near 0 and like `x` at infinity.
    pub fn soft_halve() -> Self {
        Self::new("soft_halve", |x: T| x * (T::one() + x) / (T::lit(2.0) + x)).with_inverse(
            |y: T| {
                // root of x^2 + (1-y) x - 2y = 0
                let b = T::one() - y;
                let disc = (b * b + T::lit(8.0) * y).sqrt();
                if b > T::zero() {
                    // avoid cancellation in -b + disc
                    T::lit(4.0) * y / (b + disc)
                } else {
                    (disc - b) / T::lit(2.0)
                }
            },
        )
    }

    /// Parses a gallery identifier (`halve`, `square`, `soft_halve`,
    /// `root_scale:N`, `pow:p`) or falls back to an expression in `x`.
    pub fn from_id(id: &str) -> Result<Self> {
        let id = id.trim();
        match id {
            "halve" => return Ok(Self::halve()),
            "square" => return Ok(Self::square()),
            "soft_halve" => return Ok(Self::soft_halve()),
            _ => {}
        }
        if let Some(n) = id.strip_prefix("root_scale:") {
            let n: u32 = n.parse().map_err(|_| Error::UnknownHomeo(id.to_string()))?;
            if n == 0 {
                return Err(Error::InvalidParameter("root_scale needs N >= 1".into()));
            }
            return Ok(Self::root_scale(n));
        }
        if let Some(p) = id.strip_prefix("pow:") {
            let p: f64 = p.parse().map_err(|_| Error::UnknownHomeo(id.to_string()))?;
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "pow exponent must be positive, got {p}"
                )));
            }
            return Ok(Self::pow(T::lit(p)));
        }
        let parsed = ParsedExpr::parse(id).map_err(|_| Error::UnknownHomeo(id.to_string()))?;
        let h = Self::new(id, move |x: T| {
            T::from_f64(parsed.eval_f64(x.as_f64())).unwrap_or(T::nan())
        });
        let at_zero = h.eval(T::zero());
        if at_zero != T::zero() {
            return Err(Error::NotFixingZero {
                value: at_zero.as_f64(),
            });
        }
        Ok(h)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_closed_inverse(&self) -> bool {
        self.inverse.is_some()
    }

    pub fn fixed_point(&self) -> Option<T> {
        self.fixed_point
    }

    pub fn eval(&self, x: T) -> T {
        (self.forward)(x)
    }

    /// `h^{-1}(y)`, from the closed form when known, else by bisection.
    pub fn eval_inverse(&self, y: T) -> Result<T> {
        match &self.inverse {
            Some(inv) => Ok(inv(y)),
            None => self.bisect_inverse(y, T::lit(INVERSE_CEILING)),
        }
    }

    /// Bisection inverse with a doubling bracket capped at `ceiling`.
    pub fn bisect_inverse(&self, y: T, ceiling: T) -> Result<T> {
        if y == T::zero() {
            return Ok(T::zero());
        }
        if !(y > T::zero()) || !y.is_finite() {
            return Err(Error::InverseBracket {
                y: y.as_f64(),
                ceiling: ceiling.as_f64(),
            });
        }
        let two = T::lit(2.0);
        let (mut lo, mut hi);
        if self.eval(T::one()) >= y {
            hi = T::one();
            lo = T::lit(0.5);
            while self.eval(lo) > y {
                hi = lo;
                lo = lo / two;
                if lo == T::zero() {
                    break;
                }
            }
        } else {
            lo = T::one();
            hi = two;
            while self.eval(hi) < y {
                lo = hi;
                hi = hi * two;
                if hi > ceiling || !hi.is_finite() {
                    return Err(Error::InverseBracket {
                        y: y.as_f64(),
                        ceiling: ceiling.as_f64(),
                    });
                }
            }
        }
        // invariant: h(lo) <= y <= h(hi)
        loop {
            let mid = lo + (hi - lo) / two;
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (dl, dh) = ((self.eval(lo) - y).abs(), (self.eval(hi) - y).abs());
        Ok(if dl < dh { lo } else { hi })
    }

    /// The `n`-fold composition at `x`; negative `n` iterates the inverse.
    pub fn iterate(&self, n: i64, x: T) -> Result<T> {
        let mut y = x;
        if n >= 0 {
            for _ in 0..n {
                y = self.eval(y);
            }
        } else {
            for _ in 0..n.unsigned_abs() {
                y = self.eval_inverse(y)?;
            }
        }
        Ok(y)
    }

    /// `self o other`.
    pub fn compose(&self, other: &Homeo<T>) -> Homeo<T> {
        let (f, g) = (Arc::clone(&self.forward), Arc::clone(&other.forward));
        let mut out = Homeo::new(format!("{} o {}", self.name, other.name), move |x| f(g(x)));
        if let (Some(fi), Some(gi)) = (&self.inverse, &other.inverse) {
            let (fi, gi) = (Arc::clone(fi), Arc::clone(gi));
            out.inverse = Some(Arc::new(move |y| gi(fi(y))));
        }
        out
    }

    /// `h^n` for `n >= 1` as a new homeomorphism.
    pub fn power_of(&self, n: u32) -> Homeo<T> {
        let base = self.clone();
        let mut out = Homeo::new(format!("({})^{n}", self.name), move |x| {
            (0..n).fold(x, |y, _| base.eval(y))
        });
        if let Some(inv) = &self.inverse {
            let inv = Arc::clone(inv);
            out.inverse = Some(Arc::new(move |y| (0..n).fold(y, |v, _| inv(v))));
        }
        out.fixed_point = self.fixed_point;
        out
    }

    /// The inverse as a homeomorphism.
    pub fn inverse(&self) -> Homeo<T> {
        let base = self.clone();
        let mut out = Homeo::new(format!("({})^-1", self.name), move |y| {
            base.eval_inverse(y).unwrap_or(T::nan())
        });
        out.inverse = Some(Arc::clone(&self.forward));
        out.fixed_point = self.fixed_point;
        out
    }

    /// Checks `h(0) = 0` and strict increase on the nodes of `probe`
    /// together with its tail nodes.
    pub fn verify(&self, probe: &GridSpec) -> Result<()> {
        let at_zero = self.eval(T::zero());
        if at_zero != T::zero() {
            return Err(Error::NotFixingZero {
                value: at_zero.as_f64(),
            });
        }
        let xs = probe_nodes::<T>(probe);
        let mut prev = T::zero();
        for &x in &xs {
            let y = self.eval(x);
            if !(y > prev) {
                return Err(Error::NotIncreasing { x: x.as_f64() });
            }
            prev = y;
        }
        Ok(())
    }
}

/// Ascending probe nodes from `2^{-m_max}` to `2^{tail_octaves}`.
pub fn probe_nodes<T: Real>(probe: &GridSpec) -> Vec<T> {
    let mut xs: Vec<T> = probe.nodes();
    xs.reverse();
    let tail: Vec<T> = probe.tail_nodes();
    let start = usize::from(xs.last() == tail.first());
    xs.extend_from_slice(&tail[start..]);
    xs.retain(|&x| x > T::zero());
    xs.dedup();
    xs
}

/// Shape of the basin of attraction of 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BasinCase {
    Global,
    Bounded,
}

#[derive(Debug, Clone, Serialize)]
pub struct BasinReport<T> {
    pub case: BasinCase,
    /// Smallest positive fixed point in the bounded case.
    pub b: Option<T>,
    /// `(x, h(x)/x)` at the octave nodes of the probe range.
    pub contraction: Vec<(T, T)>,
    /// Largest probe; nothing is claimed beyond it.
    pub horizon: T,
}

impl<T: Real> BasinReport<T> {
    pub fn contains(&self, x: T) -> bool {
        match self.b {
            Some(b) => x > T::zero() && x < b,
            None => x > T::zero(),
        }
    }
}

/// Classifies the basin of 0 over the probe range of `probe`.
pub fn basin_of_zero<T: Real>(h: &Homeo<T>, probe: &GridSpec) -> Result<BasinReport<T>> {
    let xs = probe_nodes::<T>(probe);
    let horizon = *xs
        .last()
        .ok_or_else(|| Error::Config("empty probe grid".into()))?;
    let x0 = xs[0];
    let hx0 = h.eval(x0);
    if !(hx0 < x0) {
        return Err(Error::ZeroRepelling {
            x: x0.as_f64(),
            hx: hx0.as_f64(),
        });
    }
    let k = probe.k as usize;
    let contraction = xs
        .iter()
        .step_by(k.max(1))
        .map(|&x| (x, h.eval(x) / x))
        .collect();

    let crossing = xs.windows(2).find(|w| !(h.eval(w[1]) < w[1]));
    let b = match crossing {
        None => None,
        Some(w) => Some(bisect_fixed_point(h, w[0], w[1])),
    };
    Ok(BasinReport {
        case: if b.is_some() {
            BasinCase::Bounded
        } else {
            BasinCase::Global
        },
        b,
        contraction,
        horizon,
    })
}

/// Smallest zero of `h(x) - x` in `(lo, hi]` given `h(lo) < lo`, `h(hi) >= hi`.
fn bisect_fixed_point<T: Real>(h: &Homeo<T>, mut lo: T, mut hi: T) -> T {
    let two = T::lit(2.0);
    let rel = T::lit(1e-12);
    while hi - lo > rel * hi {
        let mid = lo + (hi - lo) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        if h.eval(mid) < mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Which Lemma-6 style ordering holds at a probe `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainOrdering {
    /// `h^2(a) <= h1(a) <= h(a)`.
    First,
    /// `h1^2(a) <= h(a) <= h1(a)`.
    Second,
    /// `h1(a) = h(a)`; both orderings hold.
    BothEqual,
    Neither,
}

impl DomainOrdering {
    fn includes(self, other: DomainOrdering) -> bool {
        self == other || self == DomainOrdering::BothEqual
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FundamentalDomainReport<T> {
    pub n: u32,
    /// `(a, h(a), h1(a), ordering)` per probe, in the given descending order.
    pub probes: Vec<(T, T, T, DomainOrdering)>,
    pub first_count: usize,
    pub second_count: usize,
    pub equal_count: usize,
    pub neither_count: usize,
    /// The ordering holding at every probe of the smaller half, if any.
    pub recurring: Option<DomainOrdering>,
}

/// Relative tolerance under which `h1(a)` and `h(a)` count as equal.
const ORDERING_EQ_TOL: f64 = 1e-12;

/// Compares the fundamental domains of `h` and `h1 = hN^N` at each probe.
pub fn fundamental_domain_compare<T: Real>(
    h: &Homeo<T>,
    h_n: &Homeo<T>,
    n: u32,
    probes: &[T],
) -> FundamentalDomainReport<T> {
    let h1 = h_n.power_of(n);
    let tol = T::lit(ORDERING_EQ_TOL);
    let le = |a: T, b: T| a <= b + tol * b.abs();

    let mut rows = Vec::with_capacity(probes.len());
    for &a in probes {
        let ha = h.eval(a);
        let h1a = h1.eval(a);
        let ordering = if (ha - h1a).abs() <= tol * ha.abs() {
            DomainOrdering::BothEqual
        } else if le(h.eval(ha), h1a) && le(h1a, ha) {
            DomainOrdering::First
        } else if le(h1.eval(h1a), ha) && le(ha, h1a) {
            DomainOrdering::Second
        } else {
            DomainOrdering::Neither
        };
        rows.push((a, ha, h1a, ordering));
    }
    let count = |o: DomainOrdering| rows.iter().filter(|r| r.3 == o).count();
    let tail = &rows[rows.len() / 2..];
    let recurring = if tail.is_empty() {
        None
    } else if tail.iter().all(|r| r.3 == DomainOrdering::BothEqual) {
        Some(DomainOrdering::BothEqual)
    } else {
        [DomainOrdering::First, DomainOrdering::Second]
            .into_iter()
            .find(|&o| tail.iter().all(|r| r.3.includes(o)))
    };
    FundamentalDomainReport {
        n,
        first_count: count(DomainOrdering::First),
        second_count: count(DomainOrdering::Second),
        equal_count: count(DomainOrdering::BothEqual),
        neither_count: count(DomainOrdering::Neither),
        probes: rows,
        recurring,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe() -> GridSpec {
        GridSpec {
            k: 16,
            m_min: 0,
            m_max: 40,
            tail_octaves: 20,
        }
    }

    #[test]
    fn iterate_examples() {
        let halve = Homeo::<f64>::halve();
        assert_eq!(halve.iterate(3, 8.0).unwrap(), 1.0);
        assert_eq!(halve.iterate(-2, 1.0).unwrap(), 4.0);
        let sq = Homeo::<f64>::square();
        assert!((sq.iterate(2, 0.9).unwrap() - 0.6561).abs() < 1e-15);
    }

    #[test]
    fn bisection_inverse_matches_closed_form() {
        let closed = Homeo::<f64>::soft_halve();
        let numeric = Homeo::<f64>::new("soft", |x| x * (1.0 + x) / (2.0 + x));
        for y in [1e-200, 1e-9, 0.3, 1.0, 17.0, 1e12] {
            let a = closed.eval_inverse(y).unwrap();
            let b = numeric.eval_inverse(y).unwrap();
            assert!((a - b).abs() <= 1e-14 * a, "y={y}: {a} vs {b}");
            assert!((closed.eval(a) - y).abs() <= 1e-14 * y);
        }
    }

    #[test]
    fn inverse_bracket_ceiling() {
        let bounded = Homeo::<f64>::new("x/(1+x)", |x| x / (1.0 + x));
        assert!(matches!(
            bounded.eval_inverse(2.0),
            Err(Error::InverseBracket { .. })
        ));
        assert_eq!(bounded.eval_inverse(0.0).unwrap(), 0.0);
    }

    #[test]
    fn basin_examples() {
        let g = probe();
        assert_eq!(
            basin_of_zero(&Homeo::<f64>::halve(), &g).unwrap().case,
            BasinCase::Global
        );
        assert_eq!(
            basin_of_zero(&Homeo::<f64>::soft_halve(), &g).unwrap().case,
            BasinCase::Global
        );
        let sq = basin_of_zero(&Homeo::<f64>::square(), &g).unwrap();
        assert_eq!(sq.case, BasinCase::Bounded);
        assert_eq!(sq.b, Some(1.0));
        let double = Homeo::<f64>::scaling("double", 2.0);
        assert!(matches!(
            basin_of_zero(&double, &g),
            Err(Error::ZeroRepelling { .. })
        ));
    }

    #[test]
    fn bounded_basin_located_by_bisection() {
        // h(x) = x^2 / 3 fixes 0 and 3
        let h = Homeo::<f64>::new("x^2/3", |x| x * x / 3.0);
        let r = basin_of_zero(&h, &probe()).unwrap();
        assert!((r.b.unwrap() - 3.0).abs() <= 3e-12);
    }

    #[test]
    fn bounded_basin_dynamics() {
        let sq = Homeo::<f64>::square();
        let b = basin_of_zero(&sq, &probe()).unwrap().b.unwrap();
        assert!(sq.iterate(40, b * (1.0 - 1e-3)).unwrap() < 1e-6);
        assert!((sq.iterate(-40, b / 2.0).unwrap() - b).abs() < 1e-6);
    }

    #[test]
    fn gallery_ids() {
        for id in [
            "halve",
            "square",
            "soft_halve",
            "root_scale:4",
            "pow:3",
            "x/(1+x)+x",
        ] {
            let h = Homeo::<f64>::from_id(id).unwrap();
            h.verify(&GridSpec::new(8, 20)).unwrap();
        }
        assert!(Homeo::<f64>::from_id("root_scale:0").is_err());
        assert!(Homeo::<f64>::from_id("pow:-1").is_err());
        assert!(matches!(
            Homeo::<f64>::from_id("x+1"),
            Err(Error::NotFixingZero { .. })
        ));
        assert!(Homeo::<f64>::from_id("cos(").is_err());
        let wiggle = Homeo::<f64>::from_id("x + 2*sin(x)").unwrap();
        assert!(matches!(
            wiggle.verify(&GridSpec::new(8, 4)),
            Err(Error::NotIncreasing { .. })
        ));
    }

    #[test]
    fn fundamental_domains_exact_root() {
        let probes: Vec<f64> = (1..=30).map(|m| 2f64.powi(-m)).collect();
        let r = fundamental_domain_compare(&Homeo::halve(), &Homeo::root_scale(4), 4, &probes);
        assert_eq!(r.equal_count, probes.len());
        assert_eq!(r.recurring, Some(DomainOrdering::BothEqual));
    }

    #[test]
    fn fundamental_domains_perturbed_root() {
        let factor = 2f64.powf(-0.25);
        let h_n = Homeo::new("perturbed", move |x: f64| {
            x * factor * (1.0 + 0.01 * x / (1.0 + x))
        });
        let probes: Vec<f64> = (1..=30).map(|m| 2f64.powi(-m)).collect();
        let r = fundamental_domain_compare(&Homeo::halve(), &h_n, 4, &probes);
        let small = &r.probes[10..];
        let o = small[0].3;
        assert!(o == DomainOrdering::First || o == DomainOrdering::Second);
        assert!(small
            .iter()
            .all(|p| p.3 == o || p.3 == DomainOrdering::BothEqual));
        assert!(r.recurring.is_some());
    }

    #[test]
    fn fundamental_domains_power_maps() {
        let probes: Vec<f64> = (1..=40).map(|m| 2f64.powi(-m)).collect();
        let h_n = Homeo::pow(2f64.sqrt());
        let r = fundamental_domain_compare(&Homeo::square(), &h_n, 2, &probes);
        assert_eq!(r.equal_count, probes.len());
    }

    #[test]
    fn fundamental_domains_neither() {
        // h1 = x/8 overshoots h^2 = x/4 and h1^2 undershoots nothing useful
        let probes: Vec<f64> = (1..=10).map(|m| 2f64.powi(-m)).collect();
        let r =
            fundamental_domain_compare(&Homeo::halve(), &Homeo::scaling("x/8", 0.125), 1, &probes);
        assert_eq!(r.neither_count, probes.len());
        assert_eq!(r.recurring, None);
    }

    #[test]
    fn compose_inverse_and_power() {
        let h = Homeo::<f64>::halve().compose(&Homeo::square());
        assert_eq!(h.eval(0.5), 0.125);
        assert_eq!(h.eval_inverse(0.125).unwrap(), 0.5);
        let p = Homeo::<f64>::halve().power_of(3);
        assert_eq!(p.eval(8.0), 1.0);
        assert_eq!(p.eval_inverse(1.0).unwrap(), 8.0);
        assert_eq!(Homeo::<f64>::square().inverse().eval(0.25), 0.5);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn iterates_compose(lx in -3.0f64..2.0, m in -5i64..=5, n in -5i64..=5, which in 0usize..3) {
            let h = [Homeo::<f64>::halve(), Homeo::square(), Homeo::soft_halve()][which].clone();
            let x = 10f64.powf(lx);
            let two = h.iterate(m, h.iterate(n, x).unwrap()).unwrap();
            let one = h.iterate(m + n, x).unwrap();
            let mid = h.iterate(n, x).unwrap();
            prop_assume!(one.is_normal() && mid.is_normal() && two.is_normal());
            prop_assert!((two - one).abs() <= 1e-10 * one.abs(), "{} {} {}: {} vs {}", h.name(), m, n, two, one);
        }
    }
}
