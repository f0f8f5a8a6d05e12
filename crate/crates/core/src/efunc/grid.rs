//! Geometric (per-octave) sampling grids.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::efunc::EFunction;
use crate::error::{Error, Result};
use crate::real::Real;

/// Nodes `x_i = 2^{-i/K}` for `i = K m_min ..= K m_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "K")]
    pub k: u32,
    pub m_min: i32,
    pub m_max: i32,
    pub tail_octaves: u32,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            k: 512,
            m_min: 0,
            m_max: 40,
            tail_octaves: 20,
        }
    }
}

impl GridSpec {
    pub fn new(k: u32, m_max: i32) -> Self {
        Self {
            k,
            m_max,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config(
                "samples per octave K must be positive".into(),
            ));
        }
        if self.m_max <= self.m_min {
            return Err(Error::Config(format!(
                "m_max ({}) must exceed m_min ({})",
                self.m_max, self.m_min
            )));
        }
        if self.m_max > 1000 || self.m_min < -1000 {
            return Err(Error::Config("octave range outside [-1000, 1000]".into()));
        }
        Ok(())
    }

    pub fn octaves(&self) -> usize {
        (self.m_max - self.m_min).max(0) as usize
    }

    pub fn node_count(&self) -> usize {
        self.octaves() * self.k as usize + 1
    }

    /// `2^{-i/K}` computed as an exact power of two times a per-octave
    /// table entry, so `x_{i+K} = x_i / 2` holds bitwise.
    pub fn node<T: Real>(&self, i: i64) -> T {
        let k = self.k as i64;
        let q = i.div_euclid(k);
        let r = i.rem_euclid(k);
        let frac = if r == 0 {
            T::one()
        } else {
            (-T::lit(r as f64) / T::lit(k as f64)).exp2()
        };
        frac * pow2::<T>(-q)
    }

    /// Nodes in descending order from `2^{-m_min}` to `2^{-m_max}`.
    pub fn nodes<T: Real>(&self) -> Vec<T> {
        let k = self.k as i64;
        let table: Vec<T> = (0..k)
            .map(|r| {
                if r == 0 {
                    T::one()
                } else {
                    (-T::lit(r as f64) / T::lit(k as f64)).exp2()
                }
            })
            .collect();
        let first = k * self.m_min as i64;
        let last = k * self.m_max as i64;
        (first..=last)
            .map(|i| table[i.rem_euclid(k) as usize] * pow2::<T>(-i.div_euclid(k)))
            .collect()
    }

    /// Ascending tail nodes `2^{j/K}`, `j = 0 ..= K tail_octaves`.
    pub fn tail_nodes<T: Real>(&self) -> Vec<T> {
        let k = self.k as i64;
        (0..=k * self.tail_octaves as i64)
            .map(|j| self.node(-j))
            .collect()
    }

    /// The same grid restarted at `x = 1`.
    pub fn from_one(&self) -> Self {
        Self { m_min: 0, ..*self }
    }

    /// The same grid extended down to `2^{-m_max}`.
    pub fn with_m_max(&self, m_max: i32) -> Self {
        Self { m_max, ..*self }
    }
}

fn pow2<T: Real>(e: i64) -> T {
    T::lit(2.0).powi(e as i32)
}

/// Function values on a [`GridSpec`], descending in `x`.
#[derive(Debug, Clone, Serialize)]
pub struct GridProfile<T> {
    grid: GridSpec,
    xs: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> GridProfile<T> {
    pub fn from_values(grid: GridSpec, values: Vec<T>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.node_count() {
            return Err(Error::Config(format!(
                "profile has {} values for a grid of {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(Self {
            grid,
            xs: grid.nodes(),
            values,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn xs(&self) -> &[T] {
        &self.xs
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn octave_count(&self) -> usize {
        self.grid.octaves()
    }

    /// Local node indices of the octave `[2^{-(m+1)}, 2^{-m}]`, where `m` is
    /// counted from `m_min`. Adjacent windows share their endpoint.
    pub fn octave_window(&self, local_octave: usize) -> RangeInclusive<usize> {
        let k = self.grid.k as usize;
        local_octave * k..=(local_octave + 1) * k
    }

    /// Local index of a node equal to `x`, if there is one.
    pub fn node_index(&self, x: T) -> Option<usize> {
        // xs is descending
        let idx = self.xs.partition_point(|&v| v > x);
        (idx < self.xs.len() && self.xs[idx] == x).then_some(idx)
    }

    /// Value at an arbitrary `x` inside the grid range, linear in `ln x`
    /// between nodes. Exact at nodes.
    pub fn interpolate(&self, x: T) -> Option<T> {
        interpolate_descending(&self.xs, &self.values, x)
    }
}

/// Linear interpolation in `ln x` over descending nodes.
pub(crate) fn interpolate_descending<T: Real>(xs: &[T], values: &[T], x: T) -> Option<T> {
    let n = xs.len();
    if n == 0 || x > xs[0] || x < xs[n - 1] || x.is_nan() {
        return None;
    }
    let idx = xs.partition_point(|&v| v > x);
    if xs[idx] == x {
        return Some(values[idx]);
    }
    // xs[idx - 1] > x > xs[idx]
    let (x0, x1) = (xs[idx - 1], xs[idx]);
    let t = (x0.ln() - x.ln()) / (x0.ln() - x1.ln());
    Some(values[idx - 1] + t * (values[idx] - values[idx - 1]))
}

/// Index of the cell `[xs[j+1], xs[j]]` containing `x` (descending nodes).
pub(crate) fn cell_of<T: Real>(xs: &[T], x: T) -> Option<usize> {
    let n = xs.len();
    if n < 2 || x > xs[0] || x < xs[n - 1] {
        return None;
    }
    let idx = xs.partition_point(|&v| v > x);
    Some(idx.saturating_sub(1).min(n - 2))
}

/// Evaluates `f` on every node of `grid`.
pub fn sample<T: Real>(f: &EFunction<T>, grid: &GridSpec) -> Result<GridProfile<T>> {
    grid.validate()?;
    let xs: Vec<T> = grid.nodes();
    let values = xs.iter().map(|&x| f.eval(x)).collect::<Result<Vec<_>>>()?;
    Ok(GridProfile {
        grid: *grid,
        xs,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efunc::FunctionClass;

    #[test]
    fn std_log_on_coarse_grid() {
        let f = EFunction::<f64>::builtin("std_log", &[]).unwrap();
        let p = sample(
            &f,
            &GridSpec {
                k: 1,
                m_min: 0,
                m_max: 3,
                tail_octaves: 0,
            },
        )
        .unwrap();
        let ln2 = 2f64.ln();
        let expected = [0.0, ln2, 2.0 * ln2, 3.0 * ln2];
        for (v, e) in p.values().iter().zip(expected) {
            assert!((v - e).abs() <= 1e-15 * e.max(1.0));
        }
    }

    #[test]
    fn constant_function() {
        let f = EFunction::<f64>::expression("5", FunctionClass::E).unwrap();
        let p = sample(&f, &GridSpec::new(8, 4)).unwrap();
        assert!(p.values().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn paper_example_quarter_octave_node() {
        let f = EFunction::<f64>::builtin("paper_example", &[]).unwrap();
        let p = sample(&f, &GridSpec::new(4, 2)).unwrap();
        assert!((p.values()[1] - 2f64.powf(-0.75)).abs() < 1e-14);
    }

    #[test]
    fn nodes_halve_exactly_per_octave() {
        let g = GridSpec::default();
        let xs: Vec<f64> = g.nodes();
        assert_eq!(xs.len(), g.node_count());
        assert_eq!(xs[0], 1.0);
        for i in 0..xs.len() - g.k as usize {
            assert_eq!(xs[i + g.k as usize], xs[i] / 2.0);
            assert!(xs[i + 1] < xs[i]);
        }
        assert_eq!(*xs.last().unwrap(), 2f64.powi(-40));
        let deep: Vec<f64> = GridSpec::new(512, 60).nodes();
        assert!(deep.iter().all(|x| x.is_normal()));
    }

    #[test]
    fn tail_nodes_ascend_to_horizon() {
        let g = GridSpec {
            k: 4,
            m_min: 0,
            m_max: 1,
            tail_octaves: 3,
        };
        let t: Vec<f64> = g.tail_nodes();
        assert_eq!(t[0], 1.0);
        assert_eq!(*t.last().unwrap(), 8.0);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sampling_is_deterministic() {
        let f = EFunction::<f64>::builtin("bounded_osc", &[2.0]).unwrap();
        let g = GridSpec::new(64, 10);
        let a = sample(&f, &g).unwrap();
        let b = sample(&f, &g).unwrap();
        assert!(a
            .values()
            .iter()
            .zip(b.values())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn grid_spec_json() {
        let g: GridSpec =
            serde_json::from_str(r#"{"K":512,"m_min":0,"m_max":40,"tail_octaves":20}"#).unwrap();
        assert_eq!(g, GridSpec::default());
        assert_eq!(
            serde_json::to_string(&g).unwrap(),
            r#"{"K":512,"m_min":0,"m_max":40,"tail_octaves":20}"#
        );
    }

    #[test]
    fn interpolation_is_exact_at_nodes() {
        let f = EFunction::<f64>::builtin("std_log", &[]).unwrap();
        let p = sample(&f, &GridSpec::new(16, 4)).unwrap();
        for (i, &x) in p.xs().iter().enumerate() {
            assert_eq!(p.interpolate(x), Some(p.values()[i]));
            assert_eq!(p.node_index(x), Some(i));
        }
        let x = 0.3;
        assert!((p.interpolate(x).unwrap() + x.ln()).abs() < 1e-14);
        assert_eq!(p.interpolate(2.0), None);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(GridSpec {
            k: 0,
            ..GridSpec::default()
        }
        .validate()
        .is_err());
        assert!(GridSpec::new(4, 0).validate().is_err());
    }
}
