//! Regular grids on the m-torus and periodic interpolation over them.

use nalgebra::DVector;

use crate::base_flow::{BasePoint, TWO_PI};
use crate::error::{Error, Result};

/// `n` equispaced nodes per angle, `n^m` nodes total, row-major with the last
/// angle varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    pub per_dim: usize,
    pub dims: usize,
}

impl TorusGrid {
    pub fn new(per_dim: usize, dims: usize) -> Result<Self> {
        if per_dim < 2 || dims == 0 {
            return Err(Error::Config(format!(
                "torus grid needs ≥ 2 nodes per dimension and ≥ 1 dimension (got {per_dim}, {dims})"
            )));
        }
        Ok(Self { per_dim, dims })
    }

    pub fn len(&self) -> usize {
        self.per_dim.pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        TWO_PI / self.per_dim as f64
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims];
        for k in (0..self.dims).rev() {
            idx[k] = flat % self.per_dim;
            flat /= self.per_dim;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.per_dim + i % self.per_dim)
    }

    pub fn node(&self, flat: usize) -> BasePoint {
        let h = self.spacing();
        BasePoint::new(
            self.multi_index(flat)
                .into_iter()
                .map(|i| i as f64 * h)
                .collect::<Vec<_>>(),
        )
    }

    pub fn nodes(&self) -> Vec<BasePoint> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }
}

/// Interpolation scheme for periodic grid data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Tensor-product linear; weights are convex, so interpolants never
    /// overshoot the node values.
    Multilinear,
    /// Tensor-product periodic Lagrange through `points` nodes per axis
    /// (even, ≥ 2).
    Lagrange { points: usize },
}

impl Default for Interpolation {
    fn default() -> Self {
        Interpolation::Lagrange { points: 8 }
    }
}

impl Interpolation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Interpolation::Multilinear => Ok(()),
            Interpolation::Lagrange { points } if points >= 2 && points % 2 == 0 => Ok(()),
            Interpolation::Lagrange { points } => Err(Error::Config(format!(
                "Lagrange interpolation needs an even number ≥ 2 of points, got {points}"
            ))),
        }
    }

    /// Node offsets and weights along one axis for fractional position `u`
    /// (in units of the grid spacing).
    fn axis_weights(&self, u: f64, n: usize) -> Vec<(usize, f64)> {
        let nearest = u.round();
        let u = if (u - nearest).abs() < 1e-10 { nearest } else { u };
        let i0 = u.floor();
        let frac = u - i0;
        let wrap = |k: i64| k.rem_euclid(n as i64) as usize;
        if frac == 0.0 {
            return vec![(wrap(i0 as i64), 1.0)];
        }
        match *self {
            Interpolation::Multilinear => vec![(wrap(i0 as i64), 1.0 - frac), (wrap(i0 as i64 + 1), frac)],
            Interpolation::Lagrange { points } => {
                let half = (points / 2) as i64;
                let offsets: Vec<i64> = (1 - half..=half).collect();
                offsets
                    .iter()
                    .map(|&oi| {
                        let w: f64 = offsets
                            .iter()
                            .filter(|&&oj| oj != oi)
                            .map(|&oj| (frac - oj as f64) / (oi - oj) as f64)
                            .product();
                        (wrap(i0 as i64 + oi), w)
                    })
                    .collect()
            }
        }
    }

    /// Interpolates node data `values` (one vector per grid node) at `p`.
    pub fn eval(&self, grid: &TorusGrid, values: &[DVector<f64>], p: &BasePoint) -> DVector<f64> {
        let h = grid.spacing();
        let axes: Vec<Vec<(usize, f64)>> = p
            .angles()
            .iter()
            .map(|a| self.axis_weights(a / h, grid.per_dim))
            .collect();
        let d = values[0].len();
        let mut out = DVector::zeros(d);
        let mut counter = vec![0usize; axes.len()];
        let mut idx = vec![0usize; axes.len()];
        loop {
            let mut w = 1.0;
            for (k, c) in counter.iter().enumerate() {
                let (i, wk) = axes[k][*c];
                idx[k] = i;
                w *= wk;
            }
            if w != 0.0 {
                out.axpy(w, &values[grid.flat_index(&idx)], 1.0);
            }
            // odometer increment
            let mut k = axes.len();
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                counter[k] += 1;
                if counter[k] < axes[k].len() {
                    break;
                }
                counter[k] = 0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let g = TorusGrid::new(5, 3).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(i)), i);
        }
    }

    #[test]
    fn reproduces_node_values() {
        let g = TorusGrid::new(16, 2).unwrap();
        let vals: Vec<DVector<f64>> = (0..g.len()).map(|i| DVector::from_element(1, (i * 7 % 13) as f64)).collect();
        for interp in [Interpolation::Multilinear, Interpolation::Lagrange { points: 8 }] {
            for i in 0..g.len() {
                assert_eq!(interp.eval(&g, &vals, &g.node(i))[0], vals[i][0]);
            }
        }
    }

    #[test]
    fn lagrange_is_accurate_on_smooth_data() {
        let g = TorusGrid::new(64, 1).unwrap();
        let f = |t: f64| (t.cos() + 2f64.sqrt() * t.sin()) / 3.0;
        let vals: Vec<_> = g.nodes().iter().map(|p| DVector::from_element(1, f(p.angles()[0]))).collect();
        let interp = Interpolation::Lagrange { points: 8 };
        let mut worst: f64 = 0.0;
        for k in 0..1000 {
            let t = k as f64 * 0.00731 * TWO_PI;
            worst = worst.max((interp.eval(&g, &vals, &BasePoint::new(vec![t]))[0] - f(t)).abs());
        }
        assert!(worst < 1e-9, "{worst}");
        let lin = Interpolation::Multilinear;
        let t = 0.5 * g.spacing();
        assert!((lin.eval(&g, &vals, &BasePoint::new(vec![t]))[0] - f(t)).abs() > 1e-5);
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(TorusGrid::new(1, 1).is_err());
        assert!(Interpolation::Lagrange { points: 3 }.validate().is_err());
    }
}
