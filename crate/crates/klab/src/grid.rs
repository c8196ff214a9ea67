//! Scalar fields sampled on uniform tensor grids over centred boxes.

use crate::error::{KlabError, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// A scalar field sampled on a uniform tensor grid over the box
/// `[-R, R]^d`, with an exclusion margin near the boundary.
///
/// Values are stored row-major: in 2-D the node `(i, j)` (x-index `i`,
/// y-index `j`) lives at `values[i * n + j]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFunction {
    pub dim: usize,
    /// Half-width R of the box per axis.
    pub half_width: f64,
    /// Points per axis.
    pub n: usize,
    /// Node values, `n.pow(dim)` entries.
    pub values: Vec<f64>,
    /// Cells excluded near the boundary when taking core-region verdicts.
    pub core_margin: usize,
}

impl GridFunction {
    pub fn new(dim: usize, half_width: f64, n: usize, values: Vec<f64>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(KlabError::UnsupportedDimension(dim));
        }
        if n < 5 {
            return Err(KlabError::GridTooCoarse {
                required: 5,
                actual: n,
            });
        }
        if half_width <= 0.0 {
            return Err(KlabError::Invalid("half_width must be positive".into()));
        }
        if values.len() != n.pow(dim as u32) {
            return Err(KlabError::Invalid(format!(
                "value count {} does not match n^d = {}",
                values.len(),
                n.pow(dim as u32)
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(KlabError::Invalid("grid values must be finite".into()));
        }
        Ok(GridFunction {
            dim,
            half_width,
            n,
            values,
            core_margin: 0,
        })
    }

    /// Samples `f` on the grid. `f` receives the node coordinates.
    pub fn from_fn(
        dim: usize,
        half_width: f64,
        n: usize,
        f: &dyn Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let h = 2.0 * half_width / (n - 1) as f64;
        let coord = |i: usize| -half_width + i as f64 * h;
        let values = match dim {
            1 => (0..n).map(|i| f(&[coord(i)])).collect(),
            2 => {
                let mut v = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        v.push(f(&[coord(i), coord(j)]));
                    }
                }
                v
            }
            _ => return Err(KlabError::UnsupportedDimension(dim)),
        };
        GridFunction::new(dim, half_width, n, values)
    }

    /// Grid spacing `2R/(n-1)`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    /// Coordinate of axis index `i`.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn value_1d(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn value_2d(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Index range `[lo, hi]` of the core region along one axis.
    pub fn core_range(&self) -> (usize, usize) {
        (self.core_margin, self.n - 1 - self.core_margin)
    }

    /// Sup norm over all nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Sup norm over the core region.
    pub fn sup_norm_core(&self) -> f64 {
        let mut m = 0.0f64;
        self.for_each_core(|_, v| m = m.max(v.abs()));
        m
    }

    /// Minimum over the core region.
    pub fn min_core(&self) -> f64 {
        let mut m = f64::INFINITY;
        self.for_each_core(|_, v| m = m.min(v));
        m
    }

    /// Visits core-region nodes as `(flat_index, value)`.
    pub fn for_each_core(&self, mut visit: impl FnMut(usize, f64)) {
        let (lo, hi) = self.core_range();
        match self.dim {
            1 => {
                for i in lo..=hi {
                    visit(i, self.values[i]);
                }
            }
            _ => {
                for i in lo..=hi {
                    for j in lo..=hi {
                        visit(i * self.n + j, self.values[i * self.n + j]);
                    }
                }
            }
        }
    }

    /// Coordinates of a flat index.
    pub fn coords_of(&self, flat: usize) -> Vec<f64> {
        match self.dim {
            1 => vec![self.coord(flat)],
            _ => vec![self.coord(flat / self.n), self.coord(flat % self.n)],
        }
    }

    /// Pointwise combination with another field on the identical grid.
    pub fn zip_with(&self, other: &GridFunction, op: impl Fn(f64, f64) -> f64) -> GridFunction {
        assert_eq!(self.n, other.n);
        assert_eq!(self.dim, other.dim);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| op(*a, *b))
            .collect();
        GridFunction {
            dim: self.dim,
            half_width: self.half_width,
            n: self.n,
            values,
            core_margin: self.core_margin.max(other.core_margin),
        }
    }

    pub fn map(&self, op: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            dim: self.dim,
            half_width: self.half_width,
            n: self.n,
            values: self.values.iter().map(|v| op(*v)).collect(),
            core_margin: self.core_margin,
        }
    }

    /// Restriction to the sub-box `[-R', R']` whose nodes must lie on this
    /// grid (same spacing, aligned nodes).
    pub fn restrict(&self, half_width: f64) -> Result<GridFunction> {
        let h = self.spacing();
        let offset = (self.half_width - half_width) / h;
        let k = offset.round() as usize;
        if (offset - k as f64).abs() > 1e-9 {
            return Err(KlabError::Invalid(
                "restriction target nodes are not aligned with the grid".into(),
            ));
        }
        let m = self.n - 2 * k;
        let values = match self.dim {
            1 => self.values[k..k + m].to_vec(),
            _ => {
                let mut v = Vec::with_capacity(m * m);
                for i in 0..m {
                    for j in 0..m {
                        v.push(self.value_2d(i + k, j + k));
                    }
                }
                v
            }
        };
        GridFunction::new(self.dim, half_width, m, values)
    }
}

/// Writes snapshots as CSV rows `t,x[,y],u`.
pub fn write_snapshots_csv<W: Write>(
    out: &mut W,
    times: &[f64],
    snapshots: &[GridFunction],
) -> Result<()> {
    let dim = snapshots.first().map(|s| s.dim).unwrap_or(1);
    if dim == 1 {
        writeln!(out, "t,x,u")?;
    } else {
        writeln!(out, "t,x,y,u")?;
    }
    for (t, snap) in times.iter().zip(snapshots) {
        match snap.dim {
            1 => {
                for i in 0..snap.n {
                    writeln!(out, "{},{},{}", t, snap.coord(i), snap.values[i])?;
                }
            }
            _ => {
                for i in 0..snap.n {
                    for j in 0..snap.n {
                        writeln!(
                            out,
                            "{},{},{},{}",
                            t,
                            snap.coord(i),
                            snap.coord(j),
                            snap.value_2d(i, j)
                        )?;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Little-endian binary snapshot format.
///
/// Header: `d: u32, n: u32, R: f64, t_count: u32`. Payload: `t_count`
/// doubles (the time grid) followed by `t_count * n^d` doubles (snapshot
/// values in storage order).
pub fn write_snapshots_binary<W: Write>(
    out: &mut W,
    times: &[f64],
    snapshots: &[GridFunction],
) -> Result<()> {
    let first = snapshots
        .first()
        .ok_or_else(|| KlabError::Invalid("no snapshots to export".into()))?;
    out.write_all(&(first.dim as u32).to_le_bytes())?;
    out.write_all(&(first.n as u32).to_le_bytes())?;
    out.write_all(&first.half_width.to_le_bytes())?;
    out.write_all(&(times.len() as u32).to_le_bytes())?;
    for t in times {
        out.write_all(&t.to_le_bytes())?;
    }
    for snap in snapshots {
        for v in &snap.values {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads the binary snapshot format back; inverse of [`write_snapshots_binary`].
pub fn read_snapshots_binary(data: &[u8]) -> Result<(Vec<f64>, Vec<GridFunction>)> {
    let mut pos = 0usize;
    let mut take = |len: usize| -> Result<&[u8]> {
        if pos + len > data.len() {
            return Err(KlabError::Parse("binary snapshot truncated".into()));
        }
        let s = &data[pos..pos + len];
        pos += len;
        Ok(s)
    };
    let dim = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let r = f64::from_le_bytes(take(8)?.try_into().unwrap());
    let t_count = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let mut times = Vec::with_capacity(t_count);
    for _ in 0..t_count {
        times.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
    }
    let per = n.pow(dim as u32);
    let mut snaps = Vec::with_capacity(t_count);
    for _ in 0..t_count {
        let mut values = Vec::with_capacity(per);
        for _ in 0..per {
            values.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
        }
        snaps.push(GridFunction::new(dim, r, n, values)?);
    }
    Ok((times, snaps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_coarse_grids() {
        assert!(GridFunction::new(1, 1.0, 4, vec![0.0; 4]).is_err());
    }

    #[test]
    fn restriction_aligns_nodes() {
        let f = GridFunction::from_fn(1, 4.0, 9, &|x| x[0]).unwrap();
        let g = f.restrict(2.0).unwrap();
        assert_eq!(g.n, 5);
        assert_eq!(g.values, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
    }

    proptest! {
        #[test]
        fn binary_round_trip(seed in 0u64..1000) {
            let n = 5 + (seed % 7) as usize;
            let vals: Vec<f64> = (0..n).map(|i| (seed as f64 + i as f64).sin()).collect();
            let g = GridFunction::new(1, 3.0, n, vals).unwrap();
            let times = vec![0.0, 0.5];
            let snaps = vec![g.clone(), g.map(|v| 2.0 * v)];
            let mut buf = Vec::new();
            write_snapshots_binary(&mut buf, &times, &snaps).unwrap();
            let (t2, s2) = read_snapshots_binary(&buf).unwrap();
            prop_assert_eq!(t2, times);
            prop_assert_eq!(&s2[0].values, &snaps[0].values);
            prop_assert_eq!(&s2[1].values, &snaps[1].values);
        }
    }
}
