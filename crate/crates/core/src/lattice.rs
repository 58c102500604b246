//! Finite boxes and tori `[-N, N]^d` with a row-major vertex indexing.

use serde::{Deserialize, Serialize};

use crate::error::{LrpError, Result};
use crate::params::{canonicalize_torus, Geometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub d: usize,
    pub n: u64,
    pub geometry: Geometry,
}

impl Lattice {
    pub fn new(d: usize, n: u64, geometry: Geometry) -> Result<Self> {
        if d == 0 {
            return Err(LrpError::invalid("dimension must be >= 1"));
        }
        let side = 2 * n + 1;
        let total = (side as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
        if total > u32::MAX as u128 {
            return Err(LrpError::invalid("lattice too large for u32 vertex indices"));
        }
        Ok(Lattice { d, n, geometry })
    }

    /// Number of lattice points along one axis.
    pub fn side(&self) -> u64 {
        2 * self.n + 1
    }

    pub fn num_vertices(&self) -> usize {
        (self.side() as usize).pow(self.d as u32)
    }

    /// Coordinates shifted to `[0, side)`; first coordinate is slowest.
    pub fn offset_coords(&self, idx: u32) -> Vec<u64> {
        let m = self.side();
        let mut out = vec![0u64; self.d];
        let mut rest = idx as u64;
        for k in (0..self.d).rev() {
            out[k] = rest % m;
            rest /= m;
        }
        out
    }

    pub fn coords(&self, idx: u32) -> Vec<i64> {
        self.offset_coords(idx)
            .into_iter()
            .map(|c| c as i64 - self.n as i64)
            .collect()
    }

    pub fn index_of_offset(&self, oc: &[u64]) -> u32 {
        let m = self.side();
        oc.iter().fold(0u64, |acc, &c| acc * m + c) as u32
    }

    pub fn index_of(&self, coords: &[i64]) -> Option<u32> {
        if coords.len() != self.d {
            return None;
        }
        let n = self.n as i64;
        let mut oc = Vec::with_capacity(self.d);
        for &c in coords {
            if c < -n || c > n {
                return None;
            }
            oc.push((c + n) as u64);
        }
        Some(self.index_of_offset(&oc))
    }

    pub fn origin(&self) -> u32 {
        self.index_of(&vec![0; self.d]).expect("origin inside")
    }

    /// Displacement `v - u`, reduced to the minimal image on a torus.
    pub fn displacement(&self, u: u32, v: u32) -> Vec<i64> {
        let a = self.coords(u);
        let b = self.coords(v);
        let raw: Vec<i64> = b.iter().zip(&a).map(|(y, x)| y - x).collect();
        match self.geometry {
            Geometry::Box => raw,
            Geometry::Torus => canonicalize_torus(&raw, self.n),
        }
    }

    pub fn linf(&self, u: u32, v: u32) -> u64 {
        self.displacement(u, v)
            .iter()
            .map(|c| c.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    pub fn euclidean(&self, u: u32, v: u32) -> f64 {
        let sq: i64 = self.displacement(u, v).iter().map(|c| c * c).sum();
        (sq as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_roundtrip() {
        let l = Lattice::new(2, 3, Geometry::Box).unwrap();
        assert_eq!(l.num_vertices(), 49);
        for i in 0..49u32 {
            assert_eq!(l.index_of(&l.coords(i)), Some(i));
        }
        assert_eq!(l.coords(0), vec![-3, -3]);
        assert_eq!(l.coords(1), vec![-3, -2]);
        assert_eq!(l.index_of(&[0, 0]), Some(24));
        assert_eq!(l.index_of(&[4, 0]), None);
    }

    #[test]
    fn torus_minimal_image() {
        let l = Lattice::new(1, 5, Geometry::Torus).unwrap();
        let a = l.index_of(&[-5]).unwrap();
        let b = l.index_of(&[5]).unwrap();
        assert_eq!(l.displacement(a, b), vec![-1]);
        assert_eq!(l.linf(a, b), 1);
        let bx = Lattice::new(1, 5, Geometry::Box).unwrap();
        assert_eq!(bx.linf(a, b), 10);
    }
}
