//! Model parameters and the pair connection probability.

use serde::{Deserialize, Serialize};

use crate::error::{LrpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Box,
    Torus,
}

impl Geometry {
    pub fn as_str(self) -> &'static str {
        match self {
            Geometry::Box => "box",
            Geometry::Torus => "torus",
        }
    }
}

/// One entry of the short-range table. `class` is the isotropy class of a
/// displacement: its absolute coordinates sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortRangeEntry {
    pub class: Vec<u32>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrpParams {
    pub d: usize,
    pub s: f64,
    pub beta: f64,
    /// Short-range cutoff radius; displacements with Euclidean norm below it
    /// use `short_range` instead of the long-range formula.
    #[serde(default)]
    pub cutoff: u32,
    #[serde(default)]
    pub short_range: Vec<ShortRangeEntry>,
    #[serde(default = "default_geometry")]
    pub geometry: Geometry,
}

fn default_geometry() -> Geometry {
    Geometry::Box
}

/// Isotropy class of a displacement (sorted absolute coordinates).
pub fn isotropy_class(dx: &[i64]) -> Vec<u32> {
    let mut c: Vec<u32> = dx.iter().map(|v| v.unsigned_abs() as u32).collect();
    c.sort_unstable();
    c
}

pub fn squared_norm(dx: &[i64]) -> u64 {
    dx.iter().map(|&v| (v * v) as u64).sum()
}

impl LrpParams {
    pub fn new(d: usize, s: f64, beta: f64) -> Result<Self> {
        let p = LrpParams {
            d,
            s,
            beta,
            cutoff: 0,
            short_range: Vec::new(),
            geometry: Geometry::Box,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_geometry(mut self, geometry: Geometry) -> Self {
        self.geometry = geometry;
        self
    }

    /// Installs a short-range table. Every isotropy class with norm below
    /// `cutoff` must be present.
    pub fn with_short_range(mut self, cutoff: u32, table: Vec<ShortRangeEntry>) -> Result<Self> {
        self.cutoff = cutoff;
        self.short_range = table;
        self.validate()?;
        Ok(self)
    }

    /// Nearest-neighbour bonds forced open, every other class keeps its
    /// long-range value.
    pub fn with_forced_nearest_neighbours(self) -> Result<Self> {
        let table = short_range_classes(self.d, 2)
            .into_iter()
            .map(|class| {
                let sq: u64 = class.iter().map(|&v| (v as u64).pow(2)).sum();
                let probability = if sq == 1 {
                    1.0
                } else {
                    long_range_probability(self.beta, self.s, (sq as f64).sqrt())
                };
                ShortRangeEntry { class, probability }
            })
            .collect();
        self.with_short_range(2, table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(LrpError::invalid("dimension must be >= 1"));
        }
        if !(self.s.is_finite() && self.s > self.d as f64) {
            return Err(LrpError::invalid(format!(
                "tail exponent s={} must exceed d={}",
                self.s, self.d
            )));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(LrpError::invalid("beta must be finite and >= 0"));
        }
        let cutoff_sq = (self.cutoff as u64).pow(2);
        for e in &self.short_range {
            if e.class.len() != self.d {
                return Err(LrpError::invalid("short-range class has wrong dimension"));
            }
            if e.class.windows(2).any(|w| w[0] > w[1]) {
                return Err(LrpError::invalid("short-range class must be sorted ascending"));
            }
            let sq: u64 = e.class.iter().map(|&v| (v as u64).pow(2)).sum();
            if sq == 0 || sq >= cutoff_sq {
                return Err(LrpError::invalid(format!(
                    "short-range class {:?} outside (0, cutoff)",
                    e.class
                )));
            }
            if !(0.0..=1.0).contains(&e.probability) {
                return Err(LrpError::invalid("short-range probability outside [0,1]"));
            }
        }
        for c in short_range_classes(self.d, self.cutoff) {
            if !self.short_range.iter().any(|e| e.class == c) {
                return Err(LrpError::invalid(format!(
                    "short-range table misses class {c:?}"
                )));
            }
        }
        Ok(())
    }

    fn short_range_lookup(&self, class: &[u32]) -> Option<f64> {
        self.short_range
            .iter()
            .find(|e| e.class == class)
            .map(|e| e.probability)
    }

    /// Probability for an already canonical, nonzero displacement.
    pub fn probability_of_canonical(&self, dx: &[i64]) -> f64 {
        let sq = squared_norm(dx);
        if sq < (self.cutoff as u64).pow(2) {
            let class = isotropy_class(dx);
            return self
                .short_range_lookup(&class)
                .expect("validated table covers every short-range class");
        }
        long_range_probability(self.beta, self.s, (sq as f64).sqrt())
    }

    /// True when the displacement falls in the short-range table.
    pub fn is_short_range(&self, sq_norm: u64) -> bool {
        sq_norm < (self.cutoff as u64).pow(2)
    }
}

/// `1 - exp(-beta * r^{-s})`, evaluated without cancellation.
pub fn long_range_probability(beta: f64, s: f64, r: f64) -> f64 {
    -(-beta * r.powf(-s)).exp_m1()
}

/// All isotropy classes with `0 < |c|_2 < cutoff`.
pub fn short_range_classes(d: usize, cutoff: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    if cutoff == 0 {
        return out;
    }
    let limit = (cutoff as u64).pow(2);
    let mut cur = vec![0u32; d];
    fn rec(pos: usize, lo: u32, cur: &mut Vec<u32>, limit: u64, cutoff: u32, out: &mut Vec<Vec<u32>>) {
        if pos == cur.len() {
            let sq: u64 = cur.iter().map(|&v| (v as u64).pow(2)).sum();
            if sq > 0 && sq < limit {
                out.push(cur.clone());
            }
            return;
        }
        for v in lo..cutoff {
            cur[pos] = v;
            rec(pos + 1, v, cur, limit, cutoff, out);
        }
    }
    rec(0, 0, &mut cur, limit, cutoff, &mut out);
    out
}

/// Reduces each coordinate of `dx` to its minimal-norm representative
/// modulo the torus side `2n + 1`.
pub fn canonicalize_torus(dx: &[i64], n: u64) -> Vec<i64> {
    let m = 2 * n as i64 + 1;
    dx.iter()
        .map(|&v| {
            let r = v.rem_euclid(m);
            if r > n as i64 {
                r - m
            } else {
                r
            }
        })
        .collect()
}

/// Connection probability of a pair at displacement `dx`; `n` is the scale
/// used for torus wrapping and ignored for boxes.
pub fn connection_probability(params: &LrpParams, dx: &[i64], n: u64) -> Result<f64> {
    if dx.len() != params.d {
        return Err(LrpError::invalid(format!(
            "displacement has dimension {}, expected {}",
            dx.len(),
            params.d
        )));
    }
    let canon = match params.geometry {
        Geometry::Torus => canonicalize_torus(dx, n),
        Geometry::Box => dx.to_vec(),
    };
    if canon.iter().all(|&v| v == 0) {
        return Err(LrpError::invalid("zero displacement (self-loop)"));
    }
    Ok(params.probability_of_canonical(&canon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p1(s: f64, beta: f64) -> LrpParams {
        LrpParams::new(1, s, beta).unwrap()
    }

    #[test]
    fn unit_distance_value() {
        let p = LrpParams::new(1, 2.0, 1.0).unwrap();
        let v = connection_probability(&p, &[-1], 0).unwrap();
        assert!((v - 0.632_120_558_828_557_7).abs() < 1e-15);
    }

    #[test]
    fn zero_beta_gives_zero() {
        let p = p1(1.5, 0.0);
        for dx in 1..50 {
            assert_eq!(connection_probability(&p, &[dx], 0).unwrap(), 0.0);
        }
    }

    #[test]
    fn distance_four_value() {
        // 1 - exp(-0.125) to 16 digits, from the series
        // sum_{k>=1} (-1)^{k+1} 0.125^k / k!.
        let mut term = 1.0f64;
        let mut acc = 0.0f64;
        for k in 1..30 {
            term *= 0.125 / k as f64;
            acc += if k % 2 == 1 { term } else { -term };
        }
        assert!((acc - 0.117_503_097_415_404_3).abs() < 1e-15);
        let v = connection_probability(&p1(1.5, 1.0), &[4], 0).unwrap();
        assert!((v - acc).abs() < 1e-15);
    }

    #[test]
    fn zero_displacement_rejected() {
        assert!(connection_probability(&p1(1.5, 1.0), &[0], 0).is_err());
        let t = p1(1.5, 1.0).with_geometry(Geometry::Torus);
        assert!(connection_probability(&t, &[11], 5).is_err());
    }

    #[test]
    fn short_range_table_used_below_cutoff() {
        let p = LrpParams::new(2, 3.0, 0.5)
            .unwrap()
            .with_forced_nearest_neighbours()
            .unwrap();
        assert_eq!(connection_probability(&p, &[0, 1], 0).unwrap(), 1.0);
        assert_eq!(connection_probability(&p, &[-1, 0], 0).unwrap(), 1.0);
        let diag = connection_probability(&p, &[1, 1], 0).unwrap();
        assert!((diag - long_range_probability(0.5, 3.0, 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn incomplete_table_rejected() {
        let p = LrpParams::new(2, 3.0, 0.5).unwrap();
        let err = p.with_short_range(
            2,
            vec![ShortRangeEntry {
                class: vec![0, 1],
                probability: 1.0,
            }],
        );
        assert!(err.is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(LrpParams::new(1, 1.0, 1.0).is_err());
        assert!(LrpParams::new(0, 1.5, 1.0).is_err());
        assert!(LrpParams::new(1, 1.5, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn log_identity(r in 1u32..5000, s in 1.05f64..1.95, beta in 0.01f64..5.0) {
            let p = p1(s, beta);
            let v = connection_probability(&p, &[r as i64], 0).unwrap();
            let back = -(-v).ln_1p() * (r as f64).powf(s);
            prop_assert!((back - beta).abs() <= 1e-12 * beta.max(1.0));
        }

        #[test]
        fn monotone_in_distance(r in 1i64..10_000, s in 1.05f64..1.95, beta in 0.0f64..5.0) {
            let p = p1(s, beta);
            let a = connection_probability(&p, &[r], 0).unwrap();
            let b = connection_probability(&p, &[r + 1], 0).unwrap();
            prop_assert!(b <= a);
        }

        #[test]
        fn symmetric_under_negation(x in -50i64..50, y in -50i64..50) {
            prop_assume!(x != 0 || y != 0);
            let p = LrpParams::new(2, 3.0, 1.0).unwrap();
            let a = connection_probability(&p, &[x, y], 0).unwrap();
            let b = connection_probability(&p, &[-x, -y], 0).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn torus_wrap_invariance(x in -40i64..40, k in -3i64..3, n in 1u64..30) {
            let p = p1(1.5, 1.0).with_geometry(Geometry::Torus);
            let m = 2 * n as i64 + 1;
            prop_assume!(x.rem_euclid(m) != 0);
            let a = connection_probability(&p, &[x], n).unwrap();
            let b = connection_probability(&p, &[x + k * m], n).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
