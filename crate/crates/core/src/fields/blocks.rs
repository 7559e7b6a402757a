//! Block constructions on `Z^d`: laws for the block side, latent block
//! variables, cube collapse and the radial push.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::distribution::uniform_direction;
use super::tagged::tagged_deserialize;
use crate::error::{Error, Result};

/// Smallest admissible block side.
pub const MIN_BLOCK_SIDE: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BlockLaw {
    Fixed { n: u64 },
    /// `P[N = n] ∝ n^(-exponent)` on `min ≤ n ≤ max`.
    PowerLaw { exponent: f64, min: u64, max: u64 },
    /// `N = ⌊X/√d⌋` with `X` Pareto: `P(X > s) = (scale/s)^tail_index` for `s ≥ scale`.
    Pareto { tail_index: f64, scale: f64 },
    /// Explicit `(n, weight)` pairs; weights are renormalized.
    Table { weights: Vec<(u64, f64)> },
}

#[derive(Deserialize)]
#[serde(remote = "BlockLaw", rename_all = "snake_case", deny_unknown_fields)]
enum BlockLawMirror {
    Fixed { n: u64 },
    PowerLaw { exponent: f64, min: u64, max: u64 },
    Pareto { tail_index: f64, scale: f64 },
    Table { weights: Vec<(u64, f64)> },
}

tagged_deserialize!(BlockLaw, BlockLawMirror);

/// A block law ready for sampling.
#[derive(Debug, Clone, PartialEq)]
pub enum CompiledBlockLaw {
    Discrete { values: Vec<u64>, cdf: Vec<f64> },
    Pareto { tail_index: f64, scale: f64, dim: usize },
}

fn side_error(n: u64) -> Error {
    Error::InvalidField(format!("block side N must be at least {MIN_BLOCK_SIDE} (N ≥ 10 rule), got {n}"))
}

impl BlockLaw {
    pub fn compile(&self, dim: usize) -> Result<CompiledBlockLaw> {
        match self {
            BlockLaw::Fixed { n } => CompiledBlockLaw::from_table(&[(*n, 1.0)]),
            BlockLaw::PowerLaw { exponent, min, max } => {
                if min > max || !exponent.is_finite() {
                    return Err(Error::InvalidField(format!("power_law needs min ≤ max and a finite exponent, got [{min}, {max}]")));
                }
                if *max - *min > 50_000_000 {
                    return Err(Error::InvalidField("power_law support is too wide to tabulate".into()));
                }
                let table: Vec<(u64, f64)> = (*min..=*max).map(|n| (n, (n as f64).powf(-exponent))).collect();
                CompiledBlockLaw::from_table(&table)
            }
            BlockLaw::Pareto { tail_index, scale } => {
                if !(*tail_index > 0.0 && scale.is_finite()) {
                    return Err(Error::InvalidField(format!("block pareto needs tail_index > 0, got {tail_index}")));
                }
                let smallest = (scale / (dim as f64).sqrt()).floor();
                if !(smallest >= MIN_BLOCK_SIDE as f64) {
                    return Err(side_error(smallest.max(0.0) as u64));
                }
                Ok(CompiledBlockLaw::Pareto { tail_index: *tail_index, scale: *scale, dim })
            }
            BlockLaw::Table { weights } => CompiledBlockLaw::from_table(weights),
        }
    }
}

impl CompiledBlockLaw {
    pub fn from_table(table: &[(u64, f64)]) -> Result<Self> {
        let mut entries: Vec<(u64, f64)> = table.iter().copied().filter(|&(_, w)| w != 0.0).collect();
        if entries.is_empty() {
            return Err(Error::InvalidField("block law has no mass".into()));
        }
        if let Some(&(_, w)) = entries.iter().find(|&&(_, w)| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidField(format!("block law weights must be positive, got {w}")));
        }
        entries.sort_by_key(|&(n, _)| n);
        if entries[0].0 < MIN_BLOCK_SIDE {
            return Err(side_error(entries[0].0));
        }
        let total: f64 = entries.iter().map(|&(_, w)| w).sum();
        let mut acc = 0.0;
        let mut values = Vec::with_capacity(entries.len());
        let mut cdf = Vec::with_capacity(entries.len());
        for (n, w) in entries {
            acc += w / total;
            values.push(n);
            cdf.push(acc);
        }
        *cdf.last_mut().expect("non-empty") = 1.0;
        Ok(CompiledBlockLaw::Discrete { values, cdf })
    }

    /// Draws a block side. Sides beyond `2^53` lose integer exactness.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            CompiledBlockLaw::Discrete { values, cdf } => {
                if values.len() == 1 {
                    return values[0] as f64;
                }
                let u: f64 = rng.random();
                let i = cdf.partition_point(|&c| c <= u).min(values.len() - 1);
                values[i] as f64
            }
            CompiledBlockLaw::Pareto { tail_index, scale, dim } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                (scale * u.powf(-1.0 / tail_index) / (*dim as f64).sqrt()).floor()
            }
        }
    }

    pub fn max_side(&self) -> Option<f64> {
        match self {
            CompiledBlockLaw::Discrete { values, .. } => values.last().map(|&n| n as f64),
            CompiledBlockLaw::Pareto { .. } => None,
        }
    }

    pub fn min_side(&self) -> f64 {
        match self {
            CompiledBlockLaw::Discrete { values, .. } => values[0] as f64,
            CompiledBlockLaw::Pareto { scale, dim, .. } => (scale / (*dim as f64).sqrt()).floor(),
        }
    }

    /// Smallest side `n` with `P[N ≤ n] ≥ q`.
    pub fn quantile(&self, q: f64) -> f64 {
        match self {
            CompiledBlockLaw::Discrete { values, cdf } => values[cdf.partition_point(|&c| c < q).min(values.len() - 1)] as f64,
            CompiledBlockLaw::Pareto { tail_index, scale, dim } => {
                (scale * (1.0 - q).powf(-1.0 / tail_index) / (*dim as f64).sqrt()).floor()
            }
        }
    }

    pub fn probability(&self, n: u64) -> f64 {
        match self {
            CompiledBlockLaw::Discrete { values, cdf } => match values.binary_search(&n) {
                Ok(i) => cdf[i] - if i == 0 { 0.0 } else { cdf[i - 1] },
                Err(_) => 0.0,
            },
            CompiledBlockLaw::Pareto { tail_index, scale, dim } => {
                let s = (*dim as f64).sqrt();
                let surv = |x: f64| if x <= *scale { 1.0 } else { (scale / x).powf(*tail_index) };
                surv(n as f64 * s) - surv((n + 1) as f64 * s)
            }
        }
    }
}

/// Realized block variables: side `N`, shift `τ ∈ [-N/2, N/2)^d`, and one
/// uniform center per block. Block `m` is the cube `mN + [-N/2, N/2)^d` in
/// shifted coordinates `x + τ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockLatent {
    pub dim: usize,
    pub side: f64,
    pub tau: Vec<f64>,
    lo: Vec<i64>,
    extent: Vec<usize>,
    centers: Vec<f64>,
}

impl BlockLatent {
    /// Samples `τ` and the centers of every block meeting the ball of radius `reach`
    /// around the origin (in unshifted coordinates).
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, dim: usize, side: f64, reach: f64) -> Self {
        let tau: Vec<f64> = (0..dim).map(|_| side * (rng.random::<f64>() - 0.5)).collect();
        Self::sample_with_shift(rng, side, tau, reach)
    }

    pub fn sample_with_shift<R: Rng + ?Sized>(rng: &mut R, side: f64, tau: Vec<f64>, reach: f64) -> Self {
        let dim = tau.len();
        let mut lo = Vec::with_capacity(dim);
        let mut extent = Vec::with_capacity(dim);
        for &t in &tau {
            let a = ((t - reach) / side + 0.5).floor() as i64;
            let b = ((t + reach) / side + 0.5).floor() as i64;
            lo.push(a);
            extent.push((b - a + 1) as usize);
        }
        let blocks: usize = extent.iter().product();
        let mut centers = Vec::with_capacity(blocks * dim);
        let mut m = lo.clone();
        for _ in 0..blocks {
            for &mi in &m {
                centers.push(side * (mi as f64 + rng.random::<f64>() - 0.5));
            }
            advance(&mut m, &lo, &extent);
        }
        BlockLatent { dim, side, tau, lo, extent, centers }
    }

    pub fn block_count(&self) -> usize {
        self.extent.iter().product()
    }

    /// Block index of the site `x`: `⌊(x + τ)/N + 1/2⌋`.
    pub fn block_of(&self, x: &[f64], out: &mut [i64]) {
        for i in 0..self.dim {
            out[i] = ((x[i] + self.tau[i]) / self.side + 0.5).floor() as i64;
        }
    }

    fn flat_index(&self, m: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for i in 0..self.dim {
            let off = m[i] - self.lo[i];
            if off < 0 || off as usize >= self.extent[i] {
                return None;
            }
            idx = idx * self.extent[i] + off as usize;
        }
        Some(idx)
    }

    pub fn center(&self, m: &[i64]) -> Option<&[f64]> {
        self.flat_index(m).map(|i| &self.centers[i * self.dim..(i + 1) * self.dim])
    }

    /// Overrides the center of block `m`, for conditioning on an event of the centers.
    pub fn set_center(&mut self, m: &[i64], c: &[f64]) -> Result<()> {
        let inside = m.iter().zip(c).all(|(&mi, &ci)| {
            let lo = self.side * (mi as f64 - 0.5);
            ci >= lo && ci < lo + self.side
        });
        let idx = self.flat_index(m).filter(|_| inside && c.len() == self.dim);
        let Some(i) = idx else {
            return Err(Error::InvalidArgument(format!("center {c:?} is not inside a sampled block {m:?}")));
        };
        self.centers[i * self.dim..(i + 1) * self.dim].copy_from_slice(c);
        Ok(())
    }

    /// All `(block index, center)` pairs in lexicographic order.
    pub fn blocks(&self) -> impl Iterator<Item = (Vec<i64>, &[f64])> + '_ {
        let mut m = self.lo.clone();
        self.centers.chunks_exact(self.dim).map(move |c| {
            let current = m.clone();
            advance(&mut m, &self.lo, &self.extent);
            (current, c)
        })
    }

    /// Lattice points of `Z^d` per block.
    pub fn points_per_block(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    /// Cube collapse: every site of block `m` lands on `C_m − τ`. The number of
    /// points in `B_r(center)` after adding the global shift `u`, for each radius,
    /// computed from the block images alone.
    pub fn collapse_counts(&self, u: &[f64], radii: &[f64], counts: &mut [f64]) {
        counts.iter_mut().for_each(|c| *c = 0.0);
        let per_block = self.points_per_block();
        let r2: Vec<f64> = radii.iter().map(|r| r * r).collect();
        for c in self.centers.chunks_exact(self.dim) {
            let mut d2 = 0.0;
            for i in 0..self.dim {
                let z = c[i] - self.tau[i] + u[i];
                d2 += z * z;
            }
            for (count, &rr) in counts.iter_mut().zip(&r2) {
                if d2 <= rr {
                    *count += per_block;
                }
            }
        }
    }
}

fn advance(m: &mut [i64], lo: &[i64], extent: &[usize]) {
    for i in (0..m.len()).rev() {
        if ((m[i] - lo[i]) as usize) + 1 < extent[i] {
            m[i] += 1;
            return;
        }
        m[i] = lo[i];
    }
}

/// `ε (y + τ − C)/|y + τ − C|`; an exact coincidence gets a uniform direction.
pub fn radial_push_displacement<R: Rng + ?Sized>(y: &[f64], tau: &[f64], center: &[f64], epsilon: f64, rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; y.len()];
    radial_push_into(y, tau, center, epsilon, rng, &mut out);
    out
}

pub(crate) fn radial_push_into<R: Rng + ?Sized>(y: &[f64], tau: &[f64], center: &[f64], epsilon: f64, rng: &mut R, out: &mut [f64]) {
    let mut n2 = 0.0;
    for i in 0..y.len() {
        out[i] = y[i] + tau[i] - center[i];
        n2 += out[i] * out[i];
    }
    if n2 == 0.0 {
        uniform_direction(rng, out);
        out.iter_mut().for_each(|v| *v *= epsilon);
        return;
    }
    let scale = epsilon / n2.sqrt();
    out.iter_mut().for_each(|v| *v *= scale);
}
