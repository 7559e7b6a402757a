//! Full-rank lattices with unit covolume and certified point counting.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of lattice points a single enumeration may visit.
pub const DEFAULT_CAPACITY: u64 = 100_000_000;

const SNAP_TOLERANCE: f64 = 1e-9;

/// Volume of the Euclidean ball of radius `r` in dimension `dim`.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    unit_ball_volume(dim) * r.powi(dim as i32)
}

/// `π^(d/2) / Γ(d/2 + 1)`, via the two-step recursion `V_d = 2π V_{d-2} / d`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        0 => 1.0,
        1 => 2.0,
        d => 2.0 * std::f64::consts::PI / d as f64 * unit_ball_volume(d - 2),
    }
}

/// A flat list of points in `R^d`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize) -> Self {
        PointSet { dim, coords: Vec::new() }
    }

    pub fn with_capacity(dim: usize, capacity: usize) -> Self {
        PointSet { dim, coords: Vec::with_capacity(dim * capacity) }
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Self {
        assert!(dim > 0 && coords.len() % dim == 0, "flat coordinates must be a multiple of dim");
        PointSet { dim, coords }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.coords.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn push(&mut self, point: &[f64]) {
        debug_assert_eq!(point.len(), self.dim);
        self.coords.extend_from_slice(point);
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim.max(1))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A point `u = B t` with `t ∈ [0,1)^d` of the half-open fundamental parallelotope.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalDomainPoint {
    coords: Vec<f64>,
    frac: Vec<f64>,
}

impl FundamentalDomainPoint {
    /// Cartesian coordinates `u`.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Generator coordinates `t = B⁻¹u`, each in `[0, 1)`.
    pub fn frac(&self) -> &[f64] {
        &self.frac
    }

    pub fn origin(dim: usize) -> Self {
        FundamentalDomainPoint { coords: vec![0.0; dim], frac: vec![0.0; dim] }
    }
}

/// `t = x + u` with `x` in the lattice and `u` in the fundamental domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub integer_coords: Vec<i64>,
    pub lattice_point: Vec<f64>,
    pub residual: FundamentalDomainPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountReport {
    pub radius: f64,
    pub count: u64,
    pub lebesgue: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct Lattice {
    dim: usize,
    basis: DMatrix<f64>,
    inverse: DMatrix<f64>,
    inverse_row_norms: Vec<f64>,
    integer: bool,
    capacity: u64,
}

impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.basis == other.basis
    }
}

impl Lattice {
    /// Builds a lattice from a row-major `d×d` matrix whose columns are the
    /// generators, rescaled by `|det B|^(-1/d)` so that the covolume is 1.
    pub fn new(dim: usize, basis_rows: &[Vec<f64>]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidLattice("dimension must be at least 1".into()));
        }
        if basis_rows.len() != dim || basis_rows.iter().any(|row| row.len() != dim) {
            return Err(Error::InvalidLattice(format!("basis must be a {dim}×{dim} matrix")));
        }
        let flat: Vec<f64> = basis_rows.iter().flatten().copied().collect();
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, &flat))
    }

    pub fn from_matrix(basis: DMatrix<f64>) -> Result<Self> {
        let dim = basis.nrows();
        if dim == 0 || basis.ncols() != dim {
            return Err(Error::InvalidLattice("basis must be square and non-empty".into()));
        }
        if basis.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidLattice("basis has non-finite entries".into()));
        }
        let det = basis.determinant();
        let hadamard: f64 = basis.column_iter().map(|c| c.norm()).product();
        if !det.is_finite() || hadamard == 0.0 || det.abs() <= 1e-12 * hadamard {
            return Err(Error::InvalidLattice(format!("basis is singular (det = {det:e})")));
        }
        let scale = det.abs().powf(-1.0 / dim as f64);
        let basis = if (scale - 1.0).abs() < 1e-15 { basis } else { basis * scale };
        let inverse = basis
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidLattice("basis is not invertible".into()))?;
        let inverse_row_norms = inverse.row_iter().map(|r| r.norm()).collect();
        let integer = basis == DMatrix::identity(dim, dim);
        Ok(Lattice { dim, basis, inverse, inverse_row_norms, integer, capacity: DEFAULT_CAPACITY })
    }

    /// The integer lattice `Z^d`.
    pub fn integer(dim: usize) -> Self {
        Self::from_matrix(DMatrix::identity(dim, dim)).expect("identity is a valid basis")
    }

    /// Triangular (hexagonal packing) lattice in the plane, normalized to covolume 1.
    pub fn triangular() -> Self {
        let h = 3f64.sqrt() / 2.0;
        Self::new(2, &[vec![1.0, 0.5], vec![0.0, h]]).expect("triangular basis is valid")
    }

    pub fn with_capacity(mut self, capacity: u64) -> Self {
        self.capacity = capacity;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn covolume(&self) -> f64 {
        self.basis.determinant().abs()
    }

    /// True when the basis is exactly the identity.
    pub fn is_integer(&self) -> bool {
        self.integer
    }

    /// Upper bound on the diameter of the fundamental parallelotope.
    pub fn cell_diameter(&self) -> f64 {
        self.basis.column_iter().map(|c| c.norm()).sum()
    }

    /// Basis rows, as accepted by [`Lattice::new`].
    pub fn basis_rows(&self) -> Vec<Vec<f64>> {
        self.basis.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    /// Dual lattice `{k : k·x ∈ Z for all x}`, with basis `B^{-T}`.
    pub fn dual(&self) -> Lattice {
        Self::from_matrix(self.inverse.transpose()).expect("inverse transpose of a valid basis is valid")
    }

    pub fn point(&self, n: &[i64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.point_into(n, &mut y);
        y
    }

    fn point_into(&self, n: &[i64], y: &mut [f64]) {
        if self.integer {
            for (yi, &ni) in y.iter_mut().zip(n) {
                *yi = ni as f64;
            }
            return;
        }
        y.iter_mut().for_each(|v| *v = 0.0);
        for (j, &nj) in n.iter().enumerate() {
            let c = nj as f64;
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += self.basis[(i, j)] * c;
            }
        }
    }

    /// Generator coordinates `B⁻¹y`.
    pub fn coords_of(&self, y: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.inverse[(i, j)] * y[j]).sum())
            .collect()
    }

    /// Rounds `B⁻¹x` to integers, rejecting vectors farther than 1e-9 from the lattice.
    pub fn snap(&self, x: &[f64]) -> Result<Vec<i64>> {
        self.coords_of(x)
            .into_iter()
            .map(|c| {
                let n = c.round();
                if (c - n).abs() > SNAP_TOLERANCE {
                    Err(Error::InvalidArgument(format!("vector is not a lattice point (coordinate {c})")))
                } else {
                    Ok(n as i64)
                }
            })
            .collect()
    }

    pub fn decompose(&self, t: &[f64]) -> Decomposition {
        assert_eq!(t.len(), self.dim);
        let tc = self.coords_of(t);
        let mut n = Vec::with_capacity(self.dim);
        let mut frac = Vec::with_capacity(self.dim);
        for c in tc {
            let mut ni = c.floor();
            let mut f = c - ni;
            if f >= 1.0 {
                ni += 1.0;
                f = 0.0;
            }
            n.push(ni as i64);
            frac.push(f);
        }
        let lattice_point = self.point(&n);
        let coords = self.from_frac(&frac);
        Decomposition { integer_coords: n, lattice_point, residual: FundamentalDomainPoint { coords, frac } }
    }

    fn from_frac(&self, frac: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.basis[(i, j)] * frac[j]).sum())
            .collect()
    }

    /// Uniform point of the fundamental parallelotope.
    pub fn sample_fundamental<R: Rng + ?Sized>(&self, rng: &mut R) -> FundamentalDomainPoint {
        let frac: Vec<f64> = (0..self.dim).map(|_| rng.random::<f64>()).collect();
        let coords = self.from_frac(&frac);
        FundamentalDomainPoint { coords, frac }
    }

    fn check_capacity(&self, r: f64) -> Result<()> {
        let estimate = ball_volume(self.dim, r + self.cell_diameter());
        if !estimate.is_finite() || estimate > self.capacity as f64 {
            return Err(Error::Capacity { requested: estimate.min(u64::MAX as f64) as u64, cap: self.capacity });
        }
        Ok(())
    }

    fn outer_ranges(&self, center: &[f64], r: f64) -> Vec<(i64, i64)> {
        let c = self.coords_of(center);
        (0..self.dim - 1)
            .map(|i| {
                let w = r * self.inverse_row_norms[i];
                ((c[i] - w).floor() as i64, (c[i] + w).ceil() as i64)
            })
            .collect()
    }

    /// Range of the last generator coordinate inside the closed ball, given the others.
    /// The quadratic gives a candidate interval; endpoints are then refined with
    /// the exact membership predicate.
    fn last_axis_range(&self, n: &mut [i64], center: &[f64], r2: f64, y: &mut [f64]) -> Option<(i64, i64)> {
        let d = self.dim;
        n[d - 1] = 0;
        self.point_into(n, y);
        let mut bb = 0.0;
        let mut vb = 0.0;
        let mut vv = 0.0;
        for i in 0..d {
            let b = self.basis[(i, d - 1)];
            let v = y[i] - center[i];
            bb += b * b;
            vb += v * b;
            vv += v * v;
        }
        let disc = vb * vb - bb * (vv - r2);
        let slack = 1e-9 * (1.0 + r2.sqrt());
        if disc < -slack * bb {
            return None;
        }
        let root = disc.max(0.0).sqrt();
        let mut lo = ((-vb - root) / bb).ceil() as i64;
        let mut hi = ((-vb + root) / bb).floor() as i64;
        let inside = |m: i64, n: &mut [i64], y: &mut [f64]| {
            n[d - 1] = m;
            self.point_into(n, y);
            dist2(y, center) <= r2
        };
        while inside(lo - 1, n, y) {
            lo -= 1;
        }
        while lo <= hi && !inside(lo, n, y) {
            lo += 1;
        }
        while inside(hi + 1, n, y) {
            hi += 1;
        }
        while hi >= lo && !inside(hi, n, y) {
            hi -= 1;
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Calls `visit(n, y)` for every lattice point `y = B n` with `|y - center| ≤ r`.
    pub fn visit_ball<F: FnMut(&[i64], &[f64])>(&self, center: &[f64], r: f64, mut visit: F) -> Result<()> {
        self.check_capacity(r)?;
        self.sweep_rows(center, r, |lattice, n, lo, hi, y| {
            for m in lo..=hi {
                n[lattice.dim - 1] = m;
                lattice.point_into(n, y);
                visit(n, y);
            }
        });
        Ok(())
    }

    fn sweep_rows<F>(&self, center: &[f64], r: f64, mut row: F)
    where
        F: FnMut(&Lattice, &mut [i64], i64, i64, &mut [f64]),
    {
        assert_eq!(center.len(), self.dim);
        if r < 0.0 {
            return;
        }
        let r2 = r * r;
        let ranges = self.outer_ranges(center, r);
        let mut n: Vec<i64> = ranges.iter().map(|&(lo, _)| lo).chain(std::iter::once(0)).collect();
        let mut y = vec![0.0; self.dim];
        loop {
            if let Some((lo, hi)) = self.last_axis_range(&mut n, center, r2, &mut y) {
                row(self, &mut n, lo, hi, &mut y);
            }
            // odometer over the outer coordinates
            let mut axis = 0;
            loop {
                if axis == ranges.len() {
                    return;
                }
                if n[axis] < ranges[axis].1 {
                    n[axis] += 1;
                    break;
                }
                n[axis] = ranges[axis].0;
                axis += 1;
            }
        }
    }

    /// All lattice points in the closed ball `B_r(center)`.
    pub fn points_in_ball(&self, center: &[f64], r: f64) -> Result<PointSet> {
        if !(r >= 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be non-negative, got {r}")));
        }
        let mut out = PointSet::new(self.dim);
        self.visit_ball(center, r, |_, y| out.push(y))?;
        Ok(out)
    }

    /// `|{x ∈ L : |x - center| ≤ r}|`, counted row by row without materializing points.
    pub fn count_in_ball(&self, center: &[f64], r: f64) -> Result<u64> {
        if !(r >= 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be non-negative, got {r}")));
        }
        let outer: f64 = (0..self.dim - 1).map(|i| 2.0 * r * self.inverse_row_norms[i] + 2.0).product();
        if outer > self.capacity as f64 {
            return Err(Error::Capacity { requested: outer as u64, cap: self.capacity });
        }
        let mut count = 0u64;
        self.sweep_rows(center, r, |_, _, lo, hi, _| count += (hi - lo + 1) as u64);
        Ok(count)
    }

    /// `|{x ∈ L : r - width ≤ |x| ≤ r + width}|`.
    pub fn count_annulus(&self, r: f64, width: f64) -> Result<u64> {
        if !(width >= 0.0 && width <= r) {
            return Err(Error::InvalidArgument(format!("annulus needs 0 ≤ width ≤ R, got width {width}, R {r}")));
        }
        let origin = vec![0.0; self.dim];
        let outer = self.count_in_ball(&origin, r + width)?;
        let inner_open = self.count_in_open_ball(&origin, r - width)?;
        Ok(outer - inner_open)
    }

    fn count_in_open_ball(&self, center: &[f64], r: f64) -> Result<u64> {
        // points with |x| < r: closed count at r minus those exactly on the sphere
        let closed = self.count_in_ball(center, r)?;
        let mut on_sphere = 0u64;
        let r2 = r * r;
        self.sweep_rows(center, r, |lattice, n, lo, hi, y| {
            for m in [lo, hi] {
                n[lattice.dim - 1] = m;
                lattice.point_into(n, y);
                if dist2(y, center) == r2 {
                    on_sphere += 1;
                }
                if lo == hi {
                    break;
                }
            }
        });
        Ok(closed - on_sphere)
    }

    /// Lattice count in `B_r(center)` against the unit-intensity volume `|B_r|`.
    pub fn gauss_residual(&self, center: &[f64], r: f64) -> Result<CountReport> {
        if !(r >= 1.0) {
            return Err(Error::InvalidArgument(format!("gauss_residual needs R ≥ 1, got {r}")));
        }
        let count = self.count_in_ball(center, r)?;
        let lebesgue = ball_volume(self.dim, r);
        Ok(CountReport { radius: r, count, lebesgue, residual: count as f64 - lebesgue })
    }
}

/// Lattice as written in configs: a shorthand name or an explicit basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LatticeSpec {
    Named(String),
    Explicit(ExplicitLattice),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitLattice {
    pub dim: usize,
    /// Row-major matrix whose columns are the generators.
    pub basis: Vec<Vec<f64>>,
}

impl LatticeSpec {
    pub fn build(&self) -> Result<Lattice> {
        match self {
            LatticeSpec::Named(name) => match name.as_str() {
                "triangular" | "hexagonal" => Ok(Lattice::triangular()),
                other => match other.strip_prefix('Z').map(str::parse::<usize>) {
                    Some(Ok(d)) if (1..=16).contains(&d) => Ok(Lattice::integer(d)),
                    _ => Err(Error::InvalidLattice(format!("unknown lattice name `{other}`"))),
                },
            },
            LatticeSpec::Explicit(e) => Lattice::new(e.dim, &e.basis),
        }
    }
}
