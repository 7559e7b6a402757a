//! Stationary displacement fields on a lattice and the perturbed
//! configurations `{x + U + p_x}` they produce.

mod blocks;
mod distribution;
mod mixture;
mod spectral;
mod tagged;

pub use blocks::{radial_push_displacement, BlockLatent, BlockLaw, CompiledBlockLaw, MIN_BLOCK_SIDE};
pub use distribution::{remainder_constant, Distribution};
pub use mixture::{mixture_weights, MixtureWeights, SigmaTilde};
pub use spectral::{covariance_table, gaussian_field_synthesize, pointwise_variance, spectral_density, GaussianField};

pub(crate) use blocks::radial_push_into;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::lattice::{FundamentalDomainPoint, Lattice, PointSet};
pub(crate) use tagged::nested_path;
use tagged::tagged_deserialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FieldSpec {
    Iid { distribution: Distribution },
    SpectralGaussian { delta: f64, grid: usize, amplitude: f64 },
    CubeCollapse { block_law: BlockLaw },
    RadialPush { epsilon: f64, block_law: BlockLaw },
    SlowDecayMixture { sigma_tilde: SigmaTilde, n_max: u64 },
}

#[derive(Deserialize)]
#[serde(remote = "FieldSpec", rename_all = "snake_case", deny_unknown_fields)]
enum FieldSpecMirror {
    Iid { distribution: Distribution },
    SpectralGaussian { delta: f64, grid: usize, amplitude: f64 },
    CubeCollapse { block_law: BlockLaw },
    RadialPush { epsilon: f64, block_law: BlockLaw },
    SlowDecayMixture { sigma_tilde: SigmaTilde, n_max: u64 },
}

tagged_deserialize!(FieldSpec, FieldSpecMirror);

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum FieldKind {
    Iid(Distribution),
    Spectral { delta: f64, grid: usize, amplitude: f64, variance: f64 },
    Collapse(CompiledBlockLaw),
    Push { epsilon: f64, law: CompiledBlockLaw },
}

/// A validated field bound to a lattice dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    spec: FieldSpec,
    dim: usize,
    kind: FieldKind,
    mixture: Option<MixtureWeights>,
}

/// Quantile level used for margins of unbounded fields.
pub const MARGIN_QUANTILE: f64 = 0.99999;

impl FieldSpec {
    pub fn compile(&self, lattice: &Lattice) -> Result<Field> {
        let dim = lattice.dim();
        let needs_integer = !matches!(self, FieldSpec::Iid { .. });
        if needs_integer && !lattice.is_integer() {
            return Err(Error::InvalidField("spectral and block fields are defined on Z^d only".into()));
        }
        let mut mixture = None;
        let kind = match self {
            FieldSpec::Iid { distribution } => {
                distribution.validate(dim)?;
                FieldKind::Iid(distribution.clone())
            }
            FieldSpec::SpectralGaussian { delta, grid, amplitude } => {
                spectral::validate(dim, *delta, *grid, *amplitude)?;
                let variance = pointwise_variance(dim, *delta, *grid, *amplitude);
                FieldKind::Spectral { delta: *delta, grid: *grid, amplitude: *amplitude, variance }
            }
            FieldSpec::CubeCollapse { block_law } => FieldKind::Collapse(block_law.compile(dim)?),
            FieldSpec::RadialPush { epsilon, block_law } => {
                if !(*epsilon > 0.0 && epsilon.is_finite()) {
                    return Err(Error::InvalidField(format!("epsilon must be positive, got {epsilon}")));
                }
                FieldKind::Push { epsilon: *epsilon, law: block_law.compile(dim)? }
            }
            FieldSpec::SlowDecayMixture { sigma_tilde, n_max } => {
                let weights = mixture_weights(sigma_tilde, dim, *n_max)?;
                let law = CompiledBlockLaw::from_table(&weights.weights)?;
                mixture = Some(weights);
                FieldKind::Collapse(law)
            }
        };
        Ok(Field { spec: self.clone(), dim, kind, mixture })
    }
}

impl Field {
    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub(crate) fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn mixture(&self) -> Option<&MixtureWeights> {
        self.mixture.as_ref()
    }

    /// Mass of the mixture discarded by truncation, if the field is a truncated mixture.
    pub fn truncation_mass(&self) -> Option<f64> {
        self.mixture.as_ref().map(|m| m.truncation_mass)
    }

    /// Almost-sure bound on `|p_x|`.
    pub fn displacement_bound(&self) -> Option<f64> {
        let root_d = (self.dim as f64).sqrt();
        match &self.kind {
            FieldKind::Iid(dist) => dist.bound(self.dim),
            FieldKind::Spectral { .. } => None,
            FieldKind::Collapse(law) => law.max_side().map(|n| root_d * n),
            FieldKind::Push { epsilon, .. } => Some(*epsilon),
        }
    }

    /// Radius that `|p_0|` exceeds with probability at most `1 − q`.
    pub fn displacement_quantile(&self, q: f64) -> f64 {
        let root_d = (self.dim as f64).sqrt();
        match &self.kind {
            FieldKind::Iid(dist) => dist.norm_quantile(self.dim, q),
            FieldKind::Spectral { variance, .. } => {
                let chi2 = ChiSquared::new(self.dim as f64).expect("positive degrees of freedom");
                variance.sqrt() * chi2.inverse_cdf(q).sqrt()
            }
            FieldKind::Collapse(law) => root_d * law.quantile(q),
            FieldKind::Push { epsilon, .. } => *epsilon,
        }
    }

    pub fn is_block_field(&self) -> bool {
        matches!(self.kind, FieldKind::Collapse(_) | FieldKind::Push { .. })
    }

    /// Draws the displacements of every lattice point within `window_radius` of the origin.
    pub fn sample<R: Rng + ?Sized>(&self, lattice: &Lattice, window_radius: f64, rng: &mut R) -> Result<FieldSample> {
        sample_field(self, lattice, window_radius, rng)
    }
}

/// Latent variables behind a realization, kept for audit and replay.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LatentRecord {
    None,
    Blocks(BlockLatent),
    Torus { grid: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub window_radius: f64,
    /// Lattice points `x` with `|x| ≤ window_radius`.
    pub sites: PointSet,
    /// `p_x`, aligned with `sites`.
    pub displacements: PointSet,
    pub latent: LatentRecord,
}

impl FieldSample {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn max_displacement(&self) -> f64 {
        self.displacements.iter().map(|p| crate::lattice::norm2(p).sqrt()).fold(0.0, f64::max)
    }
}

pub fn sample_field<R: Rng + ?Sized>(field: &Field, lattice: &Lattice, window_radius: f64, rng: &mut R) -> Result<FieldSample> {
    if !(window_radius > 0.0 && window_radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("window radius must be positive, got {window_radius}")));
    }
    if lattice.dim() != field.dim {
        return Err(Error::InvalidArgument("field and lattice dimensions differ".into()));
    }
    let dim = field.dim;
    let origin = vec![0.0; dim];
    let sites = lattice.points_in_ball(&origin, window_radius)?;
    let mut displacements = PointSet::with_capacity(dim, sites.len());
    let mut p = vec![0.0; dim];
    let latent = match &field.kind {
        FieldKind::Iid(dist) => {
            for _ in 0..sites.len() {
                dist.sample_into(rng, &mut p);
                displacements.push(&p);
            }
            LatentRecord::None
        }
        FieldKind::Spectral { delta, grid, amplitude, .. } => {
            if window_radius > (*grid / 4) as f64 {
                return Err(Error::InvalidField(format!(
                    "window radius {window_radius} exceeds a quarter of the torus grid {grid}"
                )));
            }
            let g = gaussian_field_synthesize(dim, *delta, *grid, *amplitude, rng)?;
            let mut n = vec![0i64; dim];
            for x in sites.iter() {
                for (ni, xi) in n.iter_mut().zip(x) {
                    *ni = xi.round() as i64;
                }
                displacements.push(g.displacement(&n));
            }
            LatentRecord::Torus { grid: *grid }
        }
        FieldKind::Collapse(law) => {
            let side = law.sample(rng);
            let latent = BlockLatent::sample(rng, dim, side, window_radius);
            let mut m = vec![0i64; dim];
            for x in sites.iter() {
                latent.block_of(x, &mut m);
                let c = latent.center(&m).expect("latent covers the window");
                for i in 0..dim {
                    p[i] = c[i] - (x[i] + latent.tau[i]);
                }
                displacements.push(&p);
            }
            LatentRecord::Blocks(latent)
        }
        FieldKind::Push { epsilon, law } => {
            let side = law.sample(rng);
            let latent = BlockLatent::sample(rng, dim, side, window_radius);
            let mut m = vec![0i64; dim];
            for x in sites.iter() {
                latent.block_of(x, &mut m);
                let c = latent.center(&m).expect("latent covers the window");
                radial_push_into(x, &latent.tau, c, *epsilon, rng, &mut p);
                displacements.push(&p);
            }
            LatentRecord::Blocks(latent)
        }
    };
    Ok(FieldSample { window_radius, sites, displacements, latent })
}

/// Re-evaluates a block field from its recorded latent variables.
pub fn reevaluate_blocks(field: &Field, lattice: &Lattice, window_radius: f64, latent: &BlockLatent) -> Result<FieldSample> {
    let origin = vec![0.0; field.dim];
    let sites = lattice.points_in_ball(&origin, window_radius)?;
    let mut displacements = PointSet::with_capacity(field.dim, sites.len());
    let mut m = vec![0i64; field.dim];
    let mut p = vec![0.0; field.dim];
    // coincidences are measure-zero; a fixed stream keeps re-evaluation deterministic
    let mut fallback = crate::rng::substream(0, crate::rng::Domain::Auxiliary, u64::MAX);
    for x in sites.iter() {
        latent.block_of(x, &mut m);
        let c = latent
            .center(&m)
            .ok_or_else(|| Error::InvalidArgument("latent record does not cover the window".into()))?;
        match &field.kind {
            FieldKind::Collapse(_) => {
                for i in 0..field.dim {
                    p[i] = c[i] - (x[i] + latent.tau[i]);
                }
            }
            FieldKind::Push { epsilon, .. } => radial_push_into(x, &latent.tau, c, *epsilon, &mut fallback, &mut p),
            _ => return Err(Error::InvalidArgument("not a block field".into())),
        }
        displacements.push(&p);
    }
    Ok(FieldSample { window_radius, sites, displacements, latent: LatentRecord::Blocks(latent.clone()) })
}

/// One realized point set `{x + U + p_x}` restricted to the sampled window.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub dim: usize,
    pub points: PointSet,
    pub window_radius: f64,
    pub origin_shift: Vec<f64>,
}

impl Configuration {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn realize_configuration(lattice: &Lattice, field: &FieldSample, u: &FundamentalDomainPoint) -> Configuration {
    let dim = lattice.dim();
    let mut points = PointSet::with_capacity(dim, field.len());
    let mut y = vec![0.0; dim];
    for (x, p) in field.sites.iter().zip(field.displacements.iter()) {
        for i in 0..dim {
            y[i] = x[i] + u.coords()[i] + p[i];
        }
        points.push(&y);
    }
    Configuration { dim, points, window_radius: field.window_radius, origin_shift: u.coords().to_vec() }
}
