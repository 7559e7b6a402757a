//! Poisson reference configurations and the empirical structure factor.

use rand::Rng;
use rand_distr::{Distribution as _, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use super::{ExperimentConfig, RunOptions};
use crate::error::{Error, Result};
use crate::fields::{realize_configuration, Configuration, FieldSpec, MARGIN_QUANTILE};
use crate::lattice::{ball_volume, norm2, PointSet};
use crate::rng::{substream, Domain, SimRng};

/// Homogeneous Poisson sample on the ball of radius `window_radius`.
pub fn poisson_reference<R: Rng + ?Sized>(dim: usize, intensity: f64, window_radius: f64, rng: &mut R) -> Result<Configuration> {
    if !(intensity > 0.0 && intensity.is_finite()) || dim == 0 {
        return Err(Error::InvalidArgument(format!("poisson reference needs intensity > 0, got {intensity}")));
    }
    let mean = intensity * ball_volume(dim, window_radius);
    let n = Poisson::new(mean).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(rng) as usize;
    let mut points = PointSet::with_capacity(dim, n);
    let mut y = vec![0.0; dim];
    while points.len() < n {
        for v in y.iter_mut() {
            *v = window_radius * (2.0 * rng.random::<f64>() - 1.0);
        }
        if norm2(&y) <= window_radius * window_radius {
            points.push(&y);
        }
    }
    Ok(Configuration { dim, points, window_radius, origin_shift: vec![0.0; dim] })
}

fn poisson_cube(dim: usize, intensity: f64, half_side: f64, rng: &mut SimRng) -> Result<Configuration> {
    let mean = intensity * (2.0 * half_side).powi(dim as i32);
    let n = Poisson::new(mean).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(rng) as usize;
    let mut points = PointSet::with_capacity(dim, n);
    let mut y = vec![0.0; dim];
    for _ in 0..n {
        for v in y.iter_mut() {
            *v = half_side * (2.0 * rng.random::<f64>() - 1.0);
        }
        points.push(&y);
    }
    Ok(Configuration { dim, points, window_radius: half_side * (dim as f64).sqrt(), origin_shift: vec![0.0; dim] })
}

/// Points inside the half-open cube `[-h, h)^d`.
pub fn restrict_to_cube(config: &Configuration, half_side: f64) -> Configuration {
    let mut points = PointSet::new(config.dim);
    for p in config.points.iter() {
        if p.iter().all(|&v| v >= -half_side && v < half_side) {
            points.push(p);
        }
    }
    Configuration { dim: config.dim, points, window_radius: half_side, origin_shift: config.origin_shift.clone() }
}

/// Wavevectors `π m / h` of the cube's dual grid, one of each `±m` pair, `0 < |m|_∞ ≤ max_index`.
pub fn dual_grid_wavevectors(dim: usize, half_side: f64, max_index: i64) -> Vec<Vec<f64>> {
    let side = (2 * max_index + 1) as usize;
    let total = side.pow(dim as u32);
    let mut out = Vec::new();
    for flat in 0..total {
        let mut rest = flat;
        let mut m = vec![0i64; dim];
        for slot in m.iter_mut().rev() {
            *slot = (rest % side) as i64 - max_index;
            rest /= side;
        }
        match m.iter().find(|&&v| v != 0) {
            Some(&first) if first > 0 => {
                out.push(m.iter().map(|&v| std::f64::consts::PI * v as f64 / half_side).collect());
            }
            _ => {}
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureFactorPoint {
    pub k: Vec<f64>,
    pub s: f64,
    /// Standard error over replicas; zero for a single configuration.
    pub stderr: f64,
}

/// `S(k) = |Σ_j exp(-i k·x_j)|² / n` for each `k`.
pub fn structure_factor(config: &Configuration, k_list: &[Vec<f64>]) -> Result<Vec<StructureFactorPoint>> {
    let values = structure_factor_values(config, k_list)?;
    Ok(k_list.iter().zip(values).map(|(k, s)| StructureFactorPoint { k: k.clone(), s, stderr: 0.0 }).collect())
}

fn structure_factor_values(config: &Configuration, k_list: &[Vec<f64>]) -> Result<Vec<f64>> {
    if config.is_empty() {
        return Err(Error::InvalidArgument("structure factor of an empty configuration".into()));
    }
    let n = config.len() as f64;
    k_list
        .iter()
        .map(|k| {
            if k.len() != config.dim || k.iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidArgument("wavevectors must be nonzero and match the dimension".into()));
            }
            let (mut re, mut im) = (0.0, 0.0);
            for p in config.points.iter() {
                let phase: f64 = k.iter().zip(p).map(|(a, b)| a * b).sum();
                let (s, c) = phase.sin_cos();
                re += c;
                im -= s;
            }
            Ok((re * re + im * im) / n)
        })
        .collect()
}

/// Structure factor on the cube dual grid, averaged over independent replicas.
pub fn structure_factor_replicas(
    cfg: &ExperimentConfig,
    half_side: f64,
    max_index: i64,
    replicas: u64,
    opts: &RunOptions,
) -> Result<Vec<StructureFactorPoint>> {
    if replicas < 2 {
        return Err(Error::InvalidArgument("structure factor averaging needs at least 2 replicas".into()));
    }
    let dim = cfg.dim()?;
    let k_list = dual_grid_wavevectors(dim, half_side, max_index);
    let cube_radius = half_side * (dim as f64).sqrt();
    let draw = |i: u64| -> Result<Vec<f64>> {
        let mut rng = substream(cfg.seed, Domain::Auxiliary, i);
        let conf = if let Some(p) = &cfg.poisson {
            poisson_cube(p.dim, p.intensity, half_side, &mut rng)?
        } else {
            let lattice = cfg.lattice.as_ref().expect("validated").build()?;
            let spec = cfg.field.clone().unwrap_or(FieldSpec::Iid {
                distribution: crate::fields::Distribution::PointMass { value: vec![0.0; dim] },
            });
            let field = spec.compile(&lattice)?;
            let reach = field.displacement_bound().unwrap_or_else(|| field.displacement_quantile(MARGIN_QUANTILE));
            let u = lattice.sample_fundamental(&mut rng);
            let sample = field.sample(&lattice, cube_radius + reach + lattice.cell_diameter(), &mut rng)?;
            restrict_to_cube(&realize_configuration(&lattice, &sample, &u), half_side)
        };
        structure_factor_values(&conf, &k_list)
    };
    cfg.validate()?;
    let per_replica: Vec<Vec<f64>> = opts.install(|| (0..replicas).into_par_iter().map(draw).collect::<Result<Vec<_>>>())??;
    let n = replicas as f64;
    Ok(k_list
        .into_iter()
        .enumerate()
        .map(|(j, k)| {
            let column: Vec<f64> = per_replica.iter().map(|v| v[j]).collect();
            let (mean, var) = super::sample_variance(&column);
            StructureFactorPoint { k, s: mean, stderr: (var / n).sqrt() }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;

    #[test]
    fn single_point_has_unit_structure_factor() {
        let conf = Configuration { dim: 2, points: PointSet::from_flat(2, vec![0.3, -1.2]), window_radius: 2.0, origin_shift: vec![0.0; 2] };
        let s = structure_factor(&conf, &[vec![1.0, 0.0], vec![0.7, 2.5]]).unwrap();
        assert!(s.iter().all(|p| (p.s - 1.0).abs() < 1e-12));
        assert!(structure_factor(&conf, &[vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn poisson_reference_counts() {
        let mut rng = substream(41, Domain::Auxiliary, 0);
        let n = 2000;
        let counts: Vec<f64> = (0..n).map(|_| poisson_reference(2, 1.0, 10.0, &mut rng).unwrap().len() as f64).collect();
        let (mean, var) = super::super::sample_variance(&counts);
        let expected = 100.0 * std::f64::consts::PI;
        assert!((mean - expected).abs() < 4.0 * (expected / n as f64).sqrt());
        assert!((var / mean - 1.0).abs() < 0.1);
    }

    #[test]
    fn lattice_structure_factor_vanishes_on_dual_grid() {
        let cfg = ExperimentConfig::lattice_with_field(
            LatticeSpec::Named("Z2".into()),
            FieldSpec::Iid { distribution: crate::fields::Distribution::PointMass { value: vec![0.0; 2] } },
            vec![1.0],
            40,
            2,
        );
        let s = structure_factor_replicas(&cfg, 8.0, 3, 4, &RunOptions::default()).unwrap();
        assert!(s.iter().all(|p| p.s < 1e-20), "{:?}", s.iter().map(|p| p.s).fold(0.0, f64::max));
    }

    #[test]
    fn poisson_structure_factor_is_one() {
        let cfg = ExperimentConfig::poisson(2, 1.0, vec![1.0], 40, 3);
        let s = structure_factor_replicas(&cfg, 12.0, 4, 400, &RunOptions::default()).unwrap();
        let band: Vec<&StructureFactorPoint> =
            s.iter().filter(|p| (0.5..=3.0).contains(&norm2(&p.k).sqrt())).collect();
        let mean = band.iter().map(|p| p.s).sum::<f64>() / band.len() as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean S = {mean}");
    }
}
