//! One replica: draw a configuration and count its points in every ball `B_r(0)`.

use rand::Rng;
use rand_distr::{Distribution as _, Poisson};

use crate::error::Result;
use crate::fields::{gaussian_field_synthesize, radial_push_into, BlockLatent, Field, FieldKind};
use crate::lattice::{norm2, Lattice};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ReplicaOutcome {
    pub counts: Vec<f64>,
    /// An unbounded displacement exceeded the margin near the window edge.
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub(crate) enum Process {
    Perturbed { lattice: Lattice, field: Field, margin: f64, audit: bool },
    Poisson { dim: usize, intensity: f64 },
}

fn tally(counts: &mut [f64], r2: &[f64], d2: f64) {
    // radii are increasing: every ball from the first containing the point onwards
    let first = r2.partition_point(|&rr| rr < d2);
    for c in &mut counts[first..] {
        *c += 1.0;
    }
}

impl Process {
    pub fn dim(&self) -> usize {
        match self {
            Process::Perturbed { lattice, .. } => lattice.dim(),
            Process::Poisson { dim, .. } => *dim,
        }
    }

    pub fn run(&self, radii: &[f64], rng: &mut SimRng) -> Result<ReplicaOutcome> {
        let r2: Vec<f64> = radii.iter().map(|r| r * r).collect();
        let r_max = radii.last().copied().unwrap_or(0.0);
        let mut counts = vec![0.0; radii.len()];
        match self {
            Process::Poisson { dim, intensity } => {
                let volume = crate::lattice::ball_volume(*dim, r_max);
                let n = Poisson::new(intensity * volume).expect("positive mean").sample(rng) as u64;
                for _ in 0..n {
                    // radius of a uniform point in the ball
                    let u: f64 = rng.random();
                    let rho = r_max * u.powf(1.0 / *dim as f64);
                    tally(&mut counts, &r2, rho * rho);
                }
                Ok(ReplicaOutcome { counts, flagged: false })
            }
            Process::Perturbed { lattice, field, margin, audit } => {
                let dim = lattice.dim();
                let u = lattice.sample_fundamental(rng);
                let u = u.coords();
                match field.kind() {
                    FieldKind::Iid(dist) if dist.bound(dim) == Some(0.0) => {
                        // unperturbed: count lattice points in B_r(-U) row by row
                        let center: Vec<f64> = u.iter().map(|v| -v).collect();
                        for (c, &r) in counts.iter_mut().zip(radii) {
                            *c = lattice.count_in_ball(&center, r)? as f64;
                        }
                        Ok(ReplicaOutcome { counts, flagged: false })
                    }
                    FieldKind::Collapse(law) => {
                        let side = law.sample(rng);
                        let reach = r_max + lattice.cell_diameter() + 1e-9 * (1.0 + r_max);
                        let latent = BlockLatent::sample(rng, dim, side, reach);
                        latent.collapse_counts(u, radii, &mut counts);
                        Ok(ReplicaOutcome { counts, flagged: false })
                    }
                    FieldKind::Push { epsilon, law } => {
                        let side = law.sample(rng);
                        let reach = r_max + epsilon + lattice.cell_diameter();
                        let latent = BlockLatent::sample(rng, dim, side, reach);
                        let mut m = vec![0i64; dim];
                        let mut p = vec![0.0; dim];
                        let mut y = vec![0.0; dim];
                        let origin = vec![0.0; dim];
                        let mut failure = None;
                        lattice.visit_ball(&origin, reach, |_, x| {
                            latent.block_of(x, &mut m);
                            let Some(c) = latent.center(&m) else {
                                failure = Some(());
                                return;
                            };
                            radial_push_into(x, &latent.tau, c, *epsilon, rng, &mut p);
                            for i in 0..dim {
                                y[i] = x[i] + u[i] + p[i];
                            }
                            tally(&mut counts, &r2, norm2(&y));
                        })?;
                        debug_assert!(failure.is_none(), "latent blocks cover the window");
                        Ok(ReplicaOutcome { counts, flagged: false })
                    }
                    kind => {
                        let window = r_max + margin + lattice.cell_diameter();
                        let edge2 = r_max * r_max;
                        let margin2 = margin * margin;
                        let mut flagged = false;
                        let mut p = vec![0.0; dim];
                        let mut y = vec![0.0; dim];
                        let origin = vec![0.0; dim];
                        let torus = match kind {
                            FieldKind::Spectral { delta, grid, amplitude, .. } => {
                                Some(gaussian_field_synthesize(dim, *delta, *grid, *amplitude, rng)?)
                            }
                            _ => None,
                        };
                        lattice.visit_ball(&origin, window, |n, x| {
                            match (kind, &torus) {
                                (FieldKind::Iid(dist), _) => dist.sample_into(rng, &mut p),
                                (_, Some(g)) => p.copy_from_slice(g.displacement(n)),
                                _ => unreachable!("block fields are handled above"),
                            }
                            let mut site2 = 0.0;
                            for i in 0..dim {
                                let s = x[i] + u[i];
                                site2 += s * s;
                                y[i] = s + p[i];
                            }
                            if *audit && site2 > edge2 && norm2(&p) > margin2 {
                                flagged = true;
                            }
                            tally(&mut counts, &r2, norm2(&y));
                        })?;
                        Ok(ReplicaOutcome { counts, flagged })
                    }
                }
            }
        }
    }
}
