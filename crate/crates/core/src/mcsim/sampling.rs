use std::f64::consts::{PI, TAU};
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::Serialize;

use super::{invalid, SimError};
use crate::model::Network;

pub type Point = [f64; 2];

/// How base stations are placed in each trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Every tier is an independent PPP.
    #[default]
    Ppp,
    /// The first tier sits on a randomly shifted and rotated hexagonal
    /// lattice; the others stay PPPs.
    HexFirstTier,
}

pub(crate) fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // mean > 0 and finite, which is all Poisson::new rejects otherwise
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

fn check_density(density: f64, radius: f64) -> Result<(), SimError> {
    if !(density >= 0.0 && density.is_finite()) {
        return Err(invalid("density", format!("must be >= 0, got {density}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid("radius", format!("must be > 0, got {radius}")));
    }
    Ok(())
}

/// A point uniform on the disc of radius `radius`.
pub(crate) fn uniform_in_disc<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = TAU * rng.random::<f64>();
    [r * theta.cos(), r * theta.sin()]
}

/// Homogeneous PPP of intensity `density` on the disc of radius `radius`
/// centred at the origin.
pub fn sample_ppp<R: Rng + ?Sized>(
    density: f64,
    radius: f64,
    rng: &mut R,
) -> Result<Vec<Point>, SimError> {
    check_density(density, radius)?;
    let n = poisson_count(density * PI * radius * radius, rng);
    Ok((0..n).map(|_| uniform_in_disc(radius, rng)).collect())
}

/// Hexagonal lattice with `density` sites per unit area, shifted uniformly
/// within one cell and rotated uniformly, clipped to the disc.
pub fn sample_hex_grid<R: Rng + ?Sized>(
    density: f64,
    radius: f64,
    rng: &mut R,
) -> Result<Vec<Point>, SimError> {
    check_density(density, radius)?;
    if density == 0.0 {
        return Err(invalid("density", "hexagonal grid needs density > 0"));
    }
    // cell area √3/2 d² = 1/λ
    let d = (2.0 / (3f64.sqrt() * density)).sqrt();
    let a1 = [d, 0.0];
    let a2 = [0.5 * d, 0.5 * 3f64.sqrt() * d];
    let (u, v) = (rng.random::<f64>(), rng.random::<f64>());
    let offset = [u * a1[0] + v * a2[0], u * a1[1] + v * a2[1]];
    let theta = TAU * rng.random::<f64>();
    let (s, c) = theta.sin_cos();

    let reach = (radius / (0.5 * 3f64.sqrt() * d)).ceil() as i64 + 2;
    let r2 = radius * radius;
    let mut points = Vec::new();
    for j in -reach..=reach {
        for i in -reach..=reach {
            let (fi, fj) = (i as f64, j as f64);
            let x = offset[0] + fi * a1[0] + fj * a2[0];
            let y = offset[1] + fi * a1[1] + fj * a2[1];
            let p = [c * x - s * y, s * x + c * y];
            if p[0] * p[0] + p[1] * p[1] <= r2 {
                points.push(p);
            }
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaseStation {
    pub position: Point,
    /// Zero-based tier index.
    pub tier: usize,
    pub active: bool,
    /// Unit-mean exponential power fade.
    pub fading: f64,
}

/// One snapshot of every tier inside a disc, with activity marks and fades.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub radius: f64,
    pub network: Network,
    pub stations: Vec<BaseStation>,
}

/// Draws positions tier by tier, then marks each station active with its
/// tier's probability and gives it an exponential fade.
pub fn sample_realization<R: Rng + ?Sized>(
    net: &Network,
    radius: f64,
    placement: Placement,
    rng: &mut R,
) -> Result<Realization, SimError> {
    let mut stations = Vec::new();
    for (k, tier) in net.tiers().iter().enumerate() {
        let positions = if k == 0 && placement == Placement::HexFirstTier {
            sample_hex_grid(tier.density, radius, rng)?
        } else {
            sample_ppp(tier.density, radius, rng)?
        };
        for position in positions {
            let active = rng.random::<f64>() < tier.activity;
            let fading: f64 = Exp1.sample(rng);
            stations.push(BaseStation {
                position,
                tier: k,
                active,
                fading,
            });
        }
    }
    Ok(Realization {
        radius,
        network: net.clone(),
        stations,
    })
}

impl Realization {
    /// Station counts per tier as (all, active).
    pub fn counts_by_tier(&self) -> Vec<(usize, usize)> {
        let mut counts = vec![(0, 0); self.network.len()];
        for s in &self.stations {
            counts[s.tier].0 += 1;
            counts[s.tier].1 += usize::from(s.active);
        }
        counts
    }

    /// CSV with header `x,y,tier,active,fading`; tiers are one-based.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "tier", "active", "fading"])?;
        for s in &self.stations {
            w.write_record([
                s.position[0].to_string(),
                s.position[1].to_string(),
                (s.tier + 1).to_string(),
                s.active.to_string(),
                s.fading.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
