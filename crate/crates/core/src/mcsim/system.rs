use kiddo::{KdTree, SquaredEuclidean};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use super::sampling::{sample_ppp, Point};
use super::{invalid, norm2, Estimate, Reception, SimConfig, SimError};
use crate::model::Network;

/// Result of the user-driven simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemEstimate {
    pub coverage: Estimate,
    /// Share of users attached to each tier, measured on users inside half
    /// the window radius.
    pub served_fraction: Vec<f64>,
    pub served_fraction_stderr: Vec<f64>,
    /// Mean per-block activity min(N_x / M, 1) of stations inside half the
    /// window radius.
    pub mean_activity: Vec<f64>,
}

struct TrialStats {
    covered: bool,
    empty: bool,
    /// Per tier: users served (inner users), stations and summed activity
    /// (inner stations).
    served: Vec<u64>,
    inner_users: u64,
    stations: Vec<u64>,
    activity: Vec<f64>,
}

/// Coverage when activity comes from actual user load rather than a fixed
/// factor.
///
/// Per trial: the tiers and a user PPP of intensity `user_density` are drawn
/// in the window; each user attaches to the reachable station with the
/// strongest fading-free power P r^{-α}; a station with N users is active
/// in the evaluated block with probability min(N/M, 1); the user at the
/// origin is then tested as in [`super::estimate_coverage`]. The tiers'
/// own activity factors are ignored.
pub fn estimate_coverage_system(
    net: &Network,
    user_density: f64,
    resource_blocks: u32,
    sim: &SimConfig,
) -> Result<SystemEstimate, SimError> {
    sim.validate()?;
    if !(user_density >= 0.0 && user_density.is_finite()) {
        return Err(invalid(
            "user_density",
            format!("must be >= 0, got {user_density}"),
        ));
    }
    if resource_blocks == 0 {
        return Err(invalid("resource_blocks", "must be >= 1"));
    }
    let stats: Vec<TrialStats> = (0..sim.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = sim.trial_rng(trial);
            run_trial(net, user_density, resource_blocks, sim.window_radius, &mut rng)
        })
        .collect::<Result<_, _>>()?;
    Ok(summarize(net.len(), sim.trials, &stats))
}

fn run_trial<R: Rng + ?Sized>(
    net: &Network,
    user_density: f64,
    resource_blocks: u32,
    radius: f64,
    rng: &mut R,
) -> Result<TrialStats, SimError> {
    let k = net.len();
    let x = net.two_over_alpha();
    let tiers: Vec<Vec<Point>> = net
        .tiers()
        .iter()
        .map(|t| sample_ppp(t.density, radius, rng))
        .collect::<Result<_, _>>()?;
    let users = sample_ppp(user_density, radius, rng)?;

    // argmax P r^{-α} = argmin r² P^{-2/α}
    let trees: Vec<Option<KdTree<f64, 2>>> = tiers
        .iter()
        .enumerate()
        .map(|(i, pts)| {
            (net.can_serve(i) && !pts.is_empty()).then(|| {
                let mut tree = KdTree::with_capacity(pts.len());
                for (j, p) in pts.iter().enumerate() {
                    tree.add(p, j as u64);
                }
                tree
            })
        })
        .collect();
    let scale: Vec<f64> = net.tiers().iter().map(|t| t.power.powf(-x)).collect();

    let inner2 = 0.25 * radius * radius;
    let mut load: Vec<Vec<u32>> = tiers.iter().map(|p| vec![0; p.len()]).collect();
    let mut served = vec![0u64; k];
    let mut inner_users = 0;
    for u in &users {
        let best = trees
            .iter()
            .enumerate()
            .filter_map(|(i, t)| {
                t.as_ref().map(|t| {
                    let n = t.nearest_one::<SquaredEuclidean>(u);
                    (n.distance * scale[i], i, n.item as usize)
                })
            })
            .min_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((_, i, j)) = best {
            load[i][j] += 1;
            if norm2(*u) <= inner2 {
                served[i] += 1;
                inner_users += 1;
            }
        }
    }

    let half_alpha = 0.5 * net.alpha();
    let m = f64::from(resource_blocks);
    let mut rx = Reception::new(k);
    let mut stations = vec![0u64; k];
    let mut activity = vec![0.0; k];
    for (i, pts) in tiers.iter().enumerate() {
        let power = net.tier(i).power;
        for (p, &n) in pts.iter().zip(&load[i]) {
            let p_x = (f64::from(n) / m).min(1.0);
            let active = rng.random::<f64>() < p_x;
            let h: f64 = Exp1.sample(rng);
            let d2 = norm2(*p).max(f64::MIN_POSITIVE);
            rx.record(i, active, power * h * d2.powf(-half_alpha));
            if norm2(*p) <= inner2 {
                stations[i] += 1;
                activity[i] += p_x;
            }
        }
    }
    Ok(TrialStats {
        covered: rx.covered(net, true, true),
        empty: rx.stations == 0,
        served,
        inner_users,
        stations,
        activity,
    })
}

fn summarize(k: usize, trials: u64, stats: &[TrialStats]) -> SystemEstimate {
    let hits = stats.iter().filter(|s| s.covered).count() as u64;
    let empty = stats.iter().filter(|s| s.empty).count() as u64;

    let mut served_fraction = vec![0.0; k];
    let mut served_fraction_stderr = vec![0.0; k];
    let with_users: Vec<&TrialStats> = stats.iter().filter(|s| s.inner_users > 0).collect();
    let n = with_users.len() as f64;
    if n > 0.0 {
        for i in 0..k {
            let shares: Vec<f64> = with_users
                .iter()
                .map(|s| s.served[i] as f64 / s.inner_users as f64)
                .collect();
            let mean = shares.iter().sum::<f64>() / n;
            served_fraction[i] = mean;
            if n > 1.0 {
                let var = shares.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                served_fraction_stderr[i] = (var / n).sqrt();
            }
        }
    }
    let mean_activity = (0..k)
        .map(|i| {
            let count: u64 = stats.iter().map(|s| s.stations[i]).sum();
            let total: f64 = stats.iter().map(|s| s.activity[i]).sum();
            if count == 0 {
                0.0
            } else {
                total / count as f64
            }
        })
        .collect();
    SystemEstimate {
        coverage: Estimate::from_counts(hits, trials, empty),
        served_fraction,
        served_fraction_stderr,
        mean_activity,
    }
}
