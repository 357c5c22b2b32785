use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use super::sampling::{poisson_count, sample_hex_grid, Placement};
use super::{norm2, Estimate, Reception, SimConfig, SimError};
use crate::model::Network;

/// Which stations transmit and which may serve the typical user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadModel {
    /// Tier-i stations are active with probability p_i; active and idle
    /// stations may both serve.
    #[default]
    ConditionalThinning,
    /// Every station transmits, whatever its activity factor.
    FullyLoaded,
    /// Activity as in conditional thinning, but only idle stations may serve.
    IdleOnly,
}

/// Coverage of a user at the window centre, averaged over `sim.trials`
/// independent snapshots.
///
/// For each station the draws are, in order: its position (PPP tiers),
/// an activity uniform and an exponential fade. The activity uniform is
/// drawn under every load model, so `FullyLoaded` and conditional thinning
/// at p = 1 consume identical streams.
pub fn estimate_coverage(
    net: &Network,
    sim: &SimConfig,
    placement: Placement,
    load: LoadModel,
) -> Result<Estimate, SimError> {
    sim.validate()?;
    let tiers = net.len();
    let (use_active, use_idle) = match load {
        LoadModel::ConditionalThinning | LoadModel::FullyLoaded => (true, true),
        LoadModel::IdleOnly => (false, true),
    };
    let outcomes: Vec<(bool, bool)> = (0..sim.trials)
        .into_par_iter()
        .map_init(
            || Reception::new(tiers),
            |rx, trial| {
                let mut rng = sim.trial_rng(trial);
                *rx = Reception::new(tiers);
                draw_trial(net, sim.window_radius, placement, load, &mut rng, rx);
                (rx.covered(net, use_active, use_idle), rx.stations == 0)
            },
        )
        .collect();
    let hits = outcomes.iter().filter(|o| o.0).count() as u64;
    let empty = outcomes.iter().filter(|o| o.1).count() as u64;
    Ok(Estimate::from_counts(hits, sim.trials, empty))
}

fn draw_trial<R: Rng + ?Sized>(
    net: &Network,
    radius: f64,
    placement: Placement,
    load: LoadModel,
    rng: &mut R,
    rx: &mut Reception,
) {
    let half_alpha = 0.5 * net.alpha();
    let r2 = radius * radius;
    for (k, tier) in net.tiers().iter().enumerate() {
        let mut mark = |rng: &mut R, d2: f64| {
            let u: f64 = rng.random();
            let active = load == LoadModel::FullyLoaded || u < tier.activity;
            let h: f64 = Exp1.sample(rng);
            rx.record(k, active, tier.power * h * d2.powf(-half_alpha));
        };
        if k == 0 && placement == Placement::HexFirstTier {
            let grid = sample_hex_grid(tier.density, radius, rng).expect("validated density");
            for p in grid {
                // a lattice site on the user is a zero-distance station
                mark(rng, norm2(p).max(f64::MIN_POSITIVE));
            }
        } else {
            let n = poisson_count(tier.density * std::f64::consts::PI * r2, rng);
            for _ in 0..n {
                // uniform on (0, 1] keeps the distance positive
                let d2 = r2 * (1.0 - rng.random::<f64>());
                mark(rng, d2);
            }
        }
    }
}
