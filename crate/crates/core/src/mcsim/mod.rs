//! Monte Carlo oracle for the analytic coverage results.
//!
//! Every trial draws from its own ChaCha8 stream, keyed by `(seed, trial)`,
//! so estimates are bit-identical for a given seed no matter how rayon
//! schedules the work.

mod estimate;
mod raster;
mod sampling;
mod system;

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::model::{ModelError, Network, Warning};

pub use estimate::{estimate_coverage, LoadModel};
pub use raster::{coverage_region_raster, Raster, RasterMode};
pub use sampling::{
    sample_hex_grid, sample_ppp, sample_realization, BaseStation, Placement, Point, Realization,
};
pub use system::{estimate_coverage_system, SystemEstimate};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> SimError {
    SimError::Invalid {
        field,
        reason: reason.into(),
    }
}

/// Expected base-station count of the sparsest tier that the default window
/// must hold.
pub const DEFAULT_MIN_EXPECTED_POINTS: u32 = 500;

/// Share of empty-window trials above which an estimate carries a warning.
pub const EMPTY_WINDOW_WARN_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub window_radius: f64,
    pub trials: u64,
    pub seed: u64,
    pub min_expected_points: u32,
}

impl SimConfig {
    pub fn new(window_radius: f64, trials: u64, seed: u64) -> Result<Self, SimError> {
        let cfg = Self {
            window_radius,
            trials,
            seed,
            min_expected_points: DEFAULT_MIN_EXPECTED_POINTS,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.window_radius > 0.0 && self.window_radius.is_finite()) {
            return Err(invalid(
                "window_radius",
                format!("must be finite and > 0, got {}", self.window_radius),
            ));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be >= 1"));
        }
        if self.min_expected_points == 0 {
            return Err(invalid("min_expected_points", "must be >= 1"));
        }
        Ok(())
    }

    /// Window holding at least max(500, `min_expected_points`) expected
    /// active base stations of the sparsest transmitting tier.
    pub fn for_network(net: &Network, trials: u64, seed: u64) -> Result<Self, SimError> {
        let sparsest = net
            .tiers()
            .iter()
            .map(|t| t.activity * t.density)
            .filter(|&d| d > 0.0)
            .fold(f64::INFINITY, f64::min);
        Self::for_density(sparsest, trials, seed)
    }

    /// Window holding at least 500 expected stations of the sparsest tier,
    /// ignoring activity. Used where activity is an output, as in the
    /// user-driven system simulation.
    pub fn for_system(net: &Network, trials: u64, seed: u64) -> Result<Self, SimError> {
        let sparsest = net
            .tiers()
            .iter()
            .map(|t| t.density)
            .filter(|&d| d > 0.0)
            .fold(f64::INFINITY, f64::min);
        Self::for_density(sparsest, trials, seed)
    }

    fn for_density(density: f64, trials: u64, seed: u64) -> Result<Self, SimError> {
        if !density.is_finite() {
            return Err(invalid("network", "no tier has positive density"));
        }
        let count = f64::from(DEFAULT_MIN_EXPECTED_POINTS);
        Self::new((count / (PI * density)).sqrt(), trials, seed)
    }

    pub fn with_min_expected_points(mut self, n: u32) -> Result<Self, SimError> {
        self.min_expected_points = n;
        let needed = f64::from(n.max(DEFAULT_MIN_EXPECTED_POINTS));
        let scale = (needed / f64::from(DEFAULT_MIN_EXPECTED_POINTS)).sqrt();
        self.window_radius *= scale;
        self.validate()?;
        Ok(self)
    }

    pub(crate) fn trial_rng(&self, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);
        rng
    }
}

/// A Bernoulli mean with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    /// √(mean (1 - mean) / trials).
    pub stderr: f64,
    pub trials: u64,
    /// Trials whose window held no base station at all.
    pub empty_trials: u64,
}

impl Estimate {
    pub fn from_counts(hits: u64, trials: u64, empty_trials: u64) -> Self {
        let n = trials as f64;
        let mean = hits as f64 / n;
        Self {
            mean,
            stderr: (mean * (1.0 - mean) / n).sqrt(),
            trials,
            empty_trials,
        }
    }

    pub fn empty_fraction(&self) -> f64 {
        self.empty_trials as f64 / self.trials as f64
    }

    pub fn warnings(&self) -> Vec<Warning> {
        let fraction = self.empty_fraction();
        if fraction > EMPTY_WINDOW_WARN_FRACTION {
            vec![Warning::EmptyWindows { fraction }]
        } else {
            Vec::new()
        }
    }
}

/// Squared distance to the origin.
pub(crate) fn norm2(p: Point) -> f64 {
    p[0] * p[0] + p[1] * p[1]
}

/// Per-tier best signal among active and among idle candidates for one trial,
/// plus the total active power.
#[derive(Debug, Clone)]
pub(crate) struct Reception {
    pub best_active: Vec<f64>,
    pub best_idle: Vec<f64>,
    pub interference: f64,
    pub stations: usize,
}

impl Reception {
    pub fn new(tiers: usize) -> Self {
        Self {
            best_active: vec![0.0; tiers],
            best_idle: vec![0.0; tiers],
            interference: 0.0,
            stations: 0,
        }
    }

    pub fn record(&mut self, tier: usize, active: bool, signal: f64) {
        self.stations += 1;
        if active {
            self.interference += signal;
            self.best_active[tier] = self.best_active[tier].max(signal);
        } else {
            self.best_idle[tier] = self.best_idle[tier].max(signal);
        }
    }

    /// Some reachable tier has an active station with S/(I - S) ≥ β or an
    /// idle one with S/I ≥ β. The flags select which candidate kinds count.
    pub fn covered(&self, net: &Network, use_active: bool, use_idle: bool) -> bool {
        let i = self.interference;
        net.access().iter().any(|&k| {
            let beta = net.tier(k).target_sir;
            let s = self.best_active[k];
            let a = use_active && s > 0.0 && s >= beta * (i - s);
            let s = self.best_idle[k];
            let b = use_idle && s > 0.0 && s >= beta * i;
            a || b
        })
    }
}
