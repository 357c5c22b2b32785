//! Tiers, networks and the derived scalars every coverage formula consumes.
//!
//! Powers are linear relative values and densities are in base stations per
//! unit area of an arbitrary but consistent unit. All results depend on these
//! only through products `λ P^{2/α}` and ratios of them.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::specfun::{self, SeriesTolerance, SpecfunError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ModelError {
    ModelError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// One class of base stations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tier {
    /// Relative transmit power, linear.
    pub power: f64,
    /// Base stations per unit area.
    pub density: f64,
    /// Target SIR, linear.
    pub target_sir: f64,
    /// Probability that an interfering base station of this tier transmits.
    pub activity: f64,
}

impl Tier {
    pub fn new(power: f64, density: f64, target_sir: f64, activity: f64) -> Self {
        Self {
            power,
            density,
            target_sir,
            activity,
        }
    }

    /// δ = β / (1 + β).
    pub fn delta(&self) -> f64 {
        self.target_sir / (1.0 + self.target_sir)
    }

    pub fn target_sir_db(&self) -> f64 {
        linear_to_db(self.target_sir)
    }

    fn check(&self, index: usize) -> Result<(), ModelError> {
        let name = |f: &str| format!("tiers[{}].{f}", index + 1);
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(invalid(name("power"), format!("must be > 0, got {}", self.power)));
        }
        // Zero density is allowed so that a split tier may be empty.
        if !(self.density >= 0.0 && self.density.is_finite()) {
            return Err(invalid(
                name("density"),
                format!("must be >= 0, got {}", self.density),
            ));
        }
        if !(self.target_sir > 0.0 && self.target_sir.is_finite()) {
            return Err(invalid(
                name("target_sir"),
                format!("must be > 0 (linear), got {}", self.target_sir),
            ));
        }
        if !(0.0..=1.0).contains(&self.activity) {
            return Err(invalid(
                name("activity"),
                format!("must lie in [0, 1], got {}", self.activity),
            ));
        }
        Ok(())
    }
}

/// Non-fatal findings attached to a validated network or a result.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// β ≤ 1 (0 dB): outside the single-candidate assumption of the series,
    /// so analytic values are reported but not certified.
    TargetSirNotAboveUnity { tier: usize, target_sir_db: f64 },
    /// The analytic value left [0, 1].
    ValueOutOfRange { value: f64 },
    /// The series stopped on the term cap instead of the stopping rule.
    TermCapReached { max_terms: usize },
    /// Monte Carlo: share of trials whose window held no base station.
    EmptyWindows { fraction: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::TargetSirNotAboveUnity { tier, target_sir_db } => write!(
                f,
                "tier {tier}: target SIR {target_sir_db:.3} dB is not above 0 dB; analytic result is uncertified"
            ),
            Warning::ValueOutOfRange { value } => {
                write!(f, "coverage value {value} lies outside [0, 1]")
            }
            Warning::TermCapReached { max_terms } => {
                write!(f, "series hit the cap of {max_terms} terms before converging")
            }
            Warning::EmptyWindows { fraction } => {
                write!(f, "{:.3}% of trials had an empty window", 100.0 * fraction)
            }
        }
    }
}

/// A validated K-tier network. Tier indices are zero-based in the API and
/// one-based in scenario files.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    alpha: f64,
    tiers: Vec<Tier>,
    access: Vec<usize>,
}

impl Network {
    /// Builds and validates a network; `access` holds zero-based tier
    /// indices (duplicates are merged).
    pub fn new(alpha: f64, tiers: Vec<Tier>, access: Vec<usize>) -> Result<Self, ModelError> {
        Self {
            alpha,
            tiers,
            access,
        }
        .validate()
    }

    /// Open access: every tier may serve.
    pub fn open(alpha: f64, tiers: Vec<Tier>) -> Result<Self, ModelError> {
        let access = (0..tiers.len()).collect();
        Self::new(alpha, tiers, access)
    }

    /// Re-checks every invariant, returning the network unchanged on success.
    pub fn validate(mut self) -> Result<Self, ModelError> {
        if !(self.alpha > 2.0 && self.alpha.is_finite()) {
            return Err(invalid(
                "alpha",
                format!("path-loss exponent must be > 2, got {}", self.alpha),
            ));
        }
        if self.tiers.is_empty() {
            return Err(invalid("tiers", "at least one tier is required"));
        }
        for (i, t) in self.tiers.iter().enumerate() {
            t.check(i)?;
        }
        self.access.sort_unstable();
        self.access.dedup();
        if self.access.is_empty() {
            return Err(invalid("access", "access set must not be empty"));
        }
        if let Some(&bad) = self.access.iter().find(|&&i| i >= self.tiers.len()) {
            return Err(invalid(
                "access",
                format!("tier {} does not exist (K = {})", bad + 1, self.tiers.len()),
            ));
        }
        let active: f64 = self
            .tiers
            .iter()
            .map(|t| t.activity * self.weight(t))
            .sum();
        if !(active > 0.0) {
            return Err(invalid(
                "tiers",
                "no tier transmits (sum of activity * density * power^(2/alpha) is 0)",
            ));
        }
        Ok(self)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tiers(&self) -> &[Tier] {
        &self.tiers
    }

    pub fn tier(&self, index: usize) -> &Tier {
        &self.tiers[index]
    }

    pub fn len(&self) -> usize {
        self.tiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiers.is_empty()
    }

    /// Zero-based indices of the tiers the user may connect to, ascending.
    pub fn access(&self) -> &[usize] {
        &self.access
    }

    pub fn is_open_access(&self) -> bool {
        self.access.len() == self.tiers.len()
    }

    pub fn can_serve(&self, tier: usize) -> bool {
        self.access.binary_search(&tier).is_ok()
    }

    pub fn access_tiers(&self) -> impl Iterator<Item = &Tier> + '_ {
        self.access.iter().map(move |&i| &self.tiers[i])
    }

    /// 2/α.
    pub fn two_over_alpha(&self) -> f64 {
        2.0 / self.alpha
    }

    /// λ P^{2/α}.
    pub fn weight(&self, tier: &Tier) -> f64 {
        tier.density * tier.power.powf(2.0 / self.alpha)
    }

    pub fn warnings(&self) -> Vec<Warning> {
        self.tiers
            .iter()
            .enumerate()
            .filter(|(_, t)| t.target_sir <= 1.0)
            .map(|(i, t)| Warning::TargetSirNotAboveUnity {
                tier: i + 1,
                target_sir_db: t.target_sir_db(),
            })
            .collect()
    }

    /// Same geometry with a different tier list, keeping the access set.
    pub fn with_tiers(&self, tiers: Vec<Tier>) -> Result<Self, ModelError> {
        Self::new(self.alpha, tiers, self.access.clone())
    }

    pub fn with_access(&self, access: Vec<usize>) -> Result<Self, ModelError> {
        Self::new(self.alpha, self.tiers.clone(), access)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self, ModelError> {
        Self::new(alpha, self.tiers.clone(), self.access.clone())
    }

    /// Every tier transmitting (p = 1), all else equal.
    pub fn fully_loaded(&self) -> Self {
        let tiers = self
            .tiers
            .iter()
            .map(|t| Tier {
                activity: 1.0,
                ..*t
            })
            .collect();
        Self {
            alpha: self.alpha,
            tiers,
            access: self.access.clone(),
        }
    }

    /// Appends a tier; it joins the access set iff the network is open.
    pub fn with_added_tier(&self, tier: Tier) -> Result<Self, ModelError> {
        let mut tiers = self.tiers.clone();
        let mut access = self.access.clone();
        if self.is_open_access() {
            access.push(tiers.len());
        }
        tiers.push(tier);
        Self::new(self.alpha, tiers, access)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        file.into_network()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ScenarioFile::from(self)).expect("plain data serializes")
    }
}

/// On-disk form of a network.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub alpha: f64,
    pub tiers: Vec<ScenarioTier>,
    /// One-based tier indices; omitted means open access.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub access: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTier {
    pub power: f64,
    pub density: f64,
    pub target_sir_db: f64,
    pub activity: f64,
}

impl ScenarioFile {
    pub fn into_network(self) -> Result<Network, ModelError> {
        let tiers: Vec<Tier> = self
            .tiers
            .iter()
            .map(|t| Tier::new(t.power, t.density, db_to_linear(t.target_sir_db), t.activity))
            .collect();
        let access = match self.access {
            None => (0..tiers.len()).collect(),
            Some(list) => list
                .into_iter()
                .map(|i| {
                    i.checked_sub(1)
                        .ok_or_else(|| invalid("access", "tier indices are 1-based"))
                })
                .collect::<Result<Vec<_>, _>>()?,
        };
        Network::new(self.alpha, tiers, access)
    }
}

impl From<&Network> for ScenarioFile {
    fn from(net: &Network) -> Self {
        Self {
            alpha: net.alpha,
            tiers: net
                .tiers
                .iter()
                .map(|t| ScenarioTier {
                    power: t.power,
                    density: t.density,
                    target_sir_db: t.target_sir_db(),
                    activity: t.activity,
                })
                .collect(),
            access: Some(net.access.iter().map(|i| i + 1).collect()),
        }
    }
}

/// Which tiers enter η and the fully-loaded denominator under closed access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaScope {
    /// Every tier interferes, whether or not it may serve.
    #[default]
    AllTiers,
    /// Only the access tiers, as if the other tiers did not exist.
    AccessTiers,
}

/// Truncation policy for the coverage correction series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    /// Stop once a term magnitude falls below this (past the majorant hump).
    pub epsilon: f64,
    pub max_terms: usize,
    pub eta_scope: EtaScope,
    /// Tolerance for the hypergeometric factors inside B(m).
    pub hypergeometric: SeriesTolerance,
}

impl SeriesControl {
    pub fn new(epsilon: f64, max_terms: usize) -> Result<Self, ModelError> {
        if !(epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be > 0, got {epsilon}")));
        }
        if max_terms == 0 {
            return Err(invalid("max_terms", "must be >= 1"));
        }
        Ok(Self {
            epsilon,
            max_terms,
            ..Self::default()
        })
    }
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self {
            epsilon: 1e-10,
            max_terms: 10_000,
            eta_scope: EtaScope::AllTiers,
            hypergeometric: SeriesTolerance::default(),
        }
    }
}

/// A, η and C(α) for one network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// Idle-candidate weight πΓ(1+2/α) Σ_{l∈B} (1-p_l) λ_l P_l^{2/α} β_l^{-2/α}.
    pub a: f64,
    /// Active-field coefficient C(α) Σ p_l λ_l P_l^{2/α}.
    pub eta: f64,
    pub c_alpha: f64,
}

impl DerivedConstants {
    pub fn a_over_eta(&self) -> f64 {
        self.a / self.eta
    }
}

/// πΓ(1 + 2/α).
pub fn pi_gamma_factor(alpha: f64) -> Result<f64, SpecfunError> {
    Ok(PI * specfun::gamma(1.0 + 2.0 / alpha)?)
}

pub fn derived_constants(net: &Network) -> Result<DerivedConstants, ModelError> {
    derived_constants_scoped(net, EtaScope::AllTiers)
}

pub fn derived_constants_scoped(
    net: &Network,
    scope: EtaScope,
) -> Result<DerivedConstants, ModelError> {
    let alpha = net.alpha();
    let c_alpha = specfun::interference_constant(alpha)?;
    let x = net.two_over_alpha();
    let idle: f64 = net
        .access_tiers()
        .map(|t| (1.0 - t.activity) * net.weight(t) * t.target_sir.powf(-x))
        .sum();
    let a = pi_gamma_factor(alpha)? * idle;
    let eta = c_alpha * active_weight(net, scope);
    if !(eta > 0.0) {
        return Err(invalid("tiers", "interfering field is empty (eta = 0)"));
    }
    Ok(DerivedConstants { a, eta, c_alpha })
}

/// Σ p_l λ_l P_l^{2/α} over the tiers selected by `scope`.
pub(crate) fn active_weight(net: &Network, scope: EtaScope) -> f64 {
    match scope {
        EtaScope::AllTiers => net
            .tiers()
            .iter()
            .map(|t| t.activity * net.weight(t))
            .sum(),
        EtaScope::AccessTiers => net
            .access_tiers()
            .map(|t| t.activity * net.weight(t))
            .sum(),
    }
}

/// B(m) = Σ_{i∈B} λ_i p_i P_i^{2/α} β_i^{-2/α} (1+β_i)^{-2m/α}
///        ₂F₁(1, 2m/α; 1 + 2(m+1)/α; 1/(1+β_i)).
pub fn big_b_term(net: &Network, m: u32) -> Result<f64, ModelError> {
    big_b_term_with(net, m, &SeriesTolerance::default())
}

pub fn big_b_term_with(
    net: &Network,
    m: u32,
    tol: &SeriesTolerance,
) -> Result<f64, ModelError> {
    if m == 0 {
        return Err(invalid("m", "series index starts at 1"));
    }
    let x = net.two_over_alpha();
    let mf = f64::from(m);
    let b = x * mf;
    let c = 1.0 + x * (mf + 1.0);
    let mut total = 0.0;
    for t in net.access_tiers() {
        let w = t.activity * net.weight(t);
        if w == 0.0 {
            continue;
        }
        let z = 1.0 / (1.0 + t.target_sir);
        let f = specfun::gauss_2f1(1.0, b, c, z, tol)?;
        total += w * t.target_sir.powf(-x) * (1.0 + t.target_sir).powf(-b) * f;
    }
    Ok(total)
}

/// p_eff = Σ p_l λ_l P_l^{2/α} / Σ λ_l P_l^{2/α} over all tiers.
pub fn effective_load(net: &Network) -> f64 {
    let (num, den) = net.tiers().iter().fold((0.0, 0.0), |(n, d), t| {
        let w = net.weight(t);
        (n + t.activity * w, d + w)
    });
    num / den
}

/// Activity factors implied by a user density under max-average-power
/// association with `resource_blocks` orthogonal blocks per base station.
#[derive(Debug, Clone, PartialEq)]
pub struct UserLoad {
    /// p_j, capped at 1.
    pub activity: Vec<f64>,
    /// N̄_j: share of users served by tier j.
    pub served_fraction: Vec<f64>,
}

pub fn activity_from_user_density(
    net: &Network,
    user_density: f64,
    resource_blocks: u32,
) -> Result<UserLoad, ModelError> {
    if !(user_density >= 0.0 && user_density.is_finite()) {
        return Err(invalid(
            "user_density",
            format!("must be >= 0, got {user_density}"),
        ));
    }
    if resource_blocks == 0 {
        return Err(invalid("resource_blocks", "must be >= 1"));
    }
    let x = net.two_over_alpha();
    let reach: Vec<f64> = net
        .tiers()
        .iter()
        .map(|t| (t.power / t.target_sir).powf(x))
        .collect();
    let total: f64 = net
        .tiers()
        .iter()
        .zip(&reach)
        .map(|(t, r)| t.density * r)
        .sum();
    let served_fraction = net
        .tiers()
        .iter()
        .zip(&reach)
        .map(|(t, r)| t.density * r / total)
        .collect();
    let per_block = user_density / f64::from(resource_blocks);
    let activity = reach
        .iter()
        .map(|r| (per_block * r / total).min(1.0))
        .collect();
    Ok(UserLoad {
        activity,
        served_fraction,
    })
}

/// Same network with every tier's activity replaced by the user-driven one.
pub fn with_user_load(
    net: &Network,
    user_density: f64,
    resource_blocks: u32,
) -> Result<Network, ModelError> {
    let load = activity_from_user_density(net, user_density, resource_blocks)?;
    let tiers = net
        .tiers()
        .iter()
        .zip(&load.activity)
        .map(|(t, &p)| Tier { activity: p, ..*t })
        .collect();
    net.with_tiers(tiers)
}

/// Splits a tier into an open part (fraction `f` of its base stations) and a
/// closed part. Both keep power, target SIR and activity.
pub fn split_access_fraction(tier: &Tier, f: f64) -> Result<(Tier, Tier), ModelError> {
    if !(0.0..=1.0).contains(&f) {
        return Err(invalid("f", format!("open fraction must lie in [0, 1], got {f}")));
    }
    // Snap the open part onto the ulp grid of the total so that the closed
    // part is exactly representable and the two sum back to the total.
    let total = tier.density;
    let ulp = total.next_up() - total;
    let open_density = if total > 0.0 && total.is_finite() {
        ((f * total / ulp).round() * ulp).min(total)
    } else {
        f * total
    };
    let open = Tier {
        density: open_density,
        ..*tier
    };
    let closed = Tier {
        density: total - open_density,
        ..*tier
    };
    Ok((open, closed))
}

/// Open-part density when the closed part's density is held fixed:
/// λ^(o) = f / (1 - f) λ^(c).
pub fn open_density_for_fraction(closed_density: f64, f: f64) -> Result<f64, ModelError> {
    if !(0.0..1.0).contains(&f) {
        return Err(invalid("f", format!("open fraction must lie in [0, 1), got {f}")));
    }
    Ok(f / (1.0 - f) * closed_density)
}
