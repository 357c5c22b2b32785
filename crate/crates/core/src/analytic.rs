//! Coverage probability under conditional thinning of the interference field.
//!
//! The coverage of a typical user is a fully-loaded base term minus the
//! alternating correction series Σ g(m):
//!
//! ```text
//! g(m) = (-A/η)^m { 1/Γ(1+2m/α) - (B(m)/η) πΓ(1+2/α) / Γ(1+2(m+1)/α) }
//! ```
//!
//! Even and odd truncations of the series bracket the exact value, which is
//! what [`coverage_bounds`] reports and what the stopping rule relies on.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    self, active_weight, big_b_term_with, derived_constants_scoped, effective_load,
    pi_gamma_factor, EtaScope, ModelError, Network, SeriesControl, Tier, Warning,
};
use crate::specfun::{self, log_gamma, SpecfunError};

#[derive(Debug, Error)]
pub enum AnalyticError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

type Result<T> = std::result::Result<T, AnalyticError>;

/// Outcome of a coverage evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageResult {
    /// Not clamped to [0, 1].
    pub value: f64,
    /// Even truncation of the series.
    pub lower: f64,
    /// Odd truncation of the series.
    pub upper: f64,
    pub terms_used: usize,
    pub a_over_eta: f64,
    pub converged: bool,
    /// Largest |g(m)| met while summing; a rough gauge of cancellation.
    pub peak_term: f64,
    pub warnings: Vec<Warning>,
}

/// One row of the correction series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GTermTrace {
    pub m: usize,
    pub g_m: f64,
    /// (A/η)^m / ⌈2m/α⌉!
    pub majorant: f64,
    pub partial_sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TierAddition {
    Increases,
    Unchanged,
    Decreases,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// The scalar ingredients of g(m): A/η, the m-dependent B(m)/η, and α.
struct GSeries<'a> {
    alpha: f64,
    a_over_eta: f64,
    pi_gamma: f64,
    b_over_eta: Box<dyn Fn(u32) -> Result<f64> + 'a>,
}

impl<'a> GSeries<'a> {
    fn from_network(net: &'a Network, ctl: &SeriesControl) -> Result<Self> {
        let consts = derived_constants_scoped(net, ctl.eta_scope)?;
        let eta = consts.eta;
        let tol = ctl.hypergeometric;
        Ok(Self {
            alpha: net.alpha(),
            a_over_eta: consts.a_over_eta(),
            pi_gamma: pi_gamma_factor(net.alpha())?,
            b_over_eta: Box::new(move |m| Ok(big_b_term_with(net, m, &tol)? / eta)),
        })
    }

    /// Series whose B(m) part vanishes; used for the idle-only variant.
    fn without_active_candidates(alpha: f64, a_over_eta: f64) -> Result<Self> {
        Ok(Self {
            alpha,
            a_over_eta,
            pi_gamma: pi_gamma_factor(alpha)?,
            b_over_eta: Box::new(|_| Ok(0.0)),
        })
    }

    fn x(&self) -> f64 {
        2.0 / self.alpha
    }

    fn term(&self, m: u32) -> Result<f64> {
        if self.a_over_eta == 0.0 {
            return Ok(0.0);
        }
        let mf = f64::from(m);
        let x = self.x();
        let lg_m = log_gamma(1.0 + x * mf)?;
        let lg_next = log_gamma(1.0 + x * (mf + 1.0))?;
        let head = (mf * self.a_over_eta.ln() - lg_m).exp();
        let brace = 1.0 - (self.b_over_eta)(m)? * self.pi_gamma * (lg_m - lg_next).exp();
        let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok(sign * head * brace)
    }

    /// (A/η)^m / ⌈2m/α⌉!
    fn majorant(&self, m: u32) -> f64 {
        if m == 0 {
            return 1.0;
        }
        if self.a_over_eta == 0.0 {
            return 0.0;
        }
        let k = (self.x() * f64::from(m)).ceil();
        // ceil of an exact integer ratio can land one high through rounding
        let k = if (k - 1.0 - self.x() * f64::from(m)).abs() < 1e-12 {
            k - 1.0
        } else {
            k
        };
        (f64::from(m) * self.a_over_eta.ln() - log_gamma(1.0 + k).unwrap_or(0.0)).exp()
    }

    /// Whether (A/η)^n / Γ(1+2n/α) is non-increasing for every n ≥ m. The
    /// log-ratio of consecutive terms is monotone in n (log-convexity of Γ),
    /// so one comparison settles the whole tail.
    fn envelope_past_peak(&self, m: u32) -> Result<bool> {
        if self.a_over_eta == 0.0 {
            return Ok(true);
        }
        let x = self.x();
        let mf = f64::from(m);
        let step = log_gamma(1.0 + x * (mf + 1.0))? - log_gamma(1.0 + x * mf)?;
        Ok(self.a_over_eta.ln() < step)
    }

    fn should_stop(&self, m: u32, g: f64, epsilon: f64) -> Result<bool> {
        Ok(g.abs() < epsilon
            && self.majorant(m) < self.majorant(m - 1)
            && self.envelope_past_peak(m)?)
    }
}

/// Sums `base - Σ g(m)` under the stopping rule and brackets the value with
/// the neighbouring even/odd truncations.
fn sum_series(series: &GSeries<'_>, base: f64, ctl: &SeriesControl) -> Result<CoverageResult> {
    let a_over_eta = series.a_over_eta;
    if a_over_eta == 0.0 {
        return Ok(finish(CoverageResult {
            value: base,
            lower: base,
            upper: base,
            terms_used: 0,
            a_over_eta,
            converged: true,
            peak_term: 0.0,
            warnings: Vec::new(),
        }));
    }

    let mut acc = CompensatedSum::default();
    let mut partial = vec![0.0];
    let mut peak = 0.0_f64;
    let mut stopped_at = None;
    for m in 1..=ctl.max_terms as u32 {
        let g = series.term(m)?;
        acc.add(g);
        partial.push(acc.value());
        peak = peak.max(g.abs());
        if series.should_stop(m, g, ctl.epsilon)? {
            stopped_at = Some(m as usize);
            break;
        }
    }

    let converged = stopped_at.is_some();
    let n = stopped_at.unwrap_or(ctl.max_terms);
    if n % 2 == 1 {
        let g = series.term(n as u32 + 1)?;
        acc.add(g);
        partial.push(acc.value());
    }
    let even = n + n % 2;
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(Warning::TermCapReached {
            max_terms: ctl.max_terms,
        });
    }
    Ok(finish(CoverageResult {
        value: base - partial[n],
        lower: base - partial[even],
        upper: base - partial[even - 1],
        terms_used: n,
        a_over_eta,
        converged,
        peak_term: peak,
        warnings,
    }))
}

fn finish(mut result: CoverageResult) -> CoverageResult {
    if !(0.0..=1.0).contains(&result.value) {
        result.converged = false;
        result.warnings.push(Warning::ValueOutOfRange {
            value: result.value,
        });
    }
    result
}

fn with_network_warnings(net: &Network, mut result: CoverageResult) -> CoverageResult {
    let mut warnings = net.warnings();
    warnings.append(&mut result.warnings);
    result.warnings = warnings;
    result
}

/// L_I(s) = exp(-η s^{2/α}) for the interference of all active tiers.
pub fn laplace_interference(net: &Network, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(AnalyticError::Precondition(format!(
            "Laplace variable must be >= 0, got {s}"
        )));
    }
    let eta = model::derived_constants(net)?.eta;
    Ok((-eta * s.powf(net.two_over_alpha())).exp())
}

/// The m-th correction term g(m) (over the access set for closed access).
pub fn g_term(net: &Network, m: u32) -> Result<f64> {
    if m == 0 {
        return Err(AnalyticError::Precondition("g(m) starts at m = 1".into()));
    }
    GSeries::from_network(net, &SeriesControl::default())?.term(m)
}

/// g(1..=m_max) with the factorial majorant and running partial sums.
pub fn g_trace(net: &Network, m_max: u32) -> Result<Vec<GTermTrace>> {
    g_trace_with(net, m_max, &SeriesControl::default())
}

pub fn g_trace_with(net: &Network, m_max: u32, ctl: &SeriesControl) -> Result<Vec<GTermTrace>> {
    let series = GSeries::from_network(net, ctl)?;
    let mut acc = CompensatedSum::default();
    (1..=m_max)
        .map(|m| {
            let g = series.term(m)?;
            acc.add(g);
            Ok(GTermTrace {
                m: m as usize,
                g_m: g,
                majorant: series.majorant(m),
                partial_sum: acc.value(),
            })
        })
        .collect()
}

/// g(1) and g(2) in closed form for α = 4.
///
/// With α = 4 the hypergeometric factors reduce to elementary functions:
/// ₂F₁(1, ½; 2; z) = 2(1 - √(1-z))/z gives
/// `g(1) = -(A/η){2/√π - (π^{3/2}/η) Σ λ p √P (√(1+1/β) - 1)}` and
/// `g(2) = (A/η)²{1 - (2π/η) Σ λ p √P (β^{-1/2} - csc⁻¹√(1+β))}`.
pub fn g1_g2_closed_form_alpha4(net: &Network) -> Result<(f64, f64)> {
    if net.alpha() != 4.0 {
        return Err(AnalyticError::Precondition(format!(
            "closed form needs alpha = 4, got {}",
            net.alpha()
        )));
    }
    let consts = model::derived_constants(net)?;
    let (a, eta) = (consts.a, consts.eta);
    let ratio = a / eta;
    let (mut s1, mut s2) = (0.0, 0.0);
    for t in net.access_tiers() {
        let w = t.density * t.activity * t.power.sqrt();
        let beta = t.target_sir;
        s1 += w * ((1.0 + 1.0 / beta).sqrt() - 1.0);
        // csc⁻¹(y) = asin(1/y), principal branch in (0, π/2) for y > 1
        s2 += w * (beta.powf(-0.5) - (1.0 / (1.0 + beta).sqrt()).asin());
    }
    let g1 = -ratio * (2.0 / PI.sqrt() - PI.powf(1.5) / eta * s1);
    let g2 = ratio * ratio * (1.0 - 2.0 * PI / eta * s2);
    Ok((g1, g2))
}

/// The fully-loaded base term with densities thinned to p_i λ_i:
/// (π/C(α)) Σ_{i∈B} p_i λ_i P_i^{2/α} β_i^{-2/α} / Σ_i p_i λ_i P_i^{2/α}.
pub fn coverage_fully_loaded(net: &Network) -> Result<CoverageResult> {
    let base = fully_loaded_value(net, EtaScope::AllTiers)?;
    Ok(with_network_warnings(
        net,
        finish(CoverageResult {
            value: base,
            lower: base,
            upper: base,
            terms_used: 0,
            a_over_eta: 0.0,
            converged: true,
            peak_term: 0.0,
            warnings: Vec::new(),
        }),
    ))
}

fn fully_loaded_value(net: &Network, scope: EtaScope) -> Result<f64> {
    let c = specfun::interference_constant(net.alpha())?;
    let x = net.two_over_alpha();
    let served: f64 = net
        .access_tiers()
        .map(|t| t.activity * net.weight(t) * t.target_sir.powf(-x))
        .sum();
    let total = active_weight(net, scope);
    Ok(PI / c * served / total)
}

/// Coverage probability for open or closed access, summed to the stopping
/// rule in `ctl`.
pub fn coverage(net: &Network, ctl: &SeriesControl) -> Result<CoverageResult> {
    let series = GSeries::from_network(net, ctl)?;
    let base = fully_loaded_value(net, ctl.eta_scope)?;
    Ok(with_network_warnings(net, sum_series(&series, base, ctl)?))
}

/// (lower, upper) = (base - Σ_{i≤2m} g(i), base - Σ_{i≤2m-1} g(i)).
pub fn coverage_bounds(net: &Network, m: u32) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(AnalyticError::Precondition("bounds need m >= 1".into()));
    }
    let ctl = SeriesControl::default();
    let series = GSeries::from_network(net, &ctl)?;
    let base = fully_loaded_value(net, ctl.eta_scope)?;
    let mut acc = CompensatedSum::default();
    let mut upper = base;
    for i in 1..=2 * m {
        acc.add(series.term(i)?);
        if i == 2 * m - 1 {
            upper = base - acc.value();
        }
    }
    Ok((base - acc.value(), upper))
}

/// M_ε: the first m where |g(m)| < ε with the majorant past its hump; zero
/// when A = 0 and the series is empty.
pub fn truncation_terms(net: &Network, epsilon: f64, max_terms: usize) -> Result<usize> {
    if !(epsilon > 0.0) {
        return Err(AnalyticError::Precondition(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    let series = GSeries::from_network(net, &SeriesControl::default())?;
    if series.a_over_eta == 0.0 {
        return Ok(0);
    }
    for m in 1..=max_terms as u32 {
        let g = series.term(m)?;
        if series.should_stop(m, g, epsilon)? {
            return Ok(m as usize);
        }
    }
    Err(AnalyticError::Precondition(format!(
        "no m <= {max_terms} satisfies the truncation rule"
    )))
}

/// Activity factor above which a tier keeps A/η below one:
/// p* = 1 / (1 + C(α) β^{2/α} / (πΓ(1+2/α))).
pub fn convergence_threshold(target_sir: f64, alpha: f64) -> Result<f64> {
    if !(target_sir > 0.0) {
        return Err(AnalyticError::Precondition(format!(
            "target SIR must be > 0, got {target_sir}"
        )));
    }
    let c = specfun::interference_constant(alpha)?;
    let pg = pi_gamma_factor(alpha)?;
    Ok(1.0 / (1.0 + c * target_sir.powf(2.0 / alpha) / pg))
}

/// B(m)/η for equal targets β, where every tier's B(m) shares the same
/// hypergeometric factor and the tier weights cancel against η.
fn common_beta_b_over_eta(
    alpha: f64,
    beta: f64,
    c: f64,
    ctl: &SeriesControl,
) -> impl Fn(u32) -> Result<f64> {
    let tol = ctl.hypergeometric;
    move |m| {
        let x = 2.0 / alpha;
        let mf = f64::from(m);
        let f = specfun::gauss_2f1(1.0, x * mf, 1.0 + x * (mf + 1.0), 1.0 / (1.0 + beta), &tol)?;
        Ok(f / (c * beta.powf(x) * (1.0 + beta).powf(x * mf)))
    }
}

/// Single-tier open-access coverage from its reduced scalar form. The value
/// does not depend on `density` or `power`; they are validated only.
pub fn coverage_single_tier(
    power: f64,
    density: f64,
    target_sir: f64,
    activity: f64,
    alpha: f64,
    ctl: &SeriesControl,
) -> Result<CoverageResult> {
    let net = Network::open(alpha, vec![Tier::new(power, density, target_sir, activity)])?;
    if density == 0.0 {
        return Err(AnalyticError::Precondition("single tier needs density > 0".into()));
    }
    let c = specfun::interference_constant(alpha)?;
    let x = 2.0 / alpha;
    let a_over_eta =
        pi_gamma_factor(alpha)? * (1.0 - activity) / (c * activity * target_sir.powf(x));
    let series = GSeries {
        alpha,
        a_over_eta,
        pi_gamma: pi_gamma_factor(alpha)?,
        b_over_eta: Box::new(common_beta_b_over_eta(alpha, target_sir, c, ctl)),
    };
    let base = PI * target_sir.powf(-x) / c;
    Ok(with_network_warnings(&net, sum_series(&series, base, ctl)?))
}

fn common_target_sir(net: &Network) -> Option<f64> {
    let beta = net.tier(0).target_sir;
    net.tiers()
        .iter()
        .all(|t| ((t.target_sir - beta) / beta).abs() <= 1e-12)
        .then_some(beta)
}

/// Open-access K-tier coverage when every tier has the same target SIR.
/// Only the effective load enters: A/η = πΓ(1+2/α)/(C(α)β^{2/α}) (1-p_eff)/p_eff.
pub fn coverage_same_beta(net: &Network, ctl: &SeriesControl) -> Result<CoverageResult> {
    let beta = common_target_sir(net).ok_or_else(|| {
        AnalyticError::Precondition("all tiers must share one target SIR".into())
    })?;
    if !net.is_open_access() {
        return Err(AnalyticError::Precondition(
            "equal-target reduction holds for open access only".into(),
        ));
    }
    let alpha = net.alpha();
    let c = specfun::interference_constant(alpha)?;
    let x = 2.0 / alpha;
    let (idle, active) = net.tiers().iter().fold((0.0, 0.0), |(i, a), t| {
        let w = net.weight(t);
        (i + (1.0 - t.activity) * w, a + t.activity * w)
    });
    let a_over_eta = pi_gamma_factor(alpha)? / (c * beta.powf(x)) * idle / active;
    let series = GSeries {
        alpha,
        a_over_eta,
        pi_gamma: pi_gamma_factor(alpha)?,
        b_over_eta: Box::new(common_beta_b_over_eta(alpha, beta, c, ctl)),
    };
    let base = PI * beta.powf(-x) / c;
    Ok(with_network_warnings(net, sum_series(&series, base, ctl)?))
}

/// Direction in which adding `new_tier` moves equal-target coverage: it rises
/// iff the new tier's activity is below the network's effective load.
pub fn tier_addition_effect(net: &Network, new_tier: &Tier) -> Result<TierAddition> {
    let beta = common_target_sir(net).ok_or_else(|| {
        AnalyticError::Precondition("all tiers must share one target SIR".into())
    })?;
    if ((new_tier.target_sir - beta) / beta).abs() > 1e-12 {
        return Err(AnalyticError::Precondition(
            "new tier must share the network's target SIR".into(),
        ));
    }
    let p_eff = effective_load(net);
    let diff = new_tier.activity - p_eff;
    Ok(if diff.abs() <= 1e-12 {
        TierAddition::Unchanged
    } else if diff < 0.0 {
        TierAddition::Increases
    } else {
        TierAddition::Decreases
    })
}

/// Coverage when the user may only attach to idle base stations:
/// 1 - Σ_{m≥0} (-A/η)^m / Γ(1+2m/α).
pub fn coverage_idle_only(net: &Network, ctl: &SeriesControl) -> Result<CoverageResult> {
    let consts = derived_constants_scoped(net, ctl.eta_scope)?;
    let series = GSeries::without_active_candidates(net.alpha(), consts.a_over_eta())?;
    // the m = 0 term cancels the leading 1
    let mut result = sum_series(&series, 0.0, ctl)?;
    if consts.a == 0.0 {
        result.value = 0.0;
        result.lower = 0.0;
        result.upper = 0.0;
    }
    Ok(with_network_warnings(net, result))
}
