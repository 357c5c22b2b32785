//! Sweep targets and value grids.

use std::fmt;
use std::str::FromStr;

use loadcov::model::{db_to_linear, open_density_for_fraction, split_access_fraction, Network, Tier};

use crate::Failure;

/// A parameter path such as `tier[2].density` or `alpha`. Tier indices are
/// one-based, as in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Density(usize),
    Activity(usize),
    Power(usize),
    TierSirDb(usize),
    /// Share f of the tier's stations that admit everyone; total density is
    /// kept and the remaining 1 - f become closed.
    AccessFraction(usize),
    /// The tier is the closed part with its density held fixed; an open
    /// part of density f/(1-f) λ is added beside it.
    OpenFraction(usize),
    CommonSirDb,
    UserDensity,
    Alpha,
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "target_sir_db" => return Ok(Target::CommonSirDb),
            "user_density" => return Ok(Target::UserDensity),
            "alpha" => return Ok(Target::Alpha),
            _ => {}
        }
        let bad = || format!("unknown sweep target `{s}`");
        let rest = s.strip_prefix("tier[").ok_or_else(bad)?;
        let (index, field) = rest.split_once("].").ok_or_else(bad)?;
        let k: usize = index.parse().map_err(|_| bad())?;
        if k == 0 {
            return Err(format!("tier indices are 1-based in `{s}`"));
        }
        let k = k - 1;
        Ok(match field {
            "density" => Target::Density(k),
            "activity" => Target::Activity(k),
            "power" => Target::Power(k),
            "target_sir_db" => Target::TierSirDb(k),
            "access_fraction" => Target::AccessFraction(k),
            "open_fraction" => Target::OpenFraction(k),
            _ => return Err(bad()),
        })
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (k, field) = match *self {
            Target::CommonSirDb => return f.write_str("target_sir_db"),
            Target::UserDensity => return f.write_str("user_density"),
            Target::Alpha => return f.write_str("alpha"),
            Target::Density(k) => (k, "density"),
            Target::Activity(k) => (k, "activity"),
            Target::Power(k) => (k, "power"),
            Target::TierSirDb(k) => (k, "target_sir_db"),
            Target::AccessFraction(k) => (k, "access_fraction"),
            Target::OpenFraction(k) => (k, "open_fraction"),
        };
        write!(f, "tier[{}].{field}", k + 1)
    }
}

/// One network to evaluate at a sweep value.
#[derive(Debug, Clone)]
pub struct Point {
    pub param: f64,
    pub net: Network,
    /// Same stations with every tier open, for the access-fraction targets.
    pub open: Option<Network>,
    /// Set for `user_density`: activity then comes from the user load.
    pub user_density: Option<f64>,
}

impl Target {
    fn tier(&self) -> Option<usize> {
        match *self {
            Target::Density(k)
            | Target::Activity(k)
            | Target::Power(k)
            | Target::TierSirDb(k)
            | Target::AccessFraction(k)
            | Target::OpenFraction(k) => Some(k),
            _ => None,
        }
    }

    pub fn is_access_split(&self) -> bool {
        matches!(self, Target::AccessFraction(_) | Target::OpenFraction(_))
    }

    /// Resolves the target against `base` once, before any evaluation.
    pub fn check(&self, base: &Network) -> Result<(), Failure> {
        match self.tier() {
            Some(k) if k >= base.len() => Err(Failure::Validation(format!(
                "sweep target {self} names tier {} but the scenario has {}",
                k + 1,
                base.len()
            ))),
            _ => Ok(()),
        }
    }

    pub fn apply(&self, base: &Network, value: f64) -> Result<Point, Failure> {
        let edit = |k: usize, f: &dyn Fn(&mut Tier)| {
            let mut tiers = base.tiers().to_vec();
            f(&mut tiers[k]);
            base.with_tiers(tiers)
        };
        let mut point = Point {
            param: value,
            net: base.clone(),
            open: None,
            user_density: None,
        };
        point.net = match *self {
            Target::Density(k) => edit(k, &|t| t.density = value)?,
            Target::Activity(k) => edit(k, &|t| t.activity = value)?,
            Target::Power(k) => edit(k, &|t| t.power = value)?,
            Target::TierSirDb(k) => edit(k, &|t| t.target_sir = db_to_linear(value))?,
            Target::CommonSirDb => {
                let beta = db_to_linear(value);
                let tiers = base
                    .tiers()
                    .iter()
                    .map(|t| Tier { target_sir: beta, ..*t })
                    .collect();
                base.with_tiers(tiers)?
            }
            Target::Alpha => base.with_alpha(value)?,
            Target::UserDensity => {
                point.user_density = Some(value);
                base.clone()
            }
            Target::AccessFraction(k) => {
                let (open, closed) = split_access_fraction(base.tier(k), value)?;
                let mut tiers = base.tiers().to_vec();
                tiers[k] = open;
                tiers.push(closed);
                let mut access = base.access().to_vec();
                if !access.contains(&k) {
                    access.push(k);
                }
                let everyone = (0..tiers.len()).collect();
                point.open = Some(Network::new(base.alpha(), tiers.clone(), everyone)?);
                Network::new(base.alpha(), tiers, access)?
            }
            Target::OpenFraction(k) => {
                let closed = *base.tier(k);
                let density = open_density_for_fraction(closed.density, value)?;
                let mut tiers = base.tiers().to_vec();
                tiers.push(Tier { density, ..closed });
                let added = tiers.len() - 1;
                let mut access: Vec<usize> =
                    base.access().iter().copied().filter(|&i| i != k).collect();
                access.push(added);
                let everyone = (0..tiers.len()).collect();
                point.open = Some(Network::new(base.alpha(), tiers.clone(), everyone)?);
                Network::new(base.alpha(), tiers, access)?
            }
        };
        Ok(point)
    }
}

/// Parses `a,b,c`, `lin:start:stop:count` or `log:start:stop:count`.
pub fn parse_values(s: &str) -> Result<Vec<f64>, String> {
    let grid = |rest: &str, log: bool| -> Result<Vec<f64>, String> {
        let parts: Vec<&str> = rest.split(':').collect();
        let [start, stop, count] = parts[..] else {
            return Err(format!("expected start:stop:count, got `{rest}`"));
        };
        let start: f64 = number(start)?;
        let stop: f64 = number(stop)?;
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| format!("bad grid count `{count}`"))?;
        if count == 0 {
            return Err("grid count must be >= 1".into());
        }
        if log && !(start > 0.0 && stop > 0.0) {
            return Err("log grid needs positive end points".into());
        }
        let (a, b) = if log { (start.ln(), stop.ln()) } else { (start, stop) };
        Ok((0..count)
            .map(|i| {
                // end points are returned exactly as given
                if i == 0 {
                    return start;
                }
                if i + 1 == count {
                    return stop;
                }
                let v = a + (b - a) * (i as f64 / (count - 1) as f64);
                if log {
                    v.exp()
                } else {
                    v
                }
            })
            .collect())
    };
    if let Some(rest) = s.strip_prefix("lin:") {
        grid(rest, false)
    } else if let Some(rest) = s.strip_prefix("log:") {
        grid(rest, true)
    } else {
        let values = s
            .split(',')
            .map(number)
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err("sweep values are empty".into());
        }
        Ok(values)
    }
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("bad number `{s}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite value `{s}`"))
    }
}
