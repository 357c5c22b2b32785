use std::io::Write;

use serde::Serialize;

use super::sampling::{BaseStation, Realization};
use super::{invalid, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RasterMode {
    /// Strongest station among all of them.
    #[default]
    Full,
    /// Full-mode regions of active stations; the rest is blank.
    ThinnedRegions,
    /// Strongest station among the active ones.
    ThinnedBiased,
}

/// Serving-station map over the square [-R, R]², row-major from the bottom
/// row. `None` marks a blank pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub resolution: usize,
    pub radius: f64,
    pub cells: Vec<Option<usize>>,
    /// Zero-based tier of every station, indexed by station id.
    pub station_tiers: Vec<usize>,
}

impl Raster {
    pub fn pixel_size(&self) -> f64 {
        2.0 * self.radius / self.resolution as f64
    }

    /// Centre of pixel (`col`, `row`).
    pub fn pixel_center(&self, col: usize, row: usize) -> [f64; 2] {
        let h = self.pixel_size();
        [
            -self.radius + (col as f64 + 0.5) * h,
            -self.radius + (row as f64 + 0.5) * h,
        ]
    }

    pub fn server(&self, col: usize, row: usize) -> Option<usize> {
        self.cells[row * self.resolution + col]
    }

    /// Pixel count per station id.
    pub fn cell_areas(&self) -> Vec<usize> {
        let mut areas = vec![0; self.station_tiers.len()];
        for id in self.cells.iter().flatten() {
            areas[*id] += 1;
        }
        areas
    }

    /// CSV with header `x,y,bs_id,tier`; blank pixels leave both ids empty.
    /// Station ids are zero-based, tiers one-based.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "bs_id", "tier"])?;
        for row in 0..self.resolution {
            for col in 0..self.resolution {
                let [x, y] = self.pixel_center(col, row);
                let (id, tier) = match self.server(col, row) {
                    Some(id) => (id.to_string(), (self.station_tiers[id] + 1).to_string()),
                    None => (String::new(), String::new()),
                };
                w.write_record([x.to_string(), y.to_string(), id, tier])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Strongest station by fading-free power P r^{-α}; ties go to the lowest id.
fn strongest<'a>(
    stations: impl Iterator<Item = (usize, &'a BaseStation)>,
    weights: &[f64],
    at: [f64; 2],
) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (id, s) in stations {
        let dx = s.position[0] - at[0];
        let dy = s.position[1] - at[1];
        // r² P^{-2/α} is monotone in the received power
        let cost = (dx * dx + dy * dy) * weights[s.tier];
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, id));
        }
    }
    best.map(|(_, id)| id)
}

/// Maps every pixel to its serving station under `mode`.
pub fn coverage_region_raster(
    realization: &Realization,
    resolution: usize,
    mode: RasterMode,
) -> Result<Raster, SimError> {
    if realization.stations.is_empty() {
        return Err(invalid("realization", "has no base stations"));
    }
    if resolution == 0 {
        return Err(invalid("resolution", "must be >= 1"));
    }
    let net = &realization.network;
    let x = net.two_over_alpha();
    let weights: Vec<f64> = net.tiers().iter().map(|t| t.power.powf(-x)).collect();
    let stations = &realization.stations;

    let mut raster = Raster {
        resolution,
        radius: realization.radius,
        cells: Vec::with_capacity(resolution * resolution),
        station_tiers: stations.iter().map(|s| s.tier).collect(),
    };
    for row in 0..resolution {
        for col in 0..resolution {
            let at = raster.pixel_center(col, row);
            let all = || stations.iter().enumerate();
            let cell = match mode {
                RasterMode::Full => strongest(all(), &weights, at),
                RasterMode::ThinnedRegions => {
                    strongest(all(), &weights, at).filter(|&id| stations[id].active)
                }
                RasterMode::ThinnedBiased => {
                    strongest(all().filter(|(_, s)| s.active), &weights, at)
                }
            };
            raster.cells.push(cell);
        }
    }
    Ok(raster)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Network, Tier};

    fn realization(stations: Vec<BaseStation>) -> Realization {
        Realization {
            radius: 1.0,
            network: Network::open(4.0, vec![Tier::new(1.0, 1.0, 2.0, 0.5)]).unwrap(),
            stations,
        }
    }

    fn bs(x: f64, y: f64, active: bool) -> BaseStation {
        BaseStation {
            position: [x, y],
            tier: 0,
            active,
            fading: 1.0,
        }
    }

    #[test]
    fn single_station_owns_everything() {
        let r = realization(vec![bs(0.3, -0.2, true)]);
        let raster = coverage_region_raster(&r, 16, RasterMode::Full).unwrap();
        assert!(raster.cells.iter().all(|c| *c == Some(0)));
    }

    #[test]
    fn equal_power_pair_splits_on_bisector() {
        let r = realization(vec![bs(-0.5, 0.0, true), bs(0.5, 0.0, true)]);
        let raster = coverage_region_raster(&r, 20, RasterMode::Full).unwrap();
        for row in 0..20 {
            for col in 0..20 {
                let [x, _] = raster.pixel_center(col, row);
                let expect = if x < 0.0 { 0 } else { 1 };
                assert_eq!(raster.server(col, row), Some(expect));
            }
        }
    }

    #[test]
    fn thinned_modes() {
        let r = realization(vec![bs(-0.5, 0.0, true), bs(0.5, 0.0, false)]);
        let regions = coverage_region_raster(&r, 10, RasterMode::ThinnedRegions).unwrap();
        let biased = coverage_region_raster(&r, 10, RasterMode::ThinnedBiased).unwrap();
        assert_eq!(regions.cell_areas(), vec![50, 0]);
        assert!(regions.cells.iter().filter(|c| c.is_none()).count() == 50);
        assert_eq!(biased.cell_areas(), vec![100, 0]);
    }

    #[test]
    fn empty_inputs_rejected() {
        let r = realization(vec![]);
        assert!(coverage_region_raster(&r, 4, RasterMode::Full).is_err());
        let r = realization(vec![bs(0.0, 0.0, true)]);
        assert!(coverage_region_raster(&r, 0, RasterMode::Full).is_err());
    }

    #[test]
    fn csv_blanks() {
        let r = realization(vec![bs(-0.5, 0.0, true), bs(0.5, 0.0, false)]);
        let raster = coverage_region_raster(&r, 2, RasterMode::ThinnedRegions).unwrap();
        let mut buf = Vec::new();
        raster.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "x,y,bs_id,tier\n-0.5,-0.5,0,1\n0.5,-0.5,,\n-0.5,0.5,0,1\n0.5,0.5,,\n");
    }
}
