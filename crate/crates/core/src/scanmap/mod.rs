//! Angular efficiency maps of Bob's receiver.
//!
//! A map is a uniform `(phi, theta)` grid in milliradians with one
//! normalized efficiency per detector channel per cell. Cells are stored in
//! row-major order: `theta` indexes rows, `phi` indexes columns, so the cell
//! at `(i_phi, i_theta)` lives at `i_theta * n_phi + i_phi`.

mod csv;
mod pinhole;
mod search;
mod synth;

pub use self::csv::{read_map_csv, read_raw_csv, write_attack_report, write_map_csv, write_raw_csv};
pub use pinhole::pinhole_filter;
pub use search::{find_attack_points, mismatch_ratio, AttackPoint, AttackSearch, SearchThresholds, Threshold};
pub use synth::{
    synthesize_raw_scan, synthesize_scan, ChannelProfile, PeakFeature, RingFeature, ScanPreset,
};

use crate::error::{Error, Result};
use crate::model::Polarization;

/// Uniform scan grid. Angles in mrad.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub phi_min: f64,
    pub phi_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub n_phi: usize,
    pub n_theta: usize,
}

impl GridSpec {
    /// 97 x 97 cells in 38.3 urad steps covering +-1.8384 mrad.
    pub fn paper_scan() -> Self {
        let half = 48.0 * 0.0383;
        Self {
            phi_min: -half,
            phi_max: half,
            theta_min: -half,
            theta_max: half,
            n_phi: 97,
            n_theta: 97,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_phi < 2 || self.n_theta < 2 {
            return Err(Error::Grid(format!(
                "need at least 2x2 cells, got {}x{}",
                self.n_phi, self.n_theta
            )));
        }
        let finite = [self.phi_min, self.phi_max, self.theta_min, self.theta_max]
            .iter()
            .all(|x| x.is_finite());
        if !finite || self.phi_max <= self.phi_min || self.theta_max <= self.theta_min {
            return Err(Error::Grid("angular range must be finite and increasing".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_phi * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn phi_step(&self) -> f64 {
        (self.phi_max - self.phi_min) / (self.n_phi - 1) as f64
    }

    pub fn theta_step(&self) -> f64 {
        (self.theta_max - self.theta_min) / (self.n_theta - 1) as f64
    }

    pub fn phi(&self, i_phi: usize) -> f64 {
        self.phi_min + i_phi as f64 * self.phi_step()
    }

    pub fn theta(&self, i_theta: usize) -> f64 {
        self.theta_min + i_theta as f64 * self.theta_step()
    }

    /// `(phi, theta)` of the cell at storage index `idx`.
    pub fn angles(&self, idx: usize) -> (f64, f64) {
        (self.phi(idx % self.n_phi), self.theta(idx / self.n_phi))
    }
}

/// Background-laden count rates as recorded by a scan.
#[derive(Debug, Clone, PartialEq)]
pub struct RawScan {
    pub grid: GridSpec,
    /// Count rate per cell per channel, counts/s.
    pub counts: Vec<[f64; 4]>,
    /// Per-channel background rate, counts/s.
    pub background: [f64; 4],
    pub t_int_s: f64,
}

/// Normalized per-channel efficiencies on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyMap {
    grid: GridSpec,
    cells: Vec<[f64; 4]>,
}

impl EfficiencyMap {
    /// Builds a map from cell values already in `[0, 1]`.
    pub fn new(grid: GridSpec, cells: Vec<[f64; 4]>) -> Result<Self> {
        grid.validate()?;
        if cells.len() != grid.len() {
            return Err(Error::Grid(format!(
                "expected {} cells, got {}",
                grid.len(),
                cells.len()
            )));
        }
        if let Some(bad) = cells.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain {
                what: "normalized efficiency",
                value: *bad,
            });
        }
        Ok(Self { grid, cells })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn cells(&self) -> &[[f64; 4]] {
        &self.cells
    }

    pub fn cell(&self, i_phi: usize, i_theta: usize) -> [f64; 4] {
        self.cells[i_theta * self.grid.n_phi + i_phi]
    }

    pub fn channel_max(&self, channel: Polarization) -> f64 {
        let c = channel.index();
        self.cells.iter().map(|v| v[c]).fold(0.0, f64::max)
    }

    /// Divides each channel by its maximum; all-zero channels stay zero.
    pub(crate) fn renormalized(mut cells: Vec<[f64; 4]>, grid: GridSpec) -> Self {
        for c in 0..4 {
            let max = cells.iter().map(|v| v[c]).fold(0.0, f64::max);
            if max > 0.0 {
                for v in &mut cells {
                    v[c] = (v[c] / max).clamp(0.0, 1.0);
                }
            } else {
                for v in &mut cells {
                    v[c] = 0.0;
                }
            }
        }
        Self { grid, cells }
    }
}

/// Subtracts each channel's background and divides by that channel's maximum
/// over the grid. Cells at or below background become zero, as does any
/// channel that never exceeds its background.
pub fn normalize_scan(raw: &RawScan) -> Result<EfficiencyMap> {
    raw.grid.validate()?;
    if raw.counts.len() != raw.grid.len() {
        return Err(Error::Grid(format!(
            "expected {} cells, got {}",
            raw.grid.len(),
            raw.counts.len()
        )));
    }
    if let Some(bad) = raw
        .counts
        .iter()
        .flatten()
        .chain(raw.background.iter())
        .find(|c| !(**c >= 0.0 && c.is_finite()))
    {
        return Err(Error::Domain {
            what: "count rate",
            value: *bad,
        });
    }
    let cells = raw
        .counts
        .iter()
        .map(|cnt| std::array::from_fn(|c| (cnt[c] - raw.background[c]).max(0.0)))
        .collect();
    Ok(EfficiencyMap::renormalized(cells, raw.grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line_grid(n: usize) -> GridSpec {
        GridSpec {
            phi_min: 0.0,
            phi_max: 1.0,
            theta_min: 0.0,
            theta_max: 1.0,
            n_phi: n,
            n_theta: 2,
        }
    }

    #[test]
    fn paper_grid_contains_origin() {
        let g = GridSpec::paper_scan();
        assert!(g.phi(48).abs() < 1e-12);
        assert!(g.theta(48).abs() < 1e-12);
        assert!((g.phi_step() - 0.0383).abs() < 1e-12);
    }

    #[test]
    fn normalize_subtracts_and_scales() {
        let counts = [100.0, 300.0, 500.0, 50.0];
        let mut cells: Vec<[f64; 4]> = counts.iter().map(|&c| [c; 4]).collect();
        cells.extend(std::iter::repeat_n([50.0; 4], 4));
        let raw = RawScan {
            grid: line_grid(4),
            counts: cells,
            background: [50.0; 4],
            t_int_s: 1.0,
        };
        let map = normalize_scan(&raw).unwrap();
        let h: Vec<f64> = map.cells()[..4].iter().map(|v| v[0]).collect();
        assert!((h[0] - 50.0 / 450.0).abs() < 1e-15);
        assert!((h[1] - 250.0 / 450.0).abs() < 1e-15);
        assert_eq!(h[2], 1.0);
        assert_eq!(h[3], 0.0);
    }

    #[test]
    fn background_only_scan_is_zero() {
        let raw = RawScan {
            grid: line_grid(3),
            counts: vec![[7.0; 4]; 6],
            background: [7.0; 4],
            t_int_s: 1.0,
        };
        let map = normalize_scan(&raw).unwrap();
        assert!(map.cells().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn background_free_counts_divide_by_max() {
        let raw = RawScan {
            grid: line_grid(2),
            counts: vec![[1.0; 4], [4.0; 4], [2.0; 4], [3.0; 4]],
            background: [0.0; 4],
            t_int_s: 1.0,
        };
        let map = normalize_scan(&raw).unwrap();
        let h: Vec<f64> = map.cells().iter().map(|v| v[0]).collect();
        assert_eq!(h, vec![0.25, 1.0, 0.5, 0.75]);
    }

    #[test]
    fn rejects_bad_grids() {
        let mut g = line_grid(1);
        assert!(g.validate().is_err());
        g.n_phi = 3;
        g.phi_max = -1.0;
        assert!(g.validate().is_err());
        let raw = RawScan {
            grid: line_grid(3),
            counts: vec![[0.0; 4]; 5],
            background: [0.0; 4],
            t_int_s: 1.0,
        };
        assert!(normalize_scan(&raw).is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(
            cells in prop::collection::vec(prop::array::uniform4(0.0..1e6f64), 9),
            bg in prop::array::uniform4(0.0..2e5f64),
        ) {
            let grid = GridSpec { phi_min: -1.0, phi_max: 1.0, theta_min: -1.0, theta_max: 1.0, n_phi: 3, n_theta: 3 };
            let once = normalize_scan(&RawScan { grid, counts: cells, background: bg, t_int_s: 1.0 }).unwrap();
            let twice = normalize_scan(&RawScan {
                grid,
                counts: once.cells().to_vec(),
                background: [0.0; 4],
                t_int_s: 1.0,
            }).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
