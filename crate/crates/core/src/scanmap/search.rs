use super::EfficiencyMap;
use crate::error::{Error, Result};
use crate::model::{ChannelEffVector, Polarization};

/// Minimum efficiency and mismatch a cell needs to serve as an attack angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub eta_min: f64,
    pub delta_min: f64,
}

impl Threshold {
    pub fn new(eta_min: f64, delta_min: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta_min) {
            return Err(Error::Domain {
                what: "eta_min",
                value: eta_min,
            });
        }
        if delta_min.is_nan() || delta_min < 1.0 {
            return Err(Error::Domain {
                what: "delta_min",
                value: delta_min,
            });
        }
        Ok(Self { eta_min, delta_min })
    }
}

/// Per-polarization search thresholds, indexed `[H, V, D, A]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchThresholds(pub [Threshold; 4]);

impl SearchThresholds {
    pub fn new(per_pol: [Threshold; 4]) -> Self {
        Self(per_pol)
    }

    /// The manually picked attack-angle thresholds of the original attack.
    pub fn paper() -> Self {
        Self([
            Threshold { eta_min: 0.2, delta_min: 75.0 },
            Threshold { eta_min: 0.002, delta_min: 8.0 },
            Threshold { eta_min: 0.4, delta_min: 80.0 },
            Threshold { eta_min: 0.1, delta_min: 20.0 },
        ])
    }

    /// Tight search used to certify the pinhole: `eta >= 0.001`, `delta >= 4`.
    pub fn tight() -> Self {
        Self::uniform(Threshold { eta_min: 0.001, delta_min: 4.0 })
    }

    pub fn uniform(t: Threshold) -> Self {
        Self([t; 4])
    }

    pub fn get(&self, pol: Polarization) -> Threshold {
        self.0[pol.index()]
    }
}

/// Mismatch ratio of the cell for polarization `pol`: the target channel's
/// efficiency over each channel of the other basis, minimized. A zero
/// denominator gives `+inf`; a dark target channel gives 0.
pub fn mismatch_ratio(cell: &[f64; 4], pol: Polarization) -> f64 {
    let own = cell[pol.index()];
    if own <= 0.0 {
        return 0.0;
    }
    pol.basis()
        .other()
        .members()
        .iter()
        .map(|nc| {
            let denom = cell[nc.index()];
            if denom > 0.0 {
                own / denom
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// A grid cell usable to resend one polarization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackPoint {
    pub polarization: Polarization,
    pub phi_mrad: f64,
    pub theta_mrad: f64,
    /// Row-major storage index of the cell.
    pub index: usize,
    /// Normalized efficiencies of all four channels at the cell.
    pub eff: ChannelEffVector,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttackSearch {
    /// Qualifying cells per polarization in row-major order.
    pub candidates: [Vec<AttackPoint>; 4],
    pub best: [Option<AttackPoint>; 4],
}

impl AttackSearch {
    /// True when no polarization has a qualifying cell.
    pub fn is_empty(&self) -> bool {
        self.candidates.iter().all(Vec::is_empty)
    }

    pub fn best_for(&self, pol: Polarization) -> Option<&AttackPoint> {
        self.best[pol.index()].as_ref()
    }

    /// All four best points, if every polarization has one.
    pub fn complete(&self) -> Option<[AttackPoint; 4]> {
        let [h, v, d, a] = self.best;
        Some([h?, v?, d?, a?])
    }

    pub fn qualifying_count(&self) -> usize {
        self.candidates.iter().map(Vec::len).sum()
    }
}

/// Scans every cell for usable attack angles.
///
/// Channels are renormalized to unit maximum first, so the result does not
/// depend on the overall scale of the map. The best point per polarization
/// maximizes the target efficiency; ties go to the larger mismatch, then to
/// the earlier cell in row-major order.
pub fn find_attack_points(map: &EfficiencyMap, thresholds: &SearchThresholds) -> AttackSearch {
    let grid = *map.grid();
    let norm = EfficiencyMap::renormalized(map.cells().to_vec(), grid);
    let mut out = AttackSearch::default();
    for pol in Polarization::ALL {
        let t = thresholds.get(pol);
        let j = pol.index();
        let list = &mut out.candidates[j];
        for (idx, cell) in norm.cells().iter().enumerate() {
            if cell[j] < t.eta_min {
                continue;
            }
            let delta = mismatch_ratio(cell, pol);
            if delta < t.delta_min {
                continue;
            }
            let (phi, theta) = grid.angles(idx);
            list.push(AttackPoint {
                polarization: pol,
                phi_mrad: phi,
                theta_mrad: theta,
                index: idx,
                eff: ChannelEffVector::new(*cell).expect("renormalized cells lie in [0, 1]"),
                delta,
            });
        }
        let mut best: Option<&AttackPoint> = None;
        for p in list.iter() {
            let better = match best {
                None => true,
                Some(b) => {
                    let (pe, be) = (p.eff.get(pol), b.eff.get(pol));
                    pe > be || (pe == be && p.delta > b.delta)
                }
            };
            if better {
                best = Some(p);
            }
        }
        out.best[j] = best.copied();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scanmap::GridSpec;
    use proptest::prelude::*;

    fn grid3() -> GridSpec {
        GridSpec {
            phi_min: -1.0,
            phi_max: 1.0,
            theta_min: -1.0,
            theta_max: 1.0,
            n_phi: 3,
            n_theta: 3,
        }
    }

    /// Exhaustive reference: qualifying indices by direct enumeration.
    fn brute_force(cells: &[[f64; 4]], pol: Polarization, t: Threshold) -> Vec<usize> {
        let j = pol.index();
        let nc: Vec<usize> = pol.basis().other().members().iter().map(|p| p.index()).collect();
        (0..cells.len())
            .filter(|&i| {
                let c = cells[i];
                let ratios: Vec<f64> = nc
                    .iter()
                    .map(|&k| if c[k] == 0.0 { f64::INFINITY } else { c[j] / c[k] })
                    .collect();
                c[j] > 0.0 && c[j] >= t.eta_min && ratios.iter().all(|&r| r >= t.delta_min)
            })
            .collect()
    }

    #[test]
    fn single_mismatched_cell_selected_for_h() {
        let mut cells = vec![[0.0; 4]; 9];
        cells[4] = [1.0; 4];
        cells[2] = [0.3, 0.29, 0.003, 0.003];
        let map = EfficiencyMap::new(grid3(), cells.clone()).unwrap();
        let t = Threshold::new(0.2, 75.0).unwrap();
        let search = find_attack_points(&map, &SearchThresholds::uniform(t));
        assert_eq!(brute_force(&cells, Polarization::H, t), vec![2]);
        let best = search.best_for(Polarization::H).unwrap();
        assert_eq!(best.index, 2);
        assert!((best.delta - 100.0).abs() < 1e-12);
        assert_eq!((best.phi_mrad, best.theta_mrad), (1.0, -1.0));
        assert_eq!(search.candidates[0].len(), 1);
    }

    #[test]
    fn delta_is_min_over_noncompatible() {
        let d = mismatch_ratio(&[0.2, 0.0, 0.0025, 0.0026], Polarization::H);
        assert!((d - 0.2 / 0.0026).abs() < 1e-12);
        assert!((d - 76.92).abs() < 0.01);
        assert_eq!(mismatch_ratio(&[0.2, 0.9, 0.0, 0.0], Polarization::H), f64::INFINITY);
        assert_eq!(mismatch_ratio(&[0.0, 0.9, 0.0, 0.0], Polarization::H), 0.0);
    }

    #[test]
    fn uniform_map_has_no_attack_points() {
        let map = EfficiencyMap::new(grid3(), vec![[0.5; 4]; 9]).unwrap();
        let t = Threshold::new(0.0, 1.0 + 1e-9).unwrap();
        assert!(find_attack_points(&map, &SearchThresholds::uniform(t)).is_empty());
    }

    #[test]
    fn dark_channel_yields_no_points_for_it() {
        let cells: Vec<[f64; 4]> = (0..9).map(|i| [0.1 * i as f64 / 8.0 + 0.01, 0.0, 0.02, 0.03]).collect();
        let map = EfficiencyMap::new(grid3(), cells).unwrap();
        let search = find_attack_points(&map, &SearchThresholds::tight());
        assert!(search.candidates[Polarization::V.index()].is_empty());
        assert!(search.best_for(Polarization::V).is_none());
        assert!(search.complete().is_none());
    }

    #[test]
    fn ties_resolved_by_delta_then_order() {
        let mut cells = vec![[0.0; 4]; 9];
        cells[0] = [1.0, 0.0, 0.1, 0.1];
        cells[5] = [1.0, 0.0, 0.01, 0.01];
        cells[7] = [1.0, 0.0, 0.01, 0.01];
        let map = EfficiencyMap::new(grid3(), cells).unwrap();
        let t = Threshold::new(0.5, 2.0).unwrap();
        let search = find_attack_points(&map, &SearchThresholds::uniform(t));
        assert_eq!(search.best_for(Polarization::H).unwrap().index, 5);
    }

    #[test]
    fn threshold_validation() {
        assert!(Threshold::new(1.5, 2.0).is_err());
        assert!(Threshold::new(0.5, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            cells in prop::collection::vec(prop::array::uniform4(0.0..=1.0f64), 9),
            eta_min in 0.0..0.5f64,
            delta_min in 1.0..5.0f64,
        ) {
            let mut cells = cells;
            cells[0] = [1.0; 4];
            let map = EfficiencyMap::new(grid3(), cells.clone()).unwrap();
            let t = Threshold::new(eta_min, delta_min).unwrap();
            let search = find_attack_points(&map, &SearchThresholds::uniform(t));
            for pol in Polarization::ALL {
                let got: Vec<usize> = search.candidates[pol.index()].iter().map(|p| p.index).collect();
                prop_assert_eq!(got, brute_force(&cells, pol, t));
            }
        }

        #[test]
        fn invariant_under_uniform_rescaling(
            cells in prop::collection::vec(prop::array::uniform4(0.0..=1.0f64), 9),
            scale in 1e-3..1.0f64,
        ) {
            let map = EfficiencyMap::new(grid3(), cells.clone()).unwrap();
            let scaled = EfficiencyMap::new(grid3(), cells.iter().map(|c| c.map(|v| v * scale)).collect()).unwrap();
            let t = SearchThresholds::tight();
            let a = find_attack_points(&map, &t);
            let b = find_attack_points(&scaled, &t);
            for pol in Polarization::ALL {
                let ia: Vec<usize> = a.candidates[pol.index()].iter().map(|p| p.index).collect();
                let ib: Vec<usize> = b.candidates[pol.index()].iter().map(|p| p.index).collect();
                prop_assert_eq!(ia, ib);
                prop_assert_eq!(a.best[pol.index()].map(|p| p.index), b.best[pol.index()].map(|p| p.index));
            }
        }
    }
}
