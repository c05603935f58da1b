use super::EfficiencyMap;
use crate::error::{Error, Result};

/// Transmission of a focal-plane pinhole of angular diameter `fov_urad` at
/// angular distance `r_urad` from the axis: flat inside, Gaussian roll-off
/// of scale `edge_urad` outside. A non-positive edge gives a hard stop.
fn window(r_urad: f64, radius_urad: f64, edge_urad: f64) -> f64 {
    if r_urad <= radius_urad {
        1.0
    } else if edge_urad > 0.0 {
        let x = (r_urad - radius_urad) / edge_urad;
        (-0.5 * x * x).exp()
    } else {
        0.0
    }
}

/// Applies a centered pinhole window to every channel and renormalizes each
/// channel to unit maximum. An infinite `fov_urad` leaves the map unchanged.
pub fn pinhole_filter(map: &EfficiencyMap, fov_urad: f64, edge_urad: f64) -> Result<EfficiencyMap> {
    if fov_urad.is_nan() || fov_urad <= 0.0 {
        return Err(Error::Domain {
            what: "pinhole field of view",
            value: fov_urad,
        });
    }
    if fov_urad.is_infinite() {
        return Ok(map.clone());
    }
    let grid = *map.grid();
    let radius = fov_urad / 2.0;
    let cells = map
        .cells()
        .iter()
        .enumerate()
        .map(|(idx, cell)| {
            let (phi, theta) = grid.angles(idx);
            let w = window(phi.hypot(theta) * 1e3, radius, edge_urad);
            cell.map(|v| v * w)
        })
        .collect();
    Ok(EfficiencyMap::renormalized(cells, grid))
}
