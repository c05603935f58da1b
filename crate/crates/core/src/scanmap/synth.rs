//! Parametric synthesis of angular scans.
//!
//! Each channel's response is a central coupling peak, an optional off-axis
//! reflection peak, scattering rings from lens-mount edges and a flat stray
//! light floor. Expected count rates are `background + peak_rate * profile`;
//! with shot noise enabled each cell is drawn from a Poisson distribution
//! over the integration time using a seeded ChaCha8 stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::{normalize_scan, EfficiencyMap, GridSpec, RawScan};
use crate::error::{Error, Result};

/// Gaussian spot. Position and width in mrad, amplitude relative to the
/// central coupling peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakFeature {
    pub phi: f64,
    pub theta: f64,
    pub sigma: f64,
    pub amplitude: f64,
}

impl PeakFeature {
    fn value(&self, phi: f64, theta: f64) -> f64 {
        let d2 = (phi - self.phi).powi(2) + (theta - self.theta).powi(2);
        self.amplitude * (-d2 / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Annulus centered on the optical axis whose brightness peaks on one side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingFeature {
    pub radius: f64,
    pub sigma: f64,
    /// Level around the whole ring.
    pub base: f64,
    /// Extra level at `bright_azimuth_deg`.
    pub bright: f64,
    pub bright_azimuth_deg: f64,
    /// Exponent narrowing the bright side.
    pub sharpness: i32,
}

impl RingFeature {
    fn value(&self, phi: f64, theta: f64) -> f64 {
        let r = phi.hypot(theta);
        let radial = (-(r - self.radius).powi(2) / (2.0 * self.sigma * self.sigma)).exp();
        let az = theta.atan2(phi) - self.bright_azimuth_deg.to_radians();
        let lobe = ((1.0 + az.cos()) / 2.0).powi(self.sharpness);
        radial * (self.base + self.bright * lobe)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    pub central: PeakFeature,
    pub reflection: Option<PeakFeature>,
    pub rings: Vec<RingFeature>,
    pub floor: f64,
}

impl ChannelProfile {
    pub fn value(&self, phi: f64, theta: f64) -> f64 {
        self.central.value(phi, theta)
            + self.reflection.map_or(0.0, |p| p.value(phi, theta))
            + self.rings.iter().map(|r| r.value(phi, theta)).sum::<f64>()
            + self.floor
    }

    fn validate(&self) -> Result<()> {
        let peaks = std::iter::once(&self.central).chain(self.reflection.iter());
        for p in peaks {
            if !(p.sigma > 0.0 && p.amplitude >= 0.0 && p.phi.is_finite() && p.theta.is_finite()) {
                return Err(Error::Preset(format!("bad peak feature {p:?}")));
            }
        }
        for r in &self.rings {
            if !(r.radius >= 0.0 && r.sigma > 0.0 && r.base >= 0.0 && r.bright >= 0.0 && r.sharpness >= 0) {
                return Err(Error::Preset(format!("bad ring feature {r:?}")));
            }
        }
        if !(self.floor >= 0.0 && self.floor.is_finite()) {
            return Err(Error::Preset(format!("bad floor {}", self.floor)));
        }
        Ok(())
    }
}

/// Complete recipe for a synthetic scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPreset {
    pub name: String,
    pub grid: GridSpec,
    /// Channels `[h, v, d, a]`.
    pub channels: [ChannelProfile; 4],
    /// Count rate of a unit-profile cell, counts/s.
    pub peak_rate_cps: f64,
    pub background_cps: [f64; 4],
    pub t_int_s: f64,
    pub shot_noise: bool,
}

impl ScanPreset {
    pub const NAMES: [&'static str; 2] = ["paper-like", "zero-feature"];

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "paper-like" => Ok(Self::paper_like()),
            "zero-feature" => Ok(Self::zero_feature()),
            other => Err(Error::Preset(format!(
                "unknown preset `{other}` (expected one of: {})",
                Self::NAMES.join(", ")
            ))),
        }
    }

    /// Receiver with channel-dependent central peaks, strong off-axis
    /// reflections in H and D, a weak one in V and a one-sided scattering
    /// ring in A. Attack-angle statistics clear the original search
    /// thresholds for all four polarizations.
    pub fn paper_like() -> Self {
        let central = |phi, theta, sigma| PeakFeature {
            phi,
            theta,
            sigma,
            amplitude: 1.0,
        };
        let rings = |bright: f64, az: f64| {
            vec![
                RingFeature {
                    radius: 1.45,
                    sigma: 0.06,
                    base: 0.003,
                    bright,
                    bright_azimuth_deg: az,
                    sharpness: 6,
                },
                RingFeature {
                    radius: 1.70,
                    sigma: 0.06,
                    base: 0.0015,
                    bright: 0.004,
                    bright_azimuth_deg: az,
                    sharpness: 6,
                },
            ]
        };
        let floor = 2e-4;
        Self {
            name: "paper-like".into(),
            grid: GridSpec::paper_scan(),
            channels: [
                ChannelProfile {
                    central: central(-0.03, 0.02, 0.22),
                    reflection: Some(PeakFeature {
                        phi: -0.95,
                        theta: 0.55,
                        sigma: 0.09,
                        amplitude: 0.42,
                    }),
                    rings: rings(0.02, 40.0),
                    floor,
                },
                ChannelProfile {
                    central: central(0.04, -0.02, 0.17),
                    reflection: Some(PeakFeature {
                        phi: 0.35,
                        theta: -1.05,
                        sigma: 0.08,
                        amplitude: 0.0065,
                    }),
                    rings: rings(0.01, 130.0),
                    floor,
                },
                ChannelProfile {
                    central: central(0.02, 0.04, 0.26),
                    reflection: Some(PeakFeature {
                        phi: 0.75,
                        theta: 0.85,
                        sigma: 0.10,
                        amplitude: 0.62,
                    }),
                    rings: rings(0.03, 320.0),
                    floor,
                },
                ChannelProfile {
                    central: central(-0.02, -0.03, 0.20),
                    reflection: None,
                    rings: rings(0.22, 205.0),
                    floor,
                },
            ],
            peak_rate_cps: 1e6,
            background_cps: [430.0, 1560.0, 1010.0, 760.0],
            t_int_s: 1.0,
            shot_noise: true,
        }
    }

    /// Four identical noiseless Gaussians: no mismatch anywhere.
    pub fn zero_feature() -> Self {
        let channel = ChannelProfile {
            central: PeakFeature {
                phi: 0.0,
                theta: 0.0,
                sigma: 0.25,
                amplitude: 1.0,
            },
            reflection: None,
            rings: Vec::new(),
            floor: 0.0,
        };
        Self {
            name: "zero-feature".into(),
            grid: GridSpec::paper_scan(),
            channels: std::array::from_fn(|_| channel.clone()),
            peak_rate_cps: 1e6,
            background_cps: [1000.0; 4],
            t_int_s: 1.0,
            shot_noise: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        for ch in &self.channels {
            ch.validate()?;
        }
        let rates_ok = self.peak_rate_cps > 0.0
            && self.peak_rate_cps.is_finite()
            && self.t_int_s > 0.0
            && self.background_cps.iter().all(|b| *b >= 0.0 && b.is_finite());
        if !rates_ok {
            return Err(Error::Preset("rates and integration time must be positive".into()));
        }
        Ok(())
    }
}

/// Count rates the preset would record; deterministic in `(preset, seed)`.
pub fn synthesize_raw_scan(preset: &ScanPreset, seed: u64) -> Result<RawScan> {
    preset.validate()?;
    let grid = preset.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let (phi, theta) = grid.angles(idx);
        let mut cell = [0.0; 4];
        for (c, ch) in preset.channels.iter().enumerate() {
            let rate = preset.background_cps[c] + preset.peak_rate_cps * ch.value(phi, theta);
            cell[c] = if preset.shot_noise {
                let mean = rate * preset.t_int_s;
                let n = if mean > 0.0 {
                    Poisson::new(mean)
                        .map_err(|e| Error::Preset(e.to_string()))?
                        .sample(&mut rng)
                } else {
                    0.0
                };
                n / preset.t_int_s
            } else {
                rate
            };
        }
        counts.push(cell);
    }
    Ok(RawScan {
        grid,
        counts,
        background: preset.background_cps,
        t_int_s: preset.t_int_s,
    })
}

/// Background-subtracted, max-normalized synthetic efficiency map.
pub fn synthesize_scan(preset: &ScanPreset, seed: u64) -> Result<EfficiencyMap> {
    normalize_scan(&synthesize_raw_scan(preset, seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Polarization;
    use crate::scanmap::{find_attack_points, SearchThresholds, Threshold};

    #[test]
    fn deterministic_in_seed() {
        let p = ScanPreset::paper_like();
        let a = synthesize_scan(&p, 1).unwrap();
        let b = synthesize_scan(&p, 1).unwrap();
        assert_eq!(a, b);
        let c = synthesize_scan(&p, 2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn paper_like_clears_original_thresholds() {
        let map = synthesize_scan(&ScanPreset::paper_like(), 1).unwrap();
        let t = SearchThresholds::paper();
        let search = find_attack_points(&map, &t);
        for pol in Polarization::ALL {
            let best = search.best_for(pol).unwrap_or_else(|| panic!("no attack point for {pol}"));
            let th = t.get(pol);
            assert!(best.eff.get(pol) >= th.eta_min, "{pol}: {best:?}");
            assert!(best.delta >= th.delta_min, "{pol}: {best:?}");
        }
    }

    #[test]
    fn zero_feature_has_no_mismatch() {
        let map = synthesize_scan(&ScanPreset::zero_feature(), 1).unwrap();
        for cell in map.cells() {
            assert!(cell.iter().all(|&v| v == cell[0]));
        }
        let t = SearchThresholds::uniform(Threshold::new(0.0, 4.0).unwrap());
        assert!(find_attack_points(&map, &t).is_empty());
    }

    #[test]
    fn unknown_preset_rejected() {
        assert!(matches!(ScanPreset::by_name("nope"), Err(Error::Preset(_))));
        let mut p = ScanPreset::paper_like();
        p.channels[0].central.sigma = 0.0;
        assert!(synthesize_scan(&p, 1).is_err());
    }
}
