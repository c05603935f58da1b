//! Domain types and the elementary click-probability calculus.
//!
//! Detector channels are indexed by the polarization they ideally register:
//! channel `h` is [`Polarization::H`], and so on. All efficiencies passed to
//! [`raw_click_probs`] are *absolute*; scan maps store normalized values that
//! are scaled by [`ReceiverModel::eta_det`] before use.

use crate::error::{check_nonneg, check_unit, Error, Result};

/// One of the four BB84 polarization states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarization {
    H,
    V,
    D,
    A,
}

/// Measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    HV,
    DA,
}

impl Polarization {
    pub const ALL: [Polarization; 4] = [Self::H, Self::V, Self::D, Self::A];

    pub fn basis(self) -> Basis {
        match self {
            Self::H | Self::V => Basis::HV,
            Self::D | Self::A => Basis::DA,
        }
    }

    /// The orthogonal state in the same basis.
    pub fn conjugate(self) -> Self {
        match self {
            Self::H => Self::V,
            Self::V => Self::H,
            Self::D => Self::A,
            Self::A => Self::D,
        }
    }

    /// Position in `[H, V, D, A]`; also the detector channel index.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::H => "H",
            Self::V => "V",
            Self::D => "D",
            Self::A => "A",
        }
    }
}

impl std::fmt::Display for Polarization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Polarization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "H" | "h" => Ok(Self::H),
            "V" | "v" => Ok(Self::V),
            "D" | "d" => Ok(Self::D),
            "A" | "a" => Ok(Self::A),
            other => Err(format!("unknown polarization `{other}`")),
        }
    }
}

impl Basis {
    pub fn members(self) -> [Polarization; 2] {
        match self {
            Self::HV => [Polarization::H, Polarization::V],
            Self::DA => [Polarization::D, Polarization::A],
        }
    }

    pub fn other(self) -> Self {
        match self {
            Self::HV => Self::DA,
            Self::DA => Self::HV,
        }
    }
}

/// Per-channel efficiencies `[h, v, d, a]`, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelEffVector([f64; 4]);

impl ChannelEffVector {
    pub fn new(eta: [f64; 4]) -> Result<Self> {
        for e in eta {
            check_unit("channel efficiency", e)?;
        }
        Ok(Self(eta))
    }

    pub fn uniform(eta: f64) -> Result<Self> {
        Self::new([eta; 4])
    }

    /// Efficiencies for a single target channel, all others dark.
    pub fn single(channel: Polarization, eta: f64) -> Result<Self> {
        let mut v = [0.0; 4];
        v[channel.index()] = eta;
        Self::new(v)
    }

    pub fn get(&self, channel: Polarization) -> f64 {
        self.0[channel.index()]
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }

    /// Multiplies every component by `k`, which must keep them in `[0, 1]`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.0.map(|e| e * k))
    }
}

/// How Bob maps multi-click events to qubit outcomes. Only the standard
/// squashing map is modeled: a same-basis double click becomes a random bit
/// in that basis and any cross-basis multi-click is discarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Squashing {
    #[default]
    Standard,
}

/// Bob's receiver: peak absolute efficiency and per-channel background click
/// probabilities per 1 ns bit slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverModel {
    eta_det: f64,
    background: [f64; 4],
    squashing: Squashing,
}

impl ReceiverModel {
    /// Largest accepted background click probability per slot.
    pub const MAX_BACKGROUND: f64 = 1e-3;

    pub fn new(eta_det: f64, background: [f64; 4]) -> Result<Self> {
        if !(eta_det > 0.0 && eta_det <= 1.0) {
            return Err(Error::Domain {
                what: "eta_det",
                value: eta_det,
            });
        }
        for c in background {
            if !(0.0..=Self::MAX_BACKGROUND).contains(&c) {
                return Err(Error::Domain {
                    what: "background click probability",
                    value: c,
                });
            }
        }
        Ok(Self {
            eta_det,
            background,
            squashing: Squashing::Standard,
        })
    }

    pub fn eta_det(&self) -> f64 {
        self.eta_det
    }

    pub fn background(&self) -> [f64; 4] {
        self.background
    }

    pub fn background_of(&self, channel: Polarization) -> f64 {
        self.background[channel.index()]
    }

    pub fn squashing(&self) -> Squashing {
        self.squashing
    }

    /// Same receiver with every background set to zero.
    pub fn without_background(&self) -> Self {
        Self {
            background: [0.0; 4],
            ..*self
        }
    }
}

impl Default for ReceiverModel {
    /// Peak efficiency 0.4; backgrounds spread over the measured
    /// 430e-9 to 1560e-9 per-slot range.
    fn default() -> Self {
        Self {
            eta_det: 0.4,
            background: [430e-9, 1560e-9, 1010e-9, 760e-9],
            squashing: Squashing::Standard,
        }
    }
}

/// Alice to Bob line plus the polarization fidelities of each leg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkModel {
    loss_db: f64,
    fidelity_ab: f64,
    fidelity_eb: f64,
}

impl LinkModel {
    pub const FIDELITY_AB: f64 = 0.9831;
    pub const FIDELITY_EB: f64 = 0.9904;

    pub fn new(loss_db: f64, fidelity_ab: f64, fidelity_eb: f64) -> Result<Self> {
        check_nonneg("loss_db", loss_db)?;
        for f in [fidelity_ab, fidelity_eb] {
            if !(0.5..=1.0).contains(&f) {
                return Err(Error::Domain {
                    what: "fidelity",
                    value: f,
                });
            }
        }
        let link = Self {
            loss_db,
            fidelity_ab,
            fidelity_eb,
        };
        // Very large losses underflow T to zero.
        if link.transmittance() <= 0.0 {
            return Err(Error::Domain {
                what: "loss_db",
                value: loss_db,
            });
        }
        Ok(link)
    }

    /// Link at `loss_db` with the default fidelities.
    pub fn with_loss(loss_db: f64) -> Result<Self> {
        Self::new(loss_db, Self::FIDELITY_AB, Self::FIDELITY_EB)
    }

    pub fn loss_db(&self) -> f64 {
        self.loss_db
    }

    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.loss_db / 10.0)
    }

    /// Alice's mean photon number, set equal to the line transmittance.
    pub fn mu_alice(&self) -> f64 {
        self.transmittance()
    }

    /// Mean photon number of Alice's pulse on arrival at Bob.
    pub fn mu_at_bob(&self) -> f64 {
        self.mu_alice() * self.transmittance()
    }

    pub fn fidelity_ab(&self) -> f64 {
        self.fidelity_ab
    }

    pub fn fidelity_eb(&self) -> f64 {
        self.fidelity_eb
    }
}

/// Eve's intercepting detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveDetectorModel {
    eta_e: f64,
    dark: f64,
}

impl EveDetectorModel {
    pub fn new(eta_e: f64, dark: f64) -> Result<Self> {
        if !(eta_e > 0.0 && eta_e <= 1.0) {
            return Err(Error::Domain {
                what: "eta_e",
                value: eta_e,
            });
        }
        if !(0.0..=1e-6).contains(&dark) {
            return Err(Error::Domain {
                what: "eve dark count probability",
                value: dark,
            });
        }
        Ok(Self { eta_e, dark })
    }

    pub fn eta_e(&self) -> f64 {
        self.eta_e
    }

    pub fn dark(&self) -> f64 {
        self.dark
    }
}

impl Default for EveDetectorModel {
    fn default() -> Self {
        Self {
            eta_e: 0.85,
            dark: 1e-9,
        }
    }
}

/// Raw (pre-squashing) click probabilities of Bob's four detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickProbs([f64; 4]);

impl ClickProbs {
    pub fn new(p: [f64; 4]) -> Result<Self> {
        for x in p {
            check_unit("click probability", x)?;
        }
        Ok(Self(p))
    }

    pub fn get(&self, channel: Polarization) -> f64 {
        self.0[channel.index()]
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }
}

/// Fraction of an incoming `sent`-polarized pulse's mean photon number that
/// reaches `channel` after the 50:50 basis splitter and the polarizing
/// splitter of fidelity `fidelity`.
pub fn branch_fraction(sent: Polarization, channel: Polarization, fidelity: f64) -> f64 {
    if channel == sent {
        fidelity / 2.0
    } else if channel == sent.conjugate() {
        (1.0 - fidelity) / 2.0
    } else {
        0.25
    }
}

/// Click probabilities `p_i(j)` of Bob's detectors for a coherent pulse of
/// mean photon number `mu` and polarization `sent`, using the additive
/// background approximation `c_i + 1 - exp(-mu f_i eta_i)`, clamped to `[0, 1]`.
pub fn raw_click_probs(
    mu: f64,
    sent: Polarization,
    eff: &ChannelEffVector,
    receiver: &ReceiverModel,
    fidelity: f64,
) -> Result<ClickProbs> {
    check_nonneg("mean photon number", mu)?;
    if !(0.5..=1.0).contains(&fidelity) {
        return Err(Error::Domain {
            what: "fidelity",
            value: fidelity,
        });
    }
    let mut p = [0.0; 4];
    for ch in Polarization::ALL {
        let mean = mu * branch_fraction(sent, ch, fidelity) * eff.get(ch);
        let click = receiver.background_of(ch) - (-mean).exp_m1();
        p[ch.index()] = click.clamp(0.0, 1.0);
    }
    Ok(ClickProbs(p))
}

/// Probability that Bob's squashed outcome lies in `basis`: at least one
/// click in that basis and none in the other.
pub fn squashed_basis_prob(p: &ClickProbs, basis: Basis) -> f64 {
    let [a, b] = basis.members();
    let [o1, o2] = basis.other().members();
    let (pa, pb) = (p.get(a), p.get(b));
    (1.0 - p.get(o1)) * (1.0 - p.get(o2)) * (pa + pb - pa * pb)
}

/// Probability that Bob's squashed outcome is `value`. A same-basis double
/// click contributes half its weight to each value.
pub fn squashed_value_prob(p: &ClickProbs, value: Polarization) -> f64 {
    let [o1, o2] = value.basis().other().members();
    let own = p.get(value);
    let partner = p.get(value.conjugate());
    (own - own * partner / 2.0) * (1.0 - p.get(o1)) * (1.0 - p.get(o2))
}

/// Single-click probabilities of Eve's active-basis measurement of Alice's
/// pulse. Eve's dark counts are neglected here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveMeasurementProbs {
    /// Same basis as Alice, click only in the correct detector.
    pub p_compatible_correct: f64,
    /// Same basis as Alice, click only in the wrong detector.
    pub p_compatible_wrong: f64,
    /// Other basis, click only in one given detector.
    pub p_noncompatible_single: f64,
}

impl EveMeasurementProbs {
    /// Probability that Eve has no usable single click and resends vacuum.
    pub fn p_vacuum(&self) -> f64 {
        (1.0 - self.p_compatible_correct
            - self.p_compatible_wrong
            - 2.0 * self.p_noncompatible_single)
            .max(0.0)
    }
}

pub fn eve_measurement_probs(
    mu: f64,
    fidelity_ae: f64,
    eve: &EveDetectorModel,
) -> Result<EveMeasurementProbs> {
    check_nonneg("mean photon number", mu)?;
    let eta = eve.eta_e();
    let correct = mu * fidelity_ae * eta;
    let wrong = mu * (1.0 - fidelity_ae) * eta;
    let half = mu * eta / 2.0;
    // 1 - e^{-x} computed as -expm1(-x) for small x.
    let click = |x: f64| -(-x).exp_m1();
    Ok(EveMeasurementProbs {
        p_compatible_correct: 0.5 * click(correct) * (-wrong).exp(),
        p_compatible_wrong: 0.5 * (-correct).exp() * click(wrong),
        p_noncompatible_single: 0.5 * click(half) * (-half).exp(),
    })
}
