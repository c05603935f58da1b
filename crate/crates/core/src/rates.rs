//! Sifted key rate and error rate seen by Bob, with Eve's faked-state
//! attack in the line and without it.
//!
//! Conditional quantities are per pulse sent by Alice with a given
//! polarization; totals average over Alice's four equiprobable states.

use crate::error::{Error, Result};
use crate::model::{
    eve_measurement_probs, raw_click_probs, squashed_basis_prob, squashed_value_prob,
    ChannelEffVector, ClickProbs, EveDetectorModel, EveMeasurementProbs, LinkModel, Polarization,
    ReceiverModel,
};
use crate::scanmap::AttackPoint;

/// Eve's resend parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveStrategy {
    /// Mean photon number of the faked state per resent polarization `[H, V, D, A]`.
    pub mu: [f64; 4],
    /// Normalized channel efficiencies at the attack angle of each resent
    /// polarization. Scaled by the receiver's `eta_det` before use.
    pub attack_eff: [ChannelEffVector; 4],
    pub eve: EveDetectorModel,
}

impl EveStrategy {
    pub fn new(mu: [f64; 4], attack_eff: [ChannelEffVector; 4], eve: EveDetectorModel) -> Result<Self> {
        for m in mu {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::Domain {
                    what: "mean photon number",
                    value: m,
                });
            }
        }
        Ok(Self { mu, attack_eff, eve })
    }

    pub fn from_attack_points(mu: [f64; 4], points: &[AttackPoint; 4], eve: EveDetectorModel) -> Result<Self> {
        Self::new(mu, points.map(|p| p.eff), eve)
    }

    pub fn with_mu(&self, mu: [f64; 4]) -> Result<Self> {
        Self::new(mu, self.attack_eff, self.eve)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Baseline,
    Attack,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::Attack => "attack",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub kind: ScenarioKind,
    /// Sifted rate given Alice sent each polarization.
    pub rate: [f64; 4],
    /// Sifted-and-wrong rate given Alice sent each polarization.
    pub error: [f64; 4],
    pub total_rate: f64,
    pub qber: f64,
}

impl RateReport {
    fn from_conditionals(kind: ScenarioKind, rate: [f64; 4], error: [f64; 4]) -> Self {
        let total_rate = rate.iter().sum::<f64>() / 4.0;
        let total_error = error.iter().sum::<f64>() / 4.0;
        let qber = if total_rate > 0.0 { total_error / total_rate } else { 0.0 };
        Self {
            kind,
            rate,
            error,
            total_rate,
            qber,
        }
    }
}

/// Bob's raw click probabilities for each polarization Eve may resend.
fn resend_clicks(strategy: &EveStrategy, link: &LinkModel, receiver: &ReceiverModel) -> Result<[ClickProbs; 4]> {
    let mut out = [ClickProbs::new([0.0; 4])?; 4];
    for pol in Polarization::ALL {
        let j = pol.index();
        let eff = strategy.attack_eff[j].scaled(receiver.eta_det())?;
        out[j] = raw_click_probs(strategy.mu[j], pol, &eff, receiver, link.fidelity_eb())?;
    }
    Ok(out)
}

/// Rate and error given Alice sent `sent`, from Eve's single-click
/// probabilities and Bob's click table per resent polarization.
pub(crate) fn conditional_terms(
    sent: Polarization,
    eve: &EveMeasurementProbs,
    clicks: &[ClickProbs; 4],
    receiver: &ReceiverModel,
) -> (f64, f64) {
    let basis = sent.basis();
    let wrong = sent.conjugate();
    let [nc0, nc1] = basis.other().members();
    let at = |p: Polarization| &clicks[p.index()];

    let in_basis = |p: Polarization| squashed_basis_prob(at(p), basis);
    let wrong_value = |p: Polarization| squashed_value_prob(at(p), wrong);

    let (c_ok, c_bad) = (receiver.background_of(sent), receiver.background_of(wrong));
    let vacuum = eve.p_vacuum();

    let rate = eve.p_compatible_correct * in_basis(sent)
        + eve.p_compatible_wrong * in_basis(wrong)
        + eve.p_noncompatible_single * (in_basis(nc0) + in_basis(nc1))
        + vacuum * (c_ok + c_bad - c_ok * c_bad);
    let error = eve.p_compatible_correct * wrong_value(sent)
        + eve.p_compatible_wrong * wrong_value(wrong)
        + eve.p_noncompatible_single * (wrong_value(nc0) + wrong_value(nc1))
        + vacuum * (c_bad - c_bad * c_ok / 2.0);
    (rate, error)
}

fn attack_conditionals(
    strategy: &EveStrategy,
    link: &LinkModel,
    receiver: &ReceiverModel,
) -> Result<([f64; 4], [f64; 4])> {
    let eve = eve_measurement_probs(link.mu_alice(), link.fidelity_ab(), &strategy.eve)?;
    let clicks = resend_clicks(strategy, link, receiver)?;
    let mut rate = [0.0; 4];
    let mut error = [0.0; 4];
    for pol in Polarization::ALL {
        let (r, e) = conditional_terms(pol, &eve, &clicks, receiver);
        rate[pol.index()] = r;
        error[pol.index()] = e;
    }
    Ok((rate, error))
}

/// Sifted rate `R_e(j)` given Alice sent `alice_sent` and Eve attacks.
pub fn conditional_rate_with_eve(
    alice_sent: Polarization,
    strategy: &EveStrategy,
    link: &LinkModel,
    receiver: &ReceiverModel,
) -> Result<f64> {
    Ok(attack_conditionals(strategy, link, receiver)?.0[alice_sent.index()])
}

/// Error rate `E_j` given Alice sent `alice_sent` and Eve attacks.
pub fn conditional_error_with_eve(
    alice_sent: Polarization,
    strategy: &EveStrategy,
    link: &LinkModel,
    receiver: &ReceiverModel,
) -> Result<f64> {
    Ok(attack_conditionals(strategy, link, receiver)?.1[alice_sent.index()])
}

pub fn totals_with_eve(strategy: &EveStrategy, link: &LinkModel, receiver: &ReceiverModel) -> Result<RateReport> {
    let (rate, error) = attack_conditionals(strategy, link, receiver)?;
    Ok(RateReport::from_conditionals(ScenarioKind::Attack, rate, error))
}

/// Alice to Bob without an eavesdropper: the pulse arrives with mean photon
/// number `T * mu_alice` and couples equally into all four channels.
pub fn baseline_no_eve(link: &LinkModel, receiver: &ReceiverModel) -> Result<RateReport> {
    let eff = ChannelEffVector::uniform(receiver.eta_det())?;
    let mut rate = [0.0; 4];
    let mut error = [0.0; 4];
    for pol in Polarization::ALL {
        let p = raw_click_probs(link.mu_at_bob(), pol, &eff, receiver, link.fidelity_ab())?;
        rate[pol.index()] = squashed_basis_prob(&p, pol.basis());
        error[pol.index()] = squashed_value_prob(&p, pol.conjugate());
    }
    Ok(RateReport::from_conditionals(ScenarioKind::Baseline, rate, error))
}
