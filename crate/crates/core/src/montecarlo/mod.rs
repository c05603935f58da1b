//! Pulse-level stochastic simulation of the link, used as an oracle for the
//! closed-form rates.
//!
//! Photons are followed individually through every beam splitter and
//! detector, and backgrounds combine with signal clicks as a logical OR
//! rather than additively. Nothing here calls into the analytic click
//! formulas, so agreement between the two is evidence rather than
//! tautology.
//!
//! Pulses are simulated in shards of [`SHARD_PULSES`]. Every shard draws
//! from its own ChaCha8 stream keyed by `(seed, shard index)` and tallies
//! are integer sums, so results do not depend on thread count or schedule.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Basis, ChannelEffVector, LinkModel, Polarization, ReceiverModel};
use crate::rates::{EveStrategy, RateReport, ScenarioKind};

pub const SHARD_PULSES: u64 = 1 << 16;

pub const COMPARISON_COLUMNS: &str = "quantity,analytic,estimate,stderr,z";

/// Above this photon number, arm occupation is drawn by sequential
/// binomial splitting instead of photon by photon.
const PER_PHOTON_LIMIT: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    BaselineNoEve,
    FakedStateAttack(EveStrategy),
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            Self::BaselineNoEve => ScenarioKind::Baseline,
            Self::FakedStateAttack(_) => ScenarioKind::Attack,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub n_pulses: u64,
    pub seed: u64,
    pub link: LinkModel,
    pub receiver: ReceiverModel,
    pub scenario: Scenario,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pulses == 0 {
            return Err(Error::Domain {
                what: "pulse count",
                value: 0.0,
            });
        }
        if let Scenario::FakedStateAttack(s) = &self.scenario {
            EveStrategy::new(s.mu, s.attack_eff, s.eve)?;
        }
        Ok(())
    }
}

/// Binomial estimate `k/n` with standard error `sqrt(p(1-p)/n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn binomial(k: u64, n: u64) -> Self {
        if n == 0 {
            return Self {
                value: 0.0,
                stderr: 0.0,
            };
        }
        let p = k as f64 / n as f64;
        Self {
            value: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialStats {
    pub n_pulses: u64,
    /// Pulses per Alice polarization.
    pub sent: [u64; 4],
    /// Sifted events per Alice polarization.
    pub sifted: [u64; 4],
    /// Sifted events with the wrong bit per Alice polarization.
    pub errors: [u64; 4],
    /// Raw clicks per Bob detector, before squashing.
    pub clicks: [u64; 4],
    /// Pulses on which Eve had exactly one click and resent a state.
    pub resends: u64,
    /// Which kind of run produced the tallies. Set by [`run_trials`].
    pub attack: bool,
}

impl TrialStats {
    pub fn kind(&self) -> ScenarioKind {
        if self.attack {
            ScenarioKind::Attack
        } else {
            ScenarioKind::Baseline
        }
    }

    pub fn sifted_total(&self) -> u64 {
        self.sifted.iter().sum()
    }

    pub fn error_total(&self) -> u64 {
        self.errors.iter().sum()
    }

    pub fn rate(&self, alice: Polarization) -> Estimate {
        Estimate::binomial(self.sifted[alice.index()], self.sent[alice.index()])
    }

    pub fn error(&self, alice: Polarization) -> Estimate {
        Estimate::binomial(self.errors[alice.index()], self.sent[alice.index()])
    }

    pub fn total_rate(&self) -> Estimate {
        Estimate::binomial(self.sifted_total(), self.n_pulses)
    }

    /// Error fraction among sifted events.
    pub fn qber(&self) -> Estimate {
        Estimate::binomial(self.error_total(), self.sifted_total())
    }

    fn merge(mut self, other: Self) -> Self {
        self.n_pulses += other.n_pulses;
        self.resends += other.resends;
        for i in 0..4 {
            self.sent[i] += other.sent[i];
            self.sifted[i] += other.sifted[i];
            self.errors[i] += other.errors[i];
            self.clicks[i] += other.clicks[i];
        }
        self
    }
}

/// Probability that a photon of polarization `sent` leaves a passive 50:50
/// basis splitter and a polarizing splitter in each arm `[H, V, D, A]`.
fn arm_probabilities(sent: Polarization, fidelity: f64) -> [f64; 4] {
    let mut p = [0.0; 4];
    for basis in [Basis::HV, Basis::DA] {
        let [first, second] = basis.members();
        let to_first = if basis == sent.basis() {
            if sent == first {
                fidelity
            } else {
                1.0 - fidelity
            }
        } else {
            0.5
        };
        p[first.index()] = 0.5 * to_first;
        p[second.index()] = 0.5 * (1.0 - to_first);
    }
    p
}

/// Number of detected photons per arm for `n` photons with arm
/// probabilities `arm` and detector efficiencies `eff`.
fn detect_photons<R: Rng>(rng: &mut R, n: u64, arm: &[f64; 4], eff: &[f64; 4]) -> [u64; 4] {
    let mut hits = [0u64; 4];
    if n <= PER_PHOTON_LIMIT {
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut port = 3;
            for (i, p) in arm.iter().enumerate() {
                acc += p;
                if u < acc {
                    port = i;
                    break;
                }
            }
            if rng.random::<f64>() < eff[port] {
                hits[port] += 1;
            }
        }
        return hits;
    }
    let mut remaining = n;
    let mut mass = 1.0;
    for i in 0..4 {
        let q = arm[i] * eff[i];
        if remaining == 0 || mass <= 0.0 {
            break;
        }
        let k = Binomial::new(remaining, (q / mass).clamp(0.0, 1.0))
            .map(|d| d.sample(rng))
            .unwrap_or(0);
        hits[i] = k;
        remaining -= k;
        mass -= q;
    }
    hits
}

fn poisson<R: Rng>(rng: &mut R, d: &Option<Poisson<f64>>) -> u64 {
    d.as_ref().map_or(0, |d| d.sample(rng) as u64)
}

/// Click pattern of Bob's four detectors for `n` arriving photons. Each
/// detector also fires on its own background with probability `c_i`.
pub fn sample_bob_clicks<R: Rng>(
    rng: &mut R,
    n: u64,
    sent: Polarization,
    eff_abs: &ChannelEffVector,
    receiver: &ReceiverModel,
    fidelity: f64,
) -> [bool; 4] {
    let hits = detect_photons(rng, n, &arm_probabilities(sent, fidelity), &eff_abs.as_array());
    let bg = receiver.background();
    let mut out = [false; 4];
    for i in 0..4 {
        out[i] = hits[i] > 0 || (bg[i] > 0.0 && rng.random::<f64>() < bg[i]);
    }
    out
}

/// Squashed, sifted outcome: `Some(value)` if Bob's clicks yield a bit in
/// Alice's basis. Double clicks within one basis give a random bit; clicks
/// in both bases are discarded.
fn squash<R: Rng>(rng: &mut R, clicks: &[bool; 4], alice_basis: Basis) -> Option<Polarization> {
    let fired = |b: Basis| b.members().map(|p| clicks[p.index()]);
    let [a0, a1] = fired(alice_basis);
    let [o0, o1] = fired(alice_basis.other());
    if o0 || o1 {
        return None;
    }
    let [m0, m1] = alice_basis.members();
    match (a0, a1) {
        (false, false) => None,
        (true, false) => Some(m0),
        (false, true) => Some(m1),
        (true, true) => Some(if rng.random::<bool>() { m0 } else { m1 }),
    }
}

struct Pulser {
    alice: Option<Poisson<f64>>,
    transmittance: f64,
    baseline_eff: ChannelEffVector,
    attack: Option<Attack>,
}

struct Attack {
    strategy: EveStrategy,
    resend: [Option<Poisson<f64>>; 4],
    eff_abs: [ChannelEffVector; 4],
}

fn poisson_dist(mean: f64) -> Option<Poisson<f64>> {
    (mean > 0.0).then(|| Poisson::new(mean).ok()).flatten()
}

impl Pulser {
    fn new(config: &TrialConfig) -> Result<Self> {
        let attack = match &config.scenario {
            Scenario::BaselineNoEve => None,
            Scenario::FakedStateAttack(s) => {
                let mut eff_abs = s.attack_eff;
                for (e, src) in eff_abs.iter_mut().zip(&s.attack_eff) {
                    *e = src.scaled(config.receiver.eta_det())?;
                }
                Some(Attack {
                    strategy: *s,
                    resend: s.mu.map(poisson_dist),
                    eff_abs,
                })
            }
        };
        Ok(Self {
            alice: poisson_dist(config.link.mu_alice()),
            transmittance: config.link.transmittance(),
            baseline_eff: ChannelEffVector::uniform(config.receiver.eta_det())?,
            attack,
        })
    }

    /// Eve's active-basis measurement of `n` photons. Returns the resent
    /// polarization on a single click.
    fn eve_measure<R: Rng>(rng: &mut R, n: u64, sent: Polarization, strategy: &EveStrategy, fidelity: f64) -> Option<Polarization> {
        let basis = if rng.random::<bool>() { Basis::HV } else { Basis::DA };
        let [d0, d1] = basis.members();
        let to_d0 = if basis == sent.basis() {
            if sent == d0 {
                fidelity
            } else {
                1.0 - fidelity
            }
        } else {
            0.5
        };
        let eta = strategy.eve.eta_e();
        let (mut k0, mut k1) = (false, false);
        for _ in 0..n {
            let first = rng.random::<f64>() < to_d0;
            if rng.random::<f64>() < eta {
                if first {
                    k0 = true;
                } else {
                    k1 = true;
                }
            }
        }
        let dark = strategy.eve.dark();
        if dark > 0.0 {
            k0 |= rng.random::<f64>() < dark;
            k1 |= rng.random::<f64>() < dark;
        }
        match (k0, k1) {
            (true, false) => Some(d0),
            (false, true) => Some(d1),
            _ => None,
        }
    }

    fn pulse<R: Rng>(&self, rng: &mut R, config: &TrialConfig, stats: &mut TrialStats) {
        let alice = Polarization::ALL[rng.random_range(0..4)];
        let n = poisson(rng, &self.alice);
        let clicks = match &self.attack {
            None => {
                let arriving = (0..n).filter(|_| rng.random::<f64>() < self.transmittance).count() as u64;
                sample_bob_clicks(rng, arriving, alice, &self.baseline_eff, &config.receiver, config.link.fidelity_ab())
            }
            Some(att) => {
                let resent = Self::eve_measure(rng, n, alice, &att.strategy, config.link.fidelity_ab());
                match resent {
                    Some(pol) => {
                        stats.resends += 1;
                        let j = pol.index();
                        let m = poisson(rng, &att.resend[j]);
                        sample_bob_clicks(rng, m, pol, &att.eff_abs[j], &config.receiver, config.link.fidelity_eb())
                    }
                    None => sample_bob_clicks(rng, 0, alice, &self.baseline_eff, &config.receiver, 1.0),
                }
            }
        };
        let j = alice.index();
        stats.n_pulses += 1;
        stats.sent[j] += 1;
        for (c, hit) in stats.clicks.iter_mut().zip(clicks) {
            *c += hit as u64;
        }
        if let Some(bit) = squash(rng, &clicks, alice.basis()) {
            stats.sifted[j] += 1;
            if bit != alice {
                stats.errors[j] += 1;
            }
        }
    }
}

/// Simulates `config.n_pulses` pulses. Identical configs give identical
/// tallies on any number of threads.
pub fn run_trials(config: &TrialConfig) -> Result<TrialStats> {
    config.validate()?;
    let pulser = Pulser::new(config)?;
    let n_shards = config.n_pulses.div_ceil(SHARD_PULSES);
    let empty = TrialStats {
        attack: pulser.attack.is_some(),
        ..Default::default()
    };
    let stats = (0..n_shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(shard);
            let start = shard * SHARD_PULSES;
            let count = SHARD_PULSES.min(config.n_pulses - start);
            let mut s = empty;
            for _ in 0..count {
                pulser.pulse(&mut rng, config, &mut s);
            }
            s
        })
        .reduce(|| empty, TrialStats::merge);
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub quantity: String,
    pub analytic: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// `None` when the standard error is zero: too few events to judge.
    pub z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub kind: ScenarioKind,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    /// True iff every row with data lies within `sigmas` standard errors.
    pub fn passes(&self, sigmas: f64) -> bool {
        self.rows.iter().all(|r| !matches!(r.z, Some(z) if z.abs() > sigmas))
    }

    pub fn max_abs_z(&self) -> f64 {
        self.rows.iter().filter_map(|r| r.z).fold(0.0, |m, z| m.max(z.abs()))
    }

    pub fn insufficient(&self) -> impl Iterator<Item = &ComparisonRow> {
        self.rows.iter().filter(|r| r.z.is_none())
    }

    pub fn write_csv<W: Write>(&self, header: &[String], w: &mut W) -> Result<()> {
        for line in header {
            for part in line.lines() {
                writeln!(w, "# {part}")?;
            }
        }
        writeln!(w, "{COMPARISON_COLUMNS}")?;
        self.write_rows("", w)
    }

    /// Data rows only, each quantity name prefixed with `prefix`. Lets
    /// several comparisons share one file.
    pub fn write_rows<W: Write>(&self, prefix: &str, w: &mut W) -> Result<()> {
        for r in &self.rows {
            write!(w, "{prefix}{},{},{},{},", r.quantity, r.analytic, r.estimate, r.stderr)?;
            match r.z {
                Some(z) => writeln!(w, "{z}")?,
                None => writeln!(w, "insufficient")?,
            }
        }
        Ok(())
    }
}

/// z-scores of every simulated quantity against the closed-form report.
pub fn compare_to_analytic(stats: &TrialStats, report: &RateReport) -> Result<Comparison> {
    if stats.kind() != report.kind {
        return Err(Error::ScenarioMismatch {
            report: report.kind.as_str(),
            trials: stats.kind().as_str(),
        });
    }
    let row = |quantity: String, analytic: f64, est: Estimate| ComparisonRow {
        quantity,
        analytic,
        estimate: est.value,
        stderr: est.stderr,
        z: (est.stderr > 0.0).then(|| (est.value - analytic) / est.stderr),
    };
    let mut rows = Vec::with_capacity(10);
    for pol in Polarization::ALL {
        rows.push(row(format!("R_{pol}"), report.rate[pol.index()], stats.rate(pol)));
    }
    for pol in Polarization::ALL {
        rows.push(row(format!("E_{pol}"), report.error[pol.index()], stats.error(pol)));
    }
    rows.push(row("R".into(), report.total_rate, stats.total_rate()));
    rows.push(row("QBER".into(), report.qber, stats.qber()));
    Ok(Comparison {
        kind: report.kind,
        rows,
    })
}
