//! Eve's choice of per-polarization mean photon numbers.
//!
//! Two rate-matching regimes are supported:
//!
//! - [`RateMatching::TotalRate`]: minimize QBER while Bob's total sifted
//!   rate equals the no-Eve rate ([`optimize_mode_a`]).
//! - [`RateMatching::PerPolarizationRates`]: all four conditional sifted
//!   rates equal their no-Eve values. Four equations in four unknowns leave
//!   no objective freedom; the system is solved directly
//!   ([`optimize_mode_b`]).
//!
//! All searches run in `ln(mu)` with bounds `[mu_min, mu_max]`.

mod penalty;
mod rate_match;
pub mod simplex;
mod sweep;

pub use penalty::optimize_mode_a;
pub use rate_match::{match_conditional_rates, optimize_mode_b, RateMatch};
pub use sweep::{sweep_loss, write_sweep_csv, AttackOutcome, SweepInputs, SweepRecord, SWEEP_COLUMNS};

use crate::error::{Error, Result};
use crate::model::{ChannelEffVector, EveDetectorModel, LinkModel, ReceiverModel};
use crate::rates::{baseline_no_eve, totals_with_eve, EveStrategy, RateReport};
use crate::scanmap::AttackPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMatching {
    /// Match the total sifted rate only.
    TotalRate,
    /// Match each conditional sifted rate.
    PerPolarizationRates,
}

impl RateMatching {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::TotalRate => "total",
            Self::PerPolarizationRates => "perpol",
        }
    }
}

impl std::str::FromStr for RateMatching {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "total" | "a" | "A" => Ok(Self::TotalRate),
            "perpol" | "b" | "B" => Ok(Self::PerPolarizationRates),
            other => Err(format!("unknown mode `{other}` (expected total or perpol)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub mode: RateMatching,
    pub mu_min: f64,
    pub mu_max: f64,
    /// Relative rate-matching tolerance.
    pub constraint_tol: f64,
    /// Relative objective tolerance of the simplex search.
    pub objective_tol: f64,
    pub max_iterations: usize,
    /// Randomized starting points in addition to the rate-matched start.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            mode: RateMatching::TotalRate,
            mu_min: 1e-6,
            mu_max: 1e6,
            constraint_tol: 1e-4,
            objective_tol: 1e-6,
            max_iterations: 10_000,
            restarts: 8,
            seed: 1,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("mu_min", self.mu_min),
            ("mu_max", self.mu_max),
            ("constraint_tol", self.constraint_tol),
            ("objective_tol", self.objective_tol),
        ];
        for (what, v) in checks {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain { what, value: v });
            }
        }
        if self.mu_min >= self.mu_max {
            return Err(Error::Domain {
                what: "mu_max",
                value: self.mu_max,
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::Domain {
                what: "max_iterations",
                value: 0.0,
            });
        }
        Ok(())
    }

    pub(crate) fn log_bounds(&self) -> (f64, f64) {
        (self.mu_min.ln(), self.mu_max.ln())
    }
}

/// Everything fixed while Eve tunes her mean photon numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackProblem {
    pub attack_eff: [ChannelEffVector; 4],
    pub eve: EveDetectorModel,
    pub link: LinkModel,
    pub receiver: ReceiverModel,
}

impl AttackProblem {
    pub fn new(
        attack_eff: [ChannelEffVector; 4],
        eve: EveDetectorModel,
        link: LinkModel,
        receiver: ReceiverModel,
    ) -> Self {
        Self {
            attack_eff,
            eve,
            link,
            receiver,
        }
    }

    pub fn from_attack_points(
        points: &[AttackPoint; 4],
        eve: EveDetectorModel,
        link: LinkModel,
        receiver: ReceiverModel,
    ) -> Self {
        Self::new(points.map(|p| p.eff), eve, link, receiver)
    }

    pub fn strategy(&self, mu: [f64; 4]) -> Result<EveStrategy> {
        EveStrategy::new(mu, self.attack_eff, self.eve)
    }

    pub fn evaluate(&self, mu: [f64; 4]) -> Result<RateReport> {
        totals_with_eve(&self.strategy(mu)?, &self.link, &self.receiver)
    }

    pub fn baseline(&self) -> Result<RateReport> {
        baseline_no_eve(&self.link, &self.receiver)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    /// No admissible `mu` reaches the target rate(s).
    Infeasible,
    /// Iteration budget exhausted or progress stalled above tolerance.
    NotConverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub mode: RateMatching,
    pub mu: [f64; 4],
    /// Rates and QBER at `mu`.
    pub report: RateReport,
    /// No-Eve rates the attack has to reproduce.
    pub target: RateReport,
    /// Relative constraint residuals: one for the total rate, or one per
    /// polarization.
    pub residuals: Vec<f64>,
    pub status: Status,
    pub iterations: usize,
}

impl OptimizationResult {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn qber(&self) -> f64 {
        self.report.qber
    }
}

/// Relative residual `R_e/R_ab - 1`.
pub(crate) fn relative(achieved: f64, target: f64) -> f64 {
    achieved / target - 1.0
}

fn clamp_ln(x: f64, bounds: (f64, f64)) -> f64 {
    x.clamp(bounds.0, bounds.1)
}

/// Linear-regime guess: the resend needed for the compatible-correct term
/// alone to supply `target` per Eve click.
pub(crate) fn diagonal_guess(problem: &AttackProblem, targets: [f64; 4], config: &OptimizerConfig) -> Result<[f64; 4]> {
    let eve = crate::model::eve_measurement_probs(problem.link.mu_alice(), problem.link.fidelity_ab(), &problem.eve)?;
    let bounds = config.log_bounds();
    let mut mu = [1.0; 4];
    for pol in crate::model::Polarization::ALL {
        let j = pol.index();
        let gain = eve.p_compatible_correct
            * problem.link.fidelity_eb()
            * problem.receiver.eta_det()
            * problem.attack_eff[j].get(pol)
            / 2.0;
        if gain > 0.0 && targets[j] > 0.0 {
            mu[j] = clamp_ln((targets[j] / gain).ln(), bounds).exp();
        }
    }
    Ok(mu)
}
