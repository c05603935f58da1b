use std::io::Write;

use rayon::prelude::*;

use super::{optimize_mode_a, optimize_mode_b, AttackProblem, OptimizationResult, OptimizerConfig, RateMatching};
use crate::error::Result;
use crate::model::{ChannelEffVector, EveDetectorModel, LinkModel, ReceiverModel};
use crate::rates::{baseline_no_eve, RateReport};

/// Loss-independent parts of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepInputs {
    /// `None` when the map has no complete set of attack points.
    pub attack_eff: Option<[ChannelEffVector; 4]>,
    pub eve: EveDetectorModel,
    /// Used for its fidelities; the loss is replaced per sweep point.
    pub link: LinkModel,
    pub receiver: ReceiverModel,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackOutcome {
    Solved(Box<OptimizationResult>),
    NoAttack,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub loss_db: f64,
    pub baseline: RateReport,
    pub attack: AttackOutcome,
}

/// Baseline and optimized attack at each loss. Points are independent and
/// run in parallel; the output order follows `losses`.
pub fn sweep_loss(inputs: &SweepInputs, losses: &[f64], config: &OptimizerConfig) -> Result<Vec<SweepRecord>> {
    config.validate()?;
    losses
        .par_iter()
        .map(|&loss_db| {
            let link = LinkModel::new(loss_db, inputs.link.fidelity_ab(), inputs.link.fidelity_eb())?;
            let baseline = baseline_no_eve(&link, &inputs.receiver)?;
            let attack = match inputs.attack_eff {
                None => AttackOutcome::NoAttack,
                Some(eff) => {
                    let problem = AttackProblem::new(eff, inputs.eve, link, inputs.receiver);
                    AttackOutcome::Solved(Box::new(match config.mode {
                        RateMatching::TotalRate => optimize_mode_a(&problem, config)?,
                        RateMatching::PerPolarizationRates => optimize_mode_b(&problem, config)?,
                    }))
                }
            };
            Ok(SweepRecord {
                loss_db,
                baseline,
                attack,
            })
        })
        .collect()
}

pub const SWEEP_COLUMNS: &str = "loss_db,R_ab,QBER_ab,R_e,QBER_e,mu_H,mu_V,mu_D,mu_A,residual,converged";

/// One row per record; attack columns are `nan` and `converged=false` when
/// there was nothing to attack.
pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], header: &[String], w: &mut W) -> Result<()> {
    for line in header {
        for part in line.lines() {
            writeln!(w, "# {part}")?;
        }
    }
    writeln!(w, "{SWEEP_COLUMNS}")?;
    for r in records {
        write!(w, "{},{},{},", r.loss_db, r.baseline.total_rate, r.baseline.qber)?;
        match &r.attack {
            AttackOutcome::Solved(s) => writeln!(
                w,
                "{},{},{},{},{},{},{:e},{}",
                s.report.total_rate,
                s.report.qber,
                s.mu[0],
                s.mu[1],
                s.mu[2],
                s.mu[3],
                s.max_residual(),
                s.converged()
            )?,
            AttackOutcome::NoAttack => writeln!(w, "nan,nan,nan,nan,nan,nan,nan,false")?,
        }
    }
    Ok(())
}
