//! Minimum-QBER search under total-rate matching.
//!
//! Exterior quadratic penalty with increasing weight, each stage a
//! Nelder-Mead run warm-started from the previous one. The result of each
//! start is then projected onto the constraint by a common rescaling of all
//! four `mu`, so accepted candidates meet the rate target to bisection
//! precision rather than to penalty precision.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::simplex::{minimize, SimplexOptions};
use super::{
    optimize_mode_b, relative, AttackProblem, OptimizationResult, OptimizerConfig, RateMatching, Status,
};
use crate::error::Result;

const PENALTY_STAGES: [f64; 4] = [1e2, 1e4, 1e6, 1e8];
const RESTART_SPREAD: f64 = 2.0;

struct Candidate {
    mu: [f64; 4],
    qber: f64,
    residual: f64,
}

fn total_residual(problem: &AttackProblem, mu: [f64; 4], target: f64) -> Result<f64> {
    Ok(relative(problem.evaluate(mu)?.total_rate, target))
}

fn scaled(mu: [f64; 4], s: f64, config: &OptimizerConfig) -> [f64; 4] {
    mu.map(|m| (m * s.exp()).clamp(config.mu_min, config.mu_max))
}

/// Finds `s` with `R_e(mu * e^s) = target` by bracketing and bisection.
/// Returns `None` if no sign change is found inside the bounds.
fn project(problem: &AttackProblem, mu: [f64; 4], target: f64, config: &OptimizerConfig) -> Result<Option<[f64; 4]>> {
    let g = |s: f64| total_residual(problem, scaled(mu, s, config), target);
    let g0 = g(0.0)?;
    if g0 == 0.0 {
        return Ok(Some(mu));
    }
    let span = (config.mu_max / config.mu_min).ln();
    let dir = if g0 < 0.0 { 1.0 } else { -1.0 };
    let (mut a, mut b) = (0.0, 0.0);
    let mut step = 0.25;
    let mut found = false;
    while step <= 2.0 * span {
        b = dir * step;
        if g(b)?.signum() != g0.signum() {
            found = true;
            break;
        }
        a = b;
        step *= 2.0;
    }
    if !found {
        return Ok(None);
    }
    let ga = g(a)?;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        let gm = g(mid)?;
        if gm.signum() == ga.signum() {
            a = mid;
        } else {
            b = mid;
        }
    }
    // Whichever end is closer to the target.
    let (ra, rb) = (g(a)?.abs(), g(b)?.abs());
    Ok(Some(scaled(mu, if ra <= rb { a } else { b }, config)))
}

/// Minimizes the attacked QBER subject to `|R_e/R_ab - 1| <= constraint_tol`.
///
/// The per-polarization rate-matched point is always a candidate, so the
/// result never has a higher QBER than [`optimize_mode_b`] when that
/// converges.
pub fn optimize_mode_a(problem: &AttackProblem, config: &OptimizerConfig) -> Result<OptimizationResult> {
    config.validate()?;
    let target = problem.baseline()?;
    let r_ab = target.total_rate;
    let bounds = config.log_bounds();
    let lo = [bounds.0; 4];
    let hi = [bounds.1; 4];

    let warm = optimize_mode_b(problem, config)?;
    let mut starts = vec![warm.mu.map(f64::ln)];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.restarts {
        starts.push(starts[0].map(|x| (x + rng.random_range(-RESTART_SPREAD..=RESTART_SPREAD)).clamp(bounds.0, bounds.1)));
    }

    let mut candidates = Vec::new();
    if warm.status != Status::Infeasible {
        candidates.push(Candidate {
            mu: warm.mu,
            qber: warm.report.qber,
            residual: total_residual(problem, warm.mu, r_ab)?,
        });
    }
    let mut iterations = warm.iterations;
    let mut failure = None;

    for x0 in starts {
        let mut x = x0.to_vec();
        for (stage, &rho) in PENALTY_STAGES.iter().enumerate() {
            let objective = |v: &[f64]| {
                let mu = [v[0].exp(), v[1].exp(), v[2].exp(), v[3].exp()];
                match problem.evaluate(mu) {
                    Ok(rep) => {
                        let c = relative(rep.total_rate, r_ab);
                        rep.qber + rho * c * c
                    }
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::INFINITY
                    }
                }
            };
            let opts = SimplexOptions {
                step: if stage == 0 { 0.5 } else { 0.1 },
                ftol: config.objective_tol,
                f_floor: 1e-9,
                xtol: 1e-9,
                max_iterations: config.max_iterations,
            };
            let res = minimize(objective, &x, &lo, &hi, &opts);
            iterations += res.iterations;
            x = res.x;
        }
        let mu = [x[0].exp(), x[1].exp(), x[2].exp(), x[3].exp()];
        if let Some(p) = project(problem, mu, r_ab, config)? {
            candidates.push(Candidate {
                mu: p,
                qber: problem.evaluate(p)?.qber,
                residual: total_residual(problem, p, r_ab)?,
            });
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }

    let best = candidates
        .iter()
        .filter(|c| c.residual.abs() <= config.constraint_tol)
        .min_by(|a, b| a.qber.total_cmp(&b.qber));
    let (mu, residual, status) = match best {
        Some(c) => (c.mu, c.residual, Status::Converged),
        None => {
            let closest = candidates.iter().min_by(|a, b| a.residual.abs().total_cmp(&b.residual.abs()));
            let status = if warm.status == Status::Infeasible {
                Status::Infeasible
            } else {
                Status::NotConverged
            };
            match closest {
                Some(c) => (c.mu, c.residual, status),
                None => (warm.mu, total_residual(problem, warm.mu, r_ab)?, status),
            }
        }
    };
    Ok(OptimizationResult {
        mode: RateMatching::TotalRate,
        mu,
        report: problem.evaluate(mu)?,
        target,
        residuals: vec![residual],
        status,
        iterations,
    })
}
