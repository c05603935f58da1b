//! Damped Newton solve of `R_e(j) = target_j` in `ln(mu)`.

use super::{diagonal_guess, relative, AttackProblem, OptimizationResult, OptimizerConfig, RateMatching, Status};
use crate::error::Result;

/// Residuals below this are treated as solved; the caller's tolerance only
/// decides the reported status.
const INNER_TOL: f64 = 1e-13;
const FD_STEP: f64 = 1e-6;
const MAX_STEP: f64 = 2.0;
const MAX_NEWTON: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct RateMatch {
    pub mu: [f64; 4],
    /// `R_e(j)/target_j - 1`, zero for unconstrained entries.
    pub residuals: [f64; 4],
    pub iterations: usize,
    pub status: Status,
}

impl RateMatch {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

struct System<'a> {
    problem: &'a AttackProblem,
    targets: [Option<f64>; 4],
    active: Vec<usize>,
    base: [f64; 4],
}

impl System<'_> {
    fn mu_at(&self, x: &[f64]) -> [f64; 4] {
        let mut mu = self.base;
        for (&j, v) in self.active.iter().zip(x) {
            mu[j] = v.exp();
        }
        mu
    }

    fn residuals(&self, x: &[f64]) -> Result<Vec<f64>> {
        let report = self.problem.evaluate(self.mu_at(x))?;
        Ok(self
            .active
            .iter()
            .map(|&j| relative(report.rate[j], self.targets[j].unwrap_or(f64::NAN)))
            .collect())
    }

    fn jacobian(&self, x: &[f64], bounds: (f64, f64)) -> Result<Vec<Vec<f64>>> {
        let n = x.len();
        let mut jac = vec![vec![0.0; n]; n];
        for k in 0..n {
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[k] = (x[k] + FD_STEP).min(bounds.1);
            dn[k] = (x[k] - FD_STEP).max(bounds.0);
            let (ru, rd) = (self.residuals(&up)?, self.residuals(&dn)?);
            let h = up[k] - dn[k];
            for i in 0..n {
                jac[i][k] = (ru[i] - rd[i]) / h;
            }
        }
        Ok(jac)
    }
}

fn norm2(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Gaussian elimination with partial pivoting. `None` if singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let pivot = a[col].clone();
        for row in col + 1..n {
            let f = a[row][col] / pivot[col];
            for (dst, src) in a[row][col..].iter_mut().zip(&pivot[col..]) {
                *dst -= f * src;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Solves `R_e(j) = targets[j]` for every `Some` target, holding the other
/// entries of `start` fixed. Targets must be positive.
pub fn match_conditional_rates(
    problem: &AttackProblem,
    targets: [Option<f64>; 4],
    start: [f64; 4],
    config: &OptimizerConfig,
) -> Result<RateMatch> {
    config.validate()?;
    for &t in targets.iter().flatten() {
        if !(t > 0.0 && t.is_finite()) {
            return Err(crate::error::Error::Domain {
                what: "target rate",
                value: t,
            });
        }
    }
    let bounds = config.log_bounds();
    let active: Vec<usize> = (0..4).filter(|&j| targets[j].is_some()).collect();
    let sys = System {
        problem,
        targets,
        active,
        base: start,
    };
    let mut x: Vec<f64> = sys
        .active
        .iter()
        .map(|&j| start[j].max(config.mu_min).ln().clamp(bounds.0, bounds.1))
        .collect();
    let mut r = sys.residuals(&x)?;
    let mut f = norm2(&r);
    let mut iterations = 0;
    let limit = config.max_iterations.min(MAX_NEWTON);

    while iterations < limit && r.iter().any(|v| v.abs() > INNER_TOL) {
        iterations += 1;
        let jac = sys.jacobian(&x, bounds)?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut step = match solve(jac.clone(), rhs) {
            Some(s) => s,
            // Steepest descent on |r|^2 when the Jacobian is singular.
            None => (0..x.len())
                .map(|k| -(0..x.len()).map(|i| jac[i][k] * r[i]).sum::<f64>())
                .collect(),
        };
        let longest = step.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if longest > MAX_STEP {
            step.iter_mut().for_each(|v| *v *= MAX_STEP / longest);
        }

        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-8 {
            let trial: Vec<f64> = x
                .iter()
                .zip(&step)
                .map(|(a, s)| (a + t * s).clamp(bounds.0, bounds.1))
                .collect();
            let r_trial = sys.residuals(&trial)?;
            let f_trial = norm2(&r_trial);
            if f_trial < f {
                x = trial;
                r = r_trial;
                f = f_trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let mu = sys.mu_at(&x);
    let mut residuals = [0.0; 4];
    for (&j, v) in sys.active.iter().zip(&r) {
        residuals[j] = *v;
    }
    let worst = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let status = if worst <= config.constraint_tol {
        Status::Converged
    } else if sys.active.iter().zip(&x).zip(&r).any(|((_, xi), ri)| {
        (*xi >= bounds.1 && *ri < 0.0) || (*xi <= bounds.0 && *ri > 0.0)
    }) {
        Status::Infeasible
    } else {
        Status::NotConverged
    };
    Ok(RateMatch {
        mu,
        residuals,
        iterations,
        status,
    })
}

/// Matches every conditional sifted rate to its no-Eve value.
pub fn optimize_mode_b(problem: &AttackProblem, config: &OptimizerConfig) -> Result<OptimizationResult> {
    config.validate()?;
    let target = problem.baseline()?;
    let start = diagonal_guess(problem, target.rate, config)?;
    let m = match_conditional_rates(problem, target.rate.map(Some), start, config)?;
    Ok(OptimizationResult {
        mode: RateMatching::PerPolarizationRates,
        mu: m.mu,
        report: problem.evaluate(m.mu)?,
        target,
        residuals: m.residuals.to_vec(),
        status: m.status,
        iterations: m.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use crate::model::Polarization;

    #[test]
    fn matches_all_rates_on_symmetric_map() {
        for loss in [3.0, 9.0, 15.0] {
            let problem = symmetric_problem(loss);
            let res = optimize_mode_b(&problem, &OptimizerConfig::default()).unwrap();
            assert!(res.converged(), "{loss} dB: {res:?}");
            assert!(res.max_residual() < 1e-10);
            for j in 1..4 {
                assert!((res.mu[j] / res.mu[0] - 1.0).abs() < 1e-8, "{:?}", res.mu);
            }
        }
    }

    /// Single unknown: a bisection on the one free `mu` is an independent oracle.
    #[test]
    fn single_rate_agrees_with_bisection() {
        let problem = symmetric_problem(8.0);
        let config = OptimizerConfig::default();
        let target = problem.baseline().unwrap().rate[0];
        let fixed = [1.0, 0.7, 0.4, 0.2];
        let mut targets = [None; 4];
        targets[Polarization::H.index()] = Some(target);
        let m = match_conditional_rates(&problem, targets, fixed, &config).unwrap();
        assert_eq!(m.status, Status::Converged);

        let rate_h = |mu: f64| {
            let mut v = fixed;
            v[0] = mu;
            problem.evaluate(v).unwrap().rate[0] - target
        };
        let (mut lo, mut hi) = (1e-6_f64, 1.0_f64);
        assert!(rate_h(lo) < 0.0 && rate_h(hi) > 0.0);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if rate_h(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((m.mu[0] / lo - 1.0).abs() < 1e-9, "{} vs {}", m.mu[0], lo);
        assert_eq!(&m.mu[1..], &fixed[1..]);
    }

    #[test]
    fn unreachable_target_is_infeasible() {
        let problem = symmetric_problem(3.0);
        let config = OptimizerConfig {
            mu_max: 1e-3,
            ..Default::default()
        };
        let m = match_conditional_rates(&problem, [Some(0.5); 4], [1e-4; 4], &config).unwrap();
        assert_eq!(m.status, Status::Infeasible);
    }

    #[test]
    fn solver_handles_singular_system() {
        assert_eq!(solve(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 1.0]), None);
        let x = solve(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![2.0, 3.0]).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
    }
}
