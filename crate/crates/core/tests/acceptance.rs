//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fail.

use std::process::ExitCode;
use std::time::Instant;

use mismatch_core::montecarlo::{compare_to_analytic, run_trials, Scenario, TrialConfig};
use mismatch_core::optimizer::{match_conditional_rates, sweep_loss, write_sweep_csv, SweepInputs};
use mismatch_core::scanmap::{
    find_attack_points, mismatch_ratio, pinhole_filter, synthesize_scan, write_map_csv, AttackPoint, EfficiencyMap,
    GridSpec, ScanPreset, SearchThresholds,
};
use mismatch_core::{
    baseline_no_eve, optimize_mode_a, optimize_mode_b, squashed_basis_prob, squashed_value_prob, AttackProblem,
    Basis, ChannelEffVector, ClickProbs, EveDetectorModel, LinkModel, OptimizerConfig, Polarization, RateMatching,
    ReceiverModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRESET_SEED: u64 = 1;
const ATTACK_LOSSES_DB: std::ops::RangeInclusive<u32> = 3..=15;
const MODE_A_MARGIN: f64 = 0.007;
const MODE_B_RESIDUAL: f64 = 1e-4;
const MODE_B_QBER_LIMIT: f64 = 0.0682;
const FIDELITY_LIMIT_TOL: f64 = 0.0005;
const MC_PULSES: u64 = 10_000_000;
const MC_SIGMAS: f64 = 3.0;
const PINHOLE_FOV_URAD: f64 = 100.0;
const PINHOLE_EDGE_URAD: f64 = 10.0;
const DECOMPOSITION_TOL: f64 = 4.0 * f64::EPSILON;
const SCALE_TOL: f64 = 1e-12;
const SYMMETRIC_MU_TOL: f64 = 1e-8;
const SCALAR_TOL: f64 = 1e-6;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn attack_points() -> [AttackPoint; 4] {
    let map = synthesize_scan(&ScanPreset::paper_like(), PRESET_SEED).expect("preset");
    find_attack_points(&map, &SearchThresholds::paper())
        .complete()
        .expect("paper-like preset has attack points for every polarization")
}

fn problem_at(points: &[AttackPoint; 4], loss_db: f64) -> AttackProblem {
    AttackProblem::from_attack_points(
        points,
        EveDetectorModel::default(),
        LinkModel::with_loss(loss_db).expect("loss"),
        ReceiverModel::default(),
    )
}

fn mode_a_viability() -> Outcome {
    let points = attack_points();
    let mut worst = f64::NEG_INFINITY;
    for loss in ATTACK_LOSSES_DB {
        let r = optimize_mode_a(&problem_at(&points, loss as f64), &OptimizerConfig::default()).map_err(|e| e.to_string())?;
        if !r.converged() {
            return Err(format!("{loss} dB: {:?}", r.status));
        }
        let excess = r.qber() - r.target.qber;
        if excess > MODE_A_MARGIN {
            return Err(format!("{loss} dB: QBER_e {:.4}% vs QBER_ab {:.4}%", r.qber() * 100.0, r.target.qber * 100.0));
        }
        worst = worst.max(excess);
    }
    Ok(format!("max QBER_e - QBER_ab = {:+.4} pp", worst * 100.0))
}

fn mode_b_viability() -> Outcome {
    let points = attack_points();
    let (mut worst_res, mut worst_qber) = (0.0_f64, 0.0_f64);
    for loss in ATTACK_LOSSES_DB {
        let r = optimize_mode_b(&problem_at(&points, loss as f64), &OptimizerConfig::default()).map_err(|e| e.to_string())?;
        if !(r.converged() && r.max_residual() <= MODE_B_RESIDUAL && r.qber() < MODE_B_QBER_LIMIT) {
            return Err(format!("{loss} dB: {:?} residual {:.2e} QBER {:.4}%", r.status, r.max_residual(), r.qber() * 100.0));
        }
        worst_res = worst_res.max(r.max_residual());
        worst_qber = worst_qber.max(r.qber());
    }
    Ok(format!("max residual {worst_res:.1e}, max QBER_e {:.4}%", worst_qber * 100.0))
}

fn baseline_limits() -> Outcome {
    let link = LinkModel::with_loss(0.01).map_err(|e| e.to_string())?;
    let quiet = ReceiverModel::default().without_background();
    let q = baseline_no_eve(&link, &quiet).map_err(|e| e.to_string())?.qber;
    let limit = 1.0 - link.fidelity_ab();
    if (q - limit).abs() > FIDELITY_LIMIT_TOL {
        return Err(format!("QBER_ab {q} vs 1 - F = {limit}"));
    }
    let mut prev = f64::NEG_INFINITY;
    for tenth_db in 150..=400 {
        let loss = tenth_db as f64 / 10.0;
        let link = LinkModel::with_loss(loss).map_err(|e| e.to_string())?;
        let qber = baseline_no_eve(&link, &ReceiverModel::default()).map_err(|e| e.to_string())?.qber;
        if qber <= prev {
            return Err(format!("QBER_ab not increasing at {loss} dB"));
        }
        prev = qber;
    }
    Ok(format!("low-loss QBER_ab {:.4}%, increasing 15-40 dB up to {:.2}%", q * 100.0, prev * 100.0))
}

fn oracle_agreement() -> Outcome {
    let receiver = ReceiverModel::default();
    let mut worst = 0.0_f64;
    let mut runs = Vec::new();
    for loss in [3.0, 9.0, 15.0] {
        let link = LinkModel::with_loss(loss).map_err(|e| e.to_string())?;
        let report = baseline_no_eve(&link, &receiver).map_err(|e| e.to_string())?;
        runs.push((format!("baseline {loss} dB"), link, Scenario::BaselineNoEve, report));
    }
    let problem = problem_at(&attack_points(), 6.0);
    let b = optimize_mode_b(&problem, &OptimizerConfig::default()).map_err(|e| e.to_string())?;
    let strategy = problem.strategy(b.mu).map_err(|e| e.to_string())?;
    runs.push(("mode B 6 dB".into(), problem.link, Scenario::FakedStateAttack(strategy), b.report));

    for (i, (name, link, scenario, report)) in runs.into_iter().enumerate() {
        let config = TrialConfig {
            n_pulses: MC_PULSES,
            seed: 1000 + i as u64,
            link,
            receiver,
            scenario,
        };
        let stats = run_trials(&config).map_err(|e| e.to_string())?;
        let cmp = compare_to_analytic(&stats, &report).map_err(|e| e.to_string())?;
        if cmp.insufficient().count() > 0 || !cmp.passes(MC_SIGMAS) {
            return Err(format!("{name}: max |z| = {:.2}", cmp.max_abs_z()));
        }
        worst = worst.max(cmp.max_abs_z());
    }
    Ok(format!("4 scenarios x 10 quantities, max |z| = {worst:.2}"))
}

fn countermeasure() -> Outcome {
    let map = synthesize_scan(&ScanPreset::paper_like(), PRESET_SEED).map_err(|e| e.to_string())?;
    let filtered = pinhole_filter(&map, PINHOLE_FOV_URAD, PINHOLE_EDGE_URAD).map_err(|e| e.to_string())?;
    let after = find_attack_points(&filtered, &SearchThresholds::tight());
    if !after.is_empty() {
        return Err(format!("{} qualifying cells after the pinhole", after.qualifying_count()));
    }
    let before = find_attack_points(&map, &SearchThresholds::paper());
    if Polarization::ALL.iter().any(|p| before.best_for(*p).is_none()) {
        return Err("unfiltered map lacks an attack point".into());
    }
    Ok(format!("{} qualifying cells before, 0 after", before.qualifying_count()))
}

fn random_grid() -> GridSpec {
    GridSpec {
        phi_min: -0.2,
        phi_max: 0.2,
        theta_min: -0.2,
        theta_max: 0.2,
        n_phi: 5,
        n_theta: 5,
    }
}

fn identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    let mut worst = 0.0_f64;
    for _ in 0..10_000 {
        let p = ClickProbs::new([rng.random(), rng.random(), rng.random(), rng.random()]).map_err(|e| e.to_string())?;
        for basis in [Basis::HV, Basis::DA] {
            let [a, b] = basis.members();
            let gap = (squashed_value_prob(&p, a) + squashed_value_prob(&p, b) - squashed_basis_prob(&p, basis)).abs();
            worst = worst.max(gap);
        }
    }
    if worst > DECOMPOSITION_TOL {
        return Err(format!("decomposition gap {worst:e}"));
    }

    let grid = random_grid();
    for _ in 0..1_000 {
        let cells: Vec<[f64; 4]> = (0..grid.len())
            .map(|_| [rng.random(), rng.random(), rng.random(), rng.random()])
            .collect();
        let k: f64 = rng.random_range(1e-3..1.0);
        let scaled: Vec<[f64; 4]> = cells.iter().map(|c| c.map(|v| v * k)).collect();
        for (c, s) in cells.iter().zip(&scaled) {
            for pol in Polarization::ALL {
                let (d0, d1) = (mismatch_ratio(c, pol), mismatch_ratio(s, pol));
                if d0.is_finite() && ((d1 - d0) / d0).abs() > SCALE_TOL {
                    return Err(format!("delta {d0} became {d1} under scaling by {k}"));
                }
            }
        }
        let m0 = EfficiencyMap::new(grid, cells).map_err(|e| e.to_string())?;
        let m1 = EfficiencyMap::new(grid, scaled).map_err(|e| e.to_string())?;
        let t = SearchThresholds::paper();
        let idx = |m: &EfficiencyMap| {
            find_attack_points(m, &t)
                .candidates
                .map(|v| v.iter().map(|p| p.index).collect::<Vec<_>>())
        };
        if idx(&m0) != idx(&m1) {
            return Err("attack-point set changed under global scaling".into());
        }
    }

    let symmetric = Polarization::ALL.map(|p| {
        let mut v = [0.003; 4];
        v[p.index()] = 0.5;
        v[p.conjugate().index()] = 0.02;
        ChannelEffVector::new(v).expect("valid")
    });
    for loss in [3.0, 9.0, 15.0] {
        let problem = AttackProblem::new(
            symmetric,
            EveDetectorModel::default(),
            LinkModel::with_loss(loss).map_err(|e| e.to_string())?,
            ReceiverModel::new(0.4, [1e-6; 4]).map_err(|e| e.to_string())?,
        );
        let r = optimize_mode_b(&problem, &OptimizerConfig::default()).map_err(|e| e.to_string())?;
        if !r.converged() || r.mu.iter().any(|m| (m / r.mu[0] - 1.0).abs() > SYMMETRIC_MU_TOL) {
            return Err(format!("symmetric map at {loss} dB gave mu {:?}", r.mu));
        }
    }

    determinism()?;
    Ok(format!("decomposition gap {worst:.1e}; scaling, symmetry and determinism hold"))
}

fn determinism() -> Result<(), String> {
    let map_bytes = || {
        let map = synthesize_scan(&ScanPreset::paper_like(), 7).expect("preset");
        let mut buf = Vec::new();
        write_map_csv(&map, &["seed=7".into()], &mut buf).expect("write");
        buf
    };
    if map_bytes() != map_bytes() {
        return Err("scan synthesis not reproducible".into());
    }

    let points = attack_points();
    let sweep_bytes = |mode| {
        let p = problem_at(&points, 0.0);
        let inputs = SweepInputs {
            attack_eff: Some(p.attack_eff),
            eve: p.eve,
            link: p.link,
            receiver: p.receiver,
        };
        let config = OptimizerConfig {
            mode,
            restarts: 2,
            ..Default::default()
        };
        let recs = sweep_loss(&inputs, &[4.0, 10.0], &config).expect("sweep");
        let mut buf = Vec::new();
        write_sweep_csv(&recs, &[], &mut buf).expect("write");
        buf
    };
    for mode in [RateMatching::TotalRate, RateMatching::PerPolarizationRates] {
        if sweep_bytes(mode) != sweep_bytes(mode) {
            return Err(format!("{} sweep not reproducible", mode.as_str()));
        }
    }

    let config = TrialConfig {
        n_pulses: 300_000,
        seed: 3,
        link: LinkModel::with_loss(5.0).expect("loss"),
        receiver: ReceiverModel::default(),
        scenario: Scenario::BaselineNoEve,
    };
    if run_trials(&config).ok() != run_trials(&config).ok() {
        return Err("Monte Carlo not reproducible".into());
    }
    Ok(())
}

fn scalar_reduction() -> Outcome {
    let problem = problem_at(&attack_points(), 9.0);
    let config = OptimizerConfig::default();
    let target = problem.baseline().map_err(|e| e.to_string())?.rate[Polarization::H.index()];
    let fixed = [1.0, 40.0, 0.5, 1.5];
    let mut targets = [None; 4];
    targets[Polarization::H.index()] = Some(target);
    let solved = match_conditional_rates(&problem, targets, fixed, &config).map_err(|e| e.to_string())?;

    let gap = |mu_h: f64| {
        let mut mu = fixed;
        mu[0] = mu_h;
        problem.evaluate(mu).map(|r| r.rate[0] - target)
    };
    let (mut lo, mut hi) = (1e-6_f64, 10.0_f64);
    let g_lo = gap(lo).map_err(|e| e.to_string())?;
    let g_hi = gap(hi).map_err(|e| e.to_string())?;
    if !(g_lo < 0.0 && g_hi > 0.0) {
        return Err(format!("bisection bracket invalid: {g_lo:e}, {g_hi:e}"));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if gap(mid).map_err(|e| e.to_string())? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let bisect = 0.5 * (lo + hi);
    let rel = (solved.mu[0] - bisect).abs() / solved.mu[0];
    if rel > SCALAR_TOL {
        return Err(format!("mu {} vs bisection {bisect}", solved.mu[0]));
    }
    Ok(format!("mu_H = {:.9}, relative gap {rel:.1e}", solved.mu[0]))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 7] = [
        ("1 mode A viability", mode_a_viability),
        ("2 mode B viability", mode_b_viability),
        ("3 baseline limits", baseline_limits),
        ("4 Monte Carlo agreement", oracle_agreement),
        ("5 pinhole countermeasure", countermeasure),
        ("6 identities and determinism", identities),
        ("7 scalar reduction", scalar_reduction),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let t = Instant::now();
        let outcome = check();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail} ({secs:.1} s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
