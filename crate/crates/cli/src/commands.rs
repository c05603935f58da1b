use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use mismatch_core::montecarlo::{compare_to_analytic, run_trials, Comparison, Scenario, TrialConfig, COMPARISON_COLUMNS};
use mismatch_core::optimizer::{optimize_mode_b, sweep_loss, write_sweep_csv, AttackOutcome, SweepInputs};
use mismatch_core::scanmap::{
    find_attack_points, pinhole_filter, read_map_csv, synthesize_raw_scan, synthesize_scan, write_attack_report,
    write_map_csv, write_raw_csv, AttackSearch, EfficiencyMap, ScanPreset, SearchThresholds,
};
use mismatch_core::{baseline_no_eve, AttackProblem, Polarization};

use crate::config::{ModeName, RunConfig, ThresholdSection};
use crate::{Mode, ThresholdSet};

const MC_SIGMAS: f64 = 3.0;

pub enum Outcome {
    Success,
    CheckFailed,
}

fn tool_line(command: &str) -> String {
    format!("mismatch-lab {} {command}", env!("CARGO_PKG_VERSION"))
}

/// Writes the buffer to `out`, or to standard output when no path is given.
fn emit(out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

/// Summary text goes to stdout unless stdout already carries the data.
fn summary(out: Option<&Path>, text: &str) {
    // A closed pipe (`| head`) is not worth a panic.
    let _ = if out.is_some() {
        writeln!(std::io::stdout(), "{text}")
    } else {
        writeln!(std::io::stderr(), "{text}")
    };
}

fn load_map(path: &Path) -> anyhow::Result<EfficiencyMap> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_map_csv(std::io::BufReader::new(file)).with_context(|| format!("reading map {}", path.display()))
}

fn threshold_set(set: ThresholdSet) -> SearchThresholds {
    match set {
        ThresholdSet::Paper => SearchThresholds::paper(),
        ThresholdSet::Tight => SearchThresholds::tight(),
    }
}

fn search_summary(search: &AttackSearch) -> String {
    if search.is_empty() {
        return "no attack points".into();
    }
    Polarization::ALL
        .iter()
        .map(|&pol| match search.best_for(pol) {
            Some(b) => format!(
                "{pol}: {} qualifying, best phi={} mrad theta={} mrad eta={} delta={}",
                search.candidates[pol.index()].len(),
                b.phi_mrad,
                b.theta_mrad,
                b.eff.get(pol),
                b.delta
            ),
            None => format!("{pol}: no qualifying points"),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn generate_scan(preset: &str, seed: u64, raw: bool, out: Option<&Path>) -> anyhow::Result<Outcome> {
    let p = ScanPreset::by_name(preset)?;
    let header = vec![
        tool_line("generate-scan"),
        format!("preset={preset} seed={seed} raw={raw}"),
    ];
    let mut buf = Vec::new();
    if raw {
        write_raw_csv(&synthesize_raw_scan(&p, seed)?, &header, &mut buf)?;
    } else {
        write_map_csv(&synthesize_scan(&p, seed)?, &header, &mut buf)?;
    }
    emit(out, &buf)?;
    Ok(Outcome::Success)
}

pub fn analyze_scan(
    map_path: &Path,
    set: Option<ThresholdSet>,
    config: Option<&Path>,
    out: Option<&Path>,
) -> anyhow::Result<Outcome> {
    let thresholds = match (set, config) {
        (Some(s), _) => threshold_set(s),
        (None, Some(c)) => RunConfig::load(c)?.thresholds.to_core()?,
        (None, None) => SearchThresholds::paper(),
    };
    let map = load_map(map_path)?;
    let search = find_attack_points(&map, &thresholds);
    let header = vec![
        tool_line("analyze-scan"),
        format!("map={}", map_path.display()),
        format!(
            "thresholds={}",
            serde_json::to_string(&ThresholdSection::from(thresholds)).expect("serializable")
        ),
    ];
    let mut buf = Vec::new();
    write_attack_report(&search, &header, &mut buf)?;
    emit(out, &buf)?;
    summary(out, &search_summary(&search));
    Ok(Outcome::Success)
}

/// The config's efficiency map: a preset synthesized with the run seed, or
/// a map file resolved relative to the config file.
fn config_map(cfg: &RunConfig, config_path: Option<&Path>) -> anyhow::Result<EfficiencyMap> {
    if let Some(preset) = &cfg.scan.preset {
        return Ok(synthesize_scan(&ScanPreset::by_name(preset)?, cfg.seed)?);
    }
    let Some(map) = &cfg.scan.map else {
        bail!("scan: one of `preset` or `map` is required");
    };
    let path: PathBuf = match config_path.and_then(Path::parent) {
        Some(dir) if map.is_relative() => dir.join(map),
        _ => map.clone(),
    };
    load_map(&path)
}

fn sweep_inputs(cfg: &RunConfig, config_path: Option<&Path>) -> anyhow::Result<SweepInputs> {
    let map = config_map(cfg, config_path)?;
    let search = find_attack_points(&map, &cfg.thresholds.to_core()?);
    Ok(SweepInputs {
        attack_eff: search.complete().map(|pts| pts.map(|p| p.eff)),
        eve: cfg.eve_model()?,
        link: cfg.link_at(0.0)?,
        receiver: cfg.receiver_model()?,
    })
}

pub fn sweep(config_path: Option<&Path>, mode: Option<Mode>, out: Option<&Path>) -> anyhow::Result<Outcome> {
    let mut cfg = RunConfig::load_or_default(config_path)?;
    if let Some(m) = mode {
        cfg.optimizer.mode = match m {
            Mode::Total => ModeName::Total,
            Mode::Perpol => ModeName::Perpol,
        };
    }
    let inputs = sweep_inputs(&cfg, config_path)?;
    let losses = cfg.link.loss_db.values();
    let records = sweep_loss(&inputs, &losses, &cfg.optimizer_config())?;

    let header = vec![tool_line("sweep"), cfg.to_header()];
    let mut buf = Vec::new();
    write_sweep_csv(&records, &header, &mut buf)?;
    emit(out, &buf)?;

    let unsolved = records
        .iter()
        .filter(|r| !matches!(&r.attack, AttackOutcome::Solved(s) if s.converged()))
        .count();
    let text = if inputs.attack_eff.is_none() {
        format!("{} loss points; no complete set of attack points, attack columns are nan", records.len())
    } else {
        format!("{} loss points, {unsolved} not converged", records.len())
    };
    summary(out, &text);
    Ok(Outcome::Success)
}

pub fn countermeasure(
    map_path: &Path,
    fov_urad: f64,
    edge_urad: f64,
    set: ThresholdSet,
    out: Option<&Path>,
) -> anyhow::Result<Outcome> {
    if !(edge_urad >= 0.0 && edge_urad.is_finite()) {
        bail!("--edge-urad must be a finite non-negative number, got {edge_urad}");
    }
    let map = load_map(map_path)?;
    let filtered = pinhole_filter(&map, fov_urad, edge_urad)?;
    let thresholds = threshold_set(set);
    let search = find_attack_points(&filtered, &thresholds);
    let verdict = if search.is_empty() { "SECURE" } else { "VULNERABLE" };
    let header = vec![
        tool_line("countermeasure"),
        format!(
            "map={} fov_urad={fov_urad} edge_urad={edge_urad} thresholds={}",
            map_path.display(),
            format!("{set:?}").to_lowercase()
        ),
        format!("verdict={verdict} qualifying={}", search.qualifying_count()),
    ];
    let mut buf = Vec::new();
    write_map_csv(&filtered, &header, &mut buf)?;
    emit(out, &buf)?;
    summary(out, &format!("{verdict}\n{}", search_summary(&search)));
    Ok(Outcome::Success)
}

pub fn montecarlo(config_path: Option<&Path>, n_pulses: u64, loss_db: f64, out: Option<&Path>) -> anyhow::Result<Outcome> {
    let cfg = RunConfig::load_or_default(config_path)?;
    if n_pulses == 0 {
        bail!("--n-pulses must be at least 1");
    }
    let link = cfg.link_at(loss_db)?;
    let receiver = cfg.receiver_model()?;

    let mut sections: Vec<(&str, Comparison)> = Vec::new();
    let base_stats = run_trials(&TrialConfig {
        n_pulses,
        seed: cfg.seed,
        link,
        receiver,
        scenario: Scenario::BaselineNoEve,
    })?;
    sections.push(("baseline.", compare_to_analytic(&base_stats, &baseline_no_eve(&link, &receiver)?)?));

    let inputs = sweep_inputs(&cfg, config_path)?;
    let mut notes = Vec::new();
    match inputs.attack_eff {
        Some(eff) => {
            let problem = AttackProblem::new(eff, inputs.eve, link, receiver);
            let solved = optimize_mode_b(&problem, &cfg.optimizer_config())?;
            if !solved.converged() {
                notes.push(format!("attack rate matching {:?}; simulating the returned mu", solved.status));
            }
            let stats = run_trials(&TrialConfig {
                n_pulses,
                seed: cfg.seed.wrapping_add(1),
                link,
                receiver,
                scenario: Scenario::FakedStateAttack(problem.strategy(solved.mu)?),
            })?;
            sections.push(("attack.", compare_to_analytic(&stats, &solved.report)?));
        }
        None => notes.push("no complete set of attack points; attack scenario skipped".into()),
    }

    let mut header = vec![
        tool_line("montecarlo"),
        format!("n_pulses={n_pulses} loss_db={loss_db} sigmas={MC_SIGMAS}"),
        cfg.to_header(),
    ];
    header.extend(notes.iter().cloned());
    let mut buf = Vec::new();
    for line in &header {
        writeln!(buf, "# {line}")?;
    }
    writeln!(buf, "{COMPARISON_COLUMNS}")?;
    for (prefix, cmp) in &sections {
        cmp.write_rows(prefix, &mut buf)?;
    }
    emit(out, &buf)?;

    let mut failing = Vec::new();
    let mut insufficient = 0;
    for (prefix, cmp) in &sections {
        insufficient += cmp.insufficient().count();
        for r in &cmp.rows {
            if let Some(z) = r.z.filter(|z| z.abs() > MC_SIGMAS) {
                failing.push(format!("{prefix}{} (z = {z:.2})", r.quantity));
            }
        }
    }
    let mut text = notes.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    if insufficient > 0 {
        text.push_str(&format!("{insufficient} quantities have insufficient data\n"));
    }
    if failing.is_empty() {
        text.push_str("all quantities within 3 standard errors");
        summary(out, &text);
        Ok(Outcome::Success)
    } else {
        summary(out, &text);
        eprintln!("outside 3 standard errors: {}", failing.join(", "));
        Ok(Outcome::CheckFailed)
    }
}
