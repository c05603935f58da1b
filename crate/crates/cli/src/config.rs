//! JSON run configuration. Every field has a default, unknown keys are
//! rejected, and the resolved document is echoed into output headers.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use mismatch_core::optimizer::{OptimizerConfig, RateMatching};
use mismatch_core::scanmap::{SearchThresholds, Threshold};
use mismatch_core::{EveDetectorModel, LinkModel, ReceiverModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub receiver: ReceiverSection,
    pub link: LinkSection,
    pub eve: EveSection,
    pub thresholds: ThresholdSection,
    pub optimizer: OptimizerSection,
    pub scan: ScanSection,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            receiver: ReceiverSection::default(),
            link: LinkSection::default(),
            eve: EveSection::default(),
            thresholds: ThresholdSection::default(),
            optimizer: OptimizerSection::default(),
            scan: ScanSection::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverSection {
    pub eta_det: f64,
    /// Background click probability per detector `[h, v, d, a]`.
    pub c: [f64; 4],
}

impl Default for ReceiverSection {
    fn default() -> Self {
        let r = ReceiverModel::default();
        Self {
            eta_det: r.eta_det(),
            c: r.background(),
        }
    }
}

/// A single loss in dB or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LossSpec {
    Single(f64),
    Grid(Vec<f64>),
}

impl LossSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::Single(v) => vec![*v],
            Self::Grid(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub fidelity_ab: f64,
    pub fidelity_eb: f64,
    pub loss_db: LossSpec,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            fidelity_ab: LinkModel::FIDELITY_AB,
            fidelity_eb: LinkModel::FIDELITY_EB,
            loss_db: LossSpec::Grid((3..=15).map(f64::from).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EveSection {
    pub eta_e: f64,
    pub dark: f64,
}

impl Default for EveSection {
    fn default() -> Self {
        let e = EveDetectorModel::default();
        Self {
            eta_e: e.eta_e(),
            dark: e.dark(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdEntry {
    pub eta_min: f64,
    pub delta_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ThresholdSection {
    pub H: ThresholdEntry,
    pub V: ThresholdEntry,
    pub D: ThresholdEntry,
    pub A: ThresholdEntry,
}

impl From<SearchThresholds> for ThresholdSection {
    fn from(t: SearchThresholds) -> Self {
        let e = |i: usize| ThresholdEntry {
            eta_min: t.0[i].eta_min,
            delta_min: t.0[i].delta_min,
        };
        Self {
            H: e(0),
            V: e(1),
            D: e(2),
            A: e(3),
        }
    }
}

impl Default for ThresholdSection {
    fn default() -> Self {
        SearchThresholds::paper().into()
    }
}

impl ThresholdSection {
    pub fn to_core(&self) -> anyhow::Result<SearchThresholds> {
        let t = |e: &ThresholdEntry| Threshold::new(e.eta_min, e.delta_min);
        Ok(SearchThresholds::new([t(&self.H)?, t(&self.V)?, t(&self.D)?, t(&self.A)?]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Total,
    Perpol,
}

impl From<ModeName> for RateMatching {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Total => RateMatching::TotalRate,
            ModeName::Perpol => RateMatching::PerPolarizationRates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub mode: ModeName,
    pub mu_min: f64,
    pub mu_max: f64,
    pub constraint_tol: f64,
    pub objective_tol: f64,
    pub max_iterations: usize,
    pub restarts: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        Self {
            mode: ModeName::Total,
            mu_min: d.mu_min,
            mu_max: d.mu_max,
            constraint_tol: d.constraint_tol,
            objective_tol: d.objective_tol,
            max_iterations: d.max_iterations,
            restarts: d.restarts,
        }
    }
}

/// Where the efficiency map comes from: a built-in preset synthesized with
/// the run seed, or a map file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub preset: Option<String>,
    pub map: Option<PathBuf>,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            preset: Some("paper-like".into()),
            map: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.receiver_model()?;
        self.eve_model()?;
        self.thresholds.to_core()?;
        self.optimizer_config().validate()?;
        let losses = self.link.loss_db.values();
        if losses.is_empty() {
            bail!("link.loss_db is empty");
        }
        for l in losses {
            self.link_at(l)?;
        }
        match (&self.scan.preset, &self.scan.map) {
            (Some(_), Some(_)) => bail!("scan: give either `preset` or `map`, not both"),
            (None, None) => bail!("scan: one of `preset` or `map` is required"),
            (Some(p), None) => {
                mismatch_core::scanmap::ScanPreset::by_name(p)?;
            }
            (None, Some(_)) => {}
        }
        Ok(())
    }

    pub fn receiver_model(&self) -> anyhow::Result<ReceiverModel> {
        Ok(ReceiverModel::new(self.receiver.eta_det, self.receiver.c)?)
    }

    pub fn eve_model(&self) -> anyhow::Result<EveDetectorModel> {
        Ok(EveDetectorModel::new(self.eve.eta_e, self.eve.dark)?)
    }

    pub fn link_at(&self, loss_db: f64) -> anyhow::Result<LinkModel> {
        Ok(LinkModel::new(loss_db, self.link.fidelity_ab, self.link.fidelity_eb)?)
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let o = &self.optimizer;
        OptimizerConfig {
            mode: o.mode.into(),
            mu_min: o.mu_min,
            mu_max: o.mu_max,
            constraint_tol: o.constraint_tol,
            objective_tol: o.objective_tol,
            max_iterations: o.max_iterations,
            restarts: o.restarts,
            seed: self.seed,
        }
    }

    /// Single-line JSON for output headers.
    pub fn to_header(&self) -> String {
        format!("config={}", serde_json::to_string(self).expect("config serializes"))
    }
}
