//! Named experiments, records and summaries.

mod exec;
mod run;
mod summary;
mod verify;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dynamics::{CheckMode, InitSpec, UpdateRule};
use crate::error::{Error, Result};
use crate::graph::Graph;

pub use exec::{map_cells, thread_count, Exec};
pub use run::{run_experiment, run_single, write_records, ExperimentRecord, GraphMeta, SingleRun, SingleRunConfig};
pub use summary::{read_records, summarize, GroupSummary, Quantiles, SlopeSummary, Summary};
pub use verify::{detailed_balance_fixtures, trifurcation_instances, verify_suite, Suite, SuiteCheck};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ExtinctionScaling,
    RigidTails,
    #[serde(rename = "tau_R_survival")]
    TauRSurvival,
    MagnetizationDrift,
    PottsCoupling,
    StationarityOracle,
    LemmaSuite,
    GrandCoupling,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::ExtinctionScaling => "extinction_scaling",
            ExperimentKind::RigidTails => "rigid_tails",
            ExperimentKind::TauRSurvival => "tau_R_survival",
            ExperimentKind::MagnetizationDrift => "magnetization_drift",
            ExperimentKind::PottsCoupling => "potts_coupling",
            ExperimentKind::StationarityOracle => "stationarity_oracle",
            ExperimentKind::LemmaSuite => "lemma_suite",
            ExperimentKind::GrandCoupling => "grand_coupling",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Random,
    Complete,
    Petersen,
    Cycle,
    File,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_kind() -> GraphKind {
    GraphKind::Random
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    #[serde(default = "default_kind")]
    pub kind: GraphKind,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub d: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

impl GraphSpec {
    /// Sizes this spec sweeps over; fixed-size kinds have exactly one.
    pub fn sizes(&self) -> Vec<usize> {
        match self.kind {
            GraphKind::Petersen => vec![10],
            GraphKind::File => vec![0],
            _ => self.n.clone(),
        }
    }

    pub fn build(&self, n: usize, seed: u64) -> Result<Graph> {
        match self.kind {
            GraphKind::Random => crate::graph::generate_random_regular(n, self.d, seed),
            GraphKind::Complete => Ok(Graph::complete(n)),
            GraphKind::Cycle => Ok(Graph::cycle(n)),
            GraphKind::Petersen => Ok(Graph::petersen()),
            GraphKind::File => {
                let path = self.path.as_ref().ok_or_else(|| Error::InvalidParameter("graph.path missing".into()))?;
                Graph::read_file(path)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Ising,
    PottsDominating,
    NoisyMajority,
    PottsGlauber,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub kind: RuleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

impl RuleSpec {
    pub fn ising(beta: f64) -> Self {
        RuleSpec { kind: RuleKind::Ising, beta: Some(beta), beta_p: None, q: None, p: None }
    }

    fn need(&self, v: Option<f64>, name: &str) -> Result<f64> {
        v.ok_or_else(|| Error::InvalidParameter(format!("rule {:?} needs `{name}`", self.kind)))
    }

    /// Potts inverse temperature; from `beta` as `2β + 7 ln(q−1)/d` when absent.
    pub fn potts_beta(&self, d: usize) -> Result<f64> {
        let q = self.q.unwrap_or(2);
        match (self.beta_p, self.beta) {
            (Some(bp), _) => Ok(bp),
            (None, Some(b)) => Ok(2.0 * b + 7.0 * ((q as f64) - 1.0).ln() / d as f64),
            _ => Err(Error::InvalidParameter("Potts rule needs `beta_p` or `beta`".into())),
        }
    }

    pub fn build(&self, d: usize) -> Result<UpdateRule> {
        let q = self.q.unwrap_or(2);
        match self.kind {
            RuleKind::Ising => UpdateRule::ising(self.need(self.beta, "beta")?),
            RuleKind::NoisyMajority => UpdateRule::noisy_majority(self.need(self.p, "p")?),
            RuleKind::PottsDominating => UpdateRule::potts_dominating(self.potts_beta(d)?, q, d as u32),
            RuleKind::PottsGlauber => UpdateRule::potts_glauber(self.potts_beta(d)?, q),
        }
    }
}

/// Either a fixed time or a multiple of `ln n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Horizon {
    Fixed(f64),
    LogN { log_n: f64 },
}

impl Horizon {
    pub fn resolve(&self, n: usize) -> f64 {
        match *self {
            Horizon::Fixed(t) => t,
            Horizon::LogN { log_n } => log_n * (n as f64).ln(),
        }
    }
}

fn default_init() -> String {
    "all_plus".into()
}

fn default_replicas() -> usize {
    1
}

fn default_check() -> CheckMode {
    CheckMode::Normal
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    pub graph: GraphSpec,
    pub rule: RuleSpec,
    #[serde(default = "default_init")]
    pub init: String,
    pub horizon: Horizon,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    /// Time between sampled observer rows; `None` keeps only end-of-run values.
    #[serde(default)]
    pub cadence: Option<f64>,
    #[serde(default = "default_check")]
    pub check_mode: CheckMode,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Ball radius for trifurcations and τ^R; defaults to the treelike radius.
    #[serde(default)]
    pub radius: Option<usize>,
    /// Magnetization level whose first hitting time is recorded.
    #[serde(default)]
    pub reach: Option<f64>,
    /// Magnetization level the run must stay above.
    #[serde(default)]
    pub floor: Option<f64>,
    /// Clock rings for the stationarity oracle; defaults to `horizon · n`.
    #[serde(default)]
    pub events: Option<u64>,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn read_file(path: &std::path::Path) -> Result<Self> {
        ExperimentSpec::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::InvalidParameter("replicas must be at least 1".into()));
        }
        let bad_horizon = match self.horizon {
            Horizon::Fixed(t) => !(t >= 0.0 && t.is_finite()),
            Horizon::LogN { log_n } => !(log_n >= 0.0 && log_n.is_finite()),
        };
        if bad_horizon {
            return Err(Error::InvalidParameter(format!("horizon {:?}", self.horizon)));
        }
        if self.graph.seeds.is_empty() {
            return Err(Error::InvalidParameter("graph.seeds is empty".into()));
        }
        match self.graph.kind {
            GraphKind::Random | GraphKind::Complete | GraphKind::Cycle if self.graph.n.is_empty() => {
                return Err(Error::InvalidParameter("graph.n is empty".into()));
            }
            GraphKind::Random => {
                if let Some(&n) = self.graph.n.iter().find(|&&n| n * self.graph.d % 2 == 1) {
                    return Err(Error::InvalidParity { n, d: self.graph.d });
                }
            }
            _ => {}
        }
        self.init.parse::<InitSpec>()?;
        if let Some(c) = self.cadence {
            if !(c > 0.0) {
                return Err(Error::InvalidParameter(format!("cadence {c}")));
            }
        }
        Ok(())
    }
}
