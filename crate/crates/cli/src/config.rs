use std::path::Path;

use serde::{Deserialize, Serialize};

use netmimo_core::allocation::ConstraintMode;
use netmimo_core::csit::{Csit, Fairness, TrainingConfig};
use netmimo_core::geometry::{
    build_linear_layout, cluster_reduce, db_to_linear, ClusterProblem, PathlossParams,
};
use netmimo_core::scheduler::GreedyOptions;

use crate::error::CliError;

/// Experiment description. dB fields are converted once, when the problem is
/// built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub analysis: Analysis,
    #[serde(default)]
    pub constraint: Constraint,
    #[serde(default)]
    pub csit: CsitSpec,
    #[serde(default)]
    pub montecarlo: Option<MonteCarloSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub validate: Option<ValidateSpec>,
}

/// Subset of the acceptance checks to run; all of them when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSpec {
    pub checks: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// One cluster given by its normalized squared gains.
    Explicit {
        gamma: f64,
        /// `beta2[m][k]`, one row per BS.
        beta2: Vec<Vec<f64>>,
        power_db: f64,
    },
    /// Cluster `cluster_index` of the linear wrap-around layout.
    Layout {
        gamma: f64,
        num_cells: usize,
        groups_per_cell: usize,
        power_db: f64,
        #[serde(default = "one")]
        cluster_size: usize,
        #[serde(default)]
        cluster_index: usize,
        #[serde(default)]
        pathloss: Option<PathlossSpec>,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathlossSpec {
    pub g0_db: f64,
    pub delta_m: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analysis {
    /// Fixed fractions, one per group.
    #[serde(default)]
    pub mu: Option<Vec<f64>>,
    #[serde(default)]
    pub optimizer: Option<OptimizerSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    #[serde(default = "default_delta_mu")]
    pub delta_mu: f64,
    #[serde(default)]
    pub full_sweep: bool,
    #[serde(default)]
    pub fairness: FairnessSpec,
    /// Per-group weights for `weighted_sum`.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default = "default_pf_iterations")]
    pub pf_iterations: usize,
    /// Drift-plus-penalty run instead of the direct solve for `num`.
    #[serde(default)]
    pub num: Option<NumSpec>,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self {
            delta_mu: default_delta_mu(),
            full_sweep: false,
            fairness: FairnessSpec::default(),
            weights: None,
            pf_iterations: default_pf_iterations(),
            num: None,
        }
    }
}

fn default_delta_mu() -> f64 {
    0.01
}

fn default_pf_iterations() -> usize {
    30
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessSpec {
    #[default]
    SumRate,
    WeightedSum,
    ProportionalFair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumSpec {
    #[serde(default = "default_v")]
    pub v: f64,
    pub horizon: usize,
    /// Defaults to `2 log(1 + gamma max beta2 P_sum)`.
    #[serde(default)]
    pub a_max: Option<f64>,
}

fn default_v() -> f64 {
    1000.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    #[default]
    PerBs,
    SumPower,
}

impl From<Constraint> for ConstraintMode {
    fn from(c: Constraint) -> Self {
        match c {
            Constraint::PerBs => ConstraintMode::PerBs,
            Constraint::SumPower => ConstraintMode::SumPower,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CsitSpec {
    #[default]
    Perfect,
    Trained {
        /// Defaults to `gamma`.
        #[serde(default)]
        gamma_p: Option<f64>,
        tau: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonteCarloKind {
    /// Finite-N theta and gains against the asymptotic values at `mu`.
    Convergence,
    /// Greedy user selection with proportional fair queues.
    Greedy,
    /// Random pre-selection with asymptotic fractions and weights.
    Probabilistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSpec {
    pub kind: MonteCarloKind,
    pub n: Vec<usize>,
    pub seeds: u64,
    #[serde(default = "default_slots")]
    pub slots: usize,
    /// Queue parameter of the greedy mode.
    #[serde(default = "default_sim_v")]
    pub v: f64,
}

fn default_slots() -> usize {
    300
}

fn default_sim_v() -> f64 {
    100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Points of the greedy trace at the listed total loads.
    MuTotal,
    Gamma,
    Tau,
    ClusterSize,
    PowerDb,
}

impl SweepParameter {
    pub fn column(self) -> &'static str {
        match self {
            SweepParameter::MuTotal => "mu_total",
            SweepParameter::Gamma => "gamma",
            SweepParameter::Tau => "tau",
            SweepParameter::ClusterSize => "cluster_size",
            SweepParameter::PowerDb => "power_db",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Outer axes; rows run over their product, then over `values`.
    #[serde(default)]
    pub series: Vec<Axis>,
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.into_inner()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), CliError> {
        if self.analysis.mu.is_some() && self.analysis.optimizer.is_some() {
            return Err(CliError::Config(
                "at `analysis`: give either `mu` or `optimizer`, not both".into(),
            ));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.parameter == SweepParameter::MuTotal && !sweep.series.is_empty() {
                return Err(CliError::Config("at `sweep.series`: not supported with `mu_total`".into()));
            }
        }
        Ok(())
    }

    /// Canonical form for hashing: the parsed config re-serialized, so
    /// formatting and key order do not matter but every field does.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn gamma(&self) -> f64 {
        match &self.problem {
            ProblemSpec::Explicit { gamma, .. } | ProblemSpec::Layout { gamma, .. } => *gamma,
        }
    }

    pub fn cluster_problem(&self) -> Result<ClusterProblem, CliError> {
        match &self.problem {
            ProblemSpec::Explicit {
                gamma,
                beta2,
                power_db,
            } => {
                let b = beta2.len();
                Ok(ClusterProblem::from_rows(*gamma, beta2, vec![db_to_linear(*power_db); b])?)
            }
            ProblemSpec::Layout {
                gamma,
                num_cells,
                groups_per_cell,
                power_db,
                cluster_size,
                cluster_index,
                pathloss,
            } => {
                let pl = match pathloss {
                    Some(p) => PathlossParams::from_db(p.g0_db, p.delta_m, p.nu)?,
                    None => PathlossParams::wimax(),
                };
                let layout = build_linear_layout(*num_cells, *groups_per_cell, pl, db_to_linear(*power_db))?
                    .with_cluster_size(*cluster_size)?;
                Ok(cluster_reduce(&layout, *cluster_index, *gamma)?)
            }
        }
    }

    pub fn csit(&self) -> Csit {
        match self.csit {
            CsitSpec::Perfect => Csit::Perfect,
            CsitSpec::Trained { gamma_p, tau } => Csit::Trained(TrainingConfig {
                gamma_p: gamma_p.unwrap_or(self.gamma()),
                tau,
            }),
        }
    }

    pub fn optimizer(&self) -> OptimizerSpec {
        self.analysis.optimizer.clone().unwrap_or_default()
    }

    pub fn fairness(&self) -> Result<Fairness, CliError> {
        let opt = self.optimizer();
        Ok(match opt.fairness {
            FairnessSpec::SumRate => Fairness::SumRate,
            FairnessSpec::ProportionalFair => Fairness::Proportional {
                iterations: opt.pf_iterations,
            },
            FairnessSpec::WeightedSum => Fairness::WeightedSum(opt.weights.clone().ok_or_else(|| {
                CliError::Config("at `analysis.optimizer.weights`: required for `weighted_sum`".into())
            })?),
        })
    }

    pub fn greedy_options(&self, exec: netmimo_core::exec::Execution) -> GreedyOptions {
        let opt = self.optimizer();
        GreedyOptions {
            delta_mu: opt.delta_mu,
            full_sweep: opt.full_sweep,
            exec,
        }
    }

    /// Copy with one sweep parameter overridden.
    pub fn with_parameter(&self, parameter: SweepParameter, value: f64) -> Result<Self, CliError> {
        let mut out = self.clone();
        let bad = |what: &str| Err(CliError::Config(format!("at `sweep`: `{what}` needs {}", match parameter {
            SweepParameter::ClusterSize => "a layout problem",
            SweepParameter::Tau => "trained csit",
            _ => "a different problem",
        })));
        match parameter {
            SweepParameter::MuTotal => return Err(CliError::Config("at `sweep`: `mu_total` is not an override".into())),
            SweepParameter::Gamma => match &mut out.problem {
                ProblemSpec::Explicit { gamma, .. } | ProblemSpec::Layout { gamma, .. } => *gamma = value,
            },
            SweepParameter::PowerDb => match &mut out.problem {
                ProblemSpec::Explicit { power_db, .. } | ProblemSpec::Layout { power_db, .. } => *power_db = value,
            },
            SweepParameter::ClusterSize => match &mut out.problem {
                ProblemSpec::Layout { cluster_size, .. } => {
                    if value < 1.0 || value.fract() != 0.0 {
                        return Err(CliError::Config(format!("at `sweep.values`: cluster size {value} is not a positive integer")));
                    }
                    *cluster_size = value as usize;
                }
                ProblemSpec::Explicit { .. } => return bad("cluster_size"),
            },
            SweepParameter::Tau => match &mut out.csit {
                CsitSpec::Trained { tau, .. } => *tau = value,
                CsitSpec::Perfect => return bad("tau"),
            },
        }
        Ok(out)
    }
}
