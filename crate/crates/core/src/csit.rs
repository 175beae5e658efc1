//! Downlink training and the estimated-CSIT rate bound.
//!
//! With MMSE estimation from `gamma_p B N` pilot dimensions and training
//! energy `p`, each gain splits into an estimated part `betahat2 = p beta^4 /
//! (1 + p beta^2)` and an error part `betabar2 = beta^2 / (1 + p beta^2)`. ZF
//! on the estimate sees the gains of the `betahat2` problem, and the error
//! leaks `sum_m betabar2[m][k] P_m` of self-interference into every user.

use faer::Mat;

use crate::allocation::{group_rates, ConstraintMode, LogBase, RatePoint};
use crate::asymptotic::{lambda_gains, solve_eta, FixedPointOptions, UserFractions};
use crate::error::{check_len, Error, Result};
use crate::geometry::{detect_symmetry, ClusterProblem, EquivalenceClasses, DEFAULT_SYMMETRY_TOL};
use crate::scheduler::{
    greedy_fractions, pf_average_rates, AsymptoticModel, FractionModel, GreedyOptimizer,
    GreedyOptions, SymmetricReduction,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    /// Pilot dimensions per antenna dimension; at least `gamma`.
    pub gamma_p: f64,
    /// Dimensional crowding `N / (W T)`.
    pub tau: f64,
}

impl TrainingConfig {
    /// Minimum pilot overhead `gamma_p = gamma`.
    pub fn minimal(gamma: f64, tau: f64) -> Self {
        Self { gamma_p: gamma, tau }
    }

    fn validate(&self, gamma: f64) -> Result<()> {
        if !(self.gamma_p >= gamma) {
            return Err(Error::invalid(
                "gamma_p",
                format!("pilot ratio {} is below gamma = {gamma}", self.gamma_p),
            ));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid("tau", "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Training energy `p = (gamma_p / gamma) sum_m P_m`.
pub fn training_power(gamma: f64, config: &TrainingConfig, power: &[f64]) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma", "must be positive"));
    }
    config.validate(gamma)?;
    Ok(config.gamma_p / gamma * power.iter().sum::<f64>())
}

#[derive(Debug, Clone)]
pub struct EffectiveGains {
    pub beta_hat2: Mat<f64>,
    pub beta_bar2: Mat<f64>,
}

pub fn effective_gains(beta2: &Mat<f64>, p: f64) -> Result<EffectiveGains> {
    if !(p > 0.0) {
        return Err(Error::invalid("p", "training energy must be positive"));
    }
    let hat = Mat::from_fn(beta2.nrows(), beta2.ncols(), |m, k| {
        let b = beta2[(m, k)];
        p * b * b / (1.0 + p * b)
    });
    let bar = Mat::from_fn(beta2.nrows(), beta2.ncols(), |m, k| {
        let b = beta2[(m, k)];
        b / (1.0 + p * b)
    });
    Ok(EffectiveGains {
        beta_hat2: hat,
        beta_bar2: bar,
    })
}

/// `1 + sum_m betabar2[m][k] P_m` per group.
pub fn interference_term(beta_bar2: &Mat<f64>, power: &[f64]) -> Result<Vec<f64>> {
    check_len("power", beta_bar2.nrows(), power.len())?;
    Ok((0..beta_bar2.ncols())
        .map(|k| 1.0 + power.iter().enumerate().map(|(m, p)| beta_bar2[(m, k)] * p).sum::<f64>())
        .collect())
}

/// The estimated-channel problem together with its interference terms.
#[derive(Debug, Clone)]
pub struct TrainedProblem {
    pub hat: ClusterProblem,
    pub gains: EffectiveGains,
    pub interference: Vec<f64>,
    pub training_power: f64,
}

pub fn trained_problem(problem: &ClusterProblem, config: &TrainingConfig) -> Result<TrainedProblem> {
    let p = training_power(problem.gamma(), config, problem.power())?;
    let gains = effective_gains(problem.beta2(), p)?;
    let interference = interference_term(&gains.beta_bar2, problem.power())?;
    let hat = problem.with_beta2(gains.beta_hat2.clone())?;
    Ok(TrainedProblem {
        hat,
        gains,
        interference,
        training_power: p,
    })
}

/// `R_k = log(1 + Lambdahat_k q_k / (1 + sum_m betabar2[m][k] P_m))` with
/// `Lambdahat` from the fixed point on the estimated problem.
pub fn lower_bound_rates(
    hat: &ClusterProblem,
    mu: &UserFractions,
    q: &[f64],
    beta_bar2: &Mat<f64>,
    power: &[f64],
    base: LogBase,
) -> Result<RatePoint> {
    let eta = solve_eta(hat, mu, &FixedPointOptions::default())?;
    let lambda = lambda_gains(hat, &eta.eta).lambda;
    let interference = interference_term(beta_bar2, power)?;
    let effective: Vec<f64> = lambda.iter().zip(&interference).map(|(l, i)| l / i).collect();
    group_rates(&effective, q, mu.as_slice(), base)
}

/// Fraction of signal dimensions left for data: `[1 - gamma_p B tau]_+`.
pub fn overhead_factor(config: &TrainingConfig, num_bs: usize) -> f64 {
    (1.0 - config.gamma_p * num_bs as f64 * config.tau).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Csit {
    Perfect,
    Trained(TrainingConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fairness {
    SumRate,
    WeightedSum(Vec<f64>),
    /// Proportional fairness over the time-sharing region, approached with
    /// `iterations` reweighted greedy solves.
    Proportional { iterations: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEfficiency {
    /// Long-run throughput per model group (per class when the reduction
    /// is used) before the overhead factor (nats).
    pub group_throughput: Vec<f64>,
    /// The same, expanded to every group of the cluster.
    pub per_group: Vec<f64>,
    pub overhead: f64,
    /// `overhead * sum_k Rbar_k` (nats per channel use).
    pub cluster_sum_rate: f64,
    /// Cluster sum rate divided by `B`.
    pub cell_sum_rate: f64,
    /// True when the class-level reduction was used.
    pub symmetric: bool,
}

/// Builds the model the fraction optimizer works on: the class-level
/// reduction when the problem is symmetric with equal BS powers, otherwise
/// the general model under `mode`.
pub fn csit_model(problem: &ClusterProblem, csit: &Csit, mode: ConstraintMode) -> Result<Box<dyn FractionModel>> {
    Ok(csit_model_with_classes(problem, csit, mode)?.0)
}

/// As [`csit_model`], also returning the classes when the model works on
/// them (its group index is then a class index).
pub fn csit_model_with_classes(
    problem: &ClusterProblem,
    csit: &Csit,
    mode: ConstraintMode,
) -> Result<(Box<dyn FractionModel>, Option<EquivalenceClasses>)> {
    let (base, scale) = match csit {
        Csit::Perfect => (problem.clone(), vec![1.0; problem.num_groups()]),
        Csit::Trained(cfg) => {
            let t = trained_problem(problem, cfg)?;
            let scale = t.interference.iter().map(|i| 1.0 / i).collect();
            (t.hat, scale)
        }
    };
    let classes = detect_symmetry(&base, DEFAULT_SYMMETRY_TOL);
    if classes.is_symmetric {
        if let Ok(mut red) = SymmetricReduction::from_problem(&base, &classes) {
            // the interference term is constant over each class
            for (g, members) in red.class_gain.iter_mut().zip(&classes.members) {
                *g *= scale[members[0]];
            }
            return Ok((Box::new(red), Some(classes)));
        }
    }
    Ok((Box::new(AsymptoticModel::new(base, mode).with_gain_scale(scale)?), None))
}

/// Overhead-adjusted sum rate of one cluster under a fairness criterion.
pub fn effective_spectral_efficiency(
    problem: &ClusterProblem,
    csit: &Csit,
    fairness: &Fairness,
    mode: ConstraintMode,
    greedy: &GreedyOptions,
) -> Result<SpectralEfficiency> {
    let (model, classes) = csit_model_with_classes(problem, csit, mode)?;
    let a = model.num_groups();
    let symmetric = a != problem.num_groups() || problem.num_bs() == 1;
    let group_throughput = match fairness {
        Fairness::SumRate => greedy_fractions(model.as_ref(), &vec![1.0; a], greedy)?.rates.group_throughput,
        Fairness::WeightedSum(w) => greedy_fractions(model.as_ref(), w, greedy)?.rates.group_throughput,
        Fairness::Proportional { iterations } => {
            let opt = GreedyOptimizer {
                model: model.as_ref(),
                opts: *greedy,
            };
            pf_average_rates(&opt, *iterations)?
        }
    };
    let overhead = match csit {
        Csit::Perfect => 1.0,
        Csit::Trained(cfg) => overhead_factor(cfg, problem.num_bs()),
    };
    // class throughputs stand for B groups each
    let multiplicity = if a == problem.num_groups() { 1.0 } else { problem.num_bs() as f64 };
    let cluster_sum_rate = overhead * multiplicity * group_throughput.iter().sum::<f64>();
    let per_group = match &classes {
        Some(c) => c.expand(&group_throughput),
        None => group_throughput.clone(),
    };
    Ok(SpectralEfficiency {
        cell_sum_rate: cluster_sum_rate / problem.num_bs() as f64,
        per_group,
        group_throughput,
        overhead,
        cluster_sum_rate,
        symmetric,
    })
}
