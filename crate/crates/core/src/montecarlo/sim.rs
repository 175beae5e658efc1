use faer::{c64, Mat};

use crate::allocation::waterfill_sum;
use crate::asymptotic::{lambda_gains, solve_eta, solve_theta, FixedPointOptions, UserFractions};
use crate::csit::{overhead_factor, trained_problem, Csit};
use crate::error::{check_len, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::geometry::ClusterProblem;
use crate::scheduler::{utility_subproblem, UtilityConfig, UtilityKind, WARM_START};

use super::channel::{antennas_per_bs, sample_channel, sample_users, slot_rng};
use super::schedule::probabilistic_schedule;
use super::selection::greedy_select_scaled;
use super::zf::{diagonality_defect, empirical_theta, zf_pseudo_inverse};

/// Finite-N statistics at one `N`, over all seeds.
#[derive(Debug, Clone)]
pub struct ConvergencePoint {
    pub n: usize,
    pub mean_theta: Mat<f64>,
    /// Max over `(m, k)` with `theta > 0` of `|mean theta_fd - theta| / theta`.
    pub theta_rel_error: f64,
    /// Per group, seed mean of the group-averaged `Lambda_i`.
    pub mean_lambda: Vec<f64>,
    /// Max over groups of the relative error of `mean_lambda`.
    pub lambda_rel_error: f64,
    /// Per group, sample standard deviation over seeds of the group-averaged
    /// `Lambda_i`.
    pub lambda_std: Vec<f64>,
    /// ZF defect of the first seed's precoder (the product costs as much as
    /// the precoder itself, so it is not repeated).
    pub diagonality_defect: f64,
    pub max_column_sum_defect: f64,
}

struct SeedStats {
    theta: Mat<f64>,
    lambda: Vec<f64>,
    diag_defect: Option<f64>,
    colsum_defect: f64,
}

/// Finite-N theta and gain statistics against the asymptotic values, seeds
/// `0..seeds` under `master`. Seeds run through `exec`; sums are taken in
/// seed order.
pub fn convergence_study(
    problem: &ClusterProblem,
    mu: &[f64],
    ns: &[usize],
    seeds: u64,
    master: u64,
    exec: Execution,
) -> Result<Vec<ConvergencePoint>> {
    let fractions = UserFractions::new(mu.to_vec())?;
    let eta = solve_eta(problem, &fractions, &FixedPointOptions::default())?;
    let gains = lambda_gains(problem, &eta.eta);
    let theta = solve_theta(problem, &fractions, &eta.eta, &gains)?;
    let (b, a) = (problem.num_bs(), problem.num_groups());
    ns.iter()
        .map(|&n| {
            let stats = try_map_indexed(exec, seeds as usize, |s| {
                let c = sample_channel(problem, mu, n, master, s as u64)?;
                let zf = zf_pseudo_inverse(&c.h)?;
                let th = empirical_theta(&zf.v, &c.row_bs, &c.col_group, b, a, n)?;
                let mut lambda = vec![0.0; a];
                for (j, &k) in c.col_group.iter().enumerate() {
                    lambda[k] += zf.lambda[j];
                }
                let mut colsum_defect = 0.0f64;
                for k in 0..a {
                    if c.active_counts[k] > 0 {
                        lambda[k] /= c.active_counts[k] as f64;
                    }
                    let s: f64 = (0..b).map(|m| th[(m, k)]).sum();
                    colsum_defect = colsum_defect.max((s - c.active_counts[k] as f64 / n as f64).abs());
                }
                Ok(SeedStats {
                    theta: th,
                    lambda,
                    diag_defect: (s == 0).then(|| diagonality_defect(&c.h, &zf)),
                    colsum_defect,
                })
            })?;
            let count = stats.len() as f64;
            let mut mean_theta = Mat::<f64>::zeros(b, a);
            let mut mean_lambda = vec![0.0; a];
            for s in &stats {
                for k in 0..a {
                    for m in 0..b {
                        mean_theta[(m, k)] += s.theta[(m, k)] / count;
                    }
                    mean_lambda[k] += s.lambda[k] / count;
                }
            }
            let lambda_std: Vec<f64> = (0..a)
                .map(|k| {
                    let var = stats.iter().map(|s| (s.lambda[k] - mean_lambda[k]).powi(2)).sum::<f64>()
                        / (count - 1.0).max(1.0);
                    var.sqrt()
                })
                .collect();
            let mut theta_rel_error = 0.0f64;
            for k in 0..a {
                for m in 0..b {
                    let t = theta.theta[(m, k)];
                    if t > 0.0 {
                        theta_rel_error = theta_rel_error.max((mean_theta[(m, k)] - t).abs() / t);
                    }
                }
            }
            let lambda_rel_error = (0..a)
                .filter(|&k| mu[k] > 0.0)
                .map(|k| (mean_lambda[k] - gains.lambda[k]).abs() / gains.lambda[k])
                .fold(0.0, f64::max);
            Ok(ConvergencePoint {
                n,
                mean_theta,
                theta_rel_error,
                mean_lambda,
                lambda_rel_error,
                lambda_std,
                diagonality_defect: stats.first().and_then(|s| s.diag_defect).unwrap_or(0.0),
                max_column_sum_defect: stats.iter().map(|s| s.colsum_defect).fold(0.0, f64::max),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimScheduler {
    /// Greedy ZF selection over all users, weighted by per-user proportional
    /// fair virtual queues.
    GreedySelection { v: f64, a_max: f64 },
    /// Random pre-selection with fractions `mu` and fixed group weights.
    Probabilistic { mu: Vec<f64>, weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub slots: usize,
    pub seed: u64,
    pub scheduler: SimScheduler,
    pub csit: Csit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Per group, time-averaged throughput per user (nats), after the
    /// training overhead factor.
    pub group_throughput: Vec<f64>,
    /// Per user (group-major), same units.
    pub user_throughput: Vec<f64>,
    pub slots: usize,
}

impl SimResult {
    pub fn total(&self) -> f64 {
        self.group_throughput.iter().sum()
    }
}

/// Slot-by-slot finite-N simulation of one cluster under a sum-power budget
/// `N sum_m P_m`.
///
/// Each slot draws a fresh channel for all `A N` users. With trained CSIT the
/// precoder is built on the estimated channel (gains `betahat2`) and rates
/// use the estimated-CSIT bound, scaled by the overhead factor.
pub fn finite_sim_throughput(problem: &ClusterProblem, cfg: &SimConfig) -> Result<SimResult> {
    let (b, a, n) = (problem.num_bs(), problem.num_groups(), cfg.n);
    let antennas = antennas_per_bs(problem.gamma(), n)?;
    let streams = b * antennas;
    let users = a * n;
    let (beta2, interference, overhead) = match &cfg.csit {
        Csit::Perfect => (problem.beta2().clone(), vec![1.0; a], 1.0),
        Csit::Trained(t) => {
            let tp = trained_problem(problem, t)?;
            (tp.gains.beta_hat2, tp.interference, overhead_factor(t, b))
        }
    };
    let user_scale: Vec<f64> = (0..users).map(|u| 1.0 / interference[u / n]).collect();
    let budget = n as f64 * problem.total_power();
    let pf = match &cfg.scheduler {
        SimScheduler::GreedySelection { v, a_max } => Some(UtilityConfig {
            kind: UtilityKind::ProportionalFair,
            v: *v,
            a_max: *a_max,
            horizon: cfg.slots,
        }),
        SimScheduler::Probabilistic { mu, weights } => {
            check_len("mu", a, mu.len())?;
            check_len("weights", a, weights.len())?;
            None
        }
    };
    let mut queues = vec![0.0; users];
    let mut total = vec![0.0; users];
    let counts = vec![n; a];
    for t in 0..cfg.slots {
        let ch = sample_users(&beta2, &counts, antennas, n, cfg.seed, t as u64)?;
        let mut served = vec![0.0; users];
        match &cfg.scheduler {
            SimScheduler::GreedySelection { .. } => {
                let w: Vec<f64> = if t < WARM_START { vec![1.0; users] } else { queues.clone() };
                let sel = greedy_select_scaled(&ch.h, &w, Some(&user_scale), budget, streams)?;
                for (i, &u) in sel.selected.iter().enumerate() {
                    served[u] = sel.rates[i];
                }
                let pf = pf.as_ref().expect("set for greedy mode");
                let arrivals = utility_subproblem(&queues, pf);
                for u in 0..users {
                    queues[u] = (queues[u] - served[u]).max(0.0) + arrivals[u];
                }
            }
            SimScheduler::Probabilistic { mu, weights } => {
                let mut rng = slot_rng(cfg.seed, t as u64);
                let plan = probabilistic_schedule(mu, streams, n, &mut rng)?;
                let chosen: Vec<usize> = plan.users().iter().map(|&(k, j)| k * n + j).collect();
                if chosen.is_empty() {
                    continue;
                }
                let sub = Mat::<c64>::from_fn(streams, chosen.len(), |i, j| ch.h[(i, chosen[j])]);
                let zf = zf_pseudo_inverse(&sub)?;
                let lambda: Vec<f64> = chosen.iter().zip(&zf.lambda).map(|(&u, l)| l * user_scale[u]).collect();
                let w: Vec<f64> = chosen.iter().map(|&u| weights[u / n]).collect();
                let alloc = waterfill_sum(&w, &lambda, &vec![1.0; chosen.len()], budget)?;
                for (i, &u) in chosen.iter().enumerate() {
                    served[u] = (lambda[i] * alloc.q[i]).ln_1p();
                }
            }
        }
        for u in 0..users {
            total[u] += served[u];
        }
    }
    let slots = cfg.slots.max(1) as f64;
    let user_throughput: Vec<f64> = total.iter().map(|x| overhead * x / slots).collect();
    let group_throughput = (0..a)
        .map(|k| user_throughput[k * n..(k + 1) * n].iter().sum::<f64>() / n as f64)
        .collect();
    Ok(SimResult {
        group_throughput,
        user_throughput,
        slots: cfg.slots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;

    #[test]
    fn one_slot_is_reproducible() {
        let p = reference::two_cell_problem();
        let cfg = SimConfig {
            n: 2,
            slots: 1,
            seed: 99,
            scheduler: SimScheduler::GreedySelection { v: 100.0, a_max: 10.0 },
            csit: Csit::Perfect,
        };
        let a = finite_sim_throughput(&p, &cfg).unwrap();
        let b = finite_sim_throughput(&p, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.total() > 0.0);
    }

    #[test]
    fn study_identities_hold() {
        let p = reference::two_cell_problem();
        let pts = convergence_study(&p, &reference::TWO_CELL_MU, &[4, 8], 3, 1, Execution::Sequential).unwrap();
        for pt in &pts {
            assert!(pt.max_column_sum_defect < 1e-12);
            assert!(pt.diagonality_defect < 1e-9);
        }
        let par = convergence_study(&p, &reference::TWO_CELL_MU, &[4, 8], 3, 1, Execution::Parallel).unwrap();
        for (x, y) in pts.iter().zip(&par) {
            assert_eq!(x.mean_theta, y.mean_theta);
        }
    }
}
