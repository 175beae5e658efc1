//! Subcommand bodies. Each returns the tables to write; nothing here touches
//! the filesystem.

use netmimo_core::acceptance;
use netmimo_core::allocation::{ConstraintMode, LogBase};
use netmimo_core::asymptotic::{lambda_gains, solve_eta, solve_theta, FixedPointOptions, UserFractions};
use netmimo_core::csit::{
    csit_model_with_classes, effective_spectral_efficiency, overhead_factor, trained_problem, Csit, Fairness,
};
use netmimo_core::exec::{try_map_indexed, Execution};
use netmimo_core::geometry::EquivalenceClasses;
use netmimo_core::montecarlo::{convergence_study, finite_sim_throughput, SimConfig, SimScheduler};
use netmimo_core::scheduler::{
    default_a_max, greedy_fractions, num_iterate, pf_weights, AsymptoticModel, FractionModel, GreedyOptimizer,
    UtilityConfig, UtilityKind,
};

use crate::config::{ExperimentConfig, MonteCarloKind, SweepParameter};
use crate::error::CliError;
use crate::table::{Cell, Table};

pub struct Outcome {
    pub tables: Vec<Table>,
    /// Failed acceptance checks; only `validate` sets this.
    pub failed: usize,
}

impl From<Vec<Table>> for Outcome {
    fn from(tables: Vec<Table>) -> Self {
        Outcome { tables, failed: 0 }
    }
}

fn bits(nats: f64) -> f64 {
    LogBase::Bits.from_nats(nats)
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn overhead(cfg: &ExperimentConfig, num_bs: usize) -> f64 {
    match cfg.csit() {
        Csit::Perfect => 1.0,
        Csit::Trained(t) => overhead_factor(&t, num_bs),
    }
}

fn unit_column(classes: &Option<EquivalenceClasses>) -> &'static str {
    if classes.is_some() {
        "class"
    } else {
        "group"
    }
}

pub fn asymptotic(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mu = cfg
        .analysis
        .mu
        .clone()
        .ok_or_else(|| config_err("at `analysis.mu`: required for asymptotic"))?;
    let problem = cfg.cluster_problem()?;
    let (b, a) = (problem.num_bs(), problem.num_groups());
    let (base, scale) = match cfg.csit() {
        Csit::Perfect => (problem.clone(), vec![1.0; a]),
        Csit::Trained(t) => {
            let tp = trained_problem(&problem, &t)?;
            let scale = tp.interference.iter().map(|i| 1.0 / i).collect();
            (tp.hat, scale)
        }
    };
    let fractions = UserFractions::new(mu.clone())?;
    let eta = solve_eta(&base, &fractions, &FixedPointOptions::default())?;
    let gains = lambda_gains(&base, &eta.eta);
    let theta = solve_theta(&base, &fractions, &eta.eta, &gains)?;
    let model = AsymptoticModel::new(base.clone(), cfg.constraint.into()).with_gain_scale(scale)?;
    let eval = model.evaluate(&mu, &vec![1.0; a])?;
    let q = &eval.allocation.q;
    let factor = overhead(cfg, b);

    let mut cols = vec!["group", "mu", "lambda", "q", "rate_bits", "throughput_bits"];
    let theta_cols: Vec<String> = (0..b).map(|m| format!("theta_bs{m}")).collect();
    cols.extend(theta_cols.iter().map(String::as_str));
    let mut groups = Table::new("asymptotic_groups", &cols);
    for k in 0..a {
        let rate = bits((eval.lambda[k] * q[k]).ln_1p());
        let mut row: Vec<Cell> = vec![
            k.into(),
            mu[k].into(),
            eval.lambda[k].into(),
            q[k].into(),
            rate.into(),
            (factor * mu[k] * rate).into(),
        ];
        row.extend((0..b).map(|m| Cell::from(theta.theta[(m, k)])));
        groups.push(row);
    }

    let used = theta.bs_power(q);
    let mut stations = Table::new("asymptotic_bs", &["bs", "eta", "power", "power_used"]);
    for m in 0..b {
        stations.push(vec![m.into(), eta.eta[m].into(), base.power()[m].into(), used[m].into()]);
    }
    Ok(vec![groups, stations].into())
}

pub fn optimize(cfg: &ExperimentConfig, exec: Execution) -> Result<Outcome, CliError> {
    if cfg.analysis.mu.is_some() {
        return Err(config_err("at `analysis`: optimize needs `optimizer`, not fixed `mu`"));
    }
    let problem = cfg.cluster_problem()?;
    let opt = cfg.optimizer();
    let greedy = cfg.greedy_options(exec);
    let (model, classes) = csit_model_with_classes(&problem, &cfg.csit(), cfg.constraint.into())?;
    let a = model.num_groups();
    let unit = unit_column(&classes);
    let factor = overhead(cfg, problem.num_bs());
    // a class stands for B groups of the cluster
    let multiplicity = if classes.is_some() { problem.num_bs() as f64 } else { 1.0 };
    let mut summary = Table::new("optimize_summary", &["metric", "value"]);

    let weights = match cfg.fairness()? {
        Fairness::WeightedSum(w) => {
            if w.len() != a {
                return Err(config_err(format!(
                    "at `analysis.optimizer.weights`: expected {a} entries (one per {unit}), got {}",
                    w.len()
                )));
            }
            Some(w)
        }
        Fairness::SumRate => Some(vec![1.0; a]),
        Fairness::Proportional { .. } => None,
    };

    if let Some(num) = &opt.num {
        let kind = match &weights {
            Some(w) => UtilityKind::WeightedSum(w.clone()),
            None => UtilityKind::ProportionalFair,
        };
        let config = UtilityConfig {
            kind,
            v: num.v,
            a_max: num.a_max.unwrap_or_else(|| default_a_max(&problem)),
            horizon: num.horizon,
        };
        let optimizer = GreedyOptimizer {
            model: model.as_ref(),
            opts: greedy,
        };
        let res = num_iterate(&optimizer, &config)?;
        let mut rates = Table::new("optimize", &[unit, "avg_rate_bits", "queue"]);
        for k in 0..a {
            rates.push(vec![k.into(), bits(res.avg_rates[k]).into(), res.state.q[k].into()]);
        }
        summary.push(vec!["utility".into(), res.utility.into()]);
        summary.push(vec!["horizon".into(), num.horizon.into()]);
        return Ok(vec![rates, summary].into());
    }

    match weights {
        Some(w) => {
            let res = greedy_fractions(model.as_ref(), &w, &greedy)?;
            let mut groups = Table::new("optimize", &[unit, "mu", "lambda", "q", "rate_bits", "throughput_bits"]);
            for k in 0..a {
                groups.push(vec![
                    k.into(),
                    res.mu_star[k].into(),
                    res.lambda[k].into(),
                    res.allocation.q[k].into(),
                    bits(res.rates.group_rate[k]).into(),
                    bits(factor * res.rates.group_throughput[k]).into(),
                ]);
            }
            let mut trace = Table::new("optimize_trace", &["mu_total", "objective_bits"]);
            for p in &res.trace {
                trace.push(vec![p.mu_total.into(), bits(p.objective).into()]);
            }
            let total: f64 = res.mu_star.iter().sum();
            let sum_rate = factor * multiplicity * res.rates.sum_throughput();
            summary.push(vec!["mu_total".into(), total.into()]);
            summary.push(vec!["objective_bits".into(), bits(res.objective).into()]);
            summary.push(vec!["overhead".into(), factor.into()]);
            summary.push(vec!["cluster_sum_rate_bits".into(), bits(sum_rate).into()]);
            Ok(vec![groups, trace, summary].into())
        }
        None => {
            let eff = effective_spectral_efficiency(&problem, &cfg.csit(), &cfg.fairness()?, cfg.constraint.into(), &greedy)?;
            let mut groups = Table::new("optimize", &[unit, "throughput_bits"]);
            for (k, r) in eff.group_throughput.iter().enumerate() {
                groups.push(vec![k.into(), bits(eff.overhead * r).into()]);
            }
            summary.push(vec!["overhead".into(), eff.overhead.into()]);
            summary.push(vec!["cluster_sum_rate_bits".into(), bits(eff.cluster_sum_rate).into()]);
            summary.push(vec!["cell_sum_rate_bits".into(), bits(eff.cell_sum_rate).into()]);
            Ok(vec![groups, summary].into())
        }
    }
}

pub fn montecarlo(cfg: &ExperimentConfig, seed: u64, exec: Execution) -> Result<Outcome, CliError> {
    let spec = cfg
        .montecarlo
        .as_ref()
        .ok_or_else(|| config_err("at `montecarlo`: required for this subcommand"))?;
    if spec.seeds == 0 {
        return Err(config_err("at `montecarlo.seeds`: must be at least 1"));
    }
    let problem = cfg.cluster_problem()?;
    let (b, a) = (problem.num_bs(), problem.num_groups());

    if spec.kind == MonteCarloKind::Convergence {
        let mu = cfg
            .analysis
            .mu
            .clone()
            .ok_or_else(|| config_err("at `analysis.mu`: required for the convergence study"))?;
        let fractions = UserFractions::new(mu.clone())?;
        let eta = solve_eta(&problem, &fractions, &FixedPointOptions::default())?;
        let gains = lambda_gains(&problem, &eta.eta);
        let theta = solve_theta(&problem, &fractions, &eta.eta, &gains)?;
        let points = convergence_study(&problem, &mu, &spec.n, spec.seeds, seed, exec)?;

        let mut th = Table::new("montecarlo_theta", &["n", "bs", "group", "theta_mean", "theta_asymptotic"]);
        let mut lam = Table::new("montecarlo_lambda", &["n", "group", "lambda_mean", "lambda_std", "lambda_asymptotic"]);
        let mut summary = Table::new(
            "montecarlo_summary",
            &["n", "theta_rel_error", "lambda_rel_error", "diagonality_defect", "column_sum_defect"],
        );
        for p in &points {
            for m in 0..b {
                for k in 0..a {
                    th.push(vec![p.n.into(), m.into(), k.into(), p.mean_theta[(m, k)].into(), theta.theta[(m, k)].into()]);
                }
            }
            for k in 0..a {
                lam.push(vec![p.n.into(), k.into(), p.mean_lambda[k].into(), p.lambda_std[k].into(), gains.lambda[k].into()]);
            }
            summary.push(vec![
                p.n.into(),
                p.theta_rel_error.into(),
                p.lambda_rel_error.into(),
                p.diagonality_defect.into(),
                p.max_column_sum_defect.into(),
            ]);
        }
        return Ok(vec![th, lam, summary].into());
    }

    // asymptotic reference: proportional fairness over the time-sharing region
    let csit = cfg.csit();
    let mode: ConstraintMode = cfg.constraint.into();
    let greedy = cfg.greedy_options(exec);
    let iterations = cfg.optimizer().pf_iterations;
    let eff = effective_spectral_efficiency(&problem, &csit, &Fairness::Proportional { iterations }, mode, &greedy)?;
    let reference: Vec<f64> = eff.per_group.iter().map(|r| eff.overhead * r).collect();

    let scheduler = match spec.kind {
        MonteCarloKind::Greedy => SimScheduler::GreedySelection {
            v: spec.v,
            a_max: default_a_max(&problem),
        },
        _ => {
            let (model, classes) = csit_model_with_classes(&problem, &csit, mode)?;
            let w = pf_weights(&eff.group_throughput)?;
            let res = greedy_fractions(model.as_ref(), &w, &greedy)?;
            let expand = |v: &[f64]| match &classes {
                Some(c) => c.expand(v),
                None => v.to_vec(),
            };
            SimScheduler::Probabilistic {
                mu: expand(&res.mu_star),
                weights: expand(&w),
            }
        }
    };

    let seeds = spec.seeds as usize;
    let jobs: Vec<(usize, u64)> = spec.n.iter().flat_map(|&n| (0..spec.seeds).map(move |s| (n, s))).collect();
    let results = try_map_indexed(exec, jobs.len(), |i| {
        let (n, s) = jobs[i];
        finite_sim_throughput(
            &problem,
            &SimConfig {
                n,
                slots: spec.slots,
                seed: seed.wrapping_add(s),
                scheduler: scheduler.clone(),
                csit: csit.clone(),
            },
        )
    })?;

    let mut groups = Table::new(
        "montecarlo_throughput",
        &["n", "group", "finite_bits", "finite_std_bits", "asymptotic_bits"],
    );
    let mut summary = Table::new("montecarlo_summary", &["n", "finite_sum_bits", "asymptotic_sum_bits", "gain"]);
    let asym_sum: f64 = reference.iter().sum();
    for (j, chunk) in results.chunks(seeds).enumerate() {
        let n = spec.n[j];
        let count = chunk.len() as f64;
        let mut total = 0.0;
        for k in 0..a {
            let mean = chunk.iter().map(|r| r.group_throughput[k]).sum::<f64>() / count;
            let var = chunk.iter().map(|r| (r.group_throughput[k] - mean).powi(2)).sum::<f64>() / (count - 1.0).max(1.0);
            total += mean;
            groups.push(vec![n.into(), k.into(), bits(mean).into(), bits(var.sqrt()).into(), bits(reference[k]).into()]);
        }
        summary.push(vec![n.into(), bits(total).into(), bits(asym_sum).into(), (total / asym_sum - 1.0).into()]);
    }
    Ok(vec![groups, summary].into())
}

pub fn sweep(cfg: &ExperimentConfig, exec: Execution) -> Result<Outcome, CliError> {
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| config_err("at `sweep`: required for this subcommand"))?;

    if spec.parameter == SweepParameter::MuTotal {
        let problem = cfg.cluster_problem()?;
        let (model, _) = csit_model_with_classes(&problem, &cfg.csit(), cfg.constraint.into())?;
        let w = match cfg.fairness()? {
            Fairness::SumRate => vec![1.0; model.num_groups()],
            Fairness::WeightedSum(w) => w,
            Fairness::Proportional { .. } => {
                return Err(config_err("at `sweep.parameter`: `mu_total` needs a weighted-sum objective"))
            }
        };
        let mut opts = cfg.greedy_options(exec);
        opts.full_sweep = true;
        let mut table = Table::new("sweep", &["mu_total", "objective_bits"]);
        if spec.values.is_empty() {
            return Ok(vec![table].into());
        }
        let res = greedy_fractions(model.as_ref(), &w, &opts)?;
        let half = opts.delta_mu / 2.0;
        for &v in &spec.values {
            let point = res
                .trace
                .iter()
                .find(|p| (p.mu_total - v).abs() < half)
                .ok_or_else(|| config_err(format!("at `sweep.values`: total load {v} is outside the traced range")))?;
            table.push(vec![point.mu_total.into(), bits(point.objective).into()]);
        }
        return Ok(vec![table].into());
    }

    // row order: series axes outermost, in the order given, then `values`
    let mut axes: Vec<(SweepParameter, &[f64])> = spec.series.iter().map(|s| (s.parameter, s.values.as_slice())).collect();
    axes.push((spec.parameter, spec.values.as_slice()));
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for (_, values) in &axes {
        points = points
            .iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    if axes.iter().any(|(_, v)| v.is_empty()) {
        points.clear();
    }

    let fairness = cfg.fairness()?;
    let mode: ConstraintMode = cfg.constraint.into();
    // the points carry the parallelism; each inner search runs sequentially
    let inner = cfg.greedy_options(Execution::Sequential);
    let rows = try_map_indexed(exec, points.len(), |i| {
        let mut c = cfg.clone();
        for (&(param, _), &v) in axes.iter().zip(&points[i]) {
            c = c.with_parameter(param, v)?;
        }
        let problem = c.cluster_problem()?;
        let eff = effective_spectral_efficiency(&problem, &c.csit(), &fairness, mode, &inner)?;
        Ok::<_, CliError>(eff)
    })?;

    let mut cols: Vec<&str> = axes.iter().map(|(p, _)| p.column()).collect();
    cols.extend(["overhead", "cluster_sum_rate_bits", "cell_sum_rate_bits"]);
    let mut table = Table::new("sweep", &cols);
    for (p, eff) in points.iter().zip(&rows) {
        let mut row: Vec<Cell> = p.iter().map(|&v| Cell::from(v)).collect();
        row.push(eff.overhead.into());
        row.push(bits(eff.cluster_sum_rate).into());
        row.push(bits(eff.cell_sum_rate).into());
        table.push(row);
    }
    Ok(vec![table].into())
}

pub fn validate(cfg: &ExperimentConfig, exec: Execution) -> Result<Outcome, CliError> {
    let checks: Vec<u8> = match &cfg.validate {
        Some(v) => v.checks.clone(),
        None => acceptance::ALL.to_vec(),
    };
    if let Some(bad) = checks.iter().find(|id| !acceptance::ALL.contains(id)) {
        return Err(config_err(format!("at `validate.checks`: no check with id {bad}")));
    }
    // timings stay on stdout so the table is reproducible
    let mut table = Table::new("validate", &["id", "name", "passed"]);
    let mut failed = 0;
    for id in checks {
        let report = acceptance::run(id, exec);
        println!("{report}");
        if !report.passed {
            failed += 1;
        }
        table.push(vec![(id as usize).into(), report.name.into(), report.passed.into()]);
    }
    Ok(Outcome {
        tables: vec![table],
        failed,
    })
}
