//! User-fraction optimization.
//!
//! [`greedy_fractions`] raises one group's fraction by `delta_mu` at a time,
//! always taking the increment with the largest weighted sum rate.
//! [`num_iterate`] wraps a weighted-sum-rate optimizer in virtual queues to
//! maximize a concave network utility of the long-run group throughputs.

use crate::allocation::{
    group_rates, waterfill_perbs, waterfill_sum, ConstraintMode, DualOptions, LogBase,
    Multiplier, PowerAllocation, RatePoint,
};
use crate::asymptotic::{
    lambda_gains, solve_eta, solve_theta, FixedPointOptions, UserFractions, LOAD_MARGIN,
};
use crate::error::{check_len, Error, Result};
use crate::exec::{try_map_indexed, Execution};
use crate::geometry::{ClusterProblem, EquivalenceClasses};

/// Gains and optimal power allocation at one fraction vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub lambda: Vec<f64>,
    pub allocation: PowerAllocation,
}

/// A weighted-sum-rate program over user fractions.
pub trait FractionModel: Sync {
    fn num_groups(&self) -> usize;

    /// Largest admissible total `sum_k mu_k`.
    fn max_load(&self) -> f64;

    fn evaluate(&self, mu: &[f64], w: &[f64]) -> Result<Evaluation>;
}

/// The general cluster problem: large-system gains, then sum-power or per-BS
/// allocation.
#[derive(Debug, Clone)]
pub struct AsymptoticModel {
    pub problem: ClusterProblem,
    pub mode: ConstraintMode,
    /// Optional per-group factor applied to the gains before allocation;
    /// used for the estimated-CSIT bound, where it is `1 / (1 + sum_m
    /// betabar2[m][k] P_m)`.
    pub gain_scale: Option<Vec<f64>>,
    pub fixed_point: FixedPointOptions,
    pub dual: DualOptions,
}

impl AsymptoticModel {
    pub fn new(problem: ClusterProblem, mode: ConstraintMode) -> Self {
        Self {
            problem,
            mode,
            gain_scale: None,
            fixed_point: FixedPointOptions::default(),
            dual: DualOptions::default(),
        }
    }

    pub fn with_gain_scale(mut self, scale: Vec<f64>) -> Result<Self> {
        check_len("gain scale", self.problem.num_groups(), scale.len())?;
        self.gain_scale = Some(scale);
        Ok(self)
    }
}

fn empty_allocation(a: usize, mode: ConstraintMode) -> PowerAllocation {
    PowerAllocation {
        q: vec![0.0; a],
        multiplier: Multiplier::Unset,
        mode,
        objective: 0.0,
        duality_gap: 0.0,
        iterations: 0,
    }
}

impl FractionModel for AsymptoticModel {
    fn num_groups(&self) -> usize {
        self.problem.num_groups()
    }

    fn max_load(&self) -> f64 {
        self.problem.load_capacity() - LOAD_MARGIN
    }

    fn evaluate(&self, mu: &[f64], w: &[f64]) -> Result<Evaluation> {
        let a = self.problem.num_groups();
        check_len("weights", a, w.len())?;
        let fractions = UserFractions::new(mu.to_vec())?;
        let eta = solve_eta(&self.problem, &fractions, &self.fixed_point)?;
        let mut lambda = lambda_gains(&self.problem, &eta.eta).lambda;
        if let Some(scale) = &self.gain_scale {
            for (l, s) in lambda.iter_mut().zip(scale) {
                *l *= s;
            }
        }
        if fractions.total() == 0.0 {
            return Ok(Evaluation {
                lambda,
                allocation: empty_allocation(a, self.mode),
            });
        }
        let allocation = match self.mode {
            ConstraintMode::SumPower => waterfill_sum(w, &lambda, mu, self.problem.total_power())?,
            ConstraintMode::PerBs => {
                let gains = lambda_gains(&self.problem, &eta.eta);
                let theta = solve_theta(&self.problem, &fractions, &eta.eta, &gains)?;
                match waterfill_perbs(w, &lambda, mu, &theta.theta, self.problem.power(), &self.dual) {
                    Ok(alloc) => alloc,
                    // the best iterate is feasible; keep going with it
                    Err(Error::DualNotConverged {
                        iterations,
                        best_objective,
                        best_q,
                        ..
                    }) => PowerAllocation {
                        q: best_q,
                        multiplier: Multiplier::Unset,
                        mode: ConstraintMode::PerBs,
                        objective: best_objective,
                        duality_gap: f64::NAN,
                        iterations,
                    },
                    Err(e) => return Err(e),
                }
            }
        };
        Ok(Evaluation { lambda, allocation })
    }
}

/// Class-level program of a circulant-symmetric cluster with equal BS
/// powers. The decision variables are the class fractions `mu'_i`; every BS
/// carries `sum_i mu'_i q'_i <= P` and the objective is `B sum_i W_i mu'_i
/// log(1 + (gamma - mu') beta_i^2 q'_i)` with `mu' = sum_i mu'_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricReduction {
    pub gamma: f64,
    pub num_bs: usize,
    pub class_gain: Vec<f64>,
    pub per_bs_power: f64,
}

impl SymmetricReduction {
    pub fn from_problem(problem: &ClusterProblem, classes: &EquivalenceClasses) -> Result<Self> {
        if !classes.is_symmetric {
            return Err(Error::NotSymmetric);
        }
        let p = problem.power()[0];
        if problem.power().iter().any(|&x| (x - p).abs() > 1e-12 * p.abs().max(1.0)) {
            return Err(Error::invalid("power", "symmetric reduction needs equal BS powers"));
        }
        Ok(Self {
            gamma: problem.gamma(),
            num_bs: problem.num_bs(),
            class_gain: classes.class_gains(problem),
            per_bs_power: p,
        })
    }

    /// Class gains `(gamma - mu') beta_i^2` for class fractions `mu_prime`.
    pub fn gains(&self, mu_prime: &[f64]) -> Vec<f64> {
        let load: f64 = mu_prime.iter().sum();
        let eta = (1.0 - load / self.gamma).max(0.0);
        self.class_gain.iter().map(|g| self.gamma * eta * g).collect()
    }
}

impl FractionModel for SymmetricReduction {
    fn num_groups(&self) -> usize {
        self.class_gain.len()
    }

    fn max_load(&self) -> f64 {
        self.gamma
    }

    fn evaluate(&self, mu: &[f64], w: &[f64]) -> Result<Evaluation> {
        check_len("mu_prime", self.class_gain.len(), mu.len())?;
        check_len("weights", self.class_gain.len(), w.len())?;
        let lambda = self.gains(mu);
        let mut allocation = waterfill_sum(w, &lambda, mu, self.per_bs_power)?;
        allocation.objective *= self.num_bs as f64;
        Ok(Evaluation { lambda, allocation })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyOptions {
    pub delta_mu: f64,
    /// Keep stepping after the objective stops improving, to trace the whole
    /// load range.
    pub full_sweep: bool,
    pub exec: Execution,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        Self {
            delta_mu: 0.01,
            full_sweep: false,
            exec: Execution::Sequential,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub mu_total: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyResult {
    pub mu_star: Vec<f64>,
    pub lambda: Vec<f64>,
    pub allocation: PowerAllocation,
    pub rates: RatePoint,
    pub objective: f64,
    pub trace: Vec<TracePoint>,
}

/// Greedy fraction search.
///
/// Fractions are kept as integer step counts so repeated increments do not
/// drift off the `delta_mu` grid. Equal objectives go to the lowest group
/// index. The result is the best point visited, which in the default mode is
/// the exit point.
pub fn greedy_fractions<M: FractionModel + ?Sized>(
    model: &M,
    w: &[f64],
    opts: &GreedyOptions,
) -> Result<GreedyResult> {
    let a = model.num_groups();
    check_len("weights", a, w.len())?;
    let dmu = opts.delta_mu;
    if !(dmu > 0.0 && dmu <= 1.0) {
        return Err(Error::invalid("delta_mu", format!("{dmu} is outside (0, 1]")));
    }
    let max_steps = (1.0 / dmu + 1e-9).floor() as usize;
    let load_steps = (model.max_load() / dmu + 1e-9).floor() as usize;
    let mut steps = vec![0usize; a];
    let mut total = 0usize;
    let to_mu = |s: &[usize]| s.iter().map(|&n| n as f64 * dmu).collect::<Vec<_>>();

    let mut current = model.evaluate(&to_mu(&steps), w)?;
    let mut best = (steps.clone(), current.clone());
    let mut trace = vec![TracePoint {
        mu_total: 0.0,
        objective: current.allocation.objective,
    }];
    while total < load_steps {
        let candidates: Vec<usize> = (0..a).filter(|&k| steps[k] < max_steps).collect();
        if candidates.is_empty() {
            break;
        }
        let evals = try_map_indexed(opts.exec, candidates.len(), |i| {
            let mut s = steps.clone();
            s[candidates[i]] += 1;
            model.evaluate(&to_mu(&s), w)
        })?;
        let mut pick = 0;
        for (i, e) in evals.iter().enumerate() {
            if e.allocation.objective > evals[pick].allocation.objective {
                pick = i;
            }
        }
        let improves = evals[pick].allocation.objective > current.allocation.objective;
        if !improves && !opts.full_sweep {
            break;
        }
        steps[candidates[pick]] += 1;
        total += 1;
        current = evals.into_iter().nth(pick).expect("pick indexes evals");
        trace.push(TracePoint {
            mu_total: total as f64 * dmu,
            objective: current.allocation.objective,
        });
        if current.allocation.objective > best.1.allocation.objective {
            best = (steps.clone(), current.clone());
        }
    }
    let (best_steps, eval) = best;
    let mu_star = to_mu(&best_steps);
    let rates = group_rates(&eval.lambda, &eval.allocation.q, &mu_star, LogBase::Nats)?;
    Ok(GreedyResult {
        objective: eval.allocation.objective,
        mu_star,
        lambda: eval.lambda,
        allocation: eval.allocation,
        rates,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum UtilityKind {
    ProportionalFair,
    AlphaFair(f64),
    /// Linear utility `sum_k c_k r_k`.
    WeightedSum(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityConfig {
    pub kind: UtilityKind,
    pub v: f64,
    pub a_max: f64,
    pub horizon: usize,
}

impl UtilityConfig {
    /// `V = 1000`, `a_max = 2 log(1 + gamma max(beta^2) P_sum)`.
    pub fn with_defaults(kind: UtilityKind, problem: &ClusterProblem, horizon: usize) -> Self {
        Self {
            kind,
            v: 1000.0,
            a_max: default_a_max(problem),
            horizon,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.v > 0.0 && self.v.is_finite()) {
            return Err(Error::invalid("V", "must be positive"));
        }
        if !(self.a_max > 0.0 && self.a_max.is_finite()) {
            return Err(Error::invalid("a_max", "must be positive"));
        }
        if let UtilityKind::AlphaFair(alpha) = self.kind {
            if !(alpha > 0.0) {
                return Err(Error::invalid("alpha", "must be positive"));
            }
        }
        Ok(())
    }

    /// `g(r)`; `-inf` for PF or alpha >= 1 when some rate is zero.
    pub fn utility(&self, r: &[f64]) -> f64 {
        match &self.kind {
            UtilityKind::ProportionalFair => r.iter().map(|x| x.ln()).sum(),
            UtilityKind::AlphaFair(alpha) if (*alpha - 1.0).abs() < 1e-12 => {
                r.iter().map(|x| x.ln()).sum()
            }
            UtilityKind::AlphaFair(alpha) => {
                r.iter().map(|x| x.powf(1.0 - alpha) / (1.0 - alpha)).sum()
            }
            UtilityKind::WeightedSum(c) => c.iter().zip(r).map(|(c, x)| c * x).sum(),
        }
    }
}

pub fn default_a_max(problem: &ClusterProblem) -> f64 {
    2.0 * (problem.gamma() * problem.max_beta2() * problem.total_power()).ln_1p()
}

/// Arrival control: maximizes `V g(a) - sum_k Q_k a_k` over `0 <= a <= a_max`.
pub fn utility_subproblem(queues: &[f64], config: &UtilityConfig) -> Vec<f64> {
    let a_max = config.a_max;
    queues
        .iter()
        .enumerate()
        .map(|(k, &q)| match &config.kind {
            UtilityKind::ProportionalFair if q > 0.0 => (config.v / q).min(a_max),
            UtilityKind::AlphaFair(alpha) if q > 0.0 => (config.v / q).powf(1.0 / alpha).min(a_max),
            UtilityKind::WeightedSum(c) => {
                if config.v * c.get(k).copied().unwrap_or(1.0) > q {
                    a_max
                } else {
                    0.0
                }
            }
            _ => a_max,
        })
        .collect()
}

/// `W_k = 1 / R_k`.
pub fn pf_weights(avg_rates: &[f64]) -> Result<Vec<f64>> {
    avg_rates
        .iter()
        .enumerate()
        .map(|(k, &r)| if r > 0.0 { Ok(1.0 / r) } else { Err(Error::ZeroRate { group: k }) })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualQueueState {
    pub q: Vec<f64>,
    pub t: usize,
    /// Time average of the served group throughputs `r_k(t)`.
    pub running_rate_avg: Vec<f64>,
}

impl VirtualQueueState {
    pub fn new(num_groups: usize) -> Self {
        Self {
            q: vec![0.0; num_groups],
            t: 0,
            running_rate_avg: vec![0.0; num_groups],
        }
    }

    /// `Q <- [Q - r]_+ + a`, and folds `r` into the running average.
    pub fn update(&mut self, served: &[f64], arrivals: &[f64]) {
        self.t += 1;
        let n = self.t as f64;
        for k in 0..self.q.len() {
            self.q[k] = (self.q[k] - served[k]).max(0.0) + arrivals[k];
            self.running_rate_avg[k] += (served[k] - self.running_rate_avg[k]) / n;
        }
    }
}

/// Inner weighted-sum-rate oracle used by [`num_iterate`].
pub trait FractionOptimizer {
    fn num_groups(&self) -> usize;

    /// Served group throughputs `mu_k R_k` (nats) for weights `w`.
    fn serve(&self, w: &[f64]) -> Result<Vec<f64>>;
}

/// [`greedy_fractions`] on a model, as a [`FractionOptimizer`].
pub struct GreedyOptimizer<'a, M: FractionModel + ?Sized> {
    pub model: &'a M,
    pub opts: GreedyOptions,
}

impl<M: FractionModel + ?Sized> FractionOptimizer for GreedyOptimizer<'_, M> {
    fn num_groups(&self) -> usize {
        self.model.num_groups()
    }

    fn serve(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.iter().all(|&x| x == 0.0) {
            return Ok(vec![0.0; w.len()]);
        }
        Ok(greedy_fractions(self.model, w, &self.opts)?.rates.group_throughput)
    }
}

/// Long-run group throughputs under proportional fairness over the
/// time-sharing region: running averages of weighted-sum solutions with
/// `W_k = 1 / Rbar_k` (a Frank-Wolfe iteration on `sum_k log Rbar_k`).
/// Exact per-slot solver for small problems under a sum-power budget: every
/// point of the `delta_mu` grid is scored. Gains do not depend on the
/// weights, so they are computed once.
pub struct GridOptimizer {
    points: Vec<(Vec<f64>, Vec<f64>)>,
    p_sum: f64,
    num_groups: usize,
}

impl GridOptimizer {
    pub fn new<M: FractionModel + ?Sized>(model: &M, p_sum: f64, delta_mu: f64) -> Result<Self> {
        if !(delta_mu > 0.0 && delta_mu <= 1.0) {
            return Err(Error::invalid("delta_mu", format!("{delta_mu} is outside (0, 1]")));
        }
        let a = model.num_groups();
        let steps = (1.0 / delta_mu + 1e-9).floor() as usize;
        let load_steps = (model.max_load() / delta_mu + 1e-9).floor() as usize;
        let ones = vec![1.0; a];
        let mut points = Vec::new();
        let mut idx = vec![0usize; a];
        'grid: loop {
            if idx.iter().sum::<usize>() <= load_steps {
                let mu: Vec<f64> = idx.iter().map(|&i| i as f64 * delta_mu).collect();
                match model.evaluate(&mu, &ones) {
                    Ok(e) => points.push((mu, e.lambda)),
                    Err(Error::InfeasibleLoad { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            for d in 0..a {
                idx[d] += 1;
                if idx[d] <= steps {
                    continue 'grid;
                }
                idx[d] = 0;
            }
            break;
        }
        Ok(Self {
            points,
            p_sum,
            num_groups: a,
        })
    }
}

impl FractionOptimizer for GridOptimizer {
    fn num_groups(&self) -> usize {
        self.num_groups
    }

    fn serve(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len("weights", self.num_groups, w.len())?;
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for (i, (mu, lambda)) in self.points.iter().enumerate() {
            let alloc = waterfill_sum(w, lambda, mu, self.p_sum)?;
            if best.as_ref().is_none_or(|b| alloc.objective > b.0) {
                best = Some((alloc.objective, i, alloc.q));
            }
        }
        let Some((_, i, q)) = best else {
            return Ok(vec![0.0; self.num_groups]);
        };
        let (mu, lambda) = &self.points[i];
        Ok(group_rates(lambda, &q, mu, LogBase::Nats)?.group_throughput)
    }
}

pub fn pf_average_rates<O: FractionOptimizer + ?Sized>(optimizer: &O, iterations: usize) -> Result<Vec<f64>> {
    let a = optimizer.num_groups();
    let mut avg = optimizer.serve(&vec![1.0; a])?;
    for t in 0..iterations {
        let peak = avg.iter().copied().fold(0.0, f64::max);
        if peak == 0.0 {
            break;
        }
        let floor = 1e-6 * peak;
        let w: Vec<f64> = avg.iter().map(|r| 1.0 / r.max(floor)).collect();
        let served = optimizer.serve(&w)?;
        let step = 2.0 / (t as f64 + 3.0);
        for (x, y) in avg.iter_mut().zip(&served) {
            *x += step * (y - *x);
        }
    }
    Ok(avg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumResult {
    pub avg_rates: Vec<f64>,
    pub utility: f64,
    pub state: VirtualQueueState,
}

/// Iterations that use unit weights before switching to `W = Q(t)`.
pub const WARM_START: usize = 10;

/// Drift-plus-penalty iteration for `horizon` steps.
pub fn num_iterate<O: FractionOptimizer + ?Sized>(
    optimizer: &O,
    config: &UtilityConfig,
) -> Result<NumResult> {
    config.validate()?;
    let a = optimizer.num_groups();
    if let UtilityKind::WeightedSum(c) = &config.kind {
        check_len("utility weights", a, c.len())?;
    }
    let mut state = VirtualQueueState::new(a);
    let ones = vec![1.0; a];
    for t in 0..config.horizon {
        let arrivals = utility_subproblem(&state.q, config);
        let w = if t < WARM_START { &ones } else { &state.q };
        let served = optimizer.serve(w)?;
        state.update(&served, &arrivals);
    }
    let avg_rates = state.running_rate_avg.clone();
    Ok(NumResult {
        utility: config.utility(&avg_rates),
        avg_rates,
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{db_to_linear, detect_symmetry, DEFAULT_SYMMETRY_TOL};
    use crate::reference;

    fn two_cell_reduction() -> SymmetricReduction {
        let p = reference::two_cell_problem();
        let c = detect_symmetry(&p, DEFAULT_SYMMETRY_TOL);
        SymmetricReduction::from_problem(&p, &c).unwrap()
    }

    #[test]
    fn reduction_matches_general_model() {
        let red = two_cell_reduction();
        let general = AsymptoticModel::new(reference::two_cell_problem(), ConstraintMode::PerBs);
        let mu_prime = [0.5, 0.5, 0.75, 1.0];
        let mu: Vec<f64> = (0..8).map(|k| mu_prime[k % 4]).collect();
        let r = red.evaluate(&mu_prime, &[1.0; 4]).unwrap();
        let g = general.evaluate(&mu, &[1.0; 8]).unwrap();
        assert!((r.allocation.objective - g.allocation.objective).abs() < 1e-8);
        let sum = AsymptoticModel::new(reference::two_cell_problem(), ConstraintMode::SumPower);
        let s = sum.evaluate(&mu, &[1.0; 8]).unwrap();
        assert!((r.allocation.objective - s.allocation.objective).abs() < 1e-8);
    }

    #[test]
    fn greedy_load_optimum() {
        let red = two_cell_reduction();
        assert!((red.per_bs_power - db_to_linear(15.0)).abs() < 1e-12);
        let res = greedy_fractions(&red, &[1.0; 4], &GreedyOptions::default()).unwrap();
        let total: f64 = res.mu_star.iter().sum();
        assert!((total - 2.76).abs() <= 0.01 + 1e-9, "{total}");
        for w in res.trace.windows(2) {
            assert!(w[1].objective > w[0].objective);
        }
    }

    #[test]
    fn argmax_stable_under_halving_delta() {
        let red = two_cell_reduction();
        let sweep = |d: f64| {
            let o = GreedyOptions {
                delta_mu: d,
                full_sweep: true,
                ..Default::default()
            };
            greedy_fractions(&red, &[1.0; 4], &o).unwrap()
        };
        let a = sweep(0.02);
        let b = sweep(0.01);
        let ta: f64 = a.mu_star.iter().sum();
        let tb: f64 = b.mu_star.iter().sum();
        assert!((ta - tb).abs() <= 0.02 + 1e-9);
        // full sweep runs to the load limit
        assert!((b.trace.last().unwrap().mu_total - 4.0).abs() < 1e-9);
    }

    #[test]
    fn zero_power_exits_immediately() {
        let red = SymmetricReduction {
            per_bs_power: 0.0,
            ..two_cell_reduction()
        };
        let res = greedy_fractions(&red, &[1.0; 4], &GreedyOptions::default()).unwrap();
        assert_eq!(res.objective, 0.0);
        assert!(res.mu_star.iter().all(|&m| m == 0.0));
        assert_eq!(res.trace.len(), 1);
    }

    #[test]
    fn two_class_toy_matches_exhaustive() {
        let red = SymmetricReduction {
            gamma: 1.5,
            num_bs: 2,
            class_gain: vec![1.0, 0.3],
            per_bs_power: 20.0,
        };
        let d = 0.05;
        let res = greedy_fractions(&red, &[1.0, 1.0], &GreedyOptions { delta_mu: d, ..Default::default() })
            .unwrap();
        let mut best = 0.0f64;
        for i in 0..=20 {
            for j in 0..=20 {
                let mu = [i as f64 * d, j as f64 * d];
                if mu[0] + mu[1] <= 1.5 + 1e-12 {
                    best = best.max(red.evaluate(&mu, &[1.0, 1.0]).unwrap().allocation.objective);
                }
            }
        }
        assert!((res.objective - best).abs() <= 1e-9 * best);
    }

    #[test]
    fn parallel_greedy_is_identical() {
        let red = two_cell_reduction();
        let seq = greedy_fractions(&red, &[1.0, 2.0, 1.0, 0.5], &GreedyOptions::default()).unwrap();
        let par = greedy_fractions(
            &red,
            &[1.0, 2.0, 1.0, 0.5],
            &GreedyOptions {
                exec: Execution::Parallel,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn subproblem_cases() {
        let cfg = UtilityConfig {
            kind: UtilityKind::ProportionalFair,
            v: 10.0,
            a_max: 100.0,
            horizon: 1,
        };
        assert_eq!(utility_subproblem(&[0.0, 0.0], &cfg), vec![100.0, 100.0]);
        assert_eq!(utility_subproblem(&[5.0], &cfg), vec![2.0]);
        assert_eq!(utility_subproblem(&[0.01], &cfg), vec![100.0]);
        let ws = UtilityConfig {
            kind: UtilityKind::WeightedSum(vec![1.0, 1.0]),
            ..cfg.clone()
        };
        assert_eq!(utility_subproblem(&[5.0, 20.0], &ws), vec![100.0, 0.0]);
        let af = UtilityConfig {
            kind: UtilityKind::AlphaFair(2.0),
            ..cfg
        };
        assert!((utility_subproblem(&[2.5], &af)[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pf_weight_cases() {
        assert_eq!(pf_weights(&[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(pf_weights(&[2.0, 0.5]).unwrap(), vec![0.5, 2.0]);
        assert_eq!(pf_weights(&[1.0, 0.0]), Err(Error::ZeroRate { group: 1 }));
    }

    #[test]
    fn pf_weights_reverse_power_order_on_equal_gains() {
        // equal gains: the group with the larger weight gets more power
        let w = pf_weights(&[2.0, 0.5]).unwrap();
        let a = waterfill_sum(&w, &[3.0, 3.0], &[1.0, 1.0], 4.0).unwrap();
        assert!(a.q[1] > a.q[0]);
        let r = group_rates(&[3.0, 3.0], &a.q, &[1.0, 1.0], LogBase::Nats).unwrap();
        assert!(r.group_rate[1] > r.group_rate[0]);
    }

    #[test]
    fn identical_classes_get_equal_throughput() {
        let red = SymmetricReduction {
            gamma: 1.0,
            num_bs: 1,
            class_gain: vec![1.0, 1.0],
            per_bs_power: 10.0,
        };
        let opt = GreedyOptimizer {
            model: &red,
            opts: GreedyOptions {
                delta_mu: 0.05,
                ..Default::default()
            },
        };
        let p = ClusterProblem::from_rows(1.0, &[vec![1.0, 1.0]], vec![10.0]).unwrap();
        let cfg = UtilityConfig::with_defaults(UtilityKind::ProportionalFair, &p, 5000);
        let res = num_iterate(&opt, &cfg).unwrap();
        let (x, y) = (res.avg_rates[0], res.avg_rates[1]);
        assert!((x - y).abs() / x.max(y) < 0.01, "{x} {y}");
    }

    #[test]
    fn queues_never_negative_and_weighted_sum_reduces_to_greedy() {
        let red = SymmetricReduction {
            gamma: 2.0,
            num_bs: 1,
            class_gain: vec![1.0, 0.9],
            per_bs_power: 100.0,
        };
        let opt = GreedyOptimizer {
            model: &red,
            opts: GreedyOptions {
                delta_mu: 0.05,
                ..Default::default()
            },
        };
        let direct = greedy_fractions(&red, &[1.0, 1.0], &opt.opts).unwrap();
        assert!(direct.rates.group_throughput.iter().all(|&r| r > 1e-3));
        // a_max below any service rate: queues empty every slot, W = a_max
        let cfg = UtilityConfig {
            kind: UtilityKind::WeightedSum(vec![1.0, 1.0]),
            v: 1.0,
            a_max: 1e-3,
            horizon: 50,
        };
        let res = num_iterate(&opt, &cfg).unwrap();
        assert!(res.state.q.iter().all(|&q| q >= 0.0));
        for k in 0..2 {
            assert!((res.avg_rates[k] - direct.rates.group_throughput[k]).abs() < 1e-12, "{:?} {:?}", res.avg_rates, direct.rates.group_throughput);
        }
    }

    #[test]
    fn grid_optimizer_is_at_least_greedy_and_matches_brute_force() {
        let p = ClusterProblem::from_rows(2.0, &[vec![1.0, 0.25]], vec![10.0]).unwrap();
        let model = AsymptoticModel::new(p.clone(), ConstraintMode::SumPower);
        let grid = GridOptimizer::new(&model, p.total_power(), 0.05).unwrap();
        for w in [[1.0, 1.0], [1.0, 2.0], [1.0, 1.9], [3.0, 1.0]] {
            let rates = grid.serve(&w).unwrap();
            let value: f64 = w.iter().zip(&rates).map(|(w, r)| w * r).sum();
            let greedy = greedy_fractions(&model, &w, &GreedyOptions { delta_mu: 0.05, ..Default::default() }).unwrap();
            assert!(value >= greedy.objective - 1e-12);
            let mut brute = 0.0f64;
            for i in 0..=20 {
                for j in 0..=20 {
                    let mu = [i as f64 * 0.05, j as f64 * 0.05];
                    if let Ok(e) = model.evaluate(&mu, &w) {
                        brute = brute.max(e.allocation.objective);
                    }
                }
            }
            assert!((value - brute).abs() <= 1e-12 * brute, "{value} {brute}");
        }
    }

}
