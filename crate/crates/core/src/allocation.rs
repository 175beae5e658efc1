//! Power allocation for fixed user fractions.
//!
//! Both programs maximize the weighted sum rate `sum_k W_k mu_k log(1 +
//! Lambda_k q_k)` over per-user powers `q_k >= 0` (uniform within a group),
//! either under the cluster sum-power constraint `sum_k mu_k q_k <= P_sum` or
//! under per-BS constraints `sum_k theta[m][k] q_k <= P_m`.

use faer::Mat;

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstraintMode {
    #[default]
    SumPower,
    PerBs,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Multiplier {
    /// No group can be served (zero power or no usable group).
    Unset,
    Sum(f64),
    PerBs(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub q: Vec<f64>,
    pub multiplier: Multiplier,
    pub mode: ConstraintMode,
    /// Weighted sum rate in nats.
    pub objective: f64,
    /// Dual objective minus primal objective; 0 for the exact sum-power solve.
    pub duality_gap: f64,
    pub iterations: usize,
}

/// `sum_k W_k mu_k log(1 + Lambda_k q_k)` in nats.
pub fn weighted_sum_rate(w: &[f64], lambda: &[f64], mu: &[f64], q: &[f64]) -> f64 {
    w.iter()
        .zip(lambda)
        .zip(mu)
        .zip(q)
        .map(|(((w, l), m), q)| if *m > 0.0 && *q > 0.0 { w * m * (l * q).ln_1p() } else { 0.0 })
        .sum()
}

fn check_inputs(w: &[f64], lambda: &[f64], mu: &[f64]) -> Result<()> {
    check_len("lambda", w.len(), lambda.len())?;
    check_len("mu", w.len(), mu.len())?;
    if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::invalid("weights", "must be finite and non-negative"));
    }
    if lambda.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::invalid("lambda", "must be finite and non-negative"));
    }
    if mu.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::invalid("mu", "must be non-negative"));
    }
    Ok(())
}

/// Water-filling under the sum-power constraint.
///
/// The active set is a prefix of the groups sorted by `W_k Lambda_k`, so the
/// water level is found exactly by scanning prefixes instead of bisecting.
/// The result is invariant to a common rescaling of powers and gains, which
/// matters at the 150 dB operating points of the layout experiments.
pub fn waterfill_sum(w: &[f64], lambda: &[f64], mu: &[f64], p_sum: f64) -> Result<PowerAllocation> {
    check_inputs(w, lambda, mu)?;
    if !(p_sum >= 0.0 && p_sum.is_finite()) {
        return Err(Error::invalid("p_sum", format!("{p_sum} is not a finite non-negative power")));
    }
    let a = w.len();
    let mut q = vec![0.0; a];
    let mut order: Vec<usize> = (0..a)
        .filter(|&k| mu[k] > 0.0 && lambda[k] > 0.0 && w[k] > 0.0)
        .collect();
    if order.is_empty() || p_sum == 0.0 {
        return Ok(PowerAllocation {
            q,
            multiplier: Multiplier::Unset,
            mode: ConstraintMode::SumPower,
            objective: 0.0,
            duality_gap: 0.0,
            iterations: 0,
        });
    }
    // stable sort: equal levels keep index order
    order.sort_by(|&i, &j| (w[j] * lambda[j]).total_cmp(&(w[i] * lambda[i])));
    let (mut sw, mut sinv) = (0.0, 0.0);
    let mut level = f64::NAN;
    let mut active = 0;
    for (j, &k) in order.iter().enumerate() {
        sw += mu[k] * w[k];
        sinv += mu[k] / lambda[k];
        let cand = sw / (p_sum + sinv);
        if w[k] * lambda[k] > cand {
            level = cand;
            active = j + 1;
        } else {
            break;
        }
    }
    for &k in &order[..active] {
        q[k] = (w[k] / level - 1.0 / lambda[k]).max(0.0);
    }
    let objective = weighted_sum_rate(w, lambda, mu, &q);
    Ok(PowerAllocation {
        q,
        multiplier: Multiplier::Sum(level),
        mode: ConstraintMode::SumPower,
        objective,
        duality_gap: 0.0,
        iterations: active,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualStep {
    /// Projected Barzilai-Borwein steps with Armijo backtracking on the dual
    /// function.
    BarzilaiBorwein,
    /// Normalized projected subgradient with step `scale * |lambda0| /
    /// sqrt(t)`.
    Diminishing { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualOptions {
    /// Relative duality-gap tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub step: DualStep,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 20_000,
            step: DualStep::BarzilaiBorwein,
        }
    }
}

struct PerBsDual<'a> {
    w: &'a [f64],
    lambda: &'a [f64],
    mu: &'a [f64],
    theta: &'a Mat<f64>,
    power: &'a [f64],
    active: Vec<usize>,
}

impl PerBsDual<'_> {
    /// Inner maximizer `q_k = [W_k mu_k / (lambda^T theta_k) - 1/Lambda_k]_+`;
    /// `None` if an active group sees a zero price.
    fn primal(&self, dual: &[f64]) -> Option<Vec<f64>> {
        let mut q = vec![0.0; self.w.len()];
        for &k in &self.active {
            let price: f64 = dual.iter().enumerate().map(|(m, d)| d * self.theta[(m, k)]).sum();
            if !(price > 0.0) {
                return None;
            }
            q[k] = (self.w[k] * self.mu[k] / price - 1.0 / self.lambda[k]).max(0.0);
        }
        Some(q)
    }

    fn load(&self, q: &[f64]) -> Vec<f64> {
        (0..self.power.len())
            .map(|m| q.iter().enumerate().map(|(k, qk)| self.theta[(m, k)] * qk).sum())
            .collect()
    }

    /// Dual function value and its gradient `P - Theta q(lambda)`.
    fn eval(&self, dual: &[f64]) -> Option<(f64, Vec<f64>, Vec<f64>)> {
        let q = self.primal(dual)?;
        let load = self.load(&q);
        let grad: Vec<f64> = self.power.iter().zip(&load).map(|(p, l)| p - l).collect();
        let value = weighted_sum_rate(self.w, self.lambda, self.mu, &q)
            + dual.iter().zip(&grad).map(|(d, g)| d * g).sum::<f64>();
        Some((value, grad, q))
    }

    /// Scales `q` down until every per-BS constraint holds.
    fn feasible(&self, q: &[f64]) -> Vec<f64> {
        let load = self.load(q);
        let s = self
            .power
            .iter()
            .zip(&load)
            .filter(|(_, l)| **l > 0.0)
            .map(|(p, l)| p / l)
            .fold(1.0f64, f64::min);
        q.iter().map(|v| v * s).collect()
    }
}

/// Per-BS power allocation by minimizing the Lagrange dual.
///
/// Every multiplier starts at the sum-power water level for `P_sum = sum_m
/// P_m`, which is already optimal on circulant-symmetric problems with equal
/// BS powers. The returned powers are the inner maximizer at the final
/// multipliers, scaled down to satisfy all constraints.
pub fn waterfill_perbs(
    w: &[f64],
    lambda: &[f64],
    mu: &[f64],
    theta: &Mat<f64>,
    power: &[f64],
    opts: &DualOptions,
) -> Result<PowerAllocation> {
    check_inputs(w, lambda, mu)?;
    check_len("theta columns", w.len(), theta.ncols())?;
    check_len("power", theta.nrows(), power.len())?;
    if power.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(Error::invalid("power", "per-BS powers must be finite and non-negative"));
    }
    let b = power.len();
    let active: Vec<usize> = (0..w.len())
        .filter(|&k| mu[k] > 0.0 && lambda[k] > 0.0 && w[k] > 0.0)
        .collect();
    let p_sum: f64 = power.iter().sum();
    let start = waterfill_sum(w, lambda, mu, p_sum)?;
    let level = match start.multiplier {
        Multiplier::Sum(l) => l,
        _ => {
            return Ok(PowerAllocation {
                multiplier: Multiplier::Unset,
                mode: ConstraintMode::PerBs,
                ..start
            })
        }
    };
    let dual_problem = PerBsDual {
        w,
        lambda,
        mu,
        theta,
        power,
        active,
    };
    let mut dual = vec![level; b];
    let Some((mut value, mut grad, mut q)) = dual_problem.eval(&dual) else {
        return Err(Error::invalid(
            "theta",
            "an active group has an all-zero theta column",
        ));
    };
    let lambda0 = level;
    let mut best_q = dual_problem.feasible(&q);
    let mut best_primal = weighted_sum_rate(w, lambda, mu, &best_q);
    let mut best_dual = value;
    let mut step = f64::NAN;
    let mut iterations = 0;
    let converged = |primal: f64, dual_value: f64| {
        dual_value - primal <= opts.tol * dual_value.abs().max(1.0)
    };
    while !converged(best_primal, best_dual) && iterations < opts.max_iter {
        iterations += 1;
        let gnorm = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if gnorm == 0.0 {
            break;
        }
        let project = |d: &[f64], alpha: f64| -> Vec<f64> {
            d.iter().zip(&grad).map(|(x, g)| (x - alpha * g).max(0.0)).collect()
        };
        let next = match opts.step {
            DualStep::Diminishing { scale } => {
                let alpha = scale * lambda0 / ((iterations as f64).sqrt() * gnorm);
                let cand = project(&dual, alpha);
                dual_problem.eval(&cand).map(|e| (cand, e))
            }
            DualStep::BarzilaiBorwein => {
                let mut alpha = if step.is_finite() && step > 0.0 {
                    step
                } else {
                    1e-3 * lambda0 / gnorm
                };
                let mut accepted = None;
                for _ in 0..80 {
                    let cand = project(&dual, alpha);
                    if let Some(e) = dual_problem.eval(&cand) {
                        let decrease: f64 =
                            grad.iter().zip(cand.iter().zip(&dual)).map(|(g, (c, d))| g * (c - d)).sum();
                        if e.0 <= value + 1e-4 * decrease {
                            accepted = Some((cand, e));
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                accepted
            }
        };
        let Some((cand, (v, g, qn))) = next else {
            break;
        };
        if let DualStep::BarzilaiBorwein = opts.step {
            let (mut ss, mut sy) = (0.0, 0.0);
            for m in 0..b {
                let s = cand[m] - dual[m];
                ss += s * s;
                sy += s * (g[m] - grad[m]);
            }
            step = if sy > 0.0 { ss / sy } else { f64::NAN };
        }
        dual = cand;
        value = v;
        grad = g;
        q = qn;
        best_dual = best_dual.min(value);
        let feas = dual_problem.feasible(&q);
        let primal = weighted_sum_rate(w, lambda, mu, &feas);
        if primal > best_primal {
            best_primal = primal;
            best_q = feas;
        }
    }
    let gap = (best_dual - best_primal).max(0.0);
    if !converged(best_primal, best_dual) {
        let violation = grad.iter().fold(0.0f64, |a, g| a.max(-g));
        return Err(Error::DualNotConverged {
            iterations,
            violation,
            best_objective: best_primal,
            best_q,
        });
    }
    Ok(PowerAllocation {
        q: best_q,
        multiplier: Multiplier::PerBs(dual),
        mode: ConstraintMode::PerBs,
        objective: best_primal,
        duality_gap: gap,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Nats,
    Bits,
}

impl LogBase {
    /// Converts a value in nats to this base.
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            LogBase::Nats => nats,
            LogBase::Bits => nats / std::f64::consts::LN_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub base: LogBase,
    /// Per-user rate `R_k = log(1 + Lambda_k q_k)`.
    pub group_rate: Vec<f64>,
    /// `mu_k R_k`.
    pub group_throughput: Vec<f64>,
}

impl RatePoint {
    pub fn sum_throughput(&self) -> f64 {
        self.group_throughput.iter().sum()
    }
}

pub fn group_rates(lambda: &[f64], q: &[f64], mu: &[f64], base: LogBase) -> Result<RatePoint> {
    check_len("q", lambda.len(), q.len())?;
    check_len("mu", lambda.len(), mu.len())?;
    if q.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::invalid("q", "powers must be non-negative"));
    }
    let group_rate: Vec<f64> = lambda
        .iter()
        .zip(q)
        .map(|(l, q)| base.from_nats((l * q).ln_1p()))
        .collect();
    let group_throughput = group_rate.iter().zip(mu).map(|(r, m)| r * m).collect();
    Ok(RatePoint {
        base,
        group_rate,
        group_throughput,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_group_takes_all_power() {
        let a = waterfill_sum(&[1.0], &[3.0], &[0.4], 2.0).unwrap();
        assert!((a.q[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn two_group_hand_solution() {
        let a = waterfill_sum(&[1.0, 1.0], &[4.0, 1.0], &[1.0, 1.0], 1.0).unwrap();
        let Multiplier::Sum(level) = a.multiplier else { panic!() };
        assert!((level - 8.0 / 9.0).abs() < 1e-12);
        assert!((a.q[0] - 0.875).abs() < 1e-12);
        assert!((a.q[1] - 0.125).abs() < 1e-12);
        // brute force over the water level
        let mut best = (f64::INFINITY, 0.0);
        for i in 1..200_000 {
            let l = i as f64 * 1e-5;
            let used = (1.0 / l - 0.25f64).max(0.0) + (1.0 / l - 1.0f64).max(0.0);
            if (used - 1.0).abs() < best.0 {
                best = ((used - 1.0).abs(), l);
            }
        }
        assert!((best.1 - level).abs() < 1e-4);
    }

    #[test]
    fn zero_power_or_no_groups() {
        let a = waterfill_sum(&[1.0, 1.0], &[4.0, 1.0], &[1.0, 1.0], 0.0).unwrap();
        assert_eq!(a.q, vec![0.0, 0.0]);
        assert_eq!(a.multiplier, Multiplier::Unset);
        let a = waterfill_sum(&[1.0, 1.0], &[0.0, 0.0], &[1.0, 1.0], 3.0).unwrap();
        assert_eq!(a.multiplier, Multiplier::Unset);
        let a = waterfill_sum(&[1.0, 1.0], &[1.0, 2.0], &[0.0, 0.0], 3.0).unwrap();
        assert_eq!(a.q, vec![0.0, 0.0]);
    }

    #[test]
    fn weak_group_left_dry() {
        let a = waterfill_sum(&[1.0, 1.0], &[10.0, 0.1], &[1.0, 1.0], 1.0).unwrap();
        assert_eq!(a.q[1], 0.0);
        assert!((a.q[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scale_invariance_at_high_power() {
        let lam = [2.0e-15, 1.0e-15, 3.0e-16];
        let a = waterfill_sum(&[1.0, 2.0, 1.0], &lam, &[0.5, 0.25, 1.0], 1e15).unwrap();
        let b = waterfill_sum(&[1.0, 2.0, 1.0], &[2.0, 1.0, 0.3], &[0.5, 0.25, 1.0], 1.0).unwrap();
        for k in 0..3 {
            assert!((a.q[k] * 1e-15 - b.q[k]).abs() < 1e-12 * b.q[k].max(1.0));
        }
    }

    #[test]
    fn perbs_single_bs_matches_sum() {
        let w = [1.0, 0.5, 2.0];
        let lam = [2.0, 1.0, 0.7];
        let mu = [0.3, 0.9, 0.5];
        let theta = Mat::from_fn(1, 3, |_, k| mu[k]);
        let s = waterfill_sum(&w, &lam, &mu, 4.0).unwrap();
        let p = waterfill_perbs(&w, &lam, &mu, &theta, &[4.0], &DualOptions::default()).unwrap();
        for k in 0..3 {
            assert!((s.q[k] - p.q[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn perbs_toy_matches_grid() {
        let w = [1.0, 1.0];
        let lam = [1.5, 0.8];
        let mu = [0.6, 0.7];
        let theta = Mat::from_fn(2, 2, |m, k| [[0.45, 0.1], [0.15, 0.6]][m][k]);
        let power = [2.0, 1.0];
        let a = waterfill_perbs(&w, &lam, &mu, &theta, &power, &DualOptions::default()).unwrap();
        for m in 0..2 {
            let l: f64 = (0..2).map(|k| theta[(m, k)] * a.q[k]).sum();
            assert!(l <= power[m] * (1.0 + 1e-9));
        }
        let qmax = 10.0;
        let n = 2000;
        let mut best = 0.0f64;
        for i in 0..=n {
            for j in 0..=n {
                let q = [qmax * i as f64 / n as f64, qmax * j as f64 / n as f64];
                let ok = (0..2).all(|m| theta[(m, 0)] * q[0] + theta[(m, 1)] * q[1] <= power[m]);
                if ok {
                    best = best.max(weighted_sum_rate(&w, &lam, &mu, &q));
                }
            }
        }
        assert!((a.objective - best).abs() < 1e-3, "{} vs {best}", a.objective);
        assert!(a.objective >= best - 1e-12);
    }

    #[test]
    fn diminishing_step_reaches_same_point() {
        let w = [1.0, 1.0];
        let lam = [1.5, 0.8];
        let mu = [0.6, 0.7];
        let theta = Mat::from_fn(2, 2, |m, k| [[0.45, 0.1], [0.15, 0.6]][m][k]);
        let power = [2.0, 1.0];
        let bb = waterfill_perbs(&w, &lam, &mu, &theta, &power, &DualOptions::default()).unwrap();
        let opts = DualOptions {
            tol: 1e-6,
            max_iter: 200_000,
            step: DualStep::Diminishing { scale: 0.1 },
        };
        let d = waterfill_perbs(&w, &lam, &mu, &theta, &power, &opts).unwrap();
        assert!((bb.objective - d.objective).abs() < 1e-4);
    }

    #[test]
    fn dual_failure_carries_best_iterate() {
        let theta = Mat::from_fn(2, 2, |m, k| [[0.45, 0.1], [0.15, 0.6]][m][k]);
        let opts = DualOptions {
            tol: 0.0,
            max_iter: 3,
            step: DualStep::BarzilaiBorwein,
        };
        match waterfill_perbs(&[1.0, 1.0], &[1.5, 0.8], &[0.6, 0.7], &theta, &[2.0, 1.0], &opts) {
            Err(Error::DualNotConverged { best_q, iterations, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(best_q.len(), 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rates() {
        let r = group_rates(&[1.0, 2.0], &[0.0, 0.0], &[1.0, 1.0], LogBase::Nats).unwrap();
        assert_eq!(r.group_rate, vec![0.0, 0.0]);
        let e = std::f64::consts::E;
        let r = group_rates(&[1.0], &[e - 1.0], &[0.5], LogBase::Nats).unwrap();
        assert!((r.group_rate[0] - 1.0).abs() < 1e-15);
        assert!((r.group_throughput[0] - 0.5).abs() < 1e-15);
        let r = group_rates(&[1.0], &[3.0], &[1.0], LogBase::Bits).unwrap();
        assert!((r.group_rate[0] - 2.0).abs() < 1e-15);
    }
}
