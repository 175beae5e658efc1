//! Deterministic equivalents of the zero-forcing gains in the large-system
//! limit.
//!
//! For user fractions `mu` the per-BS variables `eta_m` solve
//!
//! ```text
//! eta_m = 1 / (1 + sum_q mu_q beta2[m][q] / (gamma * sum_l eta_l beta2[l][q]))
//! ```
//!
//! and the asymptotic ZF gain of group `k` is `Lambda_k = gamma * sum_m
//! beta2[m][k] eta_m`. The per-BS power fractions `theta_{m,k}` follow from a
//! linear system in `A` unknowns that shares one matrix across all BSs.

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::error::{check_len, Error, Result};
use crate::geometry::{ClusterProblem, EquivalenceClasses};

/// Loads within this margin of `gamma * B` are rejected: the ZF gains vanish
/// at full load and the theta system becomes singular.
pub const LOAD_MARGIN: f64 = 1e-6;

/// Active-user fractions `mu_k` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UserFractions(Vec<f64>);

impl UserFractions {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if let Some((k, v)) = mu
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && **v <= 1.0))
        {
            return Err(Error::invalid("mu", format!("mu[{k}] = {v} is outside [0, 1]")));
        }
        Ok(Self(mu))
    }

    pub fn zeros(num_groups: usize) -> Self {
        Self(vec![0.0; num_groups])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    /// Relative error of each `eta_m`, estimated by the Newton step. A run
    /// whose defect is already below `tol` and stops improving also ends.
    pub tol: f64,
    pub max_iter: usize,
    /// Weight of the new iterate in a plain (non-Newton) step.
    pub damping: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 10_000,
            damping: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaSolution {
    pub eta: Vec<f64>,
    /// Max-norm defect of the fixed-point map at `eta`.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticGains {
    pub lambda: Vec<f64>,
}

/// Asymptotic per-BS power fractions `theta[m][k]` and the auxiliary
/// solution `xi[m][k]` of the shared linear system.
#[derive(Debug, Clone)]
pub struct ThetaMatrix {
    pub theta: Mat<f64>,
    pub xi: Mat<f64>,
}

fn check_load(problem: &ClusterProblem, mu: &UserFractions) -> Result<()> {
    check_len("mu", problem.num_groups(), mu.len())?;
    let limit = problem.load_capacity() - LOAD_MARGIN;
    let load = mu.total();
    if load > limit {
        return Err(Error::InfeasibleLoad { load, limit });
    }
    Ok(())
}

/// One application of the fixed-point map. Fills `denom[q] = sum_l eta_l
/// beta2[l][q]` as a by-product.
fn eta_map(
    problem: &ClusterProblem,
    mu: &[f64],
    eta: &[f64],
    out: &mut [f64],
    denom: &mut [f64],
) {
    let b = problem.num_bs();
    let gamma = problem.gamma();
    for (q, d) in denom.iter_mut().enumerate() {
        *d = (0..b).map(|l| eta[l] * problem.beta2_at(l, q)).sum();
    }
    for (m, o) in out.iter_mut().enumerate() {
        let s: f64 = mu
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(q, &w)| w * problem.beta2_at(m, q) / (gamma * denom[q]))
            .sum();
        *o = 1.0 / (1.0 + s);
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Max-norm defect `|eta - T(eta)|` of the fixed-point map.
pub fn eta_defect(problem: &ClusterProblem, mu: &UserFractions, eta: &[f64]) -> f64 {
    let mut out = vec![0.0; problem.num_bs()];
    let mut denom = vec![0.0; problem.num_groups()];
    eta_map(problem, mu.as_slice(), eta, &mut out, &mut denom);
    max_abs_diff(eta, &out)
}

/// Newton step on `eta - T(eta) = 0`; `None` when the step leaves `(0, 1]`
/// or the Jacobian is singular.
fn newton_candidate(
    problem: &ClusterProblem,
    mu: &[f64],
    eta: &[f64],
    mapped: &[f64],
    denom: &[f64],
) -> Option<Vec<f64>> {
    let b = problem.num_bs();
    let gamma = problem.gamma();
    let jac = Mat::from_fn(b, b, |m, l| {
        let s: f64 = mu
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(q, &w)| {
                w * problem.beta2_at(m, q) * problem.beta2_at(l, q) / (gamma * denom[q] * denom[q])
            })
            .sum();
        let dt = mapped[m] * mapped[m] * s;
        if m == l {
            1.0 - dt
        } else {
            -dt
        }
    });
    let rhs = Mat::from_fn(b, 1, |m, _| eta[m] - mapped[m]);
    let step = jac.partial_piv_lu().solve(&rhs);
    let cand: Vec<f64> = (0..b).map(|m| (eta[m] - step[(m, 0)]).min(1.0)).collect();
    cand.iter().all(|v| v.is_finite() && *v > 0.0).then_some(cand)
}

/// Solves the eta fixed point starting from `eta = 1`.
pub fn solve_eta(
    problem: &ClusterProblem,
    mu: &UserFractions,
    opts: &FixedPointOptions,
) -> Result<EtaSolution> {
    solve_eta_from(problem, mu, &vec![1.0; problem.num_bs()], opts)
}

/// Solves the eta fixed point from an explicit starting point in `(0, 1]^B`.
///
/// Each iteration tries a Newton step and keeps it only if it lowers the
/// defect; otherwise it takes a damped plain step. Plain iteration alone
/// contracts with factor close to the load ratio `mu / (gamma B)`, which
/// stalls near full load.
pub fn solve_eta_from(
    problem: &ClusterProblem,
    mu: &UserFractions,
    start: &[f64],
    opts: &FixedPointOptions,
) -> Result<EtaSolution> {
    check_load(problem, mu)?;
    check_len("eta start", problem.num_bs(), start.len())?;
    if start.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
        return Err(Error::invalid("eta start", "entries must lie in (0, 1]"));
    }
    let mu = mu.as_slice();
    let b = problem.num_bs();
    let mut eta = start.to_vec();
    let mut mapped = vec![0.0; b];
    let mut denom = vec![0.0; problem.num_groups()];
    let mut scratch = vec![0.0; b];
    let mut scratch_denom = denom.clone();
    let mut residual = f64::INFINITY;
    for iter in 0..=opts.max_iter {
        eta_map(problem, mu, &eta, &mut mapped, &mut denom);
        residual = max_abs_diff(&eta, &mapped);
        let newton = newton_candidate(problem, mu, &eta, &mapped, &denom);
        // Near full load the map's slope approaches one, so a small defect
        // can hide a large error in a small eta. The Newton step measures
        // the error itself.
        let error = match &newton {
            Some(c) => c.iter().zip(&eta).map(|(c, e)| (c - e).abs() / e).fold(0.0, f64::max),
            None => residual / eta.iter().copied().fold(1.0, f64::min),
        };
        if error <= opts.tol || residual == 0.0 {
            if let Some(c) = newton.filter(|_| residual > 0.0) {
                eta_map(problem, mu, &c, &mut scratch, &mut scratch_denom);
                let r = max_abs_diff(&c, &scratch);
                if r <= residual {
                    return Ok(EtaSolution {
                        eta: c,
                        residual: r,
                        iterations: iter + 1,
                    });
                }
            }
            return Ok(EtaSolution {
                eta,
                residual,
                iterations: iter,
            });
        }
        if let Some(cand) = newton {
            eta_map(problem, mu, &cand, &mut scratch, &mut scratch_denom);
            if max_abs_diff(&cand, &scratch) < residual {
                eta = cand;
                continue;
            }
        }
        if residual <= opts.tol {
            // stalled at roundoff
            return Ok(EtaSolution {
                eta,
                residual,
                iterations: iter,
            });
        }
        for (e, t) in eta.iter_mut().zip(&mapped) {
            *e = (1.0 - opts.damping) * *e + opts.damping * t;
        }
    }
    Err(Error::NoConvergence {
        what: "eta fixed point",
        iterations: opts.max_iter,
        residual,
    })
}

/// `Lambda_k = gamma * sum_m beta2[m][k] * eta_m`.
pub fn lambda_gains(problem: &ClusterProblem, eta: &[f64]) -> AsymptoticGains {
    let gamma = problem.gamma();
    let lambda = (0..problem.num_groups())
        .map(|k| {
            gamma
                * eta
                    .iter()
                    .enumerate()
                    .map(|(m, e)| problem.beta2_at(m, k) * e)
                    .sum::<f64>()
        })
        .collect();
    AsymptoticGains { lambda }
}

impl AsymptoticGains {
    /// Max relative defect of the equivalent fixed point written directly in
    /// the gains: `Lambda_k = gamma sum_m beta2[m][k] / (1 + sum_q mu_q
    /// beta2[m][q] / Lambda_q)`.
    pub fn fixed_point_defect(&self, problem: &ClusterProblem, mu: &UserFractions) -> f64 {
        let mu = mu.as_slice();
        let gamma = problem.gamma();
        let per_bs: Vec<f64> = (0..problem.num_bs())
            .map(|m| {
                1.0 + mu
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(q, &w)| w * problem.beta2_at(m, q) / self.lambda[q])
                    .sum::<f64>()
            })
            .collect();
        (0..problem.num_groups())
            .map(|k| {
                let rhs: f64 = gamma
                    * per_bs
                        .iter()
                        .enumerate()
                        .map(|(m, d)| problem.beta2_at(m, k) / d)
                        .sum::<f64>();
                ((self.lambda[k] - rhs) / self.lambda[k]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Closed form for circulant-symmetric problems with class fractions
/// `mu_prime`: `eta_m = 1 - mu / (gamma B)` with `mu = B sum_i mu'_i`.
pub fn eta_lambda_symmetric(
    problem: &ClusterProblem,
    classes: &EquivalenceClasses,
    mu_prime: &[f64],
) -> Result<(EtaSolution, AsymptoticGains)> {
    if !classes.is_symmetric {
        return Err(Error::NotSymmetric);
    }
    check_len("mu_prime", classes.num_classes, mu_prime.len())?;
    let mu_class = UserFractions::new(mu_prime.to_vec())?;
    let gamma = problem.gamma();
    let load = mu_class.total();
    if load > gamma * (1.0 + 1e-12) {
        return Err(Error::InfeasibleLoad { load, limit: gamma });
    }
    let level = (1.0 - load / gamma).max(0.0);
    let eta = vec![level; problem.num_bs()];
    let residual = if level > 0.0 {
        let mu = UserFractions::new(classes.expand(mu_prime))?;
        eta_defect(problem, &mu, &eta)
    } else {
        0.0
    };
    let gains = lambda_gains(problem, &eta);
    Ok((
        EtaSolution {
            eta,
            residual,
            iterations: 0,
        },
        gains,
    ))
}

/// Solves the theta linear system.
///
/// Groups with `mu_k = 0` drop out of the system and get a zero column.
pub fn solve_theta(
    problem: &ClusterProblem,
    mu: &UserFractions,
    eta: &[f64],
    gains: &AsymptoticGains,
) -> Result<ThetaMatrix> {
    let b = problem.num_bs();
    let a = problem.num_groups();
    check_len("mu", a, mu.len())?;
    check_len("eta", b, eta.len())?;
    check_len("lambda", a, gains.lambda.len())?;
    let mu = mu.as_slice();
    let active: Vec<usize> = (0..a).filter(|&k| mu[k] > 0.0).collect();
    if let Some(&k) = active.iter().find(|&&k| !(gains.lambda[k] > 0.0)) {
        return Err(Error::invalid(
            "lambda",
            format!("group {k} is active but has gain {}", gains.lambda[k]),
        ));
    }
    let mut theta = Mat::<f64>::zeros(b, a);
    let mut xi = Mat::<f64>::zeros(b, a);
    let n = active.len();
    if n == 0 {
        return Ok(ThetaMatrix { theta, xi });
    }
    let gamma = problem.gamma();
    let bb = |l: usize, i: usize| problem.beta2_at(l, active[i]);
    let scale: Vec<f64> = active
        .iter()
        .map(|&k| mu[k] / gains.lambda[k].powi(2))
        .collect();
    // M = [sum_l eta_l^2 b_l b_l^T] diag(mu / Lambda^2), restricted to active groups
    let m_mat = Mat::from_fn(n, n, |i, j| {
        (0..b).map(|l| eta[l] * eta[l] * bb(l, i) * bb(l, j)).sum::<f64>() * scale[j]
    });
    let system = Mat::from_fn(n, n, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        d - gamma * m_mat[(i, j)]
    });
    let rhs = Mat::from_fn(n, b, |i, m| {
        gamma * (0..n).map(|j| m_mat[(i, j)] * bb(m, j)).sum::<f64>()
    });
    let lu = system.partial_piv_lu();
    let u = lu.U();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let v = u[(i, i)].abs();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let pivot_ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(pivot_ratio > 1e-14) {
        return Err(Error::Singular {
            context: "theta system I - gamma M",
            pivot_ratio,
        });
    }
    let sol = lu.solve(&rhs);
    for (i, &k) in active.iter().enumerate() {
        let denom: f64 = (0..b).map(|l| eta[l] * problem.beta2_at(l, k)).sum();
        for m in 0..b {
            let x = sol[(i, m)];
            xi[(m, k)] = x;
            theta[(m, k)] = mu[k] * eta[m] * eta[m] * (problem.beta2_at(m, k) + x) / denom;
        }
    }
    Ok(ThetaMatrix { theta, xi })
}

impl ThetaMatrix {
    /// Max over groups of `|sum_m theta[m][k] - mu_k|`.
    pub fn column_sum_defect(&self, mu: &UserFractions) -> f64 {
        mu.as_slice()
            .iter()
            .enumerate()
            .map(|(k, &w)| {
                let s: f64 = (0..self.theta.nrows()).map(|m| self.theta[(m, k)]).sum();
                (s - w).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Per-BS transmit power `sum_k q_k theta[m][k]`.
    pub fn bs_power(&self, q: &[f64]) -> Vec<f64> {
        (0..self.theta.nrows())
            .map(|m| q.iter().enumerate().map(|(k, qk)| qk * self.theta[(m, k)]).sum())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftSymmetryCheck {
    /// `max |theta[m (+) j][k] - theta[m][k (+) A'j]|` over the classes.
    pub shift_defect: f64,
    /// Spread (max - min) of per-BS power for the supplied powers; 0 when
    /// none were supplied.
    pub power_spread: f64,
}

/// Checks the cyclic-shift identity of theta on a symmetric problem and,
/// optionally, that class-symmetric powers load every BS equally.
pub fn check_shift_symmetry(
    theta: &Mat<f64>,
    classes: &EquivalenceClasses,
    q: Option<&[f64]>,
) -> Result<ShiftSymmetryCheck> {
    if !classes.is_symmetric {
        return Err(Error::NotSymmetric);
    }
    let b = theta.nrows();
    check_len("theta columns", classes.class_of.len(), theta.ncols())?;
    let mut shift_defect = 0.0f64;
    for members in &classes.members {
        check_len("class size", b, members.len())?;
        for m in 0..b {
            for (j, &kj) in members.iter().enumerate() {
                let d = (theta[((m + j) % b, members[0])] - theta[(m, kj)]).abs();
                shift_defect = shift_defect.max(d);
            }
        }
    }
    let power_spread = match q {
        Some(q) => {
            check_len("q", theta.ncols(), q.len())?;
            let p: Vec<f64> = (0..b)
                .map(|m| q.iter().enumerate().map(|(k, qk)| qk * theta[(m, k)]).sum())
                .collect();
            let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo
        }
        None => 0.0,
    };
    Ok(ShiftSymmetryCheck {
        shift_defect,
        power_spread,
    })
}
