use faer::linalg::solvers::DenseSolveCore;
use faer::linalg::triangular_solve::solve_upper_triangular_in_place;
use faer::{c64, Mat, Par, Side};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZfMethod {
    Cholesky,
    Qr,
}

/// Normalized ZF beamformers `V = H^+ diag(sqrt(Lambda))` with unit-norm
/// columns, and the per-user gains `Lambda_i = 1 / [(H^H H)^-1]_ii`.
#[derive(Debug, Clone)]
pub struct ZfSolution {
    pub v: Mat<c64>,
    pub lambda: Vec<f64>,
    pub method: ZfMethod,
}

/// Cholesky of the Gram matrix is used unless its pivots show a condition
/// number beyond about `1e12`, in which case the thin QR of `H` takes over.
const CHOLESKY_PIVOT_RATIO: f64 = 1e-6;
const RANK_TOL: f64 = 1e-13;

pub fn zf_pseudo_inverse(h: &Mat<c64>) -> Result<ZfSolution> {
    let (rows, cols) = (h.nrows(), h.ncols());
    if cols == 0 {
        return Ok(ZfSolution {
            v: Mat::zeros(rows, 0),
            lambda: Vec::new(),
            method: ZfMethod::Cholesky,
        });
    }
    if cols > rows {
        return Err(Error::RankDeficient {
            rows,
            cols,
            detail: "more columns than rows".into(),
        });
    }
    let gram = h.adjoint() * h;
    if let Ok(llt) = gram.llt(Side::Lower) {
        let l = llt.L();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..cols {
            let d = l[(i, i)].re;
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if lo / hi > CHOLESKY_PIVOT_RATIO {
            let ginv = llt.inverse();
            let pinv = h * &ginv;
            let lambda: Vec<f64> = (0..cols).map(|i| 1.0 / ginv[(i, i)].re).collect();
            return Ok(normalize(pinv, lambda, ZfMethod::Cholesky));
        }
    }
    zf_pseudo_inverse_qr(h)
}

/// Pseudo-inverse from the thin QR factorization `H = Q R`:
/// `H^+ = Q R^-H` and `[(H^H H)^-1]_ii = |row i of R^-1|^2`.
pub fn zf_pseudo_inverse_qr(h: &Mat<c64>) -> Result<ZfSolution> {
    let (rows, cols) = (h.nrows(), h.ncols());
    if cols > rows {
        return Err(Error::RankDeficient {
            rows,
            cols,
            detail: "more columns than rows".into(),
        });
    }
    let qr = h.qr();
    let r = qr.thin_R().to_owned();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..cols {
        let d = r[(i, i)].norm();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if cols > 0 && !(lo > RANK_TOL * hi) {
        return Err(Error::RankDeficient {
            rows,
            cols,
            detail: format!("min/max |R_ii| = {:e}", if hi > 0.0 { lo / hi } else { 0.0 }),
        });
    }
    let q = qr.compute_thin_Q();
    let mut rinv = Mat::<c64>::identity(cols, cols);
    solve_upper_triangular_in_place(r.as_ref(), rinv.as_mut(), Par::Seq);
    let pinv = &q * rinv.adjoint();
    let lambda = (0..cols)
        .map(|i| 1.0 / (0..cols).map(|j| rinv[(i, j)].norm_sqr()).sum::<f64>())
        .collect();
    Ok(normalize(pinv, lambda, ZfMethod::Qr))
}

fn normalize(mut pinv: Mat<c64>, lambda: Vec<f64>, method: ZfMethod) -> ZfSolution {
    for (j, l) in lambda.iter().enumerate() {
        let s = l.sqrt();
        for i in 0..pinv.nrows() {
            pinv[(i, j)] *= s;
        }
    }
    ZfSolution {
        v: pinv,
        lambda,
        method,
    }
}

/// Relative ZF defect of `H^H V` against `diag(sqrt(Lambda))`.
pub fn diagonality_defect(h: &Mat<c64>, zf: &ZfSolution) -> f64 {
    let d = h.adjoint() * &zf.v;
    let scale = zf.lambda.iter().map(|l| l.sqrt()).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for j in 0..d.ncols() {
        for i in 0..d.nrows() {
            let target = if i == j { zf.lambda[i].sqrt() } else { 0.0 };
            worst = worst.max((d[(i, j)] - c64::new(target, 0.0)).norm());
        }
    }
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// `theta[m][k] = (1/N) sum` of `|V|^2` over BS `m`'s antennas and group
/// `k`'s users.
pub fn empirical_theta(
    v: &Mat<c64>,
    row_bs: &[usize],
    col_group: &[usize],
    num_bs: usize,
    num_groups: usize,
    n: usize,
) -> Result<Mat<f64>> {
    check_len("row map", v.nrows(), row_bs.len())?;
    check_len("column map", v.ncols(), col_group.len())?;
    let mut theta = Mat::<f64>::zeros(num_bs, num_groups);
    for (j, &k) in col_group.iter().enumerate() {
        for (i, &m) in row_bs.iter().enumerate() {
            theta[(m, k)] += v[(i, j)].norm_sqr();
        }
    }
    let inv_n = 1.0 / n as f64;
    for k in 0..num_groups {
        for m in 0..num_bs {
            theta[(m, k)] *= inv_n;
        }
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::channel::{complex_normal, sample_channel};
    use crate::reference;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Mat<c64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(rows, cols, |_, _| complex_normal(&mut rng))
    }

    #[test]
    fn single_column() {
        let h = Mat::from_fn(3, 1, |i, _| c64::new(i as f64 + 1.0, 0.5));
        let zf = zf_pseudo_inverse(&h).unwrap();
        let norm2: f64 = (0..3).map(|i| h[(i, 0)].norm_sqr()).sum();
        assert!((zf.lambda[0] - norm2).abs() < 1e-12 * norm2);
        for i in 0..3 {
            assert!((zf.v[(i, 0)] - h[(i, 0)] / norm2.sqrt()).norm() < 1e-12);
        }
    }

    #[test]
    fn orthonormal_columns() {
        let h = Mat::from_fn(4, 3, |i, j| if i == j { c64::new(0.0, 1.0) } else { c64::new(0.0, 0.0) });
        let zf = zf_pseudo_inverse(&h).unwrap();
        for l in &zf.lambda {
            assert!((l - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cholesky_and_qr_agree() {
        let h = random(40, 30, 3);
        let a = zf_pseudo_inverse(&h).unwrap();
        let b = zf_pseudo_inverse_qr(&h).unwrap();
        assert_eq!(a.method, ZfMethod::Cholesky);
        for i in 0..30 {
            assert!((a.lambda[i] - b.lambda[i]).abs() < 1e-9 * a.lambda[i]);
        }
        assert!(diagonality_defect(&h, &a) < 1e-9);
        assert!(diagonality_defect(&h, &b) < 1e-9);
    }

    #[test]
    fn ill_conditioned_falls_back_to_qr() {
        let mut h = random(20, 10, 5);
        for i in 0..20 {
            let x = h[(i, 0)];
            h[(i, 1)] = x + h[(i, 1)] * 1e-7;
        }
        let zf = zf_pseudo_inverse(&h).unwrap();
        assert_eq!(zf.method, ZfMethod::Qr);
        assert!(diagonality_defect(&h, &zf) < 1e-6);
    }

    #[test]
    fn rank_deficient_reported() {
        let mut h = random(6, 3, 9);
        for i in 0..6 {
            h[(i, 2)] = h[(i, 0)];
        }
        assert!(matches!(zf_pseudo_inverse(&h), Err(Error::RankDeficient { .. })));
        assert!(matches!(zf_pseudo_inverse(&random(2, 3, 1)), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn theta_column_sums_are_exact() {
        let p = reference::two_cell_problem();
        let c = sample_channel(&p, &reference::TWO_CELL_MU, 16, 11, 0).unwrap();
        let zf = zf_pseudo_inverse(&c.h).unwrap();
        let th = empirical_theta(&zf.v, &c.row_bs, &c.col_group, 2, 8, 16).unwrap();
        for k in 0..8 {
            let s = th[(0, k)] + th[(1, k)];
            assert!((s - c.active_counts[k] as f64 / 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_bs_theta_is_count_over_n() {
        let p = crate::geometry::ClusterProblem::from_rows(2.0, &[vec![1.0, 0.3]], vec![1.0]).unwrap();
        let c = sample_channel(&p, &[0.5, 1.0], 8, 2, 0).unwrap();
        let zf = zf_pseudo_inverse(&c.h).unwrap();
        let th = empirical_theta(&zf.v, &c.row_bs, &c.col_group, 1, 2, 8).unwrap();
        assert!((th[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((th[(0, 1)] - 1.0).abs() < 1e-12);
    }
}
