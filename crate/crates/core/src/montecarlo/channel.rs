use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};
use crate::geometry::ClusterProblem;

/// `gamma N` antennas per BS; must be an integer.
pub fn antennas_per_bs(gamma: f64, n: usize) -> Result<usize> {
    let x = gamma * n as f64;
    let r = x.round();
    if r < 1.0 || (x - r).abs() > 1e-9 * x.max(1.0) {
        return Err(Error::invalid("gamma", format!("gamma * N = {x} is not a positive integer")));
    }
    Ok(r as usize)
}

/// `n_k = round(mu_k N)`, then trimmed (largest rounding excess first) until
/// the total fits in `max_total`.
pub fn active_counts(mu: &[f64], n: usize, max_total: usize) -> Result<Vec<usize>> {
    if mu.iter().any(|m| !(*m >= 0.0 && *m <= 1.0)) {
        return Err(Error::invalid("mu", "fractions must lie in [0, 1]"));
    }
    let exact: Vec<f64> = mu.iter().map(|m| m * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.round() as usize).collect();
    let mut total: usize = counts.iter().sum();
    while total > max_total {
        let k = (0..counts.len())
            .filter(|&k| counts[k] > 0)
            .max_by(|&i, &j| {
                let ei = counts[i] as f64 - exact[i];
                let ej = counts[j] as f64 - exact[j];
                // lowest index among equal excesses
                ei.total_cmp(&ej).then(j.cmp(&i))
            })
            .expect("total > 0 implies a non-empty group");
        counts[k] -= 1;
        total -= 1;
    }
    Ok(counts)
}

/// Independent stream for block `(m, k)` of slot `slot`.
pub fn block_rng(master: u64, slot: u64, m: usize, k: usize) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master.to_le_bytes());
    seed[8..16].copy_from_slice(&slot.to_le_bytes());
    seed[16..24].copy_from_slice(&(m as u64).to_le_bytes());
    seed[24..].copy_from_slice(&(k as u64).to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// Stream for scheduler draws of a slot, disjoint from every block stream.
pub fn slot_rng(master: u64, slot: u64) -> ChaCha8Rng {
    block_rng(master, slot, usize::MAX, usize::MAX)
}

/// `CN(0, 1)`: two real normals scaled by `1/sqrt(2)`.
pub fn complex_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> c64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c64::new(re * std::f64::consts::FRAC_1_SQRT_2, im * std::f64::consts::FRAC_1_SQRT_2)
}

/// A finite-N block channel: rows are BS antennas (BS-major), columns are
/// users (group-major).
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub n: usize,
    pub h: Mat<c64>,
    pub active_counts: Vec<usize>,
    pub row_bs: Vec<usize>,
    pub col_group: Vec<usize>,
}

impl ChannelRealization {
    /// Smallest singular value of `H` (0 for an empty matrix).
    pub fn min_singular_value(&self) -> f64 {
        if self.h.ncols() == 0 {
            return 0.0;
        }
        self.h
            .singular_values()
            .map(|s| s.iter().copied().fold(f64::INFINITY, f64::min))
            .unwrap_or(0.0)
    }
}

/// Draws `counts[k]` users of every group. Block `(m, k)` has entries
/// `sqrt(beta2[m][k] / N) CN(0, 1)` from its own stream, so a block does not
/// depend on the sizes of the others.
pub fn sample_users(
    beta2: &Mat<f64>,
    counts: &[usize],
    antennas: usize,
    n: usize,
    master: u64,
    slot: u64,
) -> Result<ChannelRealization> {
    let (b, a) = (beta2.nrows(), beta2.ncols());
    check_len("active counts", a, counts.len())?;
    let rows = b * antennas;
    let cols: usize = counts.iter().sum();
    let mut h = Mat::<c64>::zeros(rows, cols);
    let mut col_group = Vec::with_capacity(cols);
    let mut offset = 0;
    for k in 0..a {
        for m in 0..b {
            let mut rng = block_rng(master, slot, m, k);
            let scale = (beta2[(m, k)] / n as f64).sqrt();
            for j in 0..counts[k] {
                for r in 0..antennas {
                    h[(m * antennas + r, offset + j)] = complex_normal(&mut rng) * scale;
                }
            }
        }
        col_group.extend(std::iter::repeat_n(k, counts[k]));
        offset += counts[k];
    }
    Ok(ChannelRealization {
        n,
        h,
        active_counts: counts.to_vec(),
        row_bs: (0..rows).map(|r| r / antennas).collect(),
        col_group,
    })
}

/// Channel of the `round(mu_k N)` active users of each group.
pub fn sample_channel(
    problem: &ClusterProblem,
    mu: &[f64],
    n: usize,
    master: u64,
    slot: u64,
) -> Result<ChannelRealization> {
    check_len("mu", problem.num_groups(), mu.len())?;
    let antennas = antennas_per_bs(problem.gamma(), n)?;
    let rows = problem.num_bs() * antennas;
    let counts = active_counts(mu, n, usize::MAX)?;
    let total: usize = counts.iter().sum();
    if total > rows {
        return Err(Error::RankDeficient {
            rows,
            cols: total,
            detail: "more active users than antennas".into(),
        });
    }
    sample_users(problem.beta2(), &counts, antennas, n, master, slot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;

    #[test]
    fn empty_for_zero_fractions() {
        let p = reference::two_cell_problem();
        let c = sample_channel(&p, &[0.0; 8], 16, 1, 0).unwrap();
        assert_eq!(c.h.ncols(), 0);
        assert_eq!(c.h.nrows(), 2 * 64);
    }

    #[test]
    fn two_cell_dimensions() {
        let p = reference::two_cell_problem();
        let c = sample_channel(&p, &reference::TWO_CELL_MU, 128, 7, 0).unwrap();
        assert_eq!((c.h.nrows(), c.h.ncols()), (1024, 704));
        assert_eq!(c.active_counts, vec![64, 64, 96, 128, 64, 64, 96, 128]);
        assert!(c.row_bs[511] == 0 && c.row_bs[512] == 1);
    }

    #[test]
    fn too_many_users_rejected() {
        let p = ClusterProblem::from_rows(0.5, &[vec![1.0, 1.0]], vec![1.0]).unwrap();
        assert!(matches!(
            sample_channel(&p, &[1.0, 1.0], 4, 0, 0),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn entry_variance_is_beta2_over_n() {
        let beta2 = Mat::from_fn(1, 1, |_, _| 2.0);
        let seeds = 10_000;
        let mut acc = 0.0;
        for s in 0..seeds {
            let c = sample_users(&beta2, &[4], 4, 4, s, 0).unwrap();
            acc += (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| c.h[(i, j)].norm_sqr()).sum::<f64>();
        }
        let mean = acc / (seeds as f64 * 16.0);
        // 160k exponential samples: standard error 0.5 / 400
        assert!((mean - 0.5).abs() < 5.0 * 0.5 / 400.0, "{mean}");
    }

    #[test]
    fn deterministic_and_block_independent() {
        let p = reference::two_cell_problem();
        let a = sample_channel(&p, &reference::TWO_CELL_MU, 8, 42, 3).unwrap();
        let b = sample_channel(&p, &reference::TWO_CELL_MU, 8, 42, 3).unwrap();
        assert_eq!(a.h, b.h);
        let c = sample_channel(&p, &reference::TWO_CELL_MU, 8, 42, 4).unwrap();
        assert_ne!(a.h, c.h);
        // the first group's block does not change when other groups shrink
        let mut mu = reference::TWO_CELL_MU;
        mu[3] = 0.0;
        let d = sample_channel(&p, &mu, 8, 42, 3).unwrap();
        for r in 0..a.h.nrows() {
            for j in 0..4 {
                assert_eq!(a.h[(r, j)], d.h[(r, j)]);
            }
        }
    }

    #[test]
    fn rounding_trim() {
        assert_eq!(active_counts(&[0.5, 0.5], 3, 10).unwrap(), vec![2, 2]);
        assert_eq!(active_counts(&[0.5, 0.5], 3, 3).unwrap(), vec![1, 2]);
        assert_eq!(antennas_per_bs(1.5, 4).unwrap(), 6);
        assert!(antennas_per_bs(1.5, 3).is_err());
    }
}
