use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, weighted::WeightedIndex};

use crate::error::{Error, Result};

/// One slot's stream plan: `streams[i]` is idle or serves user `j` of group
/// `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamAssignment {
    pub streams: Vec<Option<(usize, usize)>>,
}

impl StreamAssignment {
    pub fn group_counts(&self, num_groups: usize) -> Vec<usize> {
        let mut c = vec![0; num_groups];
        for (k, _) in self.streams.iter().flatten() {
            c[*k] += 1;
        }
        c
    }

    /// Served `(group, user)` pairs in stream order.
    pub fn users(&self) -> Vec<(usize, usize)> {
        self.streams.iter().flatten().copied().collect()
    }
}

/// Random pre-selection: each of the `gamma B N` streams independently picks
/// group `k` with probability `mu_k / (gamma B)` and stays idle otherwise.
/// Each group's streams then go to distinct users drawn uniformly; streams
/// beyond a group's `N` users stay idle.
pub fn probabilistic_schedule<R: Rng + ?Sized>(
    mu: &[f64],
    streams: usize,
    n: usize,
    rng: &mut R,
) -> Result<StreamAssignment> {
    if mu.iter().any(|m| !(*m >= 0.0)) {
        return Err(Error::invalid("mu", "fractions must be non-negative"));
    }
    let per_stream: Vec<f64> = mu.iter().map(|m| m * n as f64 / streams as f64).collect();
    let busy: f64 = per_stream.iter().sum();
    if busy > 1.0 + 1e-12 {
        return Err(Error::InfeasibleLoad {
            load: busy,
            limit: 1.0,
        });
    }
    if busy == 0.0 {
        return Ok(StreamAssignment {
            streams: vec![None; streams],
        });
    }
    let mut weights = per_stream;
    weights.push((1.0 - busy).max(0.0));
    let idle = mu.len();
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::invalid("mu", e.to_string()))?;
    let draws: Vec<usize> = (0..streams).map(|_| dist.sample(rng)).collect();
    let mut out = vec![None; streams];
    for k in 0..mu.len() {
        let slots: Vec<usize> = (0..streams).filter(|&i| draws[i] == k).take(n).collect();
        if slots.is_empty() {
            continue;
        }
        let users = sample(rng, n, slots.len());
        for (i, j) in slots.into_iter().zip(users) {
            out[i] = Some((k, j));
        }
    }
    debug_assert!(draws.iter().all(|&d| d <= idle));
    Ok(StreamAssignment { streams: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_fractions_are_idle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = probabilistic_schedule(&[0.0, 0.0], 16, 4, &mut rng).unwrap();
        assert!(s.streams.iter().all(Option::is_none));
    }

    #[test]
    fn full_load_has_no_idle_mass() {
        // mu_k = gamma B / A: every draw lands on a group
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = probabilistic_schedule(&[1.0; 4], 4 * 8, 8, &mut rng).unwrap();
        let served = s.users().len();
        let counts = s.group_counts(4);
        assert!(counts.iter().all(|&c| c <= 8));
        // only overflow beyond N users can idle a stream
        let overflow: usize = 32 - served;
        assert!(overflow < 32);
    }

    #[test]
    fn users_are_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let s = probabilistic_schedule(&[0.9, 0.6, 0.3], 16, 4, &mut rng).unwrap();
            let mut u = s.users();
            u.sort();
            let before = u.len();
            u.dedup();
            assert_eq!(before, u.len());
        }
    }

    #[test]
    fn overload_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(probabilistic_schedule(&[1.0, 1.0], 4, 4, &mut rng).is_err());
    }
}
