use faer::{c64, Mat};

use crate::allocation::waterfill_sum;
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Selected columns in selection order.
    pub selected: Vec<usize>,
    pub lambda: Vec<f64>,
    pub q: Vec<f64>,
    /// Per selected user, nats.
    pub rates: Vec<f64>,
    pub objective: f64,
}

fn column_inner(h: &Mat<c64>, a: usize, b: usize) -> c64 {
    let mut acc = c64::new(0.0, 0.0);
    for i in 0..h.nrows() {
        acc += h[(i, a)].conj() * h[(i, b)];
    }
    acc
}

struct Candidate {
    /// `H_S^H h_u`
    b: Vec<c64>,
    /// `(H_S^H H_S)^-1 b`
    t: Vec<c64>,
    /// Schur complement `|h_u|^2 - b^H t`.
    d: f64,
    norm2: f64,
}

/// Greedy ZF user selection under a sum-power budget.
///
/// Users are added one at a time, each time the one whose inclusion (with
/// recomputed ZF gains and water-filling over the selected set) gives the
/// largest weighted sum rate; selection stops when no addition improves the
/// objective or `max_streams` users are selected. The inverse Gram matrix is
/// never formed: each candidate carries its Schur complement, updated in
/// `O(s)` per accepted user.
pub fn greedy_user_selection(
    h: &Mat<c64>,
    w: &[f64],
    p_sum: f64,
    max_streams: usize,
) -> Result<Selection> {
    greedy_select_scaled(h, w, None, p_sum, max_streams)
}

/// As [`greedy_user_selection`], with user `u`'s effective gain multiplied by
/// `scale[u]` (e.g. one over an interference term).
pub fn greedy_select_scaled(
    h: &Mat<c64>,
    w: &[f64],
    scale: Option<&[f64]>,
    p_sum: f64,
    max_streams: usize,
) -> Result<Selection> {
    let users = h.ncols();
    check_len("weights", users, w.len())?;
    if let Some(s) = scale {
        check_len("gain scale", users, s.len())?;
    }
    let sc = |u: usize| scale.map_or(1.0, |s| s[u]);
    if max_streams > h.nrows() {
        return Err(Error::invalid(
            "max_streams",
            format!("{max_streams} exceeds the {} antennas", h.nrows()),
        ));
    }
    let mut cands: Vec<Candidate> = (0..users)
        .map(|u| {
            let n2 = column_inner(h, u, u).re;
            Candidate {
                b: Vec::new(),
                t: Vec::new(),
                d: n2,
                norm2: n2,
            }
        })
        .collect();
    let mut selected: Vec<usize> = Vec::new();
    let mut in_set = vec![false; users];
    // diagonal of the inverse Gram matrix of the selected set
    let mut diag: Vec<f64> = Vec::new();
    let mut current = Selection {
        selected: Vec::new(),
        lambda: Vec::new(),
        q: Vec::new(),
        rates: Vec::new(),
        objective: 0.0,
    };
    while selected.len() < max_streams {
        let mut best: Option<(usize, Vec<f64>, Vec<f64>, f64)> = None;
        let wsel: Vec<f64> = selected.iter().map(|&u| w[u]).collect();
        for u in 0..users {
            let c = &cands[u];
            if in_set[u] || w[u] <= 0.0 || !(c.d > 1e-12 * c.norm2) {
                continue;
            }
            let mut lambda: Vec<f64> = diag
                .iter()
                .zip(&c.t)
                .zip(&selected)
                .map(|((g, t), &v)| sc(v) / (g + t.norm_sqr() / c.d))
                .collect();
            lambda.push(c.d * sc(u));
            let mut ws = wsel.clone();
            ws.push(w[u]);
            let ones = vec![1.0; lambda.len()];
            let alloc = waterfill_sum(&ws, &lambda, &ones, p_sum)?;
            if best.as_ref().is_none_or(|b| alloc.objective > b.3) {
                best = Some((u, lambda, alloc.q, alloc.objective));
            }
        }
        let Some((u_star, lambda, q, objective)) = best else {
            break;
        };
        if objective <= current.objective {
            break;
        }
        // rank-one update of every remaining candidate
        let t_star = cands[u_star].t.clone();
        let d_star = cands[u_star].d;
        for (g, t) in diag.iter_mut().zip(&t_star) {
            *g += t.norm_sqr() / d_star;
        }
        diag.push(1.0 / d_star);
        for u in 0..users {
            if in_set[u] || u == u_star {
                continue;
            }
            let beta = column_inner(h, u_star, u);
            let c = &mut cands[u];
            let proj: c64 = t_star.iter().zip(&c.b).map(|(ts, b)| ts.conj() * b).sum();
            let delta = (beta - proj) / d_star;
            for (t, ts) in c.t.iter_mut().zip(&t_star) {
                *t -= ts * delta;
            }
            c.t.push(delta);
            c.b.push(beta);
            c.d -= d_star * delta.norm_sqr();
        }
        in_set[u_star] = true;
        selected.push(u_star);
        let rates = lambda.iter().zip(&q).map(|(l, q)| (l * q).ln_1p()).collect();
        current = Selection {
            selected: selected.clone(),
            lambda,
            q,
            rates,
            objective,
        };
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::channel::complex_normal;
    use crate::montecarlo::zf::zf_pseudo_inverse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_candidate() {
        let h = Mat::from_fn(2, 1, |i, _| c64::new(1.0 + i as f64, 0.0));
        let s = greedy_user_selection(&h, &[1.0], 1.0, 2).unwrap();
        assert_eq!(s.selected, vec![0]);
        assert!(s.rates[0] > 0.0);
        let s = greedy_user_selection(&h, &[1.0], 0.0, 2).unwrap();
        assert!(s.selected.is_empty());
    }

    #[test]
    fn orthogonal_pair_both_selected() {
        let h = Mat::from_fn(2, 2, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) });
        let s = greedy_user_selection(&h, &[1.0, 1.0], 2.0, 2).unwrap();
        let mut sel = s.selected.clone();
        sel.sort();
        assert_eq!(sel, vec![0, 1]);
    }

    #[test]
    fn gains_match_direct_pseudo_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = Mat::from_fn(16, 40, |_, _| complex_normal(&mut rng));
        let w: Vec<f64> = (0..40).map(|u| 1.0 + (u % 3) as f64).collect();
        let s = greedy_user_selection(&h, &w, 1e3, 16).unwrap();
        assert!(s.selected.len() > 1);
        let sub = Mat::from_fn(16, s.selected.len(), |i, j| h[(i, s.selected[j])]);
        let zf = zf_pseudo_inverse(&sub).unwrap();
        for (a, b) in s.lambda.iter().zip(&zf.lambda) {
            assert!((a - b).abs() < 1e-9 * b, "{a} {b}");
        }
        let total: f64 = s.q.iter().sum();
        assert!((total - 1e3).abs() < 1e-9 * 1e3);
    }

    #[test]
    fn stream_cap_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = Mat::from_fn(8, 30, |_, _| complex_normal(&mut rng));
        let s = greedy_user_selection(&h, &vec![1.0; 30], 1e6, 3).unwrap();
        assert_eq!(s.selected.len(), 3);
        assert!(greedy_user_selection(&h, &vec![1.0; 30], 1.0, 9).is_err());
    }
}
