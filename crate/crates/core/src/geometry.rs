//! Linear cellular layouts, pathloss, cooperation clusters and the reduction
//! of a multi-cell network to a normalized single-cluster problem.

use faer::Mat;

use crate::error::{check_len, Error, Result};

/// Converts a dB value to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Distance-dependent pathloss `G0 / (1 + (d/delta)^nu)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathlossParams {
    g0: f64,
    delta_m: f64,
    nu: f64,
}

impl PathlossParams {
    pub fn new(g0: f64, delta_m: f64, nu: f64) -> Result<Self> {
        if !(g0 > 0.0 && g0.is_finite()) {
            return Err(Error::invalid("g0", format!("must be positive, got {g0}")));
        }
        if !(delta_m > 0.0 && delta_m.is_finite()) {
            return Err(Error::invalid("delta_m", format!("must be positive, got {delta_m}")));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::invalid("nu", format!("must be positive, got {nu}")));
        }
        Ok(Self { g0, delta_m, nu })
    }

    pub fn from_db(g0_db: f64, delta_m: f64, nu: f64) -> Result<Self> {
        Self::new(db_to_linear(g0_db), delta_m, nu)
    }

    /// Mobile WiMAX evaluation parameters: 3 dB break point at 36 m,
    /// exponent 3.504, reference gain -91.64 dB.
    pub fn wimax() -> Self {
        Self::from_db(-91.64, 36.0, 3.504).expect("constants are valid")
    }

    pub fn g0(&self) -> f64 {
        self.g0
    }

    pub fn delta_m(&self) -> f64 {
        self.delta_m
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
}

/// Linear power gain `alpha^2` at distance `distance_m` (meters).
pub fn pathloss_gain(distance_m: f64, params: &PathlossParams) -> f64 {
    debug_assert!(distance_m >= 0.0);
    params.g0 / (1.0 + (distance_m / params.delta_m).powf(params.nu))
}

/// A cooperation cluster: the BSs that jointly precode and the user groups
/// they serve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub bs: Vec<usize>,
    pub groups: Vec<usize>,
}

/// BSs and user groups on a ring of circumference `2M` km.
#[derive(Debug, Clone)]
pub struct NetworkLayout {
    num_cells: usize,
    groups_per_cell: usize,
    bs_positions_km: Vec<f64>,
    group_positions_km: Vec<f64>,
    pathloss: PathlossParams,
    power: Vec<f64>,
    clusters: Vec<Cluster>,
}

/// `M` BSs at `2m - M - 1` km (m = 1..M) and `groups_per_cell` groups per
/// cell at the midpoints of equal sub-intervals of the 2 km cell. Every cell
/// starts as its own cluster; see [`NetworkLayout::with_cluster_size`].
///
/// `power_per_bs` is linear and normalized to unit noise.
pub fn build_linear_layout(
    num_cells: usize,
    groups_per_cell: usize,
    pathloss: PathlossParams,
    power_per_bs: f64,
) -> Result<NetworkLayout> {
    if num_cells == 0 {
        return Err(Error::invalid("num_cells", "must be at least 1"));
    }
    if groups_per_cell == 0 {
        return Err(Error::invalid("groups_per_cell", "must be at least 1"));
    }
    if !(power_per_bs >= 0.0 && power_per_bs.is_finite()) {
        return Err(Error::invalid("power", format!("must be non-negative, got {power_per_bs}")));
    }
    let m = num_cells as f64;
    let g = groups_per_cell as f64;
    let bs_positions_km: Vec<f64> = (1..=num_cells).map(|i| 2.0 * i as f64 - m - 1.0).collect();
    let mut group_positions_km = Vec::with_capacity(num_cells * groups_per_cell);
    for &x in &bs_positions_km {
        for j in 0..groups_per_cell {
            group_positions_km.push(x - 1.0 + (2.0 * j as f64 + 1.0) / g);
        }
    }
    let clusters = (0..num_cells)
        .map(|c| Cluster {
            bs: vec![c],
            groups: (c * groups_per_cell..(c + 1) * groups_per_cell).collect(),
        })
        .collect();
    Ok(NetworkLayout {
        num_cells,
        groups_per_cell,
        bs_positions_km,
        group_positions_km,
        pathloss,
        power: vec![power_per_bs; num_cells],
        clusters,
    })
}

impl NetworkLayout {
    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn num_groups(&self) -> usize {
        self.group_positions_km.len()
    }

    pub fn groups_per_cell(&self) -> usize {
        self.groups_per_cell
    }

    pub fn bs_positions_km(&self) -> &[f64] {
        &self.bs_positions_km
    }

    pub fn group_positions_km(&self) -> &[f64] {
        &self.group_positions_km
    }

    pub fn pathloss(&self) -> &PathlossParams {
        &self.pathloss
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    /// Replaces the per-BS powers (linear, unit-noise normalized).
    pub fn with_power(mut self, power: Vec<f64>) -> Result<Self> {
        check_len("power", self.num_cells, power.len())?;
        if power.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::invalid("power", "entries must be finite and non-negative"));
        }
        self.power = power;
        Ok(self)
    }

    /// Partitions the ring into clusters of `size` consecutive cells.
    pub fn with_cluster_size(self, size: usize) -> Result<Self> {
        if size == 0 || self.num_cells % size != 0 {
            return Err(Error::invalid(
                "cluster_size",
                format!("{size} does not divide {} cells", self.num_cells),
            ));
        }
        let gpc = self.groups_per_cell;
        let clusters = (0..self.num_cells / size)
            .map(|c| Cluster {
                bs: (c * size..(c + 1) * size).collect(),
                groups: (c * size * gpc..(c + 1) * size * gpc).collect(),
            })
            .collect();
        self.with_clusters(clusters)
    }

    /// Installs an explicit partition; BS sets must partition `0..M` and
    /// group sets must partition `0..K`.
    pub fn with_clusters(mut self, clusters: Vec<Cluster>) -> Result<Self> {
        let mut bs_seen = vec![false; self.num_cells];
        let mut group_seen = vec![false; self.num_groups()];
        for (i, c) in clusters.iter().enumerate() {
            if c.bs.is_empty() {
                return Err(Error::EmptyCluster { index: i });
            }
            for &b in &c.bs {
                if b >= self.num_cells || std::mem::replace(&mut bs_seen[b], true) {
                    return Err(Error::invalid("clusters", format!("BS {b} missing or repeated")));
                }
            }
            for &k in &c.groups {
                if k >= group_seen.len() || std::mem::replace(&mut group_seen[k], true) {
                    return Err(Error::invalid("clusters", format!("group {k} missing or repeated")));
                }
            }
        }
        if bs_seen.iter().any(|s| !s) || group_seen.iter().any(|s| !s) {
            return Err(Error::invalid("clusters", "partition does not cover all BSs and groups"));
        }
        self.clusters = clusters;
        Ok(self)
    }

    /// Shortest distance on the ring between BS `m` and group `k`, in km.
    pub fn distance_km(&self, m: usize, k: usize) -> f64 {
        let ring = 2.0 * self.num_cells as f64;
        let d = (self.bs_positions_km[m] - self.group_positions_km[k]).abs() % ring;
        d.min(ring - d)
    }

    /// Pathloss power gain `alpha^2_{m,k}`.
    pub fn gain(&self, m: usize, k: usize) -> f64 {
        pathloss_gain(1000.0 * self.distance_km(m, k), &self.pathloss)
    }
}

/// The normalized per-cluster system: `B` BSs, `A` user groups, antenna ratio
/// `gamma` and squared gains `beta^2_{m,k} = alpha^2_{m,k} / sigma_k^2`.
#[derive(Debug, Clone)]
pub struct ClusterProblem {
    gamma: f64,
    beta2: Mat<f64>,
    power: Vec<f64>,
}

impl ClusterProblem {
    /// Builds a problem from squared gains (B x A) and per-BS powers.
    pub fn new(gamma: f64, beta2: Mat<f64>, power: Vec<f64>) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid("gamma", format!("must be positive, got {gamma}")));
        }
        if beta2.nrows() == 0 || beta2.ncols() == 0 {
            return Err(Error::invalid("beta", "gain matrix must be non-empty"));
        }
        check_len("power", beta2.nrows(), power.len())?;
        for m in 0..beta2.nrows() {
            for k in 0..beta2.ncols() {
                let b = beta2[(m, k)];
                if !(b > 0.0 && b.is_finite()) {
                    return Err(Error::invalid(
                        "beta",
                        format!("beta^2[{m},{k}] = {b} must be positive and finite"),
                    ));
                }
            }
        }
        if power.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::invalid("power", "entries must be finite and non-negative"));
        }
        Ok(Self { gamma, beta2, power })
    }

    /// Builds a problem from amplitude gains `beta_{m,k}`.
    pub fn from_beta(gamma: f64, beta: &Mat<f64>, power: Vec<f64>) -> Result<Self> {
        let beta2 = Mat::from_fn(beta.nrows(), beta.ncols(), |m, k| beta[(m, k)].powi(2));
        Self::new(gamma, beta2, power)
    }

    pub fn from_rows(gamma: f64, beta2_rows: &[Vec<f64>], power: Vec<f64>) -> Result<Self> {
        let b = beta2_rows.len();
        let a = beta2_rows.first().map_or(0, Vec::len);
        if beta2_rows.iter().any(|r| r.len() != a) {
            return Err(Error::invalid("beta", "rows have different lengths"));
        }
        Self::new(gamma, Mat::from_fn(b, a, |m, k| beta2_rows[m][k]), power)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn num_bs(&self) -> usize {
        self.beta2.nrows()
    }

    pub fn num_groups(&self) -> usize {
        self.beta2.ncols()
    }

    pub fn beta2(&self) -> &Mat<f64> {
        &self.beta2
    }

    #[inline]
    pub fn beta2_at(&self, m: usize, k: usize) -> f64 {
        self.beta2[(m, k)]
    }

    pub fn beta(&self) -> Mat<f64> {
        Mat::from_fn(self.num_bs(), self.num_groups(), |m, k| self.beta2[(m, k)].sqrt())
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Maximum total active-user load `gamma * B`.
    pub fn load_capacity(&self) -> f64 {
        self.gamma * self.num_bs() as f64
    }

    pub fn max_beta2(&self) -> f64 {
        let mut best = 0.0f64;
        for m in 0..self.num_bs() {
            for k in 0..self.num_groups() {
                best = best.max(self.beta2[(m, k)]);
            }
        }
        best
    }

    /// Same layout and powers with different squared gains.
    pub fn with_beta2(&self, beta2: Mat<f64>) -> Result<Self> {
        Self::new(self.gamma, beta2, self.power.clone())
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(gamma, self.beta2.clone(), self.power.clone())
    }

    pub fn with_power(&self, power: Vec<f64>) -> Result<Self> {
        Self::new(self.gamma, self.beta2.clone(), power)
    }

    /// Column sums `sum_m beta^2_{m,k}`.
    pub fn column_gain(&self, k: usize) -> f64 {
        (0..self.num_bs()).map(|m| self.beta2[(m, k)]).sum()
    }
}

/// Reduces cluster `cluster_index` of `layout` to a [`ClusterProblem`]. BSs
/// outside the cluster transmit at full power and their signal is folded into
/// the per-group noise level `sigma_k^2`.
pub fn cluster_reduce(
    layout: &NetworkLayout,
    cluster_index: usize,
    gamma: f64,
) -> Result<ClusterProblem> {
    let cluster = layout
        .clusters
        .get(cluster_index)
        .filter(|c| !c.bs.is_empty() && !c.groups.is_empty())
        .ok_or(Error::EmptyCluster {
            index: cluster_index,
        })?;
    let mut inside = vec![false; layout.num_cells];
    for &m in &cluster.bs {
        inside[m] = true;
    }
    let sigma2: Vec<f64> = cluster
        .groups
        .iter()
        .map(|&k| {
            1.0 + (0..layout.num_cells)
                .filter(|&m| !inside[m])
                .map(|m| layout.gain(m, k) * layout.power[m])
                .sum::<f64>()
        })
        .collect();
    let beta2 = Mat::from_fn(cluster.bs.len(), cluster.groups.len(), |i, j| {
        layout.gain(cluster.bs[i], cluster.groups[j]) / sigma2[j]
    });
    let power = cluster.bs.iter().map(|&m| layout.power[m]).collect();
    ClusterProblem::new(gamma, beta2, power)
}

/// User-group equivalence classes of a circulant-symmetric problem.
///
/// `members[i][j]` is the group of class `i` whose gain column is the first
/// member's column cyclically shifted by `j` BSs:
/// `beta2[(m + j) % B][members[i][0]] == beta2[m][members[i][j]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceClasses {
    pub num_classes: usize,
    pub class_of: Vec<usize>,
    pub members: Vec<Vec<usize>>,
    pub is_symmetric: bool,
}

impl EquivalenceClasses {
    fn not_symmetric(num_groups: usize) -> Self {
        Self {
            num_classes: 0,
            class_of: vec![usize::MAX; num_groups],
            members: Vec::new(),
            is_symmetric: false,
        }
    }

    /// Equivalent single-BS gains `beta_i^2 = sum_m beta^2_{m,k}` per class.
    pub fn class_gains(&self, problem: &ClusterProblem) -> Vec<f64> {
        self.members.iter().map(|c| problem.column_gain(c[0])).collect()
    }

    /// Expands per-class values to per-group values.
    pub fn expand(&self, per_class: &[f64]) -> Vec<f64> {
        self.class_of.iter().map(|&c| per_class[c]).collect()
    }
}

pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-9;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Searches for a partition of the groups into circulant blocks.
///
/// The canonical re-indexing (`k + j*A'`) is tried first for every shift, so
/// problems already laid out as `{(j-1)A' + i}` get exactly those classes.
pub fn detect_symmetry(problem: &ClusterProblem, tol: f64) -> EquivalenceClasses {
    let b = problem.num_bs();
    let a = problem.num_groups();
    if b == 1 {
        return EquivalenceClasses {
            num_classes: a,
            class_of: (0..a).collect(),
            members: (0..a).map(|k| vec![k]).collect(),
            is_symmetric: true,
        };
    }
    if a % b != 0 {
        return EquivalenceClasses::not_symmetric(a);
    }
    let a_prime = a / b;
    let mut class_of = vec![usize::MAX; a];
    let mut members = Vec::with_capacity(a_prime);
    let matches = |k2: usize, base: usize, shift: usize| {
        (0..b).all(|m| close(problem.beta2_at((m + shift) % b, base), problem.beta2_at(m, k2), tol))
    };
    for k in 0..a {
        if class_of[k] != usize::MAX {
            continue;
        }
        let class = members.len();
        let mut group = vec![k];
        class_of[k] = class;
        for shift in 1..b {
            let preferred = (k + shift * a_prime) % a;
            let found = std::iter::once(preferred)
                .chain(0..a)
                .find(|&k2| class_of[k2] == usize::MAX && matches(k2, k, shift));
            match found {
                Some(k2) => {
                    class_of[k2] = class;
                    group.push(k2);
                }
                None => return EquivalenceClasses::not_symmetric(a),
            }
        }
        members.push(group);
    }
    if members.len() != a_prime {
        return EquivalenceClasses::not_symmetric(a);
    }
    EquivalenceClasses {
        num_classes: a_prime,
        class_of,
        members,
        is_symmetric: true,
    }
}
