//! Reference scenarios used by tests, benches and the CLI's bundled configs.

use faer::Mat;

use crate::geometry::{db_to_linear, ClusterProblem};

/// Gain entries `[a b c d e f]` of the two-cell example. They are the
/// squared gains `beta^2`, laid out as `[a b c c f e e d; f e e d a b c c]`.
pub const TWO_CELL_ENTRIES: [f64; 6] = [1.5, 1.3, 1.0, 0.5, 0.3, 0.2];

pub const TWO_CELL_GAMMA: f64 = 4.0;

pub const TWO_CELL_MU: [f64; 8] = [0.5, 0.5, 0.75, 1.0, 0.5, 0.5, 0.75, 1.0];

/// Per-BS power of the sum-rate sweep, 15 dB.
pub const TWO_CELL_POWER_DB: f64 = 15.0;

/// Published asymptotic `theta_{m,k}` for [`TWO_CELL_MU`], three decimals.
pub const PUBLISHED_THETA: [[f64; 8]; 2] = [
    [0.325, 0.311, 0.454, 0.565, 0.175, 0.189, 0.296, 0.435],
    [0.175, 0.189, 0.296, 0.435, 0.325, 0.311, 0.454, 0.565],
];

pub fn two_cell_beta2() -> Mat<f64> {
    let [a, b, c, d, e, f] = TWO_CELL_ENTRIES;
    let rows = [[a, b, c, c, f, e, e, d], [f, e, e, d, a, b, c, c]];
    Mat::from_fn(2, 8, |m, k| rows[m][k])
}

/// Two cooperating BSs, eight groups, `gamma = 4`, 15 dB per BS.
pub fn two_cell_problem() -> ClusterProblem {
    let p = db_to_linear(TWO_CELL_POWER_DB);
    ClusterProblem::new(TWO_CELL_GAMMA, two_cell_beta2(), vec![p, p]).expect("valid constants")
}

/// Transmit power 154 dB above the noise floor used by the layout studies.
pub const LAYOUT_POWER_DB: f64 = 154.0;
