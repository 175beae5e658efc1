//! Finite-N Monte Carlo: channel sampling, ZF precoding, user selection and
//! slot simulation.

pub mod channel;
pub mod schedule;
pub mod selection;
pub mod sim;
pub mod zf;

pub use channel::{antennas_per_bs, sample_channel, sample_users, ChannelRealization};
pub use schedule::{probabilistic_schedule, StreamAssignment};
pub use selection::{greedy_select_scaled, greedy_user_selection, Selection};
pub use sim::{convergence_study, finite_sim_throughput, ConvergencePoint, SimConfig, SimResult, SimScheduler};
pub use zf::{diagonality_defect, empirical_theta, zf_pseudo_inverse, ZfMethod, ZfSolution};
