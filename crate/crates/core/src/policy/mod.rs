//! Energy management policies.
//!
//! Convex target matching (offline, piecewise and receding-horizon) needs a
//! lossless battery; the causal heuristics run through
//! [`simulate`](crate::model::simulate) and work with any
//! [`BatterySpec`](crate::model::BatterySpec).

mod channel;
mod filter;
mod heuristic;
mod mdp;
mod offline;
mod receding;
mod shaping;
mod similarity;
mod stepping;

pub use channel::memoryless_channel_policy;
pub use filter::{lowpass_target, moving_average_len};
pub use heuristic::{best_effort_policy, myopic_online_policy, BestEffort, MyopicParams, MyopicPolicy};
pub use mdp::{
    average_cost_gap, q_learning, value_iteration, ActionSpec, BatteryMdp, MdpSolution, MdpSpec,
    QLearningOutput, QLearningParams,
};
pub use offline::{
    shaping_objective, solve_offline_constant_target, solve_offline_series_target,
    solve_piecewise_target, OfflineSolution, PolicyWeights,
};
pub use receding::{solve_receding_horizon, HorizonSpec, RecedingOutput, TargetMode};
pub use similarity::{appliance_similarity_metrics, SimilarityMetrics};
pub use stepping::{stepping_policy, SteppingOutput, SteppingPolicy, SteppingSpec, SteppingVariant};
