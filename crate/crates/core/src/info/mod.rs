//! Information-theoretic privacy measures. All logarithms are base 2, so
//! every quantity is in bits.

mod detection;
mod dist;
mod empirical;
mod fisher;
mod fsm;
mod leakage;
mod privacy_power;

pub use detection::{min_kl_channel, HypothesisModel, MinKl};
pub use dist::{kl_divergence, mutual_information, ChannelMatrix, Pmf};
pub(crate) use dist::{letter_index, LETTER_TOL};
pub use empirical::{
    conditional_entropy_rate, empirical_entropy, empirical_mi_plugin, empirical_relative_entropy,
    max_crosscorr_alignment, Alignment,
};
pub use fisher::{fisher_info_additive, FisherReport, NoiseDensity};
pub use fsm::{
    empirical_mi_fsm, fsm_log_probs, EnergyFractionPolicy, FsmLogProbs, FsmModel, InputLaw,
    Transition, UnitSystem,
};
pub use leakage::{
    exact_leakage_small_n, trapdoor_bound, BinarySystem, ExactLeakage, LeakageRule,
    RandomFeasibleRule, MAX_EXACT_N,
};
pub use privacy_power::{
    blahut_arimoto, channel_oracle_search, multiuser_allocate, privacy_power_function, Allocation,
    BaPoint, PrivacyPower, ORACLE_MAX_ALPHABET,
};
