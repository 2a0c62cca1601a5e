//! Photo-token mining: a prefix sweep against a truncated-token status
//! oracle, then a sharded, seeded search of each valid prefix's suffixes.

mod estimate;
mod miner;
mod permute;
mod space;

pub use estimate::{estimate_runtime, human_duration, EstimateError, RuntimeEstimate};
pub use miner::{
    mine, mine_suffixes, plan, sweep_prefixes, Completion, MineError, MinerConfig, MiningPlan, MiningResult,
    PhaseCounts, PrefixSweep, SuffixBudget,
};
pub use permute::{partition_tokenspace, worker_streams, IndexPermutation, WorkerStream};
pub use space::{SpaceError, TokenSpace, DEFAULT_ALPHABET, DEFAULT_PREFIX_LEN, DEFAULT_SUFFIX_LEN};
