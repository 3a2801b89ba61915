//! Transition storage: replay buffers with h-step sampling, mixed
//! online/offline batches, Monte-Carlo returns and the dataset file format.

mod buffer;
mod dataset;
mod transition;

pub use buffer::{sample_mixed, NStepBatch, ReplayBuffer, Source};
pub use dataset::{Episode, TrajectoryDataset};
pub use transition::{mc_returns, Transition};

#[cfg(test)]
pub(crate) use transition::episode_with_rewards;
