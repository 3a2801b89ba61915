mod agent;
mod mix;
mod spec;

pub use agent::{compose, prefill_dataset, ActMode, Agent, Decision, Mixer, OfflineInputs};
pub use mix::{ibrl_prefers_offline, mix_cheq, mix_ibrl, mix_residual, CheqBounds};
pub use spec::{AgentSpec, DataSource, MixerKind, COMPONENTS};
