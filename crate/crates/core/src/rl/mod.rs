mod critic;
mod hyper;
mod online;
mod policy;
mod target;
mod train;

pub use critic::CriticEnsemble;
pub(crate) use critic::concat_cols;
pub use hyper::Hyperparams;
pub use online::{evaluate, train_online, TrainFailure};
pub use policy::{Actor, PolicyKind, PolicySample};
pub use target::{bootstrap_actions, bootstrap_targets, q_target, smooth_target_actions, BaseAlgo};
pub use train::TrainState;
