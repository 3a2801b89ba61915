//! Dense network substrate: MLP forward/backward, Adam, target-network EMA
//! and the binary checkpoint layout.

mod adam;
mod checkpoint;
mod loss;
mod mlp;

pub use adam::AdamState;
pub use checkpoint::{load_mlp, read_mlp, save_mlp, write_mlp, FORMAT_VERSION};
pub use loss::{backprop, output_loss, LossSpec, ACTION_CLAMP};
pub(crate) use loss::split_gaussian;
pub use mlp::{ema_update, Activation, ForwardCache, GradientBundle, Head, Linear, Mlp, LOG_STD_MAX, LOG_STD_MIN};
