//! The learned closure: coefficient and basis networks, and their checkpoints.

pub mod checkpoint;
pub mod mlp;
pub mod neurde;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use mlp::{Layer, Mlp};
pub use neurde::{energy_moment, renormalize_energy, velocity_tensor, MlpParams, ParamHandles, EXPONENT_LIMIT};
