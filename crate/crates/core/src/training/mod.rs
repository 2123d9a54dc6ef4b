//! Two-stage optimization of the neural closure: supervised pretraining on
//! equilibrium samples, then training through unrolled solver windows.

pub mod adamw;
pub mod ops;
pub mod pretrain;
pub mod train;
pub mod tvd;
pub mod window;

pub use adamw::{AdamW, AdamWConfig, StepSchedule};
pub use ops::StepContext;
pub use pretrain::{evaluate_mse, pretrain, PretrainConfig, PretrainReport, PretrainSet};
pub use train::{train_unrolled, window_plan, write_log_csv, LogRow, TrainConfig, TrainReport};
pub use tvd::{relative_tv_increase, tvd_penalty, tvd_penalty_from_tv};
pub use window::{record_window, window_loss_and_grad, StepTarget, WindowClosure, WindowResult, WindowWeights};
