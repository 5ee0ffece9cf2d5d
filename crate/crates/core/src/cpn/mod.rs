//! Collision prediction network and its end-to-end baseline variant.

pub mod model;
pub mod train;

pub use model::{weighted_bce, Cpn, CpnConfig, CpnTrace, CpnVariant, ACTION_DIM, STATE_DIM};
pub use train::{
    auc, evaluate_cpn, positive_weight, predict_samples, train_cpn, write_metrics_csv, CpnData, CpnEpochLog,
    CpnMetrics, CpnTrainConfig,
};
