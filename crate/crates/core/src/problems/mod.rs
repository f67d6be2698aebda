//! Shipped problem instances: a quadratic synthetic testbed with closed-form
//! inner maximizations and a certified KKT reference point, and a robust
//! multi-task learning instance built on a small tanh MLP over tabular or
//! synthetic data.

mod dataset;
mod dro_mtl;
mod mlp;
mod testbed;

pub use dataset::{load_csv_dataset, make_blobs, DatasetSplit, LabelSpec, Normalization, TaskData};
pub use dro_mtl::{calibrate_threshold, make_dro_mtl, DroMtl};
pub use mlp::{init_weights, mlp_loss_and_grads, per_sample_losses, weighted_loss_grad, MlpSpec};
pub use testbed::{make_testbed, KktReference, QuadraticTestbed};
