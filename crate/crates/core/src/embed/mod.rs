//! Embedding network: one embedding matrix per categorical variable feeding
//! a choice softmax (alongside plain covariates), each with a reconstruction
//! head that tries to recover the category from its embedding.

mod config;
mod net;
mod train;

pub use config::EmbeddingNetConfig;
pub use net::{
    choice_log_likelihood, forward, gradient, gradient_into, loss, EmbeddingNetParams, LossWeights, NetData,
    VariableParams, VariableShape,
};
pub use train::{export, repeat_seeds, run_repeats, select_best, train, Adam, Repeats, TrainRun, TrainingSet, INIT_SCALE};
