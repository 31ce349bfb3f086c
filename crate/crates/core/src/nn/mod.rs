pub mod checkpoint;
pub mod graph;
pub mod kernels;
pub mod models;
pub mod tensor;

pub use checkpoint::Checkpoint;
pub use graph::{Gradients, Graph, Var};
pub use models::{
    discriminator_forward, generate, generator_forward, score, DiscriminatorConfig,
    GeneratorConfig, ModelParams,
};
pub use tensor::Tensor;
