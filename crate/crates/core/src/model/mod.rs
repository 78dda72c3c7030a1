//! Toy-scale vision-language plumbing: shared Siamese encoder, position
//! embedding interpolation, MLP connector, low-rank adapters and the
//! freeze masks of the two finetuning stages.

pub mod config;
pub mod connector;
pub mod encoder;
pub mod lora;
pub mod ops;
pub mod pos_embed;
pub mod stage;
pub mod weights_file;

pub use config::{EncoderConfig, FeatureSelect};
pub use connector::{connector_backward, connector_forward, ConnectorGrads, ConnectorWeights};
pub use encoder::{encode, siamese_concat, EncoderWeights, LayerWeights};
pub use lora::{lora_forward, lora_merge, LoraAdapter};
pub use pos_embed::{interpolate_grid, PositionEmbedding};
pub use stage::{Component, FreezeMask, TrainingStage};
pub use weights_file::TensorStore;
