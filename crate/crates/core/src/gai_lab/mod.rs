//! Toy-scale GFlowNet and GAN trainers with exact or brute-force oracles.

pub mod gan;
pub mod gflownet;

pub use gan::{gan_train, gan_value, GanConfig, GanPair, GanTrace, UpdateKind};
pub use gflownet::{flow_loss, flow_policy, gflownet_train, Boundary, Dag, EdgeFlows, FlowNetwork, GflowConfig};
