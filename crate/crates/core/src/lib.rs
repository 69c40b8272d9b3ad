//! LEO non-terrestrial network resource allocation with diffusion-policy
//! multi-agent learners, plus reference GFlowNet and GAN trainers.

pub mod diffnet;
pub mod diffusion;
pub mod error;
pub mod gai_lab;
pub mod harness;
pub mod load;
pub mod ntn;
pub mod policies;

pub use error::{Error, Result};
