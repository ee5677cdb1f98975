//! Latent spring-damper dynamics driven by grouped rotational kinematics.
//!
//! Joint rotations become a fixed-width pose descriptor, a PCA latent space
//! gives a low-dimensional state, and learned force heads integrate that
//! state forward one frame at a time.

pub mod dynamics;
pub mod error;
pub mod latent_space;
pub mod linalg;
pub mod neural;
pub mod oracle;
pub mod pose_features;
pub mod so3;
pub mod training;

pub use error::{Error, Result};
