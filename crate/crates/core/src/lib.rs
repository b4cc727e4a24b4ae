//! Missing-data imputation for numeric tabular data.
//!
//! The crate contains a small dense-network core ([`nn`], [`optim`]), the
//! mask algebra used by every imputer ([`masking`]), the adversarial and
//! autoencoder imputers ([`neural`]), classical baselines ([`classical`]),
//! downstream classifiers ([`classifiers`]), rank statistics ([`stats`]),
//! dataset handling ([`dataio`]) and the benchmark runner ([`experiment`]).

pub mod classical;
pub mod classifiers;
pub mod dataio;
pub mod error;
pub mod experiment;
pub mod imputer;
pub mod masking;
pub mod matrix;
pub mod neural;
pub mod nn;
pub mod optim;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
pub use imputer::{ImputerModel, SavedModel};
pub use masking::{Mask, MaskScheme};
pub use matrix::Matrix;
pub use nn::{Activation, DenseLayer, Mlp};
