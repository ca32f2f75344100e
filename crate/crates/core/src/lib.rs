//! Gabor filter bank features fed into small convolutional networks.
//!
//! The image and its Gabor responses are either stacked into one
//! multi-channel tensor or fused into a single image by a learned 1x1
//! convolution before the network body. Modules:
//!
//! - [`gabor`]: kernels and per-task 8-filter banks
//! - [`convolve`]: same-size correlation and bank responses
//! - [`fusion`]: tensor stacking and weighted fusion
//! - [`nn`]: layers, losses, training and checkpoints
//! - [`cascade`]: three-stage detection cascade with NMS
//! - [`data`]: PNM images, manifests, folds and synthetic data

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod cli;
pub mod convolve;
pub mod data;
pub mod experiment;
pub mod error;
pub mod fusion;
pub mod gabor;
pub mod image;
pub mod models;
pub mod nn;

pub use error::{Error, Result};
pub use image::Image;
