//! Remote photoplethysmography from RGB video: a reverse-mode autodiff
//! tensor core, 3-D convolutional layers, the fusion/shift/attention network,
//! hybrid temporal and spectral losses, signal processing, a synthetic clip
//! generator, training and evaluation, and the `pulseforge` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dsp;
pub mod losses;
pub mod model;
pub mod nn;
pub mod synth;
pub mod tensor;
pub mod train;
