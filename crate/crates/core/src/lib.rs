//! Apnoea detection from single-lead ECG windows.
//!
//! * [`wfdb`]: record headers, format-212 signals and per-minute annotations.
//! * [`dataset`]: event segmentation, class streams, balanced windowed datasets and splits.
//! * [`nn`]: the one-dimensional CNN, its gradients, Adam and the training loop.
//! * [`metrics`]: confusion-matrix metrics, log loss and ROC AUC.

pub mod dataset;
pub mod metrics;
pub mod nn;
pub mod wfdb;
