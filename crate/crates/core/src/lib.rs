//! Synthetic one-shot imitation filming.
//!
//! A simulated world produces camera/subject trajectories for five basic
//! aerial filming styles and renders the observations a video pipeline would
//! extract from them. On top of that sit snippet autoencoders, a style
//! classifier with temporal attention, an action imitation network, a
//! probability-curve segmenter and a closed-loop camera controller.

pub mod action;
pub mod config;
pub mod controller;
pub mod error;
pub mod features;
pub mod geometry;
pub mod imitation;
pub mod manifest;
pub mod pipeline;
pub mod scene;
pub mod segmenter;
pub mod style;
pub mod style_net;
pub mod training;

pub use action::Action;
pub use error::{Error, Result};
pub use style::StyleLabel;
