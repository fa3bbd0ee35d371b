//! driftforge: a desk-scale laboratory for studying how long injected
//! backdoors survive in image classifiers that are periodically fine-tuned
//! on drifting data, paired with an exact convex-theory oracle that checks
//! the matching analytical predictions numerically.
//!
//! The crate is organized in layers:
//!
//! * [`numcore`]: dense f64 tensors, a deterministic splittable RNG, and
//!   image containers. Everything else builds on these.
//! * [`drift`]: labeled datasets and parameterized distribution drift
//!   (rotation, brightness, hue, saturation), always applied to the
//!   original data so drift compounds by schedule, not by accumulation of
//!   resampling error.
//! * [`triggers`]: backdoor trigger stamping (corner patch, blend, warp)
//!   and dataset poisoning plans.
//! * [`nn`]: small classifiers (linear, MLP, conv) with exact analytic
//!   gradients and a byte-stable checkpoint format.
//! * [`optim`]: minibatch SGD with momentum, weight decay, and learning
//!   rate schedules (constant, inverse-time, slanted triangular).
//! * [`timeline`]: the update loop itself. Trains a model, fine-tunes it
//!   through a sequence of drifted updates, records accuracy and attack
//!   success rate per update, and computes gamma-survivability.
//! * [`theory`]: the convex quadratic oracle. Closed-form mixture
//!   minimizers, tightness and monotonicity checks, drift margins, and
//!   projected-SGD convergence experiments under different schedules.
//! * [`harness`]: experiment configs, dataset loading and synthesis,
//!   sweeps, and report generation. The CLI in `main.rs` is a thin shim
//!   over this module.

pub mod drift;
pub mod error;
pub mod harness;
pub mod nn;
pub mod numcore;
pub mod optim;
pub mod stats;
pub mod theory;
pub mod timeline;
pub mod triggers;

pub use error::{Error, Result};
