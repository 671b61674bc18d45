//! Group-relative policy optimization with entropy-driven advantage shaping.
//!
//! The crate is `no_std` (with `alloc`) and holds every numerical piece of the
//! toolkit:
//!
//! - [`policy`]: a small autoregressive categorical policy with exact
//!   distributions, sampling and analytic gradients
//! - [`rewards`]: tag-grammar parsing, format/accuracy rewards and the
//!   BLEU / ROUGE / METEOR / IoU metrics
//! - [`grpo`]: group advantages, the clipped objective with KL penalty, the
//!   supervised objective and an AdamW optimizer
//! - [`uadt`]: sequence-entropy threshold tracking and advantage shaping
//! - [`tasks`]: synthetic mixed-difficulty task generators
//! - [`eval`]: evaluation metrics and the report harness
//! - [`trainer`]: in-memory SFT / RL / ablation drivers and heatmap binning
//!
//! File formats, configuration parsing and the command line live in the
//! companion `uadt` crate.

#![no_std]
#![deny(missing_debug_implementations)]

extern crate alloc;

pub mod error;
pub mod eval;
pub mod grpo;
pub mod policy;
pub mod rewards;
pub mod rng;
pub mod stats;
pub mod tasks;
pub mod trainer;
pub mod uadt;
pub mod vocab;

pub use error::{Error, Result};
pub use policy::{PolicySnapshot, Rollout, TokenDistribution};
pub use tasks::{TaskInstance, TaskKind, TaskSuite};
pub use vocab::{Token, Vocab};
