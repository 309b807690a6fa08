//! SarSim: a synthetic time-series engine built on stable SARIMA
//! trajectories, two-process seasonal superposition and rate-conditioned
//! observation noise.
//!
//! ```
//! use sarsim::{generate_batch, SimulatorConfig};
//!
//! let cfg = SimulatorConfig::default().with_sequence_length(256);
//! let batch = generate_batch(7, 0, &SimulatorConfig { batch_size: 4, ..cfg }).unwrap();
//! assert_eq!(batch.data.dim(), (4, 256));
//! ```

// `!(x > 0.0)` style guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod config;
pub mod error;
pub mod format;
pub mod metrics;
pub mod noisers;
pub mod pipeline;
pub mod polyroots;
pub mod rng;
pub mod sarima;
pub mod sarima2;
pub mod spectral;

pub use config::{Bracket, NoiserConfig, OrderMaxima, SimulatorConfig, Upsampling, WindowGeometry};
pub use error::{Error, Result};
pub use format::OutputFormat;
pub use noisers::{NoiserFamily, NoiserSpec};
pub use pipeline::{
    batch_windows, extract_window, generate_batch, realize, sample_recipe, stream, BatchStream, GeneratedBatch,
    GenerationRecipe, StructureSpec, TrainingWindow,
};
pub use polyroots::{Convention, LagPolynomial, PoleSet};
pub use rng::{Stream, StreamKey};
pub use sarima::{SarimaSpec, SeriesBatch};
pub use sarima2::{Mixing, Sarima2Spec};

/// Engine version recorded in generation metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
