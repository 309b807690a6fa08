//! End-to-end sampler: recipe draw, structured stage, noiser, rejection, and
//! training-window extraction.
//!
//! Every batch is a pure function of `(seed, batch_index, config)`. Lanes are
//! laid out as
//!
//! ```text
//! [batch, attempt, RECIPE]            recipe draws
//! [batch, attempt, BASE, row]         base / plain SARIMA innovations
//! [batch, attempt, ENVELOPE, row]     envelope innovations
//! [batch, attempt, NOISE, row]        noiser draws
//! [batch, WINDOW, row]                window placement
//! ```

use std::collections::VecDeque;
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{SimulatorConfig, WindowGeometry};
use crate::error::{Error, Result};
use crate::noisers::{self, sample_noiser_spec, NoiserSpec};
use crate::rng::{tag, Stream, StreamKey};
use crate::sarima::{sample_spec, unroll_with, warmup_length, SarimaSpec, UnrollOptions};
use crate::sarima2::{compose, sample_sarima2_spec, Sarima2Spec};

/// Structured stage of a recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StructureSpec {
    Sarima(SarimaSpec),
    Sarima2(Sarima2Spec),
}

/// Everything needed to regenerate one batch bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecipe {
    pub master_seed: u64,
    pub batch_index: u64,
    pub attempt: u64,
    pub rows: usize,
    pub length: usize,
    pub fir_taps: usize,
    pub divergence_limit: f64,
    pub structure: StructureSpec,
    pub noiser: NoiserSpec,
}

impl GenerationRecipe {
    fn attempt_key(&self) -> StreamKey {
        StreamKey::with_lane(self.master_seed, &[self.batch_index, self.attempt])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("recipe serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// SHA-256 of the compact JSON encoding.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn is_sarima2(&self) -> bool {
        matches!(self.structure, StructureSpec::Sarima2(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedBatch {
    /// `rows × length`, warmup already removed.
    pub data: Array2<f64>,
    pub recipe: GenerationRecipe,
}

impl GeneratedBatch {
    /// Row-major `f32` copy of the data.
    pub fn to_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&v| v as f32).collect()
    }
}

/// Draws the recipe of one attempt without generating data.
pub fn sample_recipe(
    master_seed: u64,
    batch_index: u64,
    attempt: u64,
    config: &SimulatorConfig,
) -> Result<GenerationRecipe> {
    let mut stream = StreamKey::with_lane(master_seed, &[batch_index, attempt, tag::RECIPE]).stream();
    let structure = if stream.coin(config.sarima2_probability) {
        StructureSpec::Sarima2(sample_sarima2_spec(&mut stream, config)?)
    } else {
        StructureSpec::Sarima(sample_spec(&mut stream, config)?)
    };
    let noiser = sample_noiser_spec(&mut stream, &config.noisers)?;
    Ok(GenerationRecipe {
        master_seed,
        batch_index,
        attempt,
        rows: config.batch_size,
        length: config.sequence_length,
        fir_taps: config.fir_taps_max,
        divergence_limit: config.divergence_limit,
        structure,
        noiser,
    })
}

/// Unrolls `len` post-warmup steps; the warmup prefix is generated and dropped.
fn unroll_trimmed(
    spec: &SarimaSpec,
    key: &StreamKey,
    rows: usize,
    len: usize,
    opts: &UnrollOptions,
) -> Result<Array2<f64>> {
    let w = warmup_length(spec);
    let mut batch = unroll_with(spec, key, rows, len + w, opts)?;
    batch.trim_front(w);
    Ok(batch.data)
}

fn check_rows(data: &Array2<f64>, limit: f64) -> Result<()> {
    for (r, row) in data.rows().into_iter().enumerate() {
        if let Some((t, &v)) = row.iter().enumerate().find(|(_, v)| !v.is_finite() || v.abs() > limit) {
            return Err(Error::Divergence { t, value: v });
        }
        let first = row[0];
        if row.iter().all(|&v| v == first) {
            return Err(Error::Degenerate(format!("row {r} is constant ({first})")));
        }
    }
    Ok(())
}

/// Regenerates the data described by a recipe.
pub fn realize(recipe: &GenerationRecipe) -> Result<Array2<f64>> {
    let key = recipe.attempt_key();
    let opts = UnrollOptions {
        fir_taps: recipe.fir_taps,
        divergence_limit: recipe.divergence_limit,
        integrate: true,
    };
    let rows = recipe.rows;
    let len = recipe.length;
    let structured = match &recipe.structure {
        StructureSpec::Sarima(spec) => unroll_trimmed(spec, &key.child(tag::BASE), rows, len, &opts)?,
        StructureSpec::Sarima2(spec) => {
            let base = unroll_trimmed(&spec.base, &key.child(tag::BASE), rows, len, &opts)?;
            let env_len = spec.envelope_len(len);
            let env = unroll_trimmed(&spec.envelope, &key.child(tag::ENVELOPE), rows, env_len.max(1), &opts)?;
            compose(&base, &env, spec)?
        }
    };
    if let Err(e) = check_rows(&structured, recipe.divergence_limit) {
        // A constant structured row only matters if the noiser keeps it constant.
        if !matches!(e, Error::Degenerate(_)) {
            return Err(e);
        }
    }

    let noise_key = key.child(tag::NOISE);
    let mut out = vec![0.0f64; rows * len];
    out.par_chunks_mut(len)
        .zip(structured.as_slice().expect("standard layout").par_chunks(len))
        .enumerate()
        .try_for_each(|(r, (dst, src))| -> Result<()> {
            let mut stream = noise_key.child(r as u64).stream();
            let noised = noisers::apply(src, &recipe.noiser, &mut stream)?;
            dst.copy_from_slice(&noised);
            Ok(())
        })?;
    let data = Array2::from_shape_vec((rows, len), out).expect("shape matches buffer");
    check_rows(&data, recipe.divergence_limit)?;
    Ok(data)
}

/// Generates batch `batch_index` of the run seeded by `master_seed`.
///
/// Divergent or degenerate attempts are redrawn with a fresh recipe up to
/// `config.max_attempts` times.
pub fn generate_batch(master_seed: u64, batch_index: u64, config: &SimulatorConfig) -> Result<GeneratedBatch> {
    config.validate()?;
    let mut last: Option<(GenerationRecipe, Error)> = None;
    for attempt in 0..config.max_attempts as u64 {
        let recipe = sample_recipe(master_seed, batch_index, attempt, config)?;
        match realize(&recipe) {
            Ok(data) => return Ok(GeneratedBatch { data, recipe }),
            Err(e @ (Error::Divergence { .. } | Error::Degenerate(_))) => last = Some((recipe, e)),
            Err(e) => return Err(e),
        }
    }
    let (recipe, reason) = last.expect("max_attempts >= 1");
    Err(Error::Generation {
        attempts: config.max_attempts,
        reason: reason.to_string(),
        recipe: Some(recipe.to_json()),
    })
}

/// A context/target pair cut from one generated row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingWindow {
    /// Offset of the context's first step in the source row.
    pub start: usize,
    pub context: Vec<f64>,
    /// Number of zeroed positions at the left of `context`.
    pub pad_len: usize,
    pub target: Vec<f64>,
}

impl TrainingWindow {
    /// `true` at padded positions.
    pub fn padding_mask(&self) -> Vec<bool> {
        (0..self.context.len()).map(|i| i < self.pad_len).collect()
    }
}

/// Cuts a window of `context + horizon` steps at a uniform start, zeroes a
/// uniform `0..=pad_max` prefix of the context.
pub fn extract_window(row: &[f64], stream: &mut Stream, geometry: &WindowGeometry) -> Result<TrainingWindow> {
    let total = geometry.total();
    if row.len() < total {
        return Err(Error::Parameter(format!(
            "series of length {} is shorter than the window ({total})",
            row.len()
        )));
    }
    if geometry.pad_max >= geometry.context {
        return Err(Error::Parameter(format!(
            "pad_max {} must be smaller than context {}",
            geometry.pad_max, geometry.context
        )));
    }
    let start = stream.int_inclusive(0, row.len() - total);
    let pad_len = stream.int_inclusive(0, geometry.pad_max);
    let mut context = row[start..start + geometry.context].to_vec();
    context[..pad_len].fill(0.0);
    let target = row[start + geometry.context..start + total].to_vec();
    Ok(TrainingWindow {
        start,
        context,
        pad_len,
        target,
    })
}

/// One window per row of a generated batch.
pub fn batch_windows(batch: &GeneratedBatch, geometry: &WindowGeometry) -> Result<Vec<TrainingWindow>> {
    let key = StreamKey::with_lane(batch.recipe.master_seed, &[batch.recipe.batch_index, tag::WINDOW]);
    batch
        .data
        .rows()
        .into_iter()
        .enumerate()
        .map(|(r, row)| {
            let row = row.to_vec();
            extract_window(&row, &mut key.child(r as u64).stream(), geometry)
        })
        .collect()
}

/// Lazy sequence of batches `0, 1, 2, ...` for one seed.
///
/// Batches are produced `workers` at a time on a dedicated thread pool and
/// delivered in index order. Batch content depends only on its index, so the
/// output is identical for any worker count.
pub struct BatchStream {
    config: Arc<SimulatorConfig>,
    seed: u64,
    next: u64,
    end: Option<u64>,
    workers: usize,
    pool: Option<Arc<rayon::ThreadPool>>,
    ready: VecDeque<Result<GeneratedBatch>>,
}

impl BatchStream {
    pub fn new(seed: u64, config: SimulatorConfig, count: Option<u64>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config: Arc::new(config),
            seed,
            next: 0,
            end: count,
            workers: 1,
            pool: None,
            ready: VecDeque::new(),
        })
    }

    /// Generates up to `workers` batches concurrently.
    pub fn with_workers(mut self, workers: usize) -> Result<Self> {
        let workers = workers.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
        self.workers = workers;
        self.pool = Some(Arc::new(pool));
        Ok(self)
    }

    pub fn config(&self) -> &SimulatorConfig {
        &self.config
    }

    fn refill(&mut self) {
        let hi = match self.end {
            Some(end) => end.min(self.next + self.workers as u64),
            None => self.next + self.workers as u64,
        };
        if hi <= self.next {
            return;
        }
        let (seed, cfg) = (self.seed, Arc::clone(&self.config));
        let run = || -> Vec<Result<GeneratedBatch>> {
            (self.next..hi)
                .into_par_iter()
                .map(|i| generate_batch(seed, i, &cfg))
                .collect()
        };
        let produced = match &self.pool {
            Some(pool) => pool.install(run),
            None => run(),
        };
        self.ready.extend(produced);
        self.next = hi;
    }
}

impl Iterator for BatchStream {
    type Item = Result<GeneratedBatch>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.ready.is_empty() {
            self.refill();
        }
        self.ready.pop_front()
    }
}

/// Convenience constructor for [`BatchStream`].
pub fn stream(seed: u64, config: SimulatorConfig, count: Option<u64>) -> Result<BatchStream> {
    BatchStream::new(seed, config, count)
}
