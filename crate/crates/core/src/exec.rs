//! Deterministic trial execution.
//!
//! Every trial draws from its own ChaCha stream selected by the trial index,
//! so results do not depend on scheduling and the parallel and sequential
//! paths produce identical output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::{JetBlock, JetConfiguration};

/// A ChaCha generator keyed by `seed`, positioned on stream `stream`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Runs `f(0..count)` and returns the results in index order.
    ///
    /// Without the `parallel` feature this is always sequential.
    pub fn map<T, F>(self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..count).map(f).collect(),
            Execution::Parallel => par_map(count, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}

/// Settings shared by randomized verification suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialConfig {
    pub trials: usize,
    pub seed: u64,
    pub spread: f64,
    #[serde(skip)]
    pub exec: Execution,
}

impl TrialConfig {
    pub fn new(trials: usize, seed: u64, spread: f64) -> Self {
        Self {
            trials,
            seed,
            spread,
            exec: Execution::default(),
        }
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn rng(&self, trial: usize) -> ChaCha8Rng {
        seeded_rng(self.seed, trial as u64)
    }
}

/// Minimum general-position conditioning of randomly drawn test configurations.
pub const SAMPLE_CONDITIONING: f64 = 0.02;
const CONFIG_RETRIES: usize = 10_000;

/// Draws a configuration with points and gradients uniform in `[-1, 1]`,
/// rejecting draws whose general-position or frame conditioning is below
/// `min_conditioning`.
pub fn sample_configuration<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    min_conditioning: f64,
) -> Result<JetConfiguration> {
    if n < 3 {
        return Err(Error::TooFewPoints(n));
    }
    for _ in 0..CONFIG_RETRIES {
        let blocks = (0..n)
            .map(|_| {
                JetBlock::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let cfg = JetConfiguration::new(blocks)?;
        if cfg.general_position(0.0).conditioning() >= min_conditioning
            && crate::frame::frame_conditioning(&cfg) >= min_conditioning
        {
            return Ok(cfg);
        }
    }
    Err(Error::SamplingExhausted(CONFIG_RETRIES))
}
