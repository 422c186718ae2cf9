//! Finite-shot measurement simulation.
//!
//! Every `(trial, round, setting)` triple draws from its own ChaCha8 stream
//! seeded by [`substream_seed`], so rounds and settings can be sampled in any
//! order or concurrently and still reproduce the same counts.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::Result;
use crate::pauli::{born_probabilities, enumerate_settings, PauliSetting};
use crate::selection::AllocationVector;
use crate::state::DensityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngSeed(pub u64);

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Folds a sequence of words into a seed: `h ← splitmix64(h ^ splitmix64(w))`
/// starting from `h = splitmix64(base)`.
pub fn mix_seed(base: u64, words: &[u64]) -> u64 {
    words
        .iter()
        .fold(splitmix64(base), |h, &w| splitmix64(h ^ splitmix64(w)))
}

/// Seed of the generator used for one setting of one round of one trial.
pub fn substream_seed(base: RngSeed, trial: u64, round: u64, setting: u64) -> u64 {
    mix_seed(base.0, &[trial, round, setting])
}

/// Identifies the seed substreams of one measurement round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundStream {
    pub base: RngSeed,
    pub trial: u64,
    pub round: u64,
}

impl RoundStream {
    pub fn rng_for(&self, setting: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(substream_seed(self.base, self.trial, self.round, setting as u64))
    }
}

/// Multinomial draw of `shots` samples by sequential conditional binomials.
pub fn sample_multinomial<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass: f64 = probs.iter().sum();
    let last = probs.len().saturating_sub(1);
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k == last {
            counts[k] = remaining;
            break;
        }
        let cond = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let x = if cond >= 1.0 {
            remaining
        } else if cond <= 0.0 {
            0
        } else {
            Binomial::new(remaining, cond).expect("probability in (0, 1)").sample(rng)
        };
        counts[k] = x;
        remaining -= x;
        mass -= p;
    }
    counts
}

pub fn simulate_counts<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    setting: &PauliSetting,
    shots: u64,
    rng: &mut R,
) -> Result<Vec<u64>> {
    let probs = born_probabilities(rho, setting)?;
    if shots == 0 {
        return Ok(vec![0; probs.len()]);
    }
    Ok(sample_multinomial(&probs, shots, rng))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    /// `counts[μ][ν]`.
    pub counts: Vec<Vec<u64>>,
    pub shots: Vec<u64>,
}

impl CountTable {
    pub fn frequencies(&self) -> FrequencyTable {
        let rows = self
            .counts
            .iter()
            .zip(&self.shots)
            .map(|(row, &shots)| {
                if shots == 0 {
                    vec![0.0; row.len()]
                } else {
                    row.iter().map(|&c| c as f64 / shots as f64).collect()
                }
            })
            .collect();
        FrequencyTable { variant: FrequencyVariant::Measured, rows }
    }

    pub fn write_csv<W: Write>(&self, mut w: W, trial: u64, round: u64, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(w, "trial,round,setting_index,outcome_index,count,shots")?;
        }
        for (mu, (row, shots)) in self.counts.iter().zip(&self.shots).enumerate() {
            for (nu, c) in row.iter().enumerate() {
                writeln!(w, "{trial},{round},{mu},{nu},{c},{shots}")?;
            }
        }
        Ok(())
    }
}

/// Which role a frequency table plays in the multi-step pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrequencyVariant {
    /// Raw relative frequencies of one round (`f1`, `f2`).
    Measured,
    /// Two-round combination with boosted second-round rows (`f3`).
    Combined,
    /// Born probabilities of an intermediate estimate (`f4`).
    Predicted,
    /// Three-round combination (`f5`).
    ThreeStep,
}

/// `rows[μ][ν]`: per-setting, per-outcome real values.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    pub variant: FrequencyVariant,
    pub rows: Vec<Vec<f64>>,
}

impl FrequencyTable {
    pub fn zeros(settings: usize, outcomes: usize, variant: FrequencyVariant) -> Self {
        Self { variant, rows: vec![vec![0.0; outcomes]; settings] }
    }

    pub fn settings(&self) -> usize {
        self.rows.len()
    }

    pub fn outcomes(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Row-major flattening aligned with [`crate::pauli::dictionary`].
    pub fn flatten(&self) -> Vec<f64> {
        self.rows.iter().flatten().copied().collect()
    }

    /// Born probabilities of `rho` for every setting.
    pub fn predicted(rho: &DensityMatrix) -> Result<Self> {
        let rows = enumerate_settings(rho.qubits())
            .iter()
            .map(|s| born_probabilities(rho, s))
            .collect::<Result<_>>()?;
        Ok(Self { variant: FrequencyVariant::Predicted, rows })
    }
}

/// Measures every setting with its allocated number of copies.
pub fn measure_round(
    rho: &DensityMatrix,
    allocation: &AllocationVector,
    stream: RoundStream,
) -> Result<(CountTable, FrequencyTable)> {
    let settings = enumerate_settings(rho.qubits());
    let counts = settings
        .iter()
        .zip(allocation.counts())
        .map(|(s, &shots)| simulate_counts(rho, s, shots, &mut stream.rng_for(s.index())))
        .collect::<Result<Vec<_>>>()?;
    let table = CountTable { counts, shots: allocation.counts().to_vec() };
    let freqs = table.frequencies();
    Ok((table, freqs))
}

/// Infinite-shot round: exact probabilities on settings with `N_μ > 0`,
/// zero rows elsewhere.
pub fn exact_round(rho: &DensityMatrix, allocation: &AllocationVector) -> Result<FrequencyTable> {
    let mut table = FrequencyTable::predicted(rho)?;
    table.variant = FrequencyVariant::Measured;
    for (row, &shots) in table.rows.iter_mut().zip(allocation.counts()) {
        if shots == 0 {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    Ok(table)
}
