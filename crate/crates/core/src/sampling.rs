//! Seeded training subsets: per-class absolute budgets and stratified splits.
//!
//! Every class draws from its own SplitMix64 stream keyed by
//! `(seed, purpose, class index)`, so a class's draw does not depend on how
//! many other classes exist or the order they are visited in. Within a class,
//! the first `k` positions of a Fisher–Yates shuffle over the class's row
//! indices (ascending) are taken. Bounded integers use rejection sampling, so
//! the sequence is fully specified by the constants below and reproducible on
//! any platform.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::store::{EmbeddingDataset, SplitTag};
use crate::{Error, Result, Scalar};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const BUDGET_STREAM: u64 = 0x6275_6467_6574; // "budget"
const SPLIT_STREAM: u64 = 0x0073_706c_6974; // "split"

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64: output `i` is `mix64(start + (i + 1) · γ)`.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Independent stream for one class of one sampling purpose.
    fn for_class(seed: u64, purpose: u64, class: usize) -> Self {
        let key = mix64(seed ^ mix64(purpose.wrapping_add(GOLDEN_GAMMA)));
        Self::new(key ^ mix64((class as u64).wrapping_mul(GOLDEN_GAMMA).wrapping_add(1)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform integer in `[0, bound)`; `bound` must be non-zero.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        // smallest multiple-of-bound window: reject the first 2^64 mod bound values
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let r = self.next_u64();
            if r >= threshold {
                return r % bound;
            }
        }
    }
}

/// Moves a uniform random `k`-subset of `items` to the front, in draw order.
fn partial_shuffle(items: &mut [usize], k: usize, rng: &mut SplitMix64) {
    let n = items.len();
    for i in 0..k.min(n.saturating_sub(1)) {
        let j = i + rng.below((n - i) as u64) as usize;
        items.swap(i, j);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SampleCondition {
    /// At most `b` rows per class.
    Budget { b: u32 },
    /// Train side of a stratified split.
    Fraction { train_share: f64 },
    /// Held-out side of a stratified split.
    Remainder { train_share: f64 },
}

impl fmt::Display for SampleCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleCondition::Budget { b } => write!(f, "budget={b}"),
            SampleCondition::Fraction { train_share } => write!(f, "fraction={train_share}"),
            SampleCondition::Remainder { train_share } => write!(f, "remainder={train_share}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSelection {
    /// Sorted, unique row indices into the training dataset.
    pub selected: Vec<usize>,
    pub seed: u64,
    pub condition: SampleCondition,
    /// Selected rows per class, in catalog order.
    pub effective_counts: Vec<usize>,
}

impl SampleSelection {
    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }
}

fn require_training_split<T: Scalar>(ds: &EmbeddingDataset<T>) -> Result<()> {
    if ds.split() == SplitTag::Test {
        return Err(Error::Config(
            "refusing to sample training rows from the test split".into(),
        ));
    }
    Ok(())
}

/// Draws `min(b, n_c)` rows uniformly without replacement from every class.
pub fn budget_sample<T: Scalar>(ds: &EmbeddingDataset<T>, b: u32, seed: u64) -> Result<SampleSelection> {
    require_training_split(ds)?;
    if b == 0 {
        return Err(Error::Config("budget must be at least 1".into()));
    }
    let mut selected = Vec::new();
    let mut effective_counts = Vec::with_capacity(ds.n_classes());
    for (class, mut rows) in ds.rows_by_class().into_iter().enumerate() {
        if rows.is_empty() {
            return Err(Error::Degenerate(format!(
                "class {class} ({:?}) has no training rows",
                ds.classes()[class]
            )));
        }
        let take = (b as usize).min(rows.len());
        let mut rng = SplitMix64::for_class(seed, BUDGET_STREAM, class);
        partial_shuffle(&mut rows, take, &mut rng);
        selected.extend_from_slice(&rows[..take]);
        effective_counts.push(take);
    }
    selected.sort_unstable();
    Ok(SampleSelection {
        selected,
        seed,
        condition: SampleCondition::Budget { b },
        effective_counts,
    })
}

/// Rows of class `c` sent to the train side: `round(share · n_c)` (half away
/// from zero) clamped to `[1, n_c − 1]`.
pub fn stratified_train_count(n_c: usize, train_share: f64) -> usize {
    let k = (train_share * n_c as f64).round() as usize;
    k.clamp(1, n_c.saturating_sub(1).max(1))
}

/// Splits every class into a train side and a held-out side.
pub fn stratified_split<T: Scalar>(
    ds: &EmbeddingDataset<T>,
    train_share: f64,
    seed: u64,
) -> Result<(SampleSelection, SampleSelection)> {
    require_training_split(ds)?;
    if !(train_share > 0.0 && train_share < 1.0) {
        return Err(Error::Config(format!("train share {train_share} is outside (0, 1)")));
    }
    let mut train = Vec::new();
    let mut held_out = Vec::new();
    let mut train_counts = Vec::with_capacity(ds.n_classes());
    let mut held_counts = Vec::with_capacity(ds.n_classes());
    for (class, mut rows) in ds.rows_by_class().into_iter().enumerate() {
        if rows.len() < 2 {
            return Err(Error::Degenerate(format!(
                "class {class} ({:?}) has {} rows; a stratified split needs at least 2",
                ds.classes()[class],
                rows.len()
            )));
        }
        let take = stratified_train_count(rows.len(), train_share);
        let mut rng = SplitMix64::for_class(seed, SPLIT_STREAM, class);
        partial_shuffle(&mut rows, take, &mut rng);
        train.extend_from_slice(&rows[..take]);
        held_out.extend_from_slice(&rows[take..]);
        train_counts.push(take);
        held_counts.push(rows.len() - take);
    }
    train.sort_unstable();
    held_out.sort_unstable();
    Ok((
        SampleSelection {
            selected: train,
            seed,
            condition: SampleCondition::Fraction { train_share },
            effective_counts: train_counts,
        },
        SampleSelection {
            selected: held_out,
            seed,
            condition: SampleCondition::Remainder { train_share },
            effective_counts: held_counts,
        },
    ))
}
