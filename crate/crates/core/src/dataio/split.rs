use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Split, WindowedDataset};
use crate::error::{Error, Result};

/// Train/val/test ratios plus the shuffle seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratios: [u32; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(ratios: [u32; 3], seed: u64) -> Result<Self> {
        let spec = Self { ratios, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratios.iter().map(|&r| r as u64).sum::<u64>() == 0 {
            return Err(Error::config("ratios", "must not all be zero"));
        }
        Ok(())
    }

    /// Parses `"8:1:1"`.
    pub fn parse_ratios(text: &str) -> Result<[u32; 3]> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || Error::config("ratios", format!("expected three integers like 8:1:1, got `{text}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let mut out = [0u32; 3];
        for (slot, part) in out.iter_mut().zip(&parts) {
            *slot = part.trim().parse().map_err(|_| bad())?;
        }
        Ok(out)
    }

    /// Split sizes for `n` items by largest remainder; each size differs
    /// from its exact proportion by less than one, and ties on the
    /// remainder go to the earlier split.
    pub fn counts(&self, n: usize) -> [usize; 3] {
        let total: u64 = self.ratios.iter().map(|&r| r as u64).sum();
        let mut counts = [0usize; 3];
        let mut rems = [0u64; 3];
        for i in 0..3 {
            let num = n as u64 * self.ratios[i] as u64;
            counts[i] = (num / total) as usize;
            rems[i] = num % total;
        }
        let mut left = n - counts.iter().sum::<usize>();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| rems[b].cmp(&rems[a]).then(a.cmp(&b)));
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            if rems[i] > 0 || self.ratios[i] > 0 {
                counts[i] += 1;
                left -= 1;
            }
        }
        counts
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ratios: [8, 1, 1],
            seed: 0,
        }
    }
}

/// Shuffles window indices with `spec.seed` and tags contiguous runs of the
/// shuffled order as train, val and test.
pub fn split(mut dataset: WindowedDataset, spec: &SplitSpec) -> Result<WindowedDataset> {
    spec.validate()?;
    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let [n_train, n_val, _] = spec.counts(n);
    let mut tags = vec![Split::Test; n];
    for (pos, &i) in order.iter().enumerate() {
        tags[i] = if pos < n_train {
            Split::Train
        } else if pos < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    dataset.splits = Some(tags);
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(r: [u32; 3]) -> SplitSpec {
        SplitSpec::new(r, 3).unwrap()
    }

    #[test]
    fn table_ratios() {
        assert_eq!(spec([8, 1, 1]).counts(100), [80, 10, 10]);
        assert_eq!(spec([7, 2, 1]).counts(10), [7, 2, 1]);
        assert_eq!(spec([1, 1, 1]).counts(4), [2, 1, 1]);
        assert_eq!(spec([1, 0, 0]).counts(5), [5, 0, 0]);
    }

    #[test]
    fn parse() {
        assert_eq!(SplitSpec::parse_ratios("7:2:1").unwrap(), [7, 2, 1]);
        assert!(SplitSpec::parse_ratios("7:2").is_err());
        assert!(SplitSpec::new([0, 0, 0], 1).is_err());
    }
}
