//! Selection-probability bookkeeping for SP training.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Initial candidate sets of BS codewords per UE codeword.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpInit {
    /// Every BS codeword is a candidate for every UE codeword.
    Uniform,
    /// Interlaced candidate sets: UE codeword `i` pairs only with BS codewords
    /// `j` where `i + j` is odd, i.e. exactly the IS checkerboard.
    Checkerboard,
}

/// Selection probabilities of the UE codewords and the BS codewords still
/// untested with each of them.
#[derive(Debug, Clone, PartialEq)]
pub struct SpState {
    probs: Vec<f64>,
    untested_bs: Vec<Vec<usize>>,
    select_counts: Vec<usize>,
}

impl SpState {
    pub fn new(init: SpInit, n_ue: usize, n_bs: usize) -> Self {
        let untested_bs: Vec<Vec<usize>> = (0..n_ue)
            .map(|i| match init {
                SpInit::Uniform => (0..n_bs).collect(),
                SpInit::Checkerboard => (0..n_bs).filter(|j| (i + j) % 2 == 1).collect(),
            })
            .collect();
        let mut probs: Vec<f64> = untested_bs
            .iter()
            .map(|z| if z.is_empty() { 0.0 } else { 1.0 })
            .collect();
        normalize(&mut probs);
        Self {
            probs,
            untested_bs,
            select_counts: vec![0; n_ue],
        }
    }

    /// Normalized selection probabilities.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn untested_bs(&self, ue: usize) -> &[usize] {
        &self.untested_bs[ue]
    }

    pub fn select_counts(&self) -> &[usize] {
        &self.select_counts
    }

    /// Number of slots needed to exhaust every candidate set.
    pub fn max_slots(&self, n_rf: usize) -> usize {
        self.untested_bs.iter().map(|z| z.len().div_ceil(n_rf)).sum()
    }

    pub fn exhausted(&self) -> bool {
        self.untested_bs.iter().all(Vec::is_empty)
    }

    /// Draws a UE codeword from the current probabilities and up to `n_rf`
    /// distinct untested BS codewords for it, uniformly. A codeword with
    /// fewer than `n_rf` candidates left gives up all of them. Returns `None`
    /// once every candidate set is empty.
    pub fn draw<R: Rng + ?Sized>(&self, n_rf: usize, rng: &mut R) -> Result<Option<(usize, Vec<usize>)>> {
        if self.exhausted() {
            return Ok(None);
        }
        let dist = WeightedIndex::new(&self.probs)
            .map_err(|e| Error::Logic(format!("selection probabilities unusable: {e}")))?;
        let ue = dist.sample(rng);
        let pool = &self.untested_bs[ue];
        if pool.is_empty() {
            return Err(Error::Logic(format!("drew UE codeword {ue} with no candidates")));
        }
        let take = n_rf.min(pool.len());
        let mut picked: Vec<usize> = rand::seq::index::sample(rng, pool.len(), take)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        picked.sort_unstable();
        Ok(Some((ue, picked)))
    }

    /// Removes `drawn` from codeword `ue`'s candidates, scales its weight by
    /// the fraction of candidates left and renormalizes.
    ///
    /// With `C` initial candidates and `N_RF` codewords per draw, the factor
    /// after the `q`-th selection is `(C - q N_RF) / (C - (q - 1) N_RF)`.
    pub fn update(&mut self, ue: usize, drawn: &[usize]) -> Result<()> {
        if ue >= self.untested_bs.len() {
            return Err(Error::Logic(format!("UE codeword {ue} out of range")));
        }
        let pool = &mut self.untested_bs[ue];
        if pool.is_empty() || drawn.is_empty() {
            return Err(Error::Logic(format!(
                "nothing to draw for UE codeword {ue}"
            )));
        }
        let before = pool.len();
        for d in drawn {
            match pool.iter().position(|x| x == d) {
                Some(pos) => {
                    pool.remove(pos);
                }
                None => {
                    return Err(Error::Logic(format!(
                        "BS codeword {d} is not untested for UE codeword {ue}"
                    )))
                }
            }
        }
        let after = pool.len();
        self.select_counts[ue] += 1;
        self.probs[ue] = if after == 0 {
            0.0
        } else {
            self.probs[ue] * after as f64 / before as f64
        };
        normalize(&mut self.probs);
        Ok(())
    }
}

fn normalize(p: &mut [f64]) {
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        for x in p.iter_mut() {
            *x /= total;
        }
    }
}
