//! Subject-exclusive fold assignment.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Every subject belongs to exactly one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    assignment: BTreeMap<String, usize>,
}

/// Shuffle the distinct subjects with `seed` and deal them round-robin into
/// `k` folds, so fold sizes differ by at most one subject. `k` equal to the
/// subject count gives leave-one-person-out.
pub fn split_folds<'a>(subjects: impl IntoIterator<Item = &'a str>, k: usize, seed: u64) -> Result<FoldPlan> {
    let unique: BTreeSet<&str> = subjects.into_iter().collect();
    if unique.iter().any(|s| s.is_empty()) {
        return Err(Error::InvalidParam("empty subject id".into()));
    }
    let n = unique.len();
    if k == 0 || (k < 2 && k != n) {
        return Err(Error::InvalidParam(format!("need k >= 2 folds (or k = subject count), got {k}")));
    }
    if n < k {
        return Err(Error::InvalidParam(format!("{n} subjects cannot fill {k} folds")));
    }
    let mut order: Vec<&str> = unique.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let assignment = order
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s.to_string(), i % k))
        .collect();
    Ok(FoldPlan { k, assignment })
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self, subject: &str) -> Option<usize> {
        self.assignment.get(subject).copied()
    }

    pub fn subjects_in(&self, fold: usize) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(s, _)| s.as_str())
            .collect()
    }

    /// Sample indices for training (all other folds) and validation (`fold`).
    pub fn partition<'a>(
        &self,
        subjects: impl IntoIterator<Item = &'a str>,
        fold: usize,
    ) -> Result<(Vec<usize>, Vec<usize>)> {
        if fold >= self.k {
            return Err(Error::InvalidParam(format!("fold {fold} of {}", self.k)));
        }
        let mut train = Vec::new();
        let mut val = Vec::new();
        for (i, s) in subjects.into_iter().enumerate() {
            match self.fold_of(s) {
                Some(f) if f == fold => val.push(i),
                Some(_) => train.push(i),
                None => return Err(Error::InvalidParam(format!("subject '{s}' is not in the plan"))),
            }
        }
        Ok((train, val))
    }
}
