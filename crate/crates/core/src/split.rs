//! Deterministic stratified 3:1:1 train/validation/test splitting.
//!
//! Per class: shuffle with a stream seeded by `(seed, class)`, then take
//! `floor(0.6 n)` for training, `floor(0.2 n)` for validation and the
//! remainder for test. Each returned split lists items in input order.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::{rng, Class, Error, Result};

/// Smallest class size that yields a non-empty share in every split.
pub const MIN_CLASS_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Val, SplitName::Test];

    pub fn name(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }

    pub fn from_name(s: &str) -> Option<SplitName> {
        SplitName::ALL.into_iter().find(|n| n.name() == s)
    }
}

impl core::fmt::Display for SplitName {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// `(train, val, test)` sizes for a class with `n` members.
pub fn split_counts(n: usize) -> (usize, usize, usize) {
    let train = n * 3 / 5;
    let val = n / 5;
    (train, val, n - train - val)
}

/// Split assignment for each input index.
pub fn assign(labels: &[Class], seed: u64) -> Result<Vec<SplitName>> {
    let mut out = alloc::vec![SplitName::Test; labels.len()];
    for class in Class::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < MIN_CLASS_SIZE {
            return Err(Error::TooSmall {
                class: class.name(),
                count: members.len(),
                minimum: MIN_CLASS_SIZE,
            });
        }
        members.shuffle(&mut rng::stream(seed, &[class.index() as u64]));
        let (train, val, _) = split_counts(members.len());
        for (rank, &i) in members.iter().enumerate() {
            out[i] = if rank < train {
                SplitName::Train
            } else if rank < train + val {
                SplitName::Val
            } else {
                SplitName::Test
            };
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

impl<T> Split<T> {
    pub fn get(&self, name: SplitName) -> &[T] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Val => &self.val,
            SplitName::Test => &self.test,
        }
    }
}

pub fn stratified_split<T: Clone>(
    items: &[T],
    label: impl Fn(&T) -> Class,
    seed: u64,
) -> Result<Split<T>> {
    let labels: Vec<Class> = items.iter().map(&label).collect();
    let assignment = assign(&labels, seed)?;
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (item, name) in items.iter().zip(assignment) {
        match name {
            SplitName::Train => split.train.push(item.clone()),
            SplitName::Val => split.val.push(item.clone()),
            SplitName::Test => split.test.push(item.clone()),
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_policy_counts() {
        assert_eq!(split_counts(588), (352, 117, 119));
        assert_eq!(split_counts(1232), (739, 246, 247));
        assert_eq!(split_counts(5), (3, 1, 1));
    }

    #[test]
    fn too_small_class_is_refused() {
        let labels = [Class::Benign; 4]
            .into_iter()
            .chain([Class::Malignant; 9])
            .collect::<Vec<_>>();
        assert_eq!(
            assign(&labels, 0),
            Err(Error::TooSmall {
                class: "benign",
                count: 4,
                minimum: 5
            })
        );
    }

    #[test]
    fn split_is_stratified_disjoint_and_deterministic() {
        let items: Vec<(usize, Class)> = (0..60)
            .map(|i| {
                (
                    i,
                    if i % 3 == 0 {
                        Class::Benign
                    } else {
                        Class::Malignant
                    },
                )
            })
            .collect();
        let a = stratified_split(&items, |x| x.1, 42).unwrap();
        let b = stratified_split(&items, |x| x.1, 42).unwrap();
        assert_eq!(a, b);
        let c = stratified_split(&items, |x| x.1, 43).unwrap();
        assert_ne!(a, c);
        let count = |s: &[(usize, Class)], c: Class| s.iter().filter(|x| x.1 == c).count();
        assert_eq!(count(&a.train, Class::Benign), 12);
        assert_eq!(count(&a.val, Class::Benign), 4);
        assert_eq!(count(&a.test, Class::Benign), 4);
        assert_eq!(count(&a.train, Class::Malignant), 24);
        let mut all: Vec<usize> = a
            .train
            .iter()
            .chain(&a.val)
            .chain(&a.test)
            .map(|x| x.0)
            .collect();
        all.sort();
        assert_eq!(all, (0..60).collect::<Vec<_>>());
    }
}
