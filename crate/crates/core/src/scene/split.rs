use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{SceneRecord, Taxonomy};
use crate::error::{Error, Result};

/// Stratified train/val/test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<SceneRecord>,
    pub val: Vec<SceneRecord>,
    pub test: Vec<SceneRecord>,
    pub seed: u64,
}

fn by_category(records: &[SceneRecord]) -> Result<Vec<Vec<usize>>> {
    let mut groups = vec![Vec::new(); Taxonomy::NUM_LANDUSES];
    for (i, r) in records.iter().enumerate() {
        groups[r.label()?].push(i);
    }
    Ok(groups)
}

fn round_count(n: usize, frac: f64) -> usize {
    ((n as f64 * frac).round() as usize).min(n)
}

/// Splits labeled records per land-use category: `test_frac` of each category
/// goes to test, and `val_frac_of_trainval` of the remainder to validation.
///
/// Records keep their input order inside each partition.
pub fn split_dataset(
    records: &[SceneRecord],
    seed: u64,
    test_frac: f64,
    val_frac_of_trainval: f64,
) -> Result<DatasetSplit> {
    if !(0.0..1.0).contains(&test_frac) || !(0.0..1.0).contains(&val_frac_of_trainval) {
        return Err(Error::Config(format!(
            "split fractions must lie in [0, 1), got test={test_frac} val={val_frac_of_trainval}"
        )));
    }
    let groups = by_category(records)?;
    if let Some(c) = groups.iter().position(|g| !g.is_empty() && g.len() < 3) {
        return Err(Error::TooFewSamples(Taxonomy::landuse_name(c).to_string()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // 0 = train, 1 = val, 2 = test
    let mut assignment = vec![0u8; records.len()];
    for mut group in groups {
        group.shuffle(&mut rng);
        let n_test = round_count(group.len(), test_frac);
        let n_val = round_count(group.len() - n_test, val_frac_of_trainval);
        for &i in &group[..n_test] {
            assignment[i] = 2;
        }
        for &i in &group[n_test..n_test + n_val] {
            assignment[i] = 1;
        }
    }

    let mut split = DatasetSplit { train: Vec::new(), val: Vec::new(), test: Vec::new(), seed };
    for (rec, part) in records.iter().zip(assignment) {
        match part {
            0 => split.train.push(rec.clone()),
            1 => split.val.push(rec.clone()),
            _ => split.test.push(rec.clone()),
        }
    }
    Ok(split)
}

/// Random minority oversampling.
///
/// Each category's records are copied `floor(factor)` times, and the
/// fractional part is realized by drawing `round(frac * n)` extra records of
/// that category without replacement. Categories missing from `factors` keep
/// factor 1. The result is shuffled with the same seeded generator.
pub fn rebalance(records: &[SceneRecord], factors: &BTreeMap<usize, f64>, seed: u64) -> Result<Vec<SceneRecord>> {
    for (&c, &f) in factors {
        if c >= Taxonomy::NUM_LANDUSES {
            return Err(Error::Config(format!("land-use index {c} out of range")));
        }
        if !(f >= 1.0) || !f.is_finite() {
            return Err(Error::BadFactor { category: Taxonomy::landuse_name(c).to_string(), factor: f });
        }
    }
    let groups = by_category(records)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = Vec::new();
    for (c, group) in groups.iter().enumerate() {
        let factor = factors.get(&c).copied().unwrap_or(1.0);
        let whole = factor.floor() as usize;
        for _ in 0..whole {
            picked.extend_from_slice(group);
        }
        let extra = round_count(group.len(), factor - whole as f64);
        picked.extend(group.choose_multiple(&mut rng, extra).copied());
    }
    picked.shuffle(&mut rng);
    Ok(picked.into_iter().map(|i| records[i].clone()).collect())
}
