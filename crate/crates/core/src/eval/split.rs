use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;

use super::dataset::{DatasetError, LabeledDataset, Split};
use crate::label::ClassLabel;
use crate::rng::keyed_rng;

/// Stratified, seeded train/test split over lineage groups.
///
/// Samples are grouped by their root ancestor so an augmented child always
/// lands in the same split as its parent. Within each class,
/// `round(test_frac · groups)` groups go to test.
pub fn stratified_split(ds: &LabeledDataset, test_frac: f64, seed: u64) -> Result<LabeledDataset, DatasetError> {
    if !(0.0..=1.0).contains(&test_frac) {
        return Err(DatasetError::InvalidFraction(test_frac));
    }
    if ds.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let roots = ds.lineage_roots();
    // class of a group = class of its root entry when present, else of its first member
    let mut groups: BTreeMap<ClassLabel, BTreeSet<String>> = BTreeMap::new();
    let mut seen = HashSet::new();
    for e in ds.entries() {
        let root = &roots[e.id.as_str()];
        if seen.insert(root.clone()) {
            let label = ds.get(root).map_or(e.label, |r| r.label);
            groups.entry(label).or_default().insert(root.clone());
        }
    }

    let mut test_roots = HashSet::new();
    for (label, members) in &groups {
        if members.len() < 2 {
            return Err(DatasetError::ClassTooSmall { label: *label, count: members.len() });
        }
        let mut order: Vec<&String> = members.iter().collect();
        order.shuffle(&mut keyed_rng(seed, label.name(), 0x5EED_5117));
        let n_test = (test_frac * members.len() as f64).round() as usize;
        test_roots.extend(order.into_iter().take(n_test).cloned());
    }

    let entries = ds
        .entries()
        .iter()
        .map(|e| {
            let mut e = e.clone();
            e.split = if test_roots.contains(&roots[e.id.as_str()]) { Split::Test } else { Split::Train };
            e
        })
        .collect();
    Ok(LabeledDataset::new(entries)?.with_provenance(ds.provenance.clone()))
}
