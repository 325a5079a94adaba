//! Stratified train/validation/test assignment.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::rng::SeedTree;

pub const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

/// Assigns each item to one of three splits. Items are grouped by `key`
/// (shuffled within each group) and the groups laid end to end; walking that
/// order, each item goes to the split furthest below its running quota.
/// Every prefix, and so every group, is apportioned close to `ratios`, and
/// the final split sizes are within one item of `ratios * n`.
pub fn stratified_split<K: Ord + Clone>(keys: &[K], ratios: [f64; 3], seed: SeedTree) -> Vec<usize> {
    let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        groups.entry(k.clone()).or_default().push(i);
    }
    let mut order = Vec::with_capacity(keys.len());
    for (g, mut members) in groups.into_values().enumerate() {
        members.shuffle(&mut seed.index(g as u64).rng());
        order.extend(members);
    }
    let mut counts = [0usize; 3];
    let mut out = vec![0usize; keys.len()];
    for (pos, &item) in order.iter().enumerate() {
        let filled = (pos + 1) as f64;
        let split = (0..3)
            .max_by(|&a, &b| {
                let da = filled * ratios[a] - counts[a] as f64;
                let db = filled * ratios[b] - counts[b] as f64;
                // Ties go to the earlier split.
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .unwrap();
        counts[split] += 1;
        out[item] = split;
    }
    out
}
