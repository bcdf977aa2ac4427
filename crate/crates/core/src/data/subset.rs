use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Class-balanced training subset of `size` samples. Under one seed the
/// subsets for increasing sizes are nested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetSpec {
    pub size: usize,
    pub seed: u64,
}

/// Keeps `size / classes` samples per class. Each class's candidates are
/// ranked by a permutation that depends only on `(seed, class)`, and the
/// first ones are kept, so larger subsets extend smaller ones. The result
/// preserves the dataset's original order.
pub fn stratified_subset(dataset: &Dataset, spec: SubsetSpec) -> Result<Dataset> {
    let classes = dataset.classes;
    if classes == 0 || !spec.size.is_multiple_of(classes) {
        return Err(Error::invalid(format!(
            "subset size {} is not a multiple of {classes} classes",
            spec.size
        )));
    }
    if spec.size > dataset.len() {
        return Err(Error::invalid(format!(
            "subset size {} exceeds dataset size {}",
            spec.size,
            dataset.len()
        )));
    }
    let per_class = spec.size / classes;
    let mut chosen = Vec::with_capacity(spec.size);
    for c in 0..classes {
        let members: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.labels[i] == c).collect();
        if members.len() < per_class {
            return Err(Error::invalid(format!(
                "class {c} has {} samples, {per_class} needed",
                members.len()
            )));
        }
        let mut rng = Rng::derive(spec.seed, c as u64);
        let order = rng.permutation(members.len());
        chosen.extend(order[..per_class].iter().map(|&o| members[o]));
    }
    chosen.sort_unstable();
    Ok(dataset.select(&chosen))
}
