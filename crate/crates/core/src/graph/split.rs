use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numerics::RngState;

/// Disjoint train/validation/test node partitions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Checks disjointness, bounds and a non-empty training set.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::Split("empty training set".into()));
        }
        let mut seen = vec![false; n];
        for (part, idx) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &i in idx.iter() {
                if i >= n {
                    return Err(Error::Split(format!("{part} index {i} out of range for {n} nodes")));
                }
                if seen[i] {
                    return Err(Error::Split(format!("node {i} appears in more than one partition")));
                }
                seen[i] = true;
            }
        }
        Ok(())
    }

    /// Nodes outside the training set, ascending. These are the unlabeled
    /// nodes seen by the clustering objectives.
    pub fn unlabeled(&self, n: usize) -> Vec<usize> {
        let mut is_train = vec![false; n];
        for &i in &self.train {
            is_train[i] = true;
        }
        (0..n).filter(|&i| !is_train[i]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPolicy {
    /// Fixed labeled nodes per class, then fixed-size validation and test sets.
    PlanetoidStyle,
    /// Fixed train and validation counts per class; the rest is test.
    PerClass,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub policy: SplitPolicy,
    pub per_class_train: usize,
    pub per_class_val: usize,
    pub val_total: usize,
    pub test_total: usize,
}

impl SplitConfig {
    pub fn planetoid() -> Self {
        Self {
            policy: SplitPolicy::PlanetoidStyle,
            per_class_train: 20,
            per_class_val: 0,
            val_total: 500,
            test_total: 1000,
        }
    }

    pub fn per_class(train: usize, val: usize) -> Self {
        Self { policy: SplitPolicy::PerClass, per_class_train: train, per_class_val: val, val_total: 0, test_total: 0 }
    }
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self::planetoid()
    }
}

/// Random split over labeled nodes, sampled without replacement.
pub fn make_split(g: &Graph, cfg: &SplitConfig, rng: &mut RngState) -> Result<Split> {
    let k = g.class_count();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, l) in g.labels().iter().enumerate() {
        if let Some(c) = l {
            by_class[*c].push(i);
        }
    }
    let per_class_need = match cfg.policy {
        SplitPolicy::PlanetoidStyle => cfg.per_class_train,
        SplitPolicy::PerClass => cfg.per_class_train + cfg.per_class_val,
    };
    let deficient: Vec<String> = by_class
        .iter()
        .enumerate()
        .filter(|(_, nodes)| nodes.len() < per_class_need)
        .map(|(c, nodes)| format!("class {c} has {} < {per_class_need}", nodes.len()))
        .collect();
    if !deficient.is_empty() {
        return Err(Error::Split(deficient.join("; ")));
    }

    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut rest = Vec::new();
    for nodes in &mut by_class {
        rng.shuffle(nodes);
        train.extend_from_slice(&nodes[..cfg.per_class_train]);
        match cfg.policy {
            SplitPolicy::PlanetoidStyle => rest.extend_from_slice(&nodes[cfg.per_class_train..]),
            SplitPolicy::PerClass => {
                val.extend_from_slice(&nodes[cfg.per_class_train..per_class_need]);
                rest.extend_from_slice(&nodes[per_class_need..]);
            }
        }
    }
    rest.sort_unstable();

    let test = match cfg.policy {
        SplitPolicy::PlanetoidStyle => {
            let need = cfg.val_total + cfg.test_total;
            if rest.len() < need {
                return Err(Error::Split(format!(
                    "{} labeled nodes remain after training selection, need {need}",
                    rest.len()
                )));
            }
            rng.shuffle(&mut rest);
            val.extend_from_slice(&rest[..cfg.val_total]);
            rest[cfg.val_total..need].to_vec()
        }
        SplitPolicy::PerClass => rest,
    };
    let mut split = Split { train, val, test };
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    split.validate(g.node_count())?;
    Ok(split)
}
