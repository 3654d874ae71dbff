//! Random-forest regression.
//!
//! Each tree is grown on a bootstrap sample with variance-reduction splits over
//! a random subset of features per node. A tree's randomness comes only from
//! its own SplitMix64 stream, seeded by `seed ^ fnv1a64("<context>|tree:<i>")`,
//! so forests are reproducible regardless of how trees are scheduled.

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::features::FEATURE_DIM;
use crate::par;
use crate::rng::SplitMix64;

pub const FOREST_FORMAT: &str = "phonograde-forest/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RfConfig {
    pub n_trees: usize,
    pub max_features_per_split: usize,
    pub min_leaf_size: usize,
    /// `None` grows until the leaf-size or purity limits stop it.
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for RfConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features_per_split: FEATURE_DIM.div_ceil(3),
            min_leaf_size: 5,
            max_depth: None,
            seed: 0,
        }
    }
}

impl RfConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be ≥ 1".into()));
        }
        if self.min_leaf_size == 0 {
            return Err(Error::InvalidConfig("min_leaf_size must be ≥ 1".into()));
        }
        if self.max_features_per_split == 0 || self.max_features_per_split > dim {
            return Err(Error::InvalidConfig(format!(
                "max_features_per_split must be in 1..={dim}, got {}",
                self.max_features_per_split
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value } => Some(*value),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub format: String,
    pub config: RfConfig,
    pub dim: usize,
    pub target_min: f64,
    pub target_max: f64,
    pub trees: Vec<Tree>,
}

impl Forest {
    /// Mean of tree outputs, clamped to the training-target range.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok((sum / self.trees.len() as f64).clamp(self.target_min, self.target_max))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: Forest = serde_json::from_str(s)?;
        if f.format != FOREST_FORMAT {
            return Err(Error::InvalidConfig(format!("unsupported forest format `{}`", f.format)));
        }
        Ok(f)
    }
}

pub fn predict_forest(forest: &Forest, x: &[f64]) -> Result<f64> {
    forest.predict(x)
}

/// Trains on a dataset after putting its instances in canonical
/// (speaker, recording, start) order, so the result does not depend on the
/// order instances were supplied in.
pub fn train_forest(data: &Dataset, config: &RfConfig) -> Result<Forest> {
    let mut order: Vec<usize> = (0..data.instances.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&data.instances[a].features, &data.instances[b].features);
        let (qa, qb) = (&pa.provenance, &pb.provenance);
        qa.speaker_id
            .cmp(&qb.speaker_id)
            .then(qa.recording_id.cmp(&qb.recording_id))
            .then(qa.start.total_cmp(&qb.start))
            .then(qa.dur.total_cmp(&qb.dur))
            .then_with(|| {
                pa.values
                    .iter()
                    .zip(&pb.values)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });
    let rows: Vec<&[f64]> = order
        .iter()
        .map(|&i| data.instances[i].features.values.as_slice())
        .collect();
    let targets: Vec<f64> = order.iter().map(|&i| data.instances[i].rating as f64).collect();
    train_forest_on(&rows, &targets, config, &data.seed_context())
}

/// Trains on rows in the given order. `context` selects the per-tree streams.
pub fn train_forest_on(rows: &[&[f64]], targets: &[f64], config: &RfConfig, context: &str) -> Result<Forest> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if rows.len() != targets.len() {
        return Err(Error::LengthMismatch(rows.len(), targets.len()));
    }
    let dim = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: r.len(),
        });
    }
    config.validate(dim)?;
    let columns: Vec<Vec<f64>> = (0..dim).map(|f| rows.iter().map(|r| r[f]).collect()).collect();
    let data = TrainData::new(columns, targets);
    let trees = par::map_range(config.n_trees, |i| {
        let mut rng = SplitMix64::for_context(config.seed, &format!("{context}|tree:{i}"));
        grow_tree(&data, config, &mut rng)
    });
    let target_min = targets.iter().copied().fold(f64::INFINITY, f64::min);
    let target_max = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Forest {
        format: FOREST_FORMAT.to_string(),
        config: config.clone(),
        dim,
        target_min,
        target_max,
        trees,
    })
}

struct TrainData<'a> {
    /// Column-major copy of the rows.
    columns: Vec<Vec<f64>>,
    /// Per feature, all row indices ordered by (value, index).
    order: Vec<Vec<u32>>,
    targets: &'a [f64],
    dim: usize,
}

impl<'a> TrainData<'a> {
    fn new(columns: Vec<Vec<f64>>, targets: &'a [f64]) -> Self {
        let order = columns
            .iter()
            .map(|col| {
                let mut v: Vec<u32> = (0..col.len() as u32).collect();
                v.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                v
            })
            .collect();
        Self {
            dim: columns.len(),
            columns,
            order,
            targets,
        }
    }
}

struct Builder<'a> {
    data: &'a TrainData<'a>,
    config: &'a RfConfig,
    rng: &'a mut SplitMix64,
    nodes: Vec<Node>,
    /// Bootstrap multiplicity of each training row.
    weights: Vec<u32>,
    /// Per feature, the drawn rows ordered by that feature. Every node owns the
    /// same index range in all of these.
    sorted: Vec<Vec<Entry>>,
    buf: Vec<Entry>,
    left: Vec<u8>,
}

/// A drawn row and its value of the feature the list is ordered by.
#[derive(Clone, Copy, Default)]
struct Entry {
    x: f64,
    row: u32,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    cost: f64,
}

fn grow_tree(data: &TrainData, config: &RfConfig, rng: &mut SplitMix64) -> Tree {
    let n = data.targets.len();
    let mut weights = vec![0u32; n];
    for _ in 0..n {
        weights[rng.below(n)] += 1;
    }
    let mut b = Builder::new(data, config, rng, weights);
    let len = b.sorted[0].len();
    b.build(0, len, 0);
    Tree { nodes: b.nodes }
}

impl<'a> Builder<'a> {
    fn new(data: &'a TrainData<'a>, config: &'a RfConfig, rng: &'a mut SplitMix64, weights: Vec<u32>) -> Self {
        let sorted: Vec<Vec<Entry>> = data
            .order
            .iter()
            .zip(&data.columns)
            .map(|(o, col)| {
                o.iter()
                    .filter(|&&i| weights[i as usize] > 0)
                    .map(|&i| Entry { x: col[i as usize], row: i })
                    .collect()
            })
            .collect();
        Self {
            data,
            config,
            rng,
            nodes: Vec::new(),
            weights,
            sorted,
            buf: Vec::new(),
            left: vec![0; data.targets.len()],
        }
    }

    fn build(&mut self, lo: usize, hi: usize, depth: usize) -> usize {
        let id = self.nodes.len();
        let targets = self.data.targets;
        let rows = &self.sorted[0][lo..hi];
        let (mut wsum, mut ysum) = (0.0, 0.0);
        for e in rows {
            let w = self.weights[e.row as usize] as f64;
            wsum += w;
            ysum += w * targets[e.row as usize];
        }
        let mean = ysum / wsum;
        let first = targets[rows[0].row as usize];
        let pure = rows.iter().all(|e| targets[e.row as usize] == first);
        self.nodes.push(Node::Leaf { value: mean });

        let min_leaf = self.config.min_leaf_size as f64;
        if pure || wsum < 2.0 * min_leaf || self.config.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let Some((best, sse)) = self.best_split(lo, hi, mean, wsum) else {
            return id;
        };
        if best.cost.is_nan() || best.cost >= sse {
            return id;
        }
        let mid = self.partition(lo, hi, best.feature, best.threshold);
        let left = self.build(lo, mid, depth + 1);
        let right = self.build(mid, hi, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    /// Best split over a fresh feature subset, with the node's SSE.
    fn best_split(&mut self, lo: usize, hi: usize, mean: f64, wsum: f64) -> Option<(BestSplit, f64)> {
        // centred sums over the node, shared by every candidate feature
        let (mut total, mut total_sq) = (0.0, 0.0);
        for e in &self.sorted[0][lo..hi] {
            let (w, d) = (self.weights[e.row as usize] as f64, self.data.targets[e.row as usize] - mean);
            total += w * d;
            total_sq += w * d * d;
        }
        let mut candidates = self
            .rng
            .sample_without_replacement(self.data.dim, self.config.max_features_per_split);
        candidates.sort_unstable();
        let min_leaf = self.config.min_leaf_size as f64;
        let targets = self.data.targets;
        let mut best: Option<BestSplit> = None;
        for &f in &candidates {
            let rows = &self.sorted[f][lo..hi];
            let last = rows.len() - 1;
            if rows[0].x == rows[last].x {
                continue;
            }
            let (mut n_l, mut sum_l, mut sq_l) = (0.0, 0.0, 0.0);
            for k in 0..last {
                let i = rows[k].row as usize;
                let (w, d) = (self.weights[i] as f64, targets[i] - mean);
                n_l += w;
                sum_l += w * d;
                sq_l += w * d * d;
                let n_r = wsum - n_l;
                if n_l < min_leaf {
                    continue;
                }
                if n_r < min_leaf {
                    break;
                }
                let (v, next) = (rows[k].x, rows[k + 1].x);
                if v == next {
                    continue;
                }
                let sum_r = total - sum_l;
                let sq_r = total_sq - sq_l;
                let cost = (sq_l - sum_l * sum_l / n_l) + (sq_r - sum_r * sum_r / n_r);
                if best.as_ref().is_none_or(|b| cost < b.cost) {
                    let mid = v + (next - v) / 2.0;
                    // adjacent floats: the midpoint may round onto `next`
                    let threshold = if mid < next { mid } else { v };
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        cost,
                    });
                }
            }
        }
        best.map(|b| (b, total_sq))
    }

    /// Stable partition of every feature's range; returns the split point.
    fn partition(&mut self, lo: usize, hi: usize, feature: usize, threshold: f64) -> usize {
        let column = &self.data.columns[feature];
        for e in &self.sorted[0][lo..hi] {
            self.left[e.row as usize] = u8::from(column[e.row as usize] <= threshold);
        }
        self.buf.resize(hi - lo, Entry::default());
        let mut mid = lo;
        for order in &mut self.sorted {
            let range = &mut order[lo..hi];
            let (mut k, mut r) = (0, 0);
            // branch-free: write to both sides, advance one cursor
            for j in 0..range.len() {
                let e = range[j];
                let l = self.left[e.row as usize] as usize;
                range[k] = e;
                self.buf[r] = e;
                k += l;
                r += 1 - l;
            }
            range[k..].copy_from_slice(&self.buf[..r]);
            mid = lo + k;
        }
        mid
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows_of(xs: &[Vec<f64>]) -> Vec<&[f64]> {
        xs.iter().map(Vec::as_slice).collect()
    }

    fn cfg(n_trees: usize, max_features: usize) -> RfConfig {
        RfConfig {
            n_trees,
            max_features_per_split: max_features,
            seed: 17,
            ..RfConfig::default()
        }
    }

    #[test]
    fn constant_targets_give_constant_predictions() {
        let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i * 7 % 13) as f64]).collect();
        let y = vec![4.0; 40];
        let f = train_forest_on(&rows_of(&xs), &y, &cfg(10, 2), "t").unwrap();
        for x in &xs {
            assert_eq!(f.predict(x).unwrap(), 4.0);
        }
        assert!(f.trees.iter().all(|t| t.nodes.len() == 1));
    }

    #[test]
    fn single_instance_is_a_constant_predictor() {
        let xs = vec![vec![1.0, 2.0, 3.0]];
        let f = train_forest_on(&rows_of(&xs), &[6.0], &cfg(5, 3), "t").unwrap();
        assert_eq!(f.predict(&[9.0, -1.0, 0.0]).unwrap(), 6.0);
    }

    #[test]
    fn leaf_mean_and_tree_averaging() {
        let tree = |v: f64| Tree {
            nodes: vec![Node::Leaf { value: v }],
        };
        let mut f = Forest {
            format: FOREST_FORMAT.into(),
            config: cfg(1, 1),
            dim: 1,
            target_min: 1.0,
            target_max: 7.0,
            trees: vec![tree(3.0)],
        };
        assert_eq!(f.predict(&[0.0]).unwrap(), 3.0);
        f.trees = vec![tree(2.0), tree(5.0)];
        assert_eq!(f.predict(&[0.0]).unwrap(), 3.5);
        assert!(matches!(f.predict(&[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn leaf_holding_two_targets_predicts_their_mean() {
        // min_leaf 2 with four points: the only useful split isolates {2,4} from {6,6}
        let xs: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]];
        let y = [2.0, 4.0, 6.0, 6.0];
        let c = RfConfig {
            n_trees: 1,
            max_features_per_split: 1,
            min_leaf_size: 2,
            max_depth: Some(1),
            seed: 0,
        };
        let data = TrainData::new(vec![vec![0.0, 1.0, 10.0, 11.0]], &y);
        // identity bootstrap isolates the split logic from resampling
        let mut rng = SplitMix64::new(0);
        let mut b = Builder::new(&data, &c, &mut rng, vec![1; 4]);
        b.build(0, 4, 0);
        let t = Tree { nodes: b.nodes };
        assert_eq!(t.predict(&xs[0]), 3.0);
        assert_eq!(t.predict(&xs[3]), 6.0);
        assert!(matches!(t.nodes[0], Node::Split { threshold, .. } if threshold == 5.5));
    }

    #[test]
    fn training_is_deterministic() {
        let mut r = SplitMix64::new(5);
        let xs: Vec<Vec<f64>> = (0..200).map(|_| (0..8).map(|_| r.normal()).collect()).collect();
        let y: Vec<f64> = xs.iter().map(|x| x[0] * 2.0 + x[3]).collect();
        let a = train_forest_on(&rows_of(&xs), &y, &cfg(20, 3), "ctx").unwrap();
        let b = train_forest_on(&rows_of(&xs), &y, &cfg(20, 3), "ctx").unwrap();
        assert_eq!(a, b);
        let c = train_forest_on(&rows_of(&xs), &y, &cfg(20, 3), "other").unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_inputs() {
        let xs = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(matches!(
            train_forest_on(&rows_of(&xs), &[1.0, 2.0], &cfg(1, 1), "t"),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            train_forest_on(&[], &[], &cfg(1, 1), "t"),
            Err(Error::EmptyDataset)
        ));
        let xs = vec![vec![1.0, 2.0]];
        assert!(train_forest_on(&rows_of(&xs), &[1.0], &cfg(1, 3), "t").is_err());
        assert!(train_forest_on(&rows_of(&xs), &[1.0], &cfg(0, 1), "t").is_err());
    }

    #[test]
    fn json_round_trip() {
        let xs: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i % 4) as f64]).collect();
        let y: Vec<f64> = (0..30).map(|i| (i % 7) as f64).collect();
        let f = train_forest_on(&rows_of(&xs), &y, &cfg(3, 1), "t").unwrap();
        let g = Forest::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn default_config_matches_conventions() {
        let c = RfConfig::default();
        assert_eq!(c.n_trees, 100);
        assert_eq!(c.max_features_per_split, 22);
        assert_eq!(c.min_leaf_size, 5);
        assert_eq!(c.max_depth, None);
    }
}
