//! Random Forest: trees grown to purity on bootstrap samples, Gini
//! impurity splits over a random feature subset per split, majority-vote
//! prediction. Absent sparse features read as value 0 throughout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TrainError;
use crate::corpus::{Label, NUM_LABELS};
use crate::features::SparseVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub enum DecisionNode<S: Scalar> {
    Leaf {
        label: Label,
        class_counts: [u32; NUM_LABELS],
    },
    Split {
        feature: u32,
        /// Values <= threshold route left.
        threshold: S,
        left: Box<DecisionNode<S>>,
        right: Box<DecisionNode<S>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate<S: Scalar> {
    pub feature: u32,
    pub threshold: S,
    /// Parent Gini impurity minus the weighted child impurity.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestParams {
    pub n_trees: usize,
    pub seed: u64,
    /// Candidate features per split; `None` means ceil(sqrt(V)).
    pub features_per_split: Option<usize>,
    /// Test hook: `false` grows every tree on the full training set.
    pub bootstrap: bool,
    pub min_samples_split: usize,
}

impl Default for RandomForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            seed: 0,
            features_per_split: None,
            bootstrap: true,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestModel<S: Scalar> {
    trees: Vec<DecisionNode<S>>,
    params: RandomForestParams,
    num_features: usize,
}

impl<S: Scalar> RandomForestModel<S> {
    pub fn trees(&self) -> &[DecisionNode<S>] {
        &self.trees
    }

    pub fn params(&self) -> &RandomForestParams {
        &self.params
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn from_parts(
        trees: Vec<DecisionNode<S>>,
        params: RandomForestParams,
        num_features: usize,
    ) -> Self {
        RandomForestModel {
            trees,
            params,
            num_features,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RfPrediction {
    pub label: Label,
    /// Tree votes per class; sums to the number of trees.
    pub votes: [u32; NUM_LABELS],
}

fn class_counts(
    rows: &[(SparseVector<impl Scalar>, Label)],
    indices: &[usize],
) -> [u32; NUM_LABELS] {
    let mut counts = [0u32; NUM_LABELS];
    for &i in indices {
        counts[rows[i].1.index()] += 1;
    }
    counts
}

/// Gini impurity simplex term for one side, scaled by its share:
/// (n_side / n) * (1 - sum_c (count_c / n_side)^2).
fn weighted_gini(left: &[u32; NUM_LABELS], right: &[u32; NUM_LABELS], total: f64) -> f64 {
    let side = |counts: &[u32; NUM_LABELS]| {
        let n: u32 = counts.iter().sum();
        if n == 0 {
            return 0.0;
        }
        let n_f = n as f64;
        let mut acc = 0.0;
        for &c in counts {
            let p = c as f64 / n_f;
            acc += p * p;
        }
        (n_f / total) * (1.0 - acc)
    };
    side(left) + side(right)
}

fn gini(counts: &[u32; NUM_LABELS]) -> f64 {
    let n: u32 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n_f = n as f64;
    let mut acc = 0.0;
    for &c in counts {
        let p = c as f64 / n_f;
        acc += p * p;
    }
    1.0 - acc
}

/// Finds the candidate-feature split minimizing weighted Gini impurity.
/// Thresholds sit at midpoints between consecutive distinct sorted
/// values. Returns `None` when no split reduces impurity. Ties go to the
/// lowest feature index, then the lowest threshold.
pub fn best_split<S: Scalar>(
    rows: &[(SparseVector<S>, Label)],
    candidate_features: &[u32],
) -> Option<SplitCandidate<S>> {
    let indices: Vec<usize> = (0..rows.len()).collect();
    best_split_at(rows, &indices, candidate_features)
}

fn best_split_at<S: Scalar>(
    rows: &[(SparseVector<S>, Label)],
    indices: &[usize],
    candidate_features: &[u32],
) -> Option<SplitCandidate<S>> {
    if indices.len() < 2 {
        return None;
    }
    let parent_counts = class_counts(rows, indices);
    let parent_gini = gini(&parent_counts);
    let total = indices.len() as f64;

    let mut best: Option<(f64, SplitCandidate<S>)> = None;
    let mut values: Vec<(S, Label)> = Vec::with_capacity(indices.len());
    for &feature in candidate_features {
        values.clear();
        values.extend(indices.iter().map(|&i| (rows[i].0.get(feature), rows[i].1)));
        values.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature values"));

        let mut left = [0u32; NUM_LABELS];
        let mut right = parent_counts;
        for pos in 0..values.len() - 1 {
            let (value, label) = values[pos];
            left[label.index()] += 1;
            right[label.index()] -= 1;
            let next_value = values[pos + 1].0;
            if value == next_value {
                continue;
            }
            let threshold = (value + next_value) / S::cast(2.0);
            let weighted = weighted_gini(&left, &right, total);
            if best.as_ref().is_none_or(|(w, _)| weighted < *w) {
                best = Some((
                    weighted,
                    SplitCandidate {
                        feature,
                        threshold,
                        gain: parent_gini - weighted,
                    },
                ));
            }
        }
    }
    best.map(|(_, candidate)| candidate)
        .filter(|candidate| candidate.gain > 0.0)
}

fn majority(counts: &[u32; NUM_LABELS]) -> Label {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate().skip(1) {
        if c > counts[best] {
            best = i;
        }
    }
    Label::from_index(best).expect("NUM_LABELS counts")
}

fn grow_tree<S: Scalar>(
    rows: &[(SparseVector<S>, Label)],
    indices: Vec<usize>,
    num_features: usize,
    features_per_split: usize,
    min_samples_split: usize,
    rng: &mut ChaCha8Rng,
) -> DecisionNode<S> {
    let counts = class_counts(rows, &indices);
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if pure || indices.len() < min_samples_split {
        return DecisionNode::Leaf {
            label: majority(&counts),
            class_counts: counts,
        };
    }

    let mut candidates: Vec<u32> =
        rand::seq::index::sample(rng, num_features, features_per_split.min(num_features))
            .into_iter()
            .map(|i| i as u32)
            .collect();
    candidates.sort_unstable();

    match best_split_at(rows, &indices, &candidates) {
        None => DecisionNode::Leaf {
            label: majority(&counts),
            class_counts: counts,
        },
        Some(split) => {
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                .into_iter()
                .partition(|&i| rows[i].0.get(split.feature) <= split.threshold);
            let left = grow_tree(
                rows,
                left_idx,
                num_features,
                features_per_split,
                min_samples_split,
                rng,
            );
            let right = grow_tree(
                rows,
                right_idx,
                num_features,
                features_per_split,
                min_samples_split,
                rng,
            );
            DecisionNode::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
    }
}

/// Trains `params.n_trees` trees, each on a bootstrap sample drawn from
/// its own deterministic substream of the seed, so the model is fully
/// reproducible from `(data, seed)`.
pub fn rf_train<S: Scalar>(
    examples: &[(SparseVector<S>, Label)],
    num_features: usize,
    params: RandomForestParams,
) -> Result<RandomForestModel<S>, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    if num_features == 0 {
        return Err(TrainError::NoFeatures);
    }
    let features_per_split = params
        .features_per_split
        .unwrap_or_else(|| (num_features as f64).sqrt().ceil() as usize)
        .max(1);

    let n = examples.len();
    let trees = (0..params.n_trees)
        .map(|tree_index| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(tree_index as u64);
            let indices: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(
                examples,
                indices,
                num_features,
                features_per_split,
                params.min_samples_split.max(2),
                &mut rng,
            )
        })
        .collect();

    Ok(RandomForestModel {
        trees,
        params,
        num_features,
    })
}

fn route<S: Scalar>(node: &DecisionNode<S>, x: &SparseVector<S>) -> Label {
    match node {
        DecisionNode::Leaf { label, .. } => *label,
        DecisionNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            if x.get(*feature) <= *threshold {
                route(left, x)
            } else {
                route(right, x)
            }
        }
    }
}

/// Majority vote over all trees; ties go to the lowest label index.
pub fn rf_predict<S: Scalar>(model: &RandomForestModel<S>, x: &SparseVector<S>) -> RfPrediction {
    let mut votes = [0u32; NUM_LABELS];
    for tree in &model.trees {
        votes[route(tree, x).index()] += 1;
    }
    RfPrediction {
        label: majority(&votes),
        votes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_of(entries: &[(u32, f64)]) -> SparseVector<f64> {
        SparseVector::from_parts(entries.to_vec())
    }

    fn leaf(label: Label) -> DecisionNode<f64> {
        let mut class_counts = [0u32; NUM_LABELS];
        class_counts[label.index()] = 1;
        DecisionNode::Leaf {
            label,
            class_counts,
        }
    }

    #[test]
    fn pure_node_has_no_split() {
        let rows = vec![
            (vec_of(&[(0, 1.0)]), Label::Bug),
            (vec_of(&[(0, 2.0)]), Label::Bug),
        ];
        assert_eq!(best_split(&rows, &[0]), None);
    }

    #[test]
    fn perfectly_separating_feature_wins_with_zero_child_gini() {
        let rows = vec![
            (vec_of(&[(0, 0.1), (1, 5.0)]), Label::Bug),
            (vec_of(&[(0, 0.2), (1, 5.0)]), Label::Bug),
            (vec_of(&[(0, 0.9)]), Label::Question),
            (vec_of(&[(0, 0.8)]), Label::Question),
        ];
        let split = best_split(&rows, &[0, 1]).unwrap();
        assert_eq!(split.feature, 0);
        // parent gini = 0.5; children pure, so the gain is the full 0.5
        assert!((split.gain - 0.5).abs() < 1e-12);
        assert!(split.threshold > 0.2 && split.threshold < 0.8);
    }

    /// Exhaustive oracle: every (feature, midpoint threshold) pair,
    /// children built by filtering rows from scratch.
    fn exhaustive_best(
        rows: &[(SparseVector<f64>, Label)],
        features: &[u32],
    ) -> Option<(u32, f64, f64)> {
        let mut parent = [0u32; NUM_LABELS];
        for (_, label) in rows {
            parent[label.index()] += 1;
        }
        let parent_gini = gini(&parent);
        let total = rows.len() as f64;
        let mut best: Option<(f64, (u32, f64, f64))> = None;
        for &feature in features {
            let mut values: Vec<f64> = rows.iter().map(|(x, _)| x.get(feature)).collect();
            values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            values.dedup();
            for pair in values.windows(2) {
                let threshold = (pair[0] + pair[1]) / 2.0;
                let mut left = [0u32; NUM_LABELS];
                let mut right = [0u32; NUM_LABELS];
                for (x, label) in rows {
                    if x.get(feature) <= threshold {
                        left[label.index()] += 1;
                    } else {
                        right[label.index()] += 1;
                    }
                }
                let weighted = weighted_gini(&left, &right, total);
                if best.as_ref().is_none_or(|(w, _)| weighted < *w) {
                    best = Some((weighted, (feature, threshold, parent_gini - weighted)));
                }
            }
        }
        best.map(|(_, b)| b).filter(|(_, _, gain)| *gain > 0.0)
    }

    #[test]
    fn best_split_matches_exhaustive_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n_rows = rng.random_range(2..=20);
            let n_features = rng.random_range(1..=5u32);
            let rows: Vec<(SparseVector<f64>, Label)> = (0..n_rows)
                .map(|_| {
                    let mut entries: Vec<(u32, f64)> = Vec::new();
                    for f in 0..n_features {
                        if rng.random_range(0..4) > 0 {
                            entries.push((f, f64::from(rng.random_range(0..8u8)) / 4.0));
                        }
                    }
                    let label = Label::from_index(rng.random_range(0..3)).unwrap();
                    (vec_of(&entries), label)
                })
                .collect();
            let features: Vec<u32> = (0..n_features).collect();
            let got = best_split(&rows, &features);
            let want = exhaustive_best(&rows, &features);
            match (got, want) {
                (None, None) => {}
                (Some(g), Some((feature, threshold, gain))) => {
                    assert_eq!(g.feature, feature);
                    assert!((g.threshold - threshold).abs() < 1e-12);
                    assert!((g.gain - gain).abs() < 1e-12);
                }
                (got, want) => panic!("mismatch: {got:?} vs {want:?}"),
            }
        }
    }

    #[test]
    fn single_unbagged_tree_shatters_consistent_data() {
        let rows: Vec<(SparseVector<f64>, Label)> = (0..30)
            .map(|i| {
                let class = i % 3;
                let x = vec_of(&[(0, class as f64), (1, (i % 7) as f64 / 7.0)]);
                (x, Label::from_index(class).unwrap())
            })
            .collect();
        let params = RandomForestParams {
            n_trees: 1,
            bootstrap: false,
            seed: 3,
            ..RandomForestParams::default()
        };
        let model = rf_train(&rows, 2, params).unwrap();
        let correct = rows
            .iter()
            .filter(|(x, label)| rf_predict(&model, x).label == *label)
            .count();
        assert_eq!(correct, rows.len());
    }

    #[test]
    fn same_seed_gives_identical_models() {
        let rows: Vec<(SparseVector<f64>, Label)> = (0..40)
            .map(|i| {
                let class = i % 4;
                (
                    vec_of(&[(0, (i % 5) as f64), (1, class as f64), (2, (i % 3) as f64)]),
                    Label::from_index(class).unwrap(),
                )
            })
            .collect();
        let params = RandomForestParams {
            n_trees: 7,
            seed: 99,
            ..RandomForestParams::default()
        };
        let a = rf_train(&rows, 3, params.clone()).unwrap();
        let b = rf_train(&rows, 3, params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unanimous_forest_reports_full_vote() {
        let model = RandomForestModel::from_parts(
            vec![leaf(Label::Enhancement); 5],
            RandomForestParams {
                n_trees: 5,
                ..RandomForestParams::default()
            },
            1,
        );
        let pred = rf_predict(&model, &vec_of(&[]));
        assert_eq!(pred.label, Label::Enhancement);
        assert_eq!(pred.votes[Label::Enhancement.index()], 5);
        assert_eq!(pred.votes.iter().sum::<u32>(), 5);
    }

    #[test]
    fn vote_ties_go_to_lowest_label_index() {
        // labels 2 (duplicate) and 5 (help wanted), one tree each
        let model = RandomForestModel::from_parts(
            vec![leaf(Label::Duplicate), leaf(Label::HelpWanted)],
            RandomForestParams {
                n_trees: 2,
                ..RandomForestParams::default()
            },
            1,
        );
        let pred = rf_predict(&model, &vec_of(&[]));
        assert_eq!(pred.label, Label::Duplicate);
    }

    #[test]
    fn three_stump_fixture_tallies_votes_by_route() {
        let stump = |feature: u32, threshold: f64, low: Label, high: Label| DecisionNode::Split {
            feature,
            threshold,
            left: Box::new(leaf(low)),
            right: Box::new(leaf(high)),
        };
        let model = RandomForestModel::from_parts(
            vec![
                stump(0, 0.5, Label::Bug, Label::Question),
                stump(1, 0.5, Label::Bug, Label::Wontfix),
                stump(0, 2.0, Label::Question, Label::Wontfix),
            ],
            RandomForestParams {
                n_trees: 3,
                ..RandomForestParams::default()
            },
            2,
        );
        // x = {0: 1.0, 1: 0.0}: tree1 right -> question; tree2 left -> bug;
        // tree3 left -> question
        let pred = rf_predict(&model, &vec_of(&[(0, 1.0)]));
        assert_eq!(pred.votes[Label::Question.index()], 2);
        assert_eq!(pred.votes[Label::Bug.index()], 1);
        assert_eq!(pred.label, Label::Question);
    }

    #[test]
    fn missing_features_route_as_zero() {
        let model = RandomForestModel::from_parts(
            vec![DecisionNode::Split {
                feature: 7,
                threshold: 0.5,
                left: Box::new(leaf(Label::Bug)),
                right: Box::new(leaf(Label::Question)),
            }],
            RandomForestParams {
                n_trees: 1,
                ..RandomForestParams::default()
            },
            8,
        );
        // feature 7 absent: reads 0 <= 0.5, so routes left
        assert_eq!(rf_predict(&model, &vec_of(&[(0, 9.0)])).label, Label::Bug);
    }

    #[test]
    fn train_rejects_empty_input() {
        assert!(matches!(
            rf_train::<f64>(&[], 3, RandomForestParams::default()),
            Err(TrainError::EmptyTrainingSet)
        ));
    }
}
