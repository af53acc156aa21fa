//! Cross-validation, metrics, experiment sweeps, and the confidence-gated
//! sorting rule.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_feature_matrix, FeatureConfig};
use crate::models::{
    predict_classes, predict_values, train_classifier, train_regressor, ModelParams, ModelSpec,
    TrainConfig,
};
use crate::sim::{derive_seed, rerender_sample, Dataset};

/// Unit the cross-validation split operates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// Hold out whole poses; samples of one pose never straddle the split.
    ByPose,
     BySample,
}

/// One train/validation split over sample indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// A deterministic k-fold plan whose validation sets partition the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    pub grouping: Grouping,
}

impl FoldPlan {
    pub fn n_folds(&self) -> usize {
        self.folds.len()
    }
}

/// Splits samples into `n_folds` folds. With pose grouping the distinct pose
/// ids are shuffled and partitioned, so each fold of a 20-pose protocol
/// validates on exactly 4 poses and trains on 16.
pub fn make_folds(
    pose_ids: &[u32],
    n_folds: usize,
    grouping: Grouping,
    seed: u64,
) -> Result<FoldPlan> {
    if n_folds < 2 {
        return Err(Error::InvalidParameter("need at least 2 folds".into()));
    }
    let group_keys: Vec<u64> = match grouping {
        Grouping::ByPose => {
            let mut poses: Vec<u32> = pose_ids.to_vec();
            poses.sort_unstable();
            poses.dedup();
            poses.into_iter().map(u64::from).collect()
        }
        Grouping::BySample => (0..pose_ids.len() as u64).collect(),
    };
    if group_keys.len() < n_folds {
        return Err(Error::InvalidParameter(format!(
            "{} groups cannot fill {n_folds} folds",
            group_keys.len()
        )));
    }

    let mut order: Vec<usize> = (0..group_keys.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }

    // Contiguous chunks of the shuffled groups; remainders spread one each.
    let base = group_keys.len() / n_folds;
    let extra = group_keys.len() % n_folds;
    let mut fold_groups: Vec<Vec<u64>> = Vec::with_capacity(n_folds);
    let mut cursor = 0;
    for f in 0..n_folds {
        let size = base + usize::from(f < extra);
        fold_groups.push(
            order[cursor..cursor + size]
                .iter()
                .map(|&i| group_keys[i])
                .collect(),
        );
        cursor += size;
    }

    let folds = fold_groups
        .iter()
        .map(|val_groups| {
            let is_val = |i: usize| match grouping {
                Grouping::ByPose => val_groups.contains(&u64::from(pose_ids[i])),
                Grouping::BySample => val_groups.contains(&(i as u64)),
            };
            let mut train = Vec::new();
            let mut val = Vec::new();
            for i in 0..pose_ids.len() {
                if is_val(i) {
                    val.push(i);
                } else {
                    train.push(i);
                }
            }
            Fold { train, val }
        })
        .collect();
    Ok(FoldPlan { folds, grouping })
}

/// Root mean square error.
pub fn rmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "rmse over {} predictions vs {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    Ok((predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / predictions.len() as f64)
        .sqrt())
}

/// Confusion counts (rows = true class, columns = predicted) plus accuracy.
pub fn confusion_and_accuracy(
    predictions: &[usize],
    labels: &[usize],
    n_classes: usize,
) -> Result<(Vec<Vec<usize>>, f64)> {
    if predictions.len() != labels.len() || predictions.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &t) in predictions.iter().zip(labels) {
        if p >= n_classes || t >= n_classes {
            return Err(Error::Label(format!(
                "class index out of range: prediction {p}, label {t}, n_classes {n_classes}"
            )));
        }
        confusion[t][p] += 1;
    }
    let correct: usize = (0..n_classes).map(|i| confusion[i][i]).sum();
    Ok((confusion, correct as f64 / labels.len() as f64))
}

/// Per-fold values with their mean and population variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_fold: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
}

impl Metrics {
    pub fn from_folds(per_fold: Vec<f64>) -> Self {
        let n = per_fold.len().max(1) as f64;
        let mean = per_fold.iter().sum::<f64>() / n;
        let variance = per_fold.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            per_fold,
            mean,
            variance,
        }
    }
}

/// Outcome of the confidence-gated sorting rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortingDecision {
    Class(usize),
    Abstain,
}

/// Returns the argmax class when its probability clears the threshold,
/// otherwise abstains.
pub fn sorting_decision(probabilities: &[f64], threshold: f64) -> Result<SortingDecision> {
    if probabilities.is_empty() {
        return Err(Error::InvalidParameter("empty probability vector".into()));
    }
    if probabilities.iter().any(|&p| !(0.0..=1.0 + 1e-9).contains(&p)) {
        return Err(Error::InvalidParameter(
            "probabilities must lie in [0, 1]".into(),
        ));
    }
    let sum: f64 = probabilities.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!(
            "probabilities sum to {sum}, expected 1"
        )));
    }
    // Exact ties resolve to the smallest class index.
    let mut argmax = 0;
    let mut max = probabilities[0];
    for (i, &p) in probabilities.iter().enumerate().skip(1) {
        if p > max {
            argmax = i;
            max = p;
        }
    }
    if max >= threshold {
        Ok(SortingDecision::Class(argmax))
    } else {
        Ok(SortingDecision::Abstain)
    }
}

/// Per-fold classification results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationCv {
    pub accuracy: Metrics,
    /// Confusion counts summed over folds (every sample validated once).
    pub confusion: Vec<Vec<usize>>,
    /// Pooled validation predictions, indexed like the dataset.
    pub predictions: Vec<Option<usize>>,
}

/// Trains and validates a classifier on every fold. Folds run in parallel;
/// per-fold seeds derive from the base seed and fold index, so results do not
/// depend on scheduling.
pub fn run_classification_cv(
    features: &Array2<f64>,
    classes: &[usize],
    n_classes: usize,
    plan: &FoldPlan,
    spec: &ModelSpec,
    config: &TrainConfig,
) -> Result<ClassificationCv> {
    let fold_outputs: Vec<(f64, Vec<Vec<usize>>, Vec<(usize, usize)>)> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(fold_index, fold)| {
            let train_x = features.select(Axis(0), &fold.train);
            let train_y: Vec<usize> = fold.train.iter().map(|&i| classes[i]).collect();
            let val_x = features.select(Axis(0), &fold.val);
            let val_y: Vec<usize> = fold.val.iter().map(|&i| classes[i]).collect();
            let fold_config = TrainConfig {
                seed: derive_seed(&[config.seed, fold_index as u64]),
                ..*config
            }
            .fitted_to(train_x.nrows());
            let params = train_classifier(&train_x, &train_y, spec, &fold_config)?;
            let predictions = predict_classes(&params, &val_x)?;
            let (confusion, accuracy) = confusion_and_accuracy(&predictions, &val_y, n_classes)?;
            let tagged: Vec<(usize, usize)> = fold
                .val
                .iter()
                .zip(&predictions)
                .map(|(&i, &p)| (i, p))
                .collect();
            Ok((accuracy, confusion, tagged))
        })
        .collect::<Result<_>>()?;

    let accuracy = Metrics::from_folds(fold_outputs.iter().map(|f| f.0).collect());
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    let mut predictions = vec![None; classes.len()];
    for (_, fold_confusion, tagged) in &fold_outputs {
        for (row, fold_row) in confusion.iter_mut().zip(fold_confusion) {
            for (slot, add) in row.iter_mut().zip(fold_row) {
                *slot += add;
            }
        }
        for &(i, p) in tagged {
            predictions[i] = Some(p);
        }
    }
    Ok(ClassificationCv {
        accuracy,
        confusion,
        predictions,
    })
}

/// Per-fold regression results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionCv {
    pub rmse: Metrics,
    pub predictions: Vec<Option<f64>>,
}

pub fn run_regression_cv(
    features: &Array2<f64>,
    targets: &[f64],
    plan: &FoldPlan,
    spec: &ModelSpec,
    config: &TrainConfig,
) -> Result<RegressionCv> {
    let fold_outputs: Vec<(f64, Vec<(usize, f64)>)> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(fold_index, fold)| {
            let train_x = features.select(Axis(0), &fold.train);
            let train_y: Vec<f64> = fold.train.iter().map(|&i| targets[i]).collect();
            let val_x = features.select(Axis(0), &fold.val);
            let val_y: Vec<f64> = fold.val.iter().map(|&i| targets[i]).collect();
            let fold_config = TrainConfig {
                seed: derive_seed(&[config.seed, fold_index as u64]),
                ..*config
            }
            .fitted_to(train_x.nrows());
            let params = train_regressor(&train_x, &train_y, spec, &fold_config)?;
            let predictions = predict_values(&params, &val_x)?;
            let fold_rmse = rmse(&predictions, &val_y)?;
            let tagged = fold
                .val
                .iter()
                .zip(&predictions)
                .map(|(&i, &p)| (i, p))
                .collect();
            Ok((fold_rmse, tagged))
        })
        .collect::<Result<_>>()?;

    let rmse_metrics = Metrics::from_folds(fold_outputs.iter().map(|f| f.0).collect());
    let mut predictions = vec![None; targets.len()];
    for (_, tagged) in &fold_outputs {
        for &(i, p) in tagged {
            predictions[i] = Some(p);
        }
    }
    Ok(RegressionCv {
        rmse: rmse_metrics,
        predictions,
    })
}

/// One point of the training-pose-count sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseCountPoint {
    pub pose_count: usize,
    pub accuracy: Metrics,
}

/// Retrains with a shrinking number of unique training poses per object and
/// reports validation accuracy per count. Validation folds stay fixed; only
/// the training poses are subsampled (deterministically per seed).
pub fn pose_count_sweep(
    features: &Array2<f64>,
    classes: &[usize],
    pose_ids: &[u32],
    n_classes: usize,
    plan: &FoldPlan,
    pose_counts: &[usize],
    spec: &ModelSpec,
    config: &TrainConfig,
) -> Result<Vec<PoseCountPoint>> {
    let max_train_poses = plan
        .folds
        .iter()
        .map(|fold| {
            let mut poses: Vec<u32> = fold.train.iter().map(|&i| pose_ids[i]).collect();
            poses.sort_unstable();
            poses.dedup();
            poses.len()
        })
        .min()
        .unwrap_or(0);
    if let Some(&too_many) = pose_counts.iter().find(|&&c| c == 0 || c > max_train_poses) {
        return Err(Error::InvalidParameter(format!(
            "pose count {too_many} outside [1, {max_train_poses}] available training poses"
        )));
    }

    pose_counts
        .iter()
        .map(|&count| {
            let restricted: Vec<Fold> = plan
                .folds
                .iter()
                .enumerate()
                .map(|(fold_index, fold)| {
                    let mut poses: Vec<u32> =
                        fold.train.iter().map(|&i| pose_ids[i]).collect();
                    poses.sort_unstable();
                    poses.dedup();
                    // Deterministic pose selection per (seed, fold).
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
                        config.seed,
                        0x5357_4545_50,
                        fold_index as u64,
                    ]));
                    for i in (1..poses.len()).rev() {
                        let j = rng.gen_range(0..=i);
                        poses.swap(i, j);
                    }
                    let kept: Vec<u32> = poses.into_iter().take(count).collect();
                    Fold {
                        train: fold
                            .train
                            .iter()
                            .copied()
                            .filter(|&i| kept.contains(&pose_ids[i]))
                            .collect(),
                        val: fold.val.clone(),
                    }
                })
                .collect();
            let restricted_plan = FoldPlan {
                folds: restricted,
                grouping: plan.grouping,
            };
            let cv = run_classification_cv(
                features,
                classes,
                n_classes,
                &restricted_plan,
                spec,
                config,
            )?;
            Ok(PoseCountPoint {
                pose_count: count,
                accuracy: cv.accuracy,
            })
        })
        .collect()
}

/// One point of the external-noise robustness sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoisePoint {
    pub noise_level_dba: f64,
    pub rmse: f64,
}

/// Re-renders the validation recordings at elevated noise levels (same seeds,
/// evaluation only) and reports the trained regressor's RMSE per level. At
/// the training ambient level the re-rendered audio is bit-identical, so the
/// RMSE equals the baseline exactly.
pub fn noise_robustness_sweep(
    model: &ModelParams,
    dataset: &Dataset,
    feature_config: &FeatureConfig,
    val_indices: &[usize],
    targets: &[f64],
    noise_levels: &[f64],
) -> Result<Vec<NoisePoint>> {
    if val_indices.is_empty() {
        return Err(Error::InvalidParameter("empty validation set".into()));
    }
    // Position of each sample within its (object, pose) run, for seed replay.
    let mut sample_in_pose = vec![0u32; dataset.len()];
    for i in 1..dataset.len() {
        let (prev, cur) = (&dataset.labels[i - 1], &dataset.labels[i]);
        if prev.object_class == cur.object_class
            && prev.pose_id == cur.pose_id
            && prev.theta_deg == cur.theta_deg
        {
            sample_in_pose[i] = sample_in_pose[i - 1] + 1;
        }
    }

    let val_targets: Vec<f64> = val_indices.iter().map(|&i| targets[i]).collect();
    noise_levels
        .iter()
        .map(|&level| {
            let recordings: Vec<Vec<f32>> = val_indices
                .par_iter()
                .map(|&i| {
                    rerender_sample(
                        &dataset.manifest.scenario,
                        &dataset.manifest.config,
                        dataset.manifest.seed,
                        &dataset.labels[i],
                        sample_in_pose[i],
                        level,
                    )
                })
                .collect::<Result<_>>()?;
            let features = extract_feature_matrix(
                &recordings,
                dataset.manifest.sample_rate,
                feature_config,
            )?;
            let predictions = predict_values(model, &features)?;
            Ok(NoisePoint {
                noise_level_dba: level,
                rmse: rmse(&predictions, &val_targets)?,
            })
        })
        .collect()
}

/// Serialized per-experiment results (results.json).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub config_hash: String,
    pub scenario: String,
    pub task: String,
    pub model: String,
    pub seed: u64,
    pub n_folds: usize,
    pub accuracy: Option<Metrics>,
    pub rmse: Option<Metrics>,
    pub confusion: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pose_count_sweep: Vec<PoseCountPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub noise_sweep: Vec<NoisePoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub latent_dim_sweep: Vec<LatentDimPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_out_rmse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_matrix: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_knn_accuracy: Option<Metrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_knn_accuracy: Option<Metrics>,
}

/// One point of the latent-dimension sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatentDimPoint {
    pub latent_dim: usize,
    pub knn_accuracy: Metrics,
}

impl ExperimentResults {
    pub fn new(config_hash: &str, scenario: &str, task: &str, model: &str, seed: u64) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            scenario: scenario.to_string(),
            task: task.to_string(),
            model: model.to_string(),
            seed,
            n_folds: 0,
            accuracy: None,
            rmse: None,
            confusion: None,
            pose_count_sweep: Vec::new(),
            noise_sweep: Vec::new(),
            latent_dim_sweep: Vec::new(),
            held_out_rmse: None,
            distance_matrix: None,
            embedding_knn_accuracy: None,
            raw_knn_accuracy: None,
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let json = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&json)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pose_layout(n_objects: usize, n_poses: u32, samples_per_pose: u32) -> Vec<u32> {
        let mut out = Vec::new();
        for _ in 0..n_objects {
            for pose in 0..n_poses {
                for _ in 0..samples_per_pose {
                    out.push(pose);
                }
            }
        }
        out
    }

    #[test]
    fn twenty_poses_five_folds_validate_on_exactly_four_poses() {
        let pose_ids = pose_layout(16, 20, 2);
        let plan = make_folds(&pose_ids, 5, Grouping::ByPose, 3).unwrap();
        assert_eq!(plan.n_folds(), 5);
        for fold in &plan.folds {
            let mut val_poses: Vec<u32> = fold.val.iter().map(|&i| pose_ids[i]).collect();
            val_poses.sort_unstable();
            val_poses.dedup();
            assert_eq!(val_poses.len(), 4);
            let mut train_poses: Vec<u32> = fold.train.iter().map(|&i| pose_ids[i]).collect();
            train_poses.sort_unstable();
            train_poses.dedup();
            assert_eq!(train_poses.len(), 16);
            // No pose appears on both sides.
            assert!(val_poses.iter().all(|p| !train_poses.contains(p)));
        }
    }

    #[test]
    fn validation_sets_partition_the_dataset() {
        let pose_ids = pose_layout(4, 10, 2);
        let plan = make_folds(&pose_ids, 5, Grouping::ByPose, 9).unwrap();
        let mut seen = vec![false; pose_ids.len()];
        for fold in &plan.folds {
            for &i in &fold.val {
                assert!(!seen[i], "sample {i} validated twice");
                seen[i] = true;
            }
            for &i in &fold.train {
                assert!(!fold.val.contains(&i));
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn folds_are_seed_deterministic() {
        let pose_ids = pose_layout(2, 20, 2);
        let a = make_folds(&pose_ids, 5, Grouping::ByPose, 42).unwrap();
        let b = make_folds(&pose_ids, 5, Grouping::ByPose, 42).unwrap();
        assert_eq!(a, b);
        let c = make_folds(&pose_ids, 5, Grouping::ByPose, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn fewer_groups_than_folds_is_an_error() {
        let pose_ids = pose_layout(1, 3, 2);
        assert!(make_folds(&pose_ids, 5, Grouping::ByPose, 0).is_err());
    }

    #[test]
    fn rmse_trivial_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, 1.0], &[0.0, 2.0]).unwrap(), 1.0);
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn mean_predictor_rmse_on_the_16_cube_grid() {
        // Population std of the 16-point grid 10..30 mm, computed exactly
        // from the label list; the skill baseline for size regression.
        let grid = crate::sim::Scenario::size_grid_mm();
        let mean = grid.iter().sum::<f64>() / grid.len() as f64;
        let predictions = vec![mean; grid.len()];
        let value = rmse(&predictions, &grid).unwrap();
        let expected = (grid
            .iter()
            .map(|s| (s - mean) * (s - mean))
            .sum::<f64>()
            / grid.len() as f64)
            .sqrt();
        assert!((value - expected).abs() < 1e-12);
        // Frozen from the independent computation above: d * sqrt((16^2-1)/12)
        // with d = 20/15 mm.
        assert!((value - 6.146362).abs() < 1e-5, "got {value}");
    }

    #[test]
    fn confusion_trivial_cases() {
        let (confusion, accuracy) =
            confusion_and_accuracy(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(accuracy, 1.0);
        for (i, row) in confusion.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, usize::from(i == j));
            }
        }
        // All predicted class 0: accuracy equals class-0 prevalence.
        let labels = [0, 0, 1, 2, 0, 1];
        let predictions = [0; 6];
        let (confusion, accuracy) = confusion_and_accuracy(&predictions, &labels, 3).unwrap();
        assert!((accuracy - 0.5).abs() < 1e-12);
        // Row sums are per-class label counts.
        assert_eq!(confusion[0].iter().sum::<usize>(), 3);
        assert_eq!(confusion[1].iter().sum::<usize>(), 2);
        assert_eq!(confusion[2].iter().sum::<usize>(), 1);
    }

    #[test]
    fn random_uniform_predictions_score_near_chance() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 4000;
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..16)).collect();
        let predictions: Vec<usize> = (0..n).map(|_| rng.gen_range(0..16)).collect();
        let (_, accuracy) = confusion_and_accuracy(&predictions, &labels, 16).unwrap();
        let p = 1.0 / 16.0;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (accuracy - p).abs() <= 3.0 * sigma,
            "accuracy {accuracy} vs binomial bound around {p}"
        );
    }

    #[test]
    fn sorting_decision_cases() {
        let mut probs = vec![0.0f64; 16];
        probs[3] = 0.95;
        probs[0] = 0.05;
        assert_eq!(
            sorting_decision(&probs, 0.6).unwrap(),
            SortingDecision::Class(3)
        );
        // The demonstrated abstention: two classes near 0.45.
        let mut tie = vec![0.0f64; 16];
        tie[2] = 0.45;
        tie[9] = 0.45;
        tie[1] = 0.10;
        assert_eq!(sorting_decision(&tie, 0.6).unwrap(), SortingDecision::Abstain);
        assert_eq!(
            sorting_decision(&tie, 0.0).unwrap(),
            SortingDecision::Class(2)
        );
        assert!(sorting_decision(&[0.5, 0.2], 0.6).is_err());
    }

    #[test]
    fn metrics_mean_is_exact() {
        let m = Metrics::from_folds(vec![0.5, 0.7, 0.9]);
        assert!((m.mean - 0.7).abs() < 1e-15);
        let expected_var = ((0.04f64) + 0.0 + 0.04) / 3.0;
        assert!((m.variance - expected_var).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn fold_partition_laws_hold_on_random_layouts(
            seed in 0u64..1000,
            n_objects in 1usize..4,
            n_poses in 5u32..25,
            samples_per_pose in 1u32..3,
            n_folds in 2usize..6,
        ) {
            let pose_ids = pose_layout(n_objects, n_poses, samples_per_pose);
            prop_assume!(n_poses as usize >= n_folds);
            let plan = make_folds(&pose_ids, n_folds, Grouping::ByPose, seed).unwrap();
            let mut seen = vec![false; pose_ids.len()];
            for fold in &plan.folds {
                for &i in &fold.val {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                }
                // No pose straddles the split.
                let val_poses: std::collections::BTreeSet<u32> =
                    fold.val.iter().map(|&i| pose_ids[i]).collect();
                for &i in &fold.train {
                    prop_assert!(!val_poses.contains(&pose_ids[i]));
                }
            }
            prop_assert!(seen.iter().all(|&s| s));
        }

        #[test]
        fn sorting_decision_is_permutation_equivariant(
            seed in 0u64..500,
            threshold in 0.0f64..1.0,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let raw: Vec<f64> = (0..8).map(|_| rng.gen_range(0.01..1.0)).collect();
            let sum: f64 = raw.iter().sum();
            let probs: Vec<f64> = raw.iter().map(|v| v / sum).collect();

            let mut perm: Vec<usize> = (0..8).collect();
            for i in (1..8).rev() {
                let j = rng.gen_range(0..=i);
                perm.swap(i, j);
            }
            let permuted: Vec<f64> = perm.iter().map(|&i| probs[i]).collect();

            let base = sorting_decision(&probs, threshold).unwrap();
            let moved = sorting_decision(&permuted, threshold).unwrap();
            match (base, moved) {
                (SortingDecision::Abstain, SortingDecision::Abstain) => {}
                (SortingDecision::Class(c), SortingDecision::Class(m)) => {
                    // Unique argmax maps through the permutation.
                    let ties = probs.iter().filter(|&&p| p == probs[c]).count();
                    if ties == 1 {
                        prop_assert_eq!(perm[m], c);
                    }
                }
                other => prop_assert!(false, "mismatched decisions {:?}", other),
            }
        }
    }
}
