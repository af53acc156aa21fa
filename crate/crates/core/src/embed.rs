//! Self-supervised contrastive embeddings: pull recordings of the same
//! object across poses together, push different objects beyond a margin.
//! Requires pose grouping but no semantic labels.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{
    forward_batch, knn_predict_batch, CnnSpec, Gradients, Head, KnnMetric, ModelParams,
    ModelSpec, TrainConfig,
};
use crate::sim::ShapeCategory;

/// Contrastive training configuration. The encoder must end in a
/// `latent_dim`-output regression head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveConfig {
    pub latent_dim: usize,
    pub margin: f64,
    pub pairs_per_epoch: usize,
    pub encoder: ModelSpec,
}

impl ContrastiveConfig {
    /// CNN-trunk encoder with a linear latent head.
    pub fn new(latent_dim: usize) -> Self {
        Self {
            latent_dim,
            margin: 1.0,
            pairs_per_epoch: 512,
            encoder: ModelSpec::Cnn(CnnSpec::new(Head::Regression(latent_dim))),
        }
    }

    pub fn with_encoder(mut self, encoder: ModelSpec) -> Self {
        self.encoder = encoder;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::InvalidParameter("latent_dim must be >= 1".into()));
        }
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return Err(Error::InvalidParameter("margin must be > 0".into()));
        }
        if self.pairs_per_epoch == 0 {
            return Err(Error::InvalidParameter(
                "pairs_per_epoch must be >= 1".into(),
            ));
        }
        self.encoder.validate()?;
        match self.encoder.head() {
            Head::Regression(d) if d == self.latent_dim => Ok(()),
            other => Err(Error::InvalidParameter(format!(
                "encoder head {other:?} does not produce latent_dim = {}",
                self.latent_dim
            ))),
        }
    }
}

/// One sampled training pair. Positives are same-object, cross-pose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairLabel {
    pub index_a: usize,
    pub index_b: usize,
    pub is_positive: bool,
}

/// Object and pose membership of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleGroup {
    pub object: usize,
    pub pose: u32,
}

/// Draws `count` pairs, balanced between positives and negatives (+/-1).
/// Positive pairs always cross a pose boundary; samples within one pose are
/// near-duplicates and would be degenerate positives.
pub fn sample_pairs(
    groups: &[SampleGroup],
    seed: u64,
    count: usize,
) -> Result<Vec<PairLabel>> {
    if groups.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two samples to form pairs".into(),
        ));
    }
    // Indices per object, and pose diversity check.
    let mut objects: Vec<usize> = groups.iter().map(|g| g.object).collect();
    objects.sort_unstable();
    objects.dedup();
    if objects.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two distinct objects for negative pairs".into(),
        ));
    }
    let mut per_object: Vec<(usize, Vec<usize>)> = objects
        .iter()
        .map(|&o| {
            (
                o,
                groups
                    .iter()
                    .enumerate()
                    .filter(|(_, g)| g.object == o)
                    .map(|(i, _)| i)
                    .collect(),
            )
        })
        .collect();
    for (object, indices) in &per_object {
        let mut poses: Vec<u32> = indices.iter().map(|&i| groups[i].pose).collect();
        poses.sort_unstable();
        poses.dedup();
        if poses.len() < 2 {
            return Err(Error::SinglePoseObject(object.to_string()));
        }
    }
    per_object.sort_by_key(|(o, _)| *o);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_positive = count / 2 + count % 2;
    let mut pairs = Vec::with_capacity(count);
    for _ in 0..n_positive {
        let (_, indices) = &per_object[rng.gen_range(0..per_object.len())];
        let a = indices[rng.gen_range(0..indices.len())];
        let candidates: Vec<usize> = indices
            .iter()
            .copied()
            .filter(|&i| groups[i].pose != groups[a].pose)
            .collect();
        let b = candidates[rng.gen_range(0..candidates.len())];
        pairs.push(PairLabel {
            index_a: a,
            index_b: b,
            is_positive: true,
        });
    }
    for _ in n_positive..count {
        let oa = rng.gen_range(0..per_object.len());
        let ob = loop {
            let o = rng.gen_range(0..per_object.len());
            if o != oa {
                break o;
            }
        };
        let a = per_object[oa].1[rng.gen_range(0..per_object[oa].1.len())];
        let b = per_object[ob].1[rng.gen_range(0..per_object[ob].1.len())];
        pairs.push(PairLabel {
            index_a: a,
            index_b: b,
            is_positive: false,
        });
    }
    Ok(pairs)
}

/// Contrastive loss of one pair: squared distance for positives, squared
/// hinge below the margin for negatives.
pub fn contrastive_loss(z_a: &[f64], z_b: &[f64], is_positive: bool, margin: f64) -> f64 {
    let d2: f64 = z_a
        .iter()
        .zip(z_b)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if is_positive {
        d2
    } else {
        let gap = margin - d2.sqrt();
        if gap > 0.0 {
            gap * gap
        } else {
            0.0
        }
    }
}

/// Loss and gradients (d loss / d z_a, d loss / d z_b) for one pair.
fn contrastive_grad(
    z_a: &[f64],
    z_b: &[f64],
    is_positive: bool,
    margin: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let diff: Vec<f64> = z_a.iter().zip(z_b).map(|(a, b)| a - b).collect();
    let d = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
    if is_positive {
        let loss = d * d;
        let ga: Vec<f64> = diff.iter().map(|x| 2.0 * x).collect();
        let gb: Vec<f64> = ga.iter().map(|x| -x).collect();
        (loss, ga, gb)
    } else if d < margin && d > 0.0 {
        let gap = margin - d;
        let coeff = -2.0 * gap / d;
        let ga: Vec<f64> = diff.iter().map(|x| coeff * x).collect();
        let gb: Vec<f64> = ga.iter().map(|x| -x).collect();
        (gap * gap, ga, gb)
    } else if d == 0.0 {
        // Coincident negative pair: loss margin^2, flat subgradient.
        (margin * margin, vec![0.0; z_a.len()], vec![0.0; z_b.len()])
    } else {
        (0.0, vec![0.0; z_a.len()], vec![0.0; z_b.len()])
    }
}

/// Mean loss and output-space gradients over a batch of pairs.
pub(crate) fn contrastive_batch(
    z_a: &Array2<f64>,
    z_b: &Array2<f64>,
    positives: &[bool],
    margin: f64,
) -> (f64, Array2<f64>, Array2<f64>) {
    let batch = z_a.nrows();
    let mut loss = 0.0;
    let mut ga = Array2::zeros(z_a.raw_dim());
    let mut gb = Array2::zeros(z_b.raw_dim());
    for i in 0..batch {
        let (l, da, db) = contrastive_grad(
            z_a.row(i).as_slice().unwrap(),
            z_b.row(i).as_slice().unwrap(),
            positives[i],
            margin,
        );
        loss += l;
        for (j, (x, y)) in da.iter().zip(&db).enumerate() {
            ga[[i, j]] = x / batch as f64;
            gb[[i, j]] = y / batch as f64;
        }
    }
    (loss / batch as f64, ga, gb)
}

struct SiameseAdam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
}

impl SiameseAdam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn apply(&mut self, params: &mut ModelParams, grad: &[f64], config: &TrainConfig) {
        self.t += 1;
        let b1: f64 = 0.9;
        let b2: f64 = 0.999;
        let eps = 1e-8;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        let mut flat = params.flat_params();
        for (i, w) in flat.iter_mut().enumerate() {
            let g = grad[i] + config.weight_decay * *w;
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            *w -= config.learning_rate * (self.m[i] / bc1) / ((self.v[i] / bc2).sqrt() + eps);
        }
        params.set_flat_params(&flat).expect("shape unchanged");
    }
}

fn summed_flat(a: &Gradients, b: &Gradients) -> Vec<f64> {
    a.flatten()
        .iter()
        .zip(b.flatten())
        .map(|(x, y)| x + y)
        .collect()
}

/// Trains the encoder with the contrastive objective. Pairs are re-sampled
/// every epoch from a seed chain; training is bit-reproducible.
pub fn train_embedding(
    features: &Array2<f64>,
    groups: &[SampleGroup],
    config: &ContrastiveConfig,
    train_config: &TrainConfig,
) -> Result<ModelParams> {
    config.validate()?;
    train_config.validate()?;
    if groups.len() != features.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows vs {} group entries",
            features.nrows(),
            groups.len()
        )));
    }
    // Fail fast if pairing is impossible.
    sample_pairs(groups, train_config.seed, 2)?;

    let mut params = ModelParams::init(&config.encoder, features.ncols(), train_config.seed)?;
    params.config_hash = crate::sim::dataset::short_hash(&format!(
        "{}|{}",
        serde_json::to_string(config)?,
        serde_json::to_string(train_config)?
    ));
    let mut adam = SiameseAdam::new(params.param_count());

    for epoch in 0..train_config.epochs {
        let pairs = sample_pairs(
            groups,
            crate::sim::derive_seed(&[train_config.seed, 0x5041_4952, epoch as u64]),
            config.pairs_per_epoch,
        )?;
        for chunk in pairs.chunks(train_config.batch_size) {
            let xa = features.select(
                Axis(0),
                &chunk.iter().map(|p| p.index_a).collect::<Vec<_>>(),
            );
            let xb = features.select(
                Axis(0),
                &chunk.iter().map(|p| p.index_b).collect::<Vec<_>>(),
            );
            let positives: Vec<bool> = chunk.iter().map(|p| p.is_positive).collect();

            let (za, cache_a) = params.network.forward_cached(&xa)?;
            let (zb, cache_b) = params.network.forward_cached(&xb)?;
            let (loss, ga, gb) = contrastive_batch(&za, &zb, &positives, config.margin);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            let grads_a = params.network.backward(&cache_a, ga)?;
            let grads_b = params.network.backward(&cache_b, gb)?;
            adam.apply(&mut params, &summed_flat(&grads_a, &grads_b), train_config);
        }
    }
    Ok(params)
}

/// Encodes features into the latent space.
pub fn encode(encoder: &ModelParams, features: &Array2<f64>) -> Result<Array2<f64>> {
    forward_batch(encoder, features)
}

/// 3x3 matrix of mean pairwise Euclidean distances between shape categories;
/// diagonal entries average over distinct same-category pairs only.
pub fn distance_matrix(
    embeddings: &Array2<f64>,
    categories: &[ShapeCategory],
) -> Result<[[f64; 3]; 3]> {
    if categories.len() != embeddings.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} embeddings vs {} category labels",
            embeddings.nrows(),
            categories.len()
        )));
    }
    for cat in [
        ShapeCategory::Spherical,
        ShapeCategory::Cylindrical,
        ShapeCategory::Other,
    ] {
        if !categories.contains(&cat) {
            return Err(Error::EmptyCategory(cat.name().into()));
        }
    }
    let mut sums = [[0.0f64; 3]; 3];
    let mut counts = [[0usize; 3]; 3];
    let n = embeddings.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = embeddings
                .row(i)
                .iter()
                .zip(embeddings.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let (ci, cj) = (categories[i].index(), categories[j].index());
            sums[ci][cj] += d;
            counts[ci][cj] += 1;
            if ci != cj {
                sums[cj][ci] += d;
                counts[cj][ci] += 1;
            }
        }
    }
    let mut out = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            if counts[i][j] > 0 {
                out[i][j] = sums[i][j] / counts[i][j] as f64;
            }
        }
    }
    Ok(out)
}

/// k-NN accuracy after encoding both splits into the latent space.
pub fn knn_on_embeddings(
    encoder: &ModelParams,
    train_features: &Array2<f64>,
    train_labels: &[usize],
    val_features: &Array2<f64>,
    val_labels: &[usize],
    k: usize,
) -> Result<f64> {
    let train_z = encode(encoder, train_features)?;
    let val_z = encode(encoder, val_features)?;
    let predictions = knn_predict_batch(
        train_z.view(),
        train_labels,
        val_z.view(),
        k,
        KnnMetric::Euclidean,
    )?;
    let correct = predictions
        .iter()
        .zip(val_labels)
        .filter(|(p, t)| p == t)
        .count();
    Ok(correct as f64 / val_labels.len().max(1) as f64)
}

/// Mean positive-pair and negative-pair latent distances over sampled pairs.
pub fn pair_distance_summary(
    embeddings: &Array2<f64>,
    groups: &[SampleGroup],
    seed: u64,
    count: usize,
) -> Result<(f64, f64)> {
    let pairs = sample_pairs(groups, seed, count)?;
    let mut pos = (0.0, 0usize);
    let mut neg = (0.0, 0usize);
    for pair in pairs {
        let d: f64 = embeddings
            .row(pair.index_a)
            .iter()
            .zip(embeddings.row(pair.index_b))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if pair.is_positive {
            pos.0 += d;
            pos.1 += 1;
        } else {
            neg.0 += d;
            neg.1 += 1;
        }
    }
    Ok((pos.0 / pos.1.max(1) as f64, neg.0 / neg.1.max(1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::MlpSpec;
    use proptest::prelude::*;
    use rand::Rng;

    fn tiny_groups() -> Vec<SampleGroup> {
        // 2 objects x 2 poses x 1 sample.
        vec![
            SampleGroup { object: 0, pose: 0 },
            SampleGroup { object: 0, pose: 1 },
            SampleGroup { object: 1, pose: 0 },
            SampleGroup { object: 1, pose: 1 },
        ]
    }

    #[test]
    fn tiny_case_yields_two_positive_and_two_negative_pairs() {
        let pairs = sample_pairs(&tiny_groups(), 3, 4).unwrap();
        assert_eq!(pairs.len(), 4);
        assert_eq!(pairs.iter().filter(|p| p.is_positive).count(), 2);
        assert_eq!(pairs.iter().filter(|p| !p.is_positive).count(), 2);
    }

    #[test]
    fn positives_cross_poses_negatives_cross_objects() {
        let groups: Vec<SampleGroup> = (0..40)
            .map(|i| SampleGroup {
                object: i / 10,
                pose: (i % 10) as u32 / 2,
            })
            .collect();
        let pairs = sample_pairs(&groups, 11, 200).unwrap();
        for pair in pairs {
            let (a, b) = (groups[pair.index_a], groups[pair.index_b]);
            if pair.is_positive {
                assert_eq!(a.object, b.object);
                assert_ne!(a.pose, b.pose);
            } else {
                assert_ne!(a.object, b.object);
            }
        }
    }

    #[test]
    fn pair_sampling_is_deterministic() {
        let groups = tiny_groups();
        assert_eq!(
            sample_pairs(&groups, 7, 10).unwrap(),
            sample_pairs(&groups, 7, 10).unwrap()
        );
        assert_ne!(
            sample_pairs(&groups, 7, 10).unwrap(),
            sample_pairs(&groups, 8, 10).unwrap()
        );
    }

    #[test]
    fn single_pose_object_is_named_in_the_error() {
        let groups = vec![
            SampleGroup { object: 0, pose: 0 },
            SampleGroup { object: 0, pose: 1 },
            SampleGroup { object: 3, pose: 2 },
            SampleGroup { object: 3, pose: 2 },
        ];
        match sample_pairs(&groups, 0, 4) {
            Err(Error::SinglePoseObject(name)) => assert_eq!(name, "3"),
            other => panic!("expected SinglePoseObject, got {other:?}"),
        }
    }

    #[test]
    fn contrastive_loss_exact_cases() {
        let z = vec![0.3, -0.7, 1.1];
        assert_eq!(contrastive_loss(&z, &z, true, 1.0), 0.0);
        assert_eq!(contrastive_loss(&z, &z, false, 2.0), 4.0);
        // Negative pair at distance 2m: hinge inactive.
        let a = vec![0.0, 0.0];
        let b = vec![2.0, 0.0];
        assert_eq!(contrastive_loss(&a, &b, false, 1.0), 0.0);
    }

    #[test]
    fn contrastive_gradient_matches_finite_differences() {
        let spec = ModelSpec::Mlp(MlpSpec::new([6, 5], Head::Regression(3)));
        let params = ModelParams::init(&spec, 8, 21).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let xa = Array2::from_shape_fn((3, 8), |_| rng.gen_range(-1.0..1.0));
        let xb = Array2::from_shape_fn((3, 8), |_| rng.gen_range(-1.0..1.0));
        let positives = [true, false, false];
        let margin = 1.0;

        let loss_of = |p: &ModelParams| {
            let za = p.network.forward(&xa).unwrap();
            let zb = p.network.forward(&xb).unwrap();
            contrastive_batch(&za, &zb, &positives, margin).0
        };

        let (za, ca) = params.network.forward_cached(&xa).unwrap();
        let (zb, cb) = params.network.forward_cached(&xb).unwrap();
        let (_, ga, gb) = contrastive_batch(&za, &zb, &positives, margin);
        let grads_a = params.network.backward(&ca, ga).unwrap();
        let grads_b = params.network.backward(&cb, gb).unwrap();
        let analytic = summed_flat(&grads_a, &grads_b);

        let flat = params.flat_params();
        let h = 1e-4;
        let mut checked = 0;
        for i in (0..flat.len()).step_by((flat.len() / 120).max(1)) {
            let mut p = params.clone();
            let mut plus = flat.clone();
            plus[i] += h;
            p.set_flat_params(&plus).unwrap();
            let up = loss_of(&p);
            let mut minus = flat.clone();
            minus[i] -= h;
            p.set_flat_params(&minus).unwrap();
            let down = loss_of(&p);
            let fd = (up - down) / (2.0 * h);
            let denom = analytic[i].abs().max(1.0);
            assert!(
                (analytic[i] - fd).abs() / denom <= 1e-4,
                "param {i}: analytic {} vs fd {fd}",
                analytic[i]
            );
            checked += 1;
        }
        assert!(checked >= 100);
    }

    #[test]
    fn training_separates_two_synthetic_objects() {
        // Two objects far apart in feature space, several poses each.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let n_per = 12;
        let dim = 10;
        let mut x = Array2::zeros((2 * n_per, dim));
        let mut groups = Vec::new();
        for i in 0..2 * n_per {
            let object = i / n_per;
            let center = if object == 0 { -1.0 } else { 1.0 };
            for j in 0..dim {
                x[[i, j]] = center + 0.3 * rng.gen_range(-1.0..1.0);
            }
            groups.push(SampleGroup {
                object,
                pose: (i % n_per) as u32 / 2,
            });
        }
        let config = ContrastiveConfig {
            pairs_per_epoch: 64,
            ..ContrastiveConfig::new(2)
        }
        .with_encoder(ModelSpec::Mlp(MlpSpec::new([16, 8], Head::Regression(2))));
        let train_config = TrainConfig {
            epochs: 30,
            batch_size: 16,
            seed: 6,
            ..TrainConfig::default()
        };
        let encoder = train_embedding(&x, &groups, &config, &train_config).unwrap();
        let z = encode(&encoder, &x).unwrap();
        let (pos, neg) = pair_distance_summary(&z, &groups, 99, 400).unwrap();
        assert!(
            pos < 0.5 * neg,
            "positive mean {pos} not well below negative mean {neg}"
        );
    }

    #[test]
    fn embedding_training_is_deterministic() {
        let groups = tiny_groups();
        let x = Array2::from_shape_fn((4, 6), |(i, j)| (i as f64 - j as f64) * 0.3);
        let config = ContrastiveConfig {
            pairs_per_epoch: 8,
            ..ContrastiveConfig::new(2)
        }
        .with_encoder(ModelSpec::Mlp(MlpSpec::new([4, 4], Head::Regression(2))));
        let tc = TrainConfig {
            epochs: 3,
            batch_size: 4,
            seed: 5,
            ..TrainConfig::default()
        };
        let a = train_embedding(&x, &groups, &config, &tc).unwrap();
        let b = train_embedding(&x, &groups, &config, &tc).unwrap();
        assert_eq!(a.flat_params(), b.flat_params());
    }

    #[test]
    fn distance_matrix_trivial_cases() {
        use ShapeCategory::*;
        let categories = [Spherical, Spherical, Cylindrical, Other];
        // All identical embeddings: zero matrix.
        let z = Array2::zeros((4, 3));
        let m = distance_matrix(&z, &categories).unwrap();
        for row in m {
            for v in row {
                assert_eq!(v, 0.0);
            }
        }
        // Two tight clusters at distance 5: off-diagonal 5, diagonals 0.
        let mut z = Array2::zeros((4, 2));
        z[[2, 0]] = 5.0;
        z[[3, 0]] = 5.0;
        let categories = [Spherical, Spherical, Cylindrical, Cylindrical];
        match distance_matrix(&z, &categories) {
            Err(Error::EmptyCategory(name)) => assert_eq!(name, "other"),
            other => panic!("expected EmptyCategory, got {other:?}"),
        }
        let categories = [Spherical, Spherical, Cylindrical, Other];
        let m = distance_matrix(&z, &categories).unwrap();
        assert_eq!(m[0][0], 0.0);
        assert_eq!(m[0][1], 5.0);
        assert_eq!(m[1][0], 5.0);
    }

    #[test]
    fn identity_encoder_reduces_to_raw_knn() {
        // A 1-layer identity dense encoder reproduces raw-feature k-NN.
        let dim = 4;
        let spec = ModelSpec::Mlp(MlpSpec::new([dim, dim], Head::Regression(dim)));
        let mut encoder = ModelParams::zeros(&spec, dim).unwrap();
        // Hand-build identity: dense1 = I, dense2 = I, head = I (relu-safe
        // because features are nonnegative here).
        let mut flat = encoder.flat_params();
        let mut offset = 0;
        for _ in 0..3 {
            for r in 0..dim {
                for c in 0..dim {
                    flat[offset + r * dim + c] = if r == c { 1.0 } else { 0.0 };
                }
            }
            offset += dim * dim + dim;
        }
        encoder.set_flat_params(&flat).unwrap();

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let train = Array2::from_shape_fn((30, dim), |_| rng.gen_range(0.0..1.0));
        let train_labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let val = Array2::from_shape_fn((10, dim), |_| rng.gen_range(0.0..1.0));
        let val_labels: Vec<usize> = (0..10).map(|i| i % 3).collect();

        let raw = knn_predict_batch(
            train.view(),
            &train_labels,
            val.view(),
            3,
            KnnMetric::Euclidean,
        )
        .unwrap();
        let raw_acc = raw
            .iter()
            .zip(&val_labels)
            .filter(|(p, t)| p == t)
            .count() as f64
            / val_labels.len() as f64;
        let emb_acc =
            knn_on_embeddings(&encoder, &train, &train_labels, &val, &val_labels, 3).unwrap();
        assert_eq!(raw_acc, emb_acc);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn loss_nonnegative_and_zero_conditions(
            a in proptest::collection::vec(-3.0f64..3.0, 4),
            b in proptest::collection::vec(-3.0f64..3.0, 4),
            margin in 0.1f64..3.0,
        ) {
            let pos = contrastive_loss(&a, &b, true, margin);
            let neg = contrastive_loss(&a, &b, false, margin);
            prop_assert!(pos >= 0.0 && neg >= 0.0);
            let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            if d >= margin {
                prop_assert_eq!(neg, 0.0);
            }
        }

        #[test]
        fn distance_matrix_is_translation_invariant_and_symmetric(
            seed in 0u64..200,
            shift in proptest::collection::vec(-5.0f64..5.0, 3),
        ) {
            use ShapeCategory::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let z = Array2::from_shape_fn((9, 3), |_| rng.gen_range(-1.0..1.0));
            let categories = [
                Spherical, Spherical, Spherical,
                Cylindrical, Cylindrical, Cylindrical,
                Other, Other, Other,
            ];
            let m = distance_matrix(&z, &categories).unwrap();
            let mut translated = z.clone();
            for mut row in translated.outer_iter_mut() {
                for (v, s) in row.iter_mut().zip(&shift) {
                    *v += s;
                }
            }
            let mt = distance_matrix(&translated, &categories).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((m[i][j] - mt[i][j]).abs() < 1e-9);
                    prop_assert!((m[i][j] - m[j][i]).abs() < 1e-12);
                }
            }
        }
    }
}
