//! Object recognition from synthetic visual features.
//!
//! A Kohonen map clusters feature vectors and keeps a per-node tally of the
//! object labels it was trained on; a linear perceptron trained with the
//! Widrow-Hoff rule maps features to the need the object satisfies. The
//! perceptron's clamped output is the stimulus intensity fed to the
//! motivation system.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::homeostasis::{NeedKind, PerNeed};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PerceptionError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("target state is not one-hot")]
    NotOneHot,
    #[error("no map node carries a label yet")]
    UnlabeledCluster,
    #[error("{0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Cookie,
    Drink,
    TeddyBear,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 3] = [ObjectKind::Cookie, ObjectKind::Drink, ObjectKind::TeddyBear];

    pub fn satisfies(self) -> NeedKind {
        match self {
            ObjectKind::Cookie => NeedKind::Hunger,
            ObjectKind::Drink => NeedKind::Thirst,
            ObjectKind::TeddyBear => NeedKind::Curiosity,
        }
    }

    pub fn for_need(need: NeedKind) -> Self {
        match need {
            NeedKind::Hunger => ObjectKind::Cookie,
            NeedKind::Thirst => ObjectKind::Drink,
            NeedKind::Curiosity => ObjectKind::TeddyBear,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectKind::Cookie => "cookie",
            ObjectKind::Drink => "drink",
            ObjectKind::TeddyBear => "teddy_bear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.as_str() == s)
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Stimulus intensity `s` for one need, clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulusIntensity {
    need: NeedKind,
    value: f64,
}

impl StimulusIntensity {
    pub fn new(need: NeedKind, value: f64) -> Self {
        let value = if value.is_nan() { 0.0 } else { value.clamp(0.0, 1.0) };
        Self { need, value }
    }

    pub fn need(&self) -> NeedKind {
        self.need
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(components: Vec<f64>) -> Self {
        Self(components)
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }
}

/// Fixed feature prototype for an object: component `i` is high when
/// `i % 3` equals the object's index, low otherwise.
pub fn prototype(kind: ObjectKind, dim: usize) -> FeatureVector {
    FeatureVector(
        (0..dim)
            .map(|i| if i % 3 == kind.index() { 0.9 } else { 0.1 })
            .collect(),
    )
}

/// Prototype plus independent Gaussian noise, clamped to `[0, 1]`.
pub fn synth_features<R: Rng + ?Sized>(
    kind: ObjectKind,
    dim: usize,
    noise_sigma: f64,
    rng: &mut R,
) -> FeatureVector {
    let mut v = prototype(kind, dim);
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("finite sigma");
        for x in v.0.iter_mut() {
            *x = (*x + normal.sample(rng)).clamp(0.0, 1.0);
        }
    }
    v
}

fn check_dim(expected: usize, actual: usize) -> Result<(), PerceptionError> {
    if expected == actual {
        Ok(())
    } else {
        Err(PerceptionError::DimensionMismatch { expected, actual })
    }
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SomConfig {
    pub rows: usize,
    pub cols: usize,
    pub initial_learning_rate: f64,
    pub final_learning_rate: f64,
    /// Defaults to half the larger grid side when absent.
    pub initial_radius: Option<f64>,
    pub final_radius: f64,
    /// Number of training steps over which the schedule decays.
    pub decay_steps: u32,
}

impl Default for SomConfig {
    fn default() -> Self {
        Self {
            rows: 4,
            cols: 4,
            initial_learning_rate: 0.5,
            final_learning_rate: 0.01,
            initial_radius: None,
            final_radius: 1.0,
            decay_steps: 160,
        }
    }
}

/// Kohonen map with a per-node label tally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomGrid {
    rows: usize,
    cols: usize,
    dim: usize,
    weights: Vec<f64>,
    learning_rate: f64,
    radius: f64,
    lr_decay: f64,
    radius_decay: f64,
    decay_steps: u32,
    epoch: u32,
    label_counts: Vec<[u32; 3]>,
}

fn decay_factor(initial: f64, target: f64, steps: u32) -> f64 {
    if steps == 0 || initial <= 0.0 || target <= 0.0 || target >= initial {
        1.0
    } else {
        (target / initial).powf(1.0 / steps as f64)
    }
}

impl SomGrid {
    /// Grid with weights drawn uniformly from `[0, 1)`.
    pub fn new<R: Rng + ?Sized>(config: &SomConfig, dim: usize, rng: &mut R) -> Result<Self, PerceptionError> {
        if config.rows == 0 || config.cols == 0 || dim == 0 {
            return Err(PerceptionError::InvalidParameter("grid and feature dimensions must be positive".into()));
        }
        let weights = (0..config.rows * config.cols * dim).map(|_| rng.random::<f64>()).collect();
        Self::from_weights(config, dim, weights)
    }

    pub fn from_weights(config: &SomConfig, dim: usize, weights: Vec<f64>) -> Result<Self, PerceptionError> {
        let nodes = config.rows * config.cols;
        check_dim(nodes * dim, weights.len())?;
        let lr = config.initial_learning_rate;
        let radius = config
            .initial_radius
            .unwrap_or(config.rows.max(config.cols) as f64 / 2.0);
        if !(lr >= 0.0) || !(radius >= 0.0) {
            return Err(PerceptionError::InvalidParameter("learning rate and radius must be non-negative".into()));
        }
        Ok(Self {
            rows: config.rows,
            cols: config.cols,
            dim,
            weights,
            learning_rate: lr,
            radius,
            lr_decay: decay_factor(lr, config.final_learning_rate, config.decay_steps),
            radius_decay: decay_factor(radius, config.final_radius, config.decay_steps),
            decay_steps: config.decay_steps,
            epoch: 0,
            label_counts: vec![[0; 3]; nodes],
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.dim)
    }

    pub fn nodes(&self) -> usize {
        self.rows * self.cols
    }

    pub fn node_weights(&self, node: usize) -> &[f64] {
        &self.weights[node * self.dim..(node + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn label_counts(&self, node: usize) -> [u32; 3] {
        self.label_counts[node]
    }

    /// Best-matching unit; ties go to the lowest index.
    pub fn som_assign(&self, sample: &FeatureVector) -> Result<usize, PerceptionError> {
        check_dim(self.dim, sample.dim())?;
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for node in 0..self.nodes() {
            let d = dist_sq(self.node_weights(node), sample.components());
            if d < best_d {
                best = node;
                best_d = d;
            }
        }
        Ok(best)
    }

    fn grid_dist_sq(&self, a: usize, b: usize) -> f64 {
        let (ra, ca) = ((a / self.cols) as f64, (a % self.cols) as f64);
        let (rb, cb) = ((b / self.cols) as f64, (b % self.cols) as f64);
        (ra - rb).powi(2) + (ca - cb).powi(2)
    }

    /// One Kohonen step: nodes within `radius` of the BMU (grid distance)
    /// move toward the sample by `learning_rate * exp(-d^2 / 2r^2)`. Returns
    /// the BMU found before the update.
    pub fn som_train_step(&mut self, sample: &FeatureVector) -> Result<usize, PerceptionError> {
        let bmu = self.som_assign(sample)?;
        let r2 = self.radius * self.radius;
        for node in 0..self.nodes() {
            let d2 = self.grid_dist_sq(bmu, node);
            if d2 > r2 {
                continue;
            }
            let h = if r2 > 0.0 { (-d2 / (2.0 * r2)).exp() } else { 1.0 };
            let rate = self.learning_rate * h;
            let dim = self.dim;
            let w = &mut self.weights[node * dim..(node + 1) * dim];
            for (wi, xi) in w.iter_mut().zip(sample.components()) {
                *wi += rate * (xi - *wi);
            }
        }
        if self.epoch < self.decay_steps {
            self.learning_rate *= self.lr_decay;
            self.radius *= self.radius_decay;
        }
        self.epoch += 1;
        Ok(bmu)
    }

    /// Trains on a sample with a known object label and tallies the label on
    /// the sample's BMU after the update.
    pub fn train_labeled(&mut self, sample: &FeatureVector, label: ObjectKind) -> Result<usize, PerceptionError> {
        self.som_train_step(sample)?;
        let bmu = self.som_assign(sample)?;
        self.label_counts[bmu][label.index()] += 1;
        Ok(bmu)
    }

    fn majority_label(&self, node: usize) -> Option<ObjectKind> {
        let counts = self.label_counts[node];
        let max = *counts.iter().max()?;
        if max == 0 {
            return None;
        }
        counts.iter().position(|&c| c == max).map(|i| ObjectKind::ALL[i])
    }

    /// Majority label of the BMU. An unlabeled BMU defers to the nearest
    /// labeled node in feature space.
    pub fn label_of(&self, sample: &FeatureVector) -> Result<ObjectKind, PerceptionError> {
        let bmu = self.som_assign(sample)?;
        if let Some(label) = self.majority_label(bmu) {
            return Ok(label);
        }
        (0..self.nodes())
            .filter_map(|n| self.majority_label(n).map(|l| (n, l)))
            .min_by(|(a, _), (b, _)| {
                dist_sq(self.node_weights(*a), sample.components())
                    .total_cmp(&dist_sq(self.node_weights(*b), sample.components()))
            })
            .map(|(_, l)| l)
            .ok_or(PerceptionError::UnlabeledCluster)
    }
}

/// Internal-state vector, one entry per need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InternalStateVector(Vec<f64>);

impl InternalStateVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn one_hot(need: NeedKind) -> Self {
        let mut v = vec![0.0; NeedKind::ALL.len()];
        v[need.index()] = 1.0;
        Self(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn is_one_hot(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0 || x == 1.0) && self.0.iter().filter(|&&x| x == 1.0).count() == 1
    }

    pub fn get(&self, need: NeedKind) -> f64 {
        self.0[need.index()]
    }
}

/// Linear readout `ISP_j = sum_i VF_i * w_ij`, trained with the
/// Widrow-Hoff rule `dw_ij = eps * VF_i * (RIS_j - ISP_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeedPerceptron {
    dim: usize,
    /// Row-major `dim x 3`.
    omega: Vec<f64>,
    epsilon: f64,
}

impl NeedPerceptron {
    pub fn new(dim: usize, epsilon: f64) -> Result<Self, PerceptionError> {
        Self::from_weights(dim, vec![0.0; dim * NeedKind::ALL.len()], epsilon)
    }

    pub fn from_weights(dim: usize, omega: Vec<f64>, epsilon: f64) -> Result<Self, PerceptionError> {
        check_dim(dim * NeedKind::ALL.len(), omega.len())?;
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(PerceptionError::InvalidParameter(format!(
                "perceptron learning rate must be within (0, 1], got {epsilon}"
            )));
        }
        Ok(Self { dim, omega, epsilon })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn weights(&self) -> &[f64] {
        &self.omega
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.omega[i * NeedKind::ALL.len() + j]
    }

    pub fn predict_internal_state(&self, vf: &FeatureVector) -> Result<InternalStateVector, PerceptionError> {
        check_dim(self.dim, vf.dim())?;
        let k = NeedKind::ALL.len();
        let mut out = vec![0.0; k];
        for (i, x) in vf.components().iter().enumerate() {
            let row = &self.omega[i * k..(i + 1) * k];
            for (o, w) in out.iter_mut().zip(row) {
                *o += x * w;
            }
        }
        Ok(InternalStateVector(out))
    }

    pub fn widrow_hoff_update(
        &mut self,
        vf: &FeatureVector,
        ris: &InternalStateVector,
    ) -> Result<(), PerceptionError> {
        check_dim(NeedKind::ALL.len(), ris.values().len())?;
        if !ris.is_one_hot() {
            return Err(PerceptionError::NotOneHot);
        }
        let isp = self.predict_internal_state(vf)?;
        let k = NeedKind::ALL.len();
        let err: Vec<f64> = ris.values().iter().zip(isp.values()).map(|(r, p)| r - p).collect();
        for (i, x) in vf.components().iter().enumerate() {
            for (j, e) in err.iter().enumerate() {
                self.omega[i * k + j] += self.epsilon * x * e;
            }
        }
        Ok(())
    }

    pub fn stimulus(&self, vf: &FeatureVector) -> Result<PerNeed<StimulusIntensity>, PerceptionError> {
        let isp = self.predict_internal_state(vf)?;
        Ok(PerNeed::from_fn(|n| StimulusIntensity::new(n, isp.get(n))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionConfig {
    pub feature_dim: usize,
    pub noise_sigma: f64,
    pub perceptron_epsilon: f64,
    pub som: SomConfig,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            feature_dim: 16,
            noise_sigma: 0.05,
            perceptron_epsilon: 0.1,
            som: SomConfig::default(),
        }
    }
}

impl PerceptionConfig {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        if self.feature_dim == 0 {
            return Err(PerceptionError::InvalidParameter("feature_dim must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(PerceptionError::InvalidParameter(format!(
                "noise_sigma must be non-negative, got {}",
                self.noise_sigma
            )));
        }
        if self.som.rows == 0 || self.som.cols == 0 {
            return Err(PerceptionError::InvalidParameter("map grid must be non-empty".into()));
        }
        if !(self.perceptron_epsilon > 0.0 && self.perceptron_epsilon <= 1.0) {
            return Err(PerceptionError::InvalidParameter(format!(
                "perceptron_epsilon must be within (0, 1], got {}",
                self.perceptron_epsilon
            )));
        }
        Ok(())
    }
}

/// The map and perceptron trained side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecognizer {
    pub grid: SomGrid,
    pub perceptron: NeedPerceptron,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recognition {
    pub object: ObjectKind,
    pub stimulus: PerNeed<StimulusIntensity>,
}

impl ObjectRecognizer {
    pub fn new<R: Rng + ?Sized>(config: &PerceptionConfig, rng: &mut R) -> Result<Self, PerceptionError> {
        config.validate()?;
        Ok(Self {
            grid: SomGrid::new(&config.som, config.feature_dim, rng)?,
            perceptron: NeedPerceptron::new(config.feature_dim, config.perceptron_epsilon)?,
        })
    }

    /// Online training on one observed object: the map learns the label,
    /// the perceptron learns the need the object satisfies.
    pub fn train(&mut self, vf: &FeatureVector, object: ObjectKind) -> Result<(), PerceptionError> {
        self.grid.train_labeled(vf, object)?;
        self.perceptron
            .widrow_hoff_update(vf, &InternalStateVector::one_hot(object.satisfies()))
    }

    pub fn recognize(&self, vf: &FeatureVector) -> Result<Recognition, PerceptionError> {
        let stimulus = self.perceptron.stimulus(vf)?;
        let object = self.grid.label_of(vf)?;
        Ok(Recognition { object, stimulus })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use proptest::prelude::*;

    const D: usize = 16;

    #[test]
    fn zero_noise_is_exact_prototype() {
        let mut rng = substream(0, Stream::Noise);
        let p = prototype(ObjectKind::Cookie, D);
        for _ in 0..3 {
            assert_eq!(synth_features(ObjectKind::Cookie, D, 0.0, &mut rng), p);
        }
    }

    #[test]
    fn noisy_features_are_seeded_and_bounded() {
        let a = synth_features(ObjectKind::Drink, D, 0.05, &mut substream(4, Stream::Noise));
        let b = synth_features(ObjectKind::Drink, D, 0.05, &mut substream(4, Stream::Noise));
        assert_eq!(a, b);
        assert_ne!(a, prototype(ObjectKind::Drink, D));
        assert!(a.components().iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn prototypes_are_well_separated() {
        for a in ObjectKind::ALL {
            for b in ObjectKind::ALL {
                if a < b {
                    let d = dist_sq(prototype(a, D).components(), prototype(b, D).components()).sqrt();
                    assert!(d >= 0.5 * (D as f64).sqrt(), "{a} {b} {d}");
                }
            }
        }
    }

    fn grid(rows: usize, cols: usize, lr: f64, seed: u64) -> SomGrid {
        let cfg = SomConfig {
            rows,
            cols,
            initial_learning_rate: lr,
            ..SomConfig::default()
        };
        SomGrid::new(&cfg, D, &mut substream(seed, Stream::Perception)).unwrap()
    }

    #[test]
    fn zero_learning_rate_leaves_weights() {
        let mut g = grid(4, 4, 0.0, 1);
        let before = g.weights().to_vec();
        g.som_train_step(&prototype(ObjectKind::Cookie, D)).unwrap();
        assert_eq!(g.weights(), &before[..]);
    }

    #[test]
    fn single_node_full_pull() {
        let cfg = SomConfig {
            rows: 1,
            cols: 1,
            initial_learning_rate: 1.0,
            initial_radius: Some(1.0),
            ..SomConfig::default()
        };
        let mut g = SomGrid::new(&cfg, D, &mut substream(2, Stream::Perception)).unwrap();
        let x = prototype(ObjectKind::TeddyBear, D);
        g.som_train_step(&x).unwrap();
        for (w, xi) in g.node_weights(0).iter().zip(x.components()) {
            assert!((w - xi).abs() < 1e-15);
        }
    }

    #[test]
    fn prototypes_claim_distinct_nodes() {
        let mut g = grid(4, 4, 0.5, 3);
        for _ in 0..100 {
            for o in ObjectKind::ALL {
                g.train_labeled(&prototype(o, D), o).unwrap();
            }
        }
        let bmus: Vec<usize> = ObjectKind::ALL
            .iter()
            .map(|&o| g.som_assign(&prototype(o, D)).unwrap())
            .collect();
        assert_ne!(bmus[0], bmus[1]);
        assert_ne!(bmus[0], bmus[2]);
        assert_ne!(bmus[1], bmus[2]);
        for o in ObjectKind::ALL {
            assert_eq!(g.label_of(&prototype(o, D)).unwrap(), o);
        }
    }

    #[test]
    fn assign_exact_match_and_ties() {
        let cfg = SomConfig { rows: 1, cols: 3, ..SomConfig::default() };
        let weights = [vec![0.0; D], vec![1.0; D], vec![0.0; D]].concat();
        let g = SomGrid::from_weights(&cfg, D, weights).unwrap();
        assert_eq!(g.som_assign(&FeatureVector::new(vec![1.0; D])).unwrap(), 1);
        // nodes 0 and 2 are identical, so equidistant from any sample
        assert_eq!(g.som_assign(&FeatureVector::new(vec![0.2; D])).unwrap(), 0);
        let half = FeatureVector::new(vec![0.5; D]);
        assert_eq!(g.som_assign(&half).unwrap(), g.som_assign(&half).unwrap());
        assert!(matches!(
            g.som_assign(&FeatureVector::new(vec![0.0; 3])),
            Err(PerceptionError::DimensionMismatch { expected: 16, actual: 3 })
        ));
    }

    #[test]
    fn unlabeled_before_training() {
        let g = grid(4, 4, 0.5, 4);
        assert_eq!(g.label_of(&prototype(ObjectKind::Cookie, D)), Err(PerceptionError::UnlabeledCluster));
    }

    #[test]
    fn zero_weights_predict_zero() {
        let p = NeedPerceptron::new(D, 0.1).unwrap();
        let isp = p.predict_internal_state(&prototype(ObjectKind::Drink, D)).unwrap();
        assert_eq!(isp.values(), &[0.0, 0.0, 0.0]);
        let s = p.stimulus(&prototype(ObjectKind::Drink, D)).unwrap();
        assert!(NeedKind::ALL.iter().all(|&n| s[n].value() == 0.0));
    }

    #[test]
    fn one_hot_input_extracts_row() {
        let omega: Vec<f64> = (0..D * 3).map(|i| i as f64 * 0.25 - 3.0).collect();
        let p = NeedPerceptron::from_weights(D, omega, 0.1).unwrap();
        let mut x = vec![0.0; D];
        x[5] = 1.0;
        let isp = p.predict_internal_state(&FeatureVector::new(x)).unwrap();
        assert_eq!(isp.values(), &[p.weight(5, 0), p.weight(5, 1), p.weight(5, 2)]);
    }

    #[test]
    fn single_entry_update() {
        let mut p = NeedPerceptron::new(D, 0.1).unwrap();
        let mut x = vec![0.0; D];
        x[2] = 1.0;
        p.widrow_hoff_update(&FeatureVector::new(x), &InternalStateVector::one_hot(NeedKind::Thirst))
            .unwrap();
        assert!((p.weight(2, 1) - 0.1).abs() < 1e-15);
        assert_eq!(p.weights().iter().filter(|w| **w != 0.0).count(), 1);
    }

    #[test]
    fn fixed_point_when_prediction_matches() {
        let mut x = vec![0.0; D];
        x[0] = 1.0;
        let mut omega = vec![0.0; D * 3];
        omega[0] = 1.0;
        let mut p = NeedPerceptron::from_weights(D, omega.clone(), 0.3).unwrap();
        p.widrow_hoff_update(&FeatureVector::new(x), &InternalStateVector::one_hot(NeedKind::Hunger))
            .unwrap();
        assert_eq!(p.weights(), &omega[..]);
    }

    #[test]
    fn rejects_non_one_hot_target() {
        let mut p = NeedPerceptron::new(D, 0.1).unwrap();
        let r = p.widrow_hoff_update(&prototype(ObjectKind::Cookie, D), &InternalStateVector::new(vec![0.5, 0.5, 0.0]));
        assert_eq!(r, Err(PerceptionError::NotOneHot));
        let r = p.widrow_hoff_update(&prototype(ObjectKind::Cookie, D), &InternalStateVector::new(vec![1.0, 0.0]));
        assert!(matches!(r, Err(PerceptionError::DimensionMismatch { .. })));
    }

    #[test]
    fn geometric_error_decay_for_unit_norm_input() {
        // unit-norm input: error shrinks by (1 - eps * |x|^2) each step
        let mut x = vec![0.0; D];
        x[0] = 0.6;
        x[3] = 0.8;
        let vf = FeatureVector::new(x);
        let ris = InternalStateVector::one_hot(NeedKind::Curiosity);
        let eps = 0.5;
        let mut p = NeedPerceptron::new(D, eps).unwrap();
        let e0: Vec<f64> = ris.values().to_vec();
        for k in 1..=12 {
            p.widrow_hoff_update(&vf, &ris).unwrap();
            let isp = p.predict_internal_state(&vf).unwrap();
            let factor = (1.0 - eps * vf.norm_sq()).powi(k);
            for j in 0..3 {
                let err = ris.values()[j] - isp.values()[j];
                assert!((err - e0[j] * factor).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trained_cookie_signals_hunger() {
        let cfg = PerceptionConfig::default();
        let mut r = ObjectRecognizer::new(&cfg, &mut substream(8, Stream::Perception)).unwrap();
        for _ in 0..50 {
            for o in ObjectKind::ALL {
                r.train(&prototype(o, D), o).unwrap();
            }
        }
        let rec = r.recognize(&prototype(ObjectKind::Cookie, D)).unwrap();
        assert_eq!(rec.object, ObjectKind::Cookie);
        assert!((rec.stimulus.hunger.value() - 1.0).abs() < 0.1);
    }

    proptest! {
        #[test]
        fn update_is_linear_in_epsilon(
            x in prop::collection::vec(0.0f64..1.0, D),
            w in prop::collection::vec(-1.0f64..1.0, D * 3),
            need in 0usize..3,
            eps in 0.01f64..0.5,
        ) {
            let vf = FeatureVector::new(x);
            let ris = InternalStateVector::one_hot(NeedKind::ALL[need]);
            let mut a = NeedPerceptron::from_weights(D, w.clone(), eps).unwrap();
            let mut b = NeedPerceptron::from_weights(D, w.clone(), 2.0 * eps).unwrap();
            a.widrow_hoff_update(&vf, &ris).unwrap();
            b.widrow_hoff_update(&vf, &ris).unwrap();
            for k in 0..w.len() {
                let da = a.weights()[k] - w[k];
                let db = b.weights()[k] - w[k];
                prop_assert!((db - 2.0 * da).abs() <= 1e-12 * (1.0 + da.abs()));
            }
        }

        #[test]
        fn stimulus_is_clamped(w in prop::collection::vec(-5.0f64..5.0, D * 3), o in 0usize..3) {
            let p = NeedPerceptron::from_weights(D, w, 0.1).unwrap();
            let s = p.stimulus(&prototype(ObjectKind::ALL[o], D)).unwrap();
            for n in NeedKind::ALL {
                prop_assert!((0.0..=1.0).contains(&s[n].value()));
            }
        }
    }
}
