//! Candidate classifiers. The default is a standardized logistic model
//! trained by shuffled stochastic gradient descent.

use rand::seq::SliceRandom;
use rand::RngCore;

use super::features::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleLabel {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub bbox: crate::imaging::BoundingBox,
    pub label: SampleLabel,
    pub feature: FeatureVector,
}

/// When to stop a training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSchedule {
    pub max_epochs: usize,
    pub learning_rate: f64,
    /// Stop once the loss changes by less than this between epochs.
    pub loss_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub epochs: usize,
    pub loss: f64,
    pub accuracy: f64,
}

pub trait CandidateScorer {
    fn train(
        &mut self,
        samples: &[Sample],
        schedule: &TrainSchedule,
        rng: &mut dyn RngCore,
    ) -> TrainReport;

    /// Probability in `[0, 1]` that the candidate is the target.
    fn score(&self, feature: &FeatureVector) -> f64;
}

/// Logistic regression over standardized features with class-balanced
/// sample weights and a small L2 penalty. Standardization statistics are
/// fixed by the first training set.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticScorer {
    weights: Vec<f64>,
    bias: f64,
    mean: Vec<f64>,
    inv_std: Vec<f64>,
    l2: f64,
}

impl LogisticScorer {
    pub fn new(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
            mean: Vec::new(),
            inv_std: Vec::new(),
            l2: 1e-4,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    fn fit_standardization(&mut self, samples: &[Sample]) {
        let dim = self.weights.len();
        let n = samples.len() as f64;
        let mut mean = vec![0.0; dim];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(&s.feature.0) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for s in samples {
            for ((q, v), m) in var.iter_mut().zip(&s.feature.0).zip(&mean) {
                *q += (v - m) * (v - m) / n;
            }
        }
        self.inv_std = var
            .iter()
            .map(|&q| if q > 1e-12 { 1.0 / q.sqrt() } else { 1.0 })
            .collect();
        self.mean = mean;
    }

    fn standardize(&self, f: &FeatureVector) -> Vec<f64> {
        f.0.iter()
            .zip(&self.mean)
            .zip(&self.inv_std)
            .map(|((v, m), s)| ((v - m) * s).clamp(-50.0, 50.0))
            .collect()
    }

    fn logit(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl CandidateScorer for LogisticScorer {
    fn train(
        &mut self,
        samples: &[Sample],
        schedule: &TrainSchedule,
        rng: &mut dyn RngCore,
    ) -> TrainReport {
        if samples.is_empty() {
            return TrainReport {
                epochs: 0,
                loss: 0.0,
                accuracy: 1.0,
            };
        }
        if self.mean.is_empty() {
            self.fit_standardization(samples);
        }
        let xs: Vec<Vec<f64>> = samples.iter().map(|s| self.standardize(&s.feature)).collect();
        let ys: Vec<f64> = samples
            .iter()
            .map(|s| (s.label == SampleLabel::Positive) as u8 as f64)
            .collect();
        let n = samples.len() as f64;
        let n_pos = ys.iter().sum::<f64>();
        let n_neg = n - n_pos;
        let class_weight = |y: f64| {
            let count = if y > 0.5 { n_pos } else { n_neg };
            n / (2.0 * count.max(1.0))
        };

        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut previous_loss = f64::INFINITY;
        let mut report = TrainReport {
            epochs: 0,
            loss: f64::INFINITY,
            accuracy: 0.0,
        };
        for epoch in 1..=schedule.max_epochs {
            order.shuffle(rng);
            for &i in &order {
                let g = (sigmoid(self.logit(&xs[i])) - ys[i]) * class_weight(ys[i]);
                let lr = schedule.learning_rate;
                for (w, v) in self.weights.iter_mut().zip(&xs[i]) {
                    *w -= lr * (g * v + self.l2 * *w);
                }
                self.bias -= lr * g;
            }
            assert!(
                self.weights.iter().all(|w| w.is_finite()) && self.bias.is_finite(),
                "logistic weights diverged"
            );

            let mut loss = 0.0;
            let mut correct = 0usize;
            for (x, &y) in xs.iter().zip(&ys) {
                let p = sigmoid(self.logit(x)).clamp(1e-12, 1.0 - 1e-12);
                loss -= class_weight(y) * (y * p.ln() + (1.0 - y) * (1.0 - p).ln());
                correct += ((p > 0.5) == (y > 0.5)) as usize;
            }
            loss /= n;
            report = TrainReport {
                epochs: epoch,
                loss,
                accuracy: correct as f64 / n,
            };
            if report.accuracy == 1.0 || (previous_loss - loss).abs() < schedule.loss_tolerance {
                break;
            }
            previous_loss = loss;
        }
        report
    }

    fn score(&self, feature: &FeatureVector) -> f64 {
        if self.mean.is_empty() {
            return 0.5;
        }
        let p = sigmoid(self.logit(&self.standardize(feature)));
        if p.is_nan() {
            0.5
        } else {
            p
        }
    }
}
