//! Multinomial logistic regression over downsampled pixels, trained by
//! mini-batch SGD with momentum and L2 weight decay.

use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::scalar::{parse_scalar, Scalar};

pub const DEFAULT_SIDE: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Plain gradient descent on the full objective: a step that raises the
    /// objective is undone and the learning rate halved. Forces momentum 0.
    pub backtracking: bool,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            momentum: 0.9,
            weight_decay: 5e-4,
            iterations: 2000,
            batch_size: 64,
            seed: 0,
            backtracking: false,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0)
            || !(0.0..1.0).contains(&self.momentum)
            || !(self.weight_decay >= 0.0)
        {
            return Err(Error::Config(format!(
                "need learning_rate > 0, 0 <= momentum < 1, weight_decay >= 0 (got {}, {}, {})",
                self.learning_rate, self.momentum, self.weight_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// `K × D` weights (row per class) and `K` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel<T> {
    n_classes: usize,
    side: usize,
    weights: Vec<T>,
    bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Objective after each iteration: the mini-batch objective, or the
    /// full-data objective of accepted steps in backtracking mode.
    pub losses: Vec<f64>,
    pub initial_loss: f64,
}

/// Numerically stable softmax (max subtracted before exponentiation).
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl<T: Scalar> SoftmaxModel<T> {
    pub fn zeros(n_classes: usize, side: usize) -> Self {
        let dim = 3 * side * side;
        Self {
            n_classes,
            side,
            weights: vec![T::zero(); n_classes * dim],
            bias: vec![T::zero(); n_classes],
        }
    }

    pub fn from_parts(
        n_classes: usize,
        side: usize,
        weights: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self> {
        let dim = 3 * side * side;
        if weights.len() != n_classes * dim || bias.len() != n_classes {
            return Err(Error::Dimension {
                expected: n_classes * dim,
                found: weights.len(),
            });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Config("softmax parameters must be finite".into()));
        }
        Ok(Self {
            n_classes,
            side,
            weights,
            bias,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn dim(&self) -> usize {
        3 * self.side * self.side
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Parameter `i` in the flat order weights-then-bias.
    pub fn param(&self, i: usize) -> T {
        if i < self.weights.len() {
            self.weights[i]
        } else {
            self.bias[i - self.weights.len()]
        }
    }

    pub fn param_mut(&mut self, i: usize) -> &mut T {
        let n = self.weights.len();
        if i < n {
            &mut self.weights[i]
        } else {
            &mut self.bias[i - n]
        }
    }

    /// Copy with `extra` zero-initialized classes appended.
    pub fn with_extra_classes(&self, extra: usize) -> Self {
        let mut out = self.clone();
        out.n_classes += extra;
        out.weights
            .extend(std::iter::repeat_n(T::zero(), extra * self.dim()));
        out.bias.extend(std::iter::repeat_n(T::zero(), extra));
        out
    }

    pub fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::Dimension {
                expected: d,
                found: x.len(),
            });
        }
        Ok(self.logits_unchecked(x))
    }

    fn logits_unchecked(&self, x: &[T]) -> Vec<T> {
        let d = self.dim();
        self.weights
            .chunks_exact(d)
            .zip(&self.bias)
            .map(|(w, &b)| w.iter().zip(x).fold(b, |acc, (&wi, &xi)| acc + wi * xi))
            .collect()
    }

    /// `softmax(W·x + b)` for a pixel vector.
    pub fn predict_proba(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(softmax(&self.logits(x)?))
    }

    /// Mean cross-entropy over the batch plus `(weight_decay / 2)·‖W‖²`,
    /// together with its analytic gradient.
    pub fn objective_and_gradient<X: AsRef<[T]>>(
        &self,
        inputs: &[X],
        labels: &[usize],
        weight_decay: f64,
    ) -> (f64, Gradient<T>) {
        let d = self.dim();
        let mut gw = vec![T::zero(); self.weights.len()];
        let mut gb = vec![T::zero(); self.n_classes];
        let mut loss = 0.0f64;
        let inv_n = T::of(1.0 / inputs.len() as f64);
        for (x, &y) in inputs.iter().zip(labels) {
            let x = x.as_ref();
            let z = self.logits_unchecked(x);
            let max = z.iter().copied().fold(T::neg_infinity(), T::max);
            let sum_exp: T = z.iter().map(|&v| (v - max).exp()).sum();
            loss += (max + sum_exp.ln() - z[y]).as_f64();
            for (c, &zc) in z.iter().enumerate() {
                let mut delta = (zc - max).exp() / sum_exp;
                if c == y {
                    delta = delta - T::one();
                }
                let delta = delta * inv_n;
                gb[c] = gb[c] + delta;
                for (g, &xi) in gw[c * d..(c + 1) * d].iter_mut().zip(x) {
                    *g = *g + delta * xi;
                }
            }
        }
        loss /= inputs.len() as f64;
        let wd = T::of(weight_decay);
        let mut sq = 0.0f64;
        for (g, &w) in gw.iter_mut().zip(&self.weights) {
            *g = *g + wd * w;
            sq += (w * w).as_f64();
        }
        (
            loss + 0.5 * weight_decay * sq,
            Gradient {
                weights: gw,
                bias: gb,
            },
        )
    }

    pub fn objective<X: AsRef<[T]>>(
        &self,
        inputs: &[X],
        labels: &[usize],
        weight_decay: f64,
    ) -> f64 {
        self.objective_and_gradient(inputs, labels, weight_decay).0
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "egoact-softmax 1\nclasses {}\nside {}\nbias",
            self.n_classes, self.side
        );
        for b in &self.bias {
            let _ = write!(out, "\t{b}");
        }
        out.push('\n');
        for row in self.weights.chunks_exact(self.dim()) {
            out.push('w');
            for v in row {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Config(format!("softmax model: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some("egoact-softmax 1") {
            return Err(bad("unsupported header"));
        }
        let mut field = |name: &str| -> Result<usize> {
            lines
                .next()
                .and_then(|l| l.strip_prefix(name))
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| bad(&format!("missing `{name}`")))
        };
        let n_classes = field("classes ")?;
        let side = field("side ")?;
        let values = |line: Option<&str>, tag: &str| -> Result<Vec<T>> {
            let line = line
                .and_then(|l| l.strip_prefix(tag))
                .ok_or_else(|| bad(&format!("missing `{tag}` line")))?;
            line.split('\t')
                .filter(|s| !s.is_empty())
                .map(|s| parse_scalar(s).ok_or_else(|| bad("bad value")))
                .collect()
        };
        let bias = values(lines.next(), "bias")?;
        let mut weights = Vec::new();
        for _ in 0..n_classes {
            weights.extend(values(lines.next(), "w")?);
        }
        Self::from_parts(n_classes, side, weights, bias)
    }
}

/// Trains a zero-initialized model.
pub fn train_softmax<T: Scalar, X: AsRef<[T]> + Sync>(
    inputs: &[X],
    labels: &[usize],
    n_classes: usize,
    side: usize,
    config: &SgdConfig,
) -> Result<(SoftmaxModel<T>, TrainReport)> {
    let mut model = SoftmaxModel::zeros(n_classes, side);
    let report = continue_training(&mut model, inputs, labels, config, None)?;
    Ok((model, report))
}

/// Continues SGD from the model's current parameters. When `trainable` is
/// given, rows of classes marked `false` are left untouched.
pub fn continue_training<T: Scalar, X: AsRef<[T]> + Sync>(
    model: &mut SoftmaxModel<T>,
    inputs: &[X],
    labels: &[usize],
    config: &SgdConfig,
    trainable: Option<&[bool]>,
) -> Result<TrainReport> {
    config.validate()?;
    if inputs.is_empty() {
        return Err(Error::EmptyInput("softmax training set is empty".into()));
    }
    if inputs.len() != labels.len() {
        return Err(Error::Dimension {
            expected: inputs.len(),
            found: labels.len(),
        });
    }
    if let Some(x) = inputs.iter().find(|x| x.as_ref().len() != model.dim()) {
        return Err(Error::Dimension {
            expected: model.dim(),
            found: x.as_ref().len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= model.n_classes) {
        return Err(Error::Config(format!(
            "label index {bad} outside {} classes",
            model.n_classes
        )));
    }
    let d = model.dim();
    let frozen: Vec<bool> = match trainable {
        Some(t) => t.iter().map(|&x| !x).collect(),
        None => vec![false; model.n_classes],
    };
    if config.backtracking {
        return backtracking_descent(model, inputs, labels, config, &frozen);
    }

    let initial_loss = model.objective(inputs, labels, config.weight_decay);
    let mut losses = Vec::with_capacity(config.iterations);
    let mut vw = vec![T::zero(); model.weights.len()];
    let mut vb = vec![T::zero(); model.n_classes];
    let lr = T::of(config.learning_rate);
    let mu = T::of(config.momentum);
    let batch = config.batch_size.min(inputs.len());
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut epoch = 0u64;
    let mut batch_x: Vec<&[T]> = Vec::with_capacity(batch);
    let mut batch_y: Vec<usize> = Vec::with_capacity(batch);
    for iteration in 0..config.iterations {
        batch_x.clear();
        batch_y.clear();
        while batch_x.len() < batch {
            if cursor == order.len() {
                order = (0..inputs.len()).collect();
                order.shuffle(&mut stream_rng(config.seed, epoch));
                epoch += 1;
                cursor = 0;
            }
            let i = order[cursor];
            cursor += 1;
            batch_x.push(inputs[i].as_ref());
            batch_y.push(labels[i]);
        }
        let (loss, grad) = model.objective_and_gradient(&batch_x, &batch_y, config.weight_decay);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(iteration));
        }
        losses.push(loss);
        for c in (0..model.n_classes).filter(|&c| !frozen[c]) {
            let rows = c * d..(c + 1) * d;
            for ((v, w), &g) in vw[rows.clone()]
                .iter_mut()
                .zip(&mut model.weights[rows.clone()])
                .zip(&grad.weights[rows])
            {
                *v = mu * *v - lr * g;
                *w = *w + *v;
            }
            vb[c] = mu * vb[c] - lr * grad.bias[c];
            model.bias[c] = model.bias[c] + vb[c];
        }
    }
    Ok(TrainReport {
        losses,
        initial_loss,
    })
}

fn backtracking_descent<T: Scalar, X: AsRef<[T]>>(
    model: &mut SoftmaxModel<T>,
    inputs: &[X],
    labels: &[usize],
    config: &SgdConfig,
    frozen: &[bool],
) -> Result<TrainReport> {
    let d = model.dim();
    let (mut loss, mut grad) = model.objective_and_gradient(inputs, labels, config.weight_decay);
    let initial_loss = loss;
    let mut lr = config.learning_rate;
    let mut losses = Vec::with_capacity(config.iterations);
    for iteration in 0..config.iterations {
        let previous = model.clone();
        let step = T::of(lr);
        for c in (0..model.n_classes).filter(|&c| !frozen[c]) {
            for i in c * d..(c + 1) * d {
                model.weights[i] = model.weights[i] - step * grad.weights[i];
            }
            model.bias[c] = model.bias[c] - step * grad.bias[c];
        }
        let (next_loss, next_grad) =
            model.objective_and_gradient(inputs, labels, config.weight_decay);
        if !next_loss.is_finite() {
            return Err(Error::NonFiniteLoss(iteration));
        }
        if next_loss > loss {
            *model = previous;
            lr *= 0.5;
        } else {
            loss = next_loss;
            grad = next_grad;
        }
        losses.push(loss);
    }
    Ok(TrainReport {
        losses,
        initial_loss,
    })
}

/// Largest relative disagreement between `analytic` and central finite
/// differences over the parameter indices `params`:
/// `|a − n| / max(|a|, |n|, 1e-12)`.
pub fn gradient_check_against<T: Scalar, X: AsRef<[T]>>(
    model: &SoftmaxModel<T>,
    inputs: &[X],
    labels: &[usize],
    weight_decay: f64,
    epsilon: f64,
    params: &[usize],
    analytic: &Gradient<T>,
) -> f64 {
    let mut probe = model.clone();
    let eps = T::of(epsilon);
    params
        .iter()
        .map(|&i| {
            let original = probe.param(i);
            *probe.param_mut(i) = original + eps;
            let up = probe.objective(inputs, labels, weight_decay);
            *probe.param_mut(i) = original - eps;
            let down = probe.objective(inputs, labels, weight_decay);
            *probe.param_mut(i) = original;
            let numeric = (up - down) / (2.0 * epsilon);
            let a = if i < analytic.weights.len() {
                analytic.weights[i]
            } else {
                analytic.bias[i - analytic.weights.len()]
            }
            .as_f64();
            (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12)
        })
        .fold(0.0, f64::max)
}

/// Checks the analytic gradient on `n_params` parameters drawn without
/// replacement from stream 0 of `seed` (all parameters when `n_params` is
/// at least the parameter count).
pub fn gradient_check<T: Scalar, X: AsRef<[T]>>(
    model: &SoftmaxModel<T>,
    inputs: &[X],
    labels: &[usize],
    weight_decay: f64,
    epsilon: f64,
    n_params: usize,
    seed: u64,
) -> f64 {
    let total = model.n_params();
    let params: Vec<usize> = if n_params >= total {
        (0..total).collect()
    } else {
        rand::seq::index::sample(&mut stream_rng(seed, 0), total, n_params).into_vec()
    };
    let (_, analytic) = model.objective_and_gradient(inputs, labels, weight_decay);
    gradient_check_against(
        model,
        inputs,
        labels,
        weight_decay,
        epsilon,
        &params,
        &analytic,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn zero_model_is_uniform() {
        let model = SoftmaxModel::<f64>::zeros(4, 2);
        assert_eq!(model.predict_proba(&[0.3; 12]).unwrap(), vec![0.25; 4]);
        assert!(model.predict_proba(&[0.3; 11]).is_err());
    }

    #[test]
    fn closed_form_two_class_softmax() {
        let p = softmax(&[2f64.ln(), 0.0]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
        let p = softmax(&[1000.0f64, 0.0, -1000.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_iterations_leave_uniform_predictions() {
        let x = vec![vec![0.5f64; 3], vec![0.1; 3]];
        let cfg = SgdConfig {
            iterations: 0,
            ..Default::default()
        };
        let (model, report) = train_softmax(&x, &[0, 1], 3, 1, &cfg).unwrap();
        assert!(report.losses.is_empty());
        assert_eq!(model.predict_proba(&x[0]).unwrap(), vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn config_validation() {
        assert!(SgdConfig::default().validate().is_ok());
        let cfg = SgdConfig::default();
        assert_eq!(
            (cfg.learning_rate, cfg.momentum, cfg.weight_decay),
            (1e-4, 0.9, 5e-4)
        );
        assert!(SgdConfig {
            momentum: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SgdConfig {
            learning_rate: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        let x: Vec<Vec<f64>> = Vec::new();
        assert!(train_softmax(&x, &[], 2, 1, &SgdConfig::default()).is_err());
    }

    #[test]
    fn separates_red_from_blue() {
        let mut rng = stream_rng(5, 0);
        let side = 4;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..200 {
            let class = i % 2;
            let img: Vec<f32> = (0..side * side)
                .flat_map(|_| {
                    let jitter = rng.gen_range(-0.1f32..0.1);
                    if class == 0 {
                        [0.9 + jitter, 0.1, 0.1]
                    } else {
                        [0.1, 0.1, 0.9 + jitter]
                    }
                })
                .collect();
            x.push(img);
            y.push(class);
        }
        let (model, report) = train_softmax(&x, &y, 2, side, &SgdConfig::default()).unwrap();
        assert!(report.losses.last().unwrap() < &report.initial_loss);
        let correct = x
            .iter()
            .zip(&y)
            .filter(|(xi, &yi)| {
                let p = model.predict_proba(xi).unwrap();
                (p[1] > p[0]) == (yi == 1)
            })
            .count();
        assert_eq!(correct, x.len());
    }

    fn random_problem(
        seed: u64,
        k: usize,
        side: usize,
        n: usize,
    ) -> (SoftmaxModel<f64>, Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = stream_rng(seed, 99);
        let d = 3 * side * side;
        let model = SoftmaxModel::from_parts(
            k,
            side,
            (0..k * d).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            (0..k).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        )
        .unwrap();
        let x = (0..n)
            .map(|_| (0..d).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let y = (0..n).map(|_| rng.gen_range(0..k)).collect();
        (model, x, y)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (model, x, y) = random_problem(1, 3, 2, 5);
        assert!(gradient_check(&model, &x, &y, 5e-4, 1e-5, usize::MAX, 0) < 1e-4);
    }

    #[test]
    fn saturated_correct_prediction_has_zero_gradient() {
        let mut model = SoftmaxModel::<f64>::zeros(2, 1);
        model.bias = vec![60.0, 0.0];
        let x = vec![vec![0.5; 3]];
        let (_, g) = model.objective_and_gradient(&x, &[0], 0.0);
        assert!(g.weights.iter().chain(&g.bias).all(|v| v.abs() < 1e-20));
        assert!(gradient_check(&model, &x, &[0], 0.0, 1e-5, usize::MAX, 0) < 1e-4);
    }

    #[test]
    fn sign_flipped_gradient_is_caught() {
        let (model, x, y) = random_problem(2, 3, 2, 4);
        let (_, mut g) = model.objective_and_gradient(&x, &y, 5e-4);
        g.weights
            .iter_mut()
            .chain(g.bias.iter_mut())
            .for_each(|v| *v = -*v);
        let params: Vec<usize> = (0..model.n_params()).collect();
        assert!(gradient_check_against(&model, &x, &y, 5e-4, 1e-5, &params, &g) > 0.1);
    }

    #[test]
    fn backtracking_loss_never_increases() {
        let (_, x, y) = random_problem(3, 3, 2, 30);
        let cfg = SgdConfig {
            learning_rate: 5.0,
            momentum: 0.0,
            iterations: 40,
            backtracking: true,
            ..Default::default()
        };
        let (_, report) = train_softmax::<f64, _>(&x, &y, 3, 2, &cfg).unwrap();
        let mut prev = report.initial_loss;
        for &l in &report.losses {
            assert!(l <= prev);
            prev = l;
        }
        assert!(prev < report.initial_loss);
    }

    #[test]
    fn frozen_rows_do_not_move() {
        let (_, x, y) = random_problem(4, 3, 1, 12);
        let y: Vec<usize> = y.into_iter().map(|c| c % 2).collect();
        let mut model = SoftmaxModel::<f64>::zeros(3, 1);
        model.weights[6..9].copy_from_slice(&[0.25, -0.5, 1.0]);
        model.bias[2] = 0.75;
        let cfg = SgdConfig {
            learning_rate: 0.1,
            iterations: 50,
            batch_size: 4,
            ..Default::default()
        };
        continue_training(&mut model, &x, &y, &cfg, Some(&[true, true, false])).unwrap();
        assert_eq!(&model.weights[6..9], &[0.25, -0.5, 1.0]);
        assert_eq!(model.bias[2], 0.75);
        assert!(model.weights[..6].iter().any(|&w| w != 0.0));
    }

    #[test]
    fn extra_classes_and_text_round_trip() {
        let (model, _, _) = random_problem(5, 2, 1, 1);
        let wider = model.with_extra_classes(1);
        assert_eq!(wider.n_classes(), 3);
        assert_eq!(&wider.weights()[..6], model.weights());
        assert_eq!(&wider.weights()[6..], &[0.0; 3]);
        assert_eq!(
            SoftmaxModel::<f64>::from_text(&wider.to_text()).unwrap(),
            wider
        );
        let single: SoftmaxModel<f32> = SoftmaxModel::zeros(2, 1);
        assert_eq!(
            SoftmaxModel::<f32>::from_text(&single.to_text()).unwrap(),
            single
        );
    }
}
