//! Logistic-regression filter `g(phi) = P(prediction correct | phi)`.
//!
//! Features are standardized with training-set statistics (constant features
//! get std 1, so their standardized value is 0 and their weight stays at 0
//! under the ridge term). The objective is the mean log-loss plus
//! `lambda/2 * |w|^2`, bias unpenalized, minimized by damped Newton steps.

use std::io::{Read, Write};
use std::path::Path;

use super::features::{FeatureVector, FEATURE_COUNT};
use crate::error::{Error, Result};

pub const FILTER_MAGIC: [u8; 4] = *b"PICF";
pub const FILTER_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub lambda: f64,
    pub tolerance: f64,
    pub max_iterations: u32,
    /// Recorded in the model; training itself is deterministic.
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            lambda: 1e-4,
            tolerance: 1e-8,
            max_iterations: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterModel {
    pub weights: [f64; FEATURE_COUNT],
    pub bias: f64,
    pub means: [f64; FEATURE_COUNT],
    pub stds: [f64; FEATURE_COUNT],
    pub lambda: f64,
    pub iterations: u32,
    pub seed: u64,
    /// Final gradient norm.
    pub grad_norm: f64,
    pub samples: u64,
    /// Trained on a single class: predicts a constant.
    pub degenerate: bool,
}

impl Default for FilterModel {
    /// Zero weights and bias: predicts 0.5 everywhere.
    fn default() -> Self {
        FilterModel {
            weights: [0.0; FEATURE_COUNT],
            bias: 0.0,
            means: [0.0; FEATURE_COUNT],
            stds: [1.0; FEATURE_COUNT],
            lambda: 0.0,
            iterations: 0,
            seed: 0,
            grad_norm: 0.0,
            samples: 0,
            degenerate: false,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl FilterModel {
    fn standardize(&self, phi: &FeatureVector) -> FeatureVector {
        std::array::from_fn(|i| (phi[i] - self.means[i]) / self.stds[i])
    }

    pub fn logit(&self, phi: &FeatureVector) -> f64 {
        let x = self.standardize(phi);
        self.bias + x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn predict(&self, phi: &FeatureVector) -> f64 {
        sigmoid(self.logit(phi))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + 8 * 43);
        out.extend_from_slice(&FILTER_MAGIC);
        out.push(FILTER_VERSION);
        let meta = [
            self.lambda,
            self.iterations as f64,
            self.seed as f64,
            self.grad_norm,
            self.samples as f64,
            if self.degenerate { 1.0 } else { 0.0 },
        ];
        let vals = self
            .weights
            .iter()
            .chain([&self.bias])
            .chain(&self.means)
            .chain(&self.stds)
            .chain(&meta);
        for v in vals {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        const N: usize = 3 * FEATURE_COUNT + 1 + 6;
        if bytes.len() < 5 {
            return Err(Error::TruncatedPayload {
                expected: 5,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != FILTER_MAGIC {
            return Err(Error::BadMagic {
                expected: FILTER_MAGIC,
                found: magic,
            });
        }
        if bytes[4] != FILTER_VERSION {
            return Err(Error::UnsupportedVersion(bytes[4]));
        }
        if bytes.len() != 5 + 8 * N {
            return Err(Error::TruncatedPayload {
                expected: 5 + 8 * N,
                found: bytes.len(),
            });
        }
        let v: Vec<f64> = bytes[5..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let arr =
            |o: usize| -> [f64; FEATURE_COUNT] { v[o..o + FEATURE_COUNT].try_into().unwrap() };
        let m = &v[3 * FEATURE_COUNT + 1..];
        let model = FilterModel {
            weights: arr(0),
            bias: v[FEATURE_COUNT],
            means: arr(FEATURE_COUNT + 1),
            stds: arr(2 * FEATURE_COUNT + 1),
            lambda: m[0],
            iterations: m[1] as u32,
            seed: m[2] as u64,
            grad_norm: m[3],
            samples: m[4] as u64,
            degenerate: m[5] != 0.0,
        };
        if model.stds.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::CorruptHeader("filter stds must be positive".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

const P: usize = FEATURE_COUNT + 1;

/// Objective, gradient and Hessian at `theta` = (weights, bias).
fn evaluate(
    x: &[FeatureVector],
    y: &[bool],
    theta: &[f64; P],
    lambda: f64,
    hessian: bool,
) -> (f64, [f64; P], [[f64; P]; P]) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut g = [0.0; P];
    let mut h = [[0.0; P]; P];
    for (xi, &yi) in x.iter().zip(y) {
        let t = theta[FEATURE_COUNT] + xi.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>();
        loss += if yi { softplus(-t) } else { softplus(t) };
        let p = sigmoid(t);
        let r = p - if yi { 1.0 } else { 0.0 };
        let feat = |j: usize| if j == FEATURE_COUNT { 1.0 } else { xi[j] };
        for j in 0..P {
            g[j] += r * feat(j);
        }
        if hessian {
            let wgt = p * (1.0 - p);
            for j in 0..P {
                for k in 0..=j {
                    h[j][k] += wgt * feat(j) * feat(k);
                }
            }
        }
    }
    loss /= n;
    for j in 0..P {
        g[j] /= n;
        if j < FEATURE_COUNT {
            loss += 0.5 * lambda * theta[j] * theta[j];
            g[j] += lambda * theta[j];
        }
        if hessian {
            for k in 0..=j {
                h[j][k] /= n;
                h[k][j] = h[j][k];
            }
            if j < FEATURE_COUNT {
                h[j][j] += lambda;
            }
        }
    }
    (loss, g, h)
}

/// Solves `h d = g` by Cholesky with a small jitter fallback.
fn solve(h: &[[f64; P]; P], g: &[f64; P]) -> [f64; P] {
    let mut jitter = 0.0;
    loop {
        let mut l = [[0.0; P]; P];
        let mut ok = true;
        'outer: for i in 0..P {
            for j in 0..=i {
                let mut s = h[i][j] + if i == j { jitter } else { 0.0 };
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    if s <= 0.0 {
                        ok = false;
                        break 'outer;
                    }
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        if ok {
            let mut z = [0.0; P];
            for i in 0..P {
                z[i] = (g[i] - (0..i).map(|k| l[i][k] * z[k]).sum::<f64>()) / l[i][i];
            }
            let mut d = [0.0; P];
            for i in (0..P).rev() {
                d[i] = (z[i] - (i + 1..P).map(|k| l[k][i] * d[k]).sum::<f64>()) / l[i][i];
            }
            return d;
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Fits the filter on `(features, correct)` rows. Deterministic given the
/// row order.
pub fn train_filter(rows: &[(FeatureVector, bool)], opts: &TrainOptions) -> Result<FilterModel> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if let Some(i) = rows
        .iter()
        .position(|(f, _)| f.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::NonFinite { index: i });
    }
    let n = rows.len() as f64;
    let mut means = [0.0; FEATURE_COUNT];
    let mut stds = [0.0; FEATURE_COUNT];
    for j in 0..FEATURE_COUNT {
        means[j] = rows.iter().map(|r| r.0[j]).sum::<f64>() / n;
        let var = rows
            .iter()
            .map(|r| (r.0[j] - means[j]).powi(2))
            .sum::<f64>()
            / n;
        let sd = var.sqrt();
        stds[j] = if sd > 1e-12 * means[j].abs().max(1.0) {
            sd
        } else {
            1.0
        };
    }
    let positives = rows.iter().filter(|r| r.1).count();
    let mut model = FilterModel {
        means,
        stds,
        lambda: opts.lambda,
        seed: opts.seed,
        samples: rows.len() as u64,
        ..FilterModel::default()
    };
    if positives == 0 || positives == rows.len() {
        // Smoothed base rate keeps the constant prediction inside (0, 1).
        let rate = (positives as f64 + 0.5) / (n + 1.0);
        model.bias = (rate / (1.0 - rate)).ln();
        model.degenerate = true;
        return Ok(model);
    }
    let x: Vec<FeatureVector> = rows.iter().map(|r| model.standardize(&r.0)).collect();
    let y: Vec<bool> = rows.iter().map(|r| r.1).collect();
    let mut theta = [0.0; P];
    let rate = positives as f64 / n;
    theta[FEATURE_COUNT] = (rate / (1.0 - rate)).ln();
    let mut iterations = 0;
    let (mut loss, mut g, mut h) = evaluate(&x, &y, &theta, opts.lambda, true);
    while norm(&g) > opts.tolerance && iterations < opts.max_iterations {
        let d = solve(&h, &g);
        let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-12 {
            let cand: [f64; P] = std::array::from_fn(|j| theta[j] - step * d[j]);
            let (l2, _, _) = evaluate(&x, &y, &cand, opts.lambda, false);
            if l2 <= loss - 1e-4 * step * slope {
                theta = cand;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }
        (loss, g, h) = evaluate(&x, &y, &theta, opts.lambda, true);
    }
    model.weights.copy_from_slice(&theta[..FEATURE_COUNT]);
    model.bias = theta[FEATURE_COUNT];
    model.iterations = iterations;
    model.grad_norm = norm(&g);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixture(n: usize, seed: u64, noise: f64) -> Vec<(FeatureVector, bool)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let true_w: FeatureVector = std::array::from_fn(|j| (j as f64 - 5.5) * 0.3);
        (0..n)
            .map(|_| {
                let f: FeatureVector = std::array::from_fn(|j| {
                    rng.random_range(-2.0..2.0) * (j + 1) as f64 + j as f64
                });
                let t: f64 = f.iter().zip(&true_w).map(|(a, b)| a * b / 4.0).sum::<f64>();
                let y = t + noise * rng.random_range(-3.0..3.0) > 0.0;
                (f, y)
            })
            .collect()
    }

    fn mean_loss(m: &FilterModel, rows: &[(FeatureVector, bool)]) -> f64 {
        rows.iter()
            .map(|(f, y)| {
                let p = m.predict(f);
                -if *y { p.ln() } else { (1.0 - p).ln() }
            })
            .sum::<f64>()
            / rows.len() as f64
    }

    #[test]
    fn zero_model_is_half() {
        assert_eq!(FilterModel::default().predict(&[3.0; FEATURE_COUNT]), 0.5);
    }

    #[test]
    fn hand_computed_sigmoid() {
        let mut m = FilterModel::default();
        for j in 0..FEATURE_COUNT {
            m.weights[j] = 0.1 * (j as f64 - 6.0);
            m.means[j] = 0.5 * j as f64;
            m.stds[j] = 1.0 + 0.25 * j as f64;
        }
        m.bias = -0.3;
        let phi: FeatureVector = std::array::from_fn(|j| (j * j) as f64 / 7.0);
        let mut t = -0.3;
        for j in 0..FEATURE_COUNT {
            t += 0.1 * (j as f64 - 6.0) * (phi[j] - 0.5 * j as f64) / (1.0 + 0.25 * j as f64);
        }
        let want = 1.0 / (1.0 + (-t).exp());
        assert!((m.predict(&phi) - want).abs() < 1e-9);
    }

    #[test]
    fn monotone_in_positive_weight_feature() {
        let mut m = FilterModel::default();
        m.weights[3] = 0.7;
        let mut phi = [0.0; FEATURE_COUNT];
        let mut prev = 0.0;
        for k in 0..20 {
            phi[3] = k as f64 - 10.0;
            let p = m.predict(&phi);
            assert!(p > prev);
            prev = p;
        }
    }

    #[test]
    fn separable_set_is_fit_exactly() {
        let rows = fixture(60, 1, 0.0);
        let m = train_filter(&rows, &TrainOptions::default()).unwrap();
        let acc = rows
            .iter()
            .filter(|(f, y)| (m.predict(f) >= 0.5) == *y)
            .count();
        assert_eq!(acc, rows.len());
        assert!(!m.degenerate);
    }

    #[test]
    fn optimum_beats_zero_weights() {
        let rows = fixture(200, 2, 1.0);
        let m = train_filter(&rows, &TrainOptions::default()).unwrap();
        assert!(m.grad_norm <= 1e-8, "{}", m.grad_norm);
        let zero = FilterModel {
            means: m.means,
            stds: m.stds,
            ..FilterModel::default()
        };
        assert!(mean_loss(&m, &rows) <= mean_loss(&zero, &rows));
    }

    /// Plain fixed-step gradient descent on the same objective.
    fn gradient_descent(rows: &[(FeatureVector, bool)], lambda: f64) -> FilterModel {
        let n = rows.len() as f64;
        let mut means = [0.0; FEATURE_COUNT];
        let mut stds = [0.0; FEATURE_COUNT];
        for j in 0..FEATURE_COUNT {
            means[j] = rows.iter().map(|r| r.0[j]).sum::<f64>() / n;
            stds[j] = (rows
                .iter()
                .map(|r| (r.0[j] - means[j]).powi(2))
                .sum::<f64>()
                / n)
                .sqrt();
        }
        let xs: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                (0..FEATURE_COUNT)
                    .map(|j| (r.0[j] - means[j]) / stds[j])
                    .collect()
            })
            .collect();
        let mut w = vec![0.0; FEATURE_COUNT];
        let mut b = 0.0;
        for _ in 0..200_000 {
            let mut gw = [0.0; FEATURE_COUNT];
            let mut gb = 0.0;
            for (x, r) in xs.iter().zip(rows) {
                let z: f64 = b + x.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
                let e = 1.0 / (1.0 + (-z).exp()) - if r.1 { 1.0 } else { 0.0 };
                for j in 0..FEATURE_COUNT {
                    gw[j] += e * x[j] / n;
                }
                gb += e / n;
            }
            for j in 0..FEATURE_COUNT {
                w[j] -= 0.5 * (gw[j] + lambda * w[j]);
            }
            b -= 0.5 * gb;
        }
        FilterModel {
            weights: w.try_into().unwrap(),
            bias: b,
            means,
            stds,
            ..FilterModel::default()
        }
    }

    #[test]
    fn matches_gradient_descent_reference() {
        let rows = fixture(50, 3, 2.0);
        let lambda = 0.05;
        let opts = TrainOptions {
            lambda,
            ..TrainOptions::default()
        };
        let m = train_filter(&rows, &opts).unwrap();
        let r = gradient_descent(&rows, lambda);
        for (f, _) in &rows {
            assert!((m.predict(f) - r.predict(f)).abs() < 1e-4);
        }
    }

    #[test]
    fn single_class_is_constant() {
        let rows: Vec<(FeatureVector, bool)> = fixture(20, 4, 1.0)
            .into_iter()
            .map(|(f, _)| (f, true))
            .collect();
        let m = train_filter(&rows, &TrainOptions::default()).unwrap();
        assert!(m.degenerate);
        let p = m.predict(&rows[0].0);
        assert!(p > 0.9 && p < 1.0);
        assert_eq!(p, m.predict(&rows[5].0));
    }

    #[test]
    fn constant_feature_keeps_unit_std() {
        let mut rows = fixture(80, 5, 1.0);
        for r in &mut rows {
            r.0[4] = 1.0;
        }
        let m = train_filter(&rows, &TrainOptions::default()).unwrap();
        assert_eq!(m.stds[4], 1.0);
        assert!(m.weights[4].abs() < 1e-12);
    }

    #[test]
    fn file_round_trip() {
        let rows = fixture(40, 6, 1.0);
        let m = train_filter(
            &rows,
            &TrainOptions {
                seed: 77,
                ..TrainOptions::default()
            },
        )
        .unwrap();
        let back = FilterModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back, m);
        let mut bytes = m.to_bytes();
        bytes.pop();
        assert!(matches!(
            FilterModel::from_bytes(&bytes),
            Err(Error::TruncatedPayload { .. })
        ));
        bytes[0] = b'Z';
        assert!(matches!(
            FilterModel::from_bytes(&bytes),
            Err(Error::BadMagic { .. })
        ));
        assert!(train_filter(&[], &TrainOptions::default()).is_err());
    }
}
