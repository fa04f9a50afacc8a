//! Mean–variance estimation head.
//!
//! Two shared `tanh` layers feed two scalar linear heads: one for the mean
//! and one for the log-variance of a Gaussian over the normalized target.
//!
//! ```text
//! h1     = tanh(x  · W1 + b1)        W1: input_dim x hidden_dim
//! h2     = tanh(h1 · W2 + b2)        W2: hidden_dim x hidden_dim
//! mu     = h2 · w_mu + b_mu
//! logvar = clamp(h2 · w_lv + b_lv, -10, 10)
//! ```
//!
//! Weight matrices are stored input-major (`[in][out]`) in one flat buffer
//! whose tensor order is given by [`MveHeadParams::tensors`].

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::dataset::{EmbeddingStore, NormalizationStats};
use crate::math;
use crate::rng::SplitMix64;

/// `sqrt(2 / pi)`: E|X - mu| / sigma for a Gaussian X.
pub const SQRT_2_OVER_PI: f64 =
    core::f64::consts::FRAC_2_SQRT_PI * core::f64::consts::FRAC_1_SQRT_2;

pub const LOGVAR_MIN: f64 = -10.0;
pub const LOGVAR_MAX: f64 = 10.0;

pub const DEFAULT_HIDDEN_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HeadError {
    #[error("dimensions must be positive")]
    ZeroDim,
    #[error("embedding has length {got}, head expects {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("forward pass produced a non-finite value")]
    NonFiniteForward,
    #[error("empty batch")]
    EmptyBatch,
    #[error("batch has {inputs} inputs but {targets} targets")]
    BatchMismatch { inputs: usize, targets: usize },
    #[error("unknown sample id {0:?}")]
    UnknownId(String),
    #[error("parameter buffer has {got} values, layout needs {expected}")]
    BadParamCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum LossMode {
    /// Mean absolute error on the mean head; the log-variance head gets no gradient.
    L1,
    /// Gaussian negative log-likelihood on both heads.
    Gnll,
}

/// Denormalized prediction for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Prediction {
    pub mu: f64,
    pub sigma: f64,
    pub expected_abs_error: f64,
}

impl Prediction {
    /// Builds a prediction from a mean and a positive standard deviation in years.
    pub fn from_mu_sigma(mu: f64, sigma: f64) -> Self {
        Self {
            mu,
            sigma,
            expected_abs_error: SQRT_2_OVER_PI * sigma,
        }
    }
}

/// Named tensor inside the flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub range: Range<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    input: usize,
    hidden: usize,
}

impl Layout {
    fn w1(&self) -> Range<usize> {
        0..self.input * self.hidden
    }
    fn b1(&self) -> Range<usize> {
        let s = self.w1().end;
        s..s + self.hidden
    }
    fn w2(&self) -> Range<usize> {
        let s = self.b1().end;
        s..s + self.hidden * self.hidden
    }
    fn b2(&self) -> Range<usize> {
        let s = self.w2().end;
        s..s + self.hidden
    }
    fn w_mu(&self) -> Range<usize> {
        let s = self.b2().end;
        s..s + self.hidden
    }
    fn b_mu(&self) -> usize {
        self.w_mu().end
    }
    fn w_lv(&self) -> Range<usize> {
        let s = self.b_mu() + 1;
        s..s + self.hidden
    }
    fn b_lv(&self) -> usize {
        self.w_lv().end
    }
    fn len(&self) -> usize {
        self.b_lv() + 1
    }
}

/// Parameters of the shared-trunk head. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct MveHeadParams {
    layout: Layout,
    values: Vec<f64>,
}

/// Reusable activations for one sample.
#[derive(Debug, Clone)]
struct Scratch {
    x: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    d2: Vec<f64>,
    d1: Vec<f64>,
}

impl Scratch {
    fn new(layout: Layout) -> Self {
        Self {
            x: vec![0.0; layout.input],
            h1: vec![0.0; layout.hidden],
            h2: vec![0.0; layout.hidden],
            d2: vec![0.0; layout.hidden],
            d1: vec![0.0; layout.hidden],
        }
    }
}

/// Per-sample GNLL in normalized units: `0.5 * (logvar + r^2 / exp(logvar))`.
pub fn gnll_term(residual: f64, logvar: f64) -> f64 {
    0.5 * (logvar + residual * residual * math::exp(-logvar))
}

/// Derivative of the per-sample GNLL with respect to the variance `s2`.
pub fn gnll_dvariance(residual: f64, variance: f64) -> f64 {
    0.5 * (1.0 / variance - residual * residual / (variance * variance))
}

fn clamp_logvar(raw: f64) -> f64 {
    raw.clamp(LOGVAR_MIN, LOGVAR_MAX)
}

impl MveHeadParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Result<Self, HeadError> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(HeadError::ZeroDim);
        }
        let layout = Layout {
            input: input_dim,
            hidden: hidden_dim,
        };
        Ok(Self {
            layout,
            values: vec![0.0; layout.len()],
        })
    }

    /// Deterministic initialization.
    ///
    /// Weights are drawn in tensor order from `SplitMix64::new(seed)`,
    /// uniform in `±sqrt(3 / fan_in)` (unit-variance LeCun rule). All biases,
    /// including the log-variance bias, start at zero, so the initial
    /// normalized sigma is 1.
    pub fn init(input_dim: usize, hidden_dim: usize, seed: u64) -> Result<Self, HeadError> {
        let mut params = Self::zeros(input_dim, hidden_dim)?;
        let mut rng = SplitMix64::new(seed);
        let l = params.layout;
        for (range, fan_in) in [
            (l.w1(), l.input),
            (l.w2(), l.hidden),
            (l.w_mu(), l.hidden),
            (l.w_lv(), l.hidden),
        ] {
            let bound = math::sqrt(3.0 / fan_in as f64);
            for w in &mut params.values[range] {
                *w = rng.uniform(-bound, bound);
            }
        }
        Ok(params)
    }

    pub fn from_values(
        input_dim: usize,
        hidden_dim: usize,
        values: Vec<f64>,
    ) -> Result<Self, HeadError> {
        let mut params = Self::zeros(input_dim, hidden_dim)?;
        if values.len() != params.values.len() {
            return Err(HeadError::BadParamCount {
                expected: params.values.len(),
                got: values.len(),
            });
        }
        params.values = values;
        Ok(params)
    }

    pub fn input_dim(&self) -> usize {
        self.layout.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.layout.hidden
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Named tensors in storage order.
    pub fn tensors(&self) -> Vec<TensorSpec> {
        let l = self.layout;
        vec![
            TensorSpec { name: "trunk.0.weight", shape: vec![l.input, l.hidden], range: l.w1() },
            TensorSpec { name: "trunk.0.bias", shape: vec![l.hidden], range: l.b1() },
            TensorSpec { name: "trunk.1.weight", shape: vec![l.hidden, l.hidden], range: l.w2() },
            TensorSpec { name: "trunk.1.bias", shape: vec![l.hidden], range: l.b2() },
            TensorSpec { name: "mu_head.weight", shape: vec![l.hidden], range: l.w_mu() },
            TensorSpec { name: "mu_head.bias", shape: vec![1], range: l.b_mu()..l.b_mu() + 1 },
            TensorSpec { name: "logvar_head.weight", shape: vec![l.hidden], range: l.w_lv() },
            TensorSpec { name: "logvar_head.bias", shape: vec![1], range: l.b_lv()..l.b_lv() + 1 },
        ]
    }

    /// Flat-buffer range of the log-variance head (weights then bias).
    pub fn logvar_head_range(&self) -> Range<usize> {
        self.layout.w_lv().start..self.layout.b_lv() + 1
    }

    /// Flat-buffer range of the two shared trunk layers.
    pub fn trunk_range(&self) -> Range<usize> {
        0..self.layout.b2().end
    }

    fn check_input(&self, embedding: &[f32]) -> Result<(), HeadError> {
        if embedding.len() != self.layout.input {
            return Err(HeadError::DimMismatch {
                expected: self.layout.input,
                got: embedding.len(),
            });
        }
        if embedding.iter().any(|v| !v.is_finite()) {
            return Err(HeadError::NonFiniteInput);
        }
        Ok(())
    }

    /// Runs the trunk and heads; returns `(mu, raw_logvar)` in normalized units.
    fn run(&self, embedding: &[f32], s: &mut Scratch) -> (f64, f64) {
        let l = self.layout;
        let v = &self.values;
        for (xi, &e) in s.x.iter_mut().zip(embedding) {
            *xi = e as f64;
        }
        s.h1.copy_from_slice(&v[l.b1()]);
        let w1 = &v[l.w1()];
        for (j, &xj) in s.x.iter().enumerate() {
            math::axpy(xj, &w1[j * l.hidden..(j + 1) * l.hidden], &mut s.h1);
        }
        for h in &mut s.h1 {
            *h = math::tanh(*h);
        }
        s.h2.copy_from_slice(&v[l.b2()]);
        let w2 = &v[l.w2()];
        for (j, &hj) in s.h1.iter().enumerate() {
            math::axpy(hj, &w2[j * l.hidden..(j + 1) * l.hidden], &mut s.h2);
        }
        for h in &mut s.h2 {
            *h = math::tanh(*h);
        }
        let mu = math::dot(&s.h2, &v[l.w_mu()]) + v[l.b_mu()];
        let raw_lv = math::dot(&s.h2, &v[l.w_lv()]) + v[l.b_lv()];
        (mu, raw_lv)
    }

    /// `(mu, clamped logvar)` in normalized target units.
    pub fn forward_normalized(&self, embedding: &[f32]) -> Result<(f64, f64), HeadError> {
        self.check_input(embedding)?;
        let mut s = Scratch::new(self.layout);
        let (mu, raw_lv) = self.run(embedding, &mut s);
        if !(mu.is_finite() && raw_lv.is_finite()) {
            return Err(HeadError::NonFiniteForward);
        }
        Ok((mu, clamp_logvar(raw_lv)))
    }

    pub fn forward(
        &self,
        embedding: &[f32],
        stats: &NormalizationStats,
    ) -> Result<Prediction, HeadError> {
        let (mu, logvar) = self.forward_normalized(embedding)?;
        Ok(Self::denormalize(mu, logvar, stats))
    }

    fn denormalize(mu: f64, logvar: f64, stats: &NormalizationStats) -> Prediction {
        let sigma = math::exp(0.5 * logvar) * stats.target_std;
        Prediction::from_mu_sigma(stats.denormalize(mu), sigma)
    }

    /// Order-preserving predictions for `ids`.
    pub fn predict_batch<S: AsRef<str>>(
        &self,
        store: &EmbeddingStore,
        ids: &[S],
        stats: &NormalizationStats,
    ) -> Result<Vec<Prediction>, HeadError> {
        let mut s = Scratch::new(self.layout);
        ids.iter()
            .map(|id| {
                let row = store
                    .get(id.as_ref())
                    .ok_or_else(|| HeadError::UnknownId(id.as_ref().into()))?;
                self.check_input(row)?;
                let (mu, raw_lv) = self.run(row, &mut s);
                if !(mu.is_finite() && raw_lv.is_finite()) {
                    return Err(HeadError::NonFiniteForward);
                }
                Ok(Self::denormalize(mu, clamp_logvar(raw_lv), stats))
            })
            .collect()
    }

    /// Mean loss over the batch, without gradients.
    pub fn loss(
        &self,
        inputs: &[&[f32]],
        targets: &[f64],
        mode: LossMode,
    ) -> Result<f64, HeadError> {
        self.loss_impl(inputs, targets, mode, None)
    }

    /// Mean loss over the batch and its exact gradient.
    ///
    /// Targets are normalized. GNLL is `(1/2N) Σ (logvar_i + r_i² / exp(logvar_i))`;
    /// L1 is `(1/N) Σ |r_i|`. In L1 mode the log-variance head gradient is
    /// exactly zero. Samples are accumulated in batch order.
    pub fn loss_and_gradients(
        &self,
        inputs: &[&[f32]],
        targets: &[f64],
        mode: LossMode,
    ) -> Result<(f64, MveHeadParams), HeadError> {
        let mut grad = Self {
            layout: self.layout,
            values: vec![0.0; self.values.len()],
        };
        let loss = self.loss_impl(inputs, targets, mode, Some(&mut grad))?;
        Ok((loss, grad))
    }

    fn loss_impl(
        &self,
        inputs: &[&[f32]],
        targets: &[f64],
        mode: LossMode,
        mut grad: Option<&mut MveHeadParams>,
    ) -> Result<f64, HeadError> {
        if inputs.is_empty() {
            return Err(HeadError::EmptyBatch);
        }
        if inputs.len() != targets.len() {
            return Err(HeadError::BatchMismatch {
                inputs: inputs.len(),
                targets: targets.len(),
            });
        }
        let l = self.layout;
        let n = inputs.len() as f64;
        let mut s = Scratch::new(l);
        let mut total = 0.0;
        for (&x, &y) in inputs.iter().zip(targets) {
            self.check_input(x)?;
            let (mu, raw_lv) = self.run(x, &mut s);
            if !(mu.is_finite() && raw_lv.is_finite()) {
                return Err(HeadError::NonFiniteForward);
            }
            let r = y - mu;
            let (sample_loss, d_mu, d_lv) = match mode {
                LossMode::L1 => {
                    let sign = if r > 0.0 {
                        1.0
                    } else if r < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    (r.abs(), -sign / n, 0.0)
                }
                LossMode::Gnll => {
                    let lv = clamp_logvar(raw_lv);
                    let inv_var = math::exp(-lv);
                    let d_lv = if (LOGVAR_MIN..=LOGVAR_MAX).contains(&raw_lv) {
                        0.5 * (1.0 - r * r * inv_var) / n
                    } else {
                        0.0
                    };
                    (gnll_term(r, lv), -r * inv_var / n, d_lv)
                }
            };
            if !sample_loss.is_finite() {
                return Err(HeadError::NonFiniteForward);
            }
            total += sample_loss;
            if let Some(g) = grad.as_deref_mut() {
                self.backward(&mut s, d_mu, d_lv, g);
            }
        }
        Ok(total / n)
    }

    fn backward(&self, s: &mut Scratch, d_mu: f64, d_lv: f64, g: &mut MveHeadParams) {
        let l = self.layout;
        let v = &self.values;
        let gv = &mut g.values;

        math::axpy(d_mu, &s.h2, &mut gv[l.w_mu()]);
        gv[l.b_mu()] += d_mu;
        if d_lv != 0.0 {
            math::axpy(d_lv, &s.h2, &mut gv[l.w_lv()]);
            gv[l.b_lv()] += d_lv;
        }

        let w_mu = &v[l.w_mu()];
        let w_lv = &v[l.w_lv()];
        for k in 0..l.hidden {
            let h = s.h2[k];
            s.d2[k] = (d_mu * w_mu[k] + d_lv * w_lv[k]) * (1.0 - h * h);
        }

        let w2 = &v[l.w2()];
        let gw2 = &mut gv[l.w2()];
        for j in 0..l.hidden {
            let row = j * l.hidden..(j + 1) * l.hidden;
            math::axpy(s.h1[j], &s.d2, &mut gw2[row.clone()]);
            let h = s.h1[j];
            s.d1[j] = math::dot(&w2[row], &s.d2) * (1.0 - h * h);
        }
        math::axpy(1.0, &s.d2, &mut gv[l.b2()]);

        let gw1 = &mut gv[l.w1()];
        for (j, &xj) in s.x.iter().enumerate() {
            if xj != 0.0 {
                math::axpy(xj, &s.d1, &mut gw1[j * l.hidden..(j + 1) * l.hidden]);
            }
        }
        math::axpy(1.0, &s.d1, &mut gv[l.b1()]);
    }
}
