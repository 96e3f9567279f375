//! Feedforward stochastic policy: a shared two-layer tanh trunk with
//! operator, object, and value heads, with hand-derived reverse-mode
//! gradients (checked against finite differences in the trainer tests).

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{EncodingLayout, PolicyOutput};
use crate::error::PolicyError;
use crate::policy::{check_layout, Policy, PolicyDescriptor};

pub const HIDDEN: usize = 128;
const CHECKPOINT_VERSION: u32 = 1;

/// MLP policy: trunk `input -> 128 -> 128` (tanh) feeding softmax heads
/// over lifted operator names and objects, plus a scalar value head.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpPolicy {
    pub layout_hash: String,
    pub input_width: usize,
    pub hidden: usize,
    pub n_ops: usize,
    pub n_objs: usize,
    /// Flat parameter vector; see [`MlpPolicy::offsets`] for the layout.
    pub params: Vec<f64>,
}

/// Parameter block offsets within [`MlpPolicy::params`], row-major
/// (weight[i][j] maps input j to output i).
#[derive(Debug, Clone, Copy)]
pub struct Offsets {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub w_op: usize,
    pub b_op: usize,
    pub w_obj: usize,
    pub b_obj: usize,
    pub w_v: usize,
    pub b_v: usize,
    pub total: usize,
}

/// Cached forward-pass activations for one observation.
#[derive(Debug, Clone)]
pub struct Forward {
    pub input: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub op_logits: Vec<f64>,
    pub obj_logits: Vec<f64>,
    pub op_probs: Vec<f64>,
    pub obj_probs: Vec<f64>,
    pub value: f64,
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

impl MlpPolicy {
    pub fn offsets(&self) -> Offsets {
        offsets(self.input_width, self.hidden, self.n_ops, self.n_objs)
    }

    /// Zero-initialized policy: uniform heads, value 0.
    pub fn zeros(layout: &EncodingLayout) -> Self {
        let (input_width, n_ops, n_objs) = dims(layout);
        let total = offsets(input_width, HIDDEN, n_ops, n_objs).total;
        MlpPolicy {
            layout_hash: layout.hash(),
            input_width,
            hidden: HIDDEN,
            n_ops,
            n_objs,
            params: vec![0.0; total],
        }
    }

    /// Seeded scaled-uniform (Xavier-style) initialization.
    pub fn init(layout: &EncodingLayout, seed: u64) -> Self {
        let mut p = Self::zeros(layout);
        let o = p.offsets();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |params: &mut [f64], start: usize, rows: usize, cols: usize| {
            let a = (6.0 / (rows + cols) as f64).sqrt();
            for w in &mut params[start..start + rows * cols] {
                *w = rng.gen_range(-a..a);
            }
        };
        let (iw, h, no, nb) = (p.input_width, p.hidden, p.n_ops, p.n_objs);
        fill(&mut p.params, o.w1, h, iw);
        fill(&mut p.params, o.w2, h, h);
        fill(&mut p.params, o.w_op, no, h);
        fill(&mut p.params, o.w_obj, nb, h);
        fill(&mut p.params, o.w_v, 1, h);
        p
    }

    pub fn forward(&self, input: &[f64]) -> Forward {
        let o = self.offsets();
        let h1 = affine_tanh(&self.params, o.w1, o.b1, input, self.hidden);
        let h2 = affine_tanh(&self.params, o.w2, o.b2, &h1, self.hidden);
        let op_logits = affine(&self.params, o.w_op, o.b_op, &h2, self.n_ops);
        let obj_logits = affine(&self.params, o.w_obj, o.b_obj, &h2, self.n_objs);
        let value = affine(&self.params, o.w_v, o.b_v, &h2, 1)[0];
        Forward {
            input: input.to_vec(),
            op_probs: softmax(&op_logits),
            obj_probs: softmax(&obj_logits),
            h1,
            h2,
            op_logits,
            obj_logits,
            value,
        }
    }

    /// Accumulates parameter gradients into `grads` given upstream
    /// gradients on the head logits and the value output.
    pub fn backward(
        &self,
        fwd: &Forward,
        g_op_logits: &[f64],
        g_obj_logits: &[f64],
        g_value: f64,
        grads: &mut [f64],
    ) {
        let o = self.offsets();
        let h = self.hidden;
        // Head weights and gradient into h2.
        let mut g_h2 = vec![0.0; h];
        accumulate_head(
            &self.params, grads, o.w_op, o.b_op, g_op_logits, &fwd.h2, &mut g_h2,
        );
        accumulate_head(
            &self.params, grads, o.w_obj, o.b_obj, g_obj_logits, &fwd.h2, &mut g_h2,
        );
        accumulate_head(
            &self.params, grads, o.w_v, o.b_v, &[g_value], &fwd.h2, &mut g_h2,
        );
        // Trunk layer 2.
        let g_pre2: Vec<f64> = g_h2
            .iter()
            .zip(&fwd.h2)
            .map(|(g, a)| g * (1.0 - a * a))
            .collect();
        let mut g_h1 = vec![0.0; h];
        accumulate_head(
            &self.params, grads, o.w2, o.b2, &g_pre2, &fwd.h1, &mut g_h1,
        );
        // Trunk layer 1.
        let g_pre1: Vec<f64> = g_h1
            .iter()
            .zip(&fwd.h1)
            .map(|(g, a)| g * (1.0 - a * a))
            .collect();
        let mut sink = vec![0.0; fwd.input.len()];
        accumulate_head(
            &self.params, grads, o.w1, o.b1, &g_pre1, &fwd.input, &mut sink,
        );
    }

    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        let file = Checkpoint { version: CHECKPOINT_VERSION, policy: self.clone() };
        let json = serde_json::to_string(&file)
            .map_err(|e| PolicyError::BadCheckpoint(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| PolicyError::BadCheckpoint(e.to_string()))
    }

    /// Loads a checkpoint and verifies it against the layout it will serve.
    pub fn load(path: &Path, layout: &EncodingLayout) -> Result<Self, PolicyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PolicyError::BadCheckpoint(e.to_string()))?;
        let file: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| PolicyError::BadCheckpoint(e.to_string()))?;
        if file.version != CHECKPOINT_VERSION {
            return Err(PolicyError::BadCheckpoint(format!(
                "unsupported checkpoint version {}",
                file.version
            )));
        }
        let p = file.policy;
        if p.layout_hash != layout.hash() {
            return Err(PolicyError::LayoutMismatch {
                expected: p.layout_hash,
                found: layout.hash(),
            });
        }
        let (iw, no, nb) = dims(layout);
        let total = offsets(iw, p.hidden, no, nb).total;
        if p.input_width != iw || p.n_ops != no || p.n_objs != nb || p.params.len() != total {
            return Err(PolicyError::BadCheckpoint("shape mismatch".into()));
        }
        if p.params.iter().any(|w| !w.is_finite()) {
            return Err(PolicyError::BadCheckpoint("non-finite weights".into()));
        }
        Ok(p)
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    policy: MlpPolicy,
}

fn dims(layout: &EncodingLayout) -> (usize, usize, usize) {
    (
        layout.observation_width,
        layout.op_name_index.len(),
        layout.object_index.len(),
    )
}

fn offsets(input: usize, hidden: usize, n_ops: usize, n_objs: usize) -> Offsets {
    let w1 = 0;
    let b1 = w1 + hidden * input;
    let w2 = b1 + hidden;
    let b2 = w2 + hidden * hidden;
    let w_op = b2 + hidden;
    let b_op = w_op + n_ops * hidden;
    let w_obj = b_op + n_ops;
    let b_obj = w_obj + n_objs * hidden;
    let w_v = b_obj + n_objs;
    let b_v = w_v + hidden;
    Offsets { w1, b1, w2, b2, w_op, b_op, w_obj, b_obj, w_v, b_v, total: b_v + 1 }
}

fn affine(params: &[f64], w: usize, b: usize, input: &[f64], rows: usize) -> Vec<f64> {
    let cols = input.len();
    (0..rows)
        .map(|i| {
            params[b + i]
                + params[w + i * cols..w + (i + 1) * cols]
                    .iter()
                    .zip(input)
                    .map(|(a, x)| a * x)
                    .sum::<f64>()
        })
        .collect()
}

fn affine_tanh(params: &[f64], w: usize, b: usize, input: &[f64], rows: usize) -> Vec<f64> {
    affine(params, w, b, input, rows)
        .into_iter()
        .map(f64::tanh)
        .collect()
}

/// Accumulates dL/dW += g ⊗ input, dL/db += g, and dL/dinput += Wᵀ g for
/// one affine layer.
fn accumulate_head(
    params: &[f64],
    grads: &mut [f64],
    w: usize,
    b: usize,
    g_out: &[f64],
    input: &[f64],
    g_input: &mut [f64],
) {
    let cols = input.len();
    for (i, &g) in g_out.iter().enumerate() {
        grads[b + i] += g;
        let row = w + i * cols;
        for j in 0..cols {
            grads[row + j] += g * input[j];
            g_input[j] += params[row + j] * g;
        }
    }
}

impl Policy for MlpPolicy {
    fn descriptor(&self) -> PolicyDescriptor {
        PolicyDescriptor { name: "mlp".into(), layout_hash: self.layout_hash.clone() }
    }

    fn evaluate(
        &self,
        observation: &[f64],
        layout: &EncodingLayout,
    ) -> Result<(PolicyOutput, f64), PolicyError> {
        check_layout(&self.descriptor(), observation, layout)?;
        let fwd = self.forward(observation);
        Ok((
            PolicyOutput { op_probs: fwd.op_probs, obj_probs: fwd.obj_probs },
            fwd.value,
        ))
    }
}
