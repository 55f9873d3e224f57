//! Classical baselines: a two-hidden-layer MLP and two small CNNs over the
//! M x K fading image. Hidden activations are tanh.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::scenario::SystemConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassicalVariant {
    Mlp,
    LightCnn,
    HeavyCnn,
}

impl ClassicalVariant {
    /// Output channels of the two convolution layers.
    pub fn channels(self) -> Option<(usize, usize)> {
        match self {
            ClassicalVariant::Mlp => None,
            ClassicalVariant::LightCnn => Some((8, 16)),
            ClassicalVariant::HeavyCnn => Some((32, 64)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalModel {
    pub variant: ClassicalVariant,
    pub num_aps: usize,
    pub num_users: usize,
    pub num_pilots: usize,
    /// MLP hidden width.
    pub hidden: usize,
    pub params: Vec<f64>,
}

/// Weight and bias slices of one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Layer {
    w: Range<usize>,
    b: Range<usize>,
}

const KERNEL: usize = 3;

fn dense(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(r, bias)| bias + w[r * n_in..(r + 1) * n_in].iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
        .collect()
}

/// Accumulates the dense-layer gradients and returns dL/dx.
fn dense_backward(w: &[f64], x: &[f64], g_out: &[f64], g_w: &mut [f64], g_b: &mut [f64]) -> Vec<f64> {
    let n_in = x.len();
    let mut g_x = vec![0.0; n_in];
    for (r, &g) in g_out.iter().enumerate() {
        g_b[r] += g;
        for j in 0..n_in {
            g_w[r * n_in + j] += g * x[j];
            g_x[j] += g * w[r * n_in + j];
        }
    }
    g_x
}

/// Same-padded 3x3 convolution; `x` is `c_in x rows x cols`.
fn conv(w: &[f64], b: &[f64], x: &[f64], c_in: usize, rows: usize, cols: usize) -> Vec<f64> {
    let c_out = b.len();
    let mut out = vec![0.0; c_out * rows * cols];
    for co in 0..c_out {
        for i in 0..rows {
            for j in 0..cols {
                let mut acc = b[co];
                for ci in 0..c_in {
                    for di in 0..KERNEL {
                        let Some(r) = (i + di).checked_sub(1).filter(|r| *r < rows) else { continue };
                        for dj in 0..KERNEL {
                            let Some(c) = (j + dj).checked_sub(1).filter(|c| *c < cols) else { continue };
                            acc += w[((co * c_in + ci) * KERNEL + di) * KERNEL + dj] * x[(ci * rows + r) * cols + c];
                        }
                    }
                }
                out[(co * rows + i) * cols + j] = acc;
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    w: &[f64],
    x: &[f64],
    g_out: &[f64],
    c_in: usize,
    rows: usize,
    cols: usize,
    g_w: &mut [f64],
    g_b: &mut [f64],
) -> Vec<f64> {
    let c_out = g_b.len();
    let mut g_x = vec![0.0; x.len()];
    for co in 0..c_out {
        for i in 0..rows {
            for j in 0..cols {
                let g = g_out[(co * rows + i) * cols + j];
                g_b[co] += g;
                for ci in 0..c_in {
                    for di in 0..KERNEL {
                        let Some(r) = (i + di).checked_sub(1).filter(|r| *r < rows) else { continue };
                        for dj in 0..KERNEL {
                            let Some(c) = (j + dj).checked_sub(1).filter(|c| *c < cols) else { continue };
                            let wi = ((co * c_in + ci) * KERNEL + di) * KERNEL + dj;
                            let xi = (ci * rows + r) * cols + c;
                            g_w[wi] += g * x[xi];
                            g_x[xi] += g * w[wi];
                        }
                    }
                }
            }
        }
    }
    g_x
}

fn tanh_backward(activated: &[f64], g: &mut [f64]) {
    for (g, a) in g.iter_mut().zip(activated) {
        *g *= 1.0 - a * a;
    }
}

impl ClassicalModel {
    pub fn zeros(config: &SystemConfig, variant: ClassicalVariant, hidden: usize) -> Result<Self> {
        if variant == ClassicalVariant::Mlp && hidden == 0 {
            return Err(Error::InvalidArgument("MLP hidden width must be positive".into()));
        }
        let mut model = ClassicalModel {
            variant,
            num_aps: config.num_aps,
            num_users: config.num_users,
            num_pilots: config.num_pilots,
            hidden,
            params: Vec::new(),
        };
        model.params = vec![0.0; model.layers().last().map_or(0, |l| l.b.end)];
        Ok(model)
    }

    /// Uniform weights in `±1/sqrt(fan_in)`, zero biases.
    pub fn new(config: &SystemConfig, variant: ClassicalVariant, hidden: usize, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(config, variant, hidden)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (layer, fan_in) in model.layers().into_iter().zip(model.fan_ins()) {
            let a = 1.0 / (fan_in as f64).sqrt();
            for v in &mut model.params[layer.w] {
                *v = rng.random_range(-a..a);
            }
        }
        Ok(model)
    }

    fn num_inputs(&self) -> usize {
        self.num_aps * self.num_users
    }

    pub fn num_logits(&self) -> usize {
        self.num_users * self.num_pilots
    }

    fn fan_ins(&self) -> Vec<usize> {
        match self.variant.channels() {
            None => vec![self.num_inputs(), self.hidden, self.hidden],
            Some((c1, c2)) => vec![KERNEL * KERNEL, c1 * KERNEL * KERNEL, c2 * self.num_inputs()],
        }
    }

    fn layers(&self) -> Vec<Layer> {
        let shapes: Vec<(usize, usize)> = match self.variant.channels() {
            None => vec![
                (self.hidden * self.num_inputs(), self.hidden),
                (self.hidden * self.hidden, self.hidden),
                (self.num_logits() * self.hidden, self.num_logits()),
            ],
            Some((c1, c2)) => vec![
                (c1 * KERNEL * KERNEL, c1),
                (c2 * c1 * KERNEL * KERNEL, c2),
                (self.num_logits() * c2 * self.num_inputs(), self.num_logits()),
            ],
        };
        let mut at = 0;
        shapes
            .into_iter()
            .map(|(w, b)| {
                let layer = Layer { w: at..at + w, b: at + w..at + w + b };
                at += w + b;
                layer
            })
            .collect()
    }

    pub fn groups(&self) -> Vec<(String, Range<usize>)> {
        self.layers()
            .into_iter()
            .enumerate()
            .flat_map(|(i, l)| [(format!("w{}", i + 1), l.w), (format!("b{}", i + 1), l.b)])
            .collect()
    }

    pub fn check(&self) -> Result<()> {
        let need = self.layers().last().map_or(0, |l| l.b.end);
        if self.params.len() != need {
            return Err(Error::Dimension(format!("{} parameters stored, architecture needs {need}", self.params.len())));
        }
        Ok(())
    }

    /// Activations of every layer, input first.
    fn activations(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.num_inputs() {
            return Err(Error::Dimension(format!("input of length {}, model expects {}", x.len(), self.num_inputs())));
        }
        let layers = self.layers();
        let p = &self.params;
        let (m, k) = (self.num_aps, self.num_users);
        let mut acts = vec![x.to_vec()];
        match self.variant.channels() {
            None => {
                for l in &layers[..2] {
                    let a = dense(&p[l.w.clone()], &p[l.b.clone()], acts.last().unwrap());
                    acts.push(a.into_iter().map(f64::tanh).collect());
                }
            }
            Some((c1, _)) => {
                for (l, c_in) in layers[..2].iter().zip([1, c1]) {
                    let a = conv(&p[l.w.clone()], &p[l.b.clone()], acts.last().unwrap(), c_in, m, k);
                    acts.push(a.into_iter().map(f64::tanh).collect());
                }
            }
        }
        let out = &layers[2];
        let logits = dense(&p[out.w.clone()], &p[out.b.clone()], acts.last().unwrap());
        acts.push(logits);
        Ok(acts)
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.activations(x)?.pop().expect("logits layer"))
    }

    pub fn value_and_grad(
        &self,
        x: &[f64],
        head: &mut dyn FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    ) -> Result<(f64, Vec<f64>)> {
        let acts = self.activations(x)?;
        let (loss, g_logits) = head(&acts[3])?;
        if g_logits.len() != acts[3].len() {
            return Err(Error::Dimension("loss gradient does not match the logits".into()));
        }
        let layers = self.layers();
        let p = &self.params;
        let mut grad = vec![0.0; p.len()];
        let (m, k) = (self.num_aps, self.num_users);

        let (gw, gb) = split(&mut grad, &layers[2]);
        let mut g = dense_backward(&p[layers[2].w.clone()], &acts[2], &g_logits, gw, gb);
        for idx in [1usize, 0] {
            tanh_backward(&acts[idx + 1], &mut g);
            let l = &layers[idx];
            let (gw, gb) = split(&mut grad, l);
            g = match self.variant.channels() {
                None => dense_backward(&p[l.w.clone()], &acts[idx], &g, gw, gb),
                Some((c1, _)) => {
                    let c_in = if idx == 0 { 1 } else { c1 };
                    conv_backward(&p[l.w.clone()], &acts[idx], &g, c_in, m, k, gw, gb)
                }
            };
        }
        Ok((loss, grad))
    }
}

fn split<'a>(grad: &'a mut [f64], layer: &Layer) -> (&'a mut [f64], &'a mut [f64]) {
    let (w, rest) = grad[layer.w.start..layer.b.end].split_at_mut(layer.w.len());
    (w, rest)
}
