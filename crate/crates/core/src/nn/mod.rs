//! Small feedforward networks with hand-written reverse-mode gradients.
//!
//! A [`Network`] is a ReLU trunk followed by either a single linear head or a
//! dueling pair of value and advantage heads. Outputs are laid out
//! action-major: element `a * atoms + i` belongs to action `a`, atom `i`.
//! Scalar-valued networks use `atoms = 1`.

mod adam;
mod checkpoint;
mod layer;

use ndarray::{Array2, ArrayView2};
use thiserror::Error;

use crate::rng::Rng;

pub use adam::Adam;
pub use checkpoint::{load_network, read_network, save_network, write_network};
pub use layer::{Linear, Param};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("input has {got} columns, network expects {expected}")]
    Shape { expected: usize, got: usize },
    #[error("backward called without a cached forward pass")]
    NoForward,
    #[error("architectures differ")]
    ArchitectureMismatch,
    #[error("invalid network spec: {0}")]
    Spec(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Identity,
    Tanh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub inputs: usize,
    pub hidden: Vec<usize>,
    pub actions: usize,
    /// Atoms per action; 1 for scalar outputs.
    pub atoms: usize,
    pub dueling: bool,
    pub noisy: bool,
    pub sigma0: f64,
    pub output: OutputActivation,
}

impl NetworkSpec {
    /// Plain scalar-output network with ReLU hidden layers.
    pub fn mlp(inputs: usize, hidden: &[usize], outputs: usize) -> Self {
        Self {
            inputs,
            hidden: hidden.to_vec(),
            actions: outputs,
            atoms: 1,
            dueling: false,
            noisy: false,
            sigma0: 0.5,
            output: OutputActivation::Identity,
        }
    }

    pub fn outputs(&self) -> usize {
        self.actions * self.atoms
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.inputs == 0 || self.actions == 0 || self.atoms == 0 {
            return Err(NnError::Spec("sizes must be positive".into()));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(NnError::Spec("hidden widths must be positive".into()));
        }
        if self.dueling && self.hidden.is_empty() {
            return Err(NnError::Spec("dueling heads need a shared hidden layer".into()));
        }
        if !(self.sigma0 >= 0.0) {
            return Err(NnError::Spec(format!("sigma0 must be >= 0, got {}", self.sigma0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Head {
    Single(Linear),
    Dueling { value: Linear, advantage: Linear },
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Cache {
    /// Input to every trunk layer, then the shared features.
    inputs: Vec<Array2<f64>>,
    /// Post-activation output, kept only for tanh.
    output: Option<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    trunk: Vec<Linear>,
    head: Head,
    cache: Option<Cache>,
}

impl Network {
    pub fn new(spec: NetworkSpec, rng: &mut Rng) -> Result<Self, NnError> {
        spec.validate()?;
        let make = |i: usize, o: usize, rng: &mut Rng| {
            if spec.noisy {
                Linear::noisy(i, o, spec.sigma0, rng)
            } else {
                Linear::dense(i, o, rng)
            }
        };
        let mut trunk = Vec::with_capacity(spec.hidden.len());
        let mut width = spec.inputs;
        for &h in &spec.hidden {
            trunk.push(make(width, h, rng));
            width = h;
        }
        let head = if spec.dueling {
            Head::Dueling {
                value: make(width, spec.atoms, rng),
                advantage: make(width, spec.outputs(), rng),
            }
        } else {
            Head::Single(make(width, spec.outputs(), rng))
        };
        Ok(Self {
            spec,
            trunk,
            head,
            cache: None,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    fn layers(&self) -> Vec<&Linear> {
        let mut out: Vec<&Linear> = self.trunk.iter().collect();
        match &self.head {
            Head::Single(l) => out.push(l),
            Head::Dueling { value, advantage } => {
                out.push(value);
                out.push(advantage);
            }
        }
        out
    }

    fn layers_mut(&mut self) -> Vec<&mut Linear> {
        let mut out: Vec<&mut Linear> = self.trunk.iter_mut().collect();
        match &mut self.head {
            Head::Single(l) => out.push(l),
            Head::Dueling { value, advantage } => {
                out.push(value);
                out.push(advantage);
            }
        }
        out
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<(), NnError> {
        if x.ncols() != self.spec.inputs {
            return Err(NnError::Shape {
                expected: self.spec.inputs,
                got: x.ncols(),
            });
        }
        Ok(())
    }

    fn run(&self, x: ArrayView2<f64>, mut cache: Option<&mut Cache>) -> Array2<f64> {
        let mut h = x.to_owned();
        for layer in &self.trunk {
            let z = layer.apply(h.view());
            let next = z.mapv(|v| v.max(0.0));
            if let Some(c) = cache.as_deref_mut() {
                c.inputs.push(h);
            }
            h = next;
        }
        let out = match &self.head {
            Head::Single(l) => l.apply(h.view()),
            Head::Dueling { value, advantage } => {
                let v = value.apply(h.view());
                let a = advantage.apply(h.view());
                dueling_combine(v.view(), a.view(), self.spec.actions)
            }
        };
        if let Some(c) = cache.as_deref_mut() {
            c.inputs.push(h);
        }
        match self.spec.output {
            OutputActivation::Identity => out,
            OutputActivation::Tanh => {
                let y = out.mapv(f64::tanh);
                if let Some(c) = cache {
                    c.output = Some(y.clone());
                }
                y
            }
        }
    }

    /// Forward pass that caches activations for [`Network::backward`].
    pub fn forward(&mut self, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        self.check_input(&x)?;
        let mut cache = Cache::default();
        let y = self.run(x, Some(&mut cache));
        self.cache = Some(cache);
        Ok(y)
    }

    /// Forward pass without caching.
    pub fn infer(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        self.check_input(&x)?;
        Ok(self.run(x, None))
    }

    /// Single-row convenience wrapper around [`Network::infer`].
    pub fn infer_one(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        Ok(self.infer(view)?.into_raw_vec_and_offset().0)
    }

    /// Accumulate parameter gradients for the cached forward pass given the
    /// loss gradient `dy` with respect to the output; returns the gradient
    /// with respect to the input. Consumes the cache.
    pub fn backward(&mut self, dy: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        let cache = self.cache.take().ok_or(NnError::NoForward)?;
        let mut dy = dy.to_owned();
        if let Some(y) = &cache.output {
            dy = &dy * &y.mapv(|t| 1.0 - t * t);
        }
        let mut inputs = cache.inputs;
        let features = inputs.pop().expect("features cached");
        let mut dh = match &mut self.head {
            Head::Single(l) => l.backward(features.view(), dy.view()),
            Head::Dueling { value, advantage } => {
                let (dv, da) = dueling_backward(dy.view(), self.spec.actions);
                let dh_v = value.backward(features.view(), dv.view());
                let dh_a = advantage.backward(features.view(), da.view());
                dh_v + dh_a
            }
        };
        let mut post = features;
        for (layer, input) in self.trunk.iter_mut().zip(inputs.into_iter()).rev() {
            // ReLU derivative: the cached post-activation is positive exactly
            // where the pre-activation was.
            dh.zip_mut_with(&post, |g, &h| {
                if h <= 0.0 {
                    *g = 0.0;
                }
            });
            dh = layer.backward(input.view(), dh.view());
            post = input;
        }
        Ok(dh)
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.grad.fill(0.0);
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers().into_iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers_mut()
            .into_iter()
            .flat_map(|l| l.params_mut())
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    pub fn sample_noise(&mut self, rng: &mut Rng) {
        for l in self.layers_mut() {
            l.sample_noise(rng);
        }
    }

    pub fn clear_noise(&mut self) {
        for l in self.layers_mut() {
            l.clear_noise();
        }
    }

    pub fn is_noisy(&self) -> bool {
        self.spec.noisy
    }

    pub fn noise_active(&self) -> bool {
        self.layers().iter().any(|l| l.noise_active())
    }

    /// Hard copy of every parameter from `other`.
    pub fn copy_from(&mut self, other: &Network) -> Result<(), NnError> {
        self.soft_update(other, 1.0)
    }

    /// `θ ← τ θ_other + (1 - τ) θ`. `τ = 1` copies exactly.
    pub fn soft_update(&mut self, other: &Network, tau: f64) -> Result<(), NnError> {
        if self.spec != other.spec {
            return Err(NnError::ArchitectureMismatch);
        }
        for (dst, src) in self.params_mut().into_iter().zip(other.params()) {
            if tau == 1.0 {
                dst.value.assign(&src.value);
            } else {
                dst.value.zip_mut_with(&src.value, |d, &s| *d = tau * s + (1.0 - tau) * *d);
            }
        }
        Ok(())
    }
}

/// `Q(a, i) = V(i) + A(a, i) - mean_a A(a, i)` per row.
///
/// `value` has `atoms` columns and `advantage` has `actions * atoms`.
pub fn dueling_combine(
    value: ArrayView2<f64>,
    advantage: ArrayView2<f64>,
    actions: usize,
) -> Array2<f64> {
    let atoms = value.ncols();
    let mut out = advantage.to_owned();
    for (mut row, v) in out.outer_iter_mut().zip(value.outer_iter()) {
        for i in 0..atoms {
            let mean = (0..actions).map(|a| row[a * atoms + i]).sum::<f64>() / actions as f64;
            for a in 0..actions {
                row[a * atoms + i] = v[i] + (row[a * atoms + i] - mean);
            }
        }
    }
    out
}

fn dueling_backward(dq: ArrayView2<f64>, actions: usize) -> (Array2<f64>, Array2<f64>) {
    let atoms = dq.ncols() / actions;
    let mut dv = Array2::zeros((dq.nrows(), atoms));
    let mut da = dq.to_owned();
    for ((mut dv_row, mut da_row), dq_row) in dv
        .outer_iter_mut()
        .zip(da.outer_iter_mut())
        .zip(dq.outer_iter())
    {
        for i in 0..atoms {
            let s: f64 = (0..actions).map(|a| dq_row[a * atoms + i]).sum();
            dv_row[i] = s;
            let mean = s / actions as f64;
            for a in 0..actions {
                da_row[a * atoms + i] -= mean;
            }
        }
    }
    (dv, da)
}

/// Per-action softmax over atoms with max subtraction. Input rows hold
/// `actions * atoms` logits; the output has the same layout.
pub fn distribution_head(logits: ArrayView2<f64>, atoms: usize) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.outer_iter_mut() {
        for chunk in row
            .as_slice_mut()
            .expect("owned rows are contiguous")
            .chunks_mut(atoms)
        {
            let max = chunk.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in chunk.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in chunk.iter_mut() {
                *v /= sum;
            }
        }
    }
    out
}

/// Largest relative discrepancy between analytic and central-difference
/// parameter gradients. `loss` maps the network output to the scalar loss
/// and its gradient with respect to the output. Noise is held at its current
/// sample. Relative errors use `max(|a|, |n|, 1e-6)` as denominator.
pub fn gradient_check<F>(
    net: &mut Network,
    input: ArrayView2<f64>,
    eps: f64,
    loss: F,
) -> Result<f64, NnError>
where
    F: Fn(&Array2<f64>) -> (f64, Array2<f64>),
{
    const FLOOR: f64 = 1e-6;
    net.zero_grad();
    let out = net.forward(input)?;
    let (_, dy) = loss(&out);
    net.backward(dy.view())?;
    let analytic: Vec<Array2<f64>> = net.params().iter().map(|p| p.grad.clone()).collect();

    let mut worst: f64 = 0.0;
    for (k, grad) in analytic.iter().enumerate() {
        for idx in 0..grad.len() {
            let (r, c) = (idx / grad.ncols(), idx % grad.ncols());
            let original = net.params()[k].value[[r, c]];
            net.params_mut()[k].value[[r, c]] = original + eps;
            let plus = loss(&net.infer(input)?).0;
            net.params_mut()[k].value[[r, c]] = original - eps;
            let minus = loss(&net.infer(input)?).0;
            net.params_mut()[k].value[[r, c]] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = grad[[r, c]];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(rel);
        }
    }
    net.zero_grad();
    Ok(worst)
}

/// Mean squared error over all elements and its output gradient.
pub fn mse_loss(pred: &Array2<f64>, target: &Array2<f64>) -> (f64, Array2<f64>) {
    let n = pred.len() as f64;
    let diff = pred - target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    (loss, diff.mapv(|d| 2.0 * d / n))
}

/// Row-wise sum of an `actions * atoms` layout collapsed to expectations
/// under `support`.
pub fn expected_values(probs: ArrayView2<f64>, support: &[f64]) -> Array2<f64> {
    let atoms = support.len();
    let actions = probs.ncols() / atoms;
    let mut out = Array2::zeros((probs.nrows(), actions));
    for (mut o, p) in out.outer_iter_mut().zip(probs.outer_iter()) {
        for a in 0..actions {
            o[a] = (0..atoms).map(|i| p[a * atoms + i] * support[i]).sum();
        }
    }
    out
}

/// Stack equally sized rows into a matrix.
pub fn stack_rows<'a, I>(rows: I, width: usize) -> Array2<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut data = Vec::new();
    let mut n = 0;
    for r in rows {
        debug_assert_eq!(r.len(), width);
        data.extend_from_slice(r);
        n += 1;
    }
    Array2::from_shape_vec((n, width), data).expect("rows have equal width")
}

#[cfg(test)]
mod tests;
