use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::rng::Rng;

/// A trainable tensor and its accumulated gradient. Biases are stored as
/// single-row matrices so every parameter has the same shape type.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
}

impl Param {
    fn new(value: Array2<f64>) -> Self {
        let grad = Array2::zeros(value.raw_dim());
        Self { value, grad }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Noise {
    w_sigma: Param,
    b_sigma: Param,
    eps_in: Array1<f64>,
    eps_out: Array1<f64>,
    active: bool,
}

/// Dense affine layer `y = x W + b`, optionally with factorised Gaussian
/// parameter noise `W = μ_w + σ_w ⊙ (ε_in ε_outᵀ)`, `b = μ_b + σ_b ⊙ ε_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    w: Param,
    b: Param,
    noise: Option<Noise>,
}

fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}

/// `sign(x)·√|x|` applied to a standard normal draw.
fn scaled_noise(n: usize, rng: &mut Rng) -> Array1<f64> {
    Array1::from_shape_simple_fn(n, || {
        let x: f64 = rng.sample(StandardNormal);
        x.signum() * x.abs().sqrt()
    })
}

impl Linear {
    pub fn dense(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Self {
            w: Param::new(uniform(inputs, outputs, bound, rng)),
            b: Param::new(uniform(1, outputs, bound, rng)),
            noise: None,
        }
    }

    pub fn noisy(inputs: usize, outputs: usize, sigma0: f64, rng: &mut Rng) -> Self {
        let mut layer = Self::dense(inputs, outputs, rng);
        let s = sigma0 / (inputs as f64).sqrt();
        layer.noise = Some(Noise {
            w_sigma: Param::new(Array2::from_elem((inputs, outputs), s)),
            b_sigma: Param::new(Array2::from_elem((1, outputs), s)),
            eps_in: Array1::zeros(inputs),
            eps_out: Array1::zeros(outputs),
            active: false,
        });
        layer
    }

    pub fn inputs(&self) -> usize {
        self.w.value.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.w.value.ncols()
    }

    pub fn is_noisy(&self) -> bool {
        self.noise.is_some()
    }

    /// Whether a noise sample is currently applied.
    pub fn noise_active(&self) -> bool {
        self.noise.as_ref().is_some_and(|n| n.active)
    }

    pub fn sample_noise(&mut self, rng: &mut Rng) {
        let (inputs, outputs) = (self.inputs(), self.outputs());
        if let Some(n) = self.noise.as_mut() {
            n.eps_in = scaled_noise(inputs, rng);
            n.eps_out = scaled_noise(outputs, rng);
            n.active = true;
        }
    }

    pub fn clear_noise(&mut self) {
        if let Some(n) = self.noise.as_mut() {
            n.eps_in.fill(0.0);
            n.eps_out.fill(0.0);
            n.active = false;
        }
    }

    /// Weight matrix and bias row in effect for the current noise sample.
    pub fn effective(&self) -> (Array2<f64>, Array2<f64>) {
        match &self.noise {
            Some(n) if n.active => {
                let outer = outer(&n.eps_in, &n.eps_out);
                let w = &self.w.value + &(&n.w_sigma.value * &outer);
                let eps_b = n.eps_out.view().insert_axis(Axis(0));
                let b = &self.b.value + &(&n.b_sigma.value * &eps_b);
                (w, b)
            }
            _ => (self.w.value.clone(), self.b.value.clone()),
        }
    }

    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        match &self.noise {
            Some(n) if n.active => {
                let (w, b) = self.effective();
                x.dot(&w) + &b
            }
            _ => x.dot(&self.w.value) + &self.b.value,
        }
    }

    /// Accumulate parameter gradients for input `x` and output gradient `dy`;
    /// returns the gradient with respect to `x`.
    pub fn backward(&mut self, x: ArrayView2<f64>, dy: ArrayView2<f64>) -> Array2<f64> {
        let dw = x.t().dot(&dy);
        let db = dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dx = match &self.noise {
            Some(n) if n.active => {
                let (w, _) = self.effective();
                dy.dot(&w.t())
            }
            _ => dy.dot(&self.w.value.t()),
        };
        if let Some(n) = self.noise.as_mut() {
            if n.active {
                let outer = outer(&n.eps_in, &n.eps_out);
                n.w_sigma.grad += &(&dw * &outer);
                let eps_b = n.eps_out.view().insert_axis(Axis(0));
                n.b_sigma.grad += &(&db * &eps_b);
            }
        }
        self.w.grad += &dw;
        self.b.grad += &db;
        dx
    }

    /// Parameters in a fixed order: `μ_w, μ_b` then `σ_w, σ_b` for noisy layers.
    pub fn params(&self) -> Vec<&Param> {
        let mut out = vec![&self.w, &self.b];
        if let Some(n) = &self.noise {
            out.push(&n.w_sigma);
            out.push(&n.b_sigma);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = vec![&mut self.w, &mut self.b];
        if let Some(n) = self.noise.as_mut() {
            out.push(&mut n.w_sigma);
            out.push(&mut n.b_sigma);
        }
        out
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let col = a.view().insert_axis(Axis(1));
    let row = b.view().insert_axis(Axis(0));
    &col * &row
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::array;

    #[test]
    fn cleared_noise_is_the_mean_map() {
        let mut rng = seeded(3);
        let mut l = Linear::noisy(3, 2, 0.5, &mut rng);
        let x = array![[0.3, -1.0, 2.0]];
        let mean = l.apply(x.view());
        l.sample_noise(&mut rng);
        assert_ne!(l.apply(x.view()), mean);
        l.clear_noise();
        assert_eq!(l.apply(x.view()), mean);
        assert_eq!(mean, x.dot(&l.w.value) + &l.b.value);
    }

    #[test]
    fn zero_sigma_ignores_noise() {
        let mut rng = seeded(4);
        let mut l = Linear::noisy(4, 3, 0.0, &mut rng);
        let x = array![[1.0, 2.0, 3.0, 4.0]];
        let a = l.apply(x.view());
        l.sample_noise(&mut rng);
        assert_eq!(l.apply(x.view()), a);
    }

    #[test]
    fn noise_is_reproducible() {
        let mut a = Linear::noisy(5, 4, 0.5, &mut seeded(9));
        let mut b = a.clone();
        a.sample_noise(&mut seeded(1));
        b.sample_noise(&mut seeded(1));
        assert_eq!(a, b);
    }

    #[test]
    fn init_bounds() {
        let mut rng = seeded(5);
        let l = Linear::noisy(16, 8, 0.5, &mut rng);
        let bound = 0.25;
        assert!(l.w.value.iter().all(|v| v.abs() <= bound));
        let n = l.noise.as_ref().unwrap();
        assert!(n.w_sigma.value.iter().all(|&s| s == 0.5 / 4.0));
    }
}
