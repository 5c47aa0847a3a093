//! Dense ReLU networks with hand-written reverse-mode gradients, and Adam.

use rand::Rng;

use crate::scalar::Real;

/// Fully connected network: ReLU on hidden layers, identity on the output.
/// Parameters live in one flat vector, layer by layer, weights (row-major
/// `out × in`) before biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    sizes: Vec<usize>,
    params: Vec<T>,
}

/// Per-layer activations recorded by [`Mlp::forward_trace`]; `acts[0]` is the input.
#[derive(Clone, Debug)]
pub struct Trace<T> {
    acts: Vec<Vec<T>>,
}

impl<T> Trace<T> {
    pub fn output(&self) -> &[T] {
        self.acts.last().expect("non-empty trace")
    }

    /// Post-activation values of the hidden layers.
    pub fn hidden(&self) -> &[Vec<T>] {
        &self.acts[1..self.acts.len() - 1]
    }
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

impl<T: Real> Mlp<T> {
    /// Weights and biases uniform in `±1/√fan_in`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "invalid layer sizes");
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] * w[1] + w[1]) {
                params.push(T::lit(rng.random_range(-bound..bound)));
            }
        }
        Self {
            sizes: sizes.to_vec(),
            params,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        self.forward_trace(x).acts.pop().unwrap()
    }

    pub fn forward_trace(&self, x: &[T]) -> Trace<T> {
        assert_eq!(x.len(), self.sizes[0], "input dimension mismatch");
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_vec());
        let mut off = 0;
        let last = self.sizes.len() - 2;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[off..off + n_in * n_out];
            let bias = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let input = &acts[l];
            let out: Vec<T> = (0..n_out)
                .map(|o| {
                    let z = dot(&weights[o * n_in..(o + 1) * n_in], input) + bias[o];
                    if l < last {
                        z.max(T::zero())
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(out);
            off += n_in * n_out + n_out;
        }
        Trace { acts }
    }

    /// Accumulates `∂L/∂params` into `grad` given `∂L/∂output`; returns `∂L/∂input`.
    pub fn backward(&self, trace: &Trace<T>, grad_out: &[T], grad: &mut [T]) -> Vec<T> {
        assert_eq!(grad.len(), self.params.len());
        self.backprop(trace, grad_out, Some(grad))
    }

    /// `∂L/∂input` only.
    pub fn backward_input(&self, trace: &Trace<T>, grad_out: &[T]) -> Vec<T> {
        self.backprop(trace, grad_out, None)
    }

    fn backprop(&self, trace: &Trace<T>, grad_out: &[T], mut grad: Option<&mut [T]>) -> Vec<T> {
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for w in self.sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut delta = grad_out.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            if l < layers - 1 {
                for (d, a) in delta.iter_mut().zip(&trace.acts[l + 1]) {
                    if *a <= T::zero() {
                        *d = T::zero();
                    }
                }
            }
            let input = &trace.acts[l];
            let mut next = vec![T::zero(); n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d == T::zero() {
                    continue;
                }
                let row = off + o * n_in;
                let weights = &self.params[row..row + n_in];
                for (nx, w) in next.iter_mut().zip(weights) {
                    *nx += d * *w;
                }
                if let Some(g) = grad.as_deref_mut() {
                    for (g, x) in g[row..row + n_in].iter_mut().zip(input) {
                        *g += d * *x;
                    }
                    g[off + n_in * n_out + o] += d;
                }
            }
            delta = next;
        }
        delta
    }

    /// `self ← τ·source + (1 − τ)·self`.
    pub fn polyak_update(&mut self, source: &Self, tau: T) {
        assert_eq!(self.sizes, source.sizes);
        let keep = T::one() - tau;
        for (t, s) in self.params.iter_mut().zip(&source.params) {
            *t = tau * *s + keep * *t;
        }
    }
}

#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    pub fn new(num_params: usize, lr: T) -> Self {
        Self {
            lr,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            m: vec![T::zero(); num_params],
            v: vec![T::zero(); num_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        self.t += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}
