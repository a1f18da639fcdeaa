//! Layer forward and backward passes.
//!
//! Activations are `ArrayD` in batch-major order: `(B, D)` for dense data and
//! `(B, H, W, C)` for feature maps. A training forward pass returns a
//! [`Cache`] holding whatever the matching backward pass needs.

use ndarray::{Array1, Array2, ArrayD, ArrayView2, Axis, IxDyn};
use rand::Rng as _;

use super::real::Real;
use crate::rng::Rng;

/// Gradient of the loss with respect to a layer's weight and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad<F> {
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

/// Fully connected layer, `y = x W + b` with `W` of shape `(in, out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

/// 2-D convolution, stride 1, no padding. The kernel is stored flattened as
/// `(k * k * in_channels, out_channels)`, rows ordered `(di, dj, channel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<F> {
    pub weight: Array2<F>,
    pub bias: Array1<F>,
    pub kernel: usize,
}

/// Non-overlapping max pooling: `size x size` windows with stride `size`.
/// Trailing rows and columns that do not fill a window are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool {
    pub size: usize,
}

/// Inverted dropout: at training time each unit is zeroed with probability
/// `rate` and survivors are scaled by `1 / (1 - rate)`; identity at inference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<F> {
    Dense(Dense<F>),
    Conv2d(Conv2d<F>),
    MaxPool(MaxPool),
    Relu,
    Dropout(Dropout),
    Flatten,
}

/// Saved state from a training forward pass.
#[derive(Debug, Clone)]
pub enum Cache<F> {
    Dense(Array2<F>),
    Conv {
        patches: Array2<F>,
        dims: [usize; 4],
    },
    MaxPool {
        argmax: Vec<usize>,
        dims: [usize; 4],
    },
    Relu(ArrayD<F>),
    Dropout(Option<ArrayD<F>>),
    Flatten(Vec<usize>),
}

fn dims4<F>(x: &ArrayD<F>) -> [usize; 4] {
    let s = x.shape();
    assert_eq!(s.len(), 4, "expected a (B, H, W, C) tensor, got {s:?}");
    [s[0], s[1], s[2], s[3]]
}

fn as_matrix<F: Real>(x: ArrayD<F>) -> Array2<F> {
    x.into_dimensionality().expect("expected a (B, D) matrix")
}

impl<F: Real> Dense<F> {
    pub fn forward(&self, x: ArrayView2<'_, F>) -> Array2<F> {
        let mut y = x.dot(&self.weight);
        y += &self.bias;
        y
    }

    pub fn backward(
        &self,
        x: ArrayView2<'_, F>,
        dy: ArrayView2<'_, F>,
    ) -> (Array2<F>, ParamGrad<F>) {
        (dy.dot(&self.weight.t()), self.param_grad(x, dy))
    }

    /// Parameter gradient only, for when the input gradient is not needed.
    pub fn param_grad(&self, x: ArrayView2<'_, F>, dy: ArrayView2<'_, F>) -> ParamGrad<F> {
        ParamGrad {
            weight: x.t().dot(&dy),
            bias: dy.sum_axis(Axis(0)),
        }
    }
}

impl<F: Real> Conv2d<F> {
    pub fn in_channels(&self) -> usize {
        self.weight.nrows() / (self.kernel * self.kernel)
    }

    pub fn out_channels(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dims(&self, [b, h, w, _]: [usize; 4]) -> [usize; 4] {
        [
            b,
            h + 1 - self.kernel,
            w + 1 - self.kernel,
            self.out_channels(),
        ]
    }

    /// Returns the output feature map and the im2col patch matrix.
    pub fn forward(&self, x: &ArrayD<F>) -> (ArrayD<F>, Array2<F>) {
        let dims = dims4(x);
        assert_eq!(dims[3], self.in_channels(), "conv input channel mismatch");
        let patches = im2col(x, dims, self.kernel);
        let mut y = patches.dot(&self.weight);
        y += &self.bias;
        let out = self.output_dims(dims);
        let y = y
            .into_shape_with_order(IxDyn(&out))
            .expect("gemm output is contiguous");
        (y, patches)
    }

    pub fn backward(
        &self,
        patches: &Array2<F>,
        dims: [usize; 4],
        dy: ArrayD<F>,
    ) -> (ArrayD<F>, ParamGrad<F>) {
        let dy = self.gradient_matrix(patches, dy);
        let grad = ParamGrad {
            weight: patches.t().dot(&dy),
            bias: dy.sum_axis(Axis(0)),
        };
        let dpatches = dy.dot(&self.weight.t());
        (col2im(&dpatches, dims, self.kernel), grad)
    }

    /// Parameter gradient only, for when the input gradient is not needed.
    pub fn param_grad(&self, patches: &Array2<F>, dy: ArrayD<F>) -> ParamGrad<F> {
        let dy = self.gradient_matrix(patches, dy);
        ParamGrad {
            weight: patches.t().dot(&dy),
            bias: dy.sum_axis(Axis(0)),
        }
    }

    fn gradient_matrix(&self, patches: &Array2<F>, dy: ArrayD<F>) -> Array2<F> {
        dy.as_standard_layout()
            .into_owned()
            .into_shape_with_order((patches.nrows(), self.out_channels()))
            .expect("conv gradient has the output shape")
    }
}

fn im2col<F: Real>(x: &ArrayD<F>, [b, h, w, c]: [usize; 4], k: usize) -> Array2<F> {
    let x = x.as_standard_layout();
    let src = x.as_slice().expect("standard layout");
    let (ho, wo) = (h + 1 - k, w + 1 - k);
    let width = k * k * c;
    let mut out = Vec::with_capacity(b * ho * wo * width);
    for n in 0..b {
        for i in 0..ho {
            for j in 0..wo {
                // For a fixed kernel row the k pixels are adjacent in memory.
                for di in 0..k {
                    let s = ((n * h + i + di) * w + j) * c;
                    out.extend_from_slice(&src[s..s + k * c]);
                }
            }
        }
    }
    Array2::from_shape_vec((b * ho * wo, width), out).expect("sized above")
}

fn col2im<F: Real>(cols: &Array2<F>, [b, h, w, c]: [usize; 4], k: usize) -> ArrayD<F> {
    let cols = cols.as_standard_layout();
    let src = cols.as_slice().expect("standard layout");
    let (ho, wo) = (h + 1 - k, w + 1 - k);
    let width = k * k * c;
    let mut out = vec![F::zero(); b * h * w * c];
    let mut rows = src.chunks_exact(width);
    for n in 0..b {
        for i in 0..ho {
            for j in 0..wo {
                let row = rows.next().expect("row count matches");
                for di in 0..k {
                    for dj in 0..k {
                        let d = ((n * h + i + di) * w + j + dj) * c;
                        let s = (di * k + dj) * c;
                        for (o, &v) in out[d..d + c].iter_mut().zip(&row[s..s + c]) {
                            *o += v;
                        }
                    }
                }
            }
        }
    }
    ArrayD::from_shape_vec(IxDyn(&[b, h, w, c]), out).expect("sized above")
}

impl MaxPool {
    pub fn output_dims(&self, [b, h, w, c]: [usize; 4]) -> [usize; 4] {
        [b, h / self.size, w / self.size, c]
    }

    /// Returns the pooled map and, per output element, the flat input index
    /// of the window maximum (first occurrence on ties).
    pub fn forward<F: Real>(&self, x: &ArrayD<F>) -> (ArrayD<F>, Vec<usize>) {
        let dims = dims4(x);
        let [b, h, w, c] = dims;
        let [_, ho, wo, _] = self.output_dims(dims);
        let s = self.size;
        let x = x.as_standard_layout();
        let src = x.as_slice().expect("standard layout");
        let mut out = vec![F::zero(); b * ho * wo * c];
        let mut arg = vec![0usize; out.len()];
        for n in 0..b {
            for oi in 0..ho {
                for oj in 0..wo {
                    let o = ((n * ho + oi) * wo + oj) * c;
                    let first = ((n * h + oi * s) * w + oj * s) * c;
                    out[o..o + c].copy_from_slice(&src[first..first + c]);
                    for (ch, a) in arg[o..o + c].iter_mut().enumerate() {
                        *a = first + ch;
                    }
                    for di in 0..s {
                        for dj in 0..s {
                            let base = ((n * h + oi * s + di) * w + oj * s + dj) * c;
                            for ch in 0..c {
                                let v = src[base + ch];
                                if v > out[o + ch] {
                                    out[o + ch] = v;
                                    arg[o + ch] = base + ch;
                                }
                            }
                        }
                    }
                }
            }
        }
        let y = ArrayD::from_shape_vec(IxDyn(&[b, ho, wo, c]), out).expect("sized above");
        (y, arg)
    }

    pub fn backward<F: Real>(
        &self,
        argmax: &[usize],
        dims: [usize; 4],
        dy: &ArrayD<F>,
    ) -> ArrayD<F> {
        let mut dx = vec![F::zero(); dims.iter().product()];
        for (&a, &g) in argmax.iter().zip(dy.iter()) {
            dx[a] += g;
        }
        ArrayD::from_shape_vec(IxDyn(&dims), dx).expect("sized above")
    }
}

impl Dropout {
    /// Draws a scaled keep-mask, or `None` when the rate is zero.
    pub fn sample_mask<F: Real>(&self, shape: &[usize], rng: &mut Rng) -> Option<ArrayD<F>> {
        if self.rate <= 0.0 {
            return None;
        }
        let keep = F::lit(1.0 / (1.0 - self.rate));
        // A unit is dropped when a uniform u32 falls below rate * 2^32.
        let threshold = (self.rate * 4_294_967_296.0) as u64;
        let mut bits = vec![0u32; shape.iter().product()];
        rng.fill(&mut bits[..]);
        let mask = bits
            .into_iter()
            .map(|b| {
                if u64::from(b) < threshold {
                    F::zero()
                } else {
                    keep
                }
            })
            .collect();
        Some(ArrayD::from_shape_vec(IxDyn(shape), mask).expect("mask matches shape"))
    }
}

impl<F: Real> Layer<F> {
    pub fn has_parameters(&self) -> bool {
        matches!(self, Layer::Dense(_) | Layer::Conv2d(_))
    }

    /// Inference pass; dropout is the identity.
    pub fn infer(&self, x: ArrayD<F>) -> ArrayD<F> {
        match self {
            Layer::Dense(d) => d.forward(as_matrix(x).view()).into_dyn(),
            Layer::Conv2d(c) => c.forward(&x).0,
            Layer::MaxPool(p) => p.forward(&x).0,
            Layer::Relu => x.mapv_into(|v| v.max(F::zero())),
            Layer::Dropout(_) => x,
            Layer::Flatten => flatten(x),
        }
    }

    pub fn forward_train(&self, x: ArrayD<F>, rng: &mut Rng) -> (ArrayD<F>, Cache<F>) {
        match self {
            Layer::Dense(d) => {
                let x = as_matrix(x);
                let y = d.forward(x.view()).into_dyn();
                (y, Cache::Dense(x))
            }
            Layer::Conv2d(c) => {
                let dims = dims4(&x);
                let (y, patches) = c.forward(&x);
                (y, Cache::Conv { patches, dims })
            }
            Layer::MaxPool(p) => {
                let dims = dims4(&x);
                let (y, argmax) = p.forward(&x);
                (y, Cache::MaxPool { argmax, dims })
            }
            Layer::Relu => {
                let y = x.mapv_into(|v| v.max(F::zero()));
                (y.clone(), Cache::Relu(y))
            }
            Layer::Dropout(d) => match d.sample_mask(x.shape(), rng) {
                Some(mask) => (x * &mask, Cache::Dropout(Some(mask))),
                None => (x, Cache::Dropout(None)),
            },
            Layer::Flatten => {
                let shape = x.shape().to_vec();
                (flatten(x), Cache::Flatten(shape))
            }
        }
    }

    /// Parameter gradient without the input gradient; `None` for layers
    /// without parameters.
    pub fn param_grad(&self, cache: &Cache<F>, dy: ArrayD<F>) -> Option<ParamGrad<F>> {
        match (self, cache) {
            (Layer::Dense(d), Cache::Dense(x)) => {
                Some(d.param_grad(x.view(), as_matrix(dy).view()))
            }
            (Layer::Conv2d(c), Cache::Conv { patches, .. }) => Some(c.param_grad(patches, dy)),
            _ => None,
        }
    }

    /// Returns the gradient with respect to the layer input and, for layers
    /// with parameters, the parameter gradient.
    pub fn backward(&self, cache: &Cache<F>, dy: ArrayD<F>) -> (ArrayD<F>, Option<ParamGrad<F>>) {
        match (self, cache) {
            (Layer::Dense(d), Cache::Dense(x)) => {
                let dy = as_matrix(dy);
                let (dx, g) = d.backward(x.view(), dy.view());
                (dx.into_dyn(), Some(g))
            }
            (Layer::Conv2d(c), Cache::Conv { patches, dims }) => {
                let (dx, g) = c.backward(patches, *dims, dy);
                (dx, Some(g))
            }
            (Layer::MaxPool(p), Cache::MaxPool { argmax, dims }) => {
                (p.backward(argmax, *dims, &dy), None)
            }
            (Layer::Relu, Cache::Relu(y)) => {
                let mut dx = dy;
                dx.zip_mut_with(y, |g, &out| {
                    if out <= F::zero() {
                        *g = F::zero();
                    }
                });
                (dx, None)
            }
            (Layer::Dropout(_), Cache::Dropout(mask)) => match mask {
                Some(m) => (dy * m, None),
                None => (dy, None),
            },
            (Layer::Flatten, Cache::Flatten(shape)) => (
                dy.into_shape_with_order(IxDyn(shape))
                    .expect("flatten gradient reshapes back"),
                None,
            ),
            _ => panic!("cache does not belong to this layer"),
        }
    }

    pub(crate) fn params(&self) -> Option<(&Array2<F>, &Array1<F>)> {
        match self {
            Layer::Dense(d) => Some((&d.weight, &d.bias)),
            Layer::Conv2d(c) => Some((&c.weight, &c.bias)),
            _ => None,
        }
    }

    pub(crate) fn params_mut(&mut self) -> Option<(&mut Array2<F>, &mut Array1<F>)> {
        match self {
            Layer::Dense(d) => Some((&mut d.weight, &mut d.bias)),
            Layer::Conv2d(c) => Some((&mut c.weight, &mut c.bias)),
            _ => None,
        }
    }
}

fn flatten<F: Real>(x: ArrayD<F>) -> ArrayD<F> {
    let b = x.shape()[0];
    let rest = x.len() / b.max(1);
    x.as_standard_layout()
        .into_owned()
        .into_shape_with_order(IxDyn(&[b, rest]))
        .expect("contiguous flatten")
}
