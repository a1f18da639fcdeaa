use ndarray::{Array1, Array2, ArrayD};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::hyperparams::GridPoint;
use super::layers::{Cache, Conv2d, Dense, Dropout, Layer, MaxPool, ParamGrad};
use super::real::Real;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Convolutional stack: two 2x2 convolutions per block, 3x3 pooling.
pub const CONV_KERNEL: usize = 2;
pub const CONV_POOL: usize = 3;
pub const CONV_BLOCK_FILTERS: [usize; 2] = [48, 96];
pub const CONV_BLOCK_DROPOUT: f64 = 0.25;
pub const CONV_DENSE_UNITS: usize = 128;
pub const CONV_DENSE_LAYERS: usize = 3;
pub const CONV_DENSE_DROPOUT: f64 = 0.5;

/// Serializable description of a network's layer stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Architecture {
    Dense {
        input_dim: usize,
        depth: usize,
        units: usize,
        dropout: f64,
        classes: usize,
    },
    Conv {
        height: usize,
        width: usize,
        channels: usize,
        dense_units: usize,
        classes: usize,
    },
}

impl Architecture {
    pub fn dense(input_dim: usize, point: GridPoint, classes: usize) -> Self {
        Architecture::Dense {
            input_dim,
            depth: point.depth,
            units: point.units,
            dropout: point.dropout,
            classes,
        }
    }

    /// The fixed image architecture. Fails when the input is too small for
    /// the two pooling stages.
    pub fn conv(height: usize, width: usize, channels: usize, classes: usize) -> Result<Self> {
        let side = height.min(width);
        if conv_spatial_output(side).is_none() {
            return Err(Error::config(format!(
                "images of {height}x{width} are too small for the convolutional network; \
                 the minimum input size is {m}x{m}",
                m = min_conv_input()
            )));
        }
        Ok(Architecture::Conv {
            height,
            width,
            channels,
            dense_units: CONV_DENSE_UNITS,
            classes,
        })
    }

    pub fn classes(&self) -> usize {
        match *self {
            Architecture::Dense { classes, .. } | Architecture::Conv { classes, .. } => classes,
        }
    }

    /// Shape of one input instance.
    pub fn input_shape(&self) -> Vec<usize> {
        match *self {
            Architecture::Dense { input_dim, .. } => vec![input_dim],
            Architecture::Conv {
                height,
                width,
                channels,
                ..
            } => vec![height, width, channels],
        }
    }

    /// Builds the layer stack with freshly initialized parameters: He-uniform
    /// for layers feeding a ReLU, Glorot-uniform for the output layer, zero
    /// biases.
    pub fn build<F: Real>(&self, rng: &mut Rng) -> Network<F> {
        let mut layers = Vec::new();
        match *self {
            Architecture::Dense {
                input_dim,
                depth,
                units,
                dropout,
                classes,
            } => {
                let mut fan_in = input_dim;
                for _ in 0..depth {
                    layers.push(Layer::Dense(dense_layer(fan_in, units, Init::He, rng)));
                    layers.push(Layer::Relu);
                    if dropout > 0.0 {
                        layers.push(Layer::Dropout(Dropout { rate: dropout }));
                    }
                    fan_in = units;
                }
                layers.push(Layer::Dense(dense_layer(
                    fan_in,
                    classes,
                    Init::Glorot,
                    rng,
                )));
            }
            Architecture::Conv {
                height,
                width,
                channels,
                dense_units,
                classes,
            } => {
                let mut ch = channels;
                for filters in CONV_BLOCK_FILTERS {
                    for _ in 0..2 {
                        layers.push(Layer::Conv2d(conv_layer(ch, filters, rng)));
                        layers.push(Layer::Relu);
                        ch = filters;
                    }
                    layers.push(Layer::MaxPool(MaxPool { size: CONV_POOL }));
                    layers.push(Layer::Dropout(Dropout {
                        rate: CONV_BLOCK_DROPOUT,
                    }));
                }
                layers.push(Layer::Flatten);
                let h = conv_spatial_output(height).expect("validated at construction");
                let w = conv_spatial_output(width).expect("validated at construction");
                let mut fan_in = h * w * ch;
                for _ in 0..CONV_DENSE_LAYERS {
                    layers.push(Layer::Dense(dense_layer(
                        fan_in,
                        dense_units,
                        Init::He,
                        rng,
                    )));
                    layers.push(Layer::Relu);
                    layers.push(Layer::Dropout(Dropout {
                        rate: CONV_DENSE_DROPOUT,
                    }));
                    fan_in = dense_units;
                }
                layers.push(Layer::Dense(dense_layer(
                    fan_in,
                    classes,
                    Init::Glorot,
                    rng,
                )));
            }
        }
        Network { layers }
    }
}

/// Spatial extent after the two conv blocks, or `None` if it vanishes.
fn conv_spatial_output(side: usize) -> Option<usize> {
    let mut s = side;
    for _ in CONV_BLOCK_FILTERS {
        for _ in 0..2 {
            s = s.checked_sub(CONV_KERNEL - 1).filter(|&v| v > 0)?;
        }
        s /= CONV_POOL;
        if s == 0 {
            return None;
        }
    }
    Some(s)
}

/// Smallest square input the convolutional network accepts.
pub fn min_conv_input() -> usize {
    (1..)
        .find(|&s| conv_spatial_output(s).is_some())
        .expect("some size works")
}

enum Init {
    He,
    Glorot,
}

fn uniform<F: Real>(rows: usize, cols: usize, limit: f64, rng: &mut Rng) -> Array2<F> {
    Array2::from_shape_simple_fn((rows, cols), || F::lit(rng.random_range(-limit..limit)))
}

fn dense_layer<F: Real>(fan_in: usize, fan_out: usize, init: Init, rng: &mut Rng) -> Dense<F> {
    let limit = match init {
        Init::He => (6.0 / fan_in as f64).sqrt(),
        Init::Glorot => (6.0 / (fan_in + fan_out) as f64).sqrt(),
    };
    Dense {
        weight: uniform(fan_in, fan_out, limit, rng),
        bias: Array1::zeros(fan_out),
    }
}

fn conv_layer<F: Real>(in_ch: usize, out_ch: usize, rng: &mut Rng) -> Conv2d<F> {
    let fan_in = CONV_KERNEL * CONV_KERNEL * in_ch;
    Conv2d {
        weight: uniform(fan_in, out_ch, (6.0 / fan_in as f64).sqrt(), rng),
        bias: Array1::zeros(out_ch),
        kernel: CONV_KERNEL,
    }
}

/// A sequential stack of layers ending in class logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<F> {
    layers: Vec<Layer<F>>,
}

impl<F: Real> Network<F> {
    pub fn from_layers(layers: Vec<Layer<F>>) -> Self {
        Network { layers }
    }

    pub fn layers(&self) -> &[Layer<F>] {
        &self.layers
    }

    /// Logits for a batch, dropout disabled.
    pub fn infer(&self, x: ArrayD<F>) -> Array2<F> {
        let out = self.layers.iter().fold(x, |a, l| l.infer(a));
        out.into_dimensionality()
            .expect("network ends in a dense layer")
    }

    pub fn forward_train(&self, x: ArrayD<F>, rng: &mut Rng) -> (Array2<F>, Vec<Cache<F>>) {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut a = x;
        for layer in &self.layers {
            let (next, cache) = layer.forward_train(a, rng);
            caches.push(cache);
            a = next;
        }
        (
            a.into_dimensionality()
                .expect("network ends in a dense layer"),
            caches,
        )
    }

    /// Back-propagates `dlogits`; returns one entry per layer, `Some` for
    /// layers with parameters.
    pub fn backward(&self, caches: &[Cache<F>], dlogits: Array2<F>) -> Vec<Option<ParamGrad<F>>> {
        let mut grads = vec![None; self.layers.len()];
        let mut g = dlogits.into_dyn();
        for (i, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            if i == 0 {
                // Nothing consumes the gradient with respect to the input.
                grads[0] = layer.param_grad(cache, g);
                break;
            }
            let (dx, pg) = layer.backward(cache, g);
            grads[i] = pg;
            g = dx;
        }
        grads
    }

    pub fn sgd_step(&mut self, grads: &[Option<ParamGrad<F>>], learning_rate: F) {
        for (layer, grad) in self.layers.iter_mut().zip(grads) {
            if let (Some((w, b)), Some(g)) = (layer.params_mut(), grad) {
                w.scaled_add(-learning_rate, &g.weight);
                b.scaled_add(-learning_rate, &g.bias);
            }
        }
    }

    /// Weight and bias of every parametric layer, in order.
    pub fn parameters(&self) -> Vec<(&Array2<F>, &Array1<F>)> {
        self.layers.iter().filter_map(Layer::params).collect()
    }

    pub(crate) fn parameters_mut(&mut self) -> Vec<(&mut Array2<F>, &mut Array1<F>)> {
        self.layers
            .iter_mut()
            .filter_map(Layer::params_mut)
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters()
            .iter()
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use ndarray::IxDyn;

    /// Independent shape walk over the fixed stack: valid 2x2 convolutions
    /// shrink a side by one, 3x3 pooling with stride 3 floors the division.
    fn viable(side: i64) -> bool {
        let mut s = side;
        for _ in 0..2 {
            s -= 2;
            if s < 1 {
                return false;
            }
            s /= 3;
            if s < 1 {
                return false;
            }
        }
        true
    }

    #[test]
    fn minimum_conv_input_is_17() {
        let brute = (1..100).find(|&s| viable(s)).unwrap();
        assert_eq!(brute, 17);
        assert_eq!(min_conv_input(), 17);
        assert!(Architecture::conv(4, 4, 1, 10).is_err());
        assert!(Architecture::conv(16, 28, 1, 10).is_err());
        assert!(Architecture::conv(17, 17, 1, 10).is_ok());
    }

    #[test]
    fn conv_forward_shape() {
        let arch = Architecture::conv(28, 28, 1, 10).unwrap();
        let net: Network<f32> = arch.build(&mut rng_from_seed(0));
        let x = ArrayD::zeros(IxDyn(&[3, 28, 28, 1]));
        assert_eq!(net.infer(x).dim(), (3, 10));
    }

    #[test]
    fn dense_stack_layout() {
        let p = GridPoint {
            depth: 3,
            units: 5,
            dropout: 0.1,
        };
        let net: Network<f64> = Architecture::dense(4, p, 2).build(&mut rng_from_seed(1));
        // 3 x (dense, relu, dropout) + output
        assert_eq!(net.layers().len(), 10);
        assert_eq!(net.parameter_count(), p.parameter_count(4, 2));
        let no_drop = GridPoint { dropout: 0.0, ..p };
        let net: Network<f64> = Architecture::dense(4, no_drop, 2).build(&mut rng_from_seed(1));
        assert_eq!(net.layers().len(), 7);
    }

    #[test]
    fn he_init_within_limit() {
        let p = GridPoint {
            depth: 1,
            units: 50,
            dropout: 0.0,
        };
        let net: Network<f64> = Architecture::dense(12, p, 3).build(&mut rng_from_seed(4));
        let (w, b) = net.parameters()[0];
        let limit = (6.0f64 / 12.0).sqrt();
        assert!(w.iter().all(|v| v.abs() <= limit));
        assert!(b.iter().all(|&v| v == 0.0));
    }
}
