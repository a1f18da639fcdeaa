//! Central finite-difference oracle for backward passes, in f64.
//!
//! Every check returns the number of compared entries, or a description of
//! the first entry whose analytic gradient disagrees with the numeric one.

use labelsift::nn::{
    softmax_cross_entropy_grad, softmax_rows, weighted_cross_entropy, Conv2d, Dense, Layer, Network,
};
use labelsift::rng::{rng_from_seed, Rng};
use ndarray::{Array1, Array2, ArrayD, IxDyn};
use rand::seq::index::sample;
use rand::Rng as _;

pub const STEP: f64 = 1e-6;
pub const REL_TOL: f64 = 1e-4;
/// Below this magnitude both gradients count as zero.
pub const ABS_FLOOR: f64 = 1e-8;

pub type Checked = Result<usize, String>;

pub fn random(shape: &[usize], rng: &mut Rng) -> ArrayD<f64> {
    ArrayD::from_shape_simple_fn(IxDyn(shape), || rng.random_range(-1.0..1.0))
}

pub fn compare(analytic: f64, numeric: f64, what: &str) -> Result<(), String> {
    let err = (analytic - numeric).abs();
    let scale = analytic.abs().max(numeric.abs());
    if err <= REL_TOL * scale || err <= ABS_FLOOR {
        Ok(())
    } else {
        Err(format!(
            "{what}: analytic {analytic:e} vs numeric {numeric:e}"
        ))
    }
}

/// Central difference of `f` with respect to element `i` of `x`.
fn numeric(x: &mut [f64], i: usize, f: &mut impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[i];
    x[i] = orig + STEP;
    let up = f(x);
    x[i] = orig - STEP;
    let down = f(x);
    x[i] = orig;
    (up - down) / (2.0 * STEP)
}

/// Scalar probe `sum(out * r)` so that `d probe / d out = r`.
fn probe(out: &ArrayD<f64>, r: &ArrayD<f64>) -> f64 {
    (out * r).sum()
}

fn with_params(layer: &Layer<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Layer<f64> {
    match layer {
        Layer::Dense(_) => Layer::Dense(Dense {
            weight: w.clone(),
            bias: b.clone(),
        }),
        Layer::Conv2d(c) => Layer::Conv2d(Conv2d {
            weight: w.clone(),
            bias: b.clone(),
            kernel: c.kernel,
        }),
        _ => unreachable!("only parametric layers are rebuilt"),
    }
}

/// Checks the input gradient and, for parametric layers, every weight and
/// bias gradient. Each forward pass replays the same random stream, so
/// dropout sees one fixed mask.
pub fn check_layer(layer: &Layer<f64>, input_shape: &[usize], seed: u64) -> Checked {
    let mut rng = rng_from_seed(seed);
    let x = random(input_shape, &mut rng);
    let forward =
        |layer: &Layer<f64>, x: ArrayD<f64>| layer.forward_train(x, &mut rng_from_seed(seed + 1));
    let (out, cache) = forward(layer, x.clone());
    let r = random(out.shape(), &mut rng);
    let (dx, pg) = layer.backward(&cache, r.clone());
    let mut checked = 0;

    let mut xs = x.iter().copied().collect::<Vec<_>>();
    let mut f = |v: &[f64]| {
        let x = ArrayD::from_shape_vec(IxDyn(input_shape), v.to_vec()).unwrap();
        probe(&forward(layer, x).0, &r)
    };
    for (i, &analytic) in dx.iter().enumerate() {
        let n = numeric(&mut xs, i, &mut f);
        compare(analytic, n, &format!("input[{i}]"))?;
        checked += 1;
    }

    if let Some(pg) = pg {
        let (w, b) = match layer {
            Layer::Dense(d) => (d.weight.clone(), d.bias.clone()),
            Layer::Conv2d(c) => (c.weight.clone(), c.bias.clone()),
            _ => return Err("parameter gradient from a layer without parameters".into()),
        };
        let mut ws: Vec<f64> = w.iter().copied().collect();
        let mut fw = |v: &[f64]| {
            let w = Array2::from_shape_vec(w.dim(), v.to_vec()).unwrap();
            probe(&forward(&with_params(layer, &w, &b), x.clone()).0, &r)
        };
        for (i, &analytic) in pg.weight.iter().enumerate() {
            let n = numeric(&mut ws, i, &mut fw);
            compare(analytic, n, &format!("weight[{i}]"))?;
            checked += 1;
        }
        let mut bs = b.to_vec();
        let mut fb = |v: &[f64]| {
            let b = Array1::from(v.to_vec());
            probe(&forward(&with_params(layer, &w, &b), x.clone()).0, &r)
        };
        for i in 0..bs.len() {
            let n = numeric(&mut bs, i, &mut fb);
            compare(pg.bias[i], n, &format!("bias[{i}]"))?;
            checked += 1;
        }
    }
    Ok(checked)
}

/// Softmax followed by weighted cross-entropy, against the fused gradient.
pub fn check_softmax_cross_entropy(seed: u64) -> Checked {
    let mut rng = rng_from_seed(seed);
    let logits: Array2<f64> = random(&[4, 3], &mut rng).into_dimensionality().unwrap();
    let targets = [0usize, 2, 1, 2];
    let weights = [0.7, 1.3, 2.0];
    let grad = softmax_cross_entropy_grad(softmax_rows(logits.view()).view(), &targets, &weights);
    let mut flat: Vec<f64> = logits.iter().copied().collect();
    let mut f = |v: &[f64]| {
        let z = Array2::from_shape_vec((4, 3), v.to_vec()).unwrap();
        weighted_cross_entropy(softmax_rows(z.view()).view(), &targets, &weights)
    };
    for (i, &analytic) in grad.iter().enumerate() {
        let n = numeric(&mut flat, i, &mut f);
        compare(analytic, n, &format!("logit[{i}]"))?;
    }
    Ok(flat.len())
}

/// Weighted cross-entropy straight from logits via log-sum-exp. Unlike the
/// training loss it has no epsilon inside the logarithm, so it stays exact
/// when random networks produce saturated probabilities.
pub fn exact_loss(logits: &Array2<f64>, targets: &[usize], weights: &[f64]) -> f64 {
    let total: f64 = logits
        .outer_iter()
        .zip(targets)
        .map(|(z, &t)| {
            let m = z.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            weights[t] * (lse - z[t])
        })
        .sum();
    total / targets.len() as f64
}

/// End-to-end check through softmax and weighted cross-entropy on a sample
/// of `samples` weights plus one bias per parametric layer.
pub fn check_network(
    net: &Network<f64>,
    input_shape: &[usize],
    classes: usize,
    samples: usize,
    seed: u64,
) -> Checked {
    let mut rng = rng_from_seed(seed);
    let x = random(input_shape, &mut rng);
    let targets: Vec<usize> = (0..input_shape[0]).map(|i| i % classes).collect();
    let weights: Vec<f64> = (0..classes).map(|c| 0.5 + c as f64 * 0.25).collect();

    let loss = |net: &Network<f64>| {
        let (logits, _) = net.forward_train(x.clone(), &mut rng_from_seed(seed + 1));
        exact_loss(&logits, &targets, &weights)
    };
    let (logits, caches) = net.forward_train(x.clone(), &mut rng_from_seed(seed + 1));
    let dlogits =
        softmax_cross_entropy_grad(softmax_rows(logits.view()).view(), &targets, &weights);
    let grads = net.backward(&caches, dlogits);

    let layers = net.layers().to_vec();
    let mut checked = 0;
    for (li, layer) in layers.iter().enumerate() {
        let Some(g) = &grads[li] else {
            if layer.has_parameters() {
                return Err(format!("layer {li} has parameters but no gradient"));
            }
            continue;
        };
        let (w, b) = match layer {
            Layer::Dense(d) => (&d.weight, &d.bias),
            Layer::Conv2d(c) => (&c.weight, &c.bias),
            _ => return Err(format!("layer {li} has a gradient but no parameters")),
        };
        let perturbed_loss = |edit: &dyn Fn(&mut Array2<f64>, &mut Array1<f64>)| {
            let mut copy = layers.clone();
            match &mut copy[li] {
                Layer::Dense(d) => edit(&mut d.weight, &mut d.bias),
                Layer::Conv2d(k) => edit(&mut k.weight, &mut k.bias),
                _ => unreachable!(),
            }
            loss(&Network::from_layers(copy))
        };
        for flat in sample(&mut rng, w.len(), samples.min(w.len())).into_vec() {
            let (r, c) = (flat / w.ncols(), flat % w.ncols());
            let up = perturbed_loss(&|w, _| w[[r, c]] += STEP);
            let down = perturbed_loss(&|w, _| w[[r, c]] -= STEP);
            let n = (up - down) / (2.0 * STEP);
            compare(g.weight[[r, c]], n, &format!("layer {li} weight[{r},{c}]"))?;
            checked += 1;
        }
        let bi = rng.random_range(0..b.len());
        let up = perturbed_loss(&|_, b| b[bi] += STEP);
        let down = perturbed_loss(&|_, b| b[bi] -= STEP);
        let n = (up - down) / (2.0 * STEP);
        compare(g.bias[bi], n, &format!("layer {li} bias[{bi}]"))?;
        checked += 1;
    }
    Ok(checked)
}
