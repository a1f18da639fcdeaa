//! Synthetic dataset generators: Gaussian blobs, a hypercube-cluster
//! classification problem, and small digit-like glyph images.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayD, IxDyn};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::data::{Dataset, DatasetKind, IdxImages};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream, Rng};

/// Within-cluster standard deviation of [`make_blobs`].
pub const BLOB_STD: f64 = 1.0;
/// Minimum distance between blob centers, in units of [`BLOB_STD`].
pub const BLOB_SEPARATION: f64 = 10.0;
/// Half-width of the box blob centers are first drawn from.
const BLOB_BOX: f64 = 10.0;

/// Side length of generated glyph images.
pub const GLYPH_SIZE: usize = 28;
/// Number of distinct glyph shapes.
pub const GLYPH_CLASSES: usize = 10;

fn check_sizes(n: usize, d: usize, c: usize) -> Result<()> {
    if n == 0 || d == 0 {
        return Err(Error::config("n and d must be positive"));
    }
    if c < 2 || c > n {
        return Err(Error::config(format!(
            "need 2 <= c <= n, got c = {c}, n = {n}"
        )));
    }
    Ok(())
}

/// Class of every instance with counts as even as possible, then shuffled.
fn balanced_assignment(n: usize, groups: usize) -> Vec<usize> {
    (0..n).map(|i| i % groups).collect()
}

fn gaussian(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn blob_centers(d: usize, c: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let min_dist = BLOB_SEPARATION * BLOB_STD;
    let mut half = BLOB_BOX;
    loop {
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(c);
        let mut attempts = 0;
        while centers.len() < c && attempts < 10_000 {
            attempts += 1;
            let cand: Vec<f64> = (0..d).map(|_| rng.random_range(-half..half)).collect();
            let far = centers.iter().all(|ctr| {
                ctr.iter()
                    .zip(&cand)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    >= min_dist * min_dist
            });
            if far {
                centers.push(cand);
            }
        }
        if centers.len() == c {
            return centers;
        }
        // The box is too crowded for the required separation; widen it.
        half *= 1.5;
    }
}

/// Isotropic Gaussian clusters, one per class, with centers at least
/// `BLOB_SEPARATION` standard deviations apart.
pub fn make_blobs(n: usize, d: usize, c: usize, seed: u64) -> Result<Dataset> {
    check_sizes(n, d, c)?;
    let mut rng = rng_from_seed(derive_seed(seed, &[stream::SYNTHETIC]));
    let centers = blob_centers(d, c, &mut rng);
    let mut classes = balanced_assignment(n, c);
    classes.shuffle(&mut rng);
    let mut x = Array2::<f32>::zeros((n, d));
    for (i, &k) in classes.iter().enumerate() {
        for j in 0..d {
            x[[i, j]] = (centers[k][j] + BLOB_STD * gaussian(&mut rng)) as f32;
        }
    }
    Dataset::from_indices(x.into_dyn(), &classes, c, DatasetKind::Numerical, None)
}

/// Feature roles used by [`make_classification`] for `d` features and `c`
/// classes: `(informative, redundant)`; the rest are pure noise.
pub fn classification_layout(d: usize, c: usize) -> (usize, usize) {
    let clusters = 2 * c;
    let needed = (usize::BITS - (clusters - 1).leading_zeros()) as usize;
    let informative = needed.max(d / 2).min(d);
    let redundant = 2.min(d - informative);
    (informative, redundant)
}

/// Two Gaussian clusters per class placed on distinct vertices of a
/// hypercube in the informative subspace, each with a random covariance.
/// Redundant features are random linear combinations of the informative
/// ones; remaining features are standard normal noise.
pub fn make_classification(n: usize, d: usize, c: usize, seed: u64) -> Result<Dataset> {
    check_sizes(n, d, c)?;
    let (informative, redundant) = classification_layout(d, c);
    if informative >= usize::BITS as usize - 1 {
        return Err(Error::config("too many informative features"));
    }
    let clusters = 2 * c;
    let class_sep = 1.0;
    let mut rng = rng_from_seed(derive_seed(seed, &[stream::SYNTHETIC]));

    let vertices: Vec<usize> =
        rand::seq::index::sample(&mut rng, 1usize << informative, clusters).into_vec();
    let centroids: Vec<Vec<f64>> = vertices
        .iter()
        .map(|&v| {
            (0..informative)
                .map(|b| {
                    if v >> b & 1 == 1 {
                        class_sep
                    } else {
                        -class_sep
                    }
                })
                .collect()
        })
        .collect();
    let covariances: Vec<Vec<f64>> = (0..clusters)
        .map(|_| {
            (0..informative * informative)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let mixing: Vec<f64> = (0..informative * redundant)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();

    let mut cluster_of = balanced_assignment(n, clusters);
    cluster_of.shuffle(&mut rng);
    let classes: Vec<usize> = cluster_of.iter().map(|&k| k % c).collect();
    let mut x = Array2::<f32>::zeros((n, d));
    let mut z = vec![0.0; informative];
    let mut inf = vec![0.0; informative];
    for (i, &k) in cluster_of.iter().enumerate() {
        z.iter_mut().for_each(|v| *v = gaussian(&mut rng));
        for (j, slot) in inf.iter_mut().enumerate() {
            let a = &covariances[k];
            *slot = centroids[k][j]
                + (0..informative)
                    .map(|l| z[l] * a[l * informative + j])
                    .sum::<f64>();
        }
        for (j, &v) in inf.iter().enumerate() {
            x[[i, j]] = v as f32;
        }
        for r in 0..redundant {
            let v: f64 = (0..informative)
                .map(|l| inf[l] * mixing[l * redundant + r])
                .sum();
            x[[i, informative + r]] = v as f32;
        }
        for j in informative + redundant..d {
            x[[i, j]] = gaussian(&mut rng) as f32;
        }
    }
    Dataset::from_indices(x.into_dyn(), &classes, c, DatasetKind::Numerical, None)
}

type Stroke = Vec<(f64, f64)>;

fn arc(cx: f64, cy: f64, rx: f64, ry: f64, from: f64, to: f64) -> Stroke {
    const STEPS: usize = 16;
    (0..=STEPS)
        .map(|s| {
            let t = from + (to - from) * s as f64 / STEPS as f64;
            (cx + rx * t.cos(), cy + ry * t.sin())
        })
        .collect()
}

/// Digit-like shapes in the unit square, y pointing down.
fn glyph_strokes(class: usize) -> Vec<Stroke> {
    match class {
        0 => vec![arc(0.5, 0.5, 0.28, 0.4, 0.0, 2.0 * PI)],
        1 => vec![vec![(0.33, 0.25), (0.52, 0.1), (0.52, 0.9)]],
        2 => vec![
            arc(0.5, 0.32, 0.28, 0.22, PI, 2.0 * PI),
            vec![(0.78, 0.32), (0.2, 0.9), (0.82, 0.9)],
        ],
        3 => vec![
            arc(0.48, 0.3, 0.26, 0.2, 1.1 * PI, 2.5 * PI),
            arc(0.48, 0.7, 0.28, 0.2, 1.5 * PI, 2.9 * PI),
        ],
        4 => vec![vec![(0.66, 0.9), (0.66, 0.1), (0.18, 0.66), (0.86, 0.66)]],
        5 => vec![
            vec![(0.8, 0.1), (0.28, 0.1), (0.25, 0.45)],
            arc(0.48, 0.65, 0.27, 0.25, 1.2 * PI, 2.85 * PI),
        ],
        6 => vec![
            vec![(0.72, 0.1), (0.3, 0.6)],
            arc(0.5, 0.68, 0.22, 0.22, 0.0, 2.0 * PI),
        ],
        7 => vec![vec![(0.18, 0.1), (0.82, 0.1), (0.42, 0.9)]],
        8 => vec![
            arc(0.5, 0.29, 0.19, 0.19, 0.0, 2.0 * PI),
            arc(0.5, 0.7, 0.23, 0.21, 0.0, 2.0 * PI),
        ],
        9 => vec![
            arc(0.5, 0.32, 0.22, 0.22, 0.0, 2.0 * PI),
            vec![(0.72, 0.32), (0.62, 0.9)],
        ],
        _ => unreachable!("glyph classes are checked by the caller"),
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

/// Renders one glyph of `class` with a random affine distortion, stroke
/// width and ink intensity on a zero background.
fn render_glyph(class: usize, rng: &mut Rng, out: &mut [u8]) {
    let (box_lo, box_len) = (4.0, 20.0);
    let angle = rng.random_range(-0.2..0.2);
    let (sx, sy) = (rng.random_range(0.85..1.1), rng.random_range(0.85..1.1));
    let shear = rng.random_range(-0.15..0.15);
    let (tx, ty) = (rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
    let width = rng.random_range(1.0..2.2);
    let intensity = rng.random_range(0.75..1.0);
    let (sin, cos) = f64::sin_cos(angle);
    let transform = |(x, y): (f64, f64)| {
        let (u, v) = ((x - 0.5) * sx + shear * (y - 0.5), (y - 0.5) * sy);
        let (u, v) = (cos * u - sin * v, sin * u + cos * v);
        (
            box_lo + box_len * (u + 0.5) + tx,
            box_lo + box_len * (v + 0.5) + ty,
        )
    };
    let segments: Vec<((f64, f64), (f64, f64))> = glyph_strokes(class)
        .iter()
        .flat_map(|stroke| {
            stroke
                .windows(2)
                .map(|w| (transform(w[0]), transform(w[1])))
                .collect::<Vec<_>>()
        })
        .collect();
    for r in 0..GLYPH_SIZE {
        for c in 0..GLYPH_SIZE {
            let p = (c as f64 + 0.5, r as f64 + 0.5);
            let dist = segments
                .iter()
                .map(|&(a, b)| segment_distance(p, a, b))
                .fold(f64::INFINITY, f64::min);
            let ink = (1.0 - (dist - width / 2.0)).clamp(0.0, 1.0);
            out[r * GLYPH_SIZE + c] = (255.0 * intensity * ink).round() as u8;
        }
    }
}

/// `n` grayscale 28x28 glyph images over `c <= 10` classes, with labels.
pub fn make_glyphs(n: usize, c: usize, seed: u64) -> Result<(IdxImages, Vec<u8>)> {
    if !(2..=GLYPH_CLASSES).contains(&c) {
        return Err(Error::config(format!(
            "glyph classes must lie in [2, {GLYPH_CLASSES}], got {c}"
        )));
    }
    if n < c {
        return Err(Error::config(format!(
            "need at least one image per class, got n = {n}"
        )));
    }
    let mut rng = rng_from_seed(derive_seed(seed, &[stream::SYNTHETIC]));
    let mut classes = balanced_assignment(n, c);
    classes.shuffle(&mut rng);
    let pixels_per = GLYPH_SIZE * GLYPH_SIZE;
    let mut pixels = vec![0u8; n * pixels_per];
    for (i, &k) in classes.iter().enumerate() {
        render_glyph(
            k,
            &mut rng,
            &mut pixels[i * pixels_per..(i + 1) * pixels_per],
        );
    }
    let images = IdxImages {
        count: n,
        rows: GLYPH_SIZE,
        cols: GLYPH_SIZE,
        pixels,
    };
    Ok((images, classes.iter().map(|&k| k as u8).collect()))
}

/// [`make_glyphs`] as an image dataset with raw 0-255 intensities.
pub fn glyph_dataset(n: usize, c: usize, seed: u64) -> Result<Dataset> {
    let (images, labels) = make_glyphs(n, c, seed)?;
    let features = ArrayD::from_shape_vec(
        IxDyn(&[n, GLYPH_SIZE, GLYPH_SIZE, 1]),
        images.pixels.iter().map(|&p| p as f32).collect(),
    )
    .expect("pixel count matches shape");
    let classes: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let names = (0..c).map(|k| k.to_string()).collect();
    Dataset::from_indices(features, &classes, c, DatasetKind::Image, Some(names))
}
