//! Bundled synthetic classification tasks.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Dataset, Tensor};
use crate::rng::SeedTree;

/// A generator for one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum TaskSpec {
    /// Isotropic Gaussian clusters in 2-D with centers on a circle of radius 3.
    Blobs {
        samples: usize,
        #[serde(default = "three")]
        classes: usize,
        #[serde(default = "one")]
        spread: f64,
    },
    /// Two interleaved half circles.
    Moons {
        samples: usize,
        #[serde(default = "moon_noise")]
        noise: f64,
    },
    /// Noisy, shifted 8x8 glyphs of the digits 0-9.
    Digits {
        samples: usize,
        #[serde(default = "digit_noise")]
        noise: f64,
        /// `[8, 8, 1]` images when false, `[64]` vectors when true.
        #[serde(default)]
        flat: bool,
    },
}

fn three() -> usize {
    3
}
fn one() -> f64 {
    1.0
}
fn moon_noise() -> f64 {
    0.2
}
fn digit_noise() -> f64 {
    0.25
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::Blobs { .. } => "blobs",
            TaskSpec::Moons { .. } => "moons",
            TaskSpec::Digits { .. } => "digits",
        }
    }

    pub fn input_shape(&self) -> Vec<usize> {
        match self {
            TaskSpec::Blobs { .. } | TaskSpec::Moons { .. } => vec![2],
            TaskSpec::Digits { flat: true, .. } => vec![64],
            TaskSpec::Digits { flat: false, .. } => vec![8, 8, 1],
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            TaskSpec::Blobs { classes, .. } => *classes,
            TaskSpec::Moons { .. } => 2,
            TaskSpec::Digits { .. } => 10,
        }
    }

    /// Looks up a task by name with default parameters.
    pub fn builtin(name: &str) -> Option<TaskSpec> {
        Some(match name {
            "blobs" => TaskSpec::Blobs { samples: 600, classes: 3, spread: 1.0 },
            "moons" => TaskSpec::Moons { samples: 600, noise: 0.2 },
            "digits" => TaskSpec::Digits { samples: 800, noise: 0.25, flat: false },
            "digits_flat" => TaskSpec::Digits { samples: 800, noise: 0.25, flat: true },
            _ => return None,
        })
    }

    pub fn generate(&self, seed: SeedTree) -> Result<Dataset> {
        match *self {
            TaskSpec::Blobs { samples, classes, spread } => blobs(samples, classes, spread, seed),
            TaskSpec::Moons { samples, noise } => moons(samples, noise, seed),
            TaskSpec::Digits { samples, noise, flat } => digits(samples, noise, flat, seed),
        }
    }
}

fn check(samples: usize, classes: usize) -> Result<()> {
    if classes < 2 || samples < 2 * classes {
        return Err(Error::Config(format!("task needs >= 2 classes and >= 2 samples per class, got {samples} samples / {classes} classes")));
    }
    Ok(())
}

fn gaussian(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd.max(0.0)).expect("finite standard deviation")
}

/// Labels cycle through the classes so every class has `samples / classes` rows.
pub fn blobs(samples: usize, classes: usize, spread: f64, seed: SeedTree) -> Result<Dataset> {
    check(samples, classes)?;
    let mut rng = seed.child("blobs").rng();
    let noise = gaussian(spread);
    let mut x = Vec::with_capacity(samples * 2);
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let c = i % classes;
        let angle = std::f64::consts::TAU * c as f64 / classes as f64;
        x.push(3.0 * angle.cos() + noise.sample(&mut rng));
        x.push(3.0 * angle.sin() + noise.sample(&mut rng));
        labels.push(c);
    }
    Dataset::from_labels(Tensor::new(vec![samples, 2], x)?, &labels, classes)
}

pub fn moons(samples: usize, noise: f64, seed: SeedTree) -> Result<Dataset> {
    check(samples, 2)?;
    let mut rng = seed.child("moons").rng();
    let jitter = gaussian(noise);
    let mut x = Vec::with_capacity(samples * 2);
    let mut labels = Vec::with_capacity(samples);
    for i in 0..samples {
        let c = i % 2;
        let t = rng.random_range(0.0..std::f64::consts::PI);
        let (px, py) = if c == 0 { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
        x.push(px + jitter.sample(&mut rng));
        x.push(py + jitter.sample(&mut rng));
        labels.push(c);
    }
    Dataset::from_labels(Tensor::new(vec![samples, 2], x)?, &labels, 2)
}

// 5x7 bitmaps, one row per string, '#' = ink.
const GLYPHS: [[&str; 7]; 10] = [
    [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."],
    ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."],
    [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"],
    ["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."],
    ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."],
    ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."],
    ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."],
    ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."],
    [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."],
    [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."],
];

/// Glyphs are placed at a random offset inside the 8x8 canvas, then blurred by
/// additive Gaussian noise and clamped to `[0, 1]`.
pub fn digits(samples: usize, noise: f64, flat: bool, seed: SeedTree) -> Result<Dataset> {
    check(samples, 10)?;
    let mut rng = seed.child("digits").rng();
    let jitter = gaussian(noise);
    let mut x = vec![0.0; samples * 64];
    let mut labels = Vec::with_capacity(samples);
    for (i, img) in x.chunks_mut(64).enumerate() {
        let c = i % 10;
        let (dy, dx) = (rng.random_range(0..=1usize), rng.random_range(0..=3usize));
        for (r, line) in GLYPHS[c].iter().enumerate() {
            for (col, ch) in line.bytes().enumerate() {
                if ch == b'#' {
                    img[(r + dy) * 8 + col + dx] = 1.0;
                }
            }
        }
        for v in img.iter_mut() {
            *v = (*v + jitter.sample(&mut rng)).clamp(0.0, 1.0);
        }
        labels.push(c);
    }
    let shape = if flat { vec![samples, 64] } else { vec![samples, 8, 8, 1] };
    Dataset::from_labels(Tensor::new(shape, x)?, &labels, 10)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_balance() {
        let seed = SeedTree::new(3);
        for name in ["blobs", "moons", "digits", "digits_flat"] {
            let task = TaskSpec::builtin(name).unwrap();
            let data = task.generate(seed).unwrap();
            assert_eq!(data.input_shape(), task.input_shape().as_slice());
            assert_eq!(data.classes(), task.classes());
            let mut counts = vec![0usize; data.classes()];
            for i in 0..data.len() {
                counts[crate::nn::loss::argmax(data.y().row(i)).unwrap()] += 1;
            }
            assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let task = TaskSpec::builtin("digits").unwrap();
        assert_eq!(task.generate(SeedTree::new(1)).unwrap(), task.generate(SeedTree::new(1)).unwrap());
        assert_ne!(task.generate(SeedTree::new(1)).unwrap(), task.generate(SeedTree::new(2)).unwrap());
    }

    #[test]
    fn digit_pixels_stay_in_unit_range() {
        let data = digits(40, 0.5, true, SeedTree::new(9)).unwrap();
        let (lo, hi) = data.range();
        assert!(lo >= 0.0 && hi <= 1.0);
    }
}
