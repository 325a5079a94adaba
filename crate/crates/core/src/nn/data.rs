use std::path::Path;

use rand::seq::SliceRandom;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::SeedTree;

/// Inputs `[N, ...]` with one-hot targets `[N, C]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Tensor,
    y: Tensor,
}

impl Dataset {
    pub fn new(x: Tensor, y: Tensor) -> Result<Self> {
        if x.rows() != y.rows() || y.shape().len() != 2 {
            return Err(Error::Config(format!(
                "dataset inputs {:?} and targets {:?} disagree",
                x.shape(),
                y.shape()
            )));
        }
        Ok(Dataset { x, y })
    }

    /// Builds one-hot targets from class indices.
    pub fn from_labels(x: Tensor, labels: &[usize], classes: usize) -> Result<Self> {
        let mut y = vec![0.0; labels.len() * classes];
        for (i, &l) in labels.iter().enumerate() {
            if l >= classes {
                return Err(Error::Config(format!("label {l} >= {classes} classes")));
            }
            y[i * classes + l] = 1.0;
        }
        Dataset::new(x, Tensor::new(vec![labels.len(), classes], y)?)
    }

    /// Reads a headerless or headed numeric CSV whose last column is an
    /// integer class label. `input_shape` reshapes each feature row.
    pub fn from_csv(path: &Path, input_shape: &[usize]) -> Result<Self> {
        let ctx = || path.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_path(path)
            .map_err(|e| Error::csv(ctx(), e))?;
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::csv(ctx(), e))?;
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(|f| f.trim().parse::<f64>()).collect();
            let Ok(vals) = parsed else {
                if line == 0 {
                    continue; // header
                }
                return Err(Error::Config(format!("{}: non-numeric row {}", ctx(), line + 1)));
            };
            let (label, row) = vals.split_last().ok_or_else(|| Error::Config(format!("{}: empty row", ctx())))?;
            if *label < 0.0 || label.fract() != 0.0 {
                return Err(Error::Config(format!("{}: bad label {label} on row {}", ctx(), line + 1)));
            }
            feats.extend_from_slice(row);
            labels.push(*label as usize);
        }
        if labels.is_empty() {
            return Err(Error::Empty("dataset file has no rows"));
        }
        let classes = labels.iter().max().unwrap() + 1;
        let mut shape = vec![labels.len()];
        shape.extend_from_slice(input_shape);
        let x = Tensor::new(shape, feats)
            .map_err(|e| Error::Config(format!("{}: rows do not match input shape {input_shape:?}: {e}", ctx())))?;
        Dataset::from_labels(x, &labels, classes.max(2))
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self) -> &Tensor {
        &self.x
    }

    pub fn y(&self) -> &Tensor {
        &self.y
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.x.shape()[1..]
    }

    pub fn classes(&self) -> usize {
        self.y.shape()[1]
    }

    pub fn batch(&self, idx: &[usize]) -> (Tensor, Tensor) {
        (self.x.gather_rows(idx), self.y.gather_rows(idx))
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let (x, y) = self.batch(idx);
        Dataset { x, y }
    }

    /// Minimum and maximum over all raw input values.
    pub fn range(&self) -> (f64, f64) {
        self.x.data().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
    }

    /// Deterministic shuffled split; the first part receives `round(frac * N)` rows.
    pub fn split(&self, frac: f64, seed: SeedTree) -> (Dataset, Dataset) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut seed.rng());
        let cut = ((self.len() as f64 * frac).round() as usize).clamp(1, self.len() - 1);
        (self.subset(&idx[..cut]), self.subset(&idx[cut..]))
    }
}
