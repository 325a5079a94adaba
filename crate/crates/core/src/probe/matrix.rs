use std::path::Path;

use super::snapshot::{EpochSnapshot, LayerRecord};
use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const DEFAULT_EPOCHS: usize = 40;
pub const DEFAULT_MAX_LAYERS: usize = 8;
/// Loss, accuracy, data min, data max.
pub const GLOBAL_COLS: usize = 4;
/// Three 8-number summaries plus N_W, N_G, VG, DN, SA, TL.
pub const LAYER_COLS: usize = 30;

pub const NAN_SENTINEL: f64 = -999_999.0;
pub const POS_INF_SENTINEL: f64 = 999_999.0;
pub const NEG_INF_SENTINEL: f64 = -999_998.0;

/// Maps non-finite values to their sentinels.
pub fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        NAN_SENTINEL
    } else if v == f64::INFINITY {
        POS_INF_SENTINEL
    } else if v == f64::NEG_INFINITY {
        NEG_INF_SENTINEL
    } else {
        v
    }
}

/// Fixed-shape `epochs x (4 + 30 * max_layers)` summary of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    epochs: usize,
    max_layers: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn width_for(max_layers: usize) -> usize {
        GLOBAL_COLS + LAYER_COLS * max_layers
    }

    pub fn zeros(epochs: usize, max_layers: usize) -> Self {
        FeatureMatrix {
            epochs,
            max_layers,
            data: vec![0.0; epochs * Self::width_for(max_layers)],
        }
    }

    pub fn from_rows(epochs: usize, max_layers: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != epochs * Self::width_for(max_layers) {
            return Err(Error::TensorSize {
                shape: vec![epochs, Self::width_for(max_layers)],
                len: data.len(),
            });
        }
        Ok(FeatureMatrix {
            epochs,
            max_layers,
            data,
        })
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn max_layers(&self) -> usize {
        self.max_layers
    }

    pub fn width(&self) -> usize {
        Self::width_for(self.max_layers)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.epochs, self.width())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let w = self.width();
        &self.data[row * w..(row + 1) * w]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_parts(vec![self.epochs, self.width()], self.data.clone())
    }

    pub fn column_names(max_layers: usize) -> Vec<String> {
        let mut names: Vec<String> = ["LS", "AC", "DR_min", "DR_max"].map(String::from).to_vec();
        let suffixes = LayerRecord::column_names();
        for l in 1..=max_layers {
            names.extend(suffixes.iter().map(|s| format!("L{l}_{s}")));
        }
        names
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = Self::column_names(self.max_layers).join(",");
        out.push('\n');
        for r in 0..self.epochs {
            let cells: Vec<String> = self.row(r).iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(Error::Empty("trace file has no header"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < GLOBAL_COLS || !(cols.len() - GLOBAL_COLS).is_multiple_of(LAYER_COLS) {
            return Err(Error::Config(format!("trace header has {} columns", cols.len())));
        }
        let max_layers = (cols.len() - GLOBAL_COLS) / LAYER_COLS;
        if cols != Self::column_names(max_layers) {
            return Err(Error::Config("trace header does not match the feature layout".into()));
        }
        let mut data = Vec::new();
        let mut epochs = 0;
        for (i, line) in lines.enumerate() {
            let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| Error::Config(format!("trace row {}: {e}", i + 1)))?;
            if row.len() != cols.len() {
                return Err(Error::Config(format!("trace row {} has {} cells", i + 1, row.len())));
            }
            data.extend(row);
            epochs += 1;
        }
        if epochs == 0 {
            return Err(Error::Empty("trace file has no rows"));
        }
        Self::from_rows(epochs, max_layers, data)
    }
}

/// Lays snapshots out row-per-epoch, zero-pads missing epochs and layer
/// slots, then sanitizes non-finite values. Epochs past `epochs` are dropped.
pub fn assemble_feature_matrix(
    snapshots: &[EpochSnapshot],
    epochs: usize,
    max_layers: usize,
) -> Result<FeatureMatrix> {
    if snapshots.is_empty() {
        return Err(Error::Empty("no epoch snapshots to assemble"));
    }
    if let Some(deep) = snapshots.iter().find(|s| s.layers.len() > max_layers) {
        return Err(Error::TooDeep {
            depth: deep.layers.len(),
            l_max: max_layers,
        });
    }
    if snapshots.len() > epochs {
        log::warn!(
            "{} epochs recorded, keeping the first {epochs}",
            snapshots.len()
        );
    }
    let mut m = FeatureMatrix::zeros(epochs, max_layers);
    let w = m.width();
    for (r, snap) in snapshots.iter().take(epochs).enumerate() {
        let row = &mut m.data[r * w..(r + 1) * w];
        row[..GLOBAL_COLS].copy_from_slice(&[snap.loss, snap.accuracy, snap.data_min, snap.data_max]);
        for (slot, layer) in snap.layers.iter().enumerate() {
            let start = GLOBAL_COLS + slot * LAYER_COLS;
            row[start..start + LAYER_COLS].copy_from_slice(&layer.to_row());
        }
    }
    m.data.iter_mut().for_each(|v| *v = sanitize(*v));
    Ok(m)
}
