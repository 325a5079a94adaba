//! Labels manifest: one CSV row per corpus record.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One corpus record. `labels` are sorted class ids; correct models carry
/// `[0]` and no kill statistics (NaN).
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub mutant_id: String,
    pub seed_id: String,
    pub labels: Vec<u8>,
    pub killed: bool,
    pub p_value: f64,
    pub effect_size: f64,
    pub split: String,
}

#[derive(Serialize, Deserialize)]
struct RawRow {
    mutant_id: String,
    seed_id: String,
    labels: String,
    killed: bool,
    p_value: f64,
    effect_size: f64,
    split: String,
}

impl From<&ManifestRow> for RawRow {
    fn from(r: &ManifestRow) -> Self {
        RawRow {
            mutant_id: r.mutant_id.clone(),
            seed_id: r.seed_id.clone(),
            labels: r.labels.iter().map(u8::to_string).collect::<Vec<_>>().join(";"),
            killed: r.killed,
            p_value: r.p_value,
            effect_size: r.effect_size,
            split: r.split.clone(),
        }
    }
}

impl TryFrom<RawRow> for ManifestRow {
    type Error = String;

    fn try_from(r: RawRow) -> std::result::Result<Self, String> {
        let labels = r
            .labels
            .split(';')
            .map(|s| s.trim().parse::<u8>().map_err(|e| format!("label {s:?}: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(ManifestRow {
            mutant_id: r.mutant_id,
            seed_id: r.seed_id,
            labels,
            killed: r.killed,
            p_value: r.p_value,
            effect_size: r.effect_size,
            split: r.split,
        })
    }
}

pub fn manifest_to_string(rows: &[ManifestRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(RawRow::from(r)).map_err(|e| Error::csv("manifest", e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("manifest: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    std::fs::write(path, manifest_to_string(rows)?).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let ctx = || path.display().to_string();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(ctx(), e))?;
    let mut rows = Vec::new();
    for raw in r.deserialize::<RawRow>() {
        let raw = raw.map_err(|e| Error::csv(ctx(), e))?;
        rows.push(ManifestRow::try_from(raw).map_err(|e| Error::Config(format!("{}: {e}", ctx())))?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_nan_and_infinite_statistics() {
        let rows = vec![
            ManifestRow {
                mutant_id: "s0-m001".into(),
                seed_id: "s0".into(),
                labels: vec![1, 7],
                killed: true,
                p_value: 0.001,
                effect_size: f64::INFINITY,
                split: "train".into(),
            },
            ManifestRow {
                mutant_id: "s0-c0".into(),
                seed_id: "s0".into(),
                labels: vec![0],
                killed: false,
                p_value: f64::NAN,
                effect_size: f64::NAN,
                split: "test".into(),
            },
        ];
        let text = manifest_to_string(&rows).unwrap();
        assert!(text.starts_with("mutant_id,seed_id,labels,killed,p_value,effect_size,split\n"));
        assert!(text.contains("1;7"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        std::fs::write(&p, &text).unwrap();
        let back = read_manifest(&p).unwrap();
        assert_eq!(back[0], rows[0]);
        assert!(back[1].p_value.is_nan() && back[1].labels == vec![0]);
    }
}
