//! Labeled datasets and their on-disk format.
//!
//! A dataset is a CSV file with header `y,x1,...,xd` and labels in `{-1, 1}`.
//! Generated datasets carry a JSON sidecar (same stem, `.json` extension)
//! recording the plant: `seed`, `gamma`, `eta`, `p`, `w_star`, `bias`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norm::NormSpec;
use crate::types::{check_dim, Label, LabeledExample, Vector};

/// Provenance of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub gamma: f64,
    pub eta: f64,
    pub p: NormSpec,
    pub w_star: Vec<f64>,
    pub bias: f64,
}

/// Nonempty sequence of examples sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    examples: Vec<LabeledExample>,
    meta: Option<DatasetMeta>,
}

impl Dataset {
    pub fn new(examples: Vec<LabeledExample>) -> Result<Self> {
        let first = examples
            .first()
            .ok_or_else(|| Error::InvalidData("dataset is empty".into()))?;
        let d = first.dim();
        for ex in &examples {
            check_dim(d, ex.dim())?;
        }
        Ok(Self { examples, meta: None })
    }

    pub fn with_meta(mut self, meta: DatasetMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn meta(&self) -> Option<&DatasetMeta> {
        self.meta.as_ref()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.examples[0].dim()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledExample> {
        self.examples.iter()
    }

    /// Appends a constant `1` coordinate to every point.
    pub fn lifted(&self) -> Dataset {
        let examples = self
            .examples
            .iter()
            .map(|ex| {
                let mut x = ex.x.to_vec();
                x.push(1.0);
                LabeledExample::new(Vector::new(x).expect("finite"), ex.y)
            })
            .collect();
        Dataset { examples, meta: self.meta.clone() }
    }

    /// Rejects any point with `‖x‖_p > 1 + tol`.
    pub fn check_norm_bound(&self, spec: NormSpec, tol: f64) -> Result<()> {
        for (i, ex) in self.examples.iter().enumerate() {
            let n = spec.norm(&ex.x);
            if n > 1.0 + tol {
                return Err(Error::InvalidData(format!(
                    "example {i} has ‖x‖_{spec} = {n} > 1"
                )));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["y".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for ex in &self.examples {
            let mut rec = vec![ex.y.as_i64().to_string()];
            rec.extend(ex.x.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        validate_header(&headers)?;
        let d = headers.len() - 1;
        let mut examples = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != d + 1 {
                return Err(Error::InvalidData(format!(
                    "row {} has {} fields, expected {}",
                    row + 1,
                    rec.len(),
                    d + 1
                )));
            }
            let y = parse_label(&rec[0], row)?;
            let x = rec
                .iter()
                .skip(1)
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        Error::InvalidData(format!("row {}: cannot parse {s:?}", row + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            examples.push(LabeledExample::from_parts(x, y)?);
        }
        Dataset::new(examples)
    }

    /// Writes the CSV and, when metadata is present, the JSON sidecar.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let file = std::fs::File::create(csv_path)?;
        self.write_csv(std::io::BufWriter::new(file))?;
        if let Some(meta) = &self.meta {
            let json = serde_json::to_string_pretty(meta)?;
            std::fs::write(sidecar_path(csv_path), json + "\n")?;
        }
        Ok(())
    }

    /// Reads the CSV and picks up a sidecar if one exists.
    pub fn load(csv_path: &Path) -> Result<Self> {
        let file = std::fs::File::open(csv_path)?;
        let mut ds = Dataset::read_csv(std::io::BufReader::new(file))?;
        let side = sidecar_path(csv_path);
        if side.exists() {
            let meta: DatasetMeta = serde_json::from_str(&std::fs::read_to_string(side)?)?;
            ds.meta = Some(meta);
        }
        Ok(ds)
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a LabeledExample;
    type IntoIter = std::slice::Iter<'a, LabeledExample>;

    fn into_iter(self) -> Self::IntoIter {
        self.examples.iter()
    }
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn validate_header(h: &csv::StringRecord) -> Result<()> {
    if h.len() < 2 || h[0].trim() != "y" {
        return Err(Error::InvalidData("header must be y,x1,...,xd".into()));
    }
    for (i, name) in h.iter().enumerate().skip(1) {
        if name.trim() != format!("x{i}") {
            return Err(Error::InvalidData(format!(
                "header column {i} is {name:?}, expected x{i}"
            )));
        }
    }
    Ok(())
}

fn parse_label(s: &str, row: usize) -> Result<Label> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::InvalidData(format!("row {}: bad label {s:?}", row + 1)))?;
    if v == 1.0 {
        Ok(Label::Pos)
    } else if v == -1.0 {
        Ok(Label::Neg)
    } else {
        Err(Error::InvalidData(format!("row {}: label must be -1 or 1, got {s}", row + 1)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(x: &[f64], y: Label) -> LabeledExample {
        LabeledExample::from_parts(x.to_vec(), y).unwrap()
    }

    #[test]
    fn rejects_empty_and_ragged() {
        assert!(Dataset::new(vec![]).is_err());
        let r = Dataset::new(vec![ex(&[1.0], Label::Pos), ex(&[1.0, 2.0], Label::Neg)]);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn csv_format() {
        let ds = Dataset::new(vec![ex(&[0.5, -1.25], Label::Pos), ex(&[0.1, 3.0], Label::Neg)])
            .unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "y,x1,x2\n1,0.5,-1.25\n-1,0.1,3\n");
        let back = Dataset::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn csv_errors() {
        assert!(Dataset::read_csv("y,x1\n".as_bytes()).is_err());
        assert!(Dataset::read_csv("y,x1\n0,1.0\n".as_bytes()).is_err());
        assert!(Dataset::read_csv("label,x1\n1,1.0\n".as_bytes()).is_err());
        assert!(Dataset::read_csv("y,x1\n1,abc\n".as_bytes()).is_err());
        assert!(Dataset::read_csv("y,x1\n1,NaN\n".as_bytes()).is_err());
    }

    #[test]
    fn sidecar_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let meta = DatasetMeta {
            seed: 7,
            gamma: 0.1,
            eta: 0.0,
            p: NormSpec::LINF,
            w_star: vec![0.5, -0.5],
            bias: 0.0,
        };
        let ds = Dataset::new(vec![ex(&[0.5, -0.25], Label::Pos)]).unwrap().with_meta(meta);
        ds.save(&path).unwrap();
        let side = std::fs::read_to_string(dir.path().join("data.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&side).unwrap();
        for key in ["seed", "gamma", "eta", "p", "w_star", "bias"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["p"], "inf");
        assert_eq!(Dataset::load(&path).unwrap(), ds);
    }
}
