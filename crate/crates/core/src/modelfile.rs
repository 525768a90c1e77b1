//! The JSON model-file format accepted by every CLI command.
//!
//! ```json
//! {
//!   "horizon": 10,                    // or "stationary"
//!   "A": [[...]],                     // one matrix, or a list of T matrices
//!   "W": [[...]],
//!   "P0": [[...]],
//!   "Theta": [[...]],                 // one matrix or a list of T
//!   "constraint": {"hard": [0.5]},    // or {"soft": [2.0]}; length T or 1
//!   "labels": ["x1", "..."]           // optional
//! }
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DistortionMode, DistortionSpec, GaussMarkovModel, Horizon};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HorizonField {
    Steps(u64),
    Tag(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixOrList {
    One(Vec<Vec<f64>>),
    Many(Vec<Vec<Vec<f64>>>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintField {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hard: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub soft: Option<Vec<f64>>,
}

/// The raw document as serialized.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelDocument {
    pub horizon: HorizonField,
    #[serde(rename = "A")]
    pub a: MatrixOrList,
    #[serde(rename = "W")]
    pub w: MatrixOrList,
    #[serde(rename = "P0")]
    pub p0: Vec<Vec<f64>>,
    #[serde(rename = "Theta")]
    pub theta: MatrixOrList,
    pub constraint: ConstraintField,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

/// A parsed and validated model file.
#[derive(Clone, Debug)]
pub struct ModelFile {
    pub model: GaussMarkovModel,
    pub spec: DistortionSpec,
    pub labels: Option<Vec<String>>,
}

pub fn matrix_from_rows(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    if r == 0 {
        return Err(Error::Parse(format!("field {field}: empty matrix")));
    }
    let c = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(Error::Parse(format!(
                "field {field}: row {i} has {} entries, expected {c}",
                row.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn expand(field: &MatrixOrList, t: usize, name: &str) -> Result<Vec<DMatrix<f64>>> {
    match field {
        MatrixOrList::One(rows) => Ok(vec![matrix_from_rows(rows, name)?; t]),
        MatrixOrList::Many(list) => {
            if list.len() == 1 {
                return Ok(vec![matrix_from_rows(&list[0], name)?; t]);
            }
            if list.len() != t {
                return Err(Error::Parse(format!(
                    "field {name}: {} matrices for horizon {t}",
                    list.len()
                )));
            }
            list.iter()
                .enumerate()
                .map(|(i, rows)| matrix_from_rows(rows, &format!("{name}[{i}]")))
                .collect()
        }
    }
}

fn expand_values(values: &[f64], t: usize, name: &str) -> Result<Vec<f64>> {
    if values.len() == 1 {
        return Ok(vec![values[0]; t]);
    }
    if values.len() != t {
        return Err(Error::Parse(format!(
            "field constraint.{name}: {} values for horizon {t}",
            values.len()
        )));
    }
    Ok(values.to_vec())
}

impl ModelDocument {
    pub fn resolve(&self) -> Result<ModelFile> {
        let horizon = match &self.horizon {
            HorizonField::Steps(0) => {
                return Err(Error::Parse("field horizon: must be positive".into()))
            }
            HorizonField::Steps(t) => Horizon::Finite(*t as usize),
            HorizonField::Tag(s) if s == "stationary" => Horizon::Stationary,
            HorizonField::Tag(s) => {
                return Err(Error::Parse(format!(
                    "field horizon: expected a positive integer or \"stationary\", got {s:?}"
                )))
            }
        };
        let t = match horizon {
            Horizon::Finite(t) => t,
            Horizon::Stationary => 1,
        };
        let a = expand(&self.a, t, "A")?;
        let w = expand(&self.w, t, "W")?;
        let p0 = matrix_from_rows(&self.p0, "P0")?;
        let theta = expand(&self.theta, t, "Theta")?;
        let model = match horizon {
            Horizon::Finite(_) => GaussMarkovModel::finite(a, w, p0),
            Horizon::Stationary => GaussMarkovModel::stationary(a[0].clone(), w[0].clone(), p0),
        }
        .map_err(|e| Error::Parse(format!("model: {e}")))?;
        let spec = match (&self.constraint.hard, &self.constraint.soft) {
            (Some(d), None) => DistortionSpec::hard(theta, expand_values(d, t, "hard")?),
            (None, Some(alpha)) => DistortionSpec::soft(theta, expand_values(alpha, t, "soft")?),
            _ => Err(Error::Parse(
                "field constraint: exactly one of \"hard\" or \"soft\" is required".into(),
            )),
        }
        .map_err(|e| Error::Parse(format!("constraint: {e}")))?;
        if let Some(labels) = &self.labels {
            if labels.len() != model.n() {
                return Err(Error::Parse(format!(
                    "field labels: {} labels for state dimension {}",
                    labels.len(),
                    model.n()
                )));
            }
        }
        Ok(ModelFile {
            model,
            spec,
            labels: self.labels.clone(),
        })
    }
}

/// Parses a model file, reporting JSON syntax positions or the offending
/// field on failure.
pub fn parse_model_file(json: &str) -> Result<ModelFile> {
    let doc: ModelDocument = serde_json::from_str(json).map_err(|e| {
        Error::Parse(format!(
            "model file line {} column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    doc.resolve()
}

/// Serializes a model + spec back into the document format.
pub fn to_document(
    model: &GaussMarkovModel,
    spec: &DistortionSpec,
    labels: Option<Vec<String>>,
) -> ModelDocument {
    let horizon = match model.horizon {
        Horizon::Finite(t) => HorizonField::Steps(t as u64),
        Horizon::Stationary => HorizonField::Tag("stationary".into()),
    };
    let mats = |ms: &[DMatrix<f64>]| -> MatrixOrList {
        if ms.len() == 1 {
            MatrixOrList::One(matrix_to_rows(&ms[0]))
        } else {
            MatrixOrList::Many(ms.iter().map(matrix_to_rows).collect())
        }
    };
    let constraint = match &spec.mode {
        DistortionMode::Hard(d) => ConstraintField {
            hard: Some(d.clone()),
            soft: None,
        },
        DistortionMode::Soft(a) => ConstraintField {
            hard: None,
            soft: Some(a.clone()),
        },
    };
    ModelDocument {
        horizon,
        a: mats(&model.a),
        w: mats(&model.w),
        p0: matrix_to_rows(&model.p0),
        theta: mats(&spec.theta),
        constraint,
        labels,
    }
}
