//! Feature rows with explicit missingness and a response-bearing dataset.

use crate::error::{Error, Result};

/// One feature vector. A `None` entry is missing and carries no value.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    values: Vec<Option<f64>>,
}

impl Observation {
    pub fn new(values: Vec<Option<f64>>) -> Self {
        Observation { values }
    }

    /// A fully observed row.
    pub fn complete(values: &[f64]) -> Self {
        Observation {
            values: values.iter().copied().map(Some).collect(),
        }
    }

    /// Builds a row from values and a mask where `true` marks a missing cell.
    pub fn from_masked(values: &[f64], missing: &[bool]) -> Result<Self> {
        if values.len() != missing.len() {
            return Err(Error::Shape(format!(
                "{} values but {} mask entries",
                values.len(),
                missing.len()
            )));
        }
        Ok(Observation {
            values: values
                .iter()
                .zip(missing)
                .map(|(&v, &m)| if m { None } else { Some(v) })
                .collect(),
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, j: usize) -> Option<f64> {
        self.values[j]
    }

    #[inline]
    pub fn is_missing(&self, j: usize) -> bool {
        self.values[j].is_none()
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn missing_mask(&self) -> Vec<bool> {
        self.values.iter().map(Option::is_none).collect()
    }

    pub fn mask_feature(&mut self, j: usize) {
        self.values[j] = None;
    }
}

/// Rows of features plus an optional response column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<Observation>,
    pub response_name: Option<String>,
    pub response: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, rows: Vec<Observation>) -> Result<Self> {
        let p = feature_names.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::Shape(format!(
                "row {i} has {} features, expected {p}",
                r.len()
            )));
        }
        Ok(Dataset {
            feature_names,
            rows,
            response_name: None,
            response: None,
        })
    }

    pub fn with_response(mut self, name: impl Into<String>, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.rows.len() {
            return Err(Error::Shape(format!(
                "response has {} entries for {} rows",
                y.len(),
                self.rows.len()
            )));
        }
        self.response_name = Some(name.into());
        self.response = Some(y);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }
}
