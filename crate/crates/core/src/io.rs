//! JSON form of sampled paths.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::Paths;

/// A scalar when the dimension is 1, an array otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Point {
    fn from_vector(v: &DVector<f64>) -> Self {
        if v.len() == 1 {
            Point::Scalar(v[0])
        } else {
            Point::Vector(v.iter().copied().collect())
        }
    }

    fn to_vector(&self) -> DVector<f64> {
        match self {
            Point::Scalar(s) => DVector::from_element(1, *s),
            Point::Vector(v) => DVector::from_column_slice(v),
        }
    }
}

/// `{"z": [...], "x": [...], "y": [...]}`. Only `y` is needed to run a filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathsJson {
    #[serde(default)]
    pub z: Vec<usize>,
    #[serde(default)]
    pub x: Vec<Point>,
    pub y: Vec<Point>,
}

impl From<&Paths> for PathsJson {
    fn from(p: &Paths) -> Self {
        Self {
            z: p.z.clone(),
            x: p.x.iter().map(Point::from_vector).collect(),
            y: p.y.iter().map(Point::from_vector).collect(),
        }
    }
}

impl PathsJson {
    pub fn observations(&self) -> Result<Vec<DVector<f64>>> {
        if self.y.is_empty() {
            return Err(Error::invalid("data", "\"y\" is empty"));
        }
        let y: Vec<DVector<f64>> = self.y.iter().map(Point::to_vector).collect();
        if y.iter().any(|v| v.len() != y[0].len() || v.is_empty()) {
            return Err(Error::invalid(
                "data",
                "observations have inconsistent dimensions",
            ));
        }
        Ok(y)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
