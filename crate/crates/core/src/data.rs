//! In-memory datasets and query rows.

use ndarray::{concatenate, Array2, ArrayView1, Axis};

use crate::error::{CdeError, Result};
use crate::functional::FunctionalBlock;

/// Scalar covariates, responses, and optional functional covariate blocks,
/// all aligned by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub covariates: Array2<f64>,
    pub responses: Array2<f64>,
    pub functional: Vec<FunctionalBlock>,
    pub covariate_names: Vec<String>,
    pub response_names: Vec<String>,
}

/// One covariate row: scalar values plus one curve per functional block.
#[derive(Debug, Clone)]
pub struct Query<'a> {
    pub scalars: ArrayView1<'a, f64>,
    pub curves: Vec<ArrayView1<'a, f64>>,
}

impl<'a> Query<'a> {
    pub fn scalar(values: &'a [f64]) -> Self {
        Query {
            scalars: ArrayView1::from(values),
            curves: Vec::new(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.scalars.iter().all(|v| v.is_finite()) && self.curves.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }
}

fn default_names(prefix: &str, k: usize) -> Vec<String> {
    if k == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=k).map(|i| format!("{prefix}{i}")).collect()
    }
}

impl Dataset {
    /// Dataset with scalar covariates only and generated column names.
    pub fn new(covariates: Array2<f64>, responses: Array2<f64>) -> Result<Self> {
        let covariate_names = default_names("x", covariates.ncols());
        let response_names = default_names("y", responses.ncols());
        let ds = Dataset {
            covariates,
            responses,
            functional: Vec::new(),
            covariate_names,
            response_names,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_functional(mut self, block: FunctionalBlock) -> Result<Self> {
        self.functional.push(block);
        self.validate()?;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.responses.nrows()
    }

    pub fn response_dims(&self) -> usize {
        self.responses.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.responses.nrows();
        if self.covariates.nrows() != n {
            return Err(CdeError::domain(format!(
                "{} covariate rows but {n} response rows",
                self.covariates.nrows()
            )));
        }
        for (b, block) in self.functional.iter().enumerate() {
            if block.n_curves() != n {
                return Err(CdeError::domain(format!(
                    "functional block {b} has {} curves, expected {n}",
                    block.n_curves()
                )));
            }
        }
        if self.covariate_names.len() != self.covariates.ncols() {
            return Err(CdeError::domain("covariate names do not match covariate columns"));
        }
        if self.response_names.len() != self.responses.ncols() {
            return Err(CdeError::domain("response names do not match response columns"));
        }
        Ok(())
    }

    pub fn query(&self, row: usize) -> Query<'_> {
        Query {
            scalars: self.covariates.row(row),
            curves: self.functional.iter().map(|b| b.values.row(row)).collect(),
        }
    }

    /// Treats every functional evaluation as an ordinary covariate, placed
    /// before the scalar covariates.
    pub fn flatten_functional(&self) -> Dataset {
        if self.functional.is_empty() {
            return self.clone();
        }
        let mut parts: Vec<_> = self.functional.iter().map(|b| b.values.view()).collect();
        parts.push(self.covariates.view());
        let covariates = concatenate(Axis(1), &parts).expect("row counts validated");
        let mut covariate_names = Vec::new();
        for (b, block) in self.functional.iter().enumerate() {
            covariate_names.extend((0..block.n_points()).map(|k| format!("f{b}_{k}")));
        }
        covariate_names.extend(self.covariate_names.iter().cloned());
        Dataset {
            covariates,
            responses: self.responses.clone(),
            functional: Vec::new(),
            covariate_names,
            response_names: self.response_names.clone(),
        }
    }

    /// Rows `[start, end)` as a new dataset.
    pub fn slice_rows(&self, start: usize, end: usize) -> Dataset {
        let rows = ndarray::s![start..end, ..];
        Dataset {
            covariates: self.covariates.slice(rows).to_owned(),
            responses: self.responses.slice(rows).to_owned(),
            functional: self
                .functional
                .iter()
                .map(|b| FunctionalBlock {
                    values: b.values.slice(rows).to_owned(),
                    domain_points: b.domain_points.clone(),
                })
                .collect(),
            covariate_names: self.covariate_names.clone(),
            response_names: self.response_names.clone(),
        }
    }
}
