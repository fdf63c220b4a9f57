//! Tabular data model: one response, one regressor and J split variables.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SplitValues {
    Numeric(Vec<f64>),
    /// Level indices into `levels`.
    Categorical { codes: Vec<u32>, levels: Vec<String> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitColumn {
    pub name: String,
    pub values: SplitValues,
}

impl SplitColumn {
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values: SplitValues::Numeric(values),
        }
    }

    pub fn categorical(name: impl Into<String>, codes: Vec<u32>, levels: Vec<String>) -> Self {
        Self {
            name: name.into(),
            values: SplitValues::Categorical { codes, levels },
        }
    }

    pub fn kind(&self) -> ColumnKind {
        match self.values {
            SplitValues::Numeric(_) => ColumnKind::Numeric,
            SplitValues::Categorical { .. } => ColumnKind::Categorical,
        }
    }

    pub fn len(&self) -> usize {
        match &self.values {
            SplitValues::Numeric(v) => v.len(),
            SplitValues::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.values {
            SplitValues::Numeric(_) => None,
            SplitValues::Categorical { levels, .. } => Some(levels),
        }
    }

    /// Numeric values, or an error naming the column if it is categorical.
    pub fn as_numeric(&self) -> Result<&[f64]> {
        match &self.values {
            SplitValues::Numeric(v) => Ok(v),
            SplitValues::Categorical { .. } => Err(Error::CategoricalInput(self.name.clone())),
        }
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        let values = match &self.values {
            SplitValues::Numeric(v) => SplitValues::Numeric(rows.iter().map(|&i| v[i]).collect()),
            SplitValues::Categorical { codes, levels } => SplitValues::Categorical {
                codes: rows.iter().map(|&i| codes[i]).collect(),
                levels: levels.clone(),
            },
        };
        Self {
            name: self.name.clone(),
            values,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "column `{}` has {} entries, expected {n}",
                self.name,
                self.len()
            )));
        }
        match &self.values {
            SplitValues::Numeric(v) => {
                if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                    return Err(Error::NonNumeric {
                        column: self.name.clone(),
                        row,
                        token: v[row].to_string(),
                    });
                }
            }
            SplitValues::Categorical { codes, levels } => {
                if levels.len() < 2 {
                    return Err(Error::InvalidConfig(format!(
                        "categorical column `{}` needs at least two levels",
                        self.name
                    )));
                }
                if let Some(&c) = codes.iter().find(|&&c| c as usize >= levels.len()) {
                    return Err(Error::IndexOutOfRange {
                        index: c as usize,
                        len: levels.len(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Immutable after construction; share freely across workers.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub response: String,
    pub regressor: String,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<SplitColumn>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, x: Vec<f64>, z: Vec<SplitColumn>) -> Result<Self> {
        Self::with_names("y", "x", y, x, z)
    }

    pub fn with_names(
        response: impl Into<String>,
        regressor: impl Into<String>,
        y: Vec<f64>,
        x: Vec<f64>,
        z: Vec<SplitColumn>,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if x.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "regressor has {} entries, response has {n}",
                x.len()
            )));
        }
        if y.iter().chain(&x).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "response and regressor must be finite".into(),
            ));
        }
        for col in &z {
            col.validate(n)?;
        }
        Ok(Self {
            response: response.into(),
            regressor: regressor.into(),
            y,
            x,
            z,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_split(&self) -> usize {
        self.z.len()
    }

    pub fn column(&self, name: &str) -> Option<(usize, &SplitColumn)> {
        self.z.iter().enumerate().find(|(_, c)| c.name == name)
    }

    /// Rows `rows` in the given order. No validation: a subset of a valid
    /// dataset is valid whenever `rows` is nonempty and in range.
    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            response: self.response.clone(),
            regressor: self.regressor.clone(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            x: rows.iter().map(|&i| self.x[i]).collect(),
            z: self.z.iter().map(|c| c.subset(rows)).collect(),
        }
    }

    /// Writes the dataset as CSV with 17 significant digits per number, so
    /// reading it back reproduces every value bit for bit.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file)
    }

    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![self.response.as_str(), self.regressor.as_str()];
        header.extend(self.z.iter().map(|c| c.name.as_str()));
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![fmt17(self.y[i]), fmt17(self.x[i])];
            for col in &self.z {
                rec.push(match &col.values {
                    SplitValues::Numeric(v) => fmt17(v[i]),
                    SplitValues::Categorical { codes, levels } => levels[codes[i] as usize].clone(),
                });
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Which CSV columns play which role.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub response: String,
    pub regressor: String,
    pub split: Vec<String>,
    /// Subset of `split` to read as categorical; everything else is numeric.
    #[serde(default)]
    pub categorical: Vec<String>,
}

impl Schema {
    pub fn new(response: &str, regressor: &str, split: &[&str]) -> Self {
        Self {
            response: response.into(),
            regressor: regressor.into(),
            split: split.iter().map(|s| s.to_string()).collect(),
            categorical: Vec::new(),
        }
    }

    pub fn with_categorical(mut self, names: &[&str]) -> Self {
        self.categorical = names.iter().map(|s| s.to_string()).collect();
        self
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Parses RFC-4180 CSV with a header row. Numbers use `.` as the decimal
/// separator regardless of locale.
pub fn read_csv<R: std::io::Read>(input: R, schema: &Schema) -> Result<Dataset> {
    if schema.split.is_empty() {
        return Err(Error::InvalidConfig("at least one split column is required".into()));
    }
    if let Some(c) = schema.categorical.iter().find(|c| !schema.split.contains(c)) {
        return Err(Error::InvalidConfig(format!(
            "categorical column `{c}` is not a split column"
        )));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    let lookup = |name: &str| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    };
    let y_idx = lookup(&schema.response)?;
    let x_idx = lookup(&schema.regressor)?;
    let z_idx: Vec<usize> = schema.split.iter().map(|s| lookup(s)).collect::<Result<_>>()?;

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for record in rdr.records() {
        let record = record?;
        for (j, field) in record.iter().enumerate() {
            raw[j].push(field.trim().to_string());
        }
    }

    let y = parse_numeric(&schema.response, &raw[y_idx])?;
    let x = parse_numeric(&schema.regressor, &raw[x_idx])?;
    let mut z = Vec::with_capacity(z_idx.len());
    for (name, &j) in schema.split.iter().zip(&z_idx) {
        if schema.categorical.contains(name) {
            z.push(parse_categorical(name, &raw[j])?);
        } else {
            z.push(SplitColumn::numeric(name.clone(), parse_numeric(name, &raw[j])?));
        }
    }
    Dataset::with_names(schema.response.clone(), schema.regressor.clone(), y, x, z)
}

fn parse_numeric(column: &str, cells: &[String]) -> Result<Vec<f64>> {
    cells
        .iter()
        .enumerate()
        .map(|(row, cell)| {
            if cell.is_empty() {
                return Err(Error::MissingValue {
                    column: column.to_string(),
                    row,
                });
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::NonNumeric {
                    column: column.to_string(),
                    row,
                    token: cell.clone(),
                }),
            }
        })
        .collect()
}

fn parse_categorical(column: &str, cells: &[String]) -> Result<SplitColumn> {
    let mut levels: Vec<String> = Vec::new();
    let mut codes = Vec::with_capacity(cells.len());
    for (row, cell) in cells.iter().enumerate() {
        if cell.is_empty() {
            return Err(Error::MissingValue {
                column: column.to_string(),
                row,
            });
        }
        let code = match levels.iter().position(|l| l == cell) {
            Some(c) => c,
            None => {
                levels.push(cell.clone());
                levels.len() - 1
            }
        };
        codes.push(code as u32);
    }
    Ok(SplitColumn::categorical(column, codes, levels))
}

/// Stable ascending sort order of a numeric column.
pub fn order_permutation(col: &SplitColumn) -> Result<Vec<usize>> {
    Ok(sort_order(col.as_numeric()?))
}

pub(crate) fn sort_order(values: &[f64]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..values.len()).collect();
    perm.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    perm
}

/// Type-7 (linear interpolation) quantile of already sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Empirical 25/50/75% quantiles (type 7).
pub fn empirical_quartiles(col: &SplitColumn) -> Result<[f64; 3]> {
    quartiles_of(col.as_numeric()?)
}

pub(crate) fn quartiles_of(values: &[f64]) -> Result<[f64; 3]> {
    if values.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: values.len(),
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok([
        quantile_sorted(&sorted, 0.25),
        quantile_sorted(&sorted, 0.5),
        quantile_sorted(&sorted, 0.75),
    ])
}
