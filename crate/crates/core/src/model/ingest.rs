//! CSV ingestion with min-max normalization.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{AttrMeta, Dataset, Direction, Item};
use crate::scalar::Scalar;

/// Optional non-linear transform applied to a raw column before normalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transform {
    Identity,
    /// Natural logarithm; values must be positive.
    Log,
    /// Square root; values must be non-negative.
    Sqrt,
    Square,
}

impl Transform {
    fn apply(self, v: f64) -> std::result::Result<f64, String> {
        match self {
            Transform::Identity => Ok(v),
            Transform::Log if v > 0.0 => Ok(v.ln()),
            Transform::Log => Err(format!("log of non-positive value {v}")),
            Transform::Sqrt if v >= 0.0 => Ok(v.sqrt()),
            Transform::Sqrt => Err(format!("sqrt of negative value {v}")),
            Transform::Square => Ok(v * v),
        }
    }
}

/// A source column, possibly wrapped in a transform: `col`, `log(col)`, `sqrt(col)`, `sq(col)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnExpr {
    pub column: String,
    pub transform: Transform,
}

impl fmt::Display for ColumnExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.transform {
            Transform::Identity => return f.write_str(&self.column),
            Transform::Log => "log",
            Transform::Sqrt => "sqrt",
            Transform::Square => "sq",
        };
        write!(f, "{name}({})", self.column)
    }
}

impl FromStr for ColumnExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(open) = s.find('(') {
            if s.ends_with(')') {
                let transform = match &s[..open] {
                    "log" => Transform::Log,
                    "sqrt" => Transform::Sqrt,
                    "sq" => Transform::Square,
                    other => return Err(Error::InvalidArgument(format!("unknown transform `{other}`"))),
                };
                let column = s[open + 1..s.len() - 1].trim().to_owned();
                if column.is_empty() {
                    return Err(Error::InvalidArgument(format!("empty column in `{s}`")));
                }
                return Ok(Self { column, transform });
            }
        }
        if s.is_empty() {
            return Err(Error::InvalidArgument("empty column name".into()));
        }
        Ok(Self { column: s.to_owned(), transform: Transform::Identity })
    }
}

/// One scoring attribute of the schema, written `expr[:higher|:lower]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttrSpec {
    pub expr: ColumnExpr,
    pub direction: Direction,
}

impl FromStr for AttrSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (expr, direction) = match s.rsplit_once(':') {
            Some((e, "higher")) => (e, Direction::HigherPreferred),
            Some((e, "lower")) => (e, Direction::LowerPreferred),
            Some((_, other)) => {
                return Err(Error::InvalidArgument(format!("direction must be `higher` or `lower`, got `{other}`")))
            }
            None => (s, Direction::HigherPreferred),
        };
        Ok(Self { expr: expr.parse()?, direction })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    pub id_col: String,
    pub attrs: Vec<AttrSpec>,
    /// Min-max normalize each column. When off, values must already lie in
    /// `[0, 1]`; lower-preferred columns map to `1 - v`.
    pub normalize: bool,
}

impl Schema {
    pub fn new(id_col: impl Into<String>, attrs: Vec<AttrSpec>) -> Self {
        Self { id_col: id_col.into(), attrs, normalize: true }
    }

    pub fn with_normalization(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    /// Parse attribute specs such as `["x1:higher", "log(price):lower"]`.
    pub fn parse(id_col: &str, attrs: &[&str]) -> Result<Self> {
        let attrs = attrs.iter().map(|a| a.parse()).collect::<Result<_>>()?;
        Ok(Self::new(id_col, attrs))
    }
}

/// Min-max normalize `values` in place and return `(raw_min, raw_max)`.
///
/// Lower-preferred columns are flipped so that 1 is always best; a constant
/// column maps to 0.5.
pub fn normalize_column(values: &mut [f64], direction: Direction) -> (f64, f64) {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    for v in values.iter_mut() {
        *v = if span > 0.0 {
            let x = match direction {
                Direction::HigherPreferred => (*v - lo) / span,
                Direction::LowerPreferred => (hi - *v) / span,
            };
            x.clamp(0.0, 1.0)
        } else {
            0.5
        };
    }
    (lo, hi)
}

fn keep_unit_column(values: &mut [f64], direction: Direction) -> (f64, f64) {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if direction == Direction::LowerPreferred {
        values.iter_mut().for_each(|v| *v = 1.0 - *v);
    }
    (lo, hi)
}

/// Read a CSV with a header row and normalize the schema's attributes to `[0, 1]`.
pub fn load_dataset<T: Scalar, R: Read>(source: R, schema: &Schema) -> Result<Dataset<T>> {
    if schema.attrs.len() < 2 {
        return Err(Error::Validation(format!(
            "at least two scoring attributes are required, got {}",
            schema.attrs.len()
        )));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers().map_err(|e| Error::Parse { row: 0, message: e.to_string() })?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { row: 0, message: format!("missing column `{name}`") })
    };
    let id_pos = column(&schema.id_col)?;
    let attr_pos = schema.attrs.iter().map(|a| column(&a.expr.column)).collect::<Result<Vec<_>>>()?;

    let mut ids = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); schema.attrs.len()];
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        let id = record.get(id_pos).unwrap_or("");
        if id.is_empty() {
            return Err(Error::Parse { row, message: "missing id".into() });
        }
        ids.push(id.to_owned());
        for ((spec, &pos), col) in schema.attrs.iter().zip(&attr_pos).zip(&mut cols) {
            let name = &spec.expr.column;
            let cell = record.get(pos).unwrap_or("");
            if cell.is_empty() {
                return Err(Error::Parse { row, message: format!("missing value in `{name}`") });
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Parse { row, message: format!("non-numeric value `{cell}` in `{name}`") })?;
            let v = spec.expr.transform.apply(v).ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                row,
                message: format!("value `{cell}` in `{}` is not finite after transform", spec.expr),
            })?;
            col.push(v);
        }
    }
    if ids.is_empty() {
        return Err(Error::Validation("dataset has no items".into()));
    }

    let meta = schema
        .attrs
        .iter()
        .zip(&mut cols)
        .map(|(spec, col)| {
            let (raw_min, raw_max) = if schema.normalize {
                normalize_column(col, spec.direction)
            } else {
                keep_unit_column(col, spec.direction)
            };
            AttrMeta { name: spec.expr.to_string(), direction: spec.direction, raw_min, raw_max }
        })
        .collect();
    let items =
        ids.into_iter().enumerate().map(|(i, id)| Item::new(id, cols.iter().map(|c| T::lit(c[i])).collect())).collect();
    Dataset::new(items, meta)
}

pub fn load_dataset_path<T: Scalar>(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot open {}: {e}", path.display())))?;
    load_dataset(std::io::BufReader::new(file), schema)
}
