//! Data model for chronological feature streams and the CSV stream source.
//!
//! A stream is any iterator of `Result<Record>`. Sources assign consecutive
//! indices starting at [`FeatureSchema::index_origin`] and never reorder or
//! buffer records.

use std::collections::HashSet;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Token substituted for an empty categorical cell.
pub const MISSING: &str = "__MISSING__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Categorical,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

impl Feature {
    pub fn categorical(name: impl Into<String>) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Categorical,
        }
    }

    pub fn numeric(name: impl Into<String>) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Numeric,
        }
    }
}

/// How the label column is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Integer class ids in `[0, n_classes)`.
    Class { n_classes: u16 },
    /// Non-negative throughput time in hours, binned into classes later.
    Hours,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    features: Vec<Feature>,
    label_column: String,
    target: TargetKind,
    index_origin: u64,
}

impl FeatureSchema {
    pub fn new(
        features: Vec<Feature>,
        label_column: impl Into<String>,
        target: TargetKind,
    ) -> Result<Self> {
        let label_column = label_column.into();
        let mut seen = HashSet::new();
        for f in &features {
            if f.name.is_empty() {
                return Err(Error::Schema("feature names must be non-empty".into()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature `{}`", f.name)));
            }
        }
        if seen.contains(label_column.as_str()) {
            return Err(Error::Schema(format!(
                "label column `{label_column}` is also listed as a feature"
            )));
        }
        if let TargetKind::Class { n_classes } = target {
            if n_classes < 2 {
                return Err(Error::Schema("at least two classes are required".into()));
            }
        }
        Ok(FeatureSchema {
            features,
            label_column,
            target,
            index_origin: 0,
        })
    }

    pub fn with_index_origin(mut self, origin: u64) -> Self {
        self.index_origin = origin;
        self
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn label_column(&self) -> &str {
        &self.label_column
    }

    pub fn target(&self) -> TargetKind {
        self.target
    }

    pub fn index_origin(&self) -> u64 {
        self.index_origin
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Checks the per-instance invariants: one value per feature, kinds
    /// matching the schema, numeric values finite.
    pub fn validate(&self, instance: &Instance) -> Result<()> {
        if instance.values.len() != self.features.len() {
            return Err(Error::Schema(format!(
                "instance {} has {} values, schema has {} features",
                instance.index,
                instance.values.len(),
                self.features.len()
            )));
        }
        for (f, v) in self.features.iter().zip(&instance.values) {
            match (f.kind, v) {
                (FeatureKind::Categorical, Value::Cat(_)) => {}
                (FeatureKind::Numeric, Value::Num(x)) if x.is_finite() => {}
                (FeatureKind::Numeric, Value::Num(_)) => {
                    return Err(Error::Domain(format!(
                        "non-finite value for `{}` at index {}",
                        f.name, instance.index
                    )))
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "value kind mismatch for `{}` at index {}",
                        f.name, instance.index
                    )))
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Cat(String),
    Num(f64),
}

impl Value {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            Value::Cat(s) => Some(s),
            Value::Num(_) => None,
        }
    }
}

/// One chronological record: a stream position and one value per schema feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub index: u64,
    pub values: Vec<Value>,
}

/// A class id together with the size of its label set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassLabel {
    id: u16,
    n_classes: u16,
}

impl ClassLabel {
    pub fn new(id: u16, n_classes: u16) -> Result<Self> {
        if id >= n_classes {
            return Err(Error::Domain(format!(
                "class id {id} out of range for {n_classes} classes"
            )));
        }
        Ok(ClassLabel { id, n_classes })
    }

    pub fn id(self) -> u16 {
        self.id
    }

    pub fn n_classes(self) -> u16 {
        self.n_classes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub instance: Instance,
    pub label: ClassLabel,
}

impl LabeledInstance {
    pub fn index(&self) -> u64 {
        self.instance.index
    }
}

/// Raw target as read from the label column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Class(ClassLabel),
    Hours(f64),
}

/// What a stream source yields: an instance and, when the label cell was
/// non-empty, its target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub instance: Instance,
    pub target: Option<Target>,
}

impl Record {
    pub fn index(&self) -> u64 {
        self.instance.index
    }

    /// The labeled view of a record with a class target.
    pub fn labeled(&self) -> Option<LabeledInstance> {
        match self.target {
            Some(Target::Class(label)) => Some(LabeledInstance {
                instance: self.instance.clone(),
                label,
            }),
            _ => None,
        }
    }
}

impl From<LabeledInstance> for Record {
    fn from(li: LabeledInstance) -> Self {
        Record {
            instance: li.instance,
            target: Some(Target::Class(li.label)),
        }
    }
}

/// Streaming CSV source. Single consumer; yields records in file order.
pub struct CsvStream<R: Read> {
    reader: csv::Reader<R>,
    schema: FeatureSchema,
    columns: Vec<usize>,
    label_col: usize,
    next_index: u64,
    row: usize,
    path: PathBuf,
    record: csv::StringRecord,
    empty: bool,
}

/// Opens `path` as a stream of records under `schema`.
///
/// An empty file (no header) yields an empty stream.
pub fn open_csv_stream(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<CsvStream<File>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    CsvStream::new(file, schema, path)
}

impl<R: Read> CsvStream<R> {
    pub fn new(reader: R, schema: &FeatureSchema, path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(reader);
        let headers = reader
            .headers()
            .map_err(|e| Error::csv(&path, e))?
            .clone();
        let empty = headers.is_empty() || (headers.len() == 1 && headers[0].is_empty());
        let find = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
        };
        let (columns, label_col) = if empty {
            (Vec::new(), 0)
        } else {
            let columns = schema
                .features
                .iter()
                .map(|f| find(&f.name))
                .collect::<Result<Vec<_>>>()?;
            (columns, find(&schema.label_column)?)
        };
        Ok(CsvStream {
            reader,
            schema: schema.clone(),
            columns,
            label_col,
            next_index: schema.index_origin,
            row: 0,
            path,
            record: csv::StringRecord::new(),
            empty,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn parse_current(&self) -> Result<Record> {
        let parse_err = |column: &str, message: String| Error::Parse {
            row: self.row,
            column: column.to_string(),
            message,
        };
        let mut values = Vec::with_capacity(self.columns.len());
        for (f, &col) in self.schema.features.iter().zip(&self.columns) {
            let cell = self.record.get(col).unwrap_or("").trim();
            let value = match f.kind {
                FeatureKind::Categorical if cell.is_empty() => Value::Cat(MISSING.to_string()),
                FeatureKind::Categorical => Value::Cat(cell.to_string()),
                FeatureKind::Numeric => {
                    if cell.is_empty() {
                        return Err(parse_err(&f.name, "missing numeric value".into()));
                    }
                    let x: f64 = cell
                        .parse()
                        .map_err(|_| parse_err(&f.name, format!("`{cell}` is not a number")))?;
                    if !x.is_finite() {
                        return Err(parse_err(&f.name, format!("`{cell}` is not finite")));
                    }
                    Value::Num(x)
                }
            };
            values.push(value);
        }
        let label_cell = self.record.get(self.label_col).unwrap_or("").trim();
        let target = if label_cell.is_empty() {
            None
        } else {
            let label_name = self.schema.label_column.as_str();
            Some(match self.schema.target {
                TargetKind::Class { n_classes } => {
                    let id: u16 = label_cell.parse().map_err(|_| {
                        parse_err(label_name, format!("`{label_cell}` is not a class id"))
                    })?;
                    Target::Class(
                        ClassLabel::new(id, n_classes)
                            .map_err(|e| parse_err(label_name, e.to_string()))?,
                    )
                }
                TargetKind::Hours => {
                    let h: f64 = label_cell.parse().map_err(|_| {
                        parse_err(label_name, format!("`{label_cell}` is not a number"))
                    })?;
                    if !h.is_finite() || h < 0.0 {
                        return Err(parse_err(label_name, format!("invalid hours `{label_cell}`")));
                    }
                    Target::Hours(h)
                }
            })
        };
        Ok(Record {
            instance: Instance {
                index: self.next_index,
                values,
            },
            target,
        })
    }
}

impl<R: Read> Iterator for CsvStream<R> {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.empty {
            return None;
        }
        match self.reader.read_record(&mut self.record) {
            Ok(false) => None,
            Ok(true) => {
                self.row += 1;
                let out = self.parse_current();
                if out.is_ok() {
                    self.next_index += 1;
                }
                Some(out)
            }
            Err(e) => Some(Err(Error::csv(&self.path, e))),
        }
    }
}

/// Pulls up to `n` records from `stream`, advancing it past them.
pub fn take<T, I>(stream: &mut I, n: usize) -> Result<Vec<T>>
where
    I: Iterator<Item = Result<T>>,
{
    stream.by_ref().take(n).collect()
}
