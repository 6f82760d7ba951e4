//! CSV ingestion: a header row, numeric feature columns and optional
//! response, survival, strata and weight columns. Errors carry the file
//! line and column name.

use std::collections::HashMap;
use std::path::Path;

use enetpath::{Error, FeatureMatrix, Result, SurvivalResponse, Weights};

/// Which columns hold the response.
#[derive(Debug, Clone, PartialEq)]
pub enum ResponseSpec {
    None,
    Column(String),
    Survival {
        time: String,
        status: String,
        start: Option<String>,
    },
}

#[derive(Debug, Clone)]
pub struct IngestSpec {
    pub response: ResponseSpec,
    pub strata: Option<String>,
    pub weights: Option<String>,
    /// Explicit feature columns in order; otherwise every column not used
    /// for the response, strata or weights.
    pub features: Option<Vec<String>>,
    /// Columns left out of the default feature set.
    pub ignore: Vec<String>,
    pub sparse: bool,
}

#[derive(Debug)]
pub struct Dataset {
    pub x: FeatureMatrix,
    pub feature_names: Vec<String>,
    pub y: Option<Vec<f64>>,
    pub survival: Option<SurvivalResponse>,
    pub strata: Option<Vec<String>>,
    pub weights: Weights,
}

fn csv_error(line: u64, column: &str, message: impl Into<String>) -> Error {
    Error::Csv {
        row: line as usize,
        column: column.to_string(),
        message: message.into(),
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "NaN" | "nan" | "null")
}

fn parse_number(cell: &str, line: u64, column: &str) -> Result<f64> {
    if is_missing(cell) {
        return Err(csv_error(line, column, "missing value"));
    }
    let v: f64 = cell
        .parse()
        .map_err(|_| csv_error(line, column, format!("non-numeric value {cell:?}")))?;
    if !v.is_finite() {
        return Err(csv_error(line, column, format!("non-finite value {cell:?}")));
    }
    Ok(v)
}

fn parse_status(cell: &str, line: u64, column: &str) -> Result<bool> {
    match cell.to_ascii_lowercase().as_str() {
        "1" | "1.0" | "true" => Ok(true),
        "0" | "0.0" | "false" => Ok(false),
        _ if is_missing(cell) => Err(csv_error(line, column, "missing value")),
        _ => Err(csv_error(line, column, format!("status must be 0 or 1, got {cell:?}"))),
    }
}

/// Header names and raw cells with their file line numbers.
struct Table {
    header: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => csv_error(1, "", format!("{other:?}")),
        })?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(1, "", e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut seen = HashMap::new();
    for name in &header {
        if seen.insert(name.as_str(), ()).is_some() {
            return Err(csv_error(1, name, "duplicate column name"));
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(line, "", e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(csv_error(
                line,
                "",
                format!("row has {} fields, header has {}", record.len(), header.len()),
            ));
        }
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(Error::Empty("data rows"));
    }
    Ok(Table { header, rows })
}

impl Table {
    fn index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| csv_error(1, name, "missing column"))
    }

    fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.index(name)?;
        self.rows.iter().map(|(line, r)| parse_number(&r[j], *line, name)).collect()
    }

    fn strings(&self, name: &str) -> Result<Vec<String>> {
        let j = self.index(name)?;
        self.rows
            .iter()
            .map(|(line, r)| {
                if is_missing(&r[j]) {
                    Err(csv_error(*line, name, "missing value"))
                } else {
                    Ok(r[j].clone())
                }
            })
            .collect()
    }

    fn statuses(&self, name: &str) -> Result<Vec<bool>> {
        let j = self.index(name)?;
        self.rows.iter().map(|(line, r)| parse_status(&r[j], *line, name)).collect()
    }
}

/// Reads raw numeric columns by name, or every column when `names` is
/// `None`.
pub fn read_columns(path: &Path, names: Option<&[String]>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let table = read_table(path)?;
    let names: Vec<String> = match names {
        Some(n) => n.to_vec(),
        None => table.header.clone(),
    };
    let cols = names.iter().map(|n| table.numbers(n)).collect::<Result<Vec<_>>>()?;
    Ok((names, cols))
}

pub fn ingest_csv(path: &Path, spec: &IngestSpec) -> Result<Dataset> {
    let table = read_table(path)?;
    let n = table.rows.len();

    let mut used: Vec<&str> = Vec::new();
    match &spec.response {
        ResponseSpec::None => {}
        ResponseSpec::Column(c) => used.push(c),
        ResponseSpec::Survival { time, status, start } => {
            used.push(time);
            used.push(status);
            if let Some(s) = start {
                used.push(s);
            }
        }
    }
    used.extend(spec.strata.as_deref());
    used.extend(spec.weights.as_deref());
    used.extend(spec.ignore.iter().map(String::as_str));
    for name in &used {
        table.index(name)?;
    }

    let feature_names: Vec<String> = match &spec.features {
        Some(f) => f.clone(),
        None => table
            .header
            .iter()
            .filter(|h| !used.contains(&h.as_str()))
            .cloned()
            .collect(),
    };
    if feature_names.is_empty() {
        return Err(Error::Empty("feature columns"));
    }
    let columns: Vec<Vec<f64>> = feature_names.iter().map(|f| table.numbers(f)).collect::<Result<_>>()?;
    let p = columns.len();
    let x = if spec.sparse {
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for col in &columns {
            for (i, &v) in col.iter().enumerate() {
                if v != 0.0 {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        FeatureMatrix::csc(n, p, col_ptr, row_idx, values)?
    } else {
        FeatureMatrix::dense(n, p, columns.into_iter().flatten().collect())?
    };

    let (y, survival, strata, weights) = response_parts(&table, spec)?;
    Ok(Dataset {
        x,
        feature_names,
        y,
        survival,
        strata,
        weights,
    })
}

/// Response, strata and weights of the rows of a table.
type ResponseParts = (Option<Vec<f64>>, Option<SurvivalResponse>, Option<Vec<String>>, Weights);

fn response_parts(table: &Table, spec: &IngestSpec) -> Result<ResponseParts> {
    let n = table.rows.len();
    let weights = match &spec.weights {
        Some(w) => Weights::new(table.numbers(w)?)?,
        None => Weights::uniform(n),
    };
    let strata = spec.strata.as_deref().map(|s| table.strings(s)).transpose()?;

    let (y, survival) = match &spec.response {
        ResponseSpec::None => (None, None),
        ResponseSpec::Column(c) => (Some(table.numbers(c)?), None),
        ResponseSpec::Survival { time, status, start } => {
            let stop = table.numbers(time)?;
            let d = table.statuses(status)?;
            let surv = match start {
                Some(s) => {
                    let begin = table.numbers(s)?;
                    for (i, (&a, &b)) in begin.iter().zip(&stop).enumerate() {
                        let line = table.rows[i].0;
                        if a < 0.0 {
                            return Err(csv_error(line, s, format!("start time {a} is negative")));
                        }
                        if b <= a {
                            return Err(csv_error(line, time, format!("stop time {b} does not exceed start time {a}")));
                        }
                    }
                    SurvivalResponse::counting(begin, stop, d)?
                }
                None => {
                    for (i, &t) in stop.iter().enumerate() {
                        if t < 0.0 {
                            return Err(csv_error(table.rows[i].0, time, format!("time {t} is negative")));
                        }
                    }
                    SurvivalResponse::right_censored(stop, d)?
                }
            };
            let surv = match &strata {
                Some(s) => surv.with_strata(s)?,
                None => surv,
            };
            (None, Some(surv))
        }
    };
    Ok((y, survival, strata, weights))
}

/// Reads only the response, strata and weights columns.
pub fn ingest_response(path: &Path, spec: &IngestSpec) -> Result<ResponseParts> {
    response_parts(&read_table(path)?, spec)
}
