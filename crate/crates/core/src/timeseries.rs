//! Univariate time series: ingestion, differencing and sample splits.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sampling frequency tag. Only used to pick defaults (e.g. HAC lags).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Weekly,
    Monthly,
    #[default]
    Untagged,
}

/// Ordered real observations with optional period labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    frequency: Frequency,
    labels: Option<Vec<String>>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_labels(values, None, Frequency::Untagged)
    }

    pub fn with_labels(
        values: Vec<f64>,
        labels: Option<Vec<String>>,
        frequency: Frequency,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("time series must be non-empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite observation at index {i}"
            )));
        }
        if let Some(l) = &labels {
            if l.len() != values.len() {
                return Err(Error::InvalidInput(format!(
                    "{} labels for {} observations",
                    l.len(),
                    values.len()
                )));
            }
        }
        Ok(Self {
            values,
            frequency,
            labels,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn with_frequency(mut self, frequency: Frequency) -> Self {
        self.frequency = frequency;
        self
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Label of the observation at 0-based `index`, if labels are present.
    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels
            .as_ref()
            .and_then(|l| l.get(index))
            .map(String::as_str)
    }

    /// `order`-th difference; labels are aligned with the later observation.
    pub fn difference(&self, order: usize) -> Result<TimeSeries> {
        if order == 0 {
            return Err(Error::InvalidInput("difference order must be positive".into()));
        }
        if order >= self.len() {
            return Err(Error::InsufficientData {
                needed: order + 1,
                available: self.len(),
            });
        }
        let mut v = self.values.clone();
        for _ in 0..order {
            v = v.windows(2).map(|w| w[1] - w[0]).collect();
        }
        let labels = self.labels.as_ref().map(|l| l[order..].to_vec());
        Ok(TimeSeries {
            values: v,
            frequency: self.frequency,
            labels,
        })
    }

    /// Historical length `n` and horizon `T`; the monitoring period ends at `N = ceil(nT)`.
    pub fn split(&self, n: usize, horizon: f64) -> Result<SampleSplit> {
        SampleSplit::new(n, horizon, self.len())
    }

    /// Writes one value per row, preceded by the label when present.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        match &self.labels {
            Some(labels) => {
                w.write_record(["label", "value"])?;
                for (l, v) in labels.iter().zip(&self.values) {
                    w.write_record([l.as_str(), &v.to_string()])?;
                }
            }
            None => {
                w.write_record(["value"])?;
                for v in &self.values {
                    w.write_record([v.to_string()])?;
                }
            }
        }
        w.flush().map_err(|e| Error::Io {
            path: "<csv writer>".into(),
            source: e,
        })?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(file)
    }
}

/// Selects a CSV column by header name or 0-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Name(String),
    Index(usize),
}

impl Column {
    /// Parses `"3"` as an index and anything else as a name.
    pub fn parse(s: &str) -> Column {
        s.parse::<usize>()
            .map(Column::Index)
            .unwrap_or_else(|_| Column::Name(s.to_string()))
    }

    fn describe(&self) -> String {
        match self {
            Column::Name(n) => format!("{n:?}"),
            Column::Index(i) => format!("#{i}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub column: Column,
    /// First row is a header.
    pub header: bool,
    pub label_column: Option<Column>,
    pub frequency: Frequency,
}

impl CsvOptions {
    pub fn new(column: Column) -> Self {
        Self {
            column,
            header: false,
            label_column: None,
            frequency: Frequency::Untagged,
        }
    }
}

/// Reads one numeric column from a comma-separated file.
///
/// Rows are reported 1-based counting data rows only. Blank or unparseable
/// cells are rejected: there is no imputation.
pub fn load_csv(path: &Path, opts: &CsvOptions) -> Result<TimeSeries> {
    let mut file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut buf = String::new();
    file.read_to_string(&mut buf).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(buf.as_bytes(), opts)
}

pub fn read_csv<R: Read>(reader: R, opts: &CsvOptions) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let resolve = |col: &Column, headers: Option<&csv::StringRecord>| -> Result<usize> {
        match col {
            Column::Index(i) => Ok(*i),
            Column::Name(name) => headers
                .and_then(|h| h.iter().position(|c| c == name))
                .ok_or_else(|| Error::MissingColumn(col.describe())),
        }
    };
    let headers = if opts.header {
        Some(rdr.headers()?.clone())
    } else {
        None
    };
    let value_idx = resolve(&opts.column, headers.as_ref())?;
    let label_idx = opts
        .label_column
        .as_ref()
        .map(|c| resolve(c, headers.as_ref()))
        .transpose()?;

    let mut values = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let cell = record
            .get(value_idx)
            .ok_or_else(|| Error::MissingColumn(opts.column.describe()))?;
        let v: f64 = cell.parse().map_err(|_| Error::Parse {
            row,
            value: cell.to_string(),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                row,
                value: cell.to_string(),
            });
        }
        values.push(v);
        if let (Some(l), Some(j)) = (labels.as_mut(), label_idx) {
            l.push(record.get(j).unwrap_or_default().to_string());
        }
    }
    if values.is_empty() {
        return Err(Error::EmptyColumn(opts.column.describe()));
    }
    TimeSeries::with_labels(values, labels, opts.frequency)
}

/// Historical/monitoring split: observations `1..=n` are historical,
/// `n+1..=N` are monitored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSplit {
    pub n: usize,
    #[serde(rename = "N")]
    pub total: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl SampleSplit {
    pub const DEFAULT_HORIZON: f64 = 2.0;

    pub fn new(n: usize, horizon: f64, available: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("historical size must be positive".into()));
        }
        if !(horizon >= 1.0) || !horizon.is_finite() {
            return Err(Error::InvalidInput(format!(
                "horizon T must be >= 1, got {horizon}"
            )));
        }
        let total = (n as f64 * horizon).ceil() as usize;
        if total <= n || total > available {
            return Err(Error::InsufficientData {
                needed: total.max(n + 1),
                available,
            });
        }
        Ok(Self { n, total, horizon })
    }

    /// Number of monitoring observations `N - n`.
    pub fn monitoring_len(&self) -> usize {
        self.total - self.n
    }
}
