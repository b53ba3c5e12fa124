use std::fs::File;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{RecastError, Result};
use crate::scalar::Scalar;

/// Multichannel series stored as `channels × timesteps`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame<T> {
    pub values: Array2<T>,
    pub channel_names: Vec<String>,
}

impl<T: Scalar> SeriesFrame<T> {
    pub fn new(values: Array2<T>, channel_names: Vec<String>) -> Result<Self> {
        if channel_names.len() != values.nrows() {
            return Err(RecastError::Dimension {
                context: "channel names",
                expected: values.nrows(),
                actual: channel_names.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RecastError::NonFinite("series values"));
        }
        Ok(Self { values, channel_names })
    }

    /// Frame with generated names `ch0, ch1, …`.
    pub fn from_values(values: Array2<T>) -> Result<Self> {
        let names = (0..values.nrows()).map(|c| format!("ch{c}")).collect();
        Self::new(values, names)
    }

    pub fn channels(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.ncols() == 0
    }

    /// Contiguous time slice.
    pub fn slice(&self, range: Range<usize>) -> SeriesFrame<T> {
        SeriesFrame {
            values: self.values.slice(s![.., range]).to_owned(),
            channel_names: self.channel_names.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimestampColumn {
    /// Drop the first column when its header is `date` or its first value is not numeric.
    #[default]
    Auto,
    Present,
    Absent,
}

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub timestamp: TimestampColumn,
}

/// Reads a headed, comma-separated file into a frame. Every column except an
/// optional leading timestamp column becomes a channel, in header order.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, options: &CsvOptions) -> Result<SeriesFrame<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| RecastError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let csv_err = |source: csv::Error| match source.kind() {
        csv::ErrorKind::UnequalLengths { pos, expected_len, len } => RecastError::data(format!(
            "{}: ragged row at line {}: expected {expected_len} fields, found {len}",
            path.display(),
            pos.as_ref().map_or(0, |p| p.line()),
        )),
        _ => RecastError::Csv {
            path: path.to_path_buf(),
            source,
        },
    };
    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() {
        return Err(RecastError::data(format!("{}: missing header row", path.display())));
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        rows.push(record.map_err(csv_err)?);
    }

    let skip = match options.timestamp {
        TimestampColumn::Present => 1,
        TimestampColumn::Absent => 0,
        TimestampColumn::Auto => {
            let named_date = headers[0].eq_ignore_ascii_case("date");
            let first_unparsable = rows
                .first()
                .and_then(|r| r.get(0))
                .is_some_and(|v| f64::from_str(v.trim()).is_err());
            usize::from(named_date || first_unparsable)
        }
    };
    let channel_names: Vec<String> = headers[skip..].to_vec();
    if channel_names.is_empty() {
        return Err(RecastError::data(format!("{}: no numeric columns", path.display())));
    }

    let channels = channel_names.len();
    let mut values = Array2::<T>::zeros((channels, rows.len()));
    for (t, record) in rows.iter().enumerate() {
        for c in 0..channels {
            let cell = record.get(c + skip).unwrap_or("").trim();
            let parsed = f64::from_str(cell)
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    RecastError::data(format!(
                        "{}: non-numeric value {cell:?} in column {:?}, data row {}",
                        path.display(),
                        channel_names[c],
                        t + 1
                    ))
                })?;
            values[[c, t]] = T::lit(parsed);
        }
    }
    SeriesFrame::new(values, channel_names)
}

/// Writes one row per time step with the channel names as header and no timestamp column.
pub fn save_csv<T: Scalar>(frame: &SeriesFrame<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| RecastError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer.write_record(&frame.channel_names).map_err(csv_err)?;
    for t in 0..frame.len() {
        writer
            .write_record(frame.values.column(t).iter().map(|v| format!("{:?}", v.as_f64())))
            .map_err(csv_err)?;
    }
    writer.flush().map_err(|source| RecastError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    /// 6:2:2 split.
    Ett,
    /// 7:1:2 split.
    #[default]
    Other,
}

impl FromStr for DatasetKind {
    type Err = RecastError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ett" => Ok(Self::Ett),
            "other" => Ok(Self::Other),
            _ => Err(RecastError::config(format!("unknown dataset kind {s:?} (expected ett|other)"))),
        }
    }
}

/// Chronological train/valid/test split; each part must hold at least `min_len` steps.
pub fn split_frame<T: Scalar>(
    frame: &SeriesFrame<T>,
    kind: DatasetKind,
    min_len: usize,
) -> Result<(SeriesFrame<T>, SeriesFrame<T>, SeriesFrame<T>)> {
    let total = frame.len();
    let (train_parts, valid_parts) = match kind {
        DatasetKind::Ett => (6, 2),
        DatasetKind::Other => (7, 1),
    };
    let train_end = total * train_parts / 10;
    let valid_end = total * (train_parts + valid_parts) / 10;
    let ranges = [0..train_end, train_end..valid_end, valid_end..total];
    for (name, range) in ["train", "valid", "test"].iter().zip(&ranges) {
        if range.len() < min_len.max(1) {
            return Err(RecastError::data(format!(
                "{name} split has {} steps but a window needs {min_len}",
                range.len()
            )));
        }
    }
    let [train, valid, test] = ranges;
    Ok((frame.slice(train), frame.slice(valid), frame.slice(test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn save_then_load_is_bitwise() {
        let values = Array2::from_shape_fn((2, 5), |(c, t)| (c as f64 + 0.1) * (t as f64).sin() / 3.0);
        let frame = SeriesFrame::new(values, vec!["x".into(), "y".into()]).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_csv(&frame, f.path()).unwrap();
        let back: SeriesFrame<f64> = load_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(back, frame);
    }

    #[test]
    fn reads_plain_numeric_csv() {
        let f = write_csv("a,b\n1,2\n3,4\n5,6\n");
        let frame: SeriesFrame<f64> = load_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(frame.channels(), 2);
        assert_eq!(frame.len(), 3);
        assert_eq!(frame.values.row(1).to_vec(), vec![2.0, 4.0, 6.0]);
        assert_eq!(frame.channel_names, vec!["a", "b"]);
    }

    #[test]
    fn drops_date_column() {
        let f = write_csv("date,OT,HUFL\n2016-07-01 00:00:00,1.5,2\n2016-07-01 01:00:00,2.5,3\n");
        let frame: SeriesFrame<f64> = load_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(frame.channel_names, vec!["OT", "HUFL"]);
        assert_eq!(frame.values.row(0).to_vec(), vec![1.5, 2.5]);
    }

    #[test]
    fn detects_unnamed_timestamp_by_value() {
        let f = write_csv("time,x\n2020-01-01,1\n2020-01-02,2\n");
        let frame: SeriesFrame<f64> = load_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(frame.channels(), 1);
    }

    #[test]
    fn ett_layout_has_seven_channels() {
        let mut text = String::from("date,HUFL,HULL,MUFL,MULL,LUFL,LULL,OT\n");
        for h in 0..5 {
            text.push_str(&format!("2016-07-01 0{h}:00:00,5.8,2.0,1.5,0.4,4.2,1.3,30.5\n"));
        }
        let f = write_csv(&text);
        let frame: SeriesFrame<f64> = load_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(frame.channels(), 7);
        assert_eq!(frame.len(), 5);
    }

    #[test]
    fn rejects_non_numeric_cell() {
        let f = write_csv("a,b\n1,2\n3,oops\n");
        let err = load_csv::<f64>(f.path(), &CsvOptions::default()).unwrap_err();
        assert!(err.to_string().contains("oops"), "{err}");
    }

    #[test]
    fn rejects_ragged_rows() {
        let f = write_csv("a,b\n1,2\n3\n");
        let err = load_csv::<f64>(f.path(), &CsvOptions::default()).unwrap_err();
        assert!(err.to_string().contains("ragged"), "{err}");
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_csv::<f64>("/definitely/not/here.csv", &CsvOptions::default()).unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here.csv"));
    }

    #[test]
    fn split_ratios() {
        let frame = SeriesFrame::from_values(Array2::<f64>::zeros((2, 100))).unwrap();
        let (a, b, c) = split_frame(&frame, DatasetKind::Ett, 5).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (60, 20, 20));
        let (a, b, c) = split_frame(&frame, DatasetKind::Other, 5).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (70, 10, 20));
    }

    #[test]
    fn split_is_chronological() {
        let values = Array2::from_shape_fn((1, 50), |(_, t)| t as f64);
        let frame = SeriesFrame::from_values(values).unwrap();
        let (a, b, c) = split_frame(&frame, DatasetKind::Other, 1).unwrap();
        let last = |f: &SeriesFrame<f64>| f.values[[0, f.len() - 1]];
        assert!(last(&a) < b.values[[0, 0]]);
        assert!(last(&b) < c.values[[0, 0]]);
    }

    #[test]
    fn tiny_series_cannot_be_split() {
        let frame = SeriesFrame::from_values(Array2::<f64>::zeros((1, 10))).unwrap();
        assert!(split_frame(&frame, DatasetKind::Other, 96 + 96).is_err());
    }

    #[test]
    fn rejects_non_finite_values() {
        let mut values = Array2::<f64>::zeros((1, 3));
        values[[0, 1]] = f64::INFINITY;
        assert!(SeriesFrame::from_values(values).is_err());
    }
}
