//! Reading and writing collections of named series.
//!
//! CSV: a header row of series names, one column per series, every cell a
//! finite decimal number. JSON: a single object mapping name to an array of
//! numbers; key order is preserved.

use std::fs;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesFormat {
    Csv,
    Json,
}

impl SeriesFormat {
    /// `.json` selects JSON; anything else is read as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => SeriesFormat::Json,
            _ => SeriesFormat::Csv,
        }
    }
}

pub fn load_series(path: impl AsRef<Path>, format: SeriesFormat) -> Result<Vec<TimeSeries>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e.to_string()))?;
    match format {
        SeriesFormat::Csv => parse_csv(&text).map_err(|m| Error::io(path, m)),
        SeriesFormat::Json => parse_json(&text).map_err(|m| Error::io(path, m)),
    }
}

pub fn parse_csv(text: &str) -> std::result::Result<Vec<TimeSeries>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| format!("cannot read header: {e}"))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.is_empty() || headers.iter().any(String::is_empty) {
        return Err("header row must name every column".into());
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (r, record) in reader.records().enumerate() {
        // data rows are numbered from 1, after the header
        let row = r + 1;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                format!("row {row}: expected {expected_len} columns, found {len}")
            }
            _ => format!("row {row}: {e}"),
        })?;
        for (c, cell) in record.iter().enumerate() {
            let col = &headers[c];
            if cell.is_empty() {
                return Err(format!("row {row}, column '{col}': empty cell"));
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| format!("row {row}, column '{col}': cannot parse '{cell}' as a number"))?;
            if !v.is_finite() {
                return Err(format!("row {row}, column '{col}': non-finite value '{cell}'"));
            }
            columns[c].push(v);
        }
    }
    headers
        .into_iter()
        .zip(columns)
        .map(|(name, values)| TimeSeries::named(name.clone(), values).map_err(|e| format!("column '{name}': {e}")))
        .collect()
}

pub fn parse_json(text: &str) -> std::result::Result<Vec<TimeSeries>, String> {
    let value: Value = serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
    let Value::Object(map) = value else {
        return Err("top-level JSON value must be an object of name -> array".into());
    };
    let mut out = Vec::with_capacity(map.len());
    for (name, arr) in map {
        let Value::Array(items) = arr else {
            return Err(format!("series '{name}': expected an array of numbers"));
        };
        let mut values = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            let v = item
                .as_f64()
                .ok_or_else(|| format!("series '{name}', index {i}: not a number"))?;
            values.push(v);
        }
        out.push(TimeSeries::named(name.clone(), values).map_err(|e| format!("series '{name}': {e}"))?);
    }
    Ok(out)
}

fn series_name(s: &TimeSeries, idx: usize) -> String {
    s.name().map(str::to_owned).unwrap_or_else(|| format!("s{idx}"))
}

pub fn to_json(series: &[TimeSeries]) -> String {
    let mut map = Map::new();
    for (i, s) in series.iter().enumerate() {
        map.insert(
            series_name(s, i),
            Value::Array(s.values().iter().map(|&v| Value::from(v)).collect()),
        );
    }
    serde_json::to_string(&Value::Object(map)).expect("finite values serialize")
}

/// Columns must share a length for CSV output.
pub fn to_csv(series: &[TimeSeries]) -> Result<String> {
    let Some(first) = series.first() else {
        return Err(Error::invalid("nothing to write"));
    };
    let n = first.len();
    if series.iter().any(|s| s.len() != n) {
        return Err(Error::invalid("CSV output requires equal-length series"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let names: Vec<String> = series.iter().enumerate().map(|(i, s)| series_name(s, i)).collect();
    w.write_record(&names).map_err(|e| Error::invalid(e.to_string()))?;
    for r in 0..n {
        let row: Vec<String> = series.iter().map(|s| format!("{:?}", s.values()[r])).collect();
        w.write_record(&row).map_err(|e| Error::invalid(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_series(path: impl AsRef<Path>, series: &[TimeSeries], format: SeriesFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        SeriesFormat::Json => to_json(series),
        SeriesFormat::Csv => to_csv(series)?,
    };
    fs::write(path, text).map_err(|e| Error::io(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_columns_become_series() {
        let s = parse_csv("a,b\n1,4\n2,5\n3,6").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].name(), Some("a"));
        assert_eq!(s[0].values(), &[1.0, 2.0, 3.0]);
        assert_eq!(s[1].values(), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn json_object_becomes_named_series() {
        let s = parse_json(r#"{"s1":[0,1]}"#).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].name(), Some("s1"));
        assert_eq!(s[0].values(), &[0.0, 1.0]);
    }

    #[test]
    fn json_preserves_key_order() {
        let s = parse_json(r#"{"z":[1],"a":[2],"m":[3]}"#).unwrap();
        let names: Vec<_> = s.iter().map(|x| x.name().unwrap()).collect();
        assert_eq!(names, ["z", "a", "m"]);
    }

    #[test]
    fn csv_nan_cell_is_located() {
        let err = parse_csv("a,b\n1,2\n3,NaN\n").unwrap_err();
        assert!(err.contains("row 2"), "{err}");
        assert!(err.contains("'b'"), "{err}");
    }

    #[test]
    fn csv_errors_name_position() {
        let err = parse_csv("a,b\n1,2\n3\n").unwrap_err();
        assert!(err.contains("row 2"), "{err}");
        let err = parse_csv("a,b\n1,\n").unwrap_err();
        assert!(err.contains("empty cell"), "{err}");
        let err = parse_csv("a,b\n1,x\n").unwrap_err();
        assert!(err.contains("column 'b'"), "{err}");
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_series("/definitely/not/here.csv", SeriesFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here.csv"));
    }

    #[test]
    fn csv_round_trip() {
        let s = vec![
            TimeSeries::named("a", vec![0.1, -2.5e-9, 3.0]).unwrap(),
            TimeSeries::named("b", vec![1.0 / 3.0, 7.0, 1e300]).unwrap(),
        ];
        let back = parse_csv(&to_csv(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn json_round_trip_is_bit_exact(
                cols in prop::collection::vec(
                    prop::collection::vec(
                        any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..20),
                    1..5)
            ) {
                let series: Vec<TimeSeries> = cols
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| TimeSeries::named(format!("c{i}"), v).unwrap())
                    .collect();
                let back = parse_json(&to_json(&series)).unwrap();
                prop_assert_eq!(back.len(), series.len());
                for (a, b) in back.iter().zip(&series) {
                    prop_assert_eq!(a.name(), b.name());
                    let ab: Vec<u64> = a.values().iter().map(|v| v.to_bits()).collect();
                    let bb: Vec<u64> = b.values().iter().map(|v| v.to_bits()).collect();
                    prop_assert_eq!(ab, bb);
                }
            }
        }
    }
}
