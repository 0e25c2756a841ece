//! CSV and JSON persistence shared by the dataset, classifier and geometry artifacts.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// 17 significant digits: enough for an exact `f64` round trip.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::validation(format!("line {line}: cannot parse {s:?} as a number")))
}

pub(crate) fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Reader::from_reader(file))
}

/// Writes an arbitrary table of numbers under the given header.
pub fn write_table<R: AsRef<[f64]>>(path: &Path, header: &[&str], rows: &[R]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.as_ref().iter().map(|&x| fmt_f64(x)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Like [`write_table`], with a leading 1-based integer index column.
pub fn write_indexed_table<R: AsRef<[f64]>>(
    path: &Path,
    header: &[&str],
    rows: &[R],
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for (i, r) in rows.iter().enumerate() {
        let rec = std::iter::once((i + 1).to_string()).chain(r.as_ref().iter().map(|&x| fmt_f64(x)));
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub(crate) fn write_labeled_csv(path: &Path, samples: &Matrix, labels: &[usize]) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["label".to_string()];
    header.extend((1..=samples.cols()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for (row, &label) in samples.iter_rows().zip(labels) {
        let mut rec = Vec::with_capacity(row.len() + 1);
        rec.push((label + 1).to_string());
        rec.extend(row.iter().map(|&x| fmt_f64(x)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub(crate) fn read_labeled_csv(path: &Path) -> Result<(Matrix, Vec<usize>)> {
    let mut r = reader(path)?;
    let header = r.headers()?.clone();
    if header.get(0) != Some("label") {
        return Err(Error::validation(format!(
            "{}: first column must be `label`",
            path.display()
        )));
    }
    let cols = header.len() - 1;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let label: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::validation(format!("line {line}: bad label {:?}", &rec[0])))?;
        if label == 0 {
            return Err(Error::validation(format!("line {line}: labels are 1-based")));
        }
        labels.push(label - 1);
        for field in rec.iter().skip(1) {
            data.push(parse_f64(field, line)?);
        }
    }
    let m = Matrix::from_vec(labels.len(), cols, data)?;
    Ok((m, labels))
}

/// Plain numeric matrix with header `c1,...,cd`.
pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    let header: Vec<String> = (1..=m.cols()).map(|j| format!("c{j}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<&[f64]> = m.iter_rows().collect();
    write_table(path, &header, &rows)
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let mut r = reader(path)?;
    let cols = r.headers()?.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        for field in rec?.iter() {
            data.push(parse_f64(field, i + 2)?);
        }
        rows += 1;
    }
    Matrix::from_vec(rows, cols, data)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digit_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn labeled_csv_rejects_zero_label() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "label,x1\n0,1.0\n").unwrap();
        assert!(read_labeled_csv(&p).is_err());
    }
}
