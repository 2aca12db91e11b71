//! CSV and binary artifacts.
//!
//! CSV files carry a header row, `.` decimals and 17 significant digits so
//! that every `f64` survives a round trip bit for bit. Records end in CRLF.
//!
//! The binary field format is little-endian: the magic `SFLD`, `n_t` and
//! `n_x` as `u64`, then `times`, `xs` and the time-major `values` as `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::control::TableRow;
use crate::costcome::EstimatorTrace;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::filtering::{EnsembleStats, FilterPath, ParticleEnsemble};
use crate::skorokhod::SkorokhodSolution;

const MAGIC: &[u8; 4] = b"SFLD";

/// `f64` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Anything that can be written as one CSV table.
pub trait CsvExport {
    fn headers(&self) -> Vec<&'static str>;
    /// Calls `emit` once per data row.
    fn rows(&self, emit: &mut dyn FnMut(Vec<String>) -> Result<()>) -> Result<()>;
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv { path: path.to_path_buf(), source }
}

/// Writes `item` to `path`.
pub fn export_csv<T: CsvExport + ?Sized>(item: &T, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    w.write_record(item.headers()).map_err(|e| csv_err(path, e))?;
    item.rows(&mut |row| w.write_record(&row).map_err(|e| csv_err(path, e)))?;
    w.flush().map_err(|e| Error::io(path, e))
}

impl CsvExport for ScalarField {
    fn headers(&self) -> Vec<&'static str> {
        vec!["t", "x", "value"]
    }

    fn rows(&self, emit: &mut dyn FnMut(Vec<String>) -> Result<()>) -> Result<()> {
        for (n, &t) in self.times.iter().enumerate() {
            for (i, &x) in self.xs.iter().enumerate() {
                emit(vec![fmt_f64(t), fmt_f64(x), fmt_f64(self.at(n, i))])?;
            }
        }
        Ok(())
    }
}

impl CsvExport for EstimatorTrace {
    fn headers(&self) -> Vec<&'static str> {
        vec!["t", "xhat", "value", "multiplicity"]
    }

    fn rows(&self, emit: &mut dyn FnMut(Vec<String>) -> Result<()>) -> Result<()> {
        for n in 0..self.times.len() {
            let m = if self.multiple[n] { "1" } else { "0" };
            emit(vec![fmt_f64(self.times[n]), fmt_f64(self.xhat[n]), fmt_f64(self.value[n]), m.into()])?;
        }
        Ok(())
    }
}

impl CsvExport for [TableRow] {
    fn headers(&self) -> Vec<&'static str> {
        vec!["x", "t", "V_constrained", "W", "V_penalized", "gap"]
    }

    fn rows(&self, emit: &mut dyn FnMut(Vec<String>) -> Result<()>) -> Result<()> {
        for r in self {
            emit([r.x, r.t, r.v_constrained, r.w, r.v_penalized, r.gap].iter().map(|&v| fmt_f64(v)).collect())?;
        }
        Ok(())
    }
}

impl CsvExport for ParticleEnsemble {
    fn headers(&self) -> Vec<&'static str> {
        vec!["t", "mean", "var", "ess"]
    }

    fn rows(&self, emit: &mut dyn FnMut(Vec<String>) -> Result<()>) -> Result<()> {
        for n in 0..self.times.len() {
            emit(vec![fmt_f64(self.times[n]), fmt_f64(self.mean[n]), fmt_f64(self.var[n]), fmt_f64(self.ess[n])])?;
        }
        Ok(())
    }
}

impl CsvExport for EnsembleStats {
    fn headers(&self) -> Vec<&'static str> {
        vec!["t", "mean", "var", "ess"]
    }

    fn rows(&self, emit: &mut dyn FnMut(Vec<String>) -> Result<()>) -> Result<()> {
        for n in 0..self.times.len() {
            emit(vec![fmt_f64(self.times[n]), fmt_f64(self.mean[n]), fmt_f64(self.var[n]), fmt_f64(self.n as f64)])?;
        }
        Ok(())
    }
}

impl CsvExport for SkorokhodSolution {
    fn headers(&self) -> Vec<&'static str> {
        vec!["t", "x", "delta", "free"]
    }

    fn rows(&self, emit: &mut dyn FnMut(Vec<String>) -> Result<()>) -> Result<()> {
        for n in 0..self.times.len() {
            emit(vec![fmt_f64(self.times[n]), fmt_f64(self.x[n]), fmt_f64(self.delta[n]), fmt_f64(self.free[n])])?;
        }
        Ok(())
    }
}

impl CsvExport for FilterPath {
    fn headers(&self) -> Vec<&'static str> {
        vec!["t", "x", "y", "k"]
    }

    fn rows(&self, emit: &mut dyn FnMut(Vec<String>) -> Result<()>) -> Result<()> {
        for n in 0..self.times.len() {
            emit(vec![fmt_f64(self.times[n]), fmt_f64(self.x[n]), fmt_f64(self.y[n]), fmt_f64(self.k[n])])?;
        }
        Ok(())
    }
}

/// A plain table of named numeric columns of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct Columns {
    pub names: Vec<&'static str>,
    pub data: Vec<Vec<f64>>,
}

impl Columns {
    pub fn new(names: Vec<&'static str>, data: Vec<Vec<f64>>) -> Result<Columns> {
        if names.len() != data.len() || data.windows(2).any(|w| w[0].len() != w[1].len()) {
            return Err(Error::Input("columns must be named and of equal length".into()));
        }
        Ok(Columns { names, data })
    }
}

impl CsvExport for Columns {
    fn headers(&self) -> Vec<&'static str> {
        self.names.clone()
    }

    fn rows(&self, emit: &mut dyn FnMut(Vec<String>) -> Result<()>) -> Result<()> {
        let n = self.data.first().map_or(0, |c| c.len());
        for r in 0..n {
            emit(self.data.iter().map(|c| fmt_f64(c[r])).collect())?;
        }
        Ok(())
    }
}

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), msg: msg.into() }
}

/// Reads a field written by [`export_csv`].
pub fn import_field_csv(path: &Path) -> Result<ScalarField> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "x", "value"] {
        return Err(format_err(path, format!("expected header t,x,value, found {}", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut times: Vec<f64> = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| format_err(path, format!("bad number in data row {}", line + 1)))
        };
        let (t, x, v) = (parse(0)?, parse(1)?, parse(2)?);
        if times.last() != Some(&t) {
            times.push(t);
        }
        if times.len() == 1 {
            xs.push(x);
        }
        values.push(v);
    }
    if times.is_empty() || values.len() != times.len() * xs.len() {
        return Err(format_err(path, "rows do not form a time-major grid"));
    }
    ScalarField::new(times, xs, values)
}

/// Writes a field in the `SFLD` binary format.
pub fn write_field_binary(field: &ScalarField, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    put(MAGIC)?;
    put(&(field.n_t() as u64).to_le_bytes())?;
    put(&(field.n_x() as u64).to_le_bytes())?;
    for v in field.times.iter().chain(&field.xs).chain(&field.values) {
        put(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a field in the `SFLD` binary format.
pub fn read_field_binary(path: &Path) -> Result<ScalarField> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != MAGIC {
        return Err(format_err(path, "missing SFLD magic"));
    }
    let mut word = [0u8; 8];
    let mut next_u64 = |r: &mut BufReader<File>| -> Result<u64> {
        r.read_exact(&mut word).map_err(|e| Error::io(path, e))?;
        Ok(u64::from_le_bytes(word))
    };
    let n_t = next_u64(&mut r)? as usize;
    let n_x = next_u64(&mut r)? as usize;
    let total = n_t
        .checked_mul(n_x)
        .and_then(|v| v.checked_add(n_t + n_x))
        .ok_or_else(|| format_err(path, "header sizes overflow"))?;
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
    if buf.len() != total * 8 {
        return Err(format_err(path, format!("expected {} payload bytes, found {}", total * 8, buf.len())));
    }
    let all: Vec<f64> = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let times = all[..n_t].to_vec();
    let xs = all[n_t..n_t + n_x].to_vec();
    let values = all[n_t + n_x..].to_vec();
    ScalarField::new(times, xs, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field() -> ScalarField {
        ScalarField::from_fn(&[0.0, 0.1, 0.2], &[0.0, 0.5, 1.0, 1.5], |x, t| (x * 3.7).sin() + t / 3.0)
    }

    #[test]
    fn constant_field_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let f = ScalarField::from_fn(&[0.0, 1.0], &[0.0, 1.0], |_, _| 2.5);
        export_csv(&f, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.split("\r\n").filter(|l| !l.is_empty()).collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "t,x,value");
        assert!(lines[1..].iter().all(|l| l.ends_with("2.5000000000000000e0")));
    }

    #[test]
    fn trace_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        let tr = EstimatorTrace { times: vec![0.0], xhat: vec![1.0], value: vec![0.0], multiple: vec![true] };
        export_csv(&tr, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,xhat,value,multiplicity\r\n"));
        assert!(text.trim_end().ends_with(",1"));
    }

    #[test]
    fn table_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("table.csv");
        let rows: Vec<TableRow> = vec![];
        export_csv(rows.as_slice(), &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "x,t,V_constrained,W,V_penalized,gap\r\n");
    }

    #[test]
    fn csv_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let f = field();
        export_csv(&f, &p).unwrap();
        let g = import_field_csv(&p).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn binary_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        let f = field();
        write_field_binary(&f, &p).unwrap();
        assert_eq!(read_field_binary(&p).unwrap(), f);
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_field_binary(&p), Err(Error::Format { .. })));
        bytes[0] = b'X';
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_field_binary(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn io_errors_carry_the_path() {
        let p = Path::new("/nonexistent-dir/x.csv");
        let e = export_csv(&field(), p).unwrap_err();
        assert!(e.is_io());
        assert!(e.to_string().contains("/nonexistent-dir/x.csv"));
        assert!(read_field_binary(p).unwrap_err().is_io());
    }

    #[test]
    fn bad_header_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "a,b,c\n1,2,3\n").unwrap();
        assert!(matches!(import_field_csv(&p), Err(Error::Format { .. })));
    }

    proptest! {
        #[test]
        fn fmt_round_trips(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
