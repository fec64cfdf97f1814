//! CSV input/output, grid parsing and number formatting.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{domain, Error, Result};
use crate::errormodel::ReplicateSample;

/// Reads a CSV with the named numeric columns (in any order, extra columns
/// ignored). Lines starting with `#` are skipped.
pub fn read_columns<R: Read>(reader: R, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == *n)
                .ok_or_else(|| Error::Data(format!("missing column '{n}' (header: {})", headers.iter().collect::<Vec<_>>().join(","))))
        })
        .collect::<Result<_>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (c, &i) in idx.iter().enumerate() {
            let field = rec.get(i).unwrap_or("");
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Data(format!("row {}: column '{}' is not a number: '{field}'", row + 1, names[c])))?;
            cols[c].push(v);
        }
    }
    Ok(cols)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

/// `(y, z)` columns of an observed-sample CSV.
pub fn read_observed_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut cols = read_columns(open(path)?, &["y", "z"])?;
    let z = cols.pop().unwrap_or_default();
    let y = cols.pop().unwrap_or_default();
    Ok((y, z))
}

/// A replicate CSV with columns `y,w1,w2`.
pub fn read_replicate_csv(path: &Path) -> Result<ReplicateSample> {
    let mut cols = read_columns(open(path)?, &["y", "w1", "w2"])?;
    let w2 = cols.pop().unwrap_or_default();
    let w1 = cols.pop().unwrap_or_default();
    let y = cols.pop().unwrap_or_default();
    ReplicateSample::new(y, w1, w2)
}

/// Writes `y,z` rows with round-trip decimal formatting.
pub fn write_observed_csv<W: Write>(out: W, y: &[f64], z: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["y", "z"])?;
    for (a, b) in y.iter().zip(z) {
        w.write_record([a.to_string(), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a curve table: an `x` column followed by one column per named
/// curve. Missing values (NaN) are written as empty fields.
pub fn write_curves<W: Write>(out: W, x: &[f64], curves: &[(&str, &[f64])]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["x".to_string()];
    header.extend(curves.iter().map(|(n, _)| n.to_string()));
    w.write_record(&header)?;
    for (j, xj) in x.iter().enumerate() {
        let mut rec = vec![xj.to_string()];
        for (_, c) in curves {
            rec.push(if c[j].is_finite() { c[j].to_string() } else { String::new() });
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `# {json}` provenance line.
pub fn header_line(config: &serde_json::Value) -> String {
    format!("# {config}\n")
}

/// Skips leading `#` lines of a text file and returns the remainder.
pub fn strip_comments(text: &str) -> String {
    let mut out = String::new();
    for line in BufReader::new(text.as_bytes()).lines().map_while(std::result::Result::ok) {
        if !line.starts_with('#') {
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

/// Parses `a:step:b` into the inclusive grid `a, a+step, ..., b`.
pub fn parse_step_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let nums: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>()
        .map_err(|_| domain(format!("grid '{s}' must look like start:step:end")))?;
    let [a, step, b] = nums[..] else {
        return Err(domain(format!("grid '{s}' must look like start:step:end")));
    };
    if !(step > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
        return Err(domain(format!("grid '{s}' needs step > 0 and end ≥ start")));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize;
    if count > 10_000_000 {
        return Err(domain(format!("grid '{s}' has too many points")));
    }
    Ok((0..=count).map(|k| a + k as f64 * step).collect())
}

/// Parses `lo:hi:count` into `count` equally spaced points including both ends.
pub fn parse_span_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || domain(format!("grid '{s}' must look like lo:hi:count"));
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, count] = parts[..] else { return Err(bad()) };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let count: usize = count.trim().parse().map_err(|_| bad())?;
    if count == 0 || !lo.is_finite() || !hi.is_finite() || (count > 1 && !(hi > lo)) {
        return Err(bad());
    }
    Ok(linspace(lo, hi, count))
}

/// `count` equally spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// `%g`-style formatting with `sig` significant digits.
pub fn format_sig(v: f64, sig: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_formatting() {
        assert_eq!(format_sig(0.0650123456, 6), "0.0650123");
        assert_eq!(format_sig(123456.7, 6), "123457");
        assert_eq!(format_sig(1234567.0, 6), "1.23457e+06");
        assert_eq!(format_sig(0.00001234, 6), "1.234e-05");
        assert_eq!(format_sig(-2.5, 6), "-2.5");
        assert_eq!(format_sig(1.0, 6), "1");
        assert_eq!(format_sig(0.0001, 6), "0.0001");
        assert_eq!(format_sig(999999.6, 6), "1e+06");
        assert_eq!(format_sig(0.0, 6), "0");
    }

    #[test]
    fn grids() {
        let g = parse_step_grid("0:0.2:2").unwrap();
        assert_eq!(g.len(), 11);
        assert!((g[10] - 2.0).abs() < 1e-12);
        assert!(parse_step_grid("0:0:2").is_err());
        assert!(parse_step_grid("0:0.2").is_err());
        let x = parse_span_grid("-3:3:200").unwrap();
        assert_eq!(x.len(), 200);
        assert_eq!((x[0], x[199]), (-3.0, 3.0));
        assert!(parse_span_grid("3:-3:5").is_err());
    }

    #[test]
    fn reads_columns_in_any_order() {
        let text = "# comment\nz,extra,y\n1.5,a,2\n-0.25,b,3e-1\n";
        let cols = read_columns(text.as_bytes(), &["y", "z"]).unwrap();
        assert_eq!(cols, vec![vec![2.0, 0.3], vec![1.5, -0.25]]);
        assert!(read_columns("y\n1\n".as_bytes(), &["y", "z"]).is_err());
        let err = read_columns("y,z\n1,abc\n".as_bytes(), &["y", "z"]).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
    }

    #[test]
    fn observed_round_trip() {
        let y = [0.1, -1.0 / 3.0, 1e-300];
        let z = [std::f64::consts::PI, 2.0, -7.25];
        let mut buf = Vec::new();
        write_observed_csv(&mut buf, &y, &z).unwrap();
        let cols = read_columns(buf.as_slice(), &["y", "z"]).unwrap();
        assert_eq!(cols[0], y);
        assert_eq!(cols[1], z);
    }

    #[test]
    fn curves_leave_missing_blank() {
        let mut buf = Vec::new();
        write_curves(&mut buf, &[0.0, 1.0], &[("g_ex", &[1.5, f64::NAN])]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,g_ex\n0,1.5\n1,\n");
    }
}
