use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::functionals::TimeSeries;

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

/// Renders `t,value` rows with LF endings, newline after every row.
pub fn render_csv(times: &[f64], values: &[f64]) -> Result<String> {
    if times.is_empty() {
        return Err(Error::EmptySeries);
    }
    if times.len() != values.len() {
        return Err(Error::InvalidParameter("times and values differ in length".into()));
    }
    let mut out = String::from("t,value\n");
    for (t, v) in times.iter().zip(values) {
        // writing to a String cannot fail
        let _ = writeln!(out, "{},{}", format_float(*t), format_float(*v));
    }
    Ok(out)
}

/// Writes `series` to `path` as CSV.
pub fn emit_csv(series: &TimeSeries, path: &Path) -> Result<()> {
    write_csv(series.times(), series.values(), path)
}

pub fn write_csv(times: &[f64], values: &[f64], path: &Path) -> Result<()> {
    let text = render_csv(times, values)?;
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_rows_three_lines() {
        let s = render_csv(&[0.0, 1.0], &[0.5, -2.25]).unwrap();
        assert_eq!(s, "t,value\n0.0,0.5\n1.0,-2.25\n");
        assert_eq!(s.lines().count(), 3);
    }

    #[test]
    fn tiny_values_round_trip() {
        let s = render_csv(&[3.0], &[1e-300]).unwrap();
        let field = s.lines().nth(1).unwrap().split(',').nth(1).unwrap();
        assert_eq!(field.parse::<f64>().unwrap(), 1e-300);
        let x = 0.1 + 0.2;
        assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn empty_series_is_an_error() {
        assert!(matches!(render_csv(&[], &[]), Err(Error::EmptySeries)));
    }

    #[test]
    fn unwritable_path_reports_it() {
        let err = write_csv(&[0.0], &[1.0], Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}
