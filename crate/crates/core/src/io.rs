//! CSV formats.
//!
//! Point patterns: header `x1,x2[,x3],mark`, one point per row in chart
//! coordinates, the mark column optional per row (empty when absent).
//! Floats use the shortest round-trip representation (exponent form for
//! very large or small magnitudes), so writing and reading back is
//! bit-exact. UTF-8, LF line endings, `.` as decimal separator.
//!
//! Time series: header `t,mean,se`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::{Geometry, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    pub coords: Vec<Vec<f64>>,
    pub marks: Vec<Option<u64>>,
}

pub fn point_pattern_header(dim: usize) -> String {
    let mut h: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    h.push("mark".into());
    h.join(",")
}

pub fn write_point_pattern(points: &[Point], marks: Option<&[u64]>, dim: usize) -> String {
    let mut s = point_pattern_header(dim);
    s.push('\n');
    for (i, p) in points.iter().enumerate() {
        for (j, v) in p.chart().iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            write!(s, "{v:?}").unwrap();
        }
        s.push(',');
        if let Some(m) = marks {
            write!(s, "{}", m[i]).unwrap();
        }
        s.push('\n');
    }
    s
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("point CSV line {line}: {msg}"))
}

pub fn read_point_pattern(text: &str) -> Result<PointPattern> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let cols: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    let has_mark = cols.last() == Some(&"mark");
    let dim = cols.len() - usize::from(has_mark);
    if dim == 0 || cols[..dim].iter().enumerate().any(|(i, c)| *c != format!("x{}", i + 1)) {
        return Err(parse_err(1, format!("expected header {}", point_pattern_header(dim.max(1)))));
    }
    let mut out = PointPattern { coords: Vec::new(), marks: Vec::new() };
    for (i, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(parse_err(i + 1, format!("expected {} fields, got {}", cols.len(), fields.len())));
        }
        let c: Vec<f64> = fields[..dim]
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| parse_err(i + 1, format!("{f:?}: {e}"))))
            .collect::<Result<_>>()?;
        let mark = if has_mark && !fields[dim].trim().is_empty() {
            Some(fields[dim].trim().parse::<u64>().map_err(|e| parse_err(i + 1, format!("mark: {e}")))?)
        } else {
            None
        };
        out.coords.push(c);
        out.marks.push(mark);
    }
    Ok(out)
}

/// Points of a pattern on the given geometry.
pub fn pattern_points(pattern: &PointPattern, geometry: Geometry) -> Result<Vec<Point>> {
    pattern.coords.iter().map(|c| geometry.point_from_chart(c)).collect()
}

pub fn write_time_series(t: &[f64], mean: &[f64], se: &[f64]) -> String {
    let mut s = String::from("t,mean,se\n");
    for ((a, b), c) in t.iter().zip(mean).zip(se) {
        writeln!(s, "{a:?},{b:?},{c:?}").unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let pts = vec![
            Point::euclidean(&[0.1, 1.0 / 3.0]),
            Point::euclidean(&[-2.5e-300, 7.0]),
            Point::euclidean(&[f64::MIN_POSITIVE, -0.0]),
        ];
        let s = write_point_pattern(&pts, Some(&[0, 0, 4]), 2);
        assert!(s.starts_with("x1,x2,mark\n"));
        let back = read_point_pattern(&s).unwrap();
        for (a, b) in pts.iter().zip(&back.coords) {
            for (x, y) in a.coords().iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert_eq!(back.marks, vec![Some(0), Some(0), Some(4)]);
    }

    #[test]
    fn marks_are_optional() {
        let p = read_point_pattern("x1,x2\n0,0\n1,0\n").unwrap();
        assert_eq!(p.coords, vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        let q = read_point_pattern("x1,x2,mark\n0.5,0.5,\n").unwrap();
        assert_eq!(q.marks, vec![None]);
    }

    #[test]
    fn bad_rows_name_the_line() {
        let e = read_point_pattern("x1,x2\n0,0\n1;0\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
    }
}
