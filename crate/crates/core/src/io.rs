//! Contour text format: one "x,y" point per line, counter-clockwise, with an
//! optional first-line header `# closed` or `# open` (closed when absent).
//! Closed contours that arrive clockwise are reversed on read.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{signed_area, Contour, Curve, OpenCurve, Point2};

/// A parsed curve file: either kind can appear on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyCurve {
    Closed(Contour<f64>),
    Open(OpenCurve<f64>),
}

impl AnyCurve {
    pub fn points(&self) -> &[Point2<f64>] {
        match self {
            AnyCurve::Closed(c) => c.points(),
            AnyCurve::Open(c) => c.points(),
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self, AnyCurve::Closed(_))
    }
}

pub fn read_curve(path: &Path) -> Result<AnyCurve> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_curve(&text, &path.display().to_string())
}

pub fn parse_curve(text: &str, origin: &str) -> Result<AnyCurve> {
    let mut closed = true;
    let mut points: Vec<Point2<f64>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            match rest.trim() {
                "closed" => closed = true,
                "open" => closed = false,
                _ => {} // other comments ignored
            }
            continue;
        }
        let mut it = line.split(',');
        let (x, y) = match (it.next(), it.next(), it.next()) {
            (Some(x), Some(y), None) => (x.trim(), y.trim()),
            _ => {
                return Err(Error::parse(
                    origin,
                    format!("line {}: expected \"x,y\"", lineno + 1),
                ))
            }
        };
        let x: f64 = x
            .parse()
            .map_err(|_| Error::parse(origin, format!("line {}: bad x value", lineno + 1)))?;
        let y: f64 = y
            .parse()
            .map_err(|_| Error::parse(origin, format!("line {}: bad y value", lineno + 1)))?;
        points.push(Point2::new(x, y));
    }
    if points.is_empty() {
        return Err(Error::parse(origin, "no points".to_string()));
    }
    if closed {
        if signed_area(&points) < 0.0 {
            points.reverse();
        }
        Ok(AnyCurve::Closed(Contour::new(points)?))
    } else {
        Ok(AnyCurve::Open(OpenCurve::new(points)?))
    }
}

pub fn write_curve(path: &Path, points: &[Point2<f64>], closed: bool) -> Result<()> {
    let mut out = String::with_capacity(points.len() * 24 + 16);
    out.push_str(if closed { "# closed\n" } else { "# open\n" });
    for p in points {
        out.push_str(&format!("{:.9},{:.9}\n", p.x, p.y));
    }
    fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_open_and_closed() {
        let dir = std::env::temp_dir().join(format!("leafmatch-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let square = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let path = dir.join("sq.contour");
        write_curve(&path, &square, true).unwrap();
        let back = read_curve(&path).unwrap();
        assert!(back.is_closed());
        assert_eq!(back.points(), &square[..]);

        let path = dir.join("seg.contour");
        write_curve(&path, &square, false).unwrap();
        let back = read_curve(&path).unwrap();
        assert!(!back.is_closed());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn clockwise_input_reversed() {
        let text = "# closed\n0,0\n0,1\n1,1\n1,0\n";
        let curve = parse_curve(text, "test").unwrap();
        assert!(curve.is_closed());
        assert!(signed_area(curve.points()) > 0.0);
    }

    #[test]
    fn bad_lines_reported() {
        assert!(parse_curve("0,0\n1\n", "t").is_err());
        assert!(parse_curve("0,0\nx,1\n", "t").is_err());
        assert!(parse_curve("", "t").is_err());
        assert!(parse_curve("# open\n1,1\n2,2\n", "t").is_err()); // too few points
    }
}
