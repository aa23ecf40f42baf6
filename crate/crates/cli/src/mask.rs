//! Binary PGM masks: minimal reader (P2/P5) and an 8-connected
//! Moore-neighbour boundary tracer. Full image segmentation is out of scope;
//! this covers pre-segmented masks only.

use anyhow::{bail, Context, Result};
use leafmatch::geometry::{signed_area, Point2};
use std::path::Path;

pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

pub fn read_pgm(path: &Path) -> Result<Pgm> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let mut pos = 0usize;

    let mut token = |bytes: &[u8]| -> Result<String> {
        // skip whitespace and # comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            bail!("truncated PGM header");
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = token(&bytes)?;
    if magic != "P5" && magic != "P2" {
        bail!("unsupported PGM magic {magic}");
    }
    let width: usize = token(&bytes)?.parse().context("PGM width")?;
    let height: usize = token(&bytes)?.parse().context("PGM height")?;
    let maxval: usize = token(&bytes)?.parse().context("PGM maxval")?;
    if maxval == 0 || maxval > 255 {
        bail!("unsupported PGM maxval {maxval}");
    }
    let data = if magic == "P5" {
        pos += 1; // single whitespace after maxval
        let need = width * height;
        if bytes.len() < pos + need {
            bail!("truncated PGM pixel data");
        }
        bytes[pos..pos + need].to_vec()
    } else {
        let mut data = Vec::with_capacity(width * height);
        for _ in 0..width * height {
            data.push(token(&bytes)?.parse::<u8>().context("PGM pixel")?);
        }
        data
    };
    Ok(Pgm {
        width,
        height,
        data,
    })
}

/// Trace the outer boundary of the largest-first foreground blob
/// (pixel > maxval/2 is foreground) with Moore neighbour tracing. Points are
/// pixel centers in y-up coordinates, counter-clockwise.
pub fn trace_boundary(pgm: &Pgm) -> Result<Vec<Point2<f64>>> {
    let (w, h) = (pgm.width, pgm.height);
    let fg = |x: isize, y: isize| -> bool {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && pgm.data[y as usize * w + x as usize] > 127
    };
    // first foreground pixel in scan order; its west neighbour is background
    let mut start = None;
    'scan: for y in 0..h as isize {
        for x in 0..w as isize {
            if fg(x, y) {
                start = Some((x, y));
                break 'scan;
            }
        }
    }
    let Some(start) = start else {
        bail!("mask has no foreground pixels");
    };

    // Moore neighbourhood, clockwise in image (y-down) coordinates
    const DIRS: [(isize, isize); 8] = [
        (1, 0),
        (1, 1),
        (0, 1),
        (-1, 1),
        (-1, 0),
        (-1, -1),
        (0, -1),
        (1, -1),
    ];
    let mut boundary = vec![start];
    let mut cur = start;
    let mut back = 4usize; // came from the west
    let mut first_move: Option<usize> = None;
    let cap = 4 * w * h + 8;
    for _ in 0..cap {
        let mut step = None;
        for k in 1..=8 {
            let d = (back + k) % 8;
            let next = (cur.0 + DIRS[d].0, cur.1 + DIRS[d].1);
            if fg(next.0, next.1) {
                step = Some((d, next));
                break;
            }
        }
        let Some((d, next)) = step else {
            break; // isolated pixel
        };
        if cur == start {
            match first_move {
                // leaving start the same way a second time closes the loop
                Some(fm) if fm == d => break,
                None => first_move = Some(d),
                _ => {}
            }
        }
        boundary.push(next);
        cur = next;
        back = (d + 4) % 8;
    }
    while boundary.len() > 1 && boundary.last() == Some(&start) {
        boundary.pop();
    }
    if boundary.len() < 8 {
        bail!("traced boundary has only {} pixels", boundary.len());
    }
    // y-up coordinates, counter-clockwise orientation
    let mut points: Vec<Point2<f64>> = boundary
        .iter()
        .map(|&(x, y)| Point2::new(x as f64, (h as isize - 1 - y) as f64))
        .collect();
    points.dedup();
    if signed_area(&points) < 0.0 {
        points.reverse();
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled_rect_pgm(w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> Pgm {
        let mut data = vec![0u8; w * h];
        for y in y0..y1 {
            for x in x0..x1 {
                data[y * w + x] = 255;
            }
        }
        Pgm {
            width: w,
            height: h,
            data,
        }
    }

    #[test]
    fn traces_filled_square() {
        let pgm = filled_rect_pgm(64, 64, 10, 10, 50, 50);
        let pts = trace_boundary(&pgm).unwrap();
        assert!(signed_area(&pts) > 0.0);
        // perimeter of a 40x40 block traced along pixel centers
        assert!(pts.len() >= 150 && pts.len() <= 160, "got {}", pts.len());
        for p in &pts {
            let on_x = (p.x - 10.0).abs() < 1e-9 || (p.x - 49.0).abs() < 1e-9;
            let on_y = (p.y - 14.0).abs() < 1e-9 || (p.y - 53.0).abs() < 1e-9;
            assert!(on_x || on_y, "point {p:?} not on the rectangle boundary");
        }
    }

    #[test]
    fn empty_mask_errors() {
        let pgm = filled_rect_pgm(16, 16, 0, 0, 0, 0);
        assert!(trace_boundary(&pgm).is_err());
    }

    #[test]
    fn p2_and_p5_roundtrip() {
        let dir = std::env::temp_dir().join(format!("leafmatch-pgm-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p5 = dir.join("a.pgm");
        let mut bytes = b"P5\n# comment\n4 3\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 255, 0, 0, 255, 255, 0, 0, 0, 0, 0]);
        std::fs::write(&p5, bytes).unwrap();
        let img = read_pgm(&p5).unwrap();
        assert_eq!((img.width, img.height), (4, 3));
        assert_eq!(img.data[1], 255);

        let p2 = dir.join("b.pgm");
        std::fs::write(&p2, "P2\n2 2\n255\n0 255\n255 0\n").unwrap();
        let img = read_pgm(&p2).unwrap();
        assert_eq!(img.data, vec![0, 255, 255, 0]);
        std::fs::remove_dir_all(&dir).ok();
    }
}
