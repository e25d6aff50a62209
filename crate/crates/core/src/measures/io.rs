//! Line-oriented measure files.
//!
//! One atom per line, `w x1 ... xd`, whitespace separated. Everything after
//! `#` is a comment. The dimension is taken from the first atom line; a
//! `# dim <d>` directive fixes it up front, which is how the null measure is
//! written. Floats are printed in shortest round-trip form, so reading back a
//! written file reproduces the measure bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::measures::AtomicMeasure;

pub fn parse_measure(text: &str) -> Result<AtomicMeasure> {
    let mut dim: Option<usize> = None;
    let mut positions = Vec::new();
    let mut weights = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let (body, comment) = match raw.find('#') {
            Some(p) => (&raw[..p], Some(&raw[p + 1..])),
            None => (raw, None),
        };
        if let Some(c) = comment {
            let mut it = c.split_whitespace();
            if it.next() == Some("dim") {
                let d: usize = it
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Parse {
                        line: line_no,
                        msg: "malformed dim directive".into(),
                    })?;
                if dim.is_some_and(|old| old != d) {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "dim directive disagrees with earlier lines".into(),
                    });
                }
                dim = Some(d);
            }
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let values = fields
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("not a number: {f:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() < 2 {
            return Err(Error::Parse {
                line: line_no,
                msg: "expected a weight followed by at least one coordinate".into(),
            });
        }
        let d = *dim.get_or_insert(values.len() - 1);
        if values.len() - 1 != d {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} coordinates, found {}", d, values.len() - 1),
            });
        }
        weights.push(values[0]);
        positions.extend_from_slice(&values[1..]);
    }
    let dim = dim.ok_or_else(|| Error::Parse {
        line: 0,
        msg: "empty measure file: no atoms and no dim directive".into(),
    })?;
    AtomicMeasure::from_flat(dim, positions, weights)
}

pub fn format_measure(m: &AtomicMeasure) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# dim {}", m.dim());
    for (x, w) in m.atoms() {
        let _ = write!(out, "{w}");
        for c in x {
            let _ = write!(out, " {c}");
        }
        out.push('\n');
    }
    out
}

pub fn read_measure(path: &Path) -> Result<AtomicMeasure> {
    let text = std::fs::read_to_string(path)?;
    parse_measure(&text)
}

pub fn write_measure(path: &Path, m: &AtomicMeasure) -> Result<()> {
    std::fs::write(path, format_measure(m))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_infers_dimension() {
        let m = parse_measure("# a comment\n0.5 1 2  # trailing\n\n1.5 -3 4e-1\n").unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.len(), 2);
        assert_eq!(m.position(1), &[-3.0, 0.4]);
        assert_eq!(m.mass(), 2.0);
    }

    #[test]
    fn rejects_ragged_lines_with_line_number() {
        let err = parse_measure("1 0\n1 0 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(parse_measure("").is_err());
        assert!(parse_measure("1 x\n").is_err());
    }

    #[test]
    fn null_measure_round_trips() {
        let z = AtomicMeasure::zero(3);
        assert_eq!(parse_measure(&format_measure(&z)).unwrap(), z);
    }
}
