//! MacKay alist and plain 0/1 text readers and writers.
//!
//! alist layout:
//!
//! ```text
//! N M                 columns, rows
//! max_col_deg max_row_deg
//! col degrees (N values)
//! row degrees (M values)
//! N lists of 1-indexed row positions, one per column
//! M lists of 1-indexed column positions, one per row
//! ```
//!
//! A `0` anywhere inside a position list is padding and is skipped, so both
//! padded and unpadded files are accepted.

use std::fmt::Write as _;
use std::path::Path;

use super::{BitMatrix, CodeError};

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)))
            .collect::<Vec<_>>();
        let last_line = text.lines().count().max(1);
        Tokens {
            items,
            pos: 0,
            last_line,
        }
    }

    fn next_usize(&mut self, what: &str) -> Result<(usize, usize), CodeError> {
        let Some(&(line, tok)) = self.items.get(self.pos) else {
            return Err(CodeError::Parse {
                line: self.last_line,
                msg: format!("unexpected end of file while reading {what}"),
            });
        };
        self.pos += 1;
        tok.parse::<usize>()
            .map(|v| (line, v))
            .map_err(|_| CodeError::Parse {
                line,
                msg: format!("expected a non-negative integer for {what}, found {tok:?}"),
            })
    }

    /// Next value that is not `0` padding.
    fn next_position(&mut self, what: &str) -> Result<(usize, usize), CodeError> {
        loop {
            let (line, v) = self.next_usize(what)?;
            if v != 0 {
                return Ok((line, v));
            }
        }
    }
}

/// Parses a MacKay alist description into a [`BitMatrix`].
pub fn parse_alist(text: &str) -> Result<BitMatrix, CodeError> {
    let mut tok = Tokens::new(text);
    let (line, n) = tok.next_usize("column count")?;
    let (_, m) = tok.next_usize("row count")?;
    if n == 0 || m == 0 {
        return Err(CodeError::Parse {
            line,
            msg: format!("matrix dimensions must be positive, got {n} columns x {m} rows"),
        });
    }
    let (line_mc, max_col) = tok.next_usize("max column degree")?;
    let (line_mr, max_row) = tok.next_usize("max row degree")?;
    let mut col_deg = Vec::with_capacity(n);
    for _ in 0..n {
        let (line, d) = tok.next_usize("column degree")?;
        if d > max_col || d > m {
            return Err(CodeError::Parse {
                line,
                msg: format!("column degree {d} exceeds max {max_col} or row count {m}"),
            });
        }
        col_deg.push(d);
    }
    let mut row_deg = Vec::with_capacity(m);
    for _ in 0..m {
        let (line, d) = tok.next_usize("row degree")?;
        if d > max_row || d > n {
            return Err(CodeError::Parse {
                line,
                msg: format!("row degree {d} exceeds max {max_row} or column count {n}"),
            });
        }
        row_deg.push(d);
    }
    if col_deg.iter().max() != Some(&max_col) {
        return Err(CodeError::Parse {
            line: line_mc,
            msg: format!("max column degree {max_col} does not match the degree list"),
        });
    }
    if row_deg.iter().max() != Some(&max_row) {
        return Err(CodeError::Parse {
            line: line_mr,
            msg: format!("max row degree {max_row} does not match the degree list"),
        });
    }

    let mut h = BitMatrix::zeros(m, n)?;
    for (c, &deg) in col_deg.iter().enumerate() {
        for _ in 0..deg {
            let (line, r) = tok.next_position("column position list")?;
            if r > m {
                return Err(CodeError::Parse {
                    line,
                    msg: format!("row position {r} out of range 1..={m} (column {})", c + 1),
                });
            }
            if h.get(r - 1, c) {
                return Err(CodeError::Parse {
                    line,
                    msg: format!("row position {r} repeated in column {}", c + 1),
                });
            }
            h.set(r - 1, c, true);
        }
    }
    let from_cols = h.clone();
    let mut from_rows = BitMatrix::zeros(m, n)?;
    for (r, &deg) in row_deg.iter().enumerate() {
        for _ in 0..deg {
            let (line, c) = tok.next_position("row position list")?;
            if c > n {
                return Err(CodeError::Parse {
                    line,
                    msg: format!("column position {c} out of range 1..={n} (row {})", r + 1),
                });
            }
            if !from_cols.get(r, c - 1) {
                return Err(CodeError::Parse {
                    line,
                    msg: format!(
                        "degree mismatch: row {} lists column {c} but column {c} does not list row {}",
                        r + 1,
                        r + 1
                    ),
                });
            }
            from_rows.set(r, c - 1, true);
        }
    }
    for (r, &deg) in row_deg.iter().enumerate() {
        let actual = from_cols.row_support(r).len();
        if actual != deg {
            return Err(CodeError::Parse {
                line: line_mr,
                msg: format!(
                    "degree mismatch: row {} has degree {deg} but the column lists give {actual}",
                    r + 1
                ),
            });
        }
    }
    while let Some(&(line, t)) = tok.items.get(tok.pos) {
        if t != "0" {
            return Err(CodeError::Parse {
                line,
                msg: format!("trailing data {t:?} after position lists"),
            });
        }
        tok.pos += 1;
    }
    debug_assert_eq!(from_rows, from_cols);
    Ok(h)
}

/// Writes `h` as a padded alist.
pub fn emit_alist(h: &BitMatrix) -> String {
    let col_lists: Vec<Vec<usize>> = (0..h.cols()).map(|c| h.col_support(c)).collect();
    let row_lists: Vec<Vec<usize>> = (0..h.rows()).map(|r| h.row_support(r)).collect();
    let max_col = col_lists.iter().map(Vec::len).max().unwrap_or(0);
    let max_row = row_lists.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", h.cols(), h.rows());
    let _ = writeln!(out, "{max_col} {max_row}");
    let join = |v: Vec<String>| v.join(" ");
    let _ = writeln!(out, "{}", join(col_lists.iter().map(|l| l.len().to_string()).collect()));
    let _ = writeln!(out, "{}", join(row_lists.iter().map(|l| l.len().to_string()).collect()));
    for (lists, width) in [(&col_lists, max_col), (&row_lists, max_row)] {
        for l in lists {
            let mut items: Vec<String> = l.iter().map(|i| (i + 1).to_string()).collect();
            items.resize(width, "0".to_string());
            let _ = writeln!(out, "{}", join(items));
        }
    }
    out
}

/// Parses one row per line of whitespace-separated 0/1 entries. Blank lines
/// and lines starting with `#` are ignored.
pub fn parse_plain(text: &str) -> Result<BitMatrix, CodeError> {
    let mut rows: Vec<Vec<u8>> = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| match t {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                _ => Err(CodeError::Parse {
                    line: i + 1,
                    msg: format!("expected 0 or 1, found {t:?}"),
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(CodeError::Parse {
                    line: i + 1,
                    msg: format!("row has {} entries, expected {w}", row.len()),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CodeError::Parse {
            line: 1,
            msg: "no matrix rows found".into(),
        });
    }
    BitMatrix::from_rows(&rows)
}

pub fn emit_plain(h: &BitMatrix) -> String {
    let mut out = String::new();
    for r in 0..h.rows() {
        let row: Vec<&str> = h.row(r).iter().map(|&b| if b == 1 { "1" } else { "0" }).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

/// Reads a PCM file, choosing the format by extension: `.alist` is alist,
/// anything else is tried as plain text.
pub fn read_pcm(path: &Path) -> Result<BitMatrix, CodeError> {
    let text = std::fs::read_to_string(path).map_err(|e| CodeError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    if path.extension().is_some_and(|e| e == "alist") {
        parse_alist(&text)
    } else {
        parse_plain(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "3 2\n2 2\n1 2 1\n2 2\n1 0\n1 2\n2 0\n1 2\n2 3\n";

    #[test]
    fn small_matrix() {
        let h = parse_alist(SMALL).unwrap();
        assert_eq!(h, BitMatrix::from_rows(&[[1u8, 1, 0], [0, 1, 1]]).unwrap());
        assert_eq!(h.count_ones(), 4);
    }

    #[test]
    fn unpadded_and_reflowed_input() {
        let text = "3 2 2 2\n1 2 1 2 2\n1\n1 2\n2\n1 2\n2 3";
        assert_eq!(parse_alist(text).unwrap(), parse_alist(SMALL).unwrap());
    }

    #[test]
    fn padding_ignored_degrees_honored() {
        // Column 1 has degree 1 but its line carries an extra 0 of padding;
        // row 1 pads in front.
        let text = "3 2\n2 2\n1 2 1\n2 2\n0 1\n1 2\n2 0 0\n0 1 2\n2 3\n";
        let h = parse_alist(text).unwrap();
        assert_eq!(h.col_degrees(), vec![1, 2, 1]);
    }

    #[test]
    fn position_out_of_range() {
        let text = "3 2\n2 2\n1 2 1\n2 2\n3 0\n1 2\n2 0\n1 2\n2 3\n";
        match parse_alist(text).unwrap_err() {
            CodeError::Parse { line, msg } => {
                assert_eq!(line, 5);
                assert!(msg.contains("out of range"), "{msg}");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn degree_mismatch() {
        // Row lists disagree with column lists.
        let text = "3 2\n2 2\n1 2 1\n2 2\n1 0\n1 2\n2 0\n1 3\n2 3\n";
        match parse_alist(text).unwrap_err() {
            CodeError::Parse { line, msg } => {
                assert_eq!(line, 8);
                assert!(msg.contains("degree mismatch"), "{msg}");
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn malformed_header() {
        let err = parse_alist("3 x\n").unwrap_err();
        assert!(matches!(err, CodeError::Parse { line: 1, .. }));
        let err = parse_alist("3 2\n2 2\n1 2").unwrap_err();
        assert!(matches!(err, CodeError::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn plain_format() {
        let h = parse_plain("# tree\n1 1 0\n0 1 1\n\n").unwrap();
        assert_eq!(h, parse_alist(SMALL).unwrap());
        assert_eq!(parse_plain(&emit_plain(&h)).unwrap(), h);
        assert!(matches!(
            parse_plain("1 0\n1 1 1\n"),
            Err(CodeError::Parse { line: 2, .. })
        ));
    }
}
