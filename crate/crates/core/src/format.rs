//! Text formats: `%.17g` numbers, headerless matrix CSV, mask CSV.

use std::fmt::Write as _;

use thiserror::Error;

use crate::linalg::{LinalgError, ObservationMask, SymmetricMatrix};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}, field {field}: cannot parse {text:?} as a finite number")]
    Number { line: usize, field: usize, text: String },
    #[error("no data rows")]
    Empty,
    #[error("line {line} has {found} fields, expected {expected}")]
    Ragged { line: usize, expected: usize, found: usize },
    #[error("matrix has {rows} rows and {cols} columns; expected a square matrix")]
    NotSquare { rows: usize, cols: usize },
    #[error("entry ({i},{j}) differs from ({j},{i}) by {diff:e}, beyond tolerance {tolerance:e}")]
    Asymmetric { i: usize, j: usize, diff: f64, tolerance: f64 },
    #[error("line {line}: expected `i,j`, got {text:?}")]
    MaskLine { line: usize, text: String },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// C `printf("%.17g")`: 17 significant digits, shortest of fixed or
/// scientific, trailing zeros removed.
pub fn fmt_g17(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp).max(0) as usize;
        strip_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Numeric rows of a headerless comma-separated file.
pub fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>, FormatError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, content) in data_lines(text) {
        let row = content
            .split(',')
            .enumerate()
            .map(|(k, field)| {
                let f = field.trim();
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| FormatError::Number {
                        line,
                        field: k + 1,
                        text: f.to_string(),
                    })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(FormatError::Ragged {
                    line,
                    expected: first.len(),
                    found: row.len(),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(FormatError::Empty);
    }
    Ok(rows)
}

/// Parsed square matrix and its largest asymmetry `max |A_ij − A_ji|`.
pub struct ParsedMatrix {
    pub rows: Vec<Vec<f64>>,
    pub max_asymmetry: f64,
}

pub fn parse_square(text: &str) -> Result<ParsedMatrix, FormatError> {
    let rows = parse_rows(text)?;
    let n = rows.len();
    if rows[0].len() != n {
        return Err(FormatError::NotSquare { rows: n, cols: rows[0].len() });
    }
    let mut max_asymmetry: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            max_asymmetry = max_asymmetry.max((rows[i][j] - rows[j][i]).abs());
        }
    }
    Ok(ParsedMatrix { rows, max_asymmetry })
}

/// Reads a symmetric matrix; pairs that differ by at most `tolerance` are
/// replaced by their average, larger differences are rejected.
pub fn read_symmetric(text: &str, tolerance: f64) -> Result<(SymmetricMatrix, f64), FormatError> {
    let parsed = parse_square(text)?;
    let mut rows = parsed.rows;
    let n = rows.len();
    for i in 0..n {
        for j in 0..i {
            let diff = (rows[i][j] - rows[j][i]).abs();
            if diff > tolerance || diff.is_nan() {
                return Err(FormatError::Asymmetric { i, j, diff, tolerance });
            }
            let avg = 0.5 * (rows[i][j] + rows[j][i]);
            rows[i][j] = avg;
            rows[j][i] = avg;
        }
    }
    Ok((SymmetricMatrix::from_rows(&rows)?, parsed.max_asymmetry))
}

pub fn rows_to_csv(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in rows {
        let fields: Vec<String> = row.iter().map(|v| fmt_g17(*v)).collect();
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

pub fn matrix_to_csv(m: &SymmetricMatrix) -> String {
    rows_to_csv(&m.to_rows())
}

/// One `i,j` line per observed pair, in either order; a leading `i,j`
/// header is allowed.
pub fn read_mask(text: &str, n: usize) -> Result<ObservationMask, FormatError> {
    let mut pairs = Vec::new();
    for (line, content) in data_lines(text) {
        if pairs.is_empty() && content.replace(' ', "") == "i,j" {
            continue;
        }
        let bad = || FormatError::MaskLine {
            line,
            text: content.to_string(),
        };
        let (a, b) = content.split_once(',').ok_or_else(bad)?;
        let a = a.trim().parse::<usize>().map_err(|_| bad())?;
        let b = b.trim().parse::<usize>().map_err(|_| bad())?;
        pairs.push(if a > b { (a, b) } else { (b, a) });
    }
    Ok(ObservationMask::new(n, pairs)?)
}

pub fn mask_to_csv(mask: &ObservationMask) -> String {
    let mut out = String::from("i,j\n");
    for (i, j) in mask.pairs() {
        let _ = writeln!(out, "{i},{j}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_matches_printf() {
        let cases = [
            (0.1, "0.10000000000000001"),
            (1.0, "1"),
            (0.5, "0.5"),
            (-2.25, "-2.25"),
            (1e-5, "1.0000000000000001e-05"),
            (1e20, "1e+20"),
            (123456.0, "123456"),
            (1e16, "10000000000000000"),
            (1e17, "1e+17"),
            (0.0001, "0.0001"),
            (1.0 / 3.0, "0.33333333333333331"),
            (f64::NAN, "nan"),
            (f64::INFINITY, "inf"),
            (0.0, "0"),
        ];
        for (v, s) in cases {
            assert_eq!(fmt_g17(v), s, "{v:e}");
        }
    }

    #[test]
    fn g17_round_trips() {
        for v in [std::f64::consts::PI, 1e-300, 6.02214076e23, -7.5e-8, 0.1 + 0.2] {
            assert_eq!(fmt_g17(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn matrix_csv() {
        let (m, asym) = read_symmetric("1,0.5\n0.5,2\n", 1e-9).unwrap();
        assert_eq!(asym, 0.0);
        assert_eq!(matrix_to_csv(&m), "1,0.5\n0.5,2\n");
        let (m, asym) = read_symmetric("1,0.5\n0.5000000000001,2\n", 1e-9).unwrap();
        assert!(asym > 0.0);
        assert_eq!(m.get(0, 1), m.get(1, 0));
        assert!(matches!(read_symmetric("1,0.5\n0.6,2\n", 1e-9), Err(FormatError::Asymmetric { .. })));
        assert!(matches!(read_symmetric("1,x\n0.5,2\n", 1e-9), Err(FormatError::Number { line: 1, field: 2, .. })));
        assert!(matches!(read_symmetric("1,2\n3\n", 1e-9), Err(FormatError::Ragged { .. })));
        assert!(matches!(read_symmetric("1,2,3\n4,5,6\n", 1e-9), Err(FormatError::NotSquare { .. })));
        assert!(matches!(read_symmetric("\n", 1e-9), Err(FormatError::Empty)));
    }

    #[test]
    fn mask_csv() {
        let mask = read_mask("i,j\n2,0\n0,1\n", 3).unwrap();
        assert_eq!(mask.len(), 2);
        let again = read_mask(&mask_to_csv(&mask), 3).unwrap();
        assert_eq!(mask, again);
        assert!(read_mask("0,0\n", 3).is_err());
        assert!(read_mask("0;1\n", 3).is_err());
    }
}
