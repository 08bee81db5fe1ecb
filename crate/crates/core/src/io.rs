//! Plain-text serialization: CSV matrices, textual density matrices, and
//! number formatting helpers.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::{Error, Result, C64};

/// Shortest round-trip representation; parsing it back gives the same bits.
pub fn full(x: f64) -> String {
    format!("{x:?}")
}

/// Twelve significant digits, for human-readable tables.
pub fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.11e}")
}

/// Row-major CSV without header, full precision.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| full(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{v:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Parse("ragged CSV matrix".into()));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// Density matrix as `row,col,re,im` lines, one per nonzero entry, preceded
/// by a `# dim D` header.
pub fn state_to_text(m: &DMatrix<C64>) -> String {
    let mut out = format!("# dim {}\n", m.nrows());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            if z.re != 0.0 || z.im != 0.0 {
                let _ = writeln!(out, "{i},{j},{},{}", full(z.re), full(z.im));
            }
        }
    }
    out
}

pub fn state_from_text(text: &str) -> Result<DMatrix<C64>> {
    let mut dim = None;
    let mut entries = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(rest) = line.strip_prefix("# dim") {
            dim = Some(rest.trim().parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(Error::Parse(format!("expected row,col,re,im: {line:?}")));
        }
        let p = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
        let pi = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
        entries.push((pi(f[0])?, pi(f[1])?, C64::new(p(f[2])?, p(f[3])?)));
    }
    let dim = dim.ok_or_else(|| Error::Parse("missing '# dim' header".into()))?;
    let mut m = DMatrix::zeros(dim, dim);
    for (i, j, z) in entries {
        if i >= dim || j >= dim {
            return Err(Error::Parse(format!("entry ({i},{j}) outside dimension {dim}")));
        }
        m[(i, j)] = z;
    }
    Ok(m)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(vals in proptest::collection::vec(-1e6f64..1e6, 9)) {
            let m = DMatrix::from_row_slice(3, 3, &vals);
            let back = matrix_from_csv(&matrix_to_csv(&m)).unwrap();
            prop_assert_eq!(m, back);
        }

        #[test]
        fn state_text_round_trip(re in proptest::collection::vec(-1.0f64..1.0, 4),
                                 im in proptest::collection::vec(-1.0f64..1.0, 4)) {
            let m = DMatrix::from_fn(2, 2, |i, j| C64::new(re[2 * i + j], im[2 * i + j]));
            prop_assert_eq!(state_from_text(&state_to_text(&m)).unwrap(), m);
        }
    }

    #[test]
    fn sig12_digits() {
        assert_eq!(sig12(1.375), "1.37500000000e0");
        assert_eq!(sig12(0.0), "0");
    }

    #[test]
    fn bad_state_text() {
        assert!(state_from_text("0,0,1,0\n").is_err());
        assert!(state_from_text("# dim 1\n1,0,1,0\n").is_err());
    }
}
