//! CSV output. Floats carry 17 significant digits so they parse back to the
//! same value; lines end in LF.

use std::path::Path;

use crate::error::{Error, Result};

pub trait CsvRow {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

/// The whole table as CSV text.
pub fn render_csv<R: CsvRow>(rows: &[R]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Empty);
    }
    let mut out = R::HEADER.join(",");
    out.push('\n');
    for r in rows {
        let f = r.fields();
        debug_assert_eq!(f.len(), R::HEADER.len());
        out.push_str(&f.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Render first so an empty or failing table leaves no file behind.
pub fn emit_csv<R: CsvRow>(rows: &[R], path: &Path) -> Result<()> {
    let text = render_csv(rows)?;
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Row(f64, &'static str);

    impl CsvRow for Row {
        const HEADER: &'static [&'static str] = &["x", "name"];
        fn fields(&self) -> Vec<String> {
            vec![float(self.0), self.1.into()]
        }
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0] {
            assert_eq!(float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(float(f64::INFINITY), "inf");
    }

    #[test]
    fn one_row_two_lines() {
        let text = render_csv(&[Row(0.5, "a")]).unwrap();
        assert_eq!(text, "x,name\n5.0000000000000000e-1,a\n");
    }

    #[test]
    fn empty_rows_write_nothing() {
        let dir = std::env::temp_dir().join(format!("aircomp-empty-{}", std::process::id()));
        let rows: Vec<Row> = Vec::new();
        assert!(matches!(emit_csv(&rows, &dir), Err(Error::Empty)));
        assert!(!dir.exists());
    }
}
