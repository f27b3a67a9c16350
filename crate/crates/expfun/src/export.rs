//! Output formatting shared by the CLI: floats with 17 significant digits
//! (lossless f64 round-trip), plain CSV with headers, and a writer that
//! targets a file or stdout.

use crate::error::Result;
use std::io::Write;
use std::path::Path;

/// 17 significant digits in scientific notation; parses back to the same
/// bits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Minimal CSV builder: comma separators, '.' decimals, header always
/// emitted, no quoting (fields never contain commas here).
pub struct Csv {
    out: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            out: header.join(",") + "\n",
            columns: header.len(),
        }
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        assert_eq!(fields.len(), self.columns, "ragged CSV row");
        let mut first = true;
        for f in fields {
            if !first {
                self.out.push(',');
            }
            debug_assert!(!f.as_ref().contains(','), "field needs quoting");
            self.out.push_str(f.as_ref());
            first = false;
        }
        self.out.push('\n');
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// Writes to the path when given, else to stdout. Content is written in one
/// call so identical inputs yield byte-identical files.
pub fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(content.as_bytes())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trips() {
        for x in [
            2.0 / 3.0,
            0.3822450858400356,
            1e-300,
            -1.640987681935862,
            4f64.powi(-8),
        ] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn csv_shape() {
        let mut t = Csv::new(&["a", "b"]);
        t.row(&["1", "2"]);
        t.row(&[fmt_float(0.5), fmt_float(1.0)]);
        let s = t.finish();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "a,b");
        assert!(lines[2].starts_with("5.0000000000000000e-1,"));
    }

    #[test]
    fn file_output_is_exact() {
        let dir = std::env::temp_dir().join("expfun-export-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("out.csv");
        write_output(Some(&path), "x\n1\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "x\n1\n");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
