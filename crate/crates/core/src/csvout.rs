//! CSV emission: header row, comma separated, floats with 17 significant digits.

use std::path::Path;

use crate::binio::write_atomic;
use crate::error::{Error, Result};

/// `x` with 17 significant digits (round-trips every f64).
pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}").to_lowercase()
    }
}

#[derive(Clone, Debug)]
pub struct Csv {
    text: String,
    cols: usize,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut c = Csv {
            text: String::new(),
            cols: header.len(),
        };
        c.push_line(header);
        c
    }

    fn push_line<S: AsRef<str>>(&mut self, cells: &[S]) {
        for (i, s) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            self.text.push_str(s.as_ref());
        }
        self.text.push('\n');
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) -> Result<()> {
        if cells.len() != self.cols {
            return Err(Error::InvalidInput(format!(
                "csv row has {} cells, header has {}",
                cells.len(),
                self.cols
            )));
        }
        self.push_line(cells);
        Ok(())
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 12345.678, 0.0] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
        assert_eq!(float(f64::NAN), "nan");
    }

    #[test]
    fn row_width_checked() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(&["1", "2"]).unwrap();
        assert!(c.row(&["1"]).is_err());
        assert_eq!(c.as_str(), "a,b\n1,2\n");
    }
}
