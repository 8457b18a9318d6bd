//! Text formats shared by the CSV exporters.

use crate::error::{Error, Result};

/// 17 significant digits in scientific notation; parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidData(format!("not a number: `{s}`")))
}

/// Splits a CSV document into its header and rows of fields, checking the
/// header matches `expected`.
pub fn read_csv<'a>(text: &'a str, expected: &str) -> Result<Vec<Vec<&'a str>>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidData("empty CSV document".into()))?;
    if header.trim() != expected {
        return Err(Error::InvalidData(format!(
            "unexpected CSV header `{header}`, wanted `{expected}`"
        )));
    }
    let width = expected.split(',').count();
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != width {
                return Err(Error::InvalidData(format!(
                    "CSV row {} has {} fields, expected {width}",
                    i + 1,
                    fields.len()
                )));
            }
            Ok(fields)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn decimal_text_is_bit_exact(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let back = parse_f64(&fmt_f64(x)).unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.5), "-2.5000000000000000e0");
    }

    #[test]
    fn csv_header_check() {
        let rows = read_csv("a,b\n1,2\n3,4\n", "a,b").unwrap();
        assert_eq!(rows, vec![vec!["1", "2"], vec!["3", "4"]]);
        assert!(read_csv("a,c\n1,2\n", "a,b").is_err());
        assert!(read_csv("a,b\n1\n", "a,b").is_err());
    }
}
