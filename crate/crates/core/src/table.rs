//! CSV emission shared by every table the crate produces.
//!
//! Each table starts with one `#`-prefixed metadata line carrying the full
//! parameter provenance, followed by a header row and the data rows.

use std::io::Write;

use crate::error::Result;

/// Writes a metadata comment line, a header row and the rows of `records`.
pub fn write_csv<W, R, I>(mut out: W, metadata: &str, header: &[&str], records: I) -> Result<()>
where
    W: Write,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
    I: IntoIterator<Item = R>,
{
    writeln!(out, "# {}", metadata.replace('\n', " "))?;
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(header)?;
    for record in records {
        wtr.write_record(record)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Formats a float with the shortest representation that round-trips.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_metadata_then_header() {
        let mut buf = Vec::new();
        let rows = vec![vec!["0".to_string(), fmt_f64(0.5)], vec!["1".to_string(), fmt_f64(0.25)]];
        write_csv(&mut buf, "thermal n_th=1\nn_max=1", &["n", "p"], rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# thermal n_th=1 n_max=1\nn,p\n0,0.5\n1,0.25\n");
    }
}
