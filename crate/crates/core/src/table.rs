//! CSV tables of floats with shortest round-trip formatting.

use std::io::{self, Write};

/// Formats `x` with the fewest digits that parse back to the same f64.
/// Plain notation is used for moderate magnitudes, exponent notation
/// otherwise.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Writes a header line and one row per record.
pub fn write_table<W, I>(mut out: W, header: &[&str], rows: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut writer = csv::Writer::from_writer(&mut out);
    writer.write_record(header).map_err(io::Error::other)?;
    for row in rows {
        writer.write_record(row.iter().map(|v| fmt_f64(*v))).map_err(io::Error::other)?;
    }
    writer.flush()?;
    drop(writer);
    out.flush()
}

/// [`write_table`] into a string.
pub fn table_string<I>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut buf = Vec::new();
    write_table(&mut buf, header, rows).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is ASCII")
}
