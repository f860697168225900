use std::io::Write;

use crate::{BenchError, BenchRecord};

pub const CSV_COLUMNS: [&str; 15] = [
    "kernel", "variant", "backend", "precision", "m", "n", "l", "nnz", "fft_n", "reps", "min_s", "median_s", "gflops", "bytes",
    "checksum",
];

fn opt(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fields(r: &BenchRecord) -> [String; 15] {
    [
        r.kernel.to_string(),
        r.variant.to_string(),
        r.backend.to_string(),
        r.precision.to_string(),
        opt(r.m),
        opt(r.n),
        opt(r.l),
        opt(r.nnz),
        opt(r.fft_n),
        r.reps.to_string(),
        r.min_s.to_string(),
        r.median_s.to_string(),
        r.gflops.to_string(),
        r.bytes.to_string(),
        r.checksum.to_string(),
    ]
}

/// Streams records as CSV; the header is written on creation.
pub struct CsvSink<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(w: W) -> Result<Self, BenchError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_COLUMNS)?;
        out.flush()?;
        Ok(CsvSink { out })
    }

    pub fn push(&mut self, r: &BenchRecord) -> Result<(), BenchError> {
        self.out.write_record(fields(r))?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn write_csv<W: Write>(w: W, records: &[BenchRecord]) -> Result<(), BenchError> {
    let mut sink = CsvSink::new(w)?;
    records.iter().try_for_each(|r| sink.push(r))
}

/// Space-aligned table with the CSV columns.
pub fn write_table<W: Write>(mut w: W, records: &[BenchRecord]) -> Result<(), BenchError> {
    let rows: Vec<[String; 15]> = records.iter().map(fields).collect();
    let widths: Vec<usize> = (0..15)
        .map(|c| rows.iter().map(|r| r[c].len()).chain([CSV_COLUMNS[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<&str>| -> String {
        cells.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect::<Vec<_>>().join("  ")
    };
    writeln!(w, "{}", line(CSV_COLUMNS.to_vec()))?;
    for r in &rows {
        writeln!(w, "{}", line(r.iter().map(String::as_str).collect()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> BenchRecord {
        BenchRecord {
            kernel: "mod2f",
            variant: "radix2",
            backend: "native",
            precision: "f32",
            m: None,
            n: None,
            l: None,
            nnz: None,
            fft_n: Some(8),
            reps: 3,
            min_s: 0.5,
            median_s: 0.000001,
            gflops: 120e-3,
            bytes: 256,
            checksum: -1.25,
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[record()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "kernel,variant,backend,precision,m,n,l,nnz,fft_n,reps,min_s,median_s,gflops,bytes,checksum");
        assert_eq!(lines.next().unwrap(), "mod2f,radix2,native,f32,,,,,8,3,0.5,0.000001,0.12,256,-1.25");
        assert!(lines.next().is_none());
    }

    #[test]
    fn header_without_records() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
    }

    #[test]
    fn table_aligned() {
        let mut buf = Vec::new();
        write_table(&mut buf, &[record(), record()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lens: Vec<usize> = text.lines().map(str::len).collect();
        assert_eq!(lens.len(), 3);
        assert!(lens.iter().all(|&l| l == lens[0]));
    }
}
