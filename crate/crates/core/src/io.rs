//! Coalescence-times CSV files.
//!
//! One sample per row: `n,T,h1,...,h{n-1}`. `T` is left empty when unknown.
//! Rows may have different `n`; the header names as many `h` columns as the
//! widest row needs.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::times::CoalescenceTimes;

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Format {
        path: "<times csv>".into(),
        line,
        msg: e.to_string(),
    }
}

pub fn write_times_csv<W: Write>(out: W, samples: &[CoalescenceTimes]) -> Result<()> {
    let width = samples.iter().map(|s| s.times().len()).max().unwrap_or(1);
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let mut header = vec!["n".to_string(), "T".to_string()];
    header.extend((1..=width).map(|i| format!("h{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for s in samples {
        let mut rec = vec![
            s.n().to_string(),
            s.horizon().map(|h| h.to_string()).unwrap_or_default(),
        ];
        rec.extend(s.times().iter().map(|t| t.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<times csv>", e))
}

/// Reads every row; a malformed row yields an error in its slot without
/// stopping the rest. Row numbers in errors are 1-based file lines.
pub fn read_times_csv<R: Read>(input: R) -> Result<Vec<Result<CoalescenceTimes>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.get(0) != Some("n") || header.get(1) != Some("T") {
        return Err(Error::Format {
            path: "<times csv>".into(),
            line: 1,
            msg: "expected header 'n,T,h1,...'".into(),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        out.push(rec.map_err(csv_err).and_then(|rec| parse_row(&rec, line)));
    }
    Ok(out)
}

fn parse_row(rec: &csv::StringRecord, line: usize) -> Result<CoalescenceTimes> {
    let bad = |msg: String| Error::Format {
        path: "<times csv>".into(),
        line,
        msg,
    };
    let n: usize = rec
        .get(0)
        .unwrap_or("")
        .parse()
        .map_err(|e| bad(format!("n: {e}")))?;
    let horizon = match rec.get(1).unwrap_or("") {
        "" => None,
        s => Some(s.parse::<f64>().map_err(|e| bad(format!("T: {e}")))?),
    };
    let times: Vec<f64> = rec
        .iter()
        .skip(2)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| bad(format!("time '{s}': {e}")))
        })
        .collect::<Result<_>>()?;
    if times.len() + 1 != n {
        return Err(bad(format!(
            "n = {n} needs {} times, found {}",
            n.saturating_sub(1),
            times.len()
        )));
    }
    CoalescenceTimes::new(times, horizon)
}
