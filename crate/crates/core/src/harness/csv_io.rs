use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};

use super::{ExperimentRecord, SchemeTag};

pub const CSV_HEADER: [&str; 11] = [
    "scheme",
    "p_dbm",
    "m",
    "k",
    "n",
    "q",
    "mean_sum_rate_bits",
    "std_err",
    "n_eval_channels",
    "seed",
    "config_hash",
];

/// 17 significant digits, enough to reproduce every `f64` exactly.
fn full(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

pub fn emit_csv(records: &[ExperimentRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to write".into()));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(CSV_HEADER).map_err(|e| csv_err(path, e))?;
    for r in records {
        w.write_record([
            r.scheme.as_str().to_string(),
            full(r.p_dbm),
            r.m.to_string(),
            r.k.to_string(),
            r.n.to_string(),
            r.q.to_string(),
            full(r.mean_sum_rate_bits),
            full(r.std_err),
            r.n_eval_channels.to_string(),
            r.seed.to_string(),
            r.config_hash.clone(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<ExperimentRecord>> {
    let path = path.as_ref();
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = rd.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Format(format!("unexpected CSV header in {}", path.display())));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let field = |i: usize| row.get(i).unwrap_or_default();
        let bad = |i: usize| Error::Format(format!("bad {} value {:?}", CSV_HEADER[i], field(i)));
        let f = |i: usize| field(i).parse::<f64>().map_err(|_| bad(i));
        let u = |i: usize| field(i).parse::<usize>().map_err(|_| bad(i));
        out.push(ExperimentRecord {
            scheme: field(0).parse::<SchemeTag>()?,
            p_dbm: f(1)?,
            m: u(2)?,
            k: u(3)?,
            n: u(4)?,
            q: u(5)?,
            mean_sum_rate_bits: f(6)?,
            std_err: f(7)?,
            n_eval_channels: u(8)?,
            seed: field(9).parse::<u64>().map_err(|_| bad(9))?,
            config_hash: field(10).to_string(),
        });
    }
    Ok(out)
}
