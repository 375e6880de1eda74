use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{ChainRow, ResultRow, RmtRow};

pub const RESULT_HEADER: [&str; 15] = [
    "alpha",
    "lambda_hat",
    "T",
    "d",
    "n",
    "ridge_hat",
    "trial_index",
    "seed",
    "kl_mean",
    "kl_var",
    "kl_exact",
    "theory_order1",
    "theory_order2",
    "theory_total",
    "wall_time_ms",
];

pub const CHAIN_HEADER: [&str; 9] = ["s", "beta", "lambda", "C", "d", "n", "trial", "e_og", "wall_time_ms"];

const RMT_HEADER: [&str; 10] =
    ["quantity", "a", "b", "n", "d", "ridge_hat", "closed_form", "mc_mean", "mc_std_err", "rel_gap"];

/// 17 significant digits in scientific notation; parses back bit-exactly.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn finish<W: Write>(w: csv::Writer<W>, path: Option<&Path>) -> Result<()> {
    let mut inner = w.into_inner().map_err(|e| {
        let source = std::io::Error::other(e.to_string());
        match path {
            Some(p) => Error::Io { path: p.to_path_buf(), source },
            None => Error::Csv(csv::Error::from(source)),
        }
    })?;
    inner.flush().map_err(|source| match path {
        Some(p) => Error::Io { path: p.to_path_buf(), source },
        None => Error::Csv(csv::Error::from(source)),
    })
}

/// Serialise result rows to any writer.
pub fn write_rows<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(RESULT_HEADER)?;
    for r in rows {
        w.write_record([
            format_float(r.alpha),
            format_float(r.lambda_hat),
            format_float(r.t),
            r.d.to_string(),
            r.n.to_string(),
            format_float(r.ridge_hat),
            r.trial_index.to_string(),
            r.seed.to_string(),
            format_float(r.kl_mean),
            format_float(r.kl_var),
            format_float(r.kl_exact),
            format_float(r.theory_order1),
            format_float(r.theory_order2),
            format_float(r.theory_total),
            format_float(r.wall_time_ms),
        ])?;
    }
    finish(w, None)
}

pub fn write_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_rows(rows, create(path)?).map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Csv(c) => Error::Io { path: path.to_path_buf(), source: std::io::Error::other(c.to_string()) },
        other => other,
    }
}

pub fn write_chain_csv<W: Write>(rows: &[ChainRow], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(CHAIN_HEADER)?;
    for r in rows {
        w.write_record([
            r.s.to_string(),
            format_float(r.beta),
            format_float(r.lambda),
            r.components.to_string(),
            r.d.to_string(),
            r.n.to_string(),
            r.trial.to_string(),
            format_float(r.e_og),
            format_float(r.wall_time_ms),
        ])?;
    }
    finish(w, None)
}

pub fn write_rmt_csv<W: Write>(rows: &[RmtRow], out: W) -> Result<()> {
    let mut w = writer(out);
    w.write_record(RMT_HEADER)?;
    for r in rows {
        w.write_record([
            r.quantity.to_string(),
            r.a.to_string(),
            r.b.map(|b| b.to_string()).unwrap_or_default(),
            r.n.to_string(),
            r.d.to_string(),
            format_float(r.ridge_hat),
            format_float(r.closed_form),
            format_float(r.mc_mean),
            format_float(r.mc_std_err),
            format_float(r.rel_gap()),
        ])?;
    }
    finish(w, None)
}
