//! Trace files: CSV and JSON lines, one [`IterationRecord`] per row.
//!
//! CSV columns, in order:
//!
//! ```text
//! k,beta,eta,lambda,delta_z,restarted,x,y,x_next,z,bisection_iterations,generic_residual
//! ```
//!
//! Vectors are written as `;`-separated entries inside one column and absent
//! optional values as empty fields. Floats use the shortest representation
//! that parses back to the same value, so a written trace reads back
//! bit-for-bit.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::linalg::Vector;
use crate::scalar::Scalar;
use crate::solver::IterationRecord;

pub const CSV_HEADER: &str =
    "k,beta,eta,lambda,delta_z,restarted,x,y,x_next,z,bisection_iterations,generic_residual";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

fn join<T: Scalar>(v: &[T]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn opt<T: Scalar>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn csv_row<T: Scalar>(r: &IterationRecord<T>) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        r.k,
        r.beta,
        r.eta,
        r.lambda,
        opt(r.delta_z),
        r.restarted,
        join(&r.x),
        join(&r.y),
        join(&r.x_next),
        join(&r.z),
        r.bisection_iterations,
        opt(r.generic_residual),
    )
}

pub fn write_csv<T: Scalar, W: Write>(
    records: &[IterationRecord<T>],
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", csv_row(r))?;
    }
    out.flush()
}

pub fn read_csv<T: Scalar, R: BufRead>(input: R) -> Result<Vec<IterationRecord<T>>, TraceError> {
    let mut lines = input.lines().enumerate();
    let header = match lines.next() {
        Some((_, header)) => header?,
        None => String::new(),
    };
    if header.trim_end() != CSV_HEADER {
        return Err(TraceError::Parse {
            line: 1,
            message: "missing or unexpected header".into(),
        });
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_row(&line).map_err(|message| TraceError::Parse {
            line: idx + 1,
            message,
        })?);
    }
    Ok(records)
}

fn scalar<T: Scalar>(s: &str) -> Result<T, String> {
    s.parse::<T>().map_err(|_| format!("bad number {s:?}"))
}

fn optional<T: Scalar>(s: &str) -> Result<Option<T>, String> {
    if s.is_empty() {
        Ok(None)
    } else {
        scalar(s).map(Some)
    }
}

fn vector<T: Scalar>(s: &str) -> Result<Vector<T>, String> {
    if s.is_empty() {
        return Ok(Vector::from_vec_unchecked(Vec::new()));
    }
    s.split(';').map(scalar).collect()
}

fn parse_row<T: Scalar>(line: &str) -> Result<IterationRecord<T>, String> {
    let fields: Vec<&str> = line.trim_end().split(',').collect();
    if fields.len() != 12 {
        return Err(format!("expected 12 fields, found {}", fields.len()));
    }
    Ok(IterationRecord {
        k: fields[0]
            .parse()
            .map_err(|_| format!("bad index {:?}", fields[0]))?,
        beta: scalar(fields[1])?,
        eta: scalar(fields[2])?,
        lambda: scalar(fields[3])?,
        delta_z: optional(fields[4])?,
        restarted: fields[5]
            .parse()
            .map_err(|_| format!("bad flag {:?}", fields[5]))?,
        x: vector(fields[6])?,
        y: vector(fields[7])?,
        x_next: vector(fields[8])?,
        z: vector(fields[9])?,
        bisection_iterations: fields[10]
            .parse()
            .map_err(|_| format!("bad count {:?}", fields[10]))?,
        generic_residual: optional(fields[11])?,
    })
}

pub fn write_jsonl<T: Scalar, W: Write>(
    records: &[IterationRecord<T>],
    mut out: W,
) -> Result<(), TraceError> {
    for (i, r) in records.iter().enumerate() {
        serde_json::to_writer(&mut out, r).map_err(|source| TraceError::Json {
            line: i + 1,
            source,
        })?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<T: Scalar, R: BufRead>(input: R) -> Result<Vec<IterationRecord<T>>, TraceError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line).map_err(|source| TraceError::Json {
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(records)
}
