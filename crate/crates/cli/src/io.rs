//! CSV and JSON readers and writers.
//!
//! Incidence files hold one row per observation interval:
//!
//! ```text
//! # units: days
//! interval_end_time,count
//! 7,3
//! 14,0
//! ```
//!
//! Lines starting with `#` are comments. The grid starts at 0 and each row
//! adds its end time as the next breakpoint.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use pdsir_core::{ChainOutput, IncidenceCounts, LatentPath, ObservationGrid};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const INCIDENCE_HEADER: [&str; 2] = ["interval_end_time", "count"];

/// Parse an incidence table from any reader.
pub fn parse_incidence_csv<R: Read>(reader: R) -> CliResult<(ObservationGrid, IncidenceCounts)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(false)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| CliError::Data(e.to_string()))?,
        None => return Err(CliError::Data("empty file: missing header `interval_end_time,count`".into())),
    };
    let line_of = |rec: &csv::StringRecord| rec.position().map_or(0, |p| p.line());
    if header.len() != 2 || header.get(0) != Some(INCIDENCE_HEADER[0]) || header.get(1) != Some(INCIDENCE_HEADER[1]) {
        return Err(CliError::Data(format!(
            "line {}: missing header, expected `interval_end_time,count`",
            line_of(&header)
        )));
    }

    let mut breakpoints = vec![0.0];
    let mut counts = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| CliError::Data(e.to_string()))?;
        let line = line_of(&rec);
        if rec.len() != 2 {
            return Err(CliError::Data(format!("line {line}: expected 2 fields, found {}", rec.len())));
        }
        let time: f64 = rec[0]
            .parse()
            .map_err(|_| CliError::Data(format!("line {line}: `{}` is not a time", &rec[0])))?;
        let prev = *breakpoints.last().unwrap();
        if !time.is_finite() || time <= prev {
            return Err(CliError::Data(format!(
                "line {line}: interval end time {time} does not exceed the previous breakpoint {prev}"
            )));
        }
        breakpoints.push(time);
        counts.push(parse_count(&rec[1], line)?);
    }
    if counts.is_empty() {
        return Err(CliError::Data("no observation intervals".into()));
    }
    let grid = ObservationGrid::new(breakpoints).map_err(CliError::from)?;
    Ok((grid, IncidenceCounts::new(counts)))
}

fn parse_count(field: &str, line: u64) -> CliResult<usize> {
    if let Ok(c) = field.parse::<usize>() {
        return Ok(c);
    }
    match field.parse::<f64>() {
        Ok(v) if v < 0.0 => Err(CliError::Data(format!("line {line}: negative count {field}"))),
        Ok(v) if v.fract() != 0.0 => Err(CliError::Data(format!("line {line}: fractional count {field}"))),
        _ => Err(CliError::Data(format!("line {line}: `{field}` is not a count"))),
    }
}

pub fn load_incidence_csv(path: &Path) -> CliResult<(ObservationGrid, IncidenceCounts)> {
    let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    parse_incidence_csv(file).map_err(|e| match e {
        CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_incidence_csv(
    path: &Path,
    grid: &ObservationGrid,
    counts: &IncidenceCounts,
    units: &str,
) -> CliResult<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# units: {units}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(INCIDENCE_HEADER)?;
    for (k, &c) in counts.counts().iter().enumerate() {
        w.write_record([grid.interval(k).1.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PathRow {
    individual: usize,
    initially_infectious: u8,
    infection_time: f64,
    removal_time: f64,
}

/// One row per ever-infected individual; censored removals are `inf`.
pub fn write_path_csv(path: &Path, latent: &LatentPath) -> CliResult<()> {
    let rows = latent.individuals().iter().enumerate().map(|(j, ind)| PathRow {
        individual: j,
        initially_infectious: u8::from(latent.is_initial(j)),
        infection_time: ind.infection,
        removal_time: ind.removal,
    });
    write_rows(path, rows)
}

#[derive(Serialize)]
struct SampleRow {
    iter: usize,
    beta: f64,
    lambda: f64,
    r0: f64,
    loglik: f64,
    accepted: u8,
}

pub fn write_samples_csv(path: &Path, chain: &ChainOutput) -> CliResult<()> {
    let rows = chain.draws.iter().map(|d| SampleRow {
        iter: d.iteration,
        beta: d.beta,
        lambda: d.lambda,
        r0: d.r0,
        loglik: d.loglik,
        accepted: u8::from(d.accepted),
    });
    write_rows(path, rows)
}

pub fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
