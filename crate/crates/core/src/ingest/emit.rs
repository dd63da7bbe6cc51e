//! Re-emit accepted tables as CSV in the same schemas they were loaded from.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! emit → load reproduces the in-memory tables exactly.

use super::*;
use std::io::Write;
use std::path::Path;

fn create(path: &Path) -> Result<std::fs::File, IngestError> {
    std::fs::File::create(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn emit_parcels(path: &Path, parcels: &[ParcelRecord]) -> Result<(), IngestError> {
    let mut out = std::io::BufWriter::new(create(path)?);
    writeln!(out, "parcel_id,lon,lat,market_value,cbg_id").map_err(|e| io_err(path, e))?;
    for p in parcels {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.parcel_id, p.lon, p.lat, p.market_value, p.cbg_id
        )
        .map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn emit_claims(path: &Path, claims: &[ClaimRecord]) -> Result<(), IngestError> {
    let mut out = std::io::BufWriter::new(create(path)?);
    writeln!(out, "claim_id,source,lon,lat,amount").map_err(|e| io_err(path, e))?;
    for c in claims {
        writeln!(
            out,
            "{},{},{},{},{}",
            c.claim_id,
            c.source.as_str(),
            c.lon,
            c.lat,
            c.amount
        )
        .map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn emit_stops(path: &Path, stops: &[StopRecord]) -> Result<(), IngestError> {
    let mut out = std::io::BufWriter::new(create(path)?);
    writeln!(out, "device_id,cbg_id,start_iso8601,dwell_hours").map_err(|e| io_err(path, e))?;
    for s in stops {
        writeln!(
            out,
            "{},{},{},{}",
            s.device_id,
            s.cbg_id,
            s.start.format("%Y-%m-%dT%H:%M:%S"),
            s.dwell_hours
        )
        .map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn emit_cbgs(path: &Path, index: &CbgIndex) -> Result<(), IngestError> {
    let mut out = std::io::BufWriter::new(create(path)?);
    writeln!(out, "cbg_id,lon,lat,land_area_sqmi").map_err(|e| io_err(path, e))?;
    for i in 0..index.len() {
        let (lon, lat) = index.centroid(i);
        writeln!(
            out,
            "{},{},{},{}",
            index.id(i),
            lon,
            lat,
            index.land_area_sqmi(i)
        )
        .map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// Writes each undirected edge once, ordered (smaller id, larger id).
pub fn emit_adjacency(path: &Path, index: &CbgIndex) -> Result<(), IngestError> {
    let mut out = std::io::BufWriter::new(create(path)?);
    writeln!(out, "cbg_id_a,cbg_id_b").map_err(|e| io_err(path, e))?;
    for i in 0..index.len() {
        for &j in index.neighbors(i) {
            if i < j as usize {
                writeln!(out, "{},{}", index.id(i), index.id(j as usize))
                    .map_err(|e| io_err(path, e))?;
            }
        }
    }
    Ok(())
}

pub fn emit_census(path: &Path, records: &[CensusRecord]) -> Result<(), IngestError> {
    let mut out = std::io::BufWriter::new(create(path)?);
    writeln!(
        out,
        "cbg_id,tract_id,pop_total,pop_nhwhite,pop_nhblack,pop_nhasian,income_q1,income_q2,income_q3,income_q4"
    )
    .map_err(|e| io_err(path, e))?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.cbg_id,
            r.tract_id,
            r.pop_total,
            r.pop_nhwhite,
            r.pop_nhblack,
            r.pop_nhasian,
            r.income_q[0],
            r.income_q[1],
            r.income_q[2],
            r.income_q[3]
        )
        .map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn emit_count_table(
    path: &Path,
    count_column: &str,
    rows: &[(String, f64)],
) -> Result<(), IngestError> {
    let mut out = std::io::BufWriter::new(create(path)?);
    writeln!(out, "cbg_id,{count_column}").map_err(|e| io_err(path, e))?;
    for (id, count) in rows {
        writeln!(out, "{id},{count}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn emit_bridge_pairs(path: &Path, pairs: &[(f64, f64)]) -> Result<(), IngestError> {
    let mut out = std::io::BufWriter::new(create(path)?);
    writeln!(out, "ia_amount,nfip_amount").map_err(|e| io_err(path, e))?;
    for (ia, nfip) in pairs {
        writeln!(out, "{ia},{nfip}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn emit_diagnostics(path: &Path, table: &str, rows: &[RowDiagnostic]) -> Result<(), IngestError> {
    emit_diagnostics_into(path, &[(table, rows)])
}

/// Rejection sidecar covering several tables in one file.
pub fn emit_diagnostics_into(
    path: &Path,
    tables: &[(&str, &[RowDiagnostic])],
) -> Result<(), IngestError> {
    let mut out = std::io::BufWriter::new(create(path)?);
    writeln!(out, "table,row,reason").map_err(|e| io_err(path, e))?;
    for (table, rows) in tables {
        for d in *rows {
            let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
            w.write_record([*table, &d.row.to_string(), &d.reason])
                .expect("in-memory write");
            let line = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8");
            out.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
        }
    }
    Ok(())
}
