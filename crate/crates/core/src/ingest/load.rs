//! CSV loaders. One loader per schema, each returning accepted records plus
//! row-numbered rejection diagnostics.

use super::*;
use chrono::NaiveDateTime;
use std::collections::HashSet;
use std::path::Path;

/// Column lookup for one CSV file, resolved once from the header row.
struct Header {
    path: String,
    indices: Vec<usize>,
}

impl Header {
    fn resolve(
        path: &Path,
        headers: &csv::StringRecord,
        required: &[&str],
    ) -> Result<Self, IngestError> {
        let mut indices = Vec::with_capacity(required.len());
        for col in required {
            match headers.iter().position(|h| h == *col) {
                Some(i) => indices.push(i),
                None => {
                    return Err(IngestError::MissingColumn {
                        path: path.display().to_string(),
                        column: col.to_string(),
                    })
                }
            }
        }
        Ok(Self {
            path: path.display().to_string(),
            indices,
        })
    }

    fn field<'r>(&self, record: &'r csv::StringRecord, slot: usize) -> &'r str {
        record.get(self.indices[slot]).unwrap_or("").trim()
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new().flexible(true).from_reader(file))
}

fn parse_f64(s: &str, column: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("unparsable numeric in column '{column}': '{s}'"))
}

/// Drives row-by-row parsing: `parse` returns Ok(record) or Err(reason).
fn load_rows<T>(
    path: &Path,
    columns: &[&str],
    mut parse: impl FnMut(&Header, &csv::StringRecord) -> Result<T, String>,
) -> Result<Loaded<T>, IngestError> {
    let mut reader = open_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|source| IngestError::Csv {
            path: path.display().to_string(),
            source,
        })?
        .clone();
    let header = Header::resolve(path, &headers, columns)?;

    let mut records = Vec::new();
    let mut rejected = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|source| IngestError::Csv {
            path: header.path.clone(),
            source,
        })?;
        match parse(&header, &row) {
            Ok(rec) => records.push(rec),
            Err(reason) => rejected.push(RowDiagnostic {
                row: row_no,
                reason,
            }),
        }
    }
    Ok(Loaded { records, rejected })
}

pub const PARCEL_COLUMNS: [&str; 5] = ["parcel_id", "lon", "lat", "market_value", "cbg_id"];
pub const CLAIM_COLUMNS: [&str; 5] = ["claim_id", "source", "lon", "lat", "amount"];
pub const STOP_COLUMNS: [&str; 4] = ["device_id", "cbg_id", "start_iso8601", "dwell_hours"];
pub const CBG_COLUMNS: [&str; 4] = ["cbg_id", "lon", "lat", "land_area_sqmi"];
pub const ADJACENCY_COLUMNS: [&str; 2] = ["cbg_id_a", "cbg_id_b"];

/// parcels(parcel_id,lon,lat,market_value,cbg_id)
///
/// Rejects nonpositive market values, duplicate parcel ids, and unknown
/// cbg ids (when an index is supplied).
pub fn load_parcels(
    path: &Path,
    index: Option<&CbgIndex>,
) -> Result<Loaded<ParcelRecord>, IngestError> {
    let mut seen: HashSet<String> = HashSet::new();
    load_rows(path, &PARCEL_COLUMNS, move |h, row| {
        let parcel_id = h.field(row, 0).to_string();
        if parcel_id.is_empty() {
            return Err("empty parcel_id".into());
        }
        let lon = parse_f64(h.field(row, 1), "lon")?;
        let lat = parse_f64(h.field(row, 2), "lat")?;
        let market_value = parse_f64(h.field(row, 3), "market_value")?;
        if market_value <= 0.0 {
            return Err(format!("nonpositive market value: {market_value}"));
        }
        let cbg_id = h.field(row, 4).to_string();
        if let Some(idx) = index {
            if idx.index_of(&cbg_id).is_none() {
                return Err(format!("unknown cbg_id '{cbg_id}'"));
            }
        }
        if !seen.insert(parcel_id.clone()) {
            return Err(format!("duplicate parcel_id '{parcel_id}'"));
        }
        Ok(ParcelRecord {
            parcel_id,
            lon,
            lat,
            market_value,
            cbg_id,
        })
    })
}

/// claims(claim_id,source,lon,lat,amount)
///
/// Zero-amount records are rejected: zero damage values may indicate a claim
/// unrelated to the hazard. Duplicate claim ids within the file are rejected.
pub fn load_claims(path: &Path) -> Result<Loaded<ClaimRecord>, IngestError> {
    let mut seen: HashSet<String> = HashSet::new();
    load_rows(path, &CLAIM_COLUMNS, move |h, row| {
        let claim_id = h.field(row, 0).to_string();
        if claim_id.is_empty() {
            return Err("empty claim_id".into());
        }
        let source = ClaimSource::parse(h.field(row, 1))
            .ok_or_else(|| format!("unknown source '{}'", h.field(row, 1)))?;
        let lon = parse_f64(h.field(row, 2), "lon")?;
        let lat = parse_f64(h.field(row, 3), "lat")?;
        let amount = parse_f64(h.field(row, 4), "amount")?;
        if amount == 0.0 {
            return Err("zero damage value".into());
        }
        if amount < 0.0 {
            return Err(format!("negative damage value: {amount}"));
        }
        if !seen.insert(claim_id.clone()) {
            return Err(format!("duplicate claim_id '{claim_id}'"));
        }
        Ok(ClaimRecord {
            claim_id,
            source,
            lon,
            lat,
            amount,
            parcel_hint: None,
        })
    })
}

pub(crate) fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S").ok()
}

/// stops(device_id,cbg_id,start_iso8601,dwell_hours)
pub fn load_stops(
    path: &Path,
    index: Option<&CbgIndex>,
) -> Result<Loaded<StopRecord>, IngestError> {
    load_rows(path, &STOP_COLUMNS, move |h, row| {
        let device_id = h.field(row, 0).to_string();
        if device_id.is_empty() {
            return Err("empty device_id".into());
        }
        let cbg_id = h.field(row, 1).to_string();
        if let Some(idx) = index {
            if idx.index_of(&cbg_id).is_none() {
                return Err(format!("unknown cbg_id '{cbg_id}'"));
            }
        }
        let raw_start = h.field(row, 2);
        let start = parse_timestamp(raw_start)
            .ok_or_else(|| format!("unparsable timestamp '{raw_start}'"))?;
        let dwell_hours = parse_f64(h.field(row, 3), "dwell_hours")?;
        if dwell_hours < 0.0 {
            return Err(format!("negative dwell: {dwell_hours}"));
        }
        Ok(StopRecord {
            device_id,
            cbg_id,
            start,
            dwell_hours,
        })
    })
}

/// Raw CBG centroid rows, prior to index construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CbgRow {
    pub cbg_id: String,
    pub lon: f64,
    pub lat: f64,
    pub land_area_sqmi: f64,
}

/// cbgs(cbg_id,lon,lat,land_area_sqmi)
pub fn load_cbg_rows(path: &Path) -> Result<Loaded<CbgRow>, IngestError> {
    let mut seen: HashSet<String> = HashSet::new();
    load_rows(path, &CBG_COLUMNS, move |h, row| {
        let cbg_id = h.field(row, 0).to_string();
        if cbg_id.is_empty() {
            return Err("empty cbg_id".into());
        }
        let lon = parse_f64(h.field(row, 1), "lon")?;
        let lat = parse_f64(h.field(row, 2), "lat")?;
        let land_area_sqmi = parse_f64(h.field(row, 3), "land_area_sqmi")?;
        if land_area_sqmi <= 0.0 {
            return Err(format!("nonpositive land area: {land_area_sqmi}"));
        }
        if !seen.insert(cbg_id.clone()) {
            return Err(format!("duplicate cbg_id '{cbg_id}'"));
        }
        Ok(CbgRow {
            cbg_id,
            lon,
            lat,
            land_area_sqmi,
        })
    })
}

/// adjacency(cbg_id_a,cbg_id_b)
pub fn load_adjacency(path: &Path) -> Result<Loaded<(String, String)>, IngestError> {
    load_rows(path, &ADJACENCY_COLUMNS, |h, row| {
        let a = h.field(row, 0).to_string();
        let b = h.field(row, 1).to_string();
        if a.is_empty() || b.is_empty() {
            return Err("empty cbg id in adjacency pair".into());
        }
        if a == b {
            return Err(format!("self-adjacency for '{a}'"));
        }
        Ok((a, b))
    })
}

/// Convenience: load cbgs + adjacency and build the index.
pub fn load_cbg_index(
    cbg_path: &Path,
    adjacency_path: &Path,
) -> Result<(CbgIndex, Vec<RowDiagnostic>, Vec<(String, String)>), IngestError> {
    let cbgs = load_cbg_rows(cbg_path)?;
    let adj = load_adjacency(adjacency_path)?;
    let mut diagnostics = cbgs.rejected;
    diagnostics.extend(adj.rejected);
    let rows = cbgs
        .records
        .into_iter()
        .map(|r| (r.cbg_id, r.lon, r.lat, r.land_area_sqmi))
        .collect();
    let index = CbgIndex::new(rows, &adj.records)?;
    Ok((index, diagnostics, adj.records))
}

/// One census row: tract membership, race counts, income-quartile counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CensusRecord {
    pub cbg_id: String,
    pub tract_id: String,
    pub pop_total: f64,
    pub pop_nhwhite: f64,
    pub pop_nhblack: f64,
    pub pop_nhasian: f64,
    pub income_q: [f64; 4],
}

pub const CENSUS_COLUMNS: [&str; 10] = [
    "cbg_id",
    "tract_id",
    "pop_total",
    "pop_nhwhite",
    "pop_nhblack",
    "pop_nhasian",
    "income_q1",
    "income_q2",
    "income_q3",
    "income_q4",
];

/// census(cbg_id,tract_id,pop_total,pop_nhwhite,pop_nhblack,pop_nhasian,income_q1..q4)
pub fn load_census(
    path: &Path,
    index: Option<&CbgIndex>,
) -> Result<Loaded<CensusRecord>, IngestError> {
    let mut seen: HashSet<String> = HashSet::new();
    load_rows(path, &CENSUS_COLUMNS, move |h, row| {
        let cbg_id = h.field(row, 0).to_string();
        if let Some(idx) = index {
            if idx.index_of(&cbg_id).is_none() {
                return Err(format!("unknown cbg_id '{cbg_id}'"));
            }
        }
        let tract_id = h.field(row, 1).to_string();
        if tract_id.is_empty() {
            return Err("empty tract_id".into());
        }
        let mut nums = [0.0f64; 8];
        for (slot, num) in nums.iter_mut().enumerate() {
            let v = parse_f64(h.field(row, slot + 2), CENSUS_COLUMNS[slot + 2])?;
            if v < 0.0 {
                return Err(format!("negative count in '{}'", CENSUS_COLUMNS[slot + 2]));
            }
            *num = v;
        }
        if !seen.insert(cbg_id.clone()) {
            return Err(format!("duplicate cbg_id '{cbg_id}'"));
        }
        Ok(CensusRecord {
            cbg_id,
            tract_id,
            pop_total: nums[0],
            pop_nhwhite: nums[1],
            pop_nhblack: nums[2],
            pop_nhasian: nums[3],
            income_q: [nums[4], nums[5], nums[6], nums[7]],
        })
    })
}

/// A per-CBG count table: poi(cbg_id,poi_count) or roads(cbg_id,segment_count).
pub fn load_count_table(
    path: &Path,
    count_column: &str,
    index: Option<&CbgIndex>,
) -> Result<Loaded<(String, f64)>, IngestError> {
    let columns = ["cbg_id", count_column];
    let mut seen: HashSet<String> = HashSet::new();
    let count_column = count_column.to_string();
    load_rows(path, &columns, move |h, row| {
        let cbg_id = h.field(row, 0).to_string();
        if let Some(idx) = index {
            if idx.index_of(&cbg_id).is_none() {
                return Err(format!("unknown cbg_id '{cbg_id}'"));
            }
        }
        let count = parse_f64(h.field(row, 1), &count_column)?;
        if count < 0.0 {
            return Err(format!("negative count: {count}"));
        }
        if !seen.insert(cbg_id.clone()) {
            return Err(format!("duplicate cbg_id '{cbg_id}'"));
        }
        Ok((cbg_id, count))
    })
}

/// Paired calibration samples for the damage-scale bridge:
/// bridge_pairs(ia_amount,nfip_amount).
pub fn load_bridge_pairs(path: &Path) -> Result<Loaded<(f64, f64)>, IngestError> {
    load_rows(path, &["ia_amount", "nfip_amount"], |h, row| {
        let ia = parse_f64(h.field(row, 0), "ia_amount")?;
        let nfip = parse_f64(h.field(row, 1), "nfip_amount")?;
        if ia <= 0.0 || nfip <= 0.0 {
            return Err("nonpositive amount in bridge pair".into());
        }
        Ok((ia, nfip))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn zero_amount_claim_is_rejected_with_reason() {
        let f = write_tmp(
            "claim_id,source,lon,lat,amount\nc1,NFIP,0.0,0.0,0\nc2,IA,0.1,0.1,5000\n",
        );
        let loaded = load_claims(f.path()).unwrap();
        assert_eq!(loaded.records.len(), 1);
        assert_eq!(loaded.rejected.len(), 1);
        assert_eq!(loaded.rejected[0].row, 1);
        assert_eq!(loaded.rejected[0].reason, "zero damage value");
    }

    #[test]
    fn empty_file_with_header_loads_empty() {
        let f = write_tmp("claim_id,source,lon,lat,amount\n");
        let loaded = load_claims(f.path()).unwrap();
        assert!(loaded.records.is_empty());
        assert!(loaded.rejected.is_empty());
    }

    #[test]
    fn negative_market_value_rejected_with_row_index() {
        let f = write_tmp(
            "parcel_id,lon,lat,market_value,cbg_id\np1,0,0,-1,A\np2,0,0,100000,A\n",
        );
        let loaded = load_parcels(f.path(), None).unwrap();
        assert_eq!(loaded.records.len(), 1);
        assert_eq!(loaded.rejected[0].row, 1);
        assert!(loaded.rejected[0].reason.contains("nonpositive market value"));
    }

    #[test]
    fn missing_column_is_a_file_level_error() {
        let f = write_tmp("claim_id,source,lon,lat\nc1,NFIP,0,0\n");
        let err = load_claims(f.path()).unwrap_err();
        match err {
            IngestError::MissingColumn { column, .. } => assert_eq!(column, "amount"),
            other => panic!("expected MissingColumn, got {other:?}"),
        }
    }

    #[test]
    fn stop_with_unknown_cbg_is_rejected_when_index_given() {
        let index = CbgIndex::new(
            vec![("A".into(), 0.0, 0.0, 1.0), ("B".into(), 1.0, 0.0, 1.0)],
            &[],
        )
        .unwrap();
        let f = write_tmp(
            "device_id,cbg_id,start_iso8601,dwell_hours\nd1,A,2017-08-01T00:00:00,25\nd2,Z,2017-08-01T00:00:00,25\n",
        );
        let loaded = load_stops(f.path(), Some(&index)).unwrap();
        assert_eq!(loaded.records.len(), 1);
        assert!(loaded.rejected[0].reason.contains("unknown cbg_id"));
    }

    #[test]
    fn timestamps_parse_with_and_without_zone() {
        assert!(parse_timestamp("2017-08-01T06:30:00Z").is_some());
        assert!(parse_timestamp("2017-08-01T06:30:00").is_some());
        assert!(parse_timestamp("not-a-time").is_none());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let f = write_tmp(
            "parcel_id,lon,lat,market_value,cbg_id\np1,0,0,100,A\np1,0,0,200,A\n",
        );
        let loaded = load_parcels(f.path(), None).unwrap();
        assert_eq!(loaded.records.len(), 1);
        assert!(loaded.rejected[0].reason.contains("duplicate parcel_id"));
    }
}
