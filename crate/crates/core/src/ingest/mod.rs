//! Input tables: parsing, per-row validation, cross-table checks, re-emission.
//!
//! All inputs are header-bearing UTF-8 CSV. Rows that violate an invariant
//! never abort a load; they are collected into row-numbered diagnostics so
//! messy claims data can flow through with an audit trail.

mod emit;
mod load;
mod validate;

pub use emit::*;
pub use load::*;
pub use validate::*;

use chrono::NaiveDateTime;
use std::collections::HashMap;
use thiserror::Error;

/// File-level load failure. Row-level problems go to [`RowDiagnostic`] instead.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("failed to open {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: missing required column '{column}'")]
    MissingColumn { path: String, column: String },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("CBG index needs at least 2 CBGs, got {0}")]
    TooFewCbgs(usize),
}

/// A rejected input row: 1-based data row number plus the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct RowDiagnostic {
    pub row: usize,
    pub reason: String,
}

/// Accepted records plus the rejection sidecar for one table.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub rejected: Vec<RowDiagnostic>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParcelRecord {
    pub parcel_id: String,
    pub lon: f64,
    pub lat: f64,
    pub market_value: f64,
    pub cbg_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ClaimSource {
    Nfip,
    Ia,
}

impl ClaimSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClaimSource::Nfip => "NFIP",
            ClaimSource::Ia => "IA",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NFIP" => Some(ClaimSource::Nfip),
            "IA" => Some(ClaimSource::Ia),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClaimRecord {
    pub claim_id: String,
    pub source: ClaimSource,
    pub lon: f64,
    pub lat: f64,
    pub amount: f64,
    /// Optional upstream hint; matching ignores it but it is carried through.
    pub parcel_hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopRecord {
    pub device_id: String,
    pub cbg_id: String,
    pub start: NaiveDateTime,
    pub dwell_hours: f64,
}

/// CBG geometry: centroids, land areas, and a symmetric adjacency graph.
///
/// Index order is the sorted order of `cbg_id`, which makes every
/// index-aligned artifact in the pipeline canonical.
#[derive(Debug, Clone)]
pub struct CbgIndex {
    ids: Vec<String>,
    id_to_idx: HashMap<String, usize>,
    lon: Vec<f64>,
    lat: Vec<f64>,
    land_area_sqmi: Vec<f64>,
    adjacency: Vec<Vec<u32>>,
}

impl CbgIndex {
    /// Build from (id, lon, lat, land_area) rows and adjacency pairs.
    ///
    /// Adjacency is symmetrized on construction; asymmetric input pairs are
    /// instead flagged by [`validate_dataset`]. Pairs referencing unknown ids
    /// are ignored here and likewise surfaced by validation.
    pub fn new(
        cbgs: Vec<(String, f64, f64, f64)>,
        adjacency_pairs: &[(String, String)],
    ) -> Result<Self, IngestError> {
        if cbgs.len() < 2 {
            return Err(IngestError::TooFewCbgs(cbgs.len()));
        }
        let mut cbgs = cbgs;
        cbgs.sort_by(|a, b| a.0.cmp(&b.0));

        let mut ids = Vec::with_capacity(cbgs.len());
        let mut lon = Vec::with_capacity(cbgs.len());
        let mut lat = Vec::with_capacity(cbgs.len());
        let mut land_area = Vec::with_capacity(cbgs.len());
        for (id, lo, la, area) in cbgs {
            ids.push(id);
            lon.push(lo);
            lat.push(la);
            land_area.push(area);
        }
        let id_to_idx: HashMap<String, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();

        let mut adjacency = vec![Vec::new(); ids.len()];
        for (a, b) in adjacency_pairs {
            if let (Some(&ia), Some(&ib)) = (id_to_idx.get(a), id_to_idx.get(b)) {
                if ia != ib {
                    adjacency[ia].push(ib as u32);
                    adjacency[ib].push(ia as u32);
                }
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }

        Ok(Self {
            ids,
            id_to_idx,
            lon,
            lat,
            land_area_sqmi: land_area,
            adjacency,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.ids[idx]
    }

    pub fn index_of(&self, cbg_id: &str) -> Option<usize> {
        self.id_to_idx.get(cbg_id).copied()
    }

    pub fn centroid(&self, idx: usize) -> (f64, f64) {
        (self.lon[idx], self.lat[idx])
    }

    pub fn centroids(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len()).map(move |i| self.centroid(i))
    }

    pub fn land_area_sqmi(&self, idx: usize) -> f64 {
        self.land_area_sqmi[idx]
    }

    pub fn neighbors(&self, idx: usize) -> &[u32] {
        &self.adjacency[idx]
    }

    /// Bounding box of the centroids: ((min lon, min lat), (max lon, max lat)).
    pub fn bounding_box(&self) -> ((f64, f64), (f64, f64)) {
        let mut min = (f64::INFINITY, f64::INFINITY);
        let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for i in 0..self.len() {
            min.0 = min.0.min(self.lon[i]);
            min.1 = min.1.min(self.lat[i]);
            max.0 = max.0.max(self.lon[i]);
            max.1 = max.1.max(self.lat[i]);
        }
        (min, max)
    }

    /// Restrict the index to the given CBG ids, re-indexing adjacency.
    ///
    /// Unknown ids are ignored. Output order is again sorted by id.
    pub fn subset(&self, keep: &[String]) -> Result<CbgIndex, IngestError> {
        let mut rows: Vec<(String, f64, f64, f64)> = Vec::new();
        let mut kept: Vec<usize> = Vec::new();
        for id in keep {
            if let Some(i) = self.index_of(id) {
                rows.push((
                    self.ids[i].clone(),
                    self.lon[i],
                    self.lat[i],
                    self.land_area_sqmi[i],
                ));
                kept.push(i);
            }
        }
        kept.sort_unstable();
        kept.dedup();
        let keep_set: std::collections::HashSet<usize> = kept.iter().copied().collect();
        let mut pairs = Vec::new();
        for &i in &kept {
            for &j in &self.adjacency[i] {
                if keep_set.contains(&(j as usize)) && i < j as usize {
                    pairs.push((self.ids[i].clone(), self.ids[j as usize].clone()));
                }
            }
        }
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        rows.dedup_by(|a, b| a.0 == b.0);
        CbgIndex::new(rows, &pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_index() -> CbgIndex {
        CbgIndex::new(
            vec![
                ("b".into(), 1.0, 0.0, 2.0),
                ("a".into(), 0.0, 0.0, 1.0),
                ("c".into(), 2.0, 0.0, 3.0),
            ],
            &[("a".into(), "b".into()), ("c".into(), "b".into())],
        )
        .unwrap()
    }

    #[test]
    fn index_sorts_by_id_and_symmetrizes_adjacency() {
        let idx = small_index();
        assert_eq!(idx.ids(), &["a", "b", "c"]);
        assert_eq!(idx.neighbors(0), &[1]);
        assert_eq!(idx.neighbors(1), &[0, 2]);
        assert_eq!(idx.neighbors(2), &[1]);
        assert_eq!(idx.land_area_sqmi(2), 3.0);
    }

    #[test]
    fn single_cbg_is_rejected() {
        let err = CbgIndex::new(vec![("x".into(), 0.0, 0.0, 1.0)], &[]);
        assert!(matches!(err, Err(IngestError::TooFewCbgs(1))));
    }

    #[test]
    fn subset_reindexes_adjacency() {
        let idx = small_index();
        let sub = idx.subset(&["b".into(), "c".into()]).unwrap();
        assert_eq!(sub.ids(), &["b", "c"]);
        assert_eq!(sub.neighbors(0), &[1]);
        assert_eq!(sub.neighbors(1), &[0]);
    }
}
