//! Cross-table referential checks. Report-only: nothing here aborts a run.

use super::*;
use crate::geo::Projection;

/// Margin in degrees added around the CBG bounding box when checking that
/// parcels and claims fall inside the dataset extent.
const BBOX_MARGIN_DEG: f64 = 0.5;

#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct ValidationReport {
    /// Stops referencing a cbg_id absent from the index.
    pub orphan_stops: usize,
    /// Parcels referencing a cbg_id absent from the index.
    pub orphan_parcels: usize,
    /// Claims with no parcel within `claim_match_radius_miles`.
    pub orphan_claims: usize,
    /// Parcel centroids outside the CBG bounding box (plus margin).
    pub out_of_bounds_parcels: usize,
    /// Adjacency pairs present in one direction only in the raw input.
    pub asymmetric_adjacency_pairs: Vec<(String, String)>,
    pub claim_match_radius_miles: f64,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.orphan_stops == 0
            && self.orphan_parcels == 0
            && self.orphan_claims == 0
            && self.out_of_bounds_parcels == 0
            && self.asymmetric_adjacency_pairs.is_empty()
    }
}

/// Scan loaded tables for referential problems.
///
/// `raw_adjacency` is the adjacency table as read from disk (pre-symmetrize),
/// so one-directional pairs can be flagged.
pub fn validate_dataset(
    index: &CbgIndex,
    parcels: &[ParcelRecord],
    claims: &[ClaimRecord],
    stops: &[StopRecord],
    raw_adjacency: &[(String, String)],
    claim_match_radius_miles: f64,
) -> ValidationReport {
    let mut report = ValidationReport {
        claim_match_radius_miles,
        ..Default::default()
    };

    for stop in stops {
        if index.index_of(&stop.cbg_id).is_none() {
            report.orphan_stops += 1;
        }
    }
    for parcel in parcels {
        if index.index_of(&parcel.cbg_id).is_none() {
            report.orphan_parcels += 1;
        }
    }

    let ((min_lon, min_lat), (max_lon, max_lat)) = index.bounding_box();
    for parcel in parcels {
        if parcel.lon < min_lon - BBOX_MARGIN_DEG
            || parcel.lon > max_lon + BBOX_MARGIN_DEG
            || parcel.lat < min_lat - BBOX_MARGIN_DEG
            || parcel.lat > max_lat + BBOX_MARGIN_DEG
        {
            report.out_of_bounds_parcels += 1;
        }
    }

    // Claims with no parcel nearby. Exhaustive scan is fine at report time;
    // the damage stage uses the grid index for the real matching pass.
    if !parcels.is_empty() {
        let proj = Projection::from_points(parcels.iter().map(|p| (p.lon, p.lat)).collect::<Vec<_>>().iter())
            .expect("nonempty parcels");
        for claim in claims {
            let near = parcels.iter().any(|p| {
                proj.distance_miles((claim.lon, claim.lat), (p.lon, p.lat))
                    <= claim_match_radius_miles
            });
            if !near {
                report.orphan_claims += 1;
            }
        }
    } else {
        report.orphan_claims = claims.len();
    }

    // Directed scan: pair (a, b) is asymmetric when (b, a) never appears.
    let mut directed: std::collections::HashSet<(String, String)> =
        std::collections::HashSet::new();
    for (a, b) in raw_adjacency {
        directed.insert((a.clone(), b.clone()));
    }
    let mut asymmetric: Vec<(String, String)> = directed
        .iter()
        .filter(|(a, b)| !directed.contains(&(b.clone(), a.clone())))
        .cloned()
        .collect();
    asymmetric.sort();
    report.asymmetric_adjacency_pairs = asymmetric;

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn index() -> CbgIndex {
        CbgIndex::new(
            vec![("A".into(), 0.0, 0.0, 1.0), ("B".into(), 0.1, 0.0, 1.0)],
            &[],
        )
        .unwrap()
    }

    fn stop(cbg: &str) -> StopRecord {
        StopRecord {
            device_id: "d".into(),
            cbg_id: cbg.into(),
            start: NaiveDate::from_ymd_opt(2017, 8, 1)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap(),
            dwell_hours: 1.0,
        }
    }

    #[test]
    fn stop_with_unknown_cbg_counts_as_orphan() {
        let report = validate_dataset(&index(), &[], &[], &[stop("Z")], &[], 0.25);
        assert_eq!(report.orphan_stops, 1);
    }

    #[test]
    fn consistent_dataset_is_clean() {
        let parcels = vec![ParcelRecord {
            parcel_id: "p1".into(),
            lon: 0.0,
            lat: 0.0,
            market_value: 100_000.0,
            cbg_id: "A".into(),
        }];
        let claims = vec![ClaimRecord {
            claim_id: "c1".into(),
            source: ClaimSource::Nfip,
            lon: 0.0,
            lat: 0.0,
            amount: 10_000.0,
            parcel_hint: None,
        }];
        let pairs = vec![("A".to_string(), "B".to_string()), ("B".to_string(), "A".to_string())];
        let report = validate_dataset(&index(), &parcels, &claims, &[stop("A")], &pairs, 0.25);
        assert!(report.is_clean(), "{report:?}");
    }

    #[test]
    fn asymmetric_adjacency_pair_is_flagged() {
        let pairs = vec![("A".to_string(), "B".to_string())];
        let report = validate_dataset(&index(), &[], &[], &[], &pairs, 0.25);
        assert_eq!(
            report.asymmetric_adjacency_pairs,
            vec![("A".to_string(), "B".to_string())]
        );
    }
}
