//! Nearest-parcel matching over a uniform grid index.
//!
//! Cell size equals the match radius, so a claim's nearest parcel within
//! radius always lies in the 3x3 cell neighborhood around the claim.

use super::DamageError;
use crate::geo::Projection;
use crate::ingest::{ClaimRecord, ClaimSource, ParcelRecord};
use rayon::prelude::*;
use std::collections::HashMap;

/// A claim matched to its nearest parcel.
#[derive(Debug, Clone)]
pub struct ClaimMatch {
    pub claim_id: String,
    pub parcel_id: String,
    pub cbg_id: String,
    pub market_value: f64,
    pub source: ClaimSource,
    pub amount: f64,
    pub distance_miles: f64,
}

#[derive(Debug, Clone)]
pub struct MatchOutcome {
    pub matched: Vec<ClaimMatch>,
    /// claim_id of every claim with no parcel within the radius.
    pub unmatched: Vec<String>,
}

struct GridIndex<'a> {
    parcels: &'a [ParcelRecord],
    xy: Vec<(f64, f64)>,
    cells: HashMap<(i64, i64), Vec<u32>>,
    cell_size: f64,
}

impl<'a> GridIndex<'a> {
    fn build(parcels: &'a [ParcelRecord], proj: &Projection, cell_size: f64) -> Self {
        let xy: Vec<(f64, f64)> = parcels
            .iter()
            .map(|p| proj.to_miles(p.lon, p.lat))
            .collect();
        let mut cells: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (i, &(x, y)) in xy.iter().enumerate() {
            let key = ((x / cell_size).floor() as i64, (y / cell_size).floor() as i64);
            cells.entry(key).or_default().push(i as u32);
        }
        Self {
            parcels,
            xy,
            cells,
            cell_size,
        }
    }

    /// Nearest parcel within `radius` of (x, y), ties broken by smaller
    /// parcel_id. Returns (parcel index, distance).
    fn nearest_within(&self, x: f64, y: f64, radius: f64) -> Option<(usize, f64)> {
        let cx = (x / self.cell_size).floor() as i64;
        let cy = (y / self.cell_size).floor() as i64;
        let mut best: Option<(usize, f64)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(bucket) = self.cells.get(&(cx + dx, cy + dy)) else {
                    continue;
                };
                for &pi in bucket {
                    let pi = pi as usize;
                    let (px, py) = self.xy[pi];
                    let d = (px - x).hypot(py - y);
                    if d > radius {
                        continue;
                    }
                    best = match best {
                        None => Some((pi, d)),
                        Some((bi, bd)) => {
                            if d < bd
                                || (d == bd
                                    && self.parcels[pi].parcel_id < self.parcels[bi].parcel_id)
                            {
                                Some((pi, d))
                            } else {
                                Some((bi, bd))
                            }
                        }
                    };
                }
            }
        }
        best
    }
}

/// Map each claim to its nearest parcel centroid within `max_distance_miles`.
///
/// Claims farther than the radius from every parcel come back in `unmatched`;
/// they are reported, never silently assigned. Output preserves claim order.
pub fn match_claims_to_parcels(
    claims: &[ClaimRecord],
    parcels: &[ParcelRecord],
    max_distance_miles: f64,
) -> Result<MatchOutcome, DamageError> {
    if claims.is_empty() {
        return Err(DamageError::EmptyTable("claims"));
    }
    if parcels.is_empty() {
        return Err(DamageError::EmptyTable("parcels"));
    }
    let pts: Vec<(f64, f64)> = parcels.iter().map(|p| (p.lon, p.lat)).collect();
    let proj = Projection::from_points(pts.iter()).expect("nonempty parcels");
    let grid = GridIndex::build(parcels, &proj, max_distance_miles);

    let results: Vec<Option<ClaimMatch>> = claims
        .par_iter()
        .map(|claim| {
            let (x, y) = proj.to_miles(claim.lon, claim.lat);
            grid.nearest_within(x, y, max_distance_miles).map(|(pi, d)| {
                let parcel = &parcels[pi];
                ClaimMatch {
                    claim_id: claim.claim_id.clone(),
                    parcel_id: parcel.parcel_id.clone(),
                    cbg_id: parcel.cbg_id.clone(),
                    market_value: parcel.market_value,
                    source: claim.source,
                    amount: claim.amount,
                    distance_miles: d,
                }
            })
        })
        .collect();

    let mut matched = Vec::new();
    let mut unmatched = Vec::new();
    for (claim, result) in claims.iter().zip(results) {
        match result {
            Some(m) => matched.push(m),
            None => unmatched.push(claim.claim_id.clone()),
        }
    }
    Ok(MatchOutcome { matched, unmatched })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parcel(id: &str, lon: f64, lat: f64) -> ParcelRecord {
        ParcelRecord {
            parcel_id: id.to_string(),
            lon,
            lat,
            market_value: 100_000.0,
            cbg_id: "A".to_string(),
        }
    }

    fn claim(id: &str, lon: f64, lat: f64) -> ClaimRecord {
        ClaimRecord {
            claim_id: id.to_string(),
            source: ClaimSource::Nfip,
            lon,
            lat,
            amount: 1_000.0,
            parcel_hint: None,
        }
    }

    #[test]
    fn claim_matches_nearer_of_two_parcels() {
        let parcels = vec![parcel("near", 0.0, 0.001), parcel("far", 0.0, 0.01)];
        let claims = vec![claim("c1", 0.0, 0.0)];
        let out = match_claims_to_parcels(&claims, &parcels, 5.0).unwrap();
        assert_eq!(out.matched.len(), 1);
        assert_eq!(out.matched[0].parcel_id, "near");
        assert!(out.unmatched.is_empty());
    }

    #[test]
    fn equidistant_claim_takes_smaller_parcel_id() {
        let parcels = vec![parcel("b", 0.0, 0.001), parcel("a", 0.0, -0.001)];
        let claims = vec![claim("c1", 0.0, 0.0)];
        let out = match_claims_to_parcels(&claims, &parcels, 5.0).unwrap();
        assert_eq!(out.matched[0].parcel_id, "a");
    }

    #[test]
    fn distant_claim_is_unmatched() {
        let parcels = vec![parcel("p", 0.0, 0.0)];
        let claims = vec![claim("c1", 0.0, 1.0)]; // ~69 miles away
        let out = match_claims_to_parcels(&claims, &parcels, 0.25).unwrap();
        assert!(out.matched.is_empty());
        assert_eq!(out.unmatched, vec!["c1".to_string()]);
    }

    #[test]
    fn grid_index_agrees_with_exhaustive_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let parcels: Vec<ParcelRecord> = (0..300)
            .map(|i| {
                parcel(
                    &format!("p{i:04}"),
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(29.6..30.0),
                )
            })
            .collect();
        let claims: Vec<ClaimRecord> = (0..1_000)
            .map(|i| {
                claim(
                    &format!("c{i:04}"),
                    rng.gen_range(-0.2..0.2),
                    rng.gen_range(29.6..30.0),
                )
            })
            .collect();
        let radius = 2.0;
        let out = match_claims_to_parcels(&claims, &parcels, radius).unwrap();

        // Exhaustive oracle with the same projection and tie-break.
        let pts: Vec<(f64, f64)> = parcels.iter().map(|p| (p.lon, p.lat)).collect();
        let proj = Projection::from_points(pts.iter()).unwrap();
        let mut matched_iter = out.matched.iter();
        let mut unmatched_iter = out.unmatched.iter();
        for c in &claims {
            let mut best: Option<(&ParcelRecord, f64)> = None;
            for p in &parcels {
                let d = proj.distance_miles((c.lon, c.lat), (p.lon, p.lat));
                if d > radius {
                    continue;
                }
                best = match best {
                    None => Some((p, d)),
                    Some((bp, bd)) => {
                        if d < bd || (d == bd && p.parcel_id < bp.parcel_id) {
                            Some((p, d))
                        } else {
                            Some((bp, bd))
                        }
                    }
                };
            }
            match best {
                Some((p, d)) => {
                    let m = matched_iter.next().expect("grid matched fewer claims");
                    assert_eq!(m.claim_id, c.claim_id);
                    assert_eq!(m.parcel_id, p.parcel_id, "claim {}", c.claim_id);
                    assert_eq!(m.distance_miles, d);
                }
                None => {
                    let u = unmatched_iter.next().expect("grid unmatched fewer claims");
                    assert_eq!(u, &c.claim_id);
                }
            }
        }
        assert!(matched_iter.next().is_none());
        assert!(unmatched_iter.next().is_none());
    }

    #[test]
    fn matching_is_permutation_invariant() {
        let parcels = vec![
            parcel("p1", 0.0, 0.0),
            parcel("p2", 0.01, 0.0),
            parcel("p3", 0.02, 0.0),
        ];
        let claims = vec![
            claim("c1", 0.001, 0.0),
            claim("c2", 0.011, 0.0),
            claim("c3", 0.021, 0.0),
        ];
        let forward = match_claims_to_parcels(&claims, &parcels, 1.0).unwrap();
        let mut reversed_claims = claims.clone();
        reversed_claims.reverse();
        let reversed = match_claims_to_parcels(&reversed_claims, &parcels, 1.0).unwrap();
        let mut fwd: Vec<(String, String)> = forward
            .matched
            .iter()
            .map(|m| (m.claim_id.clone(), m.parcel_id.clone()))
            .collect();
        let mut rev: Vec<(String, String)> = reversed
            .matched
            .iter()
            .map(|m| (m.claim_id.clone(), m.parcel_id.clone()))
            .collect();
        fwd.sort();
        rev.sort();
        assert_eq!(fwd, rev);
    }
}
