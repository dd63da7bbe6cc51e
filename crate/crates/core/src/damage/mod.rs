//! Residential damage metrics: harmonize uninsured-loss assessments onto the
//! insured-claim payment scale, match claims to parcels, compute per-property
//! damage extent, and aggregate four metrics per CBG.

mod grid;

pub use grid::{match_claims_to_parcels, ClaimMatch, MatchOutcome};

use crate::ingest::{CbgIndex, ClaimSource};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DamageError {
    #[error("bridge fit needs at least 3 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("bridge fit requires strictly positive amounts (pair {0})")]
    NonpositiveAmount(usize),
    #[error("bridge fit is degenerate: all ia amounts identical")]
    DegenerateRegressor,
    #[error("matching requires nonempty {0} table")]
    EmptyTable(&'static str),
    #[error("IA claims present but no bridge model supplied")]
    MissingBridge,
    #[error("parcel '{0}' has nonpositive market value")]
    BadMarketValue(String),
    #[error("cbg_id '{0}' not present in index")]
    UnknownCbg(String),
}

/// Log-log regression bridging the uninsured-assessment scale onto the
/// insured-payment scale: log(nfip) = intercept + slope * log(ia).
#[derive(Debug, Clone, serde::Serialize)]
pub struct BridgeModel {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
    /// A non-increasing transform (slope <= 0) is statistically suspect;
    /// the fit is returned but flagged for the run report.
    pub nonmonotone: bool,
}

impl BridgeModel {
    /// Harmonized amount: exp(intercept) * amount^slope.
    pub fn apply(&self, ia_amount: f64) -> f64 {
        (self.intercept + self.slope * ia_amount.ln()).exp()
    }

    /// Inverse of the harmonization transform: the raw amount whose bridged
    /// value equals `target`.
    pub fn invert(&self, target: f64) -> f64 {
        ((target.ln() - self.intercept) / self.slope).exp()
    }
}

/// OLS of log(nfip) on log(ia) over explicit paired samples.
pub fn fit_ia_nfip_bridge(pairs: &[(f64, f64)]) -> Result<BridgeModel, DamageError> {
    if pairs.len() < 3 {
        return Err(DamageError::TooFewPairs(pairs.len()));
    }
    for (i, (ia, nfip)) in pairs.iter().enumerate() {
        if *ia <= 0.0 || *nfip <= 0.0 {
            return Err(DamageError::NonpositiveAmount(i));
        }
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|(ia, _)| ia.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|(_, nfip)| nfip.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..pairs.len() {
        let dx = xs[i] - x_mean;
        let dy = ys[i] - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(DamageError::DegenerateRegressor);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(BridgeModel {
        slope,
        intercept,
        r_squared,
        n: pairs.len(),
        nonmonotone: slope <= 0.0,
    })
}

/// Per-property damage extent record.
#[derive(Debug, Clone)]
pub struct PdeRecord {
    pub parcel_id: String,
    pub cbg_id: String,
    /// Harmonized claim value in USD.
    pub claim_value: f64,
    pub market_value: f64,
    /// claim_value / market_value, truncated at the cap.
    pub pde: f64,
    pub capped: bool,
    pub source: ClaimSource,
}

/// Default truncation for claim values exceeding the market value.
pub const DEFAULT_PDE_CAP: f64 = 1.0;

/// Reduce matched claims to one damage-extent record per parcel.
///
/// When a parcel carries claims from both sources, only the insured (NFIP)
/// amounts are used; otherwise uninsured (IA) amounts pass through the bridge.
/// Multiple claims of the chosen source on one parcel are summed.
pub fn compute_pde(
    matches: &[ClaimMatch],
    bridge: Option<&BridgeModel>,
    pde_cap: f64,
) -> Result<Vec<PdeRecord>, DamageError> {
    use std::collections::BTreeMap;

    // parcel_id -> (cbg, mv, nfip sum, ia sum)
    let mut per_parcel: BTreeMap<&str, (&str, f64, f64, f64)> = BTreeMap::new();
    for m in matches {
        if m.market_value <= 0.0 {
            return Err(DamageError::BadMarketValue(m.parcel_id.clone()));
        }
        let entry = per_parcel
            .entry(&m.parcel_id)
            .or_insert((&m.cbg_id, m.market_value, 0.0, 0.0));
        match m.source {
            ClaimSource::Nfip => entry.2 += m.amount,
            ClaimSource::Ia => entry.3 += m.amount,
        }
    }

    let mut records = Vec::with_capacity(per_parcel.len());
    for (parcel_id, (cbg_id, market_value, nfip_sum, ia_sum)) in per_parcel {
        let (claim_value, source) = if nfip_sum > 0.0 {
            (nfip_sum, ClaimSource::Nfip)
        } else {
            let bridge = bridge.ok_or(DamageError::MissingBridge)?;
            (bridge.apply(ia_sum), ClaimSource::Ia)
        };
        let raw = claim_value / market_value;
        let capped = raw > pde_cap;
        records.push(PdeRecord {
            parcel_id: parcel_id.to_string(),
            cbg_id: cbg_id.to_string(),
            claim_value,
            market_value,
            pde: if capped { pde_cap } else { raw },
            capped,
            source,
        });
    }
    Ok(records)
}

/// The four damage metrics for one CBG.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbgDamage {
    /// Number of claims (damage-extent records).
    pub nc: f64,
    /// Mean damage extent.
    pub mp: f64,
    /// Sample standard deviation of damage extent (0 when nc <= 1).
    pub sdp: f64,
    /// Count of records with damage extent strictly above 0.5.
    pub mdp: f64,
}

impl CbgDamage {
    pub const ZERO: CbgDamage = CbgDamage {
        nc: 0.0,
        mp: 0.0,
        sdp: 0.0,
        mdp: 0.0,
    };
}

/// Aggregate damage-extent records into per-CBG metrics, index-aligned.
/// CBGs with no records get all-zero metrics.
pub fn aggregate_cbg_damage(
    records: &[PdeRecord],
    index: &CbgIndex,
) -> Result<Vec<CbgDamage>, DamageError> {
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); index.len()];
    for r in records {
        let i = index
            .index_of(&r.cbg_id)
            .ok_or_else(|| DamageError::UnknownCbg(r.cbg_id.clone()))?;
        buckets[i].push(r.pde);
    }
    Ok(buckets
        .into_iter()
        .map(|pdes| {
            let nc = pdes.len();
            if nc == 0 {
                return CbgDamage::ZERO;
            }
            let mean = pdes.iter().sum::<f64>() / nc as f64;
            let sdp = if nc <= 1 {
                0.0
            } else {
                let ss: f64 = pdes.iter().map(|p| (p - mean) * (p - mean)).sum();
                (ss / (nc as f64 - 1.0)).sqrt()
            };
            let mdp = pdes.iter().filter(|&&p| p > 0.5).count();
            CbgDamage {
                nc: nc as f64,
                mp: mean,
                sdp,
                mdp: mdp as f64,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::CbgIndex;

    #[test]
    fn exact_loglinear_pairs_recover_slope_and_intercept() {
        // log(nfip) = 0.2 + 1.1 * log(ia)
        let pairs: Vec<(f64, f64)> = [100.0, 500.0, 2_000.0, 30_000.0]
            .iter()
            .map(|&ia: &f64| (ia, (0.2 + 1.1 * ia.ln()).exp()))
            .collect();
        let model = fit_ia_nfip_bridge(&pairs).unwrap();
        assert!((model.slope - 1.1).abs() < 1e-12, "slope {}", model.slope);
        assert!((model.intercept - 0.2).abs() < 1e-12);
        assert!((model.r_squared - 1.0).abs() < 1e-12);
        assert!(!model.nonmonotone);
    }

    #[test]
    fn identical_ia_amounts_are_degenerate() {
        let pairs = vec![(100.0, 120.0), (100.0, 140.0), (100.0, 90.0)];
        assert!(matches!(
            fit_ia_nfip_bridge(&pairs),
            Err(DamageError::DegenerateRegressor)
        ));
    }

    #[test]
    fn bridge_needs_three_positive_pairs() {
        assert!(matches!(
            fit_ia_nfip_bridge(&[(1.0, 2.0), (2.0, 3.0)]),
            Err(DamageError::TooFewPairs(2))
        ));
        assert!(matches!(
            fit_ia_nfip_bridge(&[(1.0, 2.0), (2.0, 3.0), (0.0, 1.0)]),
            Err(DamageError::NonpositiveAmount(2))
        ));
    }

    fn claim_match(parcel: &str, source: ClaimSource, amount: f64) -> ClaimMatch {
        ClaimMatch {
            claim_id: format!("c-{parcel}-{amount}"),
            parcel_id: parcel.to_string(),
            cbg_id: "A".to_string(),
            market_value: 200_000.0,
            source,
            amount,
            distance_miles: 0.0,
        }
    }

    #[test]
    fn pde_is_claim_over_market_value() {
        let matches = vec![claim_match("p1", ClaimSource::Nfip, 50_000.0)];
        let recs = compute_pde(&matches, None, DEFAULT_PDE_CAP).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].pde, 0.25);
        assert!(!recs[0].capped);
    }

    #[test]
    fn nfip_wins_when_both_sources_present() {
        let bridge = fit_ia_nfip_bridge(&[(1.0, 1.0), (10.0, 10.0), (100.0, 100.0)]).unwrap();
        let matches = vec![
            claim_match("p1", ClaimSource::Nfip, 30_000.0),
            claim_match("p1", ClaimSource::Ia, 99_000.0),
        ];
        let recs = compute_pde(&matches, Some(&bridge), DEFAULT_PDE_CAP).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].claim_value, 30_000.0);
        assert_eq!(recs[0].source, ClaimSource::Nfip);
    }

    #[test]
    fn claim_exceeding_market_value_is_capped_and_flagged() {
        let mut m = claim_match("p1", ClaimSource::Nfip, 300_000.0);
        m.market_value = 200_000.0;
        let recs = compute_pde(&[m], None, 1.0).unwrap();
        assert_eq!(recs[0].pde, 1.0);
        assert!(recs[0].capped);
    }

    #[test]
    fn ia_claims_without_bridge_error_out() {
        let matches = vec![claim_match("p1", ClaimSource::Ia, 10_000.0)];
        assert!(matches!(
            compute_pde(&matches, None, 1.0),
            Err(DamageError::MissingBridge)
        ));
    }

    fn two_cbg_index() -> CbgIndex {
        CbgIndex::new(
            vec![("A".into(), 0.0, 0.0, 1.0), ("B".into(), 0.5, 0.0, 1.0)],
            &[],
        )
        .unwrap()
    }

    fn pde_rec(cbg: &str, pde: f64) -> PdeRecord {
        PdeRecord {
            parcel_id: format!("p{pde}"),
            cbg_id: cbg.into(),
            claim_value: pde * 100_000.0,
            market_value: 100_000.0,
            pde,
            capped: false,
            source: ClaimSource::Nfip,
        }
    }

    #[test]
    fn aggregation_matches_hand_computation() {
        let recs = vec![pde_rec("A", 0.2), pde_rec("A", 0.6), pde_rec("A", 0.7)];
        let agg = aggregate_cbg_damage(&recs, &two_cbg_index()).unwrap();
        let a = agg[0];
        assert_eq!(a.nc, 3.0);
        assert!((a.mp - 0.5).abs() < 1e-15);
        // sample sd of {0.2, 0.6, 0.7} with n-1 denominator
        assert!((a.sdp - 0.264_575_131_106_459).abs() < 1e-12, "sdp {}", a.sdp);
        assert_eq!(a.mdp, 2.0);
        assert_eq!(agg[1], CbgDamage::ZERO);
    }

    #[test]
    fn singleton_cbg_has_zero_spread_and_exact_boundary_excluded() {
        let recs = vec![pde_rec("A", 0.4), pde_rec("B", 0.5)];
        let agg = aggregate_cbg_damage(&recs, &two_cbg_index()).unwrap();
        assert_eq!(agg[0].nc, 1.0);
        assert_eq!(agg[0].mp, 0.4);
        assert_eq!(agg[0].sdp, 0.0);
        assert_eq!(agg[0].mdp, 0.0);
        // pde == 0.5 is not "larger than 0.5"
        assert_eq!(agg[1].mdp, 0.0);
    }

    #[test]
    fn total_claim_count_is_preserved() {
        let recs = vec![pde_rec("A", 0.1), pde_rec("B", 0.2), pde_rec("B", 0.9)];
        let agg = aggregate_cbg_damage(&recs, &two_cbg_index()).unwrap();
        let total: f64 = agg.iter().map(|d| d.nc).sum();
        assert_eq!(total, recs.len() as f64);
    }
}
