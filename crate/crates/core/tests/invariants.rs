//! Cross-module property tests: randomized invariants that complement the
//! per-module unit suites.

use chrono::NaiveDate;
use proptest::prelude::*;
use spillover_core::covariates::min_max_scale;
use spillover_core::geo::MILES_PER_DEGREE;
use spillover_core::ingest::{load_claims, CbgIndex};
use spillover_core::mobility::{compute_baseline, extract_recovery_from_pc, MovementSeries};
use spillover_core::weights::{build_weights, WeightScheme};
use std::io::Write;

fn write_tmp(content: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(content.as_bytes()).unwrap();
    f
}

proptest! {
    /// Claims with nonpositive amounts or bad numerics never survive a load.
    #[test]
    fn malformed_claim_rows_are_rejected(
        amount in prop_oneof![Just(0.0), -1000.0..0.0],
        garbage in "[a-z]{1,8}",
    ) {
        let csv = format!(
            "claim_id,source,lon,lat,amount\nc1,NFIP,0.0,0.0,{amount}\nc2,IA,0.0,0.0,{garbage}\nc3,NFIP,0.1,0.1,5000\n"
        );
        let f = write_tmp(&csv);
        let loaded = load_claims(f.path()).unwrap();
        prop_assert_eq!(loaded.records.len(), 1);
        prop_assert_eq!(loaded.rejected.len(), 2);
        prop_assert_eq!(loaded.records[0].claim_id.as_str(), "c3");
    }

    /// Extracted recovery rates are never negative: the trough is the window
    /// minimum, so any later steady state sits at or above it.
    #[test]
    fn recovery_rate_is_nonnegative(pc in prop::collection::vec(-1.0f64..1.0, 2..40)) {
        if let Some((t_s, t_n, rate)) = extract_recovery_from_pc(&pc, 0.10) {
            prop_assert!(t_s < t_n);
            prop_assert!(rate >= 0.0, "rate {} from path {:?}", rate, pc);
        }
    }

    /// Min-max scaling preserves order and is idempotent.
    #[test]
    fn min_max_scale_monotone_idempotent(xs in prop::collection::vec(-1e6f64..1e6, 1..50)) {
        let s = min_max_scale(&xs).unwrap();
        for i in 0..xs.len() {
            for j in 0..xs.len() {
                prop_assert_eq!(xs[i] < xs[j], s.values[i] < s.values[j]);
            }
        }
        let s2 = min_max_scale(&s.values).unwrap();
        prop_assert_eq!(s.values, s2.values);
    }

    /// Every non-isolate row of a standardized matrix sums to 1 within 1e-12,
    /// under every scheme, on random point clouds.
    #[test]
    fn row_standardization_sums_to_one(
        seed in 0u64..1000,
        n in 3usize..40,
        k in 1usize..3,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<(String, f64, f64, f64)> = (0..n)
            .map(|i| {
                (
                    format!("r{i:03}"),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(29.0..30.0),
                    1.0,
                )
            })
            .collect();
        let mut pairs = Vec::new();
        for i in 0..n.saturating_sub(1) {
            pairs.push((format!("r{i:03}"), format!("r{:03}", i + 1)));
        }
        let index = CbgIndex::new(rows, &pairs).unwrap();
        for scheme in [
            WeightScheme::InverseDistance,
            WeightScheme::InverseDistanceThresholded { threshold_miles: 10.0 },
            WeightScheme::InverseSquare,
            WeightScheme::Knn { k: k.min(n - 1) },
            WeightScheme::Contiguity,
        ] {
            let w = build_weights(&index, scheme).unwrap();
            for (i, row) in w.iter_rows().enumerate() {
                let sum: f64 = row.iter().map(|(_, v)| v).sum();
                if w.isolates.contains(&i) {
                    prop_assert_eq!(sum, 0.0);
                } else {
                    prop_assert!((sum - 1.0).abs() <= 1e-12, "{:?} row {} -> {}", scheme, i, sum);
                }
            }
        }
    }
}

/// Sparse and dense weight construction agree exactly at n <= 100.
#[test]
fn sparse_matches_dense_construction_exactly() {
    use rand::{Rng, SeedableRng};
    use spillover_core::geo::Projection;
    for seed in 0..5u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(5..=100);
        let rows: Vec<(String, f64, f64, f64)> = (0..n)
            .map(|i| {
                (
                    format!("d{i:03}"),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(29.0..30.0),
                    1.0,
                )
            })
            .collect();
        let index = CbgIndex::new(rows, &[]).unwrap();
        let threshold = rng.gen_range(5.0..40.0);
        let w = build_weights(
            &index,
            WeightScheme::InverseDistanceThresholded {
                threshold_miles: threshold,
            },
        )
        .unwrap();
        let sparse = w.to_dense();

        // Dense reference: full n x n raw matrix, standardized row by row in
        // the same neighbor order.
        let pts: Vec<(f64, f64)> = index.centroids().collect();
        let proj = Projection::from_points(pts.iter()).unwrap();
        let mut dense = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = proj.distance_miles(pts[i], pts[j]);
                if d <= threshold {
                    dense[i][j] = 1.0 / d;
                    sum += 1.0 / d;
                }
            }
            if sum > 0.0 {
                for v in dense[i].iter_mut() {
                    *v /= sum;
                }
            }
        }
        assert_eq!(sparse, dense, "seed {seed}");
    }
}

/// Shifting the calendar by whole weeks leaves weekly baselines unchanged.
#[test]
fn baseline_invariant_under_whole_week_shift() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let mr: Vec<Option<f64>> = (0..21).map(|_| Some(rng.gen_range(0.1..0.9))).collect();
    let start = NaiveDate::from_ymd_opt(2017, 8, 1).unwrap();
    let series = MovementSeries {
        cbg: 0,
        start,
        mr: mr.clone(),
        residents_observed: vec![10; 21],
    };
    let baseline = compute_baseline(&series, start, start + chrono::Duration::days(20)).unwrap();

    for weeks in [1i64, 4, 13] {
        let shifted_start = start + chrono::Duration::days(7 * weeks);
        let shifted = MovementSeries {
            cbg: 0,
            start: shifted_start,
            mr: mr.clone(),
            residents_observed: vec![10; 21],
        };
        let shifted_baseline = compute_baseline(
            &shifted,
            shifted_start,
            shifted_start + chrono::Duration::days(20),
        )
        .unwrap();
        assert_eq!(baseline.by_weekday, shifted_baseline.by_weekday);
    }
}

/// The distance scale is sane: one degree of longitude at the equator is one
/// degree of latitude anywhere, ~69 miles.
#[test]
fn distance_pairs_match_projection() {
    let deg = 1.0 / MILES_PER_DEGREE;
    let index = CbgIndex::new(
        vec![
            ("a".into(), 0.0, 0.0, 1.0),
            ("b".into(), 3.0 * deg, 0.0, 1.0),
            ("c".into(), 0.0, 4.0 * deg, 1.0),
        ],
        &[],
    )
    .unwrap();
    let pairs = spillover_core::weights::distance_pairs(&index).unwrap();
    // 3-4-5 triangle in miles, up to the cos(mean latitude) scaling of the
    // longitude leg (mean latitude here is a fraction of a degree).
    let dists: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    assert!((dists[0] - 3.0).abs() < 1e-5, "{dists:?}");
    assert!((dists[1] - 4.0).abs() < 1e-5);
    assert!((dists[2] - 5.0).abs() < 1e-5);
}
