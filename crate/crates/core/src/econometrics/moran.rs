//! Global Moran's I with permutation inference.

use super::EconError;
use crate::weights::SpatialWeights;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoranAlternative {
    /// |I_perm| >= |I_obs|
    TwoSided,
    /// I_perm >= I_obs
    Greater,
    /// I_perm <= I_obs
    Less,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct MoranResult {
    pub i: f64,
    pub p_value: f64,
    pub permutations: usize,
    pub alternative: MoranAlternative,
    /// Mean of the permutation null distribution.
    pub null_mean: f64,
    /// Standard deviation of the permutation null distribution.
    pub null_sd: f64,
}

/// I = n * sum_ij w_ij (x_i - xbar)(x_j - xbar) / (S0 * sum_i (x_i - xbar)^2).
pub fn morans_i_statistic(x: &[f64], weights: &SpatialWeights) -> Result<f64, EconError> {
    if x.len() != weights.n() {
        return Err(EconError::DimensionMismatch(format!(
            "x has length {}, weights order {}",
            x.len(),
            weights.n()
        )));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let dev: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    if denom == 0.0 {
        return Err(EconError::ZeroVariance("x"));
    }
    let s0 = weights.total_weight();
    if s0 == 0.0 {
        return Err(EconError::ZeroVariance("weights"));
    }
    let mut num = 0.0;
    for (i, row) in weights.iter_rows().enumerate() {
        let di = dev[i];
        for &(j, w) in row {
            num += w * di * dev[j as usize];
        }
    }
    Ok(n * num / (s0 * denom))
}

/// Moran's I with a permutation test.
///
/// The null shuffles values across locations. Permutation r uses an
/// independent ChaCha stream keyed by (seed, r), so the p-value is
/// reproducible regardless of thread scheduling. p = (1 + hits)/(1 + R).
pub fn morans_i(
    x: &[f64],
    weights: &SpatialWeights,
    permutations: usize,
    seed: u64,
    alternative: MoranAlternative,
) -> Result<MoranResult, EconError> {
    let observed = morans_i_statistic(x, weights)?;
    let n = x.len();

    let perm_stats: Vec<f64> = (0..permutations)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64 + 1);
            let mut indices: Vec<usize> = (0..n).collect();
            indices.shuffle(&mut rng);
            let shuffled: Vec<f64> = indices.iter().map(|&i| x[i]).collect();
            morans_i_statistic(&shuffled, weights).expect("variance preserved by shuffling")
        })
        .collect();

    let hits = perm_stats
        .iter()
        .filter(|&&stat| match alternative {
            MoranAlternative::TwoSided => stat.abs() >= observed.abs(),
            MoranAlternative::Greater => stat >= observed,
            MoranAlternative::Less => stat <= observed,
        })
        .count();
    let p_value = (1 + hits) as f64 / (1 + permutations) as f64;

    let null_mean = if permutations == 0 {
        f64::NAN
    } else {
        perm_stats.iter().sum::<f64>() / permutations as f64
    };
    let null_sd = if permutations < 2 {
        f64::NAN
    } else {
        let var = perm_stats
            .iter()
            .map(|s| (s - null_mean) * (s - null_mean))
            .sum::<f64>()
            / (permutations as f64 - 1.0);
        var.sqrt()
    };

    Ok(MoranResult {
        i: observed,
        p_value,
        permutations,
        alternative,
        null_mean,
        null_sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::CbgIndex;
    use crate::weights::{build_weights, WeightScheme};

    /// 2x2 rook-contiguity grid: cells 0,1 on top row, 2,3 below.
    fn checkerboard() -> (Vec<f64>, SpatialWeights) {
        let index = CbgIndex::new(
            vec![
                ("c00".into(), 0.0, 0.1, 1.0),
                ("c01".into(), 0.1, 0.1, 1.0),
                ("c10".into(), 0.0, 0.0, 1.0),
                ("c11".into(), 0.1, 0.0, 1.0),
            ],
            &[
                ("c00".into(), "c01".into()),
                ("c00".into(), "c10".into()),
                ("c01".into(), "c11".into()),
                ("c10".into(), "c11".into()),
            ],
        )
        .unwrap();
        let w = build_weights(&index, WeightScheme::Contiguity).unwrap();
        // Alternating field: +1 at c00 and c11, -1 at c01 and c10.
        (vec![1.0, -1.0, -1.0, 1.0], w)
    }

    #[test]
    fn checkerboard_gives_exactly_minus_one() {
        let (x, w) = checkerboard();
        let i = morans_i_statistic(&x, &w).unwrap();
        assert_eq!(i, -1.0);
    }

    #[test]
    fn constant_field_errors() {
        let (_, w) = checkerboard();
        assert!(matches!(
            morans_i_statistic(&[2.0; 4], &w),
            Err(EconError::ZeroVariance("x"))
        ));
    }

    #[test]
    fn permutation_p_is_reproducible_and_bounded() {
        let (x, w) = checkerboard();
        let a = morans_i(&x, &w, 999, 42, MoranAlternative::TwoSided).unwrap();
        let b = morans_i(&x, &w, 999, 42, MoranAlternative::TwoSided).unwrap();
        assert_eq!(a.p_value, b.p_value);
        assert!(a.p_value >= 1.0 / 1000.0);
        let c = morans_i(&x, &w, 999, 43, MoranAlternative::Greater).unwrap();
        assert!(c.p_value >= 1.0 / 1000.0);
    }

    #[test]
    fn null_distribution_centers_near_expected_value() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 30;
        let rows: Vec<(String, f64, f64, f64)> = (0..n)
            .map(|i| {
                (
                    format!("u{i:02}"),
                    rng.gen_range(-0.3..0.3),
                    rng.gen_range(29.5..30.1),
                    1.0,
                )
            })
            .collect();
        let index = CbgIndex::new(rows, &[]).unwrap();
        let w = build_weights(&index, WeightScheme::InverseDistance).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let result = morans_i(&x, &w, 999, 7, MoranAlternative::TwoSided).unwrap();
        let expected = -1.0 / (n as f64 - 1.0);
        assert!(
            (result.null_mean - expected).abs() < 0.05,
            "null mean {} vs {}",
            result.null_mean,
            expected
        );
    }
}
