//! Hyperbolic spatial decay coefficients.
//!
//! k_i = (RR0 - RR_i) / (RR_i * S_i) with RR0 the best observed recovery rate
//! and S_i the weighted damage exposure of unit i. Larger k means influence
//! falls off faster with distance.

use super::SpatialError;
use crate::weights::SpatialWeights;

/// Which damage value enters the weighted sum S_i.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayExposure {
    /// S_i = sum_j w_ij * damage_j: neighbors' damage, the reading implied
    /// by proximity-influence semantics. Default.
    Neighbor,
    /// S_i = damage_i * sum_j w_ij: the unit's own damage, the literal
    /// subscript reading. Kept for comparison.
    OwnDamage,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayExclusion {
    ZeroRecoveryRate,
    ZeroWeightedDamage,
}

impl DecayExclusion {
    pub fn as_str(&self) -> &'static str {
        match self {
            DecayExclusion::ZeroRecoveryRate => "zero recovery rate",
            DecayExclusion::ZeroWeightedDamage => "zero weighted damage",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecayField {
    /// k per unit; None for excluded units.
    pub k: Vec<Option<f64>>,
    pub rr0: f64,
    pub exposure: DecayExposure,
    pub excluded: Vec<(usize, DecayExclusion)>,
    /// Weighted damage sum S_i per included unit (None where excluded).
    pub weighted_damage: Vec<Option<f64>>,
}

/// Compute the decay coefficient field.
///
/// `damage` should already be min-max scaled. Units with a zero recovery
/// rate or zero weighted damage are excluded with a reason, never NaN.
pub fn compute_decay_coefficients(
    recovery_rate: &[f64],
    damage: &[f64],
    weights: &SpatialWeights,
    exposure: DecayExposure,
) -> Result<DecayField, SpatialError> {
    let n = weights.n();
    if recovery_rate.is_empty() {
        return Err(SpatialError::EmptyField);
    }
    if recovery_rate.len() != n || damage.len() != n {
        return Err(SpatialError::DimensionMismatch(format!(
            "rr {}, damage {}, weights {n}",
            recovery_rate.len(),
            damage.len()
        )));
    }
    let rr0 = recovery_rate.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let lagged = weights
        .lag(damage)
        .map_err(SpatialError::Weights)?;
    let mut k = vec![None; n];
    let mut weighted_damage = vec![None; n];
    let mut excluded = Vec::new();
    for i in 0..n {
        let rr = recovery_rate[i];
        if rr == 0.0 {
            excluded.push((i, DecayExclusion::ZeroRecoveryRate));
            continue;
        }
        let s = match exposure {
            DecayExposure::Neighbor => lagged[i],
            DecayExposure::OwnDamage => {
                let row_sum: f64 = weights.row(i).iter().map(|(_, w)| w).sum();
                damage[i] * row_sum
            }
        };
        if s == 0.0 {
            excluded.push((i, DecayExclusion::ZeroWeightedDamage));
            continue;
        }
        weighted_damage[i] = Some(s);
        k[i] = Some((rr0 - rr) / (rr * s));
    }
    Ok(DecayField {
        k,
        rr0,
        exposure,
        excluded,
        weighted_damage,
    })
}

impl DecayField {
    /// Back-substitution residual |RR_i - RR0 / (1 + k_i S_i)| per included
    /// unit; the algebraic identity check.
    pub fn identity_residuals(&self, recovery_rate: &[f64]) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.k.len() {
            if let (Some(k), Some(s)) = (self.k[i], self.weighted_damage[i]) {
                let implied = self.rr0 / (1.0 + k * s);
                out.push((i, (recovery_rate[i] - implied).abs()));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{SpatialWeights, WeightScheme};

    /// Two units, each the other's sole neighbor with unit weight.
    fn pair_weights() -> SpatialWeights {
        SpatialWeights::from_raw_rows(
            vec![vec![(1, 1.0)], vec![(0, 1.0)]],
            WeightScheme::Contiguity,
        )
    }

    #[test]
    fn hand_case_gives_exactly_half() {
        // rr0 = 0.8, rr_i = 0.4, weighted damage = 2 -> k = 0.4/(0.4*2) = 0.5
        let w = pair_weights();
        let rr = [0.8, 0.4];
        let damage = [2.0, 2.0]; // lag for each unit = 2.0
        let field = compute_decay_coefficients(&rr, &damage, &w, DecayExposure::Neighbor).unwrap();
        assert_eq!(field.k[1], Some(0.5));
    }

    #[test]
    fn unit_at_best_rate_has_zero_k() {
        let w = pair_weights();
        let rr = [0.8, 0.8];
        let damage = [1.0, 1.0];
        let field = compute_decay_coefficients(&rr, &damage, &w, DecayExposure::Neighbor).unwrap();
        assert_eq!(field.k[0], Some(0.0));
        assert_eq!(field.k[1], Some(0.0));
    }

    #[test]
    fn zero_rate_excluded_not_nan() {
        let w = pair_weights();
        let rr = [0.8, 0.0];
        let damage = [1.0, 1.0];
        let field = compute_decay_coefficients(&rr, &damage, &w, DecayExposure::Neighbor).unwrap();
        assert_eq!(field.k[1], None);
        assert_eq!(
            field.excluded,
            vec![(1, DecayExclusion::ZeroRecoveryRate)]
        );
        assert!(field.k.iter().flatten().all(|k| k.is_finite()));
    }

    #[test]
    fn zero_weighted_damage_excluded() {
        let w = pair_weights();
        let rr = [0.8, 0.4];
        let damage = [0.0, 0.0];
        let field = compute_decay_coefficients(&rr, &damage, &w, DecayExposure::Neighbor).unwrap();
        assert_eq!(field.k[1], None);
        assert!(field
            .excluded
            .contains(&(1, DecayExclusion::ZeroWeightedDamage)));
    }

    #[test]
    fn back_substitution_identity_holds() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let n = 40;
        let rows: Vec<Vec<(u32, f64)>> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (j as u32, rng.gen_range(0.1..1.0)))
                    .collect()
            })
            .collect();
        let w = SpatialWeights::from_raw_rows(rows, WeightScheme::InverseDistance);
        let rr: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.9)).collect();
        let damage: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let field = compute_decay_coefficients(&rr, &damage, &w, DecayExposure::Neighbor).unwrap();
        for (i, resid) in field.identity_residuals(&rr) {
            assert!(resid <= 1e-12, "unit {i} residual {resid}");
        }
    }

    #[test]
    fn own_damage_mode_uses_local_value() {
        let w = pair_weights();
        let rr = [0.8, 0.4];
        let damage = [0.0, 4.0]; // unit 1's own damage 4, row sum 1
        let field = compute_decay_coefficients(&rr, &damage, &w, DecayExposure::OwnDamage).unwrap();
        // k_1 = (0.8-0.4)/(0.4*4) = 0.25
        assert_eq!(field.k[1], Some(0.25));
        // unit 0 has own damage 0 -> excluded
        assert_eq!(field.k[0], None);
    }
}
