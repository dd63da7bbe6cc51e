//! Group heterogeneity of decay coefficients: mean-split grouping, empirical
//! CDFs, and a one-way ANOVA F test.

use super::SpatialError;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

#[derive(Debug, Clone, serde::Serialize)]
pub struct GroupSummary {
    pub n: usize,
    pub mean: f64,
    /// Empirical CDF support points: (value, cumulative fraction), sorted.
    pub ecdf: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct HeterogeneityResult {
    pub feature: String,
    /// Mean of the grouping feature; low group is strictly below it.
    pub split_value: f64,
    pub low: GroupSummary,
    pub high: GroupSummary,
    pub f_statistic: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p_value: f64,
}

fn ecdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *v => last.1 = frac,
            _ => out.push((*v, frac)),
        }
    }
    out
}

fn summarize(values: &[f64]) -> GroupSummary {
    GroupSummary {
        n: values.len(),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        ecdf: ecdf(values),
    }
}

/// One-way ANOVA over arbitrary groups: F = MSB / MSW with
/// df = (g - 1, N - g). Identical group means give F = 0 and p = 1.
pub fn one_way_anova(groups: &[&[f64]]) -> Result<(f64, usize, usize, f64), SpatialError> {
    let g = groups.len();
    if g < 2 || groups.iter().any(|grp| grp.is_empty()) {
        return Err(SpatialError::EmptyGroup("anova"));
    }
    let total_n: usize = groups.iter().map(|grp| grp.len()).sum();
    if total_n <= g {
        return Err(SpatialError::EmptyGroup("anova"));
    }
    let grand_mean: f64 =
        groups.iter().flat_map(|grp| grp.iter()).sum::<f64>() / total_n as f64;

    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for grp in groups {
        let mean = grp.iter().sum::<f64>() / grp.len() as f64;
        ssb += grp.len() as f64 * (mean - grand_mean) * (mean - grand_mean);
        ssw += grp.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    }
    let df_between = g - 1;
    let df_within = total_n - g;
    let msb = ssb / df_between as f64;
    let msw = ssw / df_within as f64;
    let f = if msw == 0.0 {
        if msb == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        msb / msw
    };
    let p = if f == 0.0 {
        1.0
    } else if f.is_infinite() {
        0.0
    } else {
        let dist = FisherSnedecor::new(df_between as f64, df_within as f64)
            .expect("positive degrees of freedom");
        1.0 - dist.cdf(f)
    };
    Ok((f, df_between, df_within, p))
}

/// Split units at the mean of `grouping` (low: strictly below; high: at or
/// above), then compare the `values` distributions with one-way ANOVA.
/// Only units where both series are present are used.
pub fn heterogeneity_test(
    values: &[Option<f64>],
    grouping: &[f64],
    feature: &str,
) -> Result<HeterogeneityResult, SpatialError> {
    if values.len() != grouping.len() {
        return Err(SpatialError::DimensionMismatch(format!(
            "values {}, grouping {}",
            values.len(),
            grouping.len()
        )));
    }
    let pairs: Vec<(f64, f64)> = values
        .iter()
        .zip(grouping)
        .filter_map(|(v, g)| v.map(|v| (v, *g)))
        .collect();
    if pairs.is_empty() {
        return Err(SpatialError::EmptyField);
    }
    let split = pairs.iter().map(|(_, g)| g).sum::<f64>() / pairs.len() as f64;
    let low: Vec<f64> = pairs.iter().filter(|(_, g)| *g < split).map(|(v, _)| *v).collect();
    let high: Vec<f64> = pairs.iter().filter(|(_, g)| *g >= split).map(|(v, _)| *v).collect();
    if low.is_empty() {
        return Err(SpatialError::EmptyGroup("low"));
    }
    if high.is_empty() {
        return Err(SpatialError::EmptyGroup("high"));
    }
    let (f, df_between, df_within, p) = one_way_anova(&[&low, &high])?;
    Ok(HeterogeneityResult {
        feature: feature.to_string(),
        split_value: split,
        low: summarize(&low),
        high: summarize(&high),
        f_statistic: f,
        df_between,
        df_within,
        p_value: p,
    })
}
