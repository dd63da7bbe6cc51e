//! Sparse spatial weight matrices: inverse distance (optionally thresholded),
//! inverse square, k-nearest-neighbor, and shared-boundary contiguity, all
//! row-standardized with isolates kept as all-zero rows.

use crate::geo::Projection;
use crate::ingest::CbgIndex;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("need at least 2 units, got {0}")]
    TooFewUnits(usize),
    #[error("duplicate centroids at indices {0} and {1} (zero distance off-diagonal)")]
    DuplicateCentroids(usize, usize),
    #[error("kNN requires k < n, got k={k}, n={n}")]
    BadK { k: usize, n: usize },
    #[error("vector length {got} does not match matrix order {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Weighting scheme. Distances are centroid-to-centroid miles.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WeightScheme {
    /// w = 1/d for every pair.
    InverseDistance,
    /// w = 1/d for pairs with d <= threshold, else 0.
    InverseDistanceThresholded { threshold_miles: f64 },
    /// w = 1/d^2 for every pair.
    InverseSquare,
    /// Binary weight on the k nearest neighbors (directed).
    Knn { k: usize },
    /// Binary weight on boundary-sharing pairs from the adjacency input.
    Contiguity,
}

impl WeightScheme {
    pub fn label(&self) -> String {
        match self {
            WeightScheme::InverseDistance => "inverse_distance".into(),
            WeightScheme::InverseDistanceThresholded { threshold_miles } => {
                format!("inverse_distance_thresholded(D={threshold_miles})")
            }
            WeightScheme::InverseSquare => "inverse_square".into(),
            WeightScheme::Knn { k } => format!("knn(k={k})"),
            WeightScheme::Contiguity => "contiguity".into(),
        }
    }
}

/// Sparse row-standardized spatial weight matrix.
#[derive(Debug, Clone)]
pub struct SpatialWeights {
    n: usize,
    /// Per-row (neighbor index, weight), neighbor indices ascending.
    rows: Vec<Vec<(u32, f64)>>,
    pub scheme: WeightScheme,
    pub row_standardized: bool,
    /// Rows with no neighbors under this scheme.
    pub isolates: Vec<usize>,
}

impl SpatialWeights {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.rows[i]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[(u32, f64)]> {
        self.rows.iter().map(|r| r.as_slice())
    }

    /// Sum of all weights (S0 in autocorrelation statistics).
    pub fn total_weight(&self) -> f64 {
        self.rows
            .iter()
            .map(|row| row.iter().map(|(_, w)| w).sum::<f64>())
            .sum()
    }

    /// Spatial lag (Wx)_i = sum_j w_ij x_j. Isolate rows lag to 0.
    pub fn lag(&self, x: &[f64]) -> Result<Vec<f64>, WeightsError> {
        if x.len() != self.n {
            return Err(WeightsError::LengthMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * x[j as usize]).sum())
            .collect())
    }

    /// Dense copy, for audit dumps and small-n tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n]; self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                dense[i][j as usize] = w;
            }
        }
        dense
    }

    /// Construct from raw sparse rows, then row-standardize.
    pub fn from_raw_rows(rows: Vec<Vec<(u32, f64)>>, scheme: WeightScheme) -> SpatialWeights {
        let n = rows.len();
        let mut w = SpatialWeights {
            n,
            rows,
            scheme,
            row_standardized: false,
            isolates: Vec::new(),
        };
        w.standardize_rows();
        w
    }

    /// Divide each row by its sum; all-zero rows stay zero and are recorded
    /// as isolates. Idempotent.
    pub fn standardize_rows(&mut self) {
        self.isolates.clear();
        for (i, row) in self.rows.iter_mut().enumerate() {
            let sum: f64 = row.iter().map(|(_, w)| w).sum();
            if sum == 0.0 || row.is_empty() {
                self.isolates.push(i);
                row.clear();
            } else {
                for (_, w) in row.iter_mut() {
                    *w /= sum;
                }
            }
        }
        self.row_standardized = true;
    }
}

/// All distinct unordered centroid pairs with distances, sorted ascending by
/// (distance, i, j). Shared by threshold sweeps and weight construction.
pub fn distance_pairs(index: &CbgIndex) -> Result<Vec<(u32, u32, f64)>, WeightsError> {
    let n = index.len();
    if n < 2 {
        return Err(WeightsError::TooFewUnits(n));
    }
    let pts: Vec<(f64, f64)> = index.centroids().collect();
    let proj = Projection::from_points(pts.iter()).expect("n >= 2");
    let xy: Vec<(f64, f64)> = pts.iter().map(|&(lon, lat)| proj.to_miles(lon, lat)).collect();

    let mut pairs: Vec<(u32, u32, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut local = Vec::with_capacity(n - i - 1);
            for j in (i + 1)..n {
                let d = (xy[i].0 - xy[j].0).hypot(xy[i].1 - xy[j].1);
                local.push((i as u32, j as u32, d));
            }
            local
        })
        .flatten()
        .collect();
    for &(i, j, d) in &pairs {
        if d == 0.0 {
            return Err(WeightsError::DuplicateCentroids(i as usize, j as usize));
        }
    }
    pairs.par_sort_unstable_by(|a, b| {
        a.2.total_cmp(&b.2)
            .then_with(|| a.0.cmp(&b.0))
            .then_with(|| a.1.cmp(&b.1))
    });
    Ok(pairs)
}

/// Build a row-standardized weight matrix under the given scheme.
pub fn build_weights(index: &CbgIndex, scheme: WeightScheme) -> Result<SpatialWeights, WeightsError> {
    let n = index.len();
    if n < 2 {
        return Err(WeightsError::TooFewUnits(n));
    }
    if let WeightScheme::Knn { k } = scheme {
        if k == 0 || k >= n {
            return Err(WeightsError::BadK { k, n });
        }
    }

    let rows: Vec<Vec<(u32, f64)>> = match scheme {
        WeightScheme::Contiguity => (0..n)
            .map(|i| {
                index
                    .neighbors(i)
                    .iter()
                    .map(|&j| (j, 1.0))
                    .collect::<Vec<_>>()
            })
            .collect(),
        _ => {
            let pts: Vec<(f64, f64)> = index.centroids().collect();
            let proj = Projection::from_points(pts.iter()).expect("n >= 2");
            let xy: Vec<(f64, f64)> =
                pts.iter().map(|&(lon, lat)| proj.to_miles(lon, lat)).collect();

            let rows: Result<Vec<_>, WeightsError> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut row: Vec<(u32, f64)> = Vec::new();
                    let mut neighbors: Vec<(f64, u32)> = Vec::new();
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        let d = (xy[i].0 - xy[j].0).hypot(xy[i].1 - xy[j].1);
                        if d == 0.0 {
                            return Err(WeightsError::DuplicateCentroids(i.min(j), i.max(j)));
                        }
                        match scheme {
                            WeightScheme::InverseDistance => row.push((j as u32, 1.0 / d)),
                            WeightScheme::InverseDistanceThresholded { threshold_miles } => {
                                if d <= threshold_miles {
                                    row.push((j as u32, 1.0 / d));
                                }
                            }
                            WeightScheme::InverseSquare => row.push((j as u32, 1.0 / (d * d))),
                            WeightScheme::Knn { .. } => neighbors.push((d, j as u32)),
                            WeightScheme::Contiguity => unreachable!(),
                        }
                    }
                    if let WeightScheme::Knn { k } = scheme {
                        neighbors
                            .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                        row = neighbors.iter().take(k).map(|&(_, j)| (j, 1.0)).collect();
                        row.sort_unstable_by_key(|&(j, _)| j);
                    }
                    Ok(row)
                })
                .collect();
            rows?
        }
    };

    Ok(SpatialWeights::from_raw_rows(rows, scheme))
}
