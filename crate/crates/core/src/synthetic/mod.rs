//! Synthetic scenarios with planted ground truth.
//!
//! The generator emits a full input table set (parcels, claims, stops, CBG
//! geometry, census, POI, road, and bridge-pair tables) constructed so the
//! pipeline's estimands equal planted values in the zero-noise limit:
//!
//! * Recovery rates are realized through device stop counts on a dyadic
//!   grid (power-of-two devices per CBG), so the extracted rate per CBG is
//!   bit-exact against the planted outcome.
//! * All regressors except mean damage extent are ordinary data whose exact
//!   pipeline values the generator obtains by calling the same code paths.
//! * The mean damage extent column absorbs the planted linear structure:
//!   (beta_mp I + theta_mp W) mp = y - beta0 - (other terms) - noise is
//!   solved for mp, then realized exactly with power-of-two market values.

mod generate;
mod oracle;

pub use generate::*;
pub use oracle::*;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error("weights error: {0}")]
    Weights(#[from] crate::weights::WeightsError),
    #[error("ingest error: {0}")]
    Ingest(#[from] crate::ingest::IngestError),
}

/// Spatial layout of CBG centroids.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Layout {
    /// Uniform random cloud in a square of the given side.
    UniformCloud { extent_miles: f64 },
    /// Regular grid filling a square of the given side.
    Lattice { extent_miles: f64 },
}

impl Layout {
    pub fn extent_miles(&self) -> f64 {
        match self {
            Layout::UniformCloud { extent_miles } | Layout::Lattice { extent_miles } => {
                *extent_miles
            }
        }
    }
}

/// Planted coefficient pair for one regressor.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlantedCoefficient {
    pub name: String,
    pub beta: f64,
    pub theta: f64,
}

/// Mobility trajectory shape parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MobilityParams {
    /// Devices homed per CBG; must be a power of two, at least 8, so all
    /// movement rates are exact dyadic rationals.
    pub devices_per_cbg: usize,
    /// Deepest allowed dip as a fraction of the baseline mover count.
    /// Zero produces flat trajectories (no perturbation anywhere).
    pub dip_depth: f64,
    /// Upper bound on the number of rising days before the new steady state.
    pub max_rise_days: usize,
}

impl Default for MobilityParams {
    fn default() -> Self {
        Self {
            devices_per_cbg: 16,
            dip_depth: 0.5,
            max_rise_days: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub n_cbgs: usize,
    pub layout: Layout,
    pub beta0: f64,
    /// Must include "mp" (the absorbing column) and must not include "mdp"
    /// (a threshold count that cannot be planted independently).
    pub coefficients: Vec<PlantedCoefficient>,
    pub spillover_radius_miles: f64,
    pub noise_sigma: f64,
    #[serde(default)]
    pub mobility: MobilityParams,
    /// Claims per CBG are 2 * (1..=max_claim_pairs), always even.
    #[serde(default = "default_claim_pairs")]
    pub max_claim_pairs: usize,
    /// Fraction of claim parcels realized through the uninsured (IA) path.
    #[serde(default)]
    pub ia_fraction: f64,
}

fn default_claim_pairs() -> usize {
    4
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_cbgs < 10 {
            return Err(SynthError::InvalidSpec(format!(
                "need at least 10 CBGs, got {}",
                self.n_cbgs
            )));
        }
        let extent = self.layout.extent_miles();
        if !(extent > 0.0) {
            return Err(SynthError::InvalidSpec("extent must be positive".into()));
        }
        if self.spillover_radius_miles > extent {
            return Err(SynthError::InvalidSpec(format!(
                "spillover radius {} exceeds layout extent {extent}",
                self.spillover_radius_miles
            )));
        }
        if !(self.spillover_radius_miles > 0.0) {
            return Err(SynthError::InvalidSpec("spillover radius must be positive".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(SynthError::InvalidSpec("noise sigma must be >= 0".into()));
        }
        let k = self.mobility.devices_per_cbg;
        if k < 8 || k & (k - 1) != 0 {
            return Err(SynthError::InvalidSpec(format!(
                "devices_per_cbg must be a power of two >= 8, got {k}"
            )));
        }
        if !(0.0..=0.9).contains(&self.mobility.dip_depth) {
            return Err(SynthError::InvalidSpec("dip_depth must be in [0, 0.9]".into()));
        }
        if self.max_claim_pairs == 0 {
            return Err(SynthError::InvalidSpec("max_claim_pairs must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.ia_fraction) {
            return Err(SynthError::InvalidSpec("ia_fraction must be in [0, 1]".into()));
        }
        let names: Vec<&str> = self.coefficients.iter().map(|c| c.name.as_str()).collect();
        if !names.contains(&"mp") {
            return Err(SynthError::InvalidSpec(
                "coefficients must include 'mp' (the absorbing column)".into(),
            ));
        }
        if names.contains(&"mdp") {
            return Err(SynthError::InvalidSpec(
                "'mdp' cannot carry planted coefficients (its value is a threshold byproduct)"
                    .into(),
            ));
        }
        let mp = self
            .coefficients
            .iter()
            .find(|c| c.name == "mp")
            .expect("checked above");
        if mp.beta == 0.0 {
            return Err(SynthError::InvalidSpec(
                "'mp' must have a nonzero beta to absorb the planted structure".into(),
            ));
        }
        for c in &self.coefficients {
            if !crate::frame::ALL_VARIABLE_NAMES.contains(&c.name.as_str()) {
                return Err(SynthError::InvalidSpec(format!(
                    "unknown variable '{}'",
                    c.name
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.coefficients {
            if !seen.insert(&c.name) {
                return Err(SynthError::InvalidSpec(format!(
                    "duplicate coefficient for '{}'",
                    c.name
                )));
            }
        }
        Ok(())
    }
}

/// Planted parameters plus exact generated intermediates.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GroundTruth {
    pub beta0: f64,
    pub coefficients: Vec<PlantedCoefficient>,
    pub spillover_radius_miles: f64,
    pub noise_sigma: f64,
    /// Exact recovery rate per CBG, index order.
    pub rr: Vec<f64>,
    /// Regressor columns used in the planted relation, index order.
    pub variables: std::collections::BTreeMap<String, Vec<f64>>,
    /// Spatial lags of the planted columns at the spillover radius.
    pub lagged: std::collections::BTreeMap<String, Vec<f64>>,
    /// Reference decay coefficients at the spillover-radius weights with
    /// min-max-scaled claim counts (None where excluded).
    pub decay_k: Vec<Option<f64>>,
    /// Drawn noise per CBG (all zero when sigma = 0).
    pub noise: Vec<f64>,
}
