//! Numerical tolerances. Every threshold used by a check lives here so a run
//! can override it (`--tol.<name>` on the command line) and reports can echo
//! the values actually used.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Green's formula / adjointness, relative to `‖α‖‖β‖`.
    pub green: f64,
    /// Relative singular-value cutoff `σ_i > rank·σ_max`.
    pub rank: f64,
    /// Required ratio between the last accepted and first rejected singular value.
    pub gap: f64,
    /// Harmonic-field residuals.
    pub harm: f64,
    /// Boundary value problem residuals.
    pub bvp: f64,
    /// Decomposition residuals (re-sum, orthogonality).
    pub decomp: f64,
    /// DN identities, relative to `‖Λ‖²`.
    pub dn: f64,
    /// Subspace coincidence angle (radians).
    pub theta: f64,
    /// Required separation angle between Neumann and Dirichlet fields (radians).
    pub theta_min: f64,
    /// Exact-sequence commutativity residual.
    pub seq: f64,
    /// Cup-product residual bound at the finer level.
    pub cup: f64,
    /// Required cup-residual reduction factor under one refinement.
    pub cup_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            green: 1e-10,
            rank: 1e-8,
            gap: 1e3,
            harm: 1e-8,
            bvp: 1e-8,
            decomp: 1e-8,
            dn: 1e-7,
            theta: 1e-6,
            theta_min: 1e-3,
            seq: 1e-6,
            cup: 5e-2,
            cup_ratio: 1.33,
        }
    }
}

impl Tolerances {
    pub fn set(&mut self, name: &str, value: f64) -> Result<(), String> {
        if !(value.is_finite() && value > 0.0) {
            return Err(format!("tolerance {name} must be positive, got {value}"));
        }
        let slot = match name {
            "green" => &mut self.green,
            "rank" => &mut self.rank,
            "gap" => &mut self.gap,
            "harm" => &mut self.harm,
            "bvp" => &mut self.bvp,
            "decomp" => &mut self.decomp,
            "dn" => &mut self.dn,
            "theta" => &mut self.theta,
            "theta_min" => &mut self.theta_min,
            "seq" => &mut self.seq,
            "cup" => &mut self.cup,
            "cup_ratio" => &mut self.cup_ratio,
            _ => return Err(format!("unknown tolerance `{name}`")),
        };
        *slot = value;
        Ok(())
    }

    pub fn rank_policy(&self) -> crate::linalg::RankPolicy {
        crate::linalg::RankPolicy { cutoff: self.rank, gap: self.gap }
    }
}
