//! KPZ fixed point with compactly supported initial data: the Brownian
//! hitting characteristic function, the multipoint distribution series on
//! ray contours, and the scaling bridge from the particle system.

pub mod chi;
pub mod scaling;
pub mod series;

pub use chi::{
    chi_mnw, chi_narrow_wedge, chi_shifted, chi_single_wedge, chi_uc, dyadic_wedges,
    heat_shift_identity_check, verify_bound, ChiParams, CompactUC, MultiNarrowWedge,
};
pub use scaling::{
    bound_gate_points, convergence_study, fit_bound_constant, rescaled_ch, rescaled_ch_gap,
    scale_query, ConvergenceRow, ConvergenceTable,
};
pub use series::{
    flim_factor, joint_cdf, joint_cdf_with_config, recommended_params, series_eval, term_eval,
    LimitFunctions,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KpzError {
    #[error("a multi narrow wedge needs at least one wedge")]
    EmptyWedges,
    #[error("wedge positions must be finite and strictly decreasing")]
    WedgeOrder,
    #[error("chi requires Re(eta) > 0 > Re(xi)")]
    HalfPlane,
    #[error("anchor coincides with a wedge position")]
    AnchorOnWedge,
    #[error("evaluator value {0} exceeds its declared upper bound")]
    EvaluatorAboveBound(f64),
    #[error("evaluator is -infinity on the whole sample grid")]
    NoWedgeFound,
    #[error("need at least one query")]
    EmptyQuery,
    #[error("query times must be positive")]
    TauNonPositive,
    #[error("queries must be strictly increasing in (tau, alpha)")]
    QueryOrder,
    #[error("imaginary residue {0:e} of the z-integral exceeds 1e-8")]
    ImagResidual(f64),
    #[error("scaled particle index {0} must be positive; eps too coarse for this query")]
    ScaleIndex(i64),
    #[error("scaled horizon {0:.0} exceeds the study budget")]
    ScaleBudget(f64),
    #[error(transparent)]
    Tasep(#[from] crate::tasep::TasepError),
    #[error(transparent)]
    Series(#[from] crate::series::SeriesError),
    #[error(transparent)]
    Contour(#[from] crate::contour::ContourError),
}

/// One space-time query: the event H(alpha, tau) <= beta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KpzQuery {
    pub alpha: f64,
    pub tau: f64,
    pub beta: f64,
}

/// Queries sorted by time, ties broken by strictly increasing position.
#[derive(Debug, Clone)]
pub struct KpzQueryList {
    entries: Vec<KpzQuery>,
}

impl KpzQueryList {
    pub fn new(entries: Vec<KpzQuery>) -> Result<Self, KpzError> {
        if entries.is_empty() {
            return Err(KpzError::EmptyQuery);
        }
        if entries.iter().any(|q| !(q.tau > 0.0)) {
            return Err(KpzError::TauNonPositive);
        }
        let ordered = entries.windows(2).all(|w| {
            w[0].tau < w[1].tau || (w[0].tau == w[1].tau && w[0].alpha < w[1].alpha)
        });
        if !ordered {
            return Err(KpzError::QueryOrder);
        }
        Ok(KpzQueryList { entries })
    }

    pub fn m(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[KpzQuery] {
        &self.entries
    }
}

/// Initial data selector for the multipoint distribution.
#[derive(Debug, Clone)]
pub enum KpzInitial {
    /// Single narrow wedge at the origin.
    NarrowWedge,
    /// Finitely many narrow wedges.
    Wedges(MultiNarrowWedge),
}

impl KpzInitial {
    /// Scattering factor of this initial condition.
    pub fn chi(
        &self,
        eta: crate::Complex64,
        xi: crate::Complex64,
        params: &ChiParams,
    ) -> Result<crate::Complex64, KpzError> {
        match self {
            KpzInitial::NarrowWedge => Ok(chi_narrow_wedge(eta, xi)),
            KpzInitial::Wedges(w) => chi_mnw(w, eta, xi, params),
        }
    }

    /// Half-width of the support; controls the quadratic growth of chi in
    /// the imaginary directions.
    pub fn support_radius(&self) -> f64 {
        match self {
            KpzInitial::NarrowWedge => 0.0,
            KpzInitial::Wedges(w) => w.support_radius(),
        }
    }
}
