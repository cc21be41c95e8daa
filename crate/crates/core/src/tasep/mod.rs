//! Finite-time TASEP: the walk-hitting characteristic function, the
//! multipoint distribution series, and the independent oracles (Monte Carlo,
//! exact small-system solver, height encoding) used to validate it.

pub mod charfn;
pub mod ctmc;
pub mod height;
pub mod series;
pub mod sim;

pub use charfn::{
    binom_identity_check, build_hitting_table, ch_eval, ch_eval_with_table, ch_path_oracle,
    verify_residue, HittingTable,
};
pub use ctmc::ctmc_joint_cdf;
pub use height::{
    discretize_mnw, discretize_mnw_depth, height_decode, height_encode, HeightFunction,
};
pub use series::{f_factor, joint_cdf, joint_cdf_with_radii, series_eval, term_eval, CdfResult};
pub use sim::{mc_joint_cdf, poisson_tail, simulate, SimConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TasepError {
    #[error("initial condition needs at least one particle")]
    EmptyInitial,
    #[error("initial positions must be strictly decreasing")]
    NotDecreasing,
    #[error("query times must be positive and nondecreasing")]
    TimeOrder,
    #[error("duplicate (particle, time) query pair")]
    DuplicateQuery,
    #[error("Monte Carlo needs at least one sample")]
    EmptySamples,
    #[error("query particle index {0} outside 1..=N")]
    ParticleIndex(usize),
    #[error("u = -1 is outside the characteristic function domain")]
    UAtMinusOne,
    #[error("|u+1| >= |v+1| violates the closed-form precondition")]
    RatioPrecondition,
    #[error("f factor undefined at w in {{0, -1}}")]
    FFactorPole,
    #[error("state space of {0} configurations exceeds the exact-solver budget")]
    StateSpace(usize),
    #[error("imaginary residue {0:e} of the z-integral exceeds 1e-8")]
    ImagResidual(f64),
    #[error("discretization step too coarse: occupied blocks overlap")]
    BlockOverlap,
    #[error("height window [{0}, {1}] must contain the origin and every particle")]
    Window(i64, i64),
    #[error("slopes must be one +-1 increment per site of the window")]
    Slopes,
    #[error("the leading wedge must sit at the origin with zero height")]
    NotNormalized,
    #[error("discretization step must be positive and finite")]
    StepSize,
    #[error(transparent)]
    Series(#[from] crate::series::SeriesError),
    #[error(transparent)]
    Contour(#[from] crate::contour::ContourError),
}

/// Initial particle positions, rightmost first: y_1 > y_2 > ... > y_N.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TasepInitial {
    y: Vec<i64>,
}

impl TasepInitial {
    pub fn new(y: Vec<i64>) -> Result<Self, TasepError> {
        if y.is_empty() {
            return Err(TasepError::EmptyInitial);
        }
        if y.windows(2).any(|w| w[0] <= w[1]) {
            return Err(TasepError::NotDecreasing);
        }
        Ok(TasepInitial { y })
    }

    /// Densely packed particles at -1, -2, ..., -n.
    pub fn step(n: usize) -> Self {
        TasepInitial { y: (1..=n as i64).map(|i| -i).collect() }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[i64] {
        &self.y
    }

    pub fn y_top(&self) -> i64 {
        self.y[0]
    }

    pub fn y_bot(&self) -> i64 {
        *self.y.last().unwrap()
    }

    pub fn span(&self) -> i64 {
        self.y_top() - self.y_bot()
    }
}

/// One threshold event: particle k at time t is at or right of site a.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TasepQuery {
    pub k: usize,
    pub t: f64,
    pub a: i64,
}

/// The joint event, ordered by time; (k, t) pairs must be distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct TasepQueryList {
    entries: Vec<TasepQuery>,
}

impl TasepQueryList {
    pub fn new(entries: Vec<TasepQuery>, n_particles: usize) -> Result<Self, TasepError> {
        if entries.is_empty() {
            return Err(TasepError::TimeOrder);
        }
        for e in &entries {
            if e.k < 1 || e.k > n_particles {
                return Err(TasepError::ParticleIndex(e.k));
            }
            if !(e.t > 0.0) {
                return Err(TasepError::TimeOrder);
            }
        }
        if entries.windows(2).any(|w| w[0].t > w[1].t) {
            return Err(TasepError::TimeOrder);
        }
        for i in 0..entries.len() {
            for j in (i + 1)..entries.len() {
                if entries[i].k == entries[j].k && entries[i].t == entries[j].t {
                    return Err(TasepError::DuplicateQuery);
                }
            }
        }
        Ok(TasepQueryList { entries })
    }

    pub fn entries(&self) -> &[TasepQuery] {
        &self.entries
    }

    pub fn m(&self) -> usize {
        self.entries.len()
    }
}
