//! Spatial smoothing surfaces for disease mapping.
//!
//! This crate builds penalised thin-plate spline surfaces over arbitrary
//! connectivity coordinate systems (geographic centroids or MDS embeddings of
//! movement flows), fits Bayesian hierarchical count/binomial models by MCMC
//! (alongside a CAR/BYM2 baseline), and quantifies how much of the spatial
//! variation each connectivity source explains.

pub mod connectivity;
pub mod inference;
pub mod metrics;
pub mod numerics;
pub mod region;
pub mod simgen;
pub mod smooth;

pub use numerics::{DenseMatrix, EigenDecomposition, NumericsError, SymmetricMatrix};
pub use region::{
    load_region_csv, make_grid_region, scaled_centroids, AreaUnit, Region, RegionError,
};
pub use smooth::{
    build_tps_basis, evaluate_smooth, select_knots, ConnectivityCoords, SmoothBasis, SmoothError,
};
