//! Localization of a receiver from AOA, AOD and TOA measurements over
//! line-of-sight and single-bounce paths in urban canyon and corner scenes.
//!
//! The pipeline is: [`geometry`] builds a scene and enumerates paths,
//! [`measurement`] evaluates and perturbs the path parameters, [`likelihood`]
//! scores a candidate, [`estimator`] maximizes the likelihood with a
//! gradient-assisted particle filter, [`bounds`] gives the Cramer-Rao bound
//! and [`harness`] runs the Monte-Carlo and grid experiments.

pub mod bounds;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod harness;
pub mod likelihood;
pub mod measurement;
pub mod parallel;
pub mod rng;
pub mod scenarios;

pub use error::{Error, Result};
pub use estimator::{estimate, EstimateReport, GapfConfig, Strategy};
pub use geometry::{enumerate_paths, PathSet, Point2, Rect, Scenario, Wall};
pub use measurement::{Mode, NoiseProfile, Observation, ParamVector};
