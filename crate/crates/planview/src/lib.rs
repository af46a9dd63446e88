//! Desk-scale monocular plan-view driving stack: a kinematic traffic
//! simulator with synthetic perception, a camera-to-plan-view reprojection
//! pipeline, pluggable driving policies, and imitation-learning tooling.

pub mod bench;
pub mod config;
pub mod geometry;
pub mod imitation;
pub mod policy;
pub mod raster;
pub mod sensor;
pub mod world;
