//! Convex-integration constructions for the stochastic surface quasi-geostrophic
//! equation on the 2-torus: spectral tools, white-noise forcing, the iteration
//! engine and its verification.

pub mod spectral;
pub mod noise;
pub mod engine;
pub mod verification;
