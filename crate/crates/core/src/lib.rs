//! Feedback cooling of a levitated nanoparticle under photon shot noise.

pub mod cli;
pub mod ensemble;
pub mod feedback;
pub mod params;
pub mod quantum;
pub mod semiclassical;
pub mod tables;
