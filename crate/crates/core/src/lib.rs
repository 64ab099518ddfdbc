//! Scale-coupled close-contact melting simulator.
//!
//! A space-time finite-element heat solver in the solid is coupled to
//! analytical melt-film closures for the velocity of a pressed heat source.
//! The source travels through the mesh in a structured strip that slides
//! past the static solid and recycles its rows through a virtual ring.

pub mod cbf;
pub mod ccm;
pub mod cli;
pub mod config;
pub mod driver;
pub mod fixtures;
pub mod mesh;
pub mod meshgen;
pub mod motion;
pub mod output;
pub mod roots;
pub mod sparse;
pub mod stfem;
pub mod verification;
