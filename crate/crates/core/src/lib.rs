//! Boundary-vorticity Navier–Stokes laboratory on domains with analytic boundary.

pub mod dn;
pub mod domain;
pub mod elliptic;
pub mod fd;
pub mod fields;
pub mod geometry;
pub mod linalg;
pub mod norms;
pub mod solver;
pub mod experiments;
pub mod cli_io;
pub mod stokes;
