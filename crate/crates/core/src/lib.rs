//! Numerical toolkit for Cauchy transforms of planar measures, analytic capacity
//! estimates, Vitushkin localization and rational approximation on compact sets.

pub mod approx;
pub mod capacity;
pub mod cli;
pub mod error;
pub mod etabuild;
pub mod geometry;
pub mod lp;
pub mod poly;
pub mod quad;
pub mod transform;
pub mod vitushkin;

pub type C64 = num_complex::Complex<f64>;

pub use error::{Error, Result};
