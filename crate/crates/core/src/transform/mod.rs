//! Measures built from elementary carriers and their Cauchy transforms.

pub mod carrier;
pub mod diagnostics;
pub mod fast;
pub mod measure;
pub mod table;
pub mod truncated;

pub use carrier::{Carrier, Side};
pub use measure::PlanarMeasure;
pub use fast::FastTransform;
