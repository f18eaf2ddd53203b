//! Compact sets, their rasterized models, dyadic frames and moduli of continuity.

pub mod frame;
pub mod model;
pub mod modulus;
pub mod raster;
pub mod shapes;

pub use frame::{Bump, DyadicFrame, SquareIndex};
pub use model::{CellLabel, CompactSetModel};
pub use modulus::{modulus_of_continuity, ModulusReport};
pub use raster::{Connectivity, Mask};
pub use shapes::{Cover, DiskSpec, Perforation, Rect, SetSpec};
