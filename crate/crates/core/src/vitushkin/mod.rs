//! Vitushkin localization, coefficient-matched building blocks and the
//! approximation scheme driver.

mod blocks;
mod groups;
mod localize;
mod scheme;

pub use blocks::{make_blocks, BlockOptions, BlockSource, BuildingBlock, Provenance};

pub use groups::{group_rows, GroupCorrection, ResidualCoeffs};
pub use localize::{laurent_coeffs, localize, Field, LocalPiece, Localization, LocalizeOptions};
pub use scheme::{run_scheme, validation_points, LevelReport, SchemeOptions, SchemeReport, SquareReport};
