//! Sampled modulus of continuity.

use serde::{Deserialize, Serialize};

use super::shapes::Rect;
use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModulusReport {
    /// `(delta, omega(delta))`, sorted by increasing delta.
    pub values: Vec<(f64, f64)>,
    pub samples: usize,
}

impl ModulusReport {
    /// Value at the smallest tabulated delta that is `>= delta`.
    pub fn at(&self, delta: f64) -> Option<f64> {
        self.values
            .iter()
            .find(|(d, _)| *d >= delta * (1.0 - 1e-12))
            .map(|(_, w)| *w)
    }
}

const DIRECTIONS: usize = 16;
const RADII: usize = 4;

/// Estimates `omega(f, delta) = sup { |f(z1) - f(z2)| : |z1 - z2| <= delta }` over
/// `region` for each requested delta. Base points form a grid with `grid` points per
/// side; each is paired with points at radii `delta k / 4` in 16 directions.
pub fn modulus_of_continuity<F>(f: F, region: &Rect, deltas: &[f64], grid: usize) -> Result<ModulusReport>
where
    F: Fn(C64) -> C64,
{
    if !(region.width() > 0.0 && region.height() > 0.0) {
        return Err(Error::InvalidSet("modulus of continuity over an empty region".into()));
    }
    let grid = grid.max(2);
    let mut ds: Vec<f64> = deltas.iter().copied().filter(|d| *d > 0.0).collect();
    ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut values = Vec::with_capacity(ds.len());
    let mut samples = 0usize;
    let base: Vec<(C64, C64)> = (0..grid)
        .flat_map(|a| (0..grid).map(move |b| (a, b)))
        .map(|(a, b)| {
            let z = C64::new(
                region.x0 + region.width() * a as f64 / (grid - 1) as f64,
                region.y0 + region.height() * b as f64 / (grid - 1) as f64,
            );
            (z, f(z))
        })
        .collect();
    let mut running = 0.0f64;
    for &d in &ds {
        let mut w = running;
        for &(z, fz) in &base {
            for k in 1..=RADII {
                let r = d * k as f64 / RADII as f64;
                for t in 0..DIRECTIONS {
                    let th = std::f64::consts::TAU * t as f64 / DIRECTIONS as f64;
                    let z2 = z + C64::from_polar(r, th);
                    if !region.contains_point(z2.re, z2.im) {
                        continue;
                    }
                    samples += 1;
                    w = w.max((f(z2) - fz).norm());
                }
            }
        }
        running = w;
        values.push((d, w));
    }
    Ok(ModulusReport { values, samples })
}
