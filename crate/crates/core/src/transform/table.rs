//! Flat text serialization of measures, one carrier per line:
//!
//! ```text
//! cell x0 y0 x1 y1 wr wi
//! segment px py qx qy wr wi
//! arc cx cy radius theta0 theta1 wr wi
//! disk cx cy radius wr wi
//! annulus cx cy r_inner r_outer wr wi
//! ```
//!
//! Numbers use the shortest representation that round-trips exactly. Blank
//! lines and lines starting with `#` are ignored.

use std::fmt::Write;

use super::carrier::Carrier;
use super::measure::PlanarMeasure;
use crate::error::{Error, Result};
use crate::C64;

pub fn write_table(mu: &PlanarMeasure) -> String {
    let mut s = String::new();
    for (c, w) in mu.items() {
        let _ = match *c {
            Carrier::Cell(r) => write!(s, "cell {} {} {} {}", r.x0, r.y0, r.x1, r.y1),
            Carrier::Segment { p, q } => write!(s, "segment {} {} {} {}", p.re, p.im, q.re, q.im),
            Carrier::Arc { center, radius, theta0, theta1 } => {
                write!(s, "arc {} {} {} {} {}", center.re, center.im, radius, theta0, theta1)
            }
            Carrier::Disk { center, radius } => write!(s, "disk {} {} {}", center.re, center.im, radius),
            Carrier::Annulus { center, r_inner, r_outer } => {
                write!(s, "annulus {} {} {} {}", center.re, center.im, r_inner, r_outer)
            }
        };
        let _ = writeln!(s, " {} {}", w.re, w.im);
    }
    s
}

pub fn read_table(text: &str) -> Result<PlanarMeasure> {
    let mut items = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let kind = toks.next().unwrap_or_default();
        let nums: Vec<f64> = toks
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: bad number {t:?}", ln + 1)))
            })
            .collect::<Result<_>>()?;
        let want = match kind {
            "cell" | "segment" | "annulus" => 6,
            "arc" => 7,
            "disk" => 5,
            other => return Err(Error::Parse(format!("line {}: unknown carrier kind {other:?}", ln + 1))),
        };
        if nums.len() != want {
            return Err(Error::Parse(format!(
                "line {}: {kind} expects {want} numbers, found {}",
                ln + 1,
                nums.len()
            )));
        }
        let c = match kind {
            "cell" => Carrier::cell(nums[0], nums[1], nums[2], nums[3]),
            "segment" => Carrier::Segment {
                p: C64::new(nums[0], nums[1]),
                q: C64::new(nums[2], nums[3]),
            },
            "arc" => Carrier::Arc {
                center: C64::new(nums[0], nums[1]),
                radius: nums[2],
                theta0: nums[3],
                theta1: nums[4],
            },
            "disk" => Carrier::Disk {
                center: C64::new(nums[0], nums[1]),
                radius: nums[2],
            },
            _ => Carrier::Annulus {
                center: C64::new(nums[0], nums[1]),
                r_inner: nums[2],
                r_outer: nums[3],
            },
        };
        let w = C64::new(nums[want - 2], nums[want - 1]);
        items.push((c, w));
    }
    PlanarMeasure::complex(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip_is_exact() {
        let mu = PlanarMeasure::complex(vec![
            (Carrier::cell(0.1, 0.2, 0.30000000000000004, 0.4), C64::new(1.0 / 3.0, 0.0)),
            (Carrier::Segment { p: C64::new(-1.0, 0.0), q: C64::new(1.0, 1e-300) }, C64::new(2.5, -0.125)),
            (Carrier::Arc { center: C64::new(0.0, 0.0), radius: 0.7, theta0: -1.0, theta1: 2.0 }, C64::new(0.5, 0.0)),
            (Carrier::Disk { center: C64::new(3.0, 3.0), radius: 0.1 }, C64::new(1.0, 0.0)),
            (Carrier::Annulus { center: C64::new(3.0, 3.0), r_inner: 0.2, r_outer: 0.3 }, C64::new(1.0, 0.0)),
        ])
        .unwrap();
        let back = read_table(&write_table(&mu)).unwrap();
        assert_eq!(mu.items(), back.items());
    }

    #[test]
    fn table_reports_line_numbers() {
        let err = read_table("cell 0 0 1 1 1 0\ncell 0 0 1\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }
}
