use std::f64::consts::PI;

use proptest::prelude::*;

use capflow::geometry::{DyadicFrame, Rect};
use capflow::quad::adaptive_1d;
use capflow::transform::{Carrier, PlanarMeasure};
use capflow::C64;

fn oracle(r: &Rect, z: C64) -> C64 {
    let mut outer = |x: f64| {
        let mut inner = |y: f64| 1.0 / (C64::new(x, y) - z);
        adaptive_1d(r.y0, r.y1, 1e-13, 40, &mut inner).unwrap()
    };
    adaptive_1d(r.x0, r.x1, 1e-12, 40, &mut outer).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn cell_transform_matches_quadrature(
        x0 in -1.0..1.0f64, y0 in -1.0..1.0f64,
        w in 0.01..0.5f64, hgt in 0.01..0.5f64,
        dx in 1.1..4.0f64, angle in 0.0..(2.0 * PI),
    ) {
        let r = Rect::new(x0, y0, x0 + w, y0 + hgt);
        let (cx, cy) = r.center();
        let z = C64::new(cx, cy) + C64::from_polar(dx * w.hypot(hgt) / 2.0, angle);
        let v = Carrier::Cell(r).transform(z).unwrap();
        let o = oracle(&r, z);
        prop_assert!((v - o).norm() <= 1e-8 * o.norm(), "{} vs {}", v, o);
    }

    #[test]
    fn transform_is_linear_in_the_measure(
        a in -2.0..2.0f64, b in -2.0..2.0f64,
        zx in -2.0..2.0f64, zy in -2.0..2.0f64,
    ) {
        let c1 = Carrier::cell(0.0, 0.0, 0.3, 0.2);
        let c2 = Carrier::Disk { center: C64::new(-0.4, 0.1), radius: 0.25 };
        let z = C64::new(zx, zy);
        let mu = PlanarMeasure::complex(vec![(c1, C64::new(a, 0.0)), (c2, C64::new(0.0, b))]).unwrap();
        let direct = a * c1.transform(z).unwrap() + C64::new(0.0, b) * c2.transform(z).unwrap();
        prop_assert!((mu.transform(z).unwrap() - direct).norm() <= 1e-12 * (1.0 + direct.norm()));
    }

    #[test]
    fn disk_carrier_has_closed_form(r in 0.05..1.0f64, t in 0.0..(2.0 * PI), s in 0.0..3.0f64) {
        let z = C64::from_polar(s, t);
        let v = Carrier::Disk { center: C64::new(0.0, 0.0), radius: r }.transform(z).unwrap();
        let expect = if s >= r { -PI * r * r / z } else { -PI * z.conj() };
        prop_assert!((v - expect).norm() <= 1e-10 * (1.0 + expect.norm()));
    }

    #[test]
    fn partition_of_unity_sums_to_one(level in -2i32..6, x in -3.0..3.0f64, y in -3.0..3.0f64) {
        let f = DyadicFrame::new(level);
        let z = C64::new(x, y);
        let parts = f.partition_of_unity(z);
        let s: f64 = parts.iter().map(|p| p.1).sum();
        let ds: C64 = parts.iter().map(|p| p.2).sum();
        prop_assert!((s - 1.0).abs() <= 1e-12);
        prop_assert!(ds.norm() <= 1e-9 / f.delta);
        for (q, v, _) in parts {
            prop_assert!(v >= 0.0 && v <= 1.0);
            prop_assert!(v == 0.0 || f.support(q).contains_point(x, y));
        }
    }
}
