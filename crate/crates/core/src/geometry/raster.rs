//! Grid utilities: connected-component labelling and Euclidean distance transforms.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    pub fn offsets(self) -> &'static [(i64, i64)] {
        const FOUR: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        const EIGHT: [(i64, i64); 8] = [
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// Row-major boolean grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub nx: usize,
    pub ny: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn new(nx: usize, ny: usize) -> Self {
        Mask {
            nx,
            ny,
            bits: vec![false; nx * ny],
        }
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    #[inline]
    pub fn get(&self, ix: i64, iy: i64) -> bool {
        if ix < 0 || iy < 0 || ix >= self.nx as i64 || iy >= self.ny as i64 {
            return false;
        }
        self.bits[iy as usize * self.nx + ix as usize]
    }

    #[inline]
    pub fn set(&mut self, ix: usize, iy: usize, v: bool) {
        let i = self.idx(ix, iy);
        self.bits[i] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| (i % self.nx, i / self.nx))
    }

    pub fn and(&self, other: &Mask) -> Mask {
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect();
        Mask { nx: self.nx, ny: self.ny, bits }
    }

    pub fn or(&self, other: &Mask) -> Mask {
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect();
        Mask { nx: self.nx, ny: self.ny, bits }
    }

    pub fn and_not(&self, other: &Mask) -> Mask {
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && !*b).collect();
        Mask { nx: self.nx, ny: self.ny, bits }
    }

    pub fn not(&self) -> Mask {
        Mask {
            nx: self.nx,
            ny: self.ny,
            bits: self.bits.iter().map(|b| !*b).collect(),
        }
    }
}

/// Labels the connected components of `mask`; returns (labels, count) with
/// label 0 for unset cells and 1..=count for components in scan order.
pub fn label_components(mask: &Mask, conn: Connectivity) -> (Vec<u32>, u32) {
    let mut labels = vec![0u32; mask.bits.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..mask.bits.len() {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % mask.nx) as i64, (i / mask.nx) as i64);
            for (dx, dy) in conn.offsets() {
                let (xx, yy) = (x + dx, y + dy);
                if mask.get(xx, yy) {
                    let j = yy as usize * mask.nx + xx as usize;
                    if labels[j] == 0 {
                        labels[j] = next;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    (labels, next)
}

/// Number of connected components of `mask`.
pub fn component_count(mask: &Mask, conn: Connectivity) -> u32 {
    label_components(mask, conn).1
}

/// Squared Euclidean distance (in cells) from every cell to the nearest set cell
/// of `features`; `f64::INFINITY` everywhere when `features` is empty.
pub fn distance_transform_sq(features: &Mask) -> Vec<f64> {
    let (nx, ny) = (features.nx, features.ny);
    let inf = f64::INFINITY;
    let mut g = vec![inf; nx * ny];
    for (i, b) in features.bits.iter().enumerate() {
        if *b {
            g[i] = 0.0;
        }
    }
    // columns
    let mut buf = vec![0.0; nx.max(ny)];
    for x in 0..nx {
        for y in 0..ny {
            buf[y] = g[y * nx + x];
        }
        let out = dt_1d(&buf[..ny]);
        for y in 0..ny {
            g[y * nx + x] = out[y];
        }
    }
    for y in 0..ny {
        let out = dt_1d(&g[y * nx..(y + 1) * nx]);
        g[y * nx..(y + 1) * nx].copy_from_slice(&out);
    }
    g
}

// Felzenszwalb-Huttenlocher lower envelope of parabolas.
fn dt_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![f64::INFINITY; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k: usize = 0;
    let first = match f.iter().position(|x| x.is_finite()) {
        Some(p) => p,
        None => return d,
    };
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    let mut k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *out = dq * dq + f[p];
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_transform_matches_brute_force() {
        let mut m = Mask::new(13, 9);
        for (x, y) in [(2, 3), (10, 1), (7, 7), (0, 8)] {
            m.set(x, y, true);
        }
        let d = distance_transform_sq(&m);
        for y in 0..9 {
            for x in 0..13 {
                let brute = m
                    .iter_set()
                    .map(|(a, b)| {
                        let dx = a as f64 - x as f64;
                        let dy = b as f64 - y as f64;
                        dx * dx + dy * dy
                    })
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(d[y * 13 + x], brute, "at {x},{y}");
            }
        }
    }

    #[test]
    fn four_vs_eight_connectivity() {
        let mut m = Mask::new(3, 3);
        m.set(0, 0, true);
        m.set(1, 1, true);
        assert_eq!(component_count(&m, Connectivity::Four), 2);
        assert_eq!(component_count(&m, Connectivity::Eight), 1);
    }
}
