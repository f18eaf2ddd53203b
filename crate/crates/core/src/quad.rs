//! Gauss-Legendre rules and the tensor / collapsed-coordinate cubatures built on them.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::C64;

/// Nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (c + r * x, r * w))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared, lazily built rule of order `n`.
pub fn gauss(n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("gauss cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(GaussRule::new(n)))
        .clone()
}

pub fn integrate_1d<F: FnMut(f64) -> C64>(a: f64, b: f64, rule: &GaussRule, mut f: F) -> C64 {
    rule.mapped(a, b).map(|(x, w)| f(x) * w).sum()
}

/// Adaptive bisection driven by the difference between one panel and its two halves.
pub fn adaptive_1d<F: FnMut(f64) -> C64>(
    a: f64,
    b: f64,
    tol: f64,
    max_depth: usize,
    f: &mut F,
) -> Result<C64, C64> {
    let rule = gauss(10);
    let whole = integrate_1d(a, b, &rule, &mut *f);
    adaptive_rec(a, b, whole, tol, max_depth, &rule, f)
}

fn adaptive_rec<F: FnMut(f64) -> C64>(
    a: f64,
    b: f64,
    whole: C64,
    tol: f64,
    depth: usize,
    rule: &GaussRule,
    f: &mut F,
) -> Result<C64, C64> {
    let m = 0.5 * (a + b);
    let left = integrate_1d(a, m, rule, &mut *f);
    let right = integrate_1d(m, b, rule, &mut *f);
    let refined = left + right;
    let floor = 64.0 * f64::EPSILON * (left.norm() + right.norm());
    if (refined - whole).norm() <= tol.max(floor) {
        return Ok(refined);
    }
    if depth == 0 {
        return Err(refined);
    }
    let l = adaptive_rec(a, m, left, std::f64::consts::FRAC_1_SQRT_2 * tol, depth - 1, rule, f);
    let r = adaptive_rec(m, b, right, std::f64::consts::FRAC_1_SQRT_2 * tol, depth - 1, rule, f);
    match (l, r) {
        (Ok(x), Ok(y)) => Ok(x + y),
        (Ok(x), Err(y)) | (Err(x), Ok(y)) | (Err(x), Err(y)) => Err(x + y),
    }
}

/// Tensor rule over an axis-aligned rectangle; `f` receives (x, y).
pub fn integrate_rect<F: FnMut(f64, f64) -> C64>(
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    rule: &GaussRule,
    mut f: F,
) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (x, wx) in rule.mapped(x0, x1) {
        for (y, wy) in rule.mapped(y0, y1) {
            acc += f(x, y) * (wx * wy);
        }
    }
    acc
}

/// Tensor rule over the sub-rectangles cut out by sorted breakpoint lists.
pub fn integrate_rect_breaks<F: FnMut(f64, f64) -> C64>(
    xs: &[f64],
    ys: &[f64],
    rule: &GaussRule,
    mut f: F,
) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for wx in xs.windows(2) {
        if wx[1] <= wx[0] {
            continue;
        }
        for wy in ys.windows(2) {
            if wy[1] <= wy[0] {
                continue;
            }
            acc += integrate_rect(wx[0], wx[1], wy[0], wy[1], rule, &mut f);
        }
    }
    acc
}

/// Sorted, deduplicated breakpoints clipped to [lo, hi], endpoints included.
pub fn breakpoints(lo: f64, hi: f64, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = extra
        .into_iter()
        .filter(|t| *t > lo && *t < hi)
        .collect();
    v.push(lo);
    v.push(hi);
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let scale = (hi - lo).abs().max(1e-300);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * scale);
    v
}

/// Integral over the triangle (apex, p1, p2) in collapsed coordinates, which
/// absorbs a bounded direction-dependent singularity at the apex.
pub fn integrate_triangle_apex<F: FnMut(f64, f64) -> C64>(
    apex: (f64, f64),
    p1: (f64, f64),
    p2: (f64, f64),
    rule: &GaussRule,
    mut f: F,
) -> C64 {
    let (ax, ay) = apex;
    let e1 = (p1.0 - ax, p1.1 - ay);
    let e2 = (p2.0 - p1.0, p2.1 - p1.1);
    let jac = ((p1.0 - ax) * (p2.1 - ay) - (p1.1 - ay) * (p2.0 - ax)).abs();
    if jac == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let mut acc = C64::new(0.0, 0.0);
    for (u, wu) in rule.mapped(0.0, 1.0) {
        for (v, wv) in rule.mapped(0.0, 1.0) {
            let x = ax + u * (e1.0 + v * e2.0);
            let y = ay + u * (e1.1 + v * e2.1);
            acc += f(x, y) * (wu * wv * u * jac);
        }
    }
    acc
}

/// Rectangle integral for an integrand with a bounded point singularity at `lam`.
/// When `lam` lies inside, the rectangle is split at `lam` and every piece is
/// integrated in collapsed coordinates centred at `lam`.
pub fn integrate_rect_singular<F: FnMut(f64, f64) -> C64>(
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    lam: (f64, f64),
    rule: &GaussRule,
    mut f: F,
) -> C64 {
    let (lx, ly) = lam;
    if !(lx >= x0 && lx <= x1 && ly >= y0 && ly <= y1) {
        return integrate_rect(x0, x1, y0, y1, rule, f);
    }
    let xs = [x0, lx, x1];
    let ys = [y0, ly, y1];
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            let (a, b) = (xs[i], xs[i + 1]);
            let (c, d) = (ys[j], ys[j + 1]);
            if b <= a || d <= c {
                continue;
            }
            // corners in counter-clockwise order; the apex is the one equal to lam
            let corners = [(a, c), (b, c), (b, d), (a, d)];
            let k = corners
                .iter()
                .position(|p| p.0 == lx && p.1 == ly)
                .unwrap_or(0);
            let p1 = corners[(k + 1) % 4];
            let p2 = corners[(k + 2) % 4];
            let p3 = corners[(k + 3) % 4];
            acc += integrate_triangle_apex(lam, p1, p2, rule, &mut f);
            acc += integrate_triangle_apex(lam, p2, p3, rule, &mut f);
        }
    }
    acc
}
