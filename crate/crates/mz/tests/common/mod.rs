//! Independent oracles shared by the integration suites.  Everything here
//! deliberately avoids the library's own projection/selection code paths.

use rand::Rng;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Brute-force distance from `p` to `conv(vertices)`: a dense barycentric
/// seed grid followed by exact pairwise-exchange descent on the simplex
/// (each exchange step solves its 1-D quadratic exactly, so the convex
/// objective converges to the optimum independently of the production
/// minimum-norm-point code).
pub fn oracle_polytope_distance(vertices: &[Vec<f64>], p: &[f64]) -> f64 {
    let n = vertices.len();
    let k = p.len();
    let point = |w: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; k];
        for (wi, v) in w.iter().zip(vertices) {
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += wi * vi;
            }
        }
        x
    };
    let objective = |w: &[f64]| -> f64 {
        let x = point(w);
        dist(&x, p)
    };

    // Dense seed grid over the simplex (compositions of `m`).
    let m = 8usize;
    let mut best_w = vec![1.0 / n as f64; n];
    let mut best = objective(&best_w);
    let mut comp = vec![0usize; n];
    comp[0] = m;
    loop {
        let w: Vec<f64> = comp.iter().map(|&c| c as f64 / m as f64).collect();
        let v = objective(&w);
        if v < best {
            best = v;
            best_w = w;
        }
        // Next composition of m into n parts (colex enumeration).
        let mut i = 0;
        while i + 1 < n && comp[i] == 0 {
            i += 1;
        }
        if i + 1 >= n {
            break;
        }
        let head = comp[i];
        comp[i] = 0;
        comp[0] = head - 1;
        comp[i + 1] += 1;
    }

    // Exchange descent with best-pair selection: each step moves mass along
    // the steepest vertex-exchange direction with an exact line search, so
    // the convex objective reaches pairwise stationarity (the optimum)
    // without the rounding-level ping-pong a first-improvement scan suffers.
    let mut w = best_w;
    for _ in 0..100_000 {
        let x = point(&w);
        let g: Vec<f64> = x.iter().zip(p).map(|(a, b)| a - b).collect();
        let gscale = dot(&g, &g).sqrt();
        let mut best_drop = 0.0f64;
        let mut best_pair = None;
        for i in 0..n {
            if w[i] <= 0.0 {
                continue;
            }
            for j in 0..n {
                if i == j {
                    continue;
                }
                let dvec: Vec<f64> = vertices[j]
                    .iter()
                    .zip(&vertices[i])
                    .map(|(a, b)| a - b)
                    .collect();
                let dd = dot(&dvec, &dvec);
                if dd == 0.0 {
                    continue;
                }
                let slope = dot(&g, &dvec);
                if slope < best_drop {
                    best_drop = slope;
                    best_pair = Some((i, j, slope, dd));
                }
            }
        }
        match best_pair {
            Some((i, j, slope, dd)) if slope < -1e-15 * gscale.max(1e-30) => {
                let t = (-slope / dd).min(w[i]);
                w[i] -= t;
                w[j] += t;
            }
            _ => break,
        }
    }
    objective(&w)
}

/// Dense-sampling one-sided excess of `conv(a)` over `conv(b)`: sample each
/// edge of `a` densely (the distance is convex along edges, so the max sits
/// at a sampled endpoint) and take the exact oracle distance to `b`.
pub fn oracle_excess(a: &[Vec<f64>], b: &[Vec<f64>], samples: usize) -> f64 {
    let mut best = 0.0f64;
    for (i, va) in a.iter().enumerate() {
        best = best.max(oracle_polytope_distance(b, va));
        for vb in a.iter().skip(i + 1) {
            for s in 1..samples {
                let t = s as f64 / samples as f64;
                let q: Vec<f64> = va.iter().zip(vb).map(|(x, y)| x + t * (y - x)).collect();
                best = best.max(oracle_polytope_distance(b, &q));
            }
        }
    }
    best
}

pub fn oracle_hausdorff(a: &[Vec<f64>], b: &[Vec<f64>], samples: usize) -> f64 {
    oracle_excess(a, b, samples).max(oracle_excess(b, a, samples))
}

pub fn random_point<R: Rng>(rng: &mut R, k: usize, scale: f64) -> Vec<f64> {
    (0..k).map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * scale).collect()
}
