//! Stopping-time ball selection with a greedy Vitali pass.
//!
//! For every node carrying positive pointwise distance, the stopping time
//! finds the smallest dyadic radius whose ball mean drops to the threshold
//! while the half-radius mean still exceeds it (the mass is concentrated in
//! the inner half).  Candidates are then thinned greedily by descending
//! radius: a ball is accepted iff it is disjoint from all accepted balls and
//! fully inside the domain.  Every candidate center then lies in the
//! 5-dilate of some accepted ball.

use crate::error::MzError;
use crate::field::grid::GridField;
use crate::Result;
use serde::Serialize;

/// An accepted ball, node-centered with a dyadic node radius.
#[derive(Debug, Clone, Serialize)]
pub struct SelectedBall {
    pub center_idx: Vec<usize>,
    pub center: Vec<f64>,
    /// Radius in node units (a power of two).
    pub radius_nodes: i64,
    /// Radius in coordinate units (`radius_nodes * h`).
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionOutcome {
    pub balls: Vec<SelectedBall>,
    /// Nodes that admitted a stopping radius.
    pub candidates: Vec<Candidate>,
    /// Positive nodes for which no dyadic radius up to the cap qualified.
    pub uncovered: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub center_idx: Vec<usize>,
    pub radius_nodes: i64,
}

/// Row-range sums of a scalar field via per-row prefix sums along the last
/// axis; ball means then cost one subtraction per row of the ball.
struct PrefixSums {
    shape: Vec<usize>,
    last: usize,
    /// prefix[row * (last+1) + i] = sum of the first i entries of the row.
    prefix: Vec<f64>,
}

impl PrefixSums {
    fn new(e: &GridField) -> Self {
        let shape = e.grid.shape.clone();
        let last = *shape.last().unwrap();
        let rows = e.grid.node_count() / last;
        let mut prefix = vec![0.0f64; rows * (last + 1)];
        for row in 0..rows {
            let base = row * last;
            let pbase = row * (last + 1);
            let mut acc = 0.0;
            for i in 0..last {
                acc += e.data[base + i];
                prefix[pbase + i + 1] = acc;
            }
        }
        PrefixSums { shape, last, prefix }
    }

    /// Sum and node count of `e` over the clipped ball `B_R(c)` (node
    /// units), intersected with the grid.
    fn ball_sum(&self, center: &[usize], radius: i64) -> (f64, usize) {
        let d = self.shape.len();
        let r2 = radius * radius;
        let mut sum = 0.0;
        let mut count = 0usize;
        // Iterate over rows: all axes but the last.
        let mut off = vec![-radius; d - 1];
        if d == 1 {
            let c = center[0] as i64;
            let lo = (c - radius).max(0) as usize;
            let hi = ((c + radius) as usize).min(self.last - 1);
            sum += self.prefix[hi + 1] - self.prefix[lo];
            count += hi + 1 - lo;
            return (sum, count);
        }
        'outer: loop {
            let mut norm2 = 0i64;
            let mut ok = true;
            let mut row = 0usize;
            for a in 0..d - 1 {
                let i = center[a] as i64 + off[a];
                if i < 0 || i >= self.shape[a] as i64 {
                    ok = false;
                    break;
                }
                norm2 += off[a] * off[a];
                row = row * self.shape[a] + i as usize;
            }
            if ok && norm2 <= r2 {
                let span = ((r2 - norm2) as f64).sqrt().floor() as i64;
                // Guard against rounding at exact squares.
                let span = if (span + 1) * (span + 1) <= r2 - norm2 { span + 1 } else { span };
                let c = center[d - 1] as i64;
                let lo = (c - span).max(0) as usize;
                let hi = (c + span).min(self.last as i64 - 1);
                if hi >= lo as i64 {
                    let hi = hi as usize;
                    let pbase = row * (self.last + 1);
                    sum += self.prefix[pbase + hi + 1] - self.prefix[pbase + lo];
                    count += hi + 1 - lo;
                }
            }
            let mut a = d - 1;
            loop {
                if a == 0 {
                    break 'outer;
                }
                a -= 1;
                off[a] += 1;
                if off[a] <= radius {
                    break;
                }
                off[a] = -radius;
            }
        }
        (sum, count)
    }
}

/// Stopping-time selection on the nonnegative scalar field `e` with
/// threshold `theta * k_sup`, followed by the greedy Vitali pass.
pub fn select_balls(
    e: &GridField,
    theta: f64,
    k_sup: f64,
    radius_cap_frac: f64,
) -> Result<SelectionOutcome> {
    e.validate()?;
    if e.components != 1 {
        return Err(MzError::ComponentMismatch { expected: 1, got: e.components });
    }
    let d = e.grid.dim;
    let bound = 10.0f64.powi(-(d as i32 + 1));
    if !(theta > 0.0 && theta < bound) {
        return Err(MzError::ThetaTooLarge { theta, bound });
    }
    if e.data.iter().any(|&v| v < 0.0) {
        return Err(MzError::Argument("distance field must be nonnegative".into()));
    }
    let tau = theta * k_sup;
    let short_side = e.grid.shape.iter().min().unwrap() - 1;
    let cap = ((short_side as f64) * radius_cap_frac).floor() as i64;
    let cap = cap.max(1);

    let sums = PrefixSums::new(e);
    let mut candidates = Vec::new();
    let mut uncovered = 0usize;
    let mut idx = vec![0usize; d];
    for n in 0..e.grid.node_count() {
        let v = e.data[n];
        if v <= 0.0 {
            continue;
        }
        e.grid.fill_multi(n, &mut idx);
        // Mean over the degenerate half-ball {x} is the point value itself.
        let mut prev_exceeds = v > tau;
        let mut found = None;
        let mut radius = 1i64;
        while radius <= cap {
            let (sum, count) = sums.ball_sum(&idx, radius);
            let exceeds = sum > tau * count as f64;
            if !exceeds && prev_exceeds {
                found = Some(radius);
                break;
            }
            prev_exceeds = exceeds;
            radius *= 2;
        }
        match found {
            Some(r) => candidates.push(Candidate { center_idx: idx.clone(), radius_nodes: r }),
            None => {
                if prev_exceeds {
                    // Mass never thinned out below the threshold inside the cap.
                    uncovered += 1;
                }
            }
        }
    }

    // Greedy Vitali: radius descending, then lexicographic center order.
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        candidates[b]
            .radius_nodes
            .cmp(&candidates[a].radius_nodes)
            .then_with(|| candidates[a].center_idx.cmp(&candidates[b].center_idx))
    });

    let shape = &e.grid.shape;
    let mut accepted: Vec<&Candidate> = Vec::new();
    for &ci in &order {
        let cand = &candidates[ci];
        let r = cand.radius_nodes;
        let inside = (0..d).all(|a| {
            let c = cand.center_idx[a] as i64;
            c - r >= 0 && c + r <= shape[a] as i64 - 1
        });
        if !inside {
            continue;
        }
        let disjoint = accepted.iter().all(|b| {
            let mut dist2 = 0i64;
            for a in 0..d {
                let dx = b.center_idx[a] as i64 - cand.center_idx[a] as i64;
                dist2 += dx * dx;
            }
            let touch = b.radius_nodes + r;
            dist2 > touch * touch
        });
        if disjoint {
            accepted.push(cand);
        }
    }

    let h = e.grid.spacing;
    let balls = accepted
        .iter()
        .map(|c| SelectedBall {
            center_idx: c.center_idx.clone(),
            center: e.grid.coord(&c.center_idx),
            radius_nodes: c.radius_nodes,
            radius: c.radius_nodes as f64 * h,
        })
        .collect();
    Ok(SelectionOutcome { balls, candidates, uncovered })
}

impl SelectionOutcome {
    /// Exact disjointness of the accepted balls (squared integer geometry).
    pub fn balls_pairwise_disjoint(&self) -> bool {
        for i in 0..self.balls.len() {
            for j in (i + 1)..self.balls.len() {
                let a = &self.balls[i];
                let b = &self.balls[j];
                let mut dist2 = 0i64;
                for (x, y) in a.center_idx.iter().zip(&b.center_idx) {
                    let dx = *x as i64 - *y as i64;
                    dist2 += dx * dx;
                }
                let touch = a.radius_nodes + b.radius_nodes;
                if dist2 <= touch * touch {
                    return false;
                }
            }
        }
        true
    }

    /// Exhaustive check that every candidate center lies in the 5-dilate of
    /// some accepted ball.
    pub fn five_dilate_covers_candidates(&self) -> bool {
        self.candidates.iter().all(|c| {
            self.balls.iter().any(|b| {
                let mut dist2 = 0i64;
                for (x, y) in c.center_idx.iter().zip(&b.center_idx) {
                    let dx = *x as i64 - *y as i64;
                    dist2 += dx * dx;
                }
                dist2 <= 25 * b.radius_nodes * b.radius_nodes
            })
        })
    }
}
