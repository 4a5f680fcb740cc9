//! Regularize one ball: variable-radius mollification with the measured
//! certificate (annulus mass, inflated mass after, interior sup, derivative
//! norms).
//!
//! Run with: cargo run --release --example ball_regularization

use mz::convex::ConvexBody;
use mz::field::{sup_norm_derivative, Boundary, Grid, GridField, HomogeneousOperator};
use mz::truncation::{regularize_on_ball, TargetSet};

fn main() -> mz::Result<()> {
    let grid = Grid::cube(2, 257, 1.0, Boundary::Extend)?;
    // A gradient spike hidden inside the inner half of the ball.
    let mut u = GridField::zeros(grid, 1);
    let (cx, cy, r_spike, amp) = (0.52, 0.47, 0.015, 0.02);
    let mut idx = [0usize; 2];
    for n in 0..u.grid.node_count() {
        u.grid.fill_multi(n, &mut idx);
        let x = u.grid.coord(&idx);
        let d2 = (x[0] - cx) * (x[0] - cx) + (x[1] - cy) * (x[1] - cy);
        if d2 < r_spike * r_spike {
            let q: f64 = 1.0 - d2 / (r_spike * r_spike);
            u.data[n] += amp * q * q * q;
        }
    }

    let k = ConvexBody::ball(vec![0.0, 0.0], 1.0);
    let target = TargetSet::new(&k);
    let op = HomogeneousOperator::gradient(2);
    let m_bound = 1.05 * sup_norm_derivative(&u, 1)?.max(1.0);
    let theta = 6e-4;

    let (u_tilde, cert) = regularize_on_ball(&u, &[0.5, 0.5], 0.4, theta, &target, m_bound, &op)?;
    let changed = u_tilde.data.iter().zip(&u.data).filter(|(a, b)| a != b).count();
    println!("theta             : {:.3e} (ball mean {:.3e})", cert.theta, cert.mean_before);
    println!("per-ball gamma    : {:.4}", cert.gamma);
    println!("annulus mass in   : {:.3e}", cert.l1_before_annulus);
    println!("inflated mass out : {:.3e}", cert.l1_after);
    println!("interior sup      : {:.3e}", cert.interior_sup);
    println!("derivative norms  : {:.4} -> {:.4}", cert.dl_before, cert.dl_after);
    println!("modified nodes    : {changed}");
    Ok(())
}
