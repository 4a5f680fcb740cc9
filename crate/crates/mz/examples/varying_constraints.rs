//! Truncation against a position-dependent constraint family: dyadic cube
//! segmentation, per-cube runs against inflated center bodies, stitching.
//!
//! Run with: cargo run --release --example varying_constraints

use mz::field::{sup_norm_derivative, Boundary, Grid, GridField, HomogeneousOperator};
use mz::truncation::{truncate_varying_k, KMap, VaryingKConfig, WholeSpaceParams};

fn main() -> mz::Result<()> {
    let grid = Grid::cube(2, 257, 1.0, Boundary::Extend)?;
    let op = HomogeneousOperator::gradient(2);
    // Balls whose radius grows along x_1: K_x = B(0, 1 + 0.1 x_1).
    let map = KMap::BallAffineRadius {
        center: vec![0.0, 0.0],
        base_radius: 1.0,
        slope: vec![0.1, 0.0],
    };

    for level in 1..=3usize {
        // Ladder member for this level: the constraint violation decays
        // with the level, matching how a converging input sequence is
        // consumed level by level.
        let mut u = GridField::zeros(grid.clone(), 1);
        let amp = (1.05 + 2.2 / level as f64) * 0.05 / 1.7171;
        let mut idx = [0usize; 2];
        for n in 0..grid.node_count() {
            grid.fill_multi(n, &mut idx);
            let x = grid.coord(&idx);
            let d2 = (x[0] - 0.5f64).powi(2) + (x[1] - 0.5).powi(2);
            let r2 = 0.05f64 * 0.05;
            if d2 < r2 {
                let q = 1.0 - d2 / r2;
                u.data[n] += amp * q * q * q;
            }
        }
        let m_abs = (1.05 * sup_norm_derivative(&u, 1)?).max(1.2);

        let mut whole = WholeSpaceParams::new(0.25 / level as f64, m_abs, 2);
        whole.alpha = 1e-4;
        let config = VaryingKConfig {
            k_map: map.clone(),
            eta: 1.0,
            modulus: vec![(0.1, 1.0), (0.5, 5.0), (1.0, 10.0)],
            level,
            u0: GridField::zeros(grid.clone(), 1),
            m_abs,
            cutoff_width: 0.08,
            u0_tol: 1e-9,
            whole,
        };
        let (_, report) = truncate_varying_k(&u, &config, &op)?;
        println!(
            "level {level}: cubes {}, sup_x dist(Bw, K_x) = {:.4} <= bound {:.4} ({}), modified {:.5}",
            report.cubes,
            report.sup_dist_pointwise,
            report.bound,
            report.bound_ok,
            report.mu_total
        );
    }
    Ok(())
}
