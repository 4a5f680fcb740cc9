//! End-to-end whole-space truncation of a synthetic spike train, with the
//! full per-stage report.
//!
//! Run with: cargo run --release --example whole_space_truncation

use mz::convex::ConvexBody;
use mz::field::{sup_norm_derivative, Boundary, Grid, HomogeneousOperator};
use mz::harness::{generate_sequence, FamilyName, SyntheticFamily};
use mz::truncation::{truncate_whole_space, AxisBox, WholeSpaceParams};

fn main() -> mz::Result<()> {
    let grid = Grid::cube(2, 513, 8.0, Boundary::Extend)?;
    let op = HomogeneousOperator::gradient(2);
    let k = ConvexBody::ball(vec![0.0, 0.0], 1.0);
    let family = SyntheticFamily {
        name: FamilyName::SpikeTrain,
        lambda0: 1.5e-3,
        ratio: 0.5,
        support: AxisBox::new(vec![2.5, 2.5], vec![5.5, 5.5])?,
        spikes: 1,
        bump_radius: 0.045,
        j_count: 4,
    };

    let u0 = generate_sequence(&family, 0, &grid, &op, &k, 7)?;
    let m = 1.05 * sup_norm_derivative(&u0, 1)?;
    let gamma = 0.9 * 0.09 * (1.0 + 18.0 * m);

    for j in 0..family.j_count {
        let u_j = generate_sequence(&family, j, &grid, &op, &k, 7)?;
        let mut params = WholeSpaceParams::new(gamma, m, 2);
        params.support = Some(family.support.clone());
        let (_, report) = truncate_whole_space(&u_j, &k, &op, &params)?;
        println!(
            "j = {j}: lambda {:.3e} -> {:.3e}, stages {}, modified measure {:.4}, sup dist vs K_gammabar {:.2e}, stop {:?}",
            report.lambda_initial,
            report.lambda_final,
            report.stages.len(),
            report.mu_total,
            report.sup_dist_final,
            report.stop_reason
        );
        if j == 0 {
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
        }
    }
    Ok(())
}
