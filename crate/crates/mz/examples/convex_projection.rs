//! Convex bodies: distance, projection, inflation, Hausdorff distance.
//!
//! Run with: cargo run --release --example convex_projection

use mz::convex::ConvexBody;

fn main() -> mz::Result<()> {
    let ball = ConvexBody::ball(vec![0.0, 0.0], 1.0);
    let triangle = ConvexBody::vpolytope(vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0]]);

    println!("|ball|_inf     = {}", ball.sup_norm()?);
    println!("|triangle|_inf = {}", triangle.sup_norm()?);

    let p = [3.0, 4.0];
    let res = ball.project(&p)?;
    println!("project {:?} onto ball:     dist {:.6}, foot {:?}", p, res.distance, res.foot_point);
    let res = triangle.project(&p)?;
    println!("project {:?} onto triangle: dist {:.6}, foot {:?}", p, res.distance, res.foot_point);

    // Distance to the inflated body K_gamma is (dist - gamma)^+.
    for gamma in [0.0, 0.5, 2.0, 5.0] {
        println!("dist(p, ball_{{{gamma}}}) = {:.6}", ball.inflated_distance(gamma, &p)?);
    }

    println!("hausdorff(ball, triangle) = {:.6}", ball.hausdorff(&triangle)?);
    Ok(())
}
